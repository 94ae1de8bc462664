//! Linear programs over Hölder polytopes.
//!
//! The feasible set is
//!
//! ```text
//! |x_i - x_j| <= b_ij   for listed pairs,
//! |x_i|       <= g_i    for every variable,
//! eq . x       = 0,
//! ```
//!
//! which is bounded and centrally symmetric. [`HolderLp`] maximizes a linear
//! form over it with a primal active-set (vertex following) simplex. Rows
//! are implicit, so the ratio test costs `O(rows)` without storing a
//! constraint matrix, and the inverse of the working-set matrix is updated
//! by rank-one corrections. The solver keeps its final vertex, so a sequence
//! of objectives over the same polytope is solved from warm starts.

use crate::error::{Error, Result};

/// Constraint data of a Hölder polytope.
#[derive(Debug, Clone)]
pub struct HolderPolytope {
    n_vars: usize,
    pair_i: Vec<u32>,
    pair_j: Vec<u32>,
    pair_b: Vec<f64>,
    bounds: Vec<f64>,
    eq: Vec<f64>,
}

impl HolderPolytope {
    pub fn new(n_vars: usize, eq: Vec<f64>, bounds: Vec<f64>) -> Result<Self> {
        if n_vars == 0 || eq.len() != n_vars || bounds.len() != n_vars {
            return Err(Error::Config("polytope dimensions do not match".into()));
        }
        if !eq.iter().any(|w| *w != 0.0) {
            return Err(Error::Config("equality row must be nonzero".into()));
        }
        if bounds.iter().any(|b| !(*b > 0.0)) {
            return Err(Error::Config("variable bounds must be positive".into()));
        }
        Ok(Self { n_vars, pair_i: Vec::new(), pair_j: Vec::new(), pair_b: Vec::new(), bounds, eq })
    }

    pub fn add_pair(&mut self, i: usize, j: usize, b: f64) {
        debug_assert!(i != j && i < self.n_vars && j < self.n_vars && b > 0.0);
        self.pair_i.push(i as u32);
        self.pair_j.push(j as u32);
        self.pair_b.push(b);
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_pairs(&self) -> usize {
        self.pair_b.len()
    }

    pub fn eq(&self) -> &[f64] {
        &self.eq
    }

    /// Row count: two per pair, two per variable bound.
    pub fn n_rows(&self) -> usize {
        2 * self.pair_b.len() + 2 * self.n_vars
    }

    fn rhs(&self, r: usize) -> f64 {
        let np = self.pair_b.len();
        if r < 2 * np {
            self.pair_b[r / 2]
        } else {
            self.bounds[(r - 2 * np) / 2]
        }
    }

    /// Sparse normal of row `r`.
    fn normal(&self, r: usize) -> ([(usize, f64); 2], usize) {
        let np = self.pair_b.len();
        if r < 2 * np {
            let p = r / 2;
            let s = if r.is_multiple_of(2) { 1.0 } else { -1.0 };
            ([(self.pair_i[p] as usize, s), (self.pair_j[p] as usize, -s)], 2)
        } else {
            let q = r - 2 * np;
            let s = if q.is_multiple_of(2) { 1.0 } else { -1.0 };
            ([(q / 2, s), (0, 0.0)], 1)
        }
    }

    /// Largest constraint violation of `x` (0 when feasible).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for p in 0..self.pair_b.len() {
            let d = (x[self.pair_i[p] as usize] - x[self.pair_j[p] as usize]).abs();
            worst = worst.max(d - self.pair_b[p]);
        }
        for (xi, b) in x.iter().zip(&self.bounds) {
            worst = worst.max(xi.abs() - b);
        }
        let e: f64 = self.eq.iter().zip(x).map(|(a, b)| a * b).sum();
        worst.max(e.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Work {
    Eq,
    /// Variable held at zero; released once and never re-added.
    Pseudo(usize),
    Row(usize),
}

/// Warm-startable maximizer over a fixed [`HolderPolytope`].
#[derive(Debug, Clone)]
pub struct HolderLp<'a> {
    poly: &'a HolderPolytope,
    x: Vec<f64>,
    work: Vec<Work>,
    binv: Vec<f64>,
    in_work: Vec<bool>,
    since_refactor: usize,
    pivots: usize,
    // scratch
    lambda: Vec<f64>,
    dir: Vec<f64>,
    row_v: Vec<f64>,
    col: Vec<f64>,
}

const OPT_TOL: f64 = 1e-11;
const PIV_TOL: f64 = 1e-11;
const REFACTOR_EVERY: usize = 96;

impl<'a> HolderLp<'a> {
    /// Starts at the origin with every variable but one held by a pseudo row.
    pub fn new(poly: &'a HolderPolytope) -> Self {
        let n = poly.n_vars;
        let p = (0..n)
            .max_by(|&a, &b| poly.eq[a].abs().partial_cmp(&poly.eq[b].abs()).unwrap())
            .unwrap();
        let mut work = Vec::with_capacity(n);
        work.push(Work::Eq);
        work.extend((0..n).filter(|&j| j != p).map(Work::Pseudo));
        let mut binv = vec![0.0; n * n];
        binv[p * n] = 1.0 / poly.eq[p];
        for (k, w) in work.iter().enumerate().skip(1) {
            if let Work::Pseudo(j) = *w {
                binv[j * n + k] = 1.0;
                binv[p * n + k] = -poly.eq[j] / poly.eq[p];
            }
        }
        Self {
            poly,
            x: vec![0.0; n],
            work,
            binv,
            in_work: vec![false; poly.n_rows()],
            since_refactor: 0,
            pivots: 0,
            lambda: vec![0.0; n],
            dir: vec![0.0; n],
            row_v: vec![0.0; n],
            col: vec![0.0; n],
        }
    }

    /// Current vertex.
    pub fn solution(&self) -> &[f64] {
        &self.x
    }

    /// Total simplex pivots performed since construction.
    pub fn pivots(&self) -> usize {
        self.pivots
    }

    /// Maximizes `c . x`, continuing from the previous vertex.
    pub fn maximize(&mut self, c: &[f64]) -> Result<f64> {
        let n = self.poly.n_vars;
        if c.len() != n {
            return Err(Error::Lp("objective length mismatch".into()));
        }
        let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return Ok(0.0);
        }
        if !scale.is_finite() {
            return Err(Error::Lp("objective is not finite".into()));
        }
        let cs: Vec<f64> = c.iter().map(|v| v / scale).collect();
        let n_rows = self.poly.n_rows();
        let max_iter = 60 * (n + 10) + n_rows / 4;
        let mut degenerate_run = 0usize;
        for _ in 0..max_iter {
            self.multipliers(&cs);
            let bland = degenerate_run > 40;
            let Some((k, sgn)) = self.entering(bland) else {
                let value: f64 = c.iter().zip(&self.x).map(|(a, b)| a * b).sum();
                return Ok(value);
            };
            // d = sgn * column k of B^{-1}
            let dmax = {
                let mut m = 0.0f64;
                for i in 0..n {
                    let v = sgn * self.binv[i * n + k];
                    self.dir[i] = v;
                    m = m.max(v.abs());
                }
                m
            };
            let Some((r, step)) = self.ratio_test(dmax, bland) else {
                return Err(Error::Lp("objective unbounded over a bounded polytope".into()));
            };
            for i in 0..n {
                self.x[i] += step * self.dir[i];
            }
            self.replace(k, r);
            degenerate_run = if step <= 1e-15 { degenerate_run + 1 } else { 0 };
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
        }
        Err(Error::Lp(format!("no convergence after {max_iter} pivots")))
    }

    fn multipliers(&mut self, cs: &[f64]) {
        let n = self.poly.n_vars;
        self.lambda.iter_mut().for_each(|v| *v = 0.0);
        for (i, &ci) in cs.iter().enumerate() {
            if ci == 0.0 {
                continue;
            }
            let row = &self.binv[i * n..(i + 1) * n];
            for (l, b) in self.lambda.iter_mut().zip(row) {
                *l += ci * b;
            }
        }
    }

    /// Picks the working row to release and the sign of the move.
    fn entering(&self, bland: bool) -> Option<(usize, f64)> {
        let n = self.poly.n_vars;
        let mut best: Option<(usize, f64, f64)> = None;
        let mut best_key = usize::MAX;
        for k in 0..n {
            let l = self.lambda[k];
            let (score, sgn, key) = match self.work[k] {
                Work::Eq => continue,
                Work::Pseudo(j) if l.abs() > OPT_TOL => (l.abs(), l.signum(), j),
                Work::Row(r) if l < -OPT_TOL => (-l, -1.0, n + r),
                _ => continue,
            };
            if bland {
                if key < best_key {
                    best_key = key;
                    best = Some((k, sgn, score));
                }
            } else if best.is_none_or(|(_, _, s)| score > s) {
                best = Some((k, sgn, score));
            }
        }
        best.map(|(k, s, _)| (k, s))
    }

    fn ratio_test(&self, dmax: f64, bland: bool) -> Option<(usize, f64)> {
        let poly = self.poly;
        let x = &self.x;
        let d = &self.dir;
        let eps = PIV_TOL * dmax.max(1e-300);
        let mut best: Option<(usize, f64, f64)> = None;
        let consider = |r: usize, ax: f64, ad: f64, b: f64, best: &mut Option<(usize, f64, f64)>| {
            if ad <= eps || self.in_work[r] {
                return;
            }
            let step = (b - ax).max(0.0) / ad;
            match best {
                None => *best = Some((r, step, ad)),
                Some((br, bs, bad)) => {
                    let tie = (step - *bs).abs() <= 1e-13 * (1.0 + bs.abs());
                    let better = if tie {
                        if bland {
                            r < *br
                        } else {
                            ad > *bad
                        }
                    } else {
                        step < *bs
                    };
                    if better {
                        *best = Some((r, step, ad));
                    }
                }
            }
        };
        let np = poly.pair_b.len();
        for p in 0..np {
            let i = poly.pair_i[p] as usize;
            let j = poly.pair_j[p] as usize;
            let ad = d[i] - d[j];
            if ad == 0.0 {
                continue;
            }
            let ax = x[i] - x[j];
            let b = poly.pair_b[p];
            if ad > 0.0 {
                consider(2 * p, ax, ad, b, &mut best);
            } else {
                consider(2 * p + 1, -ax, -ad, b, &mut best);
            }
        }
        for i in 0..poly.n_vars {
            let ad = d[i];
            if ad > 0.0 {
                consider(2 * np + 2 * i, x[i], ad, poly.bounds[i], &mut best);
            } else if ad < 0.0 {
                consider(2 * np + 2 * i + 1, -x[i], -ad, poly.bounds[i], &mut best);
            }
        }
        best.map(|(r, s, _)| (r, s))
    }

    /// Replaces working row `k` by constraint row `r` (Sherman-Morrison).
    fn replace(&mut self, k: usize, r: usize) {
        let n = self.poly.n_vars;
        let (a, len) = self.poly.normal(r);
        for i in 0..n {
            self.col[i] = self.binv[i * n + k];
        }
        self.row_v.iter_mut().for_each(|v| *v = 0.0);
        for &(i, ai) in &a[..len] {
            let row = &self.binv[i * n..(i + 1) * n];
            for (v, b) in self.row_v.iter_mut().zip(row) {
                *v += ai * b;
            }
        }
        let denom = self.row_v[k];
        self.row_v[k] -= 1.0;
        for i in 0..n {
            let f = self.col[i] / denom;
            if f == 0.0 {
                continue;
            }
            let row = &mut self.binv[i * n..(i + 1) * n];
            for (b, v) in row.iter_mut().zip(&self.row_v) {
                *b -= f * v;
            }
        }
        if let Work::Row(old) = self.work[k] {
            self.in_work[old] = false;
        }
        self.work[k] = Work::Row(r);
        self.in_work[r] = true;
        self.since_refactor += 1;
        self.pivots += 1;
    }

    /// Rebuilds `B^{-1}` by Gauss-Jordan and re-solves `B x = b_W`.
    fn refactor(&mut self) -> Result<()> {
        let n = self.poly.n_vars;
        let mut a = vec![0.0; n * n];
        let mut rhs = vec![0.0; n];
        for (k, w) in self.work.iter().enumerate() {
            match *w {
                Work::Eq => a[k * n..(k + 1) * n].copy_from_slice(&self.poly.eq),
                Work::Pseudo(j) => a[k * n + j] = 1.0,
                Work::Row(r) => {
                    let (nz, len) = self.poly.normal(r);
                    for &(i, v) in &nz[..len] {
                        a[k * n + i] = v;
                    }
                    rhs[k] = self.poly.rhs(r);
                }
            }
        }
        let inv = invert(&a, n).ok_or_else(|| Error::Lp("working set became singular".into()))?;
        self.binv = inv;
        for i in 0..n {
            let row = &self.binv[i * n..(i + 1) * n];
            self.x[i] = row.iter().zip(&rhs).map(|(b, r)| b * r).sum();
        }
        self.since_refactor = 0;
        Ok(())
    }
}

/// Dense inverse by Gauss-Jordan elimination with partial pivoting.
fn invert(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&p, &q| m[p * n + col].abs().partial_cmp(&m[q * n + col].abs()).unwrap())?;
        let pv = m[piv * n + col];
        if pv.abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for j in 0..n {
                m.swap(piv * n + j, col * n + j);
                inv.swap(piv * n + j, col * n + j);
            }
        }
        let s = 1.0 / pv;
        for j in 0..n {
            m[col * n + j] *= s;
            inv[col * n + j] *= s;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[r * n + col];
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                m[r * n + j] -= f * m[col * n + j];
                inv[r * n + j] -= f * inv[col * n + j];
            }
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize, step: f64) -> HolderPolytope {
        // nodes 1..=n between pinned zeros at 0 and n+1
        let bounds: Vec<f64> = (1..=n).map(|i| step * (i.min(n + 1 - i)) as f64).collect();
        let mut p = HolderPolytope::new(n, vec![1.0; n], bounds).unwrap();
        for i in 0..n - 1 {
            p.add_pair(i, i + 1, step);
        }
        p
    }

    #[test]
    fn zero_objective_is_zero() {
        let p = chain(5, 0.1);
        let mut lp = HolderLp::new(&p);
        assert_eq!(lp.maximize(&[0.0; 5]).unwrap(), 0.0);
    }

    #[test]
    fn two_point_dipole() {
        // maximize x0 - x1 with |x0 - x1| <= 1, |xi| <= 1, x0 + x1 = 0
        let mut p = HolderPolytope::new(2, vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        p.add_pair(0, 1, 1.0);
        let mut lp = HolderLp::new(&p);
        let v = lp.maximize(&[1.0, -1.0]).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
        let x = lp.solution();
        assert!((x[0] - 0.5).abs() < 1e-14 && (x[1] + 0.5).abs() < 1e-14);
    }

    #[test]
    fn brute_force_small_chain() {
        // enumerate vertices of a 3-variable chain by checking all triples of
        // active constraints, then compare with the simplex optimum
        let p = chain(3, 0.5);
        let c = [0.3, -1.0, 0.45];
        let mut lp = HolderLp::new(&p);
        let v = lp.maximize(&c).unwrap();
        let mut rows: Vec<([f64; 3], f64)> = Vec::new();
        for r in 0..p.n_rows() {
            let (nz, len) = p.normal(r);
            let mut a = [0.0; 3];
            for &(i, s) in &nz[..len] {
                a[i] += s;
            }
            rows.push((a, p.rhs(r)));
        }
        let mut best = f64::NEG_INFINITY;
        for a in 0..rows.len() {
            for b in a + 1..rows.len() {
                let m = [rows[a].0, rows[b].0, [1.0, 1.0, 1.0]];
                let rhs = [rows[a].1, rows[b].1, 0.0];
                let Some(inv) = invert(&m.concat(), 3) else { continue };
                let x: Vec<f64> = (0..3).map(|i| (0..3).map(|j| inv[i * 3 + j] * rhs[j]).sum()).collect();
                if p.violation(&x) <= 1e-12 {
                    best = best.max(c.iter().zip(&x).map(|(u, w)| u * w).sum());
                }
            }
        }
        assert!((v - best).abs() < 1e-12, "{v} vs {best}");
    }

    #[test]
    fn warm_start_matches_cold_start() {
        let p = chain(40, 1.0 / 41.0);
        let mut warm = HolderLp::new(&p);
        for s in 0..6 {
            let c: Vec<f64> = (0..40).map(|i| ((i * 7 + s * 13) as f64 * 0.37).sin()).collect();
            let vw = warm.maximize(&c).unwrap();
            let vc = HolderLp::new(&p).maximize(&c).unwrap();
            assert!((vw - vc).abs() <= 1e-10 * vc.abs().max(1.0), "{vw} vs {vc}");
            assert!(p.violation(warm.solution()) < 1e-12);
        }
    }

    #[test]
    fn symmetric_polytope_gives_symmetric_values() {
        let p = chain(17, 0.05);
        let c: Vec<f64> = (0..17).map(|i| (i as f64 * 1.3).cos()).collect();
        let neg: Vec<f64> = c.iter().map(|v| -v).collect();
        let a = HolderLp::new(&p).maximize(&c).unwrap();
        let b = HolderLp::new(&p).maximize(&neg).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!(a >= 0.0);
    }

    #[test]
    fn invert_roundtrip() {
        let a = [4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0];
        let inv = invert(&a, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| a[i * 3 + k] * inv[k * 3 + j]).sum();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
        assert!(invert(&[1.0, 2.0, 2.0, 4.0], 2).is_none());
    }
}
