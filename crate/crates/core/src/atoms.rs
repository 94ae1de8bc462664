//! Weak Hardy space blocks: atoms supported in cubes with a sup-norm budget
//! `2^k` and vanishing moments, their assembly into test functions, and
//! far-field decay fits of square functions of single atoms.

use std::fmt;

use crate::calpha::DEFAULT_REFINE;
use crate::error::{Error, Result};
use crate::grid::{pad, GridFunction, HalfSpaceGrid, Point};
use crate::sqfn::{HalfSpaceField, Reach};
use crate::weights::{parse_weight, Cube, Weight};

/// Minimum number of grid cells per cube side.
pub const MIN_CELLS: usize = 8;

/// Profile family of an atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// Odd tent about the cube center (moment order 0).
    OddTent,
    /// Polynomial times bump with moments through `N` removed.
    Polynomial,
}

impl std::str::FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "tent" | "odd-tent" => Ok(Shape::OddTent),
            "poly" | "polynomial" => Ok(Shape::Polynomial),
            other => Err(Error::Parse(format!("unknown atom shape `{other}`"))),
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Shape::OddTent => "tent",
            Shape::Polynomial => "poly",
        })
    }
}

/// A block `b` supported in `Q(x0, r)` at level `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub cube: Cube,
    pub level: i32,
    pub order: usize,
    pub profile: GridFunction,
}

impl Atom {
    /// `2^k`.
    pub fn budget(&self) -> f64 {
        (self.level as f64).exp2()
    }
}

/// Index range `[lo, hi)` of cells of `g` lying inside the closed cube, per axis.
fn inner_cells(g: &GridFunction, cube: &Cube) -> [(usize, usize); 2] {
    let n = g.dim();
    let (lo, hi) = cube.bounds(n);
    let h = g.h();
    let eps = 1e-9 * h;
    let mut out = [(0usize, 1usize); 2];
    for a in 0..n {
        let first = ((lo[a] - g.lower()[a] - eps) / h).ceil().max(0.0);
        let last = ((hi[a] - g.lower()[a] + eps) / h).floor().min(g.shape()[a] as f64);
        out[a] = if last > first { (first as usize, last as usize) } else { (0, 0) };
    }
    out
}

/// Odd tent on `[0, 1]`: a positive triangle on `[0, 1/2]`, its negative
/// mirror on `[1/2, 1]`, sampled at cell centers with exact antisymmetry.
fn odd_tent(m: usize) -> Vec<f64> {
    let mut v = vec![0.0; m];
    for i in 0..m / 2 {
        let s = (i as f64 + 0.5) / m as f64;
        let x = 2.0 * s;
        v[i] = 1.0 - (2.0 * x - 1.0).abs();
        v[m - 1 - i] = -v[i];
    }
    v
}

fn even_tent(m: usize) -> Vec<f64> {
    (0..m).map(|i| 1.0 - (2.0 * (i as f64 + 0.5) / m as f64 - 1.0).abs()).collect()
}

/// Multi-indices of total degree at most `order` in dimension `n`.
fn multi_indices(n: usize, order: usize) -> Vec<[usize; 2]> {
    let mut out = Vec::new();
    for d in 0..=order {
        if n == 1 {
            out.push([d, 0]);
        } else {
            for a in (0..=d).rev() {
                out.push([a, d - a]);
            }
        }
    }
    out
}

/// `∫_{c - w/2}^{c + w/2} s^j ds`.
fn cell_monomial(c: f64, w: f64, j: usize) -> f64 {
    let a = c - 0.5 * w;
    let b = c + 0.5 * w;
    (b.powi(j as i32 + 1) - a.powi(j as i32 + 1)) / (j as f64 + 1.0)
}

fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap_or(col);
        if a[piv][col].abs() < 1e-300 {
            return Err(Error::Degenerate("singular moment system".into()));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            let (top, rest) = a.split_at_mut(r);
            for (x, y) in rest[0][col..n].iter_mut().zip(&top[col][col..n]) {
                *x -= f * y;
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Ok(x)
}

/// Builds an atom on the grid of `template` with sup norm exactly `2^k`,
/// support in `cube` and vanishing moments through `order`.
pub fn make_atom(template: &GridFunction, cube: &Cube, k: i32, order: usize, shape: Shape) -> Result<Atom> {
    let n = template.dim();
    let cells = inner_cells(template, cube);
    let counts: Vec<usize> = (0..n).map(|a| cells[a].1 - cells[a].0).collect();
    if counts.iter().any(|&c| c < MIN_CELLS) {
        return Err(Error::Resolution(format!(
            "cube of side {} spans {:?} grid cells per side, need at least {MIN_CELLS}",
            cube.side, counts
        )));
    }
    if shape == Shape::OddTent && order > 0 {
        return Err(Error::Config("odd tents only cancel moment 0; use the polynomial shape".into()));
    }
    let local: Vec<f64> = match shape {
        Shape::OddTent => {
            let t = odd_tent(counts[0]);
            if n == 1 {
                t
            } else {
                let e = even_tent(counts[1]);
                e.iter().flat_map(|ev| t.iter().map(move |tv| tv * ev)).collect()
            }
        }
        Shape::Polynomial => polynomial_profile(n, &counts, order)?,
    };
    let peak = local.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let budget = (k as f64).exp2();
    let mut values = vec![0.0; template.len()];
    let shape0 = template.shape()[0];
    for (li, v) in local.iter().enumerate() {
        let i0 = cells[0].0 + li % counts[0];
        let i1 = if n == 2 { cells[1].0 + li / counts[0] } else { 0 };
        let mut s = v / peak * budget;
        if v.abs() == peak {
            s = v.signum() * budget;
        }
        values[i0 + shape0 * i1] = s;
    }
    Ok(Atom { cube: *cube, level: k, order, profile: template.with_values(values)? })
}

fn polynomial_profile(n: usize, counts: &[usize], order: usize) -> Result<Vec<f64>> {
    let total: usize = counts.iter().product();
    let sigma = |a: usize, i: usize| 2.0 * (i as f64 + 0.5) / counts[a] as f64 - 1.0;
    let width = |a: usize| 2.0 / counts[a] as f64;
    let idx = |li: usize| [li % counts[0], if n == 2 { li / counts[0] } else { 0 }];
    let bump: Vec<f64> = (0..total)
        .map(|li| {
            let ii = idx(li);
            (0..n).map(|a| (1.0 - sigma(a, ii[a]).powi(2)).powi(2)).product()
        })
        .collect();
    let mono = |li: usize, beta: [usize; 2]| {
        let ii = idx(li);
        (0..n).map(|a| sigma(a, ii[a]).powi(beta[a] as i32)).product::<f64>()
    };
    let moment = |li: usize, beta: [usize; 2]| {
        let ii = idx(li);
        (0..n).map(|a| cell_monomial(sigma(a, ii[a]), width(a), beta[a])).product::<f64>()
    };
    let betas = multi_indices(n, order);
    let lead = [order + 1, 0];
    // b = bump * (σ_0^{N+1} + Σ_β a_β σ^β) with every cell moment of degree <= N zero
    let mut mat = vec![vec![0.0; betas.len()]; betas.len()];
    let mut rhs = vec![0.0; betas.len()];
    for (r, &bj) in betas.iter().enumerate() {
        for (li, &bl) in bump.iter().enumerate().take(total) {
            let w = bl * moment(li, bj);
            for (c, &bk) in betas.iter().enumerate() {
                mat[r][c] += w * mono(li, bk);
            }
            rhs[r] -= w * mono(li, lead);
        }
    }
    let coef = solve(mat.clone(), rhs.clone())?;
    let mut vals: Vec<f64> = (0..total)
        .map(|li| bump[li] * (mono(li, lead) + betas.iter().zip(&coef).map(|(b, a)| a * mono(li, *b)).sum::<f64>()))
        .collect();
    // one refinement sweep against the residual moments
    for _ in 0..2 {
        let resid: Vec<f64> = betas.iter().map(|&bj| (0..total).map(|li| vals[li] * moment(li, bj)).sum()).collect();
        let fix = solve(mat.clone(), resid.iter().map(|r| -r).collect())?;
        for (li, v) in vals.iter_mut().enumerate() {
            *v += bump[li] * betas.iter().zip(&fix).map(|(b, a)| a * mono(li, *b)).sum::<f64>();
        }
    }
    Ok(vals)
}

/// Worst violations of the three atom conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomReport {
    /// Largest |b| on cells not contained in the cube.
    pub support_violation: f64,
    /// `max(0, ‖b‖_∞ - 2^k)`.
    pub sup_violation: f64,
    /// `∫ b(x) (x - x0)^β dx` for `|β| <= N`, by exact cell integration.
    pub moments: Vec<f64>,
    /// Largest `|moment| / (2^k r^{n + |β|})`.
    pub relative_moment: f64,
    pub pass: bool,
}

pub fn validate_atom(b: &Atom) -> AtomReport {
    let g = &b.profile;
    let n = g.dim();
    let cells = inner_cells(g, &b.cube);
    let h = g.h();
    let budget = b.budget();
    let mut support_violation = 0.0f64;
    let mut sup = 0.0f64;
    let betas = multi_indices(n, b.order);
    let mut moments = vec![0.0; betas.len()];
    for (i, v) in g.values().iter().enumerate() {
        if *v == 0.0 {
            continue;
        }
        let ii = g.multi_index(i);
        let inside = (0..n).all(|a| ii[a] >= cells[a].0 && ii[a] < cells[a].1);
        if !inside {
            support_violation = support_violation.max(v.abs());
        }
        sup = sup.max(v.abs());
        let node = g.node(i);
        for (mi, beta) in betas.iter().enumerate() {
            let mut w = *v;
            for a in 0..n {
                w *= cell_monomial(node[a] + 0.5 * h - b.cube.center[a], h, beta[a]);
            }
            moments[mi] += w;
        }
    }
    let relative_moment = betas
        .iter()
        .zip(&moments)
        .map(|(beta, m)| m.abs() / (budget * b.cube.side.powi((n + beta[0] + beta[1]) as i32)))
        .fold(0.0, f64::max);
    let sup_violation = (sup - budget).max(0.0);
    let pass = support_violation == 0.0 && sup_violation <= 1e-10 * budget && relative_moment <= 1e-10;
    AtomReport { support_violation, sup_violation, moments, relative_moment, pass }
}

/// One cube `Q^k_i` of a weak Hardy specification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubeEntry {
    pub level: i32,
    pub cube: Cube,
}

/// Blocks of a test function `f = Σ_k Σ_i b^k_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakHardySpec {
    pub n: usize,
    pub p: f64,
    pub alpha: f64,
    pub weight: Weight,
    /// Target `c` of the per-level budgets `Σ_i w(Q^k_i) <= c 2^{-kp}`.
    pub c: f64,
    pub overlap: usize,
    pub order: usize,
    pub shape: Shape,
    pub cubes: Vec<CubeEntry>,
}

impl WeakHardySpec {
    pub fn new(n: usize, p: f64, alpha: f64, weight: Weight, c: f64, overlap: usize) -> Result<Self> {
        if weight.dim() != n {
            return Err(Error::Config("weight dimension differs from the spec dimension".into()));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        let lower = n as f64 / (n as f64 + alpha);
        if !(p > lower && p <= 1.0) {
            return Err(Error::Config(format!("p must lie in ({lower}, 1], got {p}")));
        }
        if !(c > 0.0) || overlap == 0 {
            return Err(Error::Config("c must be positive and overlap at least 1".into()));
        }
        Ok(Self { n, p, alpha, weight, c, overlap, order: 0, shape: Shape::OddTent, cubes: Vec::new() })
    }

    pub fn push(&mut self, level: i32, center: &[f64], side: f64) -> Result<()> {
        self.cubes.push(CubeEntry { level, cube: Cube::new(center, side)? });
        Ok(())
    }

    /// `c 2^{-kp}`.
    pub fn level_budget(&self, k: i32) -> f64 {
        self.c * (-(k as f64) * self.p).exp2()
    }

    /// Realized `max_k 2^{kp} Σ_i w(Q^k_i)`.
    pub fn realized_c(&self) -> f64 {
        let mut levels: Vec<i32> = self.cubes.iter().map(|e| e.level).collect();
        levels.sort_unstable();
        levels.dedup();
        levels
            .iter()
            .map(|&k| {
                let s: f64 = self.cubes.iter().filter(|e| e.level == k).map(|e| self.weight.measure(&e.cube)).sum();
                (k as f64 * self.p).exp2() * s
            })
            .fold(0.0, f64::max)
    }

    /// Checks both budget conditions, overlap counted at the nodes of `template`.
    pub fn check(&self, template: &GridFunction) -> Result<()> {
        for e in &self.cubes {
            let k = e.level;
            let s: f64 = self.cubes.iter().filter(|d| d.level == k).map(|d| self.weight.measure(&d.cube)).sum();
            if s > self.level_budget(k) * (1.0 + 1e-12) {
                return Err(Error::Config(format!("level {k} exceeds its budget: {s} > {}", self.level_budget(k))));
            }
        }
        let n = self.n;
        let mut levels: Vec<i32> = self.cubes.iter().map(|e| e.level).collect();
        levels.sort_unstable();
        levels.dedup();
        for k in levels {
            for i in 0..template.len() {
                let x = template.node(i);
                let count = self.cubes.iter().filter(|e| e.level == k && e.cube.contains(n, &x[..n])).count();
                if count > self.overlap {
                    return Err(Error::Config(format!("level {k} overlaps {count} times at {:?}", &x[..n])));
                }
            }
        }
        Ok(())
    }

    /// Places cubes level by level from `start` along the first axis with
    /// the given `gap`. At level `k` the side is the largest multiple of
    /// `h` with `w(Q) <= c 2^{-kp}` (at least `MIN_CELLS` cells), and cubes
    /// are added left to right while the level budget allows, at most
    /// `per_level` of them.
    #[allow(clippy::too_many_arguments)]
    pub fn greedy(&mut self, levels: std::ops::RangeInclusive<i32>, h: f64, start: &[f64], gap: f64, per_level: usize, max_side: f64) -> Result<()> {
        let n = self.n;
        let mut cursor = pad(start);
        for k in levels {
            let budget = self.level_budget(k);
            let mut cells = (max_side / h).floor() as usize;
            let cube_at = |cur: &Point, cells: usize| {
                let side = cells as f64 * h;
                let mut c = *cur;
                c[0] += 0.5 * side;
                if n == 2 {
                    c[1] += 0.5 * side;
                }
                Cube { center: c, side }
            };
            while cells >= MIN_CELLS && self.weight.measure(&cube_at(&cursor, cells)) > budget {
                cells -= 1;
            }
            if cells < MIN_CELLS {
                continue;
            }
            let mut used = 0.0;
            for _ in 0..per_level {
                let q = cube_at(&cursor, cells);
                let w = self.weight.measure(&q);
                if used + w > budget * (1.0 + 1e-12) {
                    break;
                }
                used += w;
                self.cubes.push(CubeEntry { level: k, cube: q });
                cursor[0] += q.side + gap;
            }
        }
        Ok(())
    }
}

impl fmt::Display for WeakHardySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n = {}", self.n)?;
        writeln!(f, "p = {}", self.p)?;
        writeln!(f, "alpha = {}", self.alpha)?;
        writeln!(f, "weight = {}", self.weight)?;
        writeln!(f, "c = {}", self.c)?;
        writeln!(f, "overlap = {}", self.overlap)?;
        writeln!(f, "order = {}", self.order)?;
        writeln!(f, "shape = {}", self.shape)?;
        writeln!(f, "[cubes]")?;
        for e in &self.cubes {
            let x0 = if self.n == 1 {
                format!("{}", e.cube.center[0])
            } else {
                format!("{},{}", e.cube.center[0], e.cube.center[1])
            };
            writeln!(f, "k={} x0={} r={}", e.level, x0, e.cube.side)?;
        }
        Ok(())
    }
}

impl std::str::FromStr for WeakHardySpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut keys = std::collections::HashMap::new();
        let mut cube_lines = Vec::new();
        let mut in_cubes = false;
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                in_cubes = line == "[cubes]";
                continue;
            }
            if in_cubes || line.starts_with("k=") {
                cube_lines.push((no + 1, line.to_string()));
            } else {
                let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse(format!("line {}: expected key = value", no + 1)))?;
                keys.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        let num = |k: &str| -> Result<f64> {
            keys.get(k)
                .ok_or_else(|| Error::Parse(format!("missing key `{k}`")))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("key `{k}`: {e}")))
        };
        let mut n = keys.get("n").map(|s| s.parse::<usize>()).transpose().map_err(|e| Error::Parse(format!("key `n`: {e}")))?;
        let mut cubes = Vec::new();
        for (no, line) in &cube_lines {
            let mut k = None;
            let mut x0 = None;
            let mut r = None;
            for tok in line.split_whitespace() {
                let (key, val) = tok.split_once('=').ok_or_else(|| Error::Parse(format!("line {no}: bad token `{tok}`")))?;
                match key {
                    "k" => k = Some(val.parse::<i32>().map_err(|e| Error::Parse(format!("line {no}: {e}")))?),
                    "x0" => {
                        x0 = Some(
                            val.split(',')
                                .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("line {no}: {e}"))))
                                .collect::<Result<Vec<_>>>()?,
                        )
                    }
                    "r" => r = Some(val.parse::<f64>().map_err(|e| Error::Parse(format!("line {no}: {e}")))?),
                    other => return Err(Error::Parse(format!("line {no}: unknown field `{other}`"))),
                }
            }
            let (k, x0, r) = match (k, x0, r) {
                (Some(k), Some(x), Some(r)) => (k, x, r),
                _ => return Err(Error::Parse(format!("line {no}: cube needs k=, x0= and r="))),
            };
            let dim = *n.get_or_insert(x0.len());
            if x0.len() != dim {
                return Err(Error::Parse(format!("line {no}: center has {} coordinates, expected {dim}", x0.len())));
            }
            cubes.push(CubeEntry { level: k, cube: Cube::new(&x0, r)? });
        }
        let n = n.unwrap_or(1);
        let weight = parse_weight(keys.get("weight").map(String::as_str).unwrap_or("const c=1"), n)?;
        let overlap = keys.get("overlap").map(|s| s.parse::<usize>()).transpose().map_err(|e| Error::Parse(format!("key `overlap`: {e}")))?;
        let mut spec = WeakHardySpec::new(n, num("p")?, num("alpha")?, weight, num("c")?, overlap.unwrap_or(1))?;
        if let Some(o) = keys.get("order") {
            spec.order = o.parse().map_err(|e| Error::Parse(format!("key `order`: {e}")))?;
        }
        if let Some(s) = keys.get("shape") {
            spec.shape = s.parse()?;
        }
        spec.cubes = cubes;
        Ok(spec)
    }
}

/// Output of [`synthesize`].
#[derive(Debug, Clone)]
pub struct Synthesis {
    pub f: GridFunction,
    /// Realized norm proxy `c`.
    pub c: f64,
    pub atoms: Vec<Atom>,
}

impl Synthesis {
    /// `c^{1/p}`.
    pub fn norm_proxy(&self, p: f64) -> f64 {
        self.c.powf(1.0 / p)
    }
}

/// Sums the atoms of `spec` on the grid of `template`.
pub fn synthesize(spec: &WeakHardySpec, template: &GridFunction) -> Result<Synthesis> {
    if spec.cubes.is_empty() {
        return Err(Error::Degenerate("weak Hardy spec has no cubes".into()));
    }
    if template.dim() != spec.n {
        return Err(Error::Config("template and spec dimensions differ".into()));
    }
    spec.check(template)?;
    let mut values = vec![0.0; template.len()];
    let mut atoms = Vec::with_capacity(spec.cubes.len());
    for e in &spec.cubes {
        let shape = if spec.order > 0 { Shape::Polynomial } else { spec.shape };
        let a = make_atom(template, &e.cube, e.level, spec.order, shape)?;
        let report = validate_atom(&a);
        if !report.pass {
            return Err(Error::Config(format!("atom at level {} failed validation: {report:?}", e.level)));
        }
        for (v, b) in values.iter_mut().zip(a.profile.values()) {
            *v += b;
        }
        atoms.push(a);
    }
    Ok(Synthesis { f: template.with_values(values)?, c: spec.realized_c(), atoms })
}

/// Least-squares line through `(ln d, ln S)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    /// `exp(intercept)`.
    pub constant: f64,
    /// `constant / (‖b‖_∞ r^{n+α})`.
    pub normalized: f64,
}

/// Fits `ln value` against `ln distance`.
pub fn fit_power_law(samples: &[(f64, f64)]) -> Result<(f64, f64)> {
    if samples.len() < 4 {
        return Err(Error::Fit(format!("need at least 4 samples, got {}", samples.len())));
    }
    if samples.iter().any(|(d, v)| !(*d > 0.0) || !(*v > 0.0)) {
        return Err(Error::Fit("samples must have positive distance and value".into()));
    }
    let pts: Vec<(f64, f64)> = samples.iter().map(|(d, v)| (d.ln(), v.ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::Fit("sample distances must differ".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Lattice points `x0 + d e_1` with `d` spaced geometrically over `[d_lo, d_hi]`.
pub fn ray(template: &GridFunction, x0: &Point, d_lo: f64, d_hi: f64, count: usize) -> Vec<Point> {
    let lat = template.lattice();
    let n = template.dim();
    let mut out: Vec<Point> = Vec::with_capacity(count);
    for i in 0..count {
        let d = d_lo * (d_hi / d_lo).powf(i as f64 / (count.max(2) - 1) as f64);
        let mut k = [0i64; 2];
        for a in 0..n {
            let target = if a == 0 { x0[0] + d } else { x0[a] };
            k[a] = lat.nearest(target, a);
        }
        let p = lat.point(k);
        if out.last() != Some(&p) {
            out.push(p);
        }
    }
    out
}

/// Fits the decay of the area functional of aperture `beta` along `points`.
pub fn decay_fit_on_field(field: &HalfSpaceField, atom: &Atom, alpha: f64, beta: f64, points: &[Point]) -> Result<DecayFit> {
    let n = atom.profile.dim();
    let x0 = atom.cube.center;
    let r = atom.cube.side;
    let limit = (n as f64).sqrt() * r;
    let mut samples = Vec::with_capacity(points.len());
    for x in points {
        let d = crate::grid::dist(n, x, &x0);
        if d <= limit {
            return Err(Error::Fit(format!("point at distance {d} is not beyond √n·r = {limit}")));
        }
        samples.push((d, field.area(&x[..n], beta)?));
    }
    let (slope, intercept) = fit_power_law(&samples)?;
    let constant = intercept.exp();
    let normalized = constant / (atom.profile.sup_norm() * r.powf(n as f64 + alpha));
    Ok(DecayFit { slope, intercept, constant, normalized })
}

fn ray_field(b: &Atom, alpha: f64, beta: f64, points: &[Point], hs: &HalfSpaceGrid, m: usize) -> Result<HalfSpaceField> {
    let n = b.profile.dim();
    if points.is_empty() {
        return Err(Error::Fit("no sample points".into()));
    }
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        for a in 0..n {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    HalfSpaceField::intrinsic_refined(&b.profile, alpha, m, DEFAULT_REFINE, hs, &Reach::new(&lo[..n], &hi[..n], beta, 0.0)?, None)
}

/// Decay of `𝒮_α(b)` along `points`, with 1-d mesh refinement.
pub fn lemma31_decay_fit(b: &Atom, alpha: f64, points: &[Point], hs: &HalfSpaceGrid, m: usize) -> Result<DecayFit> {
    if points.len() < 4 {
        return Err(Error::Fit(format!("need at least 4 sample points, got {}", points.len())));
    }
    let field = ray_field(b, alpha, 1.0, points, hs, m)?;
    decay_fit_on_field(&field, b, alpha, 1.0, points)
}

/// Decay of `𝒮_{α,2^j}(b)` along `points`.
pub fn lemma42_decay_fit(b: &Atom, alpha: f64, j: u32, points: &[Point], hs: &HalfSpaceGrid, m: usize) -> Result<DecayFit> {
    if points.len() < 4 {
        return Err(Error::Fit(format!("need at least 4 sample points, got {}", points.len())));
    }
    let beta = (j as f64).exp2();
    let field = ray_field(b, alpha, beta, points, hs, m)?;
    decay_fit_on_field(&field, b, alpha, beta, points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoxDomain;

    fn host(h: f64) -> GridFunction {
        GridFunction::make_grid(1, &BoxDomain::new(&[-2.0], &[8.0]), h, |_| 0.0).unwrap()
    }

    #[test]
    fn odd_tent_example() {
        let g = host(1.0 / 16.0);
        let q = Cube::new(&[0.5], 1.0).unwrap();
        let a = make_atom(&g, &q, 0, 0, Shape::OddTent).unwrap();
        let r = validate_atom(&a);
        assert!(r.pass, "{r:?}");
        assert_eq!(a.profile.sup_norm(), 1.0);
        assert!(a.profile.integral().abs() < 1e-15);
        // positive on [0, 1/2), negative on [1/2, 1)
        assert!(a.profile.evaluate(&[0.25]) > 0.0 && a.profile.evaluate(&[0.75]) < 0.0);
        assert_eq!(a.profile.evaluate(&[1.0]), 0.0);
        let a3 = make_atom(&g, &q, 3, 0, Shape::OddTent).unwrap();
        assert_eq!(a3.profile.sup_norm(), 8.0);
    }

    #[test]
    fn resolution_error() {
        let g = host(0.25);
        let q = Cube::new(&[0.5], 1.0).unwrap();
        assert!(matches!(make_atom(&g, &q, 0, 0, Shape::OddTent), Err(Error::Resolution(_))));
    }

    #[test]
    fn polynomial_moments_vanish() {
        let g = host(1.0 / 32.0);
        let q = Cube::new(&[0.5], 1.0).unwrap();
        for order in 1..=3 {
            let a = make_atom(&g, &q, 1, order, Shape::Polynomial).unwrap();
            let r = validate_atom(&a);
            assert!(r.pass, "order {order}: {r:?}");
            assert_eq!(r.moments.len(), order + 1);
            // the next moment survives
            let mut b = a.clone();
            b.order = order + 1;
            assert!(validate_atom(&b).moments[order + 1].abs() > 1e-6);
        }
        let g2 = GridFunction::make_grid(2, &BoxDomain::centered(2, 1.0), 1.0 / 16.0, |_| 0.0).unwrap();
        let a = make_atom(&g2, &Cube::new(&[0.0, 0.0], 1.0).unwrap(), 0, 2, Shape::Polynomial).unwrap();
        let r = validate_atom(&a);
        assert!(r.pass && r.moments.len() == 6, "{r:?}");
        let t = make_atom(&g2, &Cube::new(&[0.0, 0.0], 1.0).unwrap(), 0, 0, Shape::OddTent).unwrap();
        assert!(validate_atom(&t).pass);
    }

    #[test]
    fn violations_are_reported() {
        let g = host(1.0 / 16.0);
        let q = Cube::new(&[0.5], 1.0).unwrap();
        let a = make_atom(&g, &q, 0, 0, Shape::OddTent).unwrap();
        let shifted = Atom { profile: a.profile.translated(&[2.0]).with_values(a.profile.values().to_vec()).unwrap(), ..a.clone() };
        // same samples, but now the cells sit in [2, 3)
        let r = validate_atom(&shifted);
        assert!(r.support_violation > 0.0 && !r.pass);
        let offset = a.profile.combine(1.0, &make_indicator(&g, &q), 0.1).unwrap();
        let r = validate_atom(&Atom { profile: offset, ..a.clone() });
        assert!((r.moments[0] - 0.1).abs() < 1e-12, "{:?}", r.moments);
        assert!(!r.pass);
    }

    fn make_indicator(g: &GridFunction, q: &Cube) -> GridFunction {
        let q = *q;
        GridFunction::make_grid(1, &g.domain(), g.h(), move |x| if q.contains(1, &[x[0] + 1e-9]) && x[0] + 1e-9 < q.center[0] + 0.5 * q.side { 1.0 } else { 0.0 })
            .unwrap()
    }

    #[test]
    fn synthesis_examples() {
        let g = host(1.0 / 16.0);
        let one = Weight::constant(1, 1.0).unwrap();
        let mut s = WeakHardySpec::new(1, 1.0, 1.0, one.clone(), 4.0, 1).unwrap();
        s.push(0, &[0.5], 1.0).unwrap();
        let out = synthesize(&s, &g).unwrap();
        assert_eq!(out.c, 1.0);
        assert_eq!(out.f, out.atoms[0].profile);
        s.push(0, &[2.5], 1.0).unwrap();
        assert_eq!(synthesize(&s, &g).unwrap().c, 2.0);
        let empty = WeakHardySpec::new(1, 1.0, 1.0, one, 1.0, 1).unwrap();
        assert!(matches!(synthesize(&empty, &g), Err(Error::Degenerate(_))));
    }

    #[test]
    fn budget_and_overlap_are_enforced() {
        let g = host(1.0 / 16.0);
        let one = Weight::constant(1, 1.0).unwrap();
        let mut s = WeakHardySpec::new(1, 1.0, 1.0, one, 1.5, 1).unwrap();
        s.push(0, &[0.5], 1.0).unwrap();
        s.push(0, &[1.0], 1.0).unwrap();
        assert!(synthesize(&s, &g).is_err());
        s.c = 2.0;
        assert!(synthesize(&s, &g).is_err());
        s.overlap = 2;
        assert!(synthesize(&s, &g).is_ok());
    }

    #[test]
    fn geometric_ladder_realizes_c() {
        let g = GridFunction::make_grid(1, &BoxDomain::new(&[-1.0], &[8.0]), 1.0 / 128.0, |_| 0.0).unwrap();
        let one = Weight::constant(1, 1.0).unwrap();
        let mut s = WeakHardySpec::new(1, 0.8, 1.0, one, 1.0, 1).unwrap();
        s.greedy(1..=5, g.h(), &[0.0], 0.25, 1, 4.0).unwrap();
        assert_eq!(s.cubes.len(), 5);
        let out = synthesize(&s, &g).unwrap();
        assert!(out.c <= 1.0 && out.c >= 0.95, "{}", out.c);
        // sup norm bounded by overlap times the top level
        assert!(out.f.sup_norm() <= s.overlap as f64 * 32.0);
    }

    #[test]
    fn spec_text_roundtrip() {
        let w = parse_weight("power center=0 gamma=0.5", 1).unwrap();
        let mut s = WeakHardySpec::new(1, 0.9, 1.0, w, 2.0, 1).unwrap();
        s.push(0, &[0.5], 1.0).unwrap();
        s.push(2, &[3.25], 0.5).unwrap();
        let text = s.to_string();
        let back: WeakHardySpec = text.parse().unwrap();
        assert_eq!(back, s);
        let minimal = "p = 1\nalpha = 1\nc = 1\nk=0 x0=0.5 r=1\n";
        let m: WeakHardySpec = minimal.parse().unwrap();
        assert_eq!(m.cubes.len(), 1);
        assert!("p = 1\nalpha = 1\nc = 1\nk=0 r=1\n".parse::<WeakHardySpec>().is_err());
        assert!("p = 0.4\nalpha = 1\nc = 1\n".parse::<WeakHardySpec>().is_err());
        let two_d = "n = 2\np = 1\nalpha = 1\nc = 1\nweight = power center=0,0 gamma=0.5\n[cubes]\nk=1 x0=0.5,0.5 r=1\n";
        let t: WeakHardySpec = two_d.parse().unwrap();
        assert_eq!(t.n, 2);
        assert_eq!(t.cubes[0].cube.center, [0.5, 0.5]);
    }

    #[test]
    fn power_law_fit() {
        let pts: Vec<(f64, f64)> = (1..=6).map(|i| (i as f64, 3.0 * (i as f64).powf(-2.0))).collect();
        let (s, b) = fit_power_law(&pts).unwrap();
        assert!((s + 2.0).abs() < 1e-12 && (b.exp() - 3.0).abs() < 1e-12);
        assert!(matches!(fit_power_law(&pts[..3]), Err(Error::Fit(_))));
    }

    #[test]
    fn decay_fit_rejects_near_points() {
        let g = host(1.0 / 8.0);
        let a = make_atom(&g, &Cube::new(&[0.5], 1.0).unwrap(), 0, 0, Shape::OddTent).unwrap();
        let hs = HalfSpaceGrid::covering(0.25, 8.0, 4).unwrap();
        let pts = [[0.75, 0.0], [2.0, 0.0], [3.0, 0.0], [4.0, 0.0]];
        assert!(matches!(lemma31_decay_fit(&a, 1.0, &pts, &hs, 8), Err(Error::Fit(_))));
        assert!(matches!(lemma31_decay_fit(&a, 1.0, &pts[1..], &hs, 8), Err(Error::Fit(_))));
    }
}
