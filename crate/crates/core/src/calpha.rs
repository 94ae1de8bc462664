//! The kernel class `C_alpha` and `A_alpha(f)(y, t) = sup |f * phi_t(y)|`.
//!
//! Profiles live on a uniform grid of spacing `1/m` in the unit ball and are
//! extended by piecewise-linear (`n = 1`) or bilinear (`n = 2`)
//! interpolation. Nodes with `1 <= |u| <= 1 + 2/m` form a ghost ring pinned
//! to zero. Since grid functions are piecewise constant, the pairing
//! `∫ phi(u) f(y - t u) du` of an interpolated profile with `f` is computed
//! exactly as `Σ_j c_j phi_j`; the same coefficients feed the linear program
//! and the dictionary lower bound, so the two are directly comparable.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{check_dim, pad, GridFunction, Kernel, Point};
use crate::lp::{HolderLp, HolderPolytope};

type Rule = Box<dyn Fn(&[f64]) -> f64>;

/// Interior and ghost nodes of the unit ball at resolution `m`.
#[derive(Debug, Clone)]
pub struct BallGrid {
    n: usize,
    m: usize,
    nodes: Vec<Point>,
    ghosts: Vec<Point>,
    /// `(2m+1)^n` table: integer key -> interior node index.
    lookup: Vec<Option<u32>>,
}

impl BallGrid {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        check_dim(n)?;
        // 2m - 1 interior nodes per axis
        if m < 2 {
            return Err(Error::Config(format!("ball resolution m = {m} gives fewer than 3 interior nodes per axis")));
        }
        let mi = m as i64;
        let side = 2 * m + 1;
        let mut lookup = vec![None; side.pow(n as u32)];
        let mut nodes = Vec::new();
        let mut ghosts = Vec::new();
        let outer = (mi + 2) * (mi + 2);
        let k1_range: Vec<i64> = if n == 2 { (-(mi + 2)..=(mi + 2)).collect() } else { vec![0] };
        for &k1 in &k1_range {
            for k0 in -(mi + 2)..=(mi + 2) {
                let r2 = k0 * k0 + k1 * k1;
                let u = [k0 as f64 / m as f64, if n == 2 { k1 as f64 / m as f64 } else { 0.0 }];
                if r2 < mi * mi {
                    let slot = (k0 + mi) as usize + if n == 2 { side * (k1 + mi) as usize } else { 0 };
                    lookup[slot] = Some(nodes.len() as u32);
                    nodes.push(u);
                } else if r2 <= outer {
                    ghosts.push(u);
                }
            }
        }
        Ok(Self { n, m, nodes, ghosts, lookup })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn resolution(&self) -> usize {
        self.m
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.m as f64
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn ghosts(&self) -> &[Point] {
        &self.ghosts
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Quadrature weight `ω_j = ∫ L_j` of every interior node.
    pub fn weight(&self) -> f64 {
        self.spacing().powi(self.n as i32)
    }

    fn index_of(&self, k0: i64, k1: i64) -> Option<usize> {
        let m = self.m as i64;
        if k0.abs() >= m || k1.abs() >= m {
            return None;
        }
        let side = 2 * self.m + 1;
        let slot = (k0 + m) as usize + if self.n == 2 { side * (k1 + m) as usize } else { 0 };
        self.lookup[slot].map(|i| i as usize)
    }

    /// Distance from `u` to the nearest ghost node.
    fn ghost_distance(&self, u: &Point) -> f64 {
        self.ghosts.iter().map(|g| crate::grid::dist(self.n, u, g)).fold(f64::INFINITY, f64::min)
    }

    /// Coefficients `c_j = ∫ L_j(u) f(y - t u) du` of the exact pairing.
    pub fn functional(&self, f: &GridFunction, y: &[f64], t: f64, out: &mut Vec<f64>) -> Result<()> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::Domain(format!("scale t must be positive, got {t}")));
        }
        if f.dim() != self.n {
            return Err(Error::Config("profile and function dimensions differ".into()));
        }
        out.clear();
        out.resize(self.nodes.len(), 0.0);
        let y = pad(y);
        let axes = (0..self.n).map(|a| self.axis_hats(f, y[a], t, a)).collect::<Vec<_>>();
        let shape = f.shape();
        let vals = f.values();
        if self.n == 1 {
            let ax = &axes[0];
            for (ci, cell) in ax.cells.iter().enumerate() {
                let v = vals[*cell];
                if v == 0.0 {
                    continue;
                }
                for &(k, w) in &ax.hats[ax.offsets[ci]..ax.offsets[ci + 1]] {
                    if let Some(j) = self.index_of(k, 0) {
                        out[j] += v * w;
                    }
                }
            }
        } else {
            let (a0, a1) = (&axes[0], &axes[1]);
            for (c1, cell1) in a1.cells.iter().enumerate() {
                for (c0, cell0) in a0.cells.iter().enumerate() {
                    let v = vals[*cell0 + shape[0] * *cell1];
                    if v == 0.0 {
                        continue;
                    }
                    for &(k1, w1) in &a1.hats[a1.offsets[c1]..a1.offsets[c1 + 1]] {
                        for &(k0, w0) in &a0.hats[a0.offsets[c0]..a0.offsets[c0 + 1]] {
                            if let Some(j) = self.index_of(k0, k1) {
                                out[j] += v * w0 * w1;
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Per-axis integrals of 1-d hats over the preimages of grid cells.
    fn axis_hats(&self, f: &GridFunction, y: f64, t: f64, axis: usize) -> AxisHats {
        let h = f.h();
        let lower = f.lower()[axis];
        let cells_n = f.shape()[axis] as i64;
        let lo = (((y - t - lower) / h).floor() as i64 - 1).max(0);
        let hi = (((y + t - lower) / h).ceil() as i64 + 1).min(cells_n);
        let m = self.m as f64;
        let delta = 1.0 / m;
        let mut out = AxisHats { cells: Vec::new(), offsets: vec![0], hats: Vec::new() };
        for i in lo..hi {
            let x_i = lower + i as f64 * h;
            // z in [x_i, x_i + h)  <=>  u in ((y - x_i - h)/t, (y - x_i)/t]
            let a = (y - x_i - h) / t;
            let b = (y - x_i) / t;
            if b <= -1.0 || a >= 1.0 {
                continue;
            }
            let k_lo = ((a * m).floor() as i64).max(-(self.m as i64) + 1);
            let k_hi = ((b * m).ceil() as i64).min(self.m as i64 - 1);
            let mut any = false;
            for k in k_lo..=k_hi {
                let c = k as f64 * delta;
                let w = delta * (hat_cdf((b - c) * m) - hat_cdf((a - c) * m));
                if w > 0.0 {
                    out.hats.push((k, w));
                    any = true;
                }
            }
            if any {
                out.cells.push(i as usize);
                out.offsets.push(out.hats.len());
            }
        }
        out
    }

    /// Value of the interpolant of interior `values` (ghosts and beyond are 0).
    pub fn interpolate(&self, values: &[f64], u: &[f64]) -> f64 {
        let u = pad(u);
        let m = self.m as f64;
        let s0 = u[0] * m;
        let k0 = s0.floor();
        let f0 = s0 - k0;
        let k0 = k0 as i64;
        let val = |a: i64, b: i64| self.index_of(a, b).map_or(0.0, |j| values[j]);
        if self.n == 1 {
            (1.0 - f0) * val(k0, 0) + f0 * val(k0 + 1, 0)
        } else {
            let s1 = u[1] * m;
            let k1 = s1.floor();
            let f1 = s1 - k1;
            let k1 = k1 as i64;
            (1.0 - f0) * (1.0 - f1) * val(k0, k1)
                + f0 * (1.0 - f1) * val(k0 + 1, k1)
                + (1.0 - f0) * f1 * val(k0, k1 + 1)
                + f0 * f1 * val(k0 + 1, k1 + 1)
        }
    }
}

struct AxisHats {
    cells: Vec<usize>,
    offsets: Vec<usize>,
    hats: Vec<(i64, f64)>,
}

/// `∫_{-∞}^{s} max(0, 1 - |r|) dr`.
fn hat_cdf(s: f64) -> f64 {
    if s <= -1.0 {
        0.0
    } else if s <= 0.0 {
        0.5 * (1.0 + s) * (1.0 + s)
    } else if s < 1.0 {
        1.0 - 0.5 * (1.0 - s) * (1.0 - s)
    } else {
        1.0
    }
}

/// A discretized member of `C_alpha`.
#[derive(Debug, Clone)]
pub struct TestProfile {
    ball: Arc<BallGrid>,
    alpha: f64,
    values: Vec<f64>,
    ghost_values: Vec<f64>,
}

impl TestProfile {
    /// Samples `rule` at interior and ghost nodes.
    pub fn from_rule<F: Fn(&[f64]) -> f64>(ball: Arc<BallGrid>, alpha: f64, rule: F) -> Self {
        let n = ball.dim();
        let values = ball.nodes().iter().map(|u| rule(&u[..n])).collect();
        let ghost_values = ball.ghosts().iter().map(|u| rule(&u[..n])).collect();
        Self { ball, alpha, values, ghost_values }
    }

    /// The zero profile.
    pub fn zero(ball: Arc<BallGrid>, alpha: f64) -> Self {
        Self::from_rule(ball, alpha, |_| 0.0)
    }

    pub fn from_values(ball: Arc<BallGrid>, alpha: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != ball.len() {
            return Err(Error::Config("profile length does not match the ball grid".into()));
        }
        let ghost_values = vec![0.0; ball.ghosts().len()];
        Ok(Self { ball, alpha, values, ghost_values })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn ball(&self) -> &Arc<BallGrid> {
        &self.ball
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * c).collect(),
            ghost_values: self.ghost_values.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }

    /// Exact `f * phi_t(y)` for the interpolated profile.
    pub fn convolve(&self, f: &GridFunction, y: &[f64], t: f64) -> Result<f64> {
        let mut c = Vec::new();
        self.ball.functional(f, y, t, &mut c)?;
        Ok(c.iter().zip(&self.values).map(|(a, b)| a * b).sum())
    }

    /// Largest pairwise Hölder ratio `|phi(u) - phi(v)| / |u - v|^alpha`.
    pub fn holder_constant(&self) -> f64 {
        let n = self.ball.dim();
        let pts: Vec<(&Point, f64)> = self
            .ball
            .nodes()
            .iter()
            .zip(self.values.iter().copied())
            .chain(self.ball.ghosts().iter().zip(self.ghost_values.iter().copied()))
            .collect();
        let mut worst = 0.0f64;
        for (a, (pa, va)) in pts.iter().enumerate() {
            for (pb, vb) in &pts[a + 1..] {
                let d = crate::grid::dist(n, pa, pb).powf(self.alpha);
                worst = worst.max((va - vb).abs() / d);
            }
        }
        worst
    }
}

impl Kernel for TestProfile {
    fn eval(&self, u: &[f64]) -> f64 {
        self.ball.interpolate(&self.values, u)
    }

    fn radius(&self) -> f64 {
        1.0 + 2.0 * self.ball.spacing()
    }
}

/// Outcome of [`verify_membership`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Membership {
    pub member: bool,
    /// Largest `(|Δφ| - d^α) / d^α` over node pairs, floored at 0.
    pub holder_violation: f64,
    /// `Σ ω_j φ_j`.
    pub mean: f64,
    /// Largest |value| on the ghost ring.
    pub ghost_max: f64,
}

/// Checks support, zero mean and the Hölder bound over all node pairs.
pub fn verify_membership(phi: &TestProfile) -> Membership {
    let holder_violation = (phi.holder_constant() - 1.0).max(0.0);
    let mean = phi.ball.weight() * phi.values.iter().sum::<f64>();
    let ghost_max = phi.ghost_values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let member = holder_violation <= 1e-12 && mean.abs() <= 1e-10 && ghost_max <= 1e-12;
    Membership { member, holder_violation, mean, ghost_max }
}

/// A validated finite subset of `C_alpha`.
#[derive(Debug, Clone)]
pub struct Dictionary {
    members: Vec<TestProfile>,
}

impl Dictionary {
    pub fn new(members: Vec<TestProfile>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Config("dictionary must be nonempty".into()));
        }
        for (i, m) in members.iter().enumerate() {
            let r = verify_membership(m);
            if !r.member {
                return Err(Error::Config(format!("dictionary member {i} is not in C_alpha: {r:?}")));
            }
        }
        Ok(Self { members })
    }

    /// Built-in profiles, each rescaled so its Hölder constant is at most 1.
    pub fn default_for(ball: Arc<BallGrid>, alpha: f64) -> Result<Self> {
        use std::f64::consts::PI;
        let n = ball.dim();
        let cusp = move |s: f64, room: f64| s.signum() * s.abs().min(room.max(0.0)).powf(alpha);
        let mut rules: Vec<Rule> = Vec::new();
        let norm = |u: &[f64]| u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n == 1 {
            rules.push(Box::new(|u| if u[0].abs() < 1.0 { (PI * u[0]).sin() / PI } else { 0.0 }));
            rules.push(Box::new(|u| u[0] * (1.0 - u[0].abs()).max(0.0)));
            for w in [0.25, 0.5, 1.0] {
                rules.push(Box::new(move |u| {
                    let a = u[0].abs();
                    u[0].signum() * (a.min(w - a)).max(0.0)
                }));
            }
            rules.push(Box::new(move |u| cusp(u[0], 1.0 - u[0].abs())));
            rules.push(Box::new(move |u| cusp(u[0], 0.25 - u[0].abs())));
        } else {
            for axis in 0..2 {
                rules.push(Box::new(move |u| (1.0 - norm(u)).max(0.0) * u[axis]));
                rules.push(Box::new(move |u| {
                    let r = norm(u);
                    if r < 1.0 {
                        (PI * u[axis]).sin() / PI * (1.0 - r)
                    } else {
                        0.0
                    }
                }));
                rules.push(Box::new(move |u| cusp(u[axis], 1.0 - norm(u))));
            }
        }
        let members = rules
            .into_iter()
            .map(|rule| {
                let p = TestProfile::from_rule(ball.clone(), alpha, |u| rule(u));
                let hc = p.holder_constant();
                if hc > 1.0 {
                    p.scaled(1.0 / (hc * (1.0 + 1e-14)))
                } else {
                    p
                }
            })
            .collect();
        Self::new(members)
    }

    pub fn members(&self) -> &[TestProfile] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn push(&mut self, p: TestProfile) -> Result<()> {
        let r = verify_membership(&p);
        if !r.member {
            return Err(Error::Config(format!("profile is not in C_alpha: {r:?}")));
        }
        self.members.push(p);
        Ok(())
    }

    /// Parses `node value` rows (one interior node per line, `#` comments)
    /// and validates the profile.
    pub fn load_profile(ball: Arc<BallGrid>, alpha: f64, text: &str) -> Result<TestProfile> {
        let n = ball.dim();
        let mut values = vec![f64::NAN; ball.len()];
        let mut ghosts = vec![0.0; ball.ghosts().len()];
        let m = ball.resolution() as f64;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let nums: Vec<f64> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1))))
                .collect::<Result<_>>()?;
            if nums.len() != n + 1 {
                return Err(Error::Parse(format!("line {}: expected {} numbers", lineno + 1, n + 1)));
            }
            let k0 = (nums[0] * m).round() as i64;
            let k1 = if n == 2 { (nums[1] * m).round() as i64 } else { 0 };
            let v = nums[n];
            if let Some(j) = ball.index_of(k0, k1) {
                values[j] = v;
            } else if let Some(g) = ball.ghosts().iter().position(|g| {
                (g[0] * m).round() as i64 == k0 && (n == 1 || (g[1] * m).round() as i64 == k1)
            }) {
                ghosts[g] = v;
            } else {
                return Err(Error::Parse(format!("line {}: node is not on the ball grid", lineno + 1)));
            }
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Parse("profile table misses interior nodes".into()));
        }
        let p = TestProfile { ball, alpha, values, ghost_values: ghosts };
        let r = verify_membership(&p);
        if !r.member {
            return Err(Error::Config(format!("loaded profile is not in C_alpha: {r:?}")));
        }
        Ok(p)
    }
}

/// Writes a profile as `node value` rows, the format read by
/// [`Dictionary::load_profile`].
pub fn format_profile(p: &TestProfile) -> String {
    let n = p.ball.dim();
    let mut s = String::new();
    for (u, v) in p.ball.nodes().iter().zip(&p.values) {
        for c in &u[..n] {
            s.push_str(&format!("{c} "));
        }
        s.push_str(&format!("{v}\n"));
    }
    s
}

/// The Hölder polytope of `C_alpha` at ball resolution `m`, shared by all
/// solves with the same `(n, m, alpha)`.
#[derive(Debug, Clone)]
pub struct AlphaProgram {
    ball: Arc<BallGrid>,
    alpha: f64,
    poly: HolderPolytope,
}

impl AlphaProgram {
    pub fn new(n: usize, m: usize, alpha: f64) -> Result<Self> {
        Self::with_ball(Arc::new(BallGrid::new(n, m)?), alpha)
    }

    /// The program over an existing ball grid.
    pub fn with_ball(ball: Arc<BallGrid>, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        let n = ball.dim();
        let nodes = ball.nodes();
        let bounds: Vec<f64> = nodes.iter().map(|u| ball.ghost_distance(u).powf(alpha)).collect();
        let eq = vec![ball.weight(); nodes.len()];
        let mut poly = HolderPolytope::new(nodes.len(), eq, bounds.clone())?;
        if n == 1 && alpha == 1.0 {
            // on a line Lipschitz chains between neighbours imply every pair
            for j in 0..nodes.len() - 1 {
                poly.add_pair(j, j + 1, ball.spacing());
            }
        } else {
            for i in 0..nodes.len() {
                for j in i + 1..nodes.len() {
                    let b = crate::grid::dist(n, &nodes[i], &nodes[j]).powf(alpha);
                    // implied by |φ_i| + |φ_j| <= bounds
                    if b >= bounds[i] + bounds[j] {
                        continue;
                    }
                    poly.add_pair(i, j, b);
                }
            }
        }
        Ok(Self { ball, alpha, poly })
    }

    pub fn ball(&self) -> &Arc<BallGrid> {
        &self.ball
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn polytope(&self) -> &HolderPolytope {
        &self.poly
    }

    pub fn solver(&self) -> AlphaSolver<'_> {
        AlphaSolver { program: self, lp: HolderLp::new(&self.poly), coeffs: Vec::new(), refine: 0, refined: false }
    }
}

/// Default number of refined cells across a narrow 1-d footprint.
pub const DEFAULT_REFINE: usize = 8;

/// Number of uniform cells below which a 1-d footprint is refined.
pub const REFINE_BELOW_CELLS: f64 = 4.0;

/// Warm-started evaluator of `A_alpha(f)(y, t)`.
pub struct AlphaSolver<'a> {
    program: &'a AlphaProgram,
    lp: HolderLp<'a>,
    coeffs: Vec<f64>,
    refine: usize,
    refined: bool,
}

impl AlphaSolver<'_> {
    /// In 1-d, solves on a locally refined mesh with `fine` extra cells
    /// across the footprint of `f` whenever that footprint spans fewer than
    /// [`REFINE_BELOW_CELLS`] uniform cells. `0` disables refinement.
    pub fn with_refinement(mut self, fine: usize) -> Self {
        self.refine = fine;
        self
    }

    /// `A_alpha(f)(y, t)`; the polytope is centrally symmetric, so the maximum
    /// of the linear form equals the maximum of its absolute value.
    pub fn value(&mut self, f: &GridFunction, y: &[f64], t: f64) -> Result<f64> {
        self.refined = false;
        self.program.ball.functional(f, y, t, &mut self.coeffs)?;
        if self.coeffs.iter().all(|c| *c == 0.0) {
            return Ok(0.0);
        }
        if self.refine > 0 && f.dim() == 1 {
            if let Some((lo, hi)) = f.support_box() {
                if (hi[0] - lo[0]) / t < REFINE_BELOW_CELLS * self.program.ball.spacing() {
                    self.refined = true;
                    return refined_value(f, y[0], t, self.program.alpha, self.program.ball.resolution(), self.refine);
                }
            }
        }
        Ok(self.lp.maximize(&self.coeffs)?.max(0.0))
    }

    /// The maximizing profile of the last solve.
    pub fn argmax(&self) -> Result<TestProfile> {
        if self.refined {
            return Err(Error::Config("the last solve used a refined mesh".into()));
        }
        TestProfile::from_values(self.program.ball.clone(), self.program.alpha, self.lp.solution().to_vec())
    }

    pub fn pivots(&self) -> usize {
        self.lp.pivots()
    }

    /// Uniform-grid coefficients of the last evaluation.
    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }
}

/// `∫_{-∞}^{s} L(u) du` for the hat with peak at `c` and neighbours `l < c < r`.
fn hat_cdf_uneven(s: f64, l: f64, c: f64, r: f64) -> f64 {
    if s <= l {
        0.0
    } else if s <= c {
        (s - l) * (s - l) / (2.0 * (c - l))
    } else if s < r {
        0.5 * (r - l) - (r - s) * (r - s) / (2.0 * (r - c))
    } else {
        0.5 * (r - l)
    }
}

/// 1-d `A_alpha(f)(y, t)` on the uniform nodes at resolution `m` merged with
/// `fine + 1` equispaced nodes across the footprint of `f` in the ball (two
/// more on each side). The uniform mesh is a subset, so every uniform
/// profile remains admissible.
pub fn a_alpha_refined(f: &GridFunction, y: f64, t: f64, alpha: f64, m: usize, fine: usize) -> Result<f64> {
    if f.dim() != 1 {
        return Err(Error::Config("mesh refinement is 1-d only".into()));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if m < 2 || fine == 0 {
        return Err(Error::Config("refinement needs m >= 2 and fine >= 1".into()));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("scale t must be positive, got {t}")));
    }
    refined_value(f, y, t, alpha, m, fine)
}

fn refined_value(f: &GridFunction, y: f64, t: f64, alpha: f64, m: usize, fine: usize) -> Result<f64> {
    let Some((lo, hi)) = f.support_box() else {
        return Ok(0.0);
    };
    let a = (y - hi[0]) / t;
    let b = (y - lo[0]) / t;
    let df = (b - a) / fine as f64;
    let delta = 1.0 / m as f64;
    let mut nodes: Vec<f64> = (1 - m as i64..m as i64).map(|k| k as f64 * delta).collect();
    for i in -2..=fine as i64 + 2 {
        let u = a + i as f64 * df;
        if u.abs() < 1.0 - 0.125 * df && nodes.iter().all(|v| (v - u).abs() > 0.125 * df) {
            nodes.push(u);
        }
    }
    nodes.sort_by(f64::total_cmp);
    let nv = nodes.len();
    let left = |j: usize| if j == 0 { -1.0 } else { nodes[j - 1] };
    let right = |j: usize| if j + 1 == nv { 1.0 } else { nodes[j + 1] };
    // exact pairing over the cells of f
    let mut c = vec![0.0; nv];
    let h = f.h();
    let lower = f.lower()[0];
    for (i, v) in f.values().iter().enumerate() {
        if *v == 0.0 {
            continue;
        }
        let x_i = lower + i as f64 * h;
        let ua = (y - x_i - h) / t;
        let ub = (y - x_i) / t;
        if ub <= -1.0 || ua >= 1.0 {
            continue;
        }
        let first = nodes.partition_point(|u| *u < ua).saturating_sub(1);
        for j in first..nv {
            let (l, r) = (left(j), right(j));
            if l >= ub {
                break;
            }
            let w = hat_cdf_uneven(ub, l, nodes[j], r) - hat_cdf_uneven(ua, l, nodes[j], r);
            c[j] += v * w;
        }
    }
    if c.iter().all(|x| *x == 0.0) {
        return Ok(0.0);
    }
    let bounds: Vec<f64> = nodes.iter().map(|u| (1.0 - u.abs()).powf(alpha)).collect();
    let eq: Vec<f64> = (0..nv).map(|j| 0.5 * (right(j) - left(j))).collect();
    let mut poly = HolderPolytope::new(nv, eq, bounds.clone())?;
    if alpha == 1.0 {
        for j in 0..nv - 1 {
            poly.add_pair(j, j + 1, nodes[j + 1] - nodes[j]);
        }
    } else {
        for i in 0..nv {
            for j in i + 1..nv {
                let d = (nodes[j] - nodes[i]).powf(alpha);
                if d < bounds[i] + bounds[j] {
                    poly.add_pair(i, j, d);
                }
            }
        }
    }
    Ok(HolderLp::new(&poly).maximize(&c)?.max(0.0))
}

/// One-shot `A_alpha(f)(y, t)` at ball resolution `m`.
pub fn a_alpha_lp(f: &GridFunction, y: &[f64], t: f64, alpha: f64, m: usize) -> Result<f64> {
    let prog = AlphaProgram::new(f.dim(), m, alpha)?;
    let mut s = prog.solver();
    s.value(f, y, t)
}

/// Dictionary lower bound `max_φ |f * φ_t(y)|`.
pub fn a_alpha_dict(f: &GridFunction, y: &[f64], t: f64, dict: &Dictionary) -> Result<f64> {
    let mut best = 0.0f64;
    for p in dict.members() {
        best = best.max(p.convolve(f, y, t)?.abs());
    }
    Ok(best)
}

/// Upper end of the sandwich: `Σ_j c_j(|f|)`, which bounds `|Σ c_j φ_j|`
/// because every feasible `|φ_j| <= 1`.
pub fn sandwich_upper(ball: &BallGrid, f: &GridFunction, y: &[f64], t: f64) -> Result<f64> {
    let mut c = Vec::new();
    ball.functional(&f.map(f64::abs), y, t, &mut c)?;
    Ok(c.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoxDomain;
    use std::f64::consts::PI;

    fn indicator(h: f64) -> GridFunction {
        GridFunction::make_grid(1, &BoxDomain::new(&[-4.0], &[8.0]), h, |x| {
            if (0.0..1.0).contains(&x[0]) {
                1.0
            } else {
                0.0
            }
        })
        .unwrap()
    }

    /// α = 1, n = 1 oracle: with steps s_i = φ_{i+1} - φ_i between pinned
    /// ends, max c·φ = min_{μ,ν} δ Σ_i |C_i - μ W_i - ν| where C, W are tail
    /// sums of c and of the weights. Minimized by ternary search in μ with
    /// the median for ν.
    fn lipschitz_oracle(c: &[f64], w: f64, delta: f64) -> f64 {
        let n = c.len();
        let mut tails_c = vec![0.0; n + 1];
        let mut tails_w = vec![0.0; n + 1];
        for i in (0..n).rev() {
            tails_c[i] = tails_c[i + 1] + c[i];
            tails_w[i] = tails_w[i + 1] + w;
        }
        let obj = |mu: f64| {
            let mut r: Vec<f64> = (0..=n).map(|i| tails_c[i] - mu * tails_w[i]).collect();
            r.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let nu = r[r.len() / 2];
            r.iter().map(|v| (v - nu).abs()).sum::<f64>() * delta
        };
        let span = c.iter().map(|v| v.abs()).sum::<f64>() / (w * n as f64) * 4.0 + 1.0;
        let (mut lo, mut hi) = (-span, span);
        for _ in 0..300 {
            let a = lo + (hi - lo) / 3.0;
            let b = hi - (hi - lo) / 3.0;
            if obj(a) <= obj(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        obj(0.5 * (lo + hi))
    }

    #[test]
    fn ball_grid_counts_and_errors() {
        let b = BallGrid::new(1, 8).unwrap();
        assert_eq!(b.len(), 15);
        assert_eq!(b.ghosts().len(), 6);
        let b2 = BallGrid::new(2, 4).unwrap();
        assert!(b2.nodes().iter().all(|u| u[0] * u[0] + u[1] * u[1] < 1.0));
        assert!(matches!(BallGrid::new(1, 1), Err(Error::Config(_))));
    }

    #[test]
    fn functional_is_exact_for_constants() {
        // Σ_j c_j = ∫ (Σ L_j) f, and Σ L_j = 1 on [-(m-1)/m, (m-1)/m] minus edge ramps
        let ball = BallGrid::new(1, 16).unwrap();
        let f = GridFunction::make_grid(1, &BoxDomain::centered(1, 8.0), 0.125, |_| 2.0).unwrap();
        let mut c = Vec::new();
        ball.functional(&f, &[0.3], 1.7, &mut c).unwrap();
        let total: f64 = c.iter().sum();
        // Σ L_j integrates to 2 - 1/m over the ball (ramps to pinned ends)
        assert!((total - 2.0 * (2.0 - 1.0 / 16.0)).abs() < 1e-12, "{total}");
    }

    #[test]
    fn membership_examples() {
        let ball = Arc::new(BallGrid::new(1, 20).unwrap());
        assert!(verify_membership(&TestProfile::zero(ball.clone(), 1.0)).member);
        let sine = TestProfile::from_rule(ball.clone(), 1.0, |u| {
            if u[0].abs() <= 1.0 {
                (PI * u[0]).sin() / PI
            } else {
                0.0
            }
        });
        assert!(verify_membership(&sine).member);
        let ramp = TestProfile::from_rule(ball, 1.0, |u| if u[0].abs() <= 1.0 { u[0] } else { 0.0 });
        let r = verify_membership(&ramp);
        assert!(!r.member);
        assert!(r.holder_violation > 1.0);
    }

    #[test]
    fn default_dictionaries_validate() {
        for (n, m) in [(1, 16), (2, 6)] {
            for alpha in [0.5, 1.0] {
                let ball = Arc::new(BallGrid::new(n, m).unwrap());
                let d = Dictionary::default_for(ball, alpha).unwrap();
                assert!(d.len() >= 5);
            }
        }
    }

    #[test]
    fn lp_matches_lipschitz_oracle() {
        let f = indicator(1.0 / 32.0);
        let prog = AlphaProgram::new(1, 24, 1.0).unwrap();
        let mut s = prog.solver();
        for (y, t) in [(0.0, 1.0), (0.5, 0.3), (1.2, 2.5), (-0.4, 0.7)] {
            let v = s.value(&f, &[y], t).unwrap();
            let o = lipschitz_oracle(s.coefficients(), prog.ball().weight(), prog.ball().spacing());
            assert!((v - o).abs() <= 1e-9 * o + 1e-12, "y={y} t={t}: {v} vs {o}");
        }
    }

    #[test]
    fn indicator_example_bounds_and_convergence() {
        let f = indicator(1.0 / 512.0);
        let v64 = a_alpha_lp(&f, &[0.0], 1.0, 1.0, 64).unwrap();
        let v512 = a_alpha_lp(&f, &[0.0], 1.0, 1.0, 512).unwrap();
        assert!((v64 - v512).abs() <= 0.02 * v512, "{v64} {v512}");
        assert!(v64 >= 2.0 / (PI * PI) - 1e-6);
    }

    #[test]
    fn dictionary_sine_member_reproduces_closed_form() {
        let f = indicator(1.0 / 512.0);
        let ball = Arc::new(BallGrid::new(1, 256).unwrap());
        let sine = TestProfile::from_rule(ball, 1.0, |u| {
            if u[0].abs() <= 1.0 {
                (PI * u[0]).sin() / PI
            } else {
                0.0
            }
        });
        let d = Dictionary::new(vec![sine]).unwrap();
        let v = a_alpha_dict(&f, &[0.0], 1.0, &d).unwrap();
        assert!((v - 2.0 / (PI * PI)).abs() < 1e-4, "{v}");
    }

    #[test]
    fn constants_and_zero_give_zero() {
        let prog = AlphaProgram::new(1, 16, 0.5).unwrap();
        let mut s = prog.solver();
        let c = GridFunction::make_grid(1, &BoxDomain::centered(1, 8.0), 0.125, |_| 3.0).unwrap();
        assert!(s.value(&c, &[0.0], 1.0).unwrap() < 1e-12);
        assert_eq!(s.value(&c.zeros_like(), &[0.0], 1.0).unwrap(), 0.0);
        assert!(matches!(s.value(&c, &[0.0], -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn argmax_is_a_member() {
        let f = indicator(1.0 / 32.0);
        for alpha in [0.5, 1.0] {
            let prog = AlphaProgram::new(1, 16, alpha).unwrap();
            let mut s = prog.solver();
            let v = s.value(&f, &[0.2], 0.8).unwrap();
            let phi = s.argmax().unwrap();
            let r = verify_membership(&phi);
            assert!(r.holder_violation < 1e-9 && r.mean.abs() < 1e-12, "{r:?}");
            assert!((phi.convolve(&f, &[0.2], 0.8).unwrap() - v).abs() < 1e-12);
        }
    }

    #[test]
    fn profile_text_roundtrip() {
        let ball = Arc::new(BallGrid::new(1, 8).unwrap());
        let d = Dictionary::default_for(ball.clone(), 1.0).unwrap();
        let text = format_profile(&d.members()[0]);
        let p = Dictionary::load_profile(ball.clone(), 1.0, &text).unwrap();
        assert_eq!(p.values(), d.members()[0].values());
        assert!(Dictionary::load_profile(ball.clone(), 1.0, "0.0 1.0\n").is_err());
        let bad: String = ball.nodes().iter().map(|u| format!("{} {}\n", u[0], u[0])).collect();
        assert!(matches!(Dictionary::load_profile(ball, 1.0, &bad), Err(Error::Config(_))));
    }
}
