//! Square functions on the upper half-space.
//!
//! Every evaluator reads a [`HalfSpaceField`]: values `F(y_k, t_m)` on the
//! spatial lattice of the input at each level of a [`HalfSpaceGrid`],
//! computed once and shared by all evaluation points. With
//! `F = A_alpha(f)^2` the cone functional gives `𝒮_{α,β}`, the vertical line
//! gives `g_α` and the weighted half-space sum gives `g*_{λ,α}`; the same
//! evaluators applied to `(f * ψ_t)^2` and to `t^2 |∇u|^2` (Poisson
//! extension) give the kernel and classical versions.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::calpha::{AlphaProgram, BallGrid, Dictionary, TestProfile};
use crate::error::{Error, Result};
use crate::grid::{pad, GridFunction, HalfSpaceGrid, Lattice, Point};

/// A fixed radial, mean-zero kernel supported in the unit ball, stored on a
/// ball grid so that `f * ψ_t` uses the same exact pairing as `A_alpha`.
#[derive(Debug, Clone)]
pub struct PsiKernel {
    profile: TestProfile,
    holder: f64,
}

impl PsiKernel {
    /// `ψ(z) = (1 - |z|^2)^2 (1 - κ |z|^2)` with `κ = 7` (n = 1) or `4`
    /// (n = 2), sampled on the ball grid and corrected by a multiple of
    /// `(1 - |z|^2)^2` so the discrete mean vanishes.
    pub fn builtin(ball: Arc<BallGrid>, alpha: f64) -> Result<Self> {
        let kappa = if ball.dim() == 1 { 7.0 } else { 4.0 };
        let bump = |u: &[f64]| {
            let r2: f64 = u.iter().map(|v| v * v).sum();
            if r2 < 1.0 {
                (1.0 - r2) * (1.0 - r2)
            } else {
                0.0
            }
        };
        let raw = TestProfile::from_rule(ball.clone(), alpha, |u| {
            let r2: f64 = u.iter().map(|v| v * v).sum();
            bump(u) * (1.0 - kappa * r2)
        });
        let base = TestProfile::from_rule(ball.clone(), alpha, bump);
        let mu = raw.values().iter().sum::<f64>() / base.values().iter().sum::<f64>();
        let values = raw.values().iter().zip(base.values()).map(|(a, b)| a - mu * b).collect();
        Self::new(TestProfile::from_values(ball, alpha, values)?)
    }

    /// Validates support (implied by the ball grid), zero mean and radial
    /// symmetry of `profile`.
    pub fn new(profile: TestProfile) -> Result<Self> {
        let ball = profile.ball().clone();
        let vals = profile.values();
        let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return Err(Error::Config("ψ must not vanish identically".into()));
        }
        let mean = ball.weight() * vals.iter().sum::<f64>();
        if mean.abs() > 1e-10 * scale {
            return Err(Error::Config(format!("ψ has nonzero mean {mean}")));
        }
        let n = ball.dim();
        let nodes = ball.nodes();
        // radial: equal values on nodes of equal radius
        let key = |u: &Point| ((u[0] * u[0] + u[1] * u[1]) * (ball.resolution() as f64).powi(2)).round() as i64;
        let mut by_radius: std::collections::HashMap<i64, f64> = Default::default();
        for (u, v) in nodes.iter().zip(vals) {
            let r = by_radius.entry(key(u)).or_insert(*v);
            if (*r - v).abs() > 1e-12 * scale {
                return Err(Error::Config(format!("ψ is not radial at node {:?}", &u[..n])));
            }
        }
        let holder = profile.holder_constant();
        Ok(Self { profile, holder })
    }

    pub fn profile(&self) -> &TestProfile {
        &self.profile
    }

    /// Hölder-α constant `L` of the discrete kernel, so that `ψ / L` is a
    /// feasible profile of the `A_alpha` program on the same ball grid.
    pub fn holder_constant(&self) -> f64 {
        self.holder
    }

    pub fn convolve(&self, f: &GridFunction, y: &[f64], t: f64) -> Result<f64> {
        self.profile.convolve(f, y, t)
    }
}

/// What the field stores at `(y, t)`.
#[derive(Debug, Clone)]
pub enum FieldKind {
    /// `A_alpha(f)(y, t)^2` by linear programming at ball resolution `m`.
    /// `refine` extra 1-d cells across narrow footprints, `0` for none.
    Intrinsic { alpha: f64, m: usize, refine: usize },
    /// `(f * ψ_t(y))^2`.
    Psi(PsiKernel),
    /// `t^2 |∇u(y, t)|^2` for the Poisson extension `u = P_t * f`.
    Poisson,
}

impl FieldKind {
    fn compact(&self) -> bool {
        !matches!(self, FieldKind::Poisson)
    }
}

/// Evaluation box for `x` and the largest spatial reach that evaluators may
/// use: cones up to aperture `beta` and `g*` up to radius `radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reach {
    pub lo: Point,
    pub hi: Point,
    pub beta: f64,
    pub radius: f64,
}

impl Reach {
    pub fn new(lo: &[f64], hi: &[f64], beta: f64, radius: f64) -> Result<Self> {
        let (lo, hi) = (pad(lo), pad(hi));
        if lo.iter().zip(&hi).any(|(a, b)| a > b) || !(beta > 0.0) || !(radius >= 0.0) {
            return Err(Error::Config("invalid evaluation reach".into()));
        }
        Ok(Self { lo, hi, beta, radius })
    }

    pub fn point(x: &[f64], beta: f64, radius: f64) -> Result<Self> {
        Self::new(x, x, beta, radius)
    }

    fn extent(&self, t: f64) -> f64 {
        (self.beta * t).max(self.radius)
    }
}

/// Parameters of `g*_λ`: exponent and spatial truncation radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GStarParams {
    pub lambda: f64,
    pub radius: f64,
}

impl GStarParams {
    pub fn new(lambda: f64, radius: f64) -> Result<Self> {
        if !(lambda > 0.0) || !(radius > 0.0) {
            return Err(Error::Config(format!("g* needs λ > 0 and R > 0, got λ={lambda}, R={radius}")));
        }
        Ok(Self { lambda, radius })
    }
}

/// Bookkeeping gathered while filling a field.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FieldStats {
    pub evaluations: usize,
    pub pivots: usize,
    /// Largest `a_alpha_dict - a_alpha_lp` seen (intrinsic fields with a
    /// dictionary only).
    pub max_dict_excess: f64,
    /// Some level lies below the grid spacing.
    pub under_resolved: bool,
}

#[derive(Debug, Clone)]
struct Level {
    t: f64,
    k_lo: [i64; 2],
    dims: [usize; 2],
    values: Vec<f64>,
    /// 1-d: running sums; 2-d: running sums per row, `dims[0] + 1` each.
    prefix: Vec<f64>,
}

impl Level {
    fn empty(t: f64) -> Self {
        Self { t, k_lo: [0, 0], dims: [0, 0], values: Vec::new(), prefix: Vec::new() }
    }

    fn get(&self, k: [i64; 2]) -> f64 {
        let i0 = k[0] - self.k_lo[0];
        let i1 = k[1] - self.k_lo[1];
        if i0 < 0 || i1 < 0 || i0 >= self.dims[0] as i64 || i1 >= self.dims[1] as i64 {
            return 0.0;
        }
        self.values[i0 as usize + self.dims[0] * i1 as usize]
    }

    fn build_prefix(&mut self) {
        let d0 = self.dims[0];
        self.prefix = Vec::with_capacity((d0 + 1) * self.dims[1]);
        for r in 0..self.dims[1] {
            let mut acc = 0.0;
            self.prefix.push(0.0);
            for v in &self.values[r * d0..(r + 1) * d0] {
                acc += v;
                self.prefix.push(acc);
            }
        }
    }
}

/// The cached half-space integrand of one input.
#[derive(Debug, Clone)]
pub struct HalfSpaceField {
    n: usize,
    lat: Lattice,
    hs: HalfSpaceGrid,
    reach: Reach,
    levels: Vec<Level>,
    stats: FieldStats,
}

impl HalfSpaceField {
    /// `A_alpha(f)^2`; with `dict`, also tracks the oracle sandwich.
    pub fn intrinsic(
        f: &GridFunction,
        alpha: f64,
        m: usize,
        hs: &HalfSpaceGrid,
        reach: &Reach,
        dict: Option<&Dictionary>,
    ) -> Result<Self> {
        Self::intrinsic_refined(f, alpha, m, 0, hs, reach, dict)
    }

    /// As [`Self::intrinsic`] with 1-d mesh refinement (see
    /// [`crate::calpha::AlphaSolver::with_refinement`]).
    pub fn intrinsic_refined(
        f: &GridFunction,
        alpha: f64,
        m: usize,
        refine: usize,
        hs: &HalfSpaceGrid,
        reach: &Reach,
        dict: Option<&Dictionary>,
    ) -> Result<Self> {
        let prog = match dict.and_then(|d| d.members().first()) {
            Some(p) if p.ball().resolution() == m && p.ball().dim() == f.dim() => AlphaProgram::with_ball(p.ball().clone(), alpha)?,
            _ => AlphaProgram::new(f.dim(), m, alpha)?,
        };
        let mut solver = prog.solver().with_refinement(refine);
        let mut excess = f64::NEG_INFINITY;
        let mut field = Self::fill(f, &FieldKind::Intrinsic { alpha, m, refine }, hs, reach, |y, t| {
            let v = solver.value(f, &y[..f.dim()], t)?;
            if let Some(d) = dict {
                for p in d.members() {
                    let w = if Arc::ptr_eq(p.ball(), prog.ball()) {
                        solver.coefficients().iter().zip(p.values()).map(|(a, b)| a * b).sum::<f64>()
                    } else {
                        p.convolve(f, &y[..f.dim()], t)?
                    };
                    excess = excess.max(w.abs() - v);
                }
            }
            Ok(v * v)
        })?;
        field.stats.pivots = solver.pivots();
        field.stats.max_dict_excess = if dict.is_some() { excess.max(0.0) } else { 0.0 };
        if dict.is_some() && field.stats.evaluations == 0 {
            field.stats.max_dict_excess = 0.0;
        }
        Ok(field)
    }

    pub fn psi(f: &GridFunction, psi: &PsiKernel, hs: &HalfSpaceGrid, reach: &Reach) -> Result<Self> {
        if psi.profile().ball().dim() != f.dim() {
            return Err(Error::Config("kernel and function dimensions differ".into()));
        }
        Self::fill(f, &FieldKind::Psi(psi.clone()), hs, reach, |y, t| {
            let v = psi.convolve(f, &y[..f.dim()], t)?;
            Ok(v * v)
        })
    }

    pub fn poisson(f: &GridFunction, hs: &HalfSpaceGrid, reach: &Reach) -> Result<Self> {
        let ext = PoissonExtension::new(f);
        let mut field = Self::fill(f, &FieldKind::Poisson, hs, reach, |y, t| {
            let g = ext.gradient(&y, t);
            Ok(t * t * (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]))
        })?;
        field.stats.under_resolved = hs.t_min() < f.h();
        Ok(field)
    }

    /// Dispatches on `kind`.
    pub fn compute(f: &GridFunction, kind: &FieldKind, hs: &HalfSpaceGrid, reach: &Reach) -> Result<Self> {
        match kind {
            FieldKind::Intrinsic { alpha, m, refine } => Self::intrinsic_refined(f, *alpha, *m, *refine, hs, reach, None),
            FieldKind::Psi(psi) => Self::psi(f, psi, hs, reach),
            FieldKind::Poisson => Self::poisson(f, hs, reach),
        }
    }

    fn fill<V>(f: &GridFunction, kind: &FieldKind, hs: &HalfSpaceGrid, reach: &Reach, mut value: V) -> Result<Self>
    where
        V: FnMut(Point, f64) -> Result<f64>,
    {
        if hs.is_empty() {
            return Err(Error::Config("half-space grid has no levels".into()));
        }
        let n = f.dim();
        let lat = f.lattice();
        let h = lat.h;
        let support = f.support_box();
        let mut levels = Vec::with_capacity(hs.len());
        let mut stats = FieldStats::default();
        for m in hs.levels() {
            let t = hs.node(m);
            let rho = reach.extent(t);
            let mut k_lo = [0i64; 2];
            let mut dims = [1usize; 2];
            let mut empty = false;
            for a in 0..n {
                let mut lo = reach.lo[a] - rho;
                let mut hi = reach.hi[a] + rho;
                if kind.compact() {
                    match support {
                        Some((s_lo, s_hi)) => {
                            lo = lo.max(s_lo[a] - t);
                            hi = hi.min(s_hi[a] + t);
                        }
                        None => empty = true,
                    }
                }
                let kl = ((lo - lat.origin[a]) / h).floor() as i64 - 1;
                let kh = ((hi - lat.origin[a]) / h).ceil() as i64 + 1;
                if kh < kl {
                    empty = true;
                } else {
                    k_lo[a] = kl;
                    dims[a] = (kh - kl + 1) as usize;
                }
            }
            if empty {
                levels.push(Level::empty(t));
                continue;
            }
            let mut values = Vec::with_capacity(dims[0] * dims[1]);
            for i1 in 0..dims[1] {
                for i0 in 0..dims[0] {
                    let y = lat.point([k_lo[0] + i0 as i64, k_lo[1] + i1 as i64]);
                    values.push(value(y, t)?);
                    stats.evaluations += 1;
                }
            }
            let mut level = Level { t, k_lo, dims, values, prefix: Vec::new() };
            level.build_prefix();
            levels.push(level);
        }
        Ok(Self { n, lat, hs: *hs, reach: *reach, levels, stats })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lat
    }

    pub fn levels(&self) -> &HalfSpaceGrid {
        &self.hs
    }

    pub fn reach(&self) -> &Reach {
        &self.reach
    }

    pub fn stats(&self) -> &FieldStats {
        &self.stats
    }

    /// Stored `F` at lattice index `k` of the `i`-th level (0 outside the
    /// computed region).
    pub fn value(&self, i: usize, k: [i64; 2]) -> f64 {
        self.levels[i].get(k)
    }

    /// Scale of the `i`-th level.
    pub fn level_t(&self, i: usize) -> f64 {
        self.levels[i].t
    }

    fn check_x(&self, x: &Point, reach: f64, is_radius: bool) -> Result<()> {
        let tol = 1e-9 * self.lat.h;
        for a in 0..self.n {
            if x[a] < self.reach.lo[a] - tol || x[a] > self.reach.hi[a] + tol {
                return Err(Error::Config(format!("point {:?} lies outside the field's evaluation box", &x[..self.n])));
            }
        }
        let limit = if is_radius { self.reach.radius } else { self.reach.beta };
        if reach > limit * (1.0 + 1e-12) {
            return Err(Error::Config(format!("reach {reach} exceeds the field's limit {limit}")));
        }
        Ok(())
    }

    /// `∬_{Γ_β(x)} F dy dt / t^{n+1}`, the square of the area functional.
    pub fn cone_sum(&self, x: &[f64], beta: f64) -> Result<f64> {
        let x = pad(x);
        if !(beta > 0.0) {
            return Err(Error::Config(format!("aperture must be positive, got {beta}")));
        }
        self.check_x(&x, beta, false)?;
        let du = self.hs.log_width();
        let mut total = 0.0;
        for lv in &self.levels {
            if lv.values.is_empty() {
                continue;
            }
            let s = self.slice_sum(lv, &x, beta * lv.t);
            total += du * s / lv.t.powi(self.n as i32);
        }
        Ok(total)
    }

    /// Spatial integral of `F` over `{|x - y| < radius}` at one level, with
    /// the quadrature of [`crate::grid::slice_weights`].
    fn slice_sum(&self, lv: &Level, x: &Point, radius: f64) -> f64 {
        let h = self.lat.h;
        if self.n == 1 {
            let s = (x[0] - self.lat.origin[0]) / h - lv.k_lo[0] as f64;
            let w = radius / h;
            let d0 = lv.dims[0];
            let cum = |sigma: f64| {
                let q = sigma + 0.5;
                if q <= 0.0 {
                    0.0
                } else if q >= d0 as f64 {
                    lv.prefix[d0]
                } else {
                    let i = q.floor() as usize;
                    lv.prefix[i] + (q - i as f64) * lv.values[i]
                }
            };
            h * (cum(s + w) - cum(s - w))
        } else {
            let r2 = radius * radius;
            let d0 = lv.dims[0] as i64;
            let mut acc = 0.0;
            for r in 0..lv.dims[1] {
                let k1 = lv.k_lo[1] + r as i64;
                let dy = self.lat.origin[1] + k1 as f64 * h - x[1];
                let rem = r2 - dy * dy;
                if rem <= 0.0 {
                    continue;
                }
                let inside = |j: i64| {
                    let dx = self.lat.origin[0] + (lv.k_lo[0] + j) as f64 * h - x[0];
                    dx * dx + dy * dy < r2
                };
                let span = rem.sqrt();
                let center = (x[0] - self.lat.origin[0]) / h - lv.k_lo[0] as f64;
                let mut jl = ((center - span / h).ceil() as i64).max(0);
                let mut jh = ((center + span / h).floor() as i64).min(d0 - 1);
                while jl > 0 && inside(jl - 1) {
                    jl -= 1;
                }
                while jl <= jh && !inside(jl) {
                    jl += 1;
                }
                while jh + 1 < d0 && inside(jh + 1) {
                    jh += 1;
                }
                while jh >= jl && !inside(jh) {
                    jh -= 1;
                }
                if jh < jl {
                    continue;
                }
                let base = r * (lv.dims[0] + 1);
                acc += lv.prefix[base + jh as usize + 1] - lv.prefix[base + jl as usize];
            }
            acc * h * h
        }
    }

    /// Area functional `(cone_sum)^{1/2}`.
    pub fn area(&self, x: &[f64], beta: f64) -> Result<f64> {
        Ok(self.cone_sum(x, beta)?.sqrt())
    }

    /// `(∫ F(x, t) dt / t)^{1/2}`; `x` must be a lattice point.
    pub fn vertical(&self, x: &[f64]) -> Result<f64> {
        let x = pad(x);
        self.check_x(&x, 0.0, true)?;
        let k = self.lattice_index(&x)?;
        let du = self.hs.log_width();
        Ok(self.levels.iter().map(|lv| du * lv.get(k)).sum::<f64>().sqrt())
    }

    fn lattice_index(&self, x: &Point) -> Result<[i64; 2]> {
        let mut k = [0i64; 2];
        for a in 0..self.n {
            k[a] = self.lat.nearest(x[a], a);
            let y = self.lat.origin[a] + k[a] as f64 * self.lat.h;
            if (y - x[a]).abs() > 1e-9 * self.lat.h {
                return Err(Error::Domain(format!("x = {:?} is not a lattice point", &x[..self.n])));
            }
        }
        Ok(k)
    }

    /// `g*_λ(x)^2` together with its annulus decomposition: entry `0` holds
    /// `|x - y| < t`, entry `j >= 1` holds `2^{j-1} t <= |x - y| < 2^j t`.
    pub fn gstar_sum(&self, x: &[f64], gp: &GStarParams) -> Result<GStarSum> {
        let x = pad(x);
        self.check_x(&x, gp.radius, true)?;
        let n = self.n;
        let h = self.lat.h;
        let cell = h.powi(n as i32);
        let du = self.hs.log_width();
        let expo = gp.lambda * n as f64;
        let mut direct = 0.0;
        let mut annuli: Vec<f64> = Vec::new();
        for lv in &self.levels {
            if lv.values.is_empty() {
                continue;
            }
            let t = lv.t;
            let scale = du / t.powi(n as i32) * cell;
            let mut level = 0.0;
            for i1 in 0..lv.dims[1] {
                for i0 in 0..lv.dims[0] {
                    let v = lv.values[i0 + lv.dims[0] * i1];
                    if v == 0.0 {
                        continue;
                    }
                    let y = self.lat.point([lv.k_lo[0] + i0 as i64, lv.k_lo[1] + i1 as i64]);
                    let d = crate::grid::dist(n, &x, &y);
                    if d >= gp.radius {
                        continue;
                    }
                    let term = (t / (t + d)).powf(expo) * v;
                    level += term;
                    let j = if d < t { 0 } else { ((d / t).log2().floor() as usize + 1).max(1) };
                    // guard the floor against rounding at annulus edges
                    let j = fix_annulus(j, d, t);
                    if annuli.len() <= j {
                        annuli.resize(j + 1, 0.0);
                    }
                    annuli[j] += scale * term;
                }
            }
            direct += scale * level;
        }
        Ok(GStarSum { direct, annuli })
    }

    pub fn gstar(&self, x: &[f64], gp: &GStarParams) -> Result<f64> {
        Ok(self.gstar_sum(x, gp)?.direct.sqrt())
    }

    /// Samples `eval` at every node of `template`'s grid.
    pub fn sample<E>(template: &GridFunction, mut eval: E) -> Result<GridFunction>
    where
        E: FnMut(&[f64]) -> Result<f64>,
    {
        let n = template.dim();
        let mut out = Vec::with_capacity(template.len());
        for i in 0..template.len() {
            let x = template.node(i);
            out.push(eval(&x[..n])?);
        }
        template.with_values(out)
    }
}

fn fix_annulus(j: usize, d: f64, t: f64) -> usize {
    if j == 0 {
        return 0;
    }
    let mut j = j;
    while j > 1 && d < (j as f64 - 1.0).exp2() * t {
        j -= 1;
    }
    while d >= (j as f64).exp2() * t {
        j += 1;
    }
    j
}

/// Direct `g*` sum and its annulus partition.
#[derive(Debug, Clone, PartialEq)]
pub struct GStarSum {
    pub direct: f64,
    pub annuli: Vec<f64>,
}

impl GStarSum {
    pub fn partitioned(&self) -> f64 {
        self.annuli.iter().sum()
    }
}

/// Comparison of `g*^2` with the aperture decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GStarBound {
    /// `g*_λ(x)^2` (truncated).
    pub lhs: f64,
    /// `𝒮^2 + Σ_{j=1}^{J} 2^{-jλn} 𝒮_{2^j}^2`.
    pub rhs: f64,
    /// `lhs / rhs`.
    pub constant: f64,
    /// `2^{λn}`.
    pub bound: f64,
    pub pass: bool,
}

/// Evaluates both sides of the aperture decomposition of `g*_λ`.
pub fn s_alpha_from_gstar_bound(field: &HalfSpaceField, x: &[f64], lambda: f64, j_max: u32, radius: f64) -> Result<GStarBound> {
    if j_max < 1 {
        return Err(Error::Config("annulus cutoff J must be at least 1".into()));
    }
    let n = field.dim() as f64;
    let lhs = field.gstar_sum(x, &GStarParams::new(lambda, radius)?)?.direct;
    let mut rhs = field.cone_sum(x, 1.0)?;
    for j in 1..=j_max {
        let b = (j as f64).exp2();
        rhs += (-(j as f64) * lambda * n).exp2() * field.cone_sum(x, b)?;
    }
    let bound = (lambda * n).exp2();
    let constant = if rhs > 0.0 { lhs / rhs } else { 0.0 };
    Ok(GStarBound { lhs, rhs, constant, bound, pass: lhs <= bound * rhs * (1.0 + 1e-12) + f64::MIN_POSITIVE })
}

fn cone_reach(x: &[f64], beta: f64) -> Result<Reach> {
    Reach::point(x, beta, 0.0)
}

fn check_cone(cone: &crate::grid::ConeSpec) -> Result<()> {
    crate::grid::ConeSpec::new(cone.beta, cone.levels).map(|_| ())
}

/// `𝒮_α(f)(x)` over the truncated cone of aperture one.
pub fn s_alpha(f: &GridFunction, x: &[f64], alpha: f64, cone: &crate::grid::ConeSpec, m: usize) -> Result<f64> {
    if cone.beta != 1.0 {
        return Err(Error::Config(format!("𝒮_α uses aperture 1, got {}", cone.beta)));
    }
    s_alpha_beta(f, x, alpha, cone, m)
}

/// `𝒮_{α,β}(f)(x)`.
pub fn s_alpha_beta(f: &GridFunction, x: &[f64], alpha: f64, cone: &crate::grid::ConeSpec, m: usize) -> Result<f64> {
    check_cone(cone)?;
    let field = HalfSpaceField::intrinsic(f, alpha, m, &cone.levels, &cone_reach(x, cone.beta)?, None)?;
    field.area(x, cone.beta)
}

/// `g_α(f)(x)` for a lattice point `x`.
pub fn g_alpha(f: &GridFunction, x: &[f64], alpha: f64, hs: &HalfSpaceGrid, m: usize) -> Result<f64> {
    let field = HalfSpaceField::intrinsic(f, alpha, m, hs, &Reach::point(x, 1.0, 0.0)?, None)?;
    field.vertical(x)
}

/// `g*_{λ,α}(f)(x)`.
pub fn g_star_lambda_alpha(f: &GridFunction, x: &[f64], alpha: f64, gp: &GStarParams, hs: &HalfSpaceGrid, m: usize) -> Result<f64> {
    let field = HalfSpaceField::intrinsic(f, alpha, m, hs, &Reach::point(x, 1.0, gp.radius)?, None)?;
    field.gstar(x, gp)
}

/// `S_{ψ,β}(f)(x)`.
pub fn s_psi_beta(f: &GridFunction, x: &[f64], psi: &PsiKernel, cone: &crate::grid::ConeSpec) -> Result<f64> {
    check_cone(cone)?;
    let field = HalfSpaceField::psi(f, psi, &cone.levels, &cone_reach(x, cone.beta)?)?;
    field.area(x, cone.beta)
}

/// Classical area integral `S_β(f)(x)` of the Poisson extension.
pub fn poisson_square(f: &GridFunction, x: &[f64], cone: &crate::grid::ConeSpec) -> Result<f64> {
    check_cone(cone)?;
    let field = HalfSpaceField::poisson(f, &cone.levels, &cone_reach(x, cone.beta)?)?;
    field.area(x, cone.beta)
}

/// Classical `g(f)(x)` for a lattice point `x`.
pub fn poisson_g(f: &GridFunction, x: &[f64], hs: &HalfSpaceGrid) -> Result<f64> {
    let field = HalfSpaceField::poisson(f, hs, &Reach::point(x, 1.0, 0.0)?)?;
    field.vertical(x)
}

/// Classical `g*_λ(f)(x)`.
pub fn poisson_gstar(f: &GridFunction, x: &[f64], gp: &GStarParams, hs: &HalfSpaceGrid) -> Result<f64> {
    let field = HalfSpaceField::poisson(f, hs, &Reach::point(x, 1.0, gp.radius)?)?;
    field.gstar(x, gp)
}

/// `c_n t / (t^2 + |x|^2)^{(n+1)/2}`.
pub fn poisson_kernel(n: usize, x: &[f64], t: f64) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    if n == 1 {
        t / (PI * (t * t + r2))
    } else {
        t / (2.0 * PI * (t * t + r2).powf(1.5))
    }
}

/// Poisson extension of piecewise-constant data, integrated exactly cell
/// by cell through the jumps of `f`.
#[derive(Debug, Clone)]
pub struct PoissonExtension {
    n: usize,
    /// `(edge coordinates, jump)`; in 2-d the mixed second difference at a
    /// cell corner.
    jumps: Vec<(Point, f64)>,
}

impl PoissonExtension {
    pub fn new(f: &GridFunction) -> Self {
        let n = f.dim();
        let shape = f.shape();
        let h = f.h();
        let lo = f.lower();
        let vals = f.values();
        let get = |i0: i64, i1: i64| {
            if i0 < 0 || i1 < 0 || i0 >= shape[0] as i64 || i1 >= shape[1] as i64 {
                0.0
            } else {
                vals[i0 as usize + shape[0] * i1 as usize]
            }
        };
        let mut jumps = Vec::new();
        let k1_max = if n == 2 { shape[1] as i64 } else { 0 };
        for k1 in 0..=k1_max {
            for k0 in 0..=shape[0] as i64 {
                let d = if n == 1 {
                    get(k0, 0) - get(k0 - 1, 0)
                } else {
                    get(k0, k1) - get(k0 - 1, k1) - get(k0, k1 - 1) + get(k0 - 1, k1 - 1)
                };
                if d != 0.0 {
                    jumps.push(([lo[0] + k0 as f64 * h, lo[1] + k1 as f64 * h], d));
                }
            }
        }
        Self { n, jumps }
    }

    /// `u(y, t)`.
    pub fn value(&self, y: &[f64], t: f64) -> f64 {
        let y = pad(y);
        let mut u = 0.0;
        for (e, d) in &self.jumps {
            let x0 = y[0] - e[0];
            u += d * if self.n == 1 {
                (x0 / t).atan() / PI
            } else {
                let x1 = y[1] - e[1];
                let r = (x0 * x0 + x1 * x1 + t * t).sqrt();
                (x0 * x1 / (t * r)).atan() / (2.0 * PI)
            };
        }
        u
    }

    /// `(∂_t u, ∂_{y_1} u, ∂_{y_2} u)` from the differentiated kernel.
    pub fn gradient(&self, y: &Point, t: f64) -> [f64; 3] {
        let mut g = [0.0; 3];
        let t2 = t * t;
        for (e, d) in &self.jumps {
            let x0 = y[0] - e[0];
            if self.n == 1 {
                let q = t2 + x0 * x0;
                g[0] -= d * x0 / (PI * q);
                g[1] += d * t / (PI * q);
            } else {
                let x1 = y[1] - e[1];
                let a = t2 + x0 * x0;
                let b = t2 + x1 * x1;
                let r = (x0 * x0 + x1 * x1 + t2).sqrt();
                let c = d / (2.0 * PI);
                g[0] -= c * x0 * x1 * (x0 * x0 + x1 * x1 + 2.0 * t2) / (r * a * b);
                g[1] += c * t * x1 / (a * r);
                g[2] += c * t * x0 / (b * r);
            }
        }
        g
    }

    /// Central differences of [`PoissonExtension::value`] with step `eps`.
    pub fn gradient_fd(&self, y: &Point, t: f64, eps: f64) -> [f64; 3] {
        let n = self.n;
        let mut g = [0.0; 3];
        g[0] = (self.value(&y[..n], t + eps) - self.value(&y[..n], t - eps)) / (2.0 * eps);
        for a in 0..n {
            let mut p = *y;
            let mut q = *y;
            p[a] += eps;
            q[a] -= eps;
            g[a + 1] = (self.value(&p[..n], t) - self.value(&q[..n], t)) / (2.0 * eps);
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calpha::a_alpha_lp;
    use crate::grid::{cone_integral, BoxDomain, ConeSpec};

    fn indicator(h: f64) -> GridFunction {
        GridFunction::make_grid(1, &BoxDomain::new(&[-2.0], &[4.0]), h, |x| if (0.0..1.0).contains(&x[0]) { 1.0 } else { 0.0 })
            .unwrap()
    }

    fn dipole(h: f64) -> GridFunction {
        GridFunction::make_grid(1, &BoxDomain::new(&[-2.0], &[4.0]), h, |x| {
            if (0.0..0.5).contains(&x[0]) {
                1.0
            } else if (0.5..1.0).contains(&x[0]) {
                -1.0
            } else {
                0.0
            }
        })
        .unwrap()
    }

    #[test]
    fn poisson_matches_closed_form() {
        let f = indicator(0.125);
        let ext = PoissonExtension::new(&f);
        let u = ext.value(&[0.5], 0.5);
        assert!((u - 0.5).abs() < 1e-12);
        for (y, t) in [(0.3, 0.2), (2.0, 1.5), (-1.0, 0.05)] {
            let exact = ((1.0f64 - y) / t).atan() / PI + (y / t).atan() / PI;
            assert!((ext.value(&[y], t) - exact).abs() < 1e-12);
        }
        // kernel mass
        for t in [0.5, 1.0, 2.0] {
            let mass = 2.0 * (1e9f64 / t).atan() / PI;
            assert!((mass - 1.0).abs() < 1e-6);
            let mid: f64 = (0..2_000_000).map(|i| poisson_kernel(1, &[-1e3 + (i as f64 + 0.5) * 1e-3], t) * 1e-3).sum();
            assert!((mid - 1.0).abs() < 2e-3);
        }
    }

    #[test]
    fn poisson_gradient_matches_finite_differences() {
        let f1 = GridFunction::make_grid(1, &BoxDomain::centered(1, 2.0), 0.0625, |x| (-x[0] * x[0]).exp()).unwrap();
        let f2 = GridFunction::make_grid(2, &BoxDomain::centered(2, 1.5), 0.125, |x| (-(x[0] * x[0] + 2.0 * x[1] * x[1])).exp())
            .unwrap();
        for f in [&f1, &f2] {
            let ext = PoissonExtension::new(f);
            for (y, t) in [([0.2, -0.1], 0.4), ([1.0, 0.5], 1.2), ([-2.5, 0.0], 0.7)] {
                let a = ext.gradient(&y, t);
                let b = ext.gradient_fd(&y, t, 1e-4);
                for i in 0..3 {
                    assert!((a[i] - b[i]).abs() < 1e-6, "{a:?} {b:?}");
                }
            }
        }
    }

    #[test]
    fn poisson_2d_mass_and_value() {
        // an indicator of a large square: u is close to 1 deep inside at small t
        let f = GridFunction::make_grid(2, &BoxDomain::centered(2, 4.0), 0.5, |_| 1.0).unwrap();
        let ext = PoissonExtension::new(&f);
        let u = ext.value(&[0.0, 0.0], 0.01);
        let q = (16.0f64 / (0.01 * (32.0f64 + 1e-4).sqrt())).atan() / (2.0 * PI);
        assert!((u - 4.0 * q).abs() < 1e-12 && (u - 1.0).abs() < 3e-3);
        // quarter-plane corner: one quarter of the mass
        let g = GridFunction::make_grid(2, &BoxDomain::new(&[0.0, 0.0], &[400.0, 400.0]), 50.0, |_| 1.0).unwrap();
        let e = PoissonExtension::new(&g);
        assert!((e.value(&[0.0, 0.0], 1.0) - 0.25).abs() < 1e-3);
    }

    #[test]
    fn field_cone_matches_grid_cone_integral() {
        let f = dipole(0.125);
        let hs = HalfSpaceGrid::covering(0.25, 8.0, 4).unwrap();
        let x = [3.0];
        let field = HalfSpaceField::intrinsic(&f, 1.0, 16, &hs, &Reach::point(&x, 2.0, 0.0).unwrap(), None).unwrap();
        let cone = ConeSpec::new(2.0, hs).unwrap();
        let direct = cone_integral(
            |y, t| {
                let v = a_alpha_lp(&f, &y[..1], t, 1.0, 16).unwrap();
                v * v
            },
            &x,
            &cone,
            &f.lattice(),
        );
        let cached = field.cone_sum(&x, 2.0).unwrap();
        assert!((direct.value - cached).abs() < 1e-9 * direct.value, "{} {cached}", direct.value);
    }

    #[test]
    fn field_2d_cone_matches_grid_cone_integral() {
        let f = GridFunction::make_grid(2, &BoxDomain::centered(2, 1.0), 0.25, |x| x[0] * (1.0 - x[1].abs())).unwrap();
        let hs = HalfSpaceGrid::covering(0.5, 4.0, 2).unwrap();
        let ext = PoissonExtension::new(&f);
        let x = [0.5, -0.25];
        let field = HalfSpaceField::poisson(&f, &hs, &Reach::point(&x, 1.5, 0.0).unwrap()).unwrap();
        let cone = ConeSpec::new(1.5, hs).unwrap();
        let direct = cone_integral(
            |y, t| {
                let g = ext.gradient(y, t);
                t * t * (g[0] * g[0] + g[1] * g[1] + g[2] * g[2])
            },
            &x,
            &cone,
            &f.lattice(),
        );
        let cached = field.cone_sum(&x, 1.5).unwrap();
        assert!((direct.value - cached).abs() < 1e-12 * direct.value);
    }

    #[test]
    fn zero_and_constant_inputs_vanish() {
        let hs = HalfSpaceGrid::covering(0.25, 4.0, 4).unwrap();
        let zero = indicator(0.125).zeros_like();
        let c = GridFunction::make_grid(1, &BoxDomain::centered(1, 8.0), 0.125, |_| 2.0).unwrap();
        let cone = ConeSpec::new(1.0, hs).unwrap();
        let psi = PsiKernel::builtin(Arc::new(BallGrid::new(1, 16).unwrap()), 1.0).unwrap();
        {
            let f = &zero;
            assert_eq!(s_alpha(f, &[0.0], 1.0, &cone, 16).unwrap(), 0.0);
            assert_eq!(g_alpha(f, &[0.0], 1.0, &hs, 16).unwrap(), 0.0);
            assert_eq!(poisson_square(f, &[0.0], &cone).unwrap(), 0.0);
            assert_eq!(s_psi_beta(f, &[0.0], &psi, &cone).unwrap(), 0.0);
        }
        // constant far from the box edge: every ball stays inside the box
        assert!(s_alpha(&c, &[0.0], 1.0, &cone, 16).unwrap() < 1e-10);
        assert!(s_psi_beta(&c, &[0.0], &psi, &cone).unwrap() < 1e-10);
        assert!(matches!(s_alpha(&c, &[0.0], 1.0, &cone.with_beta(2.0).unwrap(), 16), Err(Error::Config(_))));
    }

    #[test]
    fn aperture_and_lambda_monotone() {
        let f = dipole(0.125);
        let hs = HalfSpaceGrid::covering(0.25, 8.0, 4).unwrap();
        let reach = Reach::new(&[-1.0], &[3.0], 4.0, 8.0).unwrap();
        let field = HalfSpaceField::intrinsic(&f, 0.5, 12, &hs, &reach, None).unwrap();
        for x in [-1.0, 0.25, 1.5, 3.0] {
            let mut prev = 0.0;
            for b in [0.5, 1.0, 2.0, 4.0] {
                let v = field.area(&[x], b).unwrap();
                assert!(v >= prev);
                prev = v;
            }
            let mut prev = f64::INFINITY;
            for l in [1.0, 2.0, 4.0, 8.0] {
                let v = field.gstar(&[x], &GStarParams::new(l, 8.0).unwrap()).unwrap();
                assert!(v <= prev);
                prev = v;
            }
        }
    }

    #[test]
    fn annulus_partition_is_exact() {
        let f = dipole(0.125);
        let hs = HalfSpaceGrid::covering(0.25, 8.0, 4).unwrap();
        let reach = Reach::new(&[-1.0], &[3.0], 1.0, 8.0).unwrap();
        let field = HalfSpaceField::intrinsic(&f, 1.0, 12, &hs, &reach, None).unwrap();
        for x in [-1.0, 0.5, 2.125] {
            let s = field.gstar_sum(&[x], &GStarParams::new(3.0, 8.0).unwrap()).unwrap();
            assert!((s.direct - s.partitioned()).abs() <= 1e-12 * s.direct);
            assert!(s.annuli.len() > 2);
        }
    }

    #[test]
    fn gstar_bound_and_domination() {
        let f = dipole(0.125);
        let hs = HalfSpaceGrid::covering(0.25, 8.0, 4).unwrap();
        let reach = Reach::new(&[-1.0], &[3.0], 64.0, 16.0).unwrap();
        let field = HalfSpaceField::intrinsic(&f, 1.0, 12, &hs, &reach, None).unwrap();
        let lambda = 4.0;
        for x in [-1.0, 0.5, 3.0] {
            let r = s_alpha_from_gstar_bound(&field, &[x], lambda, 6, 16.0).unwrap();
            assert!(r.pass && r.constant <= 16.0, "{r:?}");
            let s = field.area(&[x], 1.0).unwrap();
            let g = field.gstar(&[x], &GStarParams::new(lambda, 16.0).unwrap()).unwrap();
            assert!(s <= 2f64.powf(lambda / 2.0) * g * (1.0 + 1e-12));
        }
    }

    #[test]
    fn vertical_requires_lattice_points() {
        let f = dipole(0.125);
        let hs = HalfSpaceGrid::covering(0.25, 4.0, 4).unwrap();
        assert!(g_alpha(&f, &[0.5], 1.0, &hs, 8).unwrap() > 0.0);
        assert!(matches!(g_alpha(&f, &[0.3], 1.0, &hs, 8), Err(Error::Domain(_))));
    }

    #[test]
    fn psi_dominated_by_intrinsic() {
        let f = dipole(0.125);
        let hs = HalfSpaceGrid::covering(0.25, 8.0, 4).unwrap();
        for alpha in [0.5, 1.0] {
            let prog_m = 16;
            let ball = Arc::new(BallGrid::new(1, prog_m).unwrap());
            let psi = PsiKernel::builtin(ball, alpha).unwrap();
            let l = psi.holder_constant();
            let reach = Reach::new(&[-2.0], &[3.0], 1.0, 0.0).unwrap();
            let a = HalfSpaceField::intrinsic(&f, alpha, prog_m, &hs, &reach, None).unwrap();
            let p = HalfSpaceField::psi(&f, &psi, &hs, &reach).unwrap();
            for x in [-2.0, 0.0, 0.5, 1.25, 3.0] {
                let sp = p.area(&[x], 1.0).unwrap();
                let sa = a.area(&[x], 1.0).unwrap();
                assert!(sp <= l * sa * (1.0 + 1e-9) + 1e-14, "x={x}: {sp} > {l}·{sa}");
            }
        }
    }

    #[test]
    fn psi_validation() {
        let ball = Arc::new(BallGrid::new(1, 16).unwrap());
        let psi = PsiKernel::builtin(ball.clone(), 1.0).unwrap();
        assert!(psi.holder_constant() > 1.0);
        let lopsided = TestProfile::from_rule(ball.clone(), 1.0, |u| u[0] * (1.0 - u[0].abs()).max(0.0));
        assert!(matches!(PsiKernel::new(lopsided), Err(Error::Config(_))));
        let bump = TestProfile::from_rule(ball, 1.0, |u| (1.0 - u[0] * u[0]).max(0.0));
        assert!(matches!(PsiKernel::new(bump), Err(Error::Config(_))));
        let ball2 = Arc::new(BallGrid::new(2, 8).unwrap());
        assert!(PsiKernel::builtin(ball2, 1.0).is_ok());
    }

    #[test]
    fn dictionary_sandwich_is_tracked() {
        let f = dipole(0.125);
        let hs = HalfSpaceGrid::covering(0.25, 4.0, 4).unwrap();
        let prog_ball = Arc::new(BallGrid::new(1, 16).unwrap());
        let dict = Dictionary::default_for(prog_ball, 1.0).unwrap();
        let reach = Reach::new(&[-1.0], &[2.0], 1.0, 0.0).unwrap();
        let field = HalfSpaceField::intrinsic(&f, 1.0, 16, &hs, &reach, Some(&dict)).unwrap();
        assert!(field.stats().evaluations > 0);
        assert!(field.stats().max_dict_excess <= 1e-8);
    }

    #[test]
    fn scaling_covariance() {
        let f = dipole(0.125);
        let fs = GridFunction::from_values(1, &[-4.0], 0.25, &[f.len()], f.values().to_vec()).unwrap();
        let hs = HalfSpaceGrid::covering(0.25, 8.0, 4).unwrap();
        let hs2 = HalfSpaceGrid::covering(0.5, 16.0, 4).unwrap();
        let a = HalfSpaceField::intrinsic(&f, 1.0, 12, &hs, &Reach::point(&[2.5], 1.0, 0.0).unwrap(), None).unwrap();
        let b = HalfSpaceField::intrinsic(&fs, 1.0, 12, &hs2, &Reach::point(&[5.0], 1.0, 0.0).unwrap(), None).unwrap();
        let (sa, sb) = (a.area(&[2.5], 1.0).unwrap(), b.area(&[5.0], 1.0).unwrap());
        assert!((sa - sb).abs() < 1e-9 * sa, "{sa} {sb}");
    }
}
