//! Uniform spatial grids, piecewise-constant grid functions, midpoint
//! convolution quadrature and the logarithmic half-space grid used by every
//! cone integral.
//!
//! A [`GridFunction`] stores one sample per node `x_i = lower + i*h`. The
//! sample is the value of the function on the whole cell `[x_i, x_i + h)^n`,
//! so grid data is an honest piecewise-constant function on `R^n` that
//! vanishes outside its box.

use crate::error::{Error, Result};

/// A point of `R^n` padded to two coordinates (`n = 1` ignores index 1).
pub type Point = [f64; 2];

pub(crate) fn pad(x: &[f64]) -> Point {
    match x {
        [a] => [*a, 0.0],
        [a, b, ..] => [*a, *b],
        [] => [0.0, 0.0],
    }
}

pub(crate) fn check_dim(n: usize) -> Result<()> {
    if n == 1 || n == 2 {
        Ok(())
    } else {
        Err(Error::Config(format!("dimension must be 1 or 2, got {n}")))
    }
}

/// Euclidean distance between the first `n` coordinates.
pub fn dist(n: usize, a: &Point, b: &Point) -> f64 {
    if n == 1 {
        (a[0] - b[0]).abs()
    } else {
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    }
}

/// An axis-parallel box given by its lower corner and side lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    pub lower: Vec<f64>,
    pub sides: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: &[f64], sides: &[f64]) -> Self {
        Self { lower: lower.to_vec(), sides: sides.to_vec() }
    }

    /// The cube `[-half, half)^n`.
    pub fn centered(n: usize, half: f64) -> Self {
        Self { lower: vec![-half; n], sides: vec![2.0 * half; n] }
    }

    pub fn diameter(&self) -> f64 {
        self.sides.iter().map(|s| s * s).sum::<f64>().sqrt()
    }
}

/// Samples of a piecewise-constant function on a uniform box grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    n: usize,
    lower: Point,
    h: f64,
    shape: [usize; 2],
    values: Vec<f64>,
}

impl GridFunction {
    /// Samples `rule` at the grid nodes of `domain`.
    pub fn make_grid<F>(n: usize, domain: &BoxDomain, h: f64, rule: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64,
    {
        check_dim(n)?;
        if domain.lower.len() != n || domain.sides.len() != n {
            return Err(Error::Config("box dimension mismatch".into()));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Config(format!("spacing must be positive, got {h}")));
        }
        let mut shape = [1usize; 2];
        for (axis, &side) in domain.sides.iter().enumerate() {
            let cells = (side / h).round();
            if !(side > 0.0) || cells < 1.0 || (cells * h - side).abs() > 1e-9 * side.max(1.0) {
                return Err(Error::Config(format!(
                    "side {side} on axis {axis} is not a positive multiple of h = {h}"
                )));
            }
            shape[axis] = cells as usize;
        }
        let lower = pad(&domain.lower);
        let mut values = Vec::with_capacity(shape[0] * shape[1]);
        for i1 in 0..shape[1] {
            for i0 in 0..shape[0] {
                let x = [lower[0] + i0 as f64 * h, lower[1] + i1 as f64 * h];
                let v = rule(&x[..n]);
                if !v.is_finite() {
                    return Err(Error::Config(format!("rule returned non-finite value at {:?}", &x[..n])));
                }
                values.push(v);
            }
        }
        Ok(Self { n, lower, h, shape, values })
    }

    /// Wraps raw samples laid out with axis 0 fastest.
    pub fn from_values(n: usize, lower: &[f64], h: f64, shape: &[usize], values: Vec<f64>) -> Result<Self> {
        check_dim(n)?;
        if lower.len() != n || shape.len() != n {
            return Err(Error::Config("grid dimension mismatch".into()));
        }
        if !(h > 0.0) {
            return Err(Error::Config("spacing must be positive".into()));
        }
        let mut sh = [1usize; 2];
        sh[..n].copy_from_slice(shape);
        if sh[0] * sh[1] != values.len() || values.is_empty() {
            return Err(Error::Config("sample count does not match shape".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("samples must be finite".into()));
        }
        Ok(Self { n, lower: pad(lower), h, shape: sh, values })
    }

    /// A zero function on the same grid.
    pub fn zeros_like(&self) -> Self {
        Self { values: vec![0.0; self.values.len()], ..self.clone() }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn shape(&self) -> [usize; 2] {
        self.shape
    }

    pub fn lower(&self) -> Point {
        self.lower
    }

    pub fn upper(&self) -> Point {
        [
            self.lower[0] + self.shape[0] as f64 * self.h,
            if self.n == 2 { self.lower[1] + self.shape[1] as f64 * self.h } else { 0.0 },
        ]
    }

    pub fn domain(&self) -> BoxDomain {
        let sides: Vec<f64> = (0..self.n).map(|a| self.shape[a] as f64 * self.h).collect();
        BoxDomain::new(&self.lower[..self.n], &sides)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Volume `h^n` of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.n as i32)
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 2] {
        [idx % self.shape[0], idx / self.shape[0]]
    }

    /// Node (lower cell corner) of flat index `idx`.
    pub fn node(&self, idx: usize) -> Point {
        let [i0, i1] = self.multi_index(idx);
        [
            self.lower[0] + i0 as f64 * self.h,
            if self.n == 2 { self.lower[1] + i1 as f64 * self.h } else { 0.0 },
        ]
    }

    pub fn cell_center(&self, idx: usize) -> Point {
        let p = self.node(idx);
        let half = 0.5 * self.h;
        [p[0] + half, if self.n == 2 { p[1] + half } else { 0.0 }]
    }

    /// Value of the cell containing `x`; exactly 0 outside the box.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let x = pad(x);
        let mut ij = [0usize; 2];
        for a in 0..self.n {
            let s = ((x[a] - self.lower[a]) / self.h).floor();
            if !(s >= 0.0) || s >= self.shape[a] as f64 {
                return 0.0;
            }
            ij[a] = s as usize;
        }
        self.values[ij[0] + self.shape[0] * ij[1]]
    }

    /// Cells with nonzero value, as a half-open index box `[lo, hi)`.
    pub fn support_indices(&self) -> Option<([usize; 2], [usize; 2])> {
        let mut lo = [usize::MAX; 2];
        let mut hi = [0usize; 2];
        let mut any = false;
        for (idx, v) in self.values.iter().enumerate() {
            if *v != 0.0 {
                any = true;
                let m = self.multi_index(idx);
                for a in 0..2 {
                    lo[a] = lo[a].min(m[a]);
                    hi[a] = hi[a].max(m[a] + 1);
                }
            }
        }
        any.then_some((lo, hi))
    }

    /// Bounding box `[lower, upper]` of the support in space.
    pub fn support_box(&self) -> Option<(Point, Point)> {
        self.support_indices().map(|(lo, hi)| {
            let mut a = [0.0; 2];
            let mut b = [0.0; 2];
            for ax in 0..self.n {
                a[ax] = self.lower[ax] + lo[ax] as f64 * self.h;
                b[ax] = self.lower[ax] + hi[ax] as f64 * self.h;
            }
            (a, b)
        })
    }

    /// Largest absolute sample.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Midpoint-rule integral of the cell data.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_volume()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { values: self.values.iter().map(|v| c * v).collect(), ..self.clone() }
    }

    pub fn map<F: Fn(f64) -> f64>(&self, g: F) -> Self {
        Self { values: self.values.iter().map(|v| g(*v)).collect(), ..self.clone() }
    }

    /// `a*self + b*other` on a common grid.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if !self.same_grid(other) {
            return Err(Error::Config("grid functions live on different grids".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(Self { values, ..self.clone() })
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.n == other.n
            && self.shape == other.shape
            && (self.h - other.h).abs() <= 1e-12 * self.h
            && (0..self.n).all(|a| (self.lower[a] - other.lower[a]).abs() <= 1e-9 * self.h)
    }

    /// The same samples carried by a box moved by `shift` (any real vector).
    pub fn translated(&self, shift: &[f64]) -> Self {
        let s = pad(shift);
        let mut lower = self.lower;
        for a in 0..self.n {
            lower[a] += s[a];
        }
        Self { lower, ..self.clone() }
    }

    /// Lattice of cell nodes; square-function output lives on it.
    pub fn lattice(&self) -> Lattice {
        Lattice { n: self.n, origin: self.lower, h: self.h }
    }

    /// Replaces the samples, keeping geometry.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::Config("sample count mismatch".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("samples must be finite".into()));
        }
        Ok(Self { values, ..self.clone() })
    }
}

/// A kernel on the unit ball (or a ball of radius [`Kernel::radius`]).
pub trait Kernel {
    fn eval(&self, u: &[f64]) -> f64;

    fn radius(&self) -> f64 {
        1.0
    }
}

impl<F> Kernel for F
where
    F: Fn(&[f64]) -> f64,
{
    fn eval(&self, u: &[f64]) -> f64 {
        self(u)
    }
}

/// Midpoint quadrature of `f * phi_t(y) = ∫ t^{-n} phi((y - z)/t) f(z) dz`.
pub fn convolve_at<K: Kernel + ?Sized>(f: &GridFunction, phi: &K, t: f64, y: &[f64]) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("scale t must be positive, got {t}")));
    }
    let n = f.dim();
    let y = pad(y);
    let reach = phi.radius() * t;
    let h = f.h();
    let lower = f.lower();
    let shape = f.shape();
    let mut range = [(0usize, 1usize); 2];
    for a in 0..n {
        // cell centers lower + (i + 1/2) h within [y - reach, y + reach]
        let lo = ((y[a] - reach - lower[a]) / h - 0.5).ceil().max(0.0);
        let hi = ((y[a] + reach - lower[a]) / h - 0.5).floor();
        if hi < 0.0 || lo >= shape[a] as f64 {
            return Ok(0.0);
        }
        range[a] = (lo as usize, (hi as usize + 1).min(shape[a]));
    }
    let inv_t = 1.0 / t;
    let mut acc = 0.0;
    let mut u = [0.0; 2];
    for i1 in range[1].0..range[1].1 {
        for i0 in range[0].0..range[0].1 {
            let v = f.values[i0 + shape[0] * i1];
            if v == 0.0 {
                continue;
            }
            u[0] = (y[0] - (lower[0] + (i0 as f64 + 0.5) * h)) * inv_t;
            if n == 2 {
                u[1] = (y[1] - (lower[1] + (i1 as f64 + 0.5) * h)) * inv_t;
            }
            acc += v * phi.eval(&u[..n]);
        }
    }
    Ok(acc * f.cell_volume() * inv_t.powi(n as i32))
}

/// Spatial lattice `origin + k h`, `k ∈ Z^n`; each point owns the cell
/// `[y - h/2, y + h/2)^n` in cone quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    pub n: usize,
    pub origin: Point,
    pub h: f64,
}

impl Lattice {
    pub fn point(&self, k: [i64; 2]) -> Point {
        [
            self.origin[0] + k[0] as f64 * self.h,
            if self.n == 2 { self.origin[1] + k[1] as f64 * self.h } else { 0.0 },
        ]
    }

    /// Nearest lattice index to `x` along `axis`.
    pub fn nearest(&self, x: f64, axis: usize) -> i64 {
        ((x - self.origin[axis]) / self.h).round() as i64
    }
}

/// Logarithmic grid in `t`: cells `[t0 2^{m/L}, t0 2^{(m+1)/L})` for
/// `m` in `start..end`, each sampled at its log-midpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfSpaceGrid {
    base: f64,
    per_octave: usize,
    start: usize,
    end: usize,
}

impl HalfSpaceGrid {
    pub fn new(t_min: f64, per_octave: usize, levels: usize) -> Result<Self> {
        if !(t_min > 0.0) || !t_min.is_finite() {
            return Err(Error::Config(format!("t_min must be positive, got {t_min}")));
        }
        if per_octave == 0 {
            return Err(Error::Config("need at least one level per octave".into()));
        }
        Ok(Self { base: t_min, per_octave, start: 0, end: levels })
    }

    /// Smallest grid starting at `t_min` whose top edge reaches `t_max`.
    pub fn covering(t_min: f64, t_max: f64, per_octave: usize) -> Result<Self> {
        if !(t_max > t_min) {
            return Err(Error::Config(format!("need t_min < t_max, got [{t_min}, {t_max}]")));
        }
        let levels = ((t_max / t_min).log2() * per_octave as f64 - 1e-9).ceil().max(1.0) as usize;
        Self::new(t_min, per_octave, levels)
    }

    /// Default window for grid spacing `h`: `[h, diameter]`, 8 levels per octave.
    pub fn default_for(h: f64, diameter: f64) -> Result<Self> {
        Self::covering(h, diameter, 8)
    }

    pub fn per_octave(&self) -> usize {
        self.per_octave
    }

    pub fn levels(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn edge(&self, m: usize) -> f64 {
        self.base * (m as f64 / self.per_octave as f64).exp2()
    }

    /// Log-midpoint of cell `m`.
    pub fn node(&self, m: usize) -> f64 {
        self.base * ((m as f64 + 0.5) / self.per_octave as f64).exp2()
    }

    pub fn t_min(&self) -> f64 {
        self.edge(self.start)
    }

    pub fn t_max(&self) -> f64 {
        self.edge(self.end)
    }

    /// Width of every cell in `ln t`.
    pub fn log_width(&self) -> f64 {
        std::f64::consts::LN_2 / self.per_octave as f64
    }

    /// Splits at absolute level `m` into `[start, m)` and `[m, end)`.
    pub fn split(&self, m: usize) -> (Self, Self) {
        let m = m.clamp(self.start, self.end);
        (Self { end: m, ..*self }, Self { start: m, ..*self })
    }

    /// Same base and resolution, truncated to the top edge `t_max`.
    pub fn truncated(&self, t_max: f64) -> Self {
        let top = ((t_max / self.base).log2() * self.per_octave as f64 + 1e-9).floor();
        let end = (top.max(0.0) as usize).clamp(self.start, self.end);
        Self { end, ..*self }
    }

    /// Levels refined by `factor` per octave over the same window.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            base: self.base,
            per_octave: self.per_octave * factor,
            start: self.start * factor,
            end: self.end * factor,
        }
    }
}

/// Aperture and `t`-window of a truncated cone `Γ_β(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeSpec {
    pub beta: f64,
    pub levels: HalfSpaceGrid,
}

impl ConeSpec {
    pub fn new(beta: f64, levels: HalfSpaceGrid) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::Config(format!("aperture must be positive, got {beta}")));
        }
        if levels.is_empty() || !(levels.t_min() < levels.t_max()) {
            return Err(Error::Config("cone needs t_min < t_max".into()));
        }
        Ok(Self { beta, levels })
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(beta, self.levels)
    }
}

/// Calls `visit(k, w)` for every lattice point with positive quadrature
/// weight `w` (spatial measure) inside the slice `{|x - y| < radius}`.
///
/// In one dimension the weight is the exact overlap of the owned cell with
/// the slice; in two dimensions cells count fully when their center lies
/// strictly inside.
pub fn slice_weights<V: FnMut([i64; 2], f64)>(lat: &Lattice, x: &Point, radius: f64, mut visit: V) {
    let h = lat.h;
    if lat.n == 1 {
        let lo_x = x[0] - radius;
        let hi_x = x[0] + radius;
        let k_lo = ((lo_x - lat.origin[0]) / h - 0.5).floor() as i64;
        let k_hi = ((hi_x - lat.origin[0]) / h + 0.5).ceil() as i64;
        for k in k_lo..=k_hi {
            let c = lat.origin[0] + k as f64 * h;
            let a = (c - 0.5 * h).max(lo_x);
            let b = (c + 0.5 * h).min(hi_x);
            if b > a {
                visit([k, 0], b - a);
            }
        }
    } else {
        let w = h * h;
        let r2 = radius * radius;
        let k0_lo = ((x[0] - radius - lat.origin[0]) / h).floor() as i64;
        let k0_hi = ((x[0] + radius - lat.origin[0]) / h).ceil() as i64;
        for k0 in k0_lo..=k0_hi {
            let dx = lat.origin[0] + k0 as f64 * h - x[0];
            let rem = r2 - dx * dx;
            if rem <= 0.0 {
                continue;
            }
            let span = rem.sqrt();
            let k1_lo = ((x[1] - span - lat.origin[1]) / h).floor() as i64;
            let k1_hi = ((x[1] + span - lat.origin[1]) / h).ceil() as i64;
            for k1 in k1_lo..=k1_hi {
                let dy = lat.origin[1] + k1 as f64 * h - x[1];
                if dx * dx + dy * dy < r2 {
                    visit([k0, k1], w);
                }
            }
        }
    }
}

/// Result of a truncated cone quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeIntegral {
    pub value: f64,
    /// No quadrature cell met the truncated cone.
    pub truncated_empty: bool,
}

/// Quadrature of `∬_{Γ_β(x), t ∈ [t_min, t_max]} F(y, t) dy dt / t^{n+1}`.
pub fn cone_integral<F>(integrand: F, x: &[f64], cone: &ConeSpec, lat: &Lattice) -> ConeIntegral
where
    F: Fn(&Point, f64) -> f64,
{
    let x = pad(x);
    let n = lat.n;
    let du = cone.levels.log_width();
    let mut value = 0.0;
    let mut touched = false;
    for m in cone.levels.levels() {
        let t = cone.levels.node(m);
        let scale = du / t.powi(n as i32);
        let mut level = 0.0;
        slice_weights(lat, &x, cone.beta * t, |k, w| {
            touched = true;
            level += w * integrand(&lat.point(k), t);
        });
        value += scale * level;
    }
    ConeIntegral { value, truncated_empty: !touched }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine(u: &[f64]) -> f64 {
        if u[0].abs() <= 1.0 {
            (PI * u[0]).sin() / PI
        } else {
            0.0
        }
    }

    #[test]
    fn make_grid_samples_nodes() {
        let f = GridFunction::make_grid(1, &BoxDomain::new(&[0.0], &[1.0]), 0.25, |_| 1.0).unwrap();
        assert_eq!(f.values(), &[1.0, 1.0, 1.0, 1.0]);
        let f = GridFunction::make_grid(1, &BoxDomain::new(&[0.0], &[1.0]), 0.5, |x| x[0]).unwrap();
        assert_eq!(f.values(), &[0.0, 0.5]);
        let f = GridFunction::make_grid(2, &BoxDomain::new(&[0.0, 0.0], &[1.0, 1.0]), 0.5, |x| x[0] * x[1])
            .unwrap();
        assert_eq!(f.values(), &[0.0, 0.0, 0.0, 0.25]);
    }

    #[test]
    fn make_grid_rejects_non_multiple_side() {
        let err = GridFunction::make_grid(1, &BoxDomain::new(&[0.0], &[1.0]), 0.3, |_| 1.0).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(GridFunction::make_grid(3, &BoxDomain::centered(3, 1.0), 0.5, |_| 1.0).is_err());
    }

    #[test]
    fn evaluation_outside_box_is_zero() {
        let f = GridFunction::make_grid(2, &BoxDomain::centered(2, 1.0), 0.25, |_| 3.0).unwrap();
        assert_eq!(f.evaluate(&[0.1, 0.2]), 3.0);
        assert_eq!(f.evaluate(&[1.0, 0.0]), 0.0);
        assert_eq!(f.evaluate(&[0.0, -1.01]), 0.0);
        assert_eq!(f.evaluate(&[f64::NAN, 0.0]), 0.0);
    }

    #[test]
    fn convolve_indicator_with_sine() {
        let f = GridFunction::make_grid(1, &BoxDomain::new(&[0.0], &[1.0]), 1.0 / 512.0, |_| 1.0).unwrap();
        let v = convolve_at(&f, &sine, 1.0, &[0.0]).unwrap();
        let exact = -2.0 / (PI * PI);
        assert!((v - exact).abs() < 1e-5, "{v} vs {exact}");
        assert_eq!(convolve_at(&f, &sine, 1.0, &[3.0]).unwrap(), 0.0);
        assert!(matches!(convolve_at(&f, &sine, 0.0, &[0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn convolve_zero_mean_kernel_kills_constants() {
        let f = GridFunction::make_grid(1, &BoxDomain::centered(1, 4.0), 1.0 / 64.0, |_| 2.5).unwrap();
        // odd kernel: exact discrete cancellation when y is a node
        let v = convolve_at(&f, &sine, 1.0, &[0.5]).unwrap();
        assert!(v.abs() < 1e-10, "{v}");
    }

    #[test]
    fn midpoint_convolution_is_second_order() {
        let exact = -2.0 / (PI * PI);
        let err = |h: f64| {
            let f = GridFunction::make_grid(1, &BoxDomain::new(&[0.0], &[1.0]), h, |_| 1.0).unwrap();
            (convolve_at(&f, &sine, 1.0, &[0.0]).unwrap() - exact).abs()
        };
        let (e1, e2) = (err(1.0 / 16.0), err(1.0 / 32.0));
        assert!(e2 <= e1 / 4.0 * 1.01, "{e1} {e2}");
    }

    #[test]
    fn cone_integral_closed_forms() {
        let lat = Lattice { n: 1, origin: [0.0, 0.0], h: 1.0 / 64.0 };
        let hs = HalfSpaceGrid::covering(1.0, 2.0, 8).unwrap();
        let one = |_: &Point, _: f64| 1.0;
        let c1 = cone_integral(one, &[0.3], &ConeSpec::new(1.0, hs).unwrap(), &lat);
        assert!((c1.value - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert!(!c1.truncated_empty);
        let c2 = cone_integral(one, &[0.3], &ConeSpec::new(2.0, hs).unwrap(), &lat);
        assert!((c2.value - 4.0 * 2f64.ln()).abs() < 1e-12);
        let zero = cone_integral(|_: &Point, _: f64| 0.0, &[0.3], &ConeSpec::new(1.0, hs).unwrap(), &lat);
        assert_eq!(zero.value, 0.0);
    }

    #[test]
    fn cone_integral_additive_over_levels() {
        let lat = Lattice { n: 2, origin: [0.0, 0.0], h: 0.1 };
        let hs = HalfSpaceGrid::covering(0.2, 3.2, 4).unwrap();
        let cone = ConeSpec::new(1.5, hs).unwrap();
        let g = |y: &Point, t: f64| (y[0] * y[1]).cos() * t.sqrt();
        let whole = cone_integral(g, &[0.05, -0.3], &cone, &lat).value;
        let (a, b) = hs.split(7);
        let pa = cone_integral(g, &[0.05, -0.3], &ConeSpec::new(1.5, a).unwrap(), &lat).value;
        let pb = cone_integral(g, &[0.05, -0.3], &ConeSpec::new(1.5, b).unwrap(), &lat).value;
        assert!((whole - pa - pb).abs() <= 1e-12 * whole.abs().max(1.0));
    }

    #[test]
    fn empty_cone_is_flagged() {
        let lat = Lattice { n: 1, origin: [0.0, 0.0], h: 1.0 };
        let (_, empty) = HalfSpaceGrid::covering(1.0, 2.0, 4).unwrap().split(100);
        let cone = ConeSpec { beta: 1.0, levels: empty };
        let r = cone_integral(|_: &Point, _: f64| 1.0, &[0.0], &cone, &lat);
        assert!(r.truncated_empty);
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn half_space_grid_levels() {
        let hs = HalfSpaceGrid::covering(0.5, 8.0, 8).unwrap();
        assert_eq!(hs.len(), 32);
        assert!((hs.t_max() - 8.0).abs() < 1e-12);
        let nodes: Vec<f64> = hs.levels().map(|m| hs.node(m)).collect();
        assert!(nodes.windows(2).all(|w| w[1] > w[0]));
        assert!(HalfSpaceGrid::new(0.0, 8, 4).is_err());
    }
}
