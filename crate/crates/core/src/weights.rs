//! Power-law weights, Muckenhoupt characteristics over finite cube
//! families, and weighted norms of grid functions.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::grid::{check_dim, dist, pad, GridFunction, Point};

/// One factor `|x - center|^gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFactor {
    pub center: Point,
    pub gamma: f64,
}

/// `scale * Π_i |x - c_i|^{γ_i}` on `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Weight {
    n: usize,
    scale: f64,
    factors: Vec<PowerFactor>,
}

impl Weight {
    pub fn constant(n: usize, c: f64) -> Result<Self> {
        Self::product(n, c, Vec::new())
    }

    pub fn power(n: usize, center: &[f64], gamma: f64) -> Result<Self> {
        Self::product(n, 1.0, vec![PowerFactor { center: pad(center), gamma }])
    }

    /// A product of powers with distinct centers, each locally integrable.
    pub fn product(n: usize, scale: f64, factors: Vec<PowerFactor>) -> Result<Self> {
        check_dim(n)?;
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Config(format!("weight scale must be positive, got {scale}")));
        }
        for (i, f) in factors.iter().enumerate() {
            if !f.gamma.is_finite() || f.gamma <= -(n as f64) {
                return Err(Error::Config(format!(
                    "exponent {} is not locally integrable in dimension {n}",
                    f.gamma
                )));
            }
            if factors[..i].iter().any(|g| g.center == f.center) {
                return Err(Error::Config("power factors must have distinct centers".into()));
            }
        }
        let factors = factors.into_iter().filter(|f| f.gamma != 0.0).collect();
        Ok(Self { n, scale, factors })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn factors(&self) -> &[PowerFactor] {
        &self.factors
    }

    pub fn is_constant(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let x = pad(x);
        self.factors
            .iter()
            .fold(self.scale, |acc, f| acc * dist(self.n, &x, &f.center).powf(f.gamma))
    }

    /// `w^{-1/(p-1)}`; may fail to be locally integrable.
    pub fn dual(&self, p: f64) -> Self {
        let s = 1.0 / (p - 1.0);
        Self {
            n: self.n,
            scale: self.scale.powf(-s),
            factors: self.factors.iter().map(|f| PowerFactor { center: f.center, gamma: -f.gamma * s }).collect(),
        }
    }

    pub fn translated(&self, shift: &[f64]) -> Self {
        let s = pad(shift);
        Self {
            factors: self
                .factors
                .iter()
                .map(|f| PowerFactor { center: [f.center[0] + s[0], f.center[1] + s[1]], gamma: f.gamma })
                .collect(),
            ..self.clone()
        }
    }

    /// Centers whose factor is not integrable near the center.
    fn singular_centers(&self) -> impl Iterator<Item = &Point> {
        let n = self.n as f64;
        self.factors.iter().filter(move |f| f.gamma <= -n).map(|f| &f.center)
    }

    /// `w(R)` for the axis-aligned box `[lo, hi]`; `+∞` if not integrable.
    pub fn rect_measure(&self, lo: &Point, hi: &Point) -> f64 {
        let n = self.n;
        let vol: f64 = (0..n).map(|a| hi[a] - lo[a]).product();
        if vol <= 0.0 {
            return 0.0;
        }
        if self.singular_centers().any(|c| (0..n).all(|a| lo[a] <= c[a] && c[a] <= hi[a])) {
            return f64::INFINITY;
        }
        match self.factors.as_slice() {
            [] => self.scale * vol,
            [f] if n == 1 => self.scale * power_interval(lo[0] - f.center[0], hi[0] - f.center[0], f.gamma),
            [f] => self.scale * power_rect(f, lo, hi),
            _ => self.quadrature(lo, hi),
        }
    }

    pub fn measure(&self, q: &Cube) -> f64 {
        let (lo, hi) = q.bounds(self.n);
        self.rect_measure(&lo, &hi)
    }

    fn quadrature(&self, lo: &Point, hi: &Point) -> f64 {
        let splits = |a: usize| {
            let mut s = vec![lo[a]];
            let mut cs: Vec<f64> = self.factors.iter().map(|f| f.center[a]).filter(|c| *c > lo[a] && *c < hi[a]).collect();
            cs.sort_by(f64::total_cmp);
            s.extend(cs);
            s.push(hi[a]);
            s
        };
        let s0 = splits(0);
        if self.n == 1 {
            return integrate_pieces(&s0, |x| self.eval(&[x]));
        }
        let s1 = splits(1);
        integrate_pieces(&s0, |x| integrate_pieces(&s1, |y| self.eval(&[x, y])))
    }

    /// Weighted measure of every cell of `g`'s grid.
    pub fn cell_measures(&self, g: &GridFunction) -> Result<Vec<f64>> {
        if g.dim() != self.n {
            return Err(Error::Config("weight and grid dimensions differ".into()));
        }
        let h = g.h();
        Ok((0..g.len())
            .map(|i| {
                let lo = g.node(i);
                let hi = [lo[0] + h, if self.n == 2 { lo[1] + h } else { 0.0 }];
                self.rect_measure(&lo, &hi)
            })
            .collect())
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.factors.is_empty() || self.scale != 1.0 {
            parts.push(format!("const c={}", self.scale));
        }
        for f in &self.factors {
            let c = if self.n == 1 { format!("{}", f.center[0]) } else { format!("{},{}", f.center[0], f.center[1]) };
            parts.push(format!("power center={c} gamma={}", f.gamma));
        }
        write!(fm, "{}", parts.join("; "))
    }
}

/// Parses `const c=1`, `power center=0 gamma=0.5` and `;`-joined products.
/// The dimension is taken from the number of center coordinates (default 1).
pub fn parse_weight(text: &str, n: usize) -> Result<Weight> {
    let mut scale = 1.0;
    let mut factors = Vec::new();
    for part in text.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let mut words = part.split_whitespace();
        let kind = words.next().unwrap_or_default();
        let mut kv = std::collections::HashMap::new();
        for w in words {
            let (k, v) = w.split_once('=').ok_or_else(|| Error::Parse(format!("expected key=value, got `{w}`")))?;
            kv.insert(k, v);
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("bad number `{s}`: {e}")));
        match kind {
            "const" => {
                let c = kv.get("c").ok_or_else(|| Error::Parse("const weight needs c=".into()))?;
                scale *= num(c)?;
            }
            "power" => {
                let c = kv.get("center").copied().unwrap_or("0");
                let coords = c.split(',').map(num).collect::<Result<Vec<_>>>()?;
                if coords.len() != 1 && coords.len() != n {
                    return Err(Error::Parse(format!("center `{c}` does not have {n} coordinates")));
                }
                let center = if coords.len() == 1 { [coords[0], if n == 2 { coords[0] } else { 0.0 }] } else { pad(&coords) };
                let g = kv.get("gamma").ok_or_else(|| Error::Parse("power weight needs gamma=".into()))?;
                factors.push(PowerFactor { center, gamma: num(g)? });
            }
            other => return Err(Error::Parse(format!("unknown weight kind `{other}`"))),
        }
    }
    Weight::product(n, scale, factors)
}

impl FromStr for Weight {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_weight(s, 1)
    }
}

/// `∫_a^b |x|^g dx` with care for far intervals.
fn power_interval(a: f64, b: f64, g: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let e = g + 1.0;
    if a < 0.0 && b > 0.0 {
        if e <= 0.0 {
            return f64::INFINITY;
        }
        return ((-a).powf(e) + b.powf(e)) / e;
    }
    let (lo, hi) = if b <= 0.0 { (-b, -a) } else { (a, b) };
    if lo == 0.0 {
        if e <= 0.0 {
            return f64::INFINITY;
        }
        return hi.powf(e) / e;
    }
    let l = ((hi - lo) / lo).ln_1p();
    if e == 0.0 {
        l
    } else {
        lo.powf(e) * (e * l).exp_m1() / e
    }
}

/// `∫_0^X ∫_0^Y |(s,u)|^g du ds` for `X, Y >= 0`, `g > -2`.
fn corner(x: f64, y: f64, g: f64) -> f64 {
    if x <= 0.0 || y <= 0.0 {
        return 0.0;
    }
    let e = g + 2.0;
    let sec = |th: f64| th.cos().powf(-e);
    let th = y.atan2(x);
    let a = integrate_pieces(&[0.0, th], sec);
    let b = integrate_pieces(&[0.0, std::f64::consts::FRAC_PI_2 - th], sec);
    (x.powf(e) * a + y.powf(e) * b) / e
}

fn signed_corner(x: f64, y: f64, g: f64) -> f64 {
    x.signum() * y.signum() * corner(x.abs(), y.abs(), g)
}

fn power_rect(f: &PowerFactor, lo: &Point, hi: &Point) -> f64 {
    let (a0, b0) = (lo[0] - f.center[0], hi[0] - f.center[0]);
    let (a1, b1) = (lo[1] - f.center[1], hi[1] - f.center[1]);
    let side = (b0 - a0).max(b1 - a1);
    let gap0 = if a0 > 0.0 { a0 } else if b0 < 0.0 { -b0 } else { 0.0 };
    let gap1 = if a1 > 0.0 { a1 } else if b1 < 0.0 { -b1 } else { 0.0 };
    let gap = gap0.hypot(gap1);
    if gap >= 2.0 * side {
        // smooth on the box
        let (xs, ws) = gauss_legendre();
        let mut s = 0.0;
        for (xi, wi) in xs.iter().zip(ws) {
            let x = 0.5 * (a0 + b0) + 0.5 * (b0 - a0) * xi;
            for (yj, wj) in xs.iter().zip(ws) {
                let y = 0.5 * (a1 + b1) + 0.5 * (b1 - a1) * yj;
                s += wi * wj * x.hypot(y).powf(f.gamma);
            }
        }
        return s * 0.25 * (b0 - a0) * (b1 - a1);
    }
    if f.gamma <= -2.0 {
        let w = Weight { n: 2, scale: 1.0, factors: vec![*f] };
        return w.quadrature(lo, hi);
    }
    let g = f.gamma;
    signed_corner(b0, b1, g) - signed_corner(a0, b1, g) - signed_corner(b0, a1, g) + signed_corner(a0, a1, g)
}

/// Double-exponential quadrature over consecutive pieces of a partition.
fn integrate_pieces<F: Fn(f64) -> f64>(cuts: &[f64], f: F) -> f64 {
    cuts.windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| quadrature::integrate(&f, w[0], w[1], 1e-15 * (w[1] - w[0]).max(1e-300)).integral)
        .sum()
}

/// 12-point Gauss-Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre() -> (&'static [f64], &'static [f64]) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let (x, w) = RULE.get_or_init(|| {
        let n = 12;
        let mut xs = Vec::with_capacity(n);
        let mut ws = Vec::with_capacity(n);
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            xs.push(x);
            ws.push(2.0 / ((1.0 - x * x) * dp * dp));
        }
        (xs, ws)
    });
    (x, w)
}

/// The cube `Q(x0, r)`: center `x0`, side `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cube {
    pub center: Point,
    pub side: f64,
}

impl Cube {
    pub fn new(center: &[f64], side: f64) -> Result<Self> {
        if !(side > 0.0) || !side.is_finite() {
            return Err(Error::Config(format!("cube side must be positive, got {side}")));
        }
        Ok(Self { center: pad(center), side })
    }

    /// `λQ`: same center, side `λ r`.
    pub fn dilate(&self, lambda: f64) -> Self {
        Self { center: self.center, side: self.side * lambda }
    }

    pub fn bounds(&self, n: usize) -> (Point, Point) {
        let h = 0.5 * self.side;
        let mut lo = [0.0; 2];
        let mut hi = [0.0; 2];
        for a in 0..n {
            lo[a] = self.center[a] - h;
            hi[a] = self.center[a] + h;
        }
        (lo, hi)
    }

    pub fn volume(&self, n: usize) -> f64 {
        self.side.powi(n as i32)
    }

    /// Closed-cube membership.
    pub fn contains(&self, n: usize, x: &[f64]) -> bool {
        let x = pad(x);
        (0..n).all(|a| (x[a] - self.center[a]).abs() <= 0.5 * self.side)
    }
}

/// Dyadic subcubes of a root cube down to depth `D`, with half-step
/// translates: `(2^{d+1} - 1)^n` cubes of side `root / 2^d` at depth `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubeFamily {
    pub n: usize,
    pub root: Cube,
    pub depth: u32,
}

impl CubeFamily {
    pub fn new(n: usize, root: Cube, depth: u32) -> Result<Self> {
        check_dim(n)?;
        if depth > 20 {
            return Err(Error::Config(format!("family depth {depth} is too large")));
        }
        Ok(Self { n, root, depth })
    }

    pub fn with_depth(&self, depth: u32) -> Self {
        Self { depth, ..*self }
    }

    pub fn translated(&self, shift: &[f64]) -> Self {
        let s = pad(shift);
        let mut root = self.root;
        root.center = [root.center[0] + s[0], root.center[1] + s[1]];
        Self { root, ..*self }
    }

    pub fn len(&self) -> usize {
        (0..=self.depth).map(|d| ((1usize << (d + 1)) - 1).pow(self.n as u32)).sum()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cubes of a single depth.
    pub fn level(&self, d: u32) -> impl Iterator<Item = Cube> + '_ {
        let per = (1usize << (d + 1)) - 1;
        let s = self.root.side / (1u64 << d) as f64;
        let (lo, _) = self.root.bounds(self.n);
        let count = per.pow(self.n as u32);
        (0..count).map(move |i| {
            let k0 = i % per;
            let k1 = i / per;
            let mut c = [lo[0] + (k0 as f64 + 1.0) * 0.5 * s, 0.0];
            if self.n == 2 {
                c[1] = lo[1] + (k1 as f64 + 1.0) * 0.5 * s;
            }
            Cube { center: c, side: s }
        })
    }

    pub fn cubes(&self) -> impl Iterator<Item = Cube> + '_ {
        (0..=self.depth).flat_map(move |d| self.level(d))
    }

    /// Side of the smallest cubes.
    pub fn min_side(&self) -> f64 {
        self.root.side / (1u64 << self.depth) as f64
    }
}

fn ap_on_cube(w: &Weight, dual: &Weight, p: f64, q: &Cube) -> f64 {
    let vol = q.volume(w.n);
    let a = w.measure(q) / vol;
    let b = dual.measure(q) / vol;
    if !b.is_finite() {
        return f64::INFINITY;
    }
    a * b.powf(p - 1.0)
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::Config(format!("A_p needs p > 1, got {p}")));
    }
    Ok(())
}

/// `max_Q (avg_Q w)(avg_Q w^{-1/(p-1)})^{p-1}` over the family; `+∞` when
/// the dual weight is not integrable on some cube.
pub fn ap_constant(w: &Weight, p: f64, fam: &CubeFamily) -> Result<f64> {
    check_p(p)?;
    if fam.n != w.n {
        return Err(Error::Config("weight and family dimensions differ".into()));
    }
    let dual = w.dual(p);
    let mut best = 0.0f64;
    for q in fam.cubes() {
        let v = ap_on_cube(w, &dual, p, &q);
        if v.is_infinite() {
            return Ok(f64::INFINITY);
        }
        best = best.max(v);
    }
    Ok(best)
}

/// Like [`ap_constant`], but with the dual weight integrated only outside
/// the ball of radius `fam.min_side()` around each non-integrable center.
/// Finite for every family; grows with the depth exactly when the dual
/// weight fails to be locally integrable.
pub fn ap_constant_truncated(w: &Weight, p: f64, fam: &CubeFamily) -> Result<f64> {
    check_p(p)?;
    if fam.n != w.n {
        return Err(Error::Config("weight and family dimensions differ".into()));
    }
    let dual = w.dual(p);
    let singular: Vec<Point> = dual.singular_centers().copied().collect();
    if singular.is_empty() {
        return ap_constant(w, p, fam);
    }
    let rho = fam.min_side();
    let n = w.n;
    let mut best = 0.0f64;
    for q in fam.cubes() {
        let (lo, hi) = q.bounds(n);
        let mut pieces = vec![(lo, hi)];
        for c in &singular {
            let mut next = Vec::new();
            for (l, h) in pieces {
                next.extend(subtract_box(n, &l, &h, c, rho));
            }
            pieces = next;
        }
        let vol = q.volume(n);
        let a = w.measure(&q) / vol;
        let b: f64 = pieces.iter().map(|(l, h)| dual.rect_measure(l, h)).sum::<f64>() / vol;
        best = best.max(a * b.powf(p - 1.0));
    }
    Ok(best)
}

/// `[lo, hi]` minus the open box of half-width `rho` around `c`, as disjoint boxes.
fn subtract_box(n: usize, lo: &Point, hi: &Point, c: &Point, rho: f64) -> Vec<(Point, Point)> {
    let cl = [c[0] - rho, c[1] - rho];
    let ch = [c[0] + rho, c[1] + rho];
    if (0..n).any(|a| ch[a] <= lo[a] || cl[a] >= hi[a]) {
        return vec![(*lo, *hi)];
    }
    let mut out = Vec::new();
    let mut rest = (*lo, *hi);
    for a in 0..n {
        let (l, h) = rest;
        if cl[a] > l[a] {
            let mut h2 = h;
            h2[a] = cl[a];
            out.push((l, h2));
        }
        if ch[a] < h[a] {
            let mut l2 = l;
            l2[a] = ch[a];
            out.push((l2, h));
        }
        let mut l3 = l;
        let mut h3 = h;
        l3[a] = l[a].max(cl[a]);
        h3[a] = h[a].min(ch[a]);
        rest = (l3, h3);
    }
    out
}

/// Essential infimum of `w` over a closed cube.
fn ess_inf(w: &Weight, q: &Cube) -> f64 {
    let n = w.n;
    let (lo, hi) = q.bounds(n);
    let nearest = |c: &Point| {
        let mut p = [0.0; 2];
        for a in 0..n {
            p[a] = c[a].clamp(lo[a], hi[a]);
        }
        dist(n, &p, c)
    };
    let farthest = |c: &Point| {
        let mut p = [0.0; 2];
        for a in 0..n {
            p[a] = if (c[a] - lo[a]).abs() > (c[a] - hi[a]).abs() { lo[a] } else { hi[a] };
        }
        dist(n, &p, c)
    };
    match w.factors.as_slice() {
        [] => w.scale,
        [f] => {
            let d = if f.gamma > 0.0 { nearest(&f.center) } else { farthest(&f.center) };
            w.scale * d.powf(f.gamma)
        }
        fs => {
            if fs.iter().any(|f| f.gamma > 0.0 && q.contains(n, &f.center[..n])) {
                return 0.0;
            }
            // sampled minimum over a fine lattice of the closed cube
            let k = 64;
            let mut best = f64::INFINITY;
            let count = if n == 1 { k + 1 } else { (k + 1) * (k + 1) };
            for i in 0..count {
                let s0 = (i % (k + 1)) as f64 / k as f64;
                let s1 = (i / (k + 1)) as f64 / k as f64;
                let x = [lo[0] + s0 * q.side, if n == 2 { lo[1] + s1 * q.side } else { 0.0 }];
                best = best.min(w.eval(&x[..n]));
            }
            best
        }
    }
}

/// `max_Q (avg_Q w) / ess inf_Q w`; `+∞` if `w` vanishes on a closed cube.
pub fn a1_constant(w: &Weight, fam: &CubeFamily) -> Result<f64> {
    if fam.n != w.n {
        return Err(Error::Config("weight and family dimensions differ".into()));
    }
    let mut best = 0.0f64;
    for q in fam.cubes() {
        let m = ess_inf(w, &q);
        if m <= 0.0 {
            return Ok(f64::INFINITY);
        }
        best = best.max(w.measure(&q) / q.volume(w.n) / m);
    }
    Ok(best)
}

/// `(∫ |f|^p w)^{1/p}` with `|f|` constant on cells.
pub fn lp_norm(f: &GridFunction, w: &Weight, p: f64) -> Result<f64> {
    lp_norm_with(f.values(), &w.cell_measures(f)?, p)
}

pub fn lp_norm_with(values: &[f64], measures: &[f64], p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::Config(format!("p must be positive, got {p}")));
    }
    let s: f64 = values.iter().zip(measures).filter(|(v, _)| **v != 0.0).map(|(v, m)| v.abs().powf(p) * m).sum();
    Ok(s.powf(1.0 / p))
}

/// `sup_λ λ w({|f| > λ})^{1/p}`, exact for piecewise-constant data.
pub fn weak_lp_quasinorm(f: &GridFunction, w: &Weight, p: f64) -> Result<f64> {
    weak_lp_with(f.values(), &w.cell_measures(f)?, p)
}

pub fn weak_lp_with(values: &[f64], measures: &[f64], p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::Config(format!("p must be positive, got {p}")));
    }
    let mut cells: Vec<(f64, f64)> =
        values.iter().zip(measures).filter(|(v, _)| **v != 0.0).map(|(v, m)| (v.abs(), *m)).collect();
    cells.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = 0.0f64;
    let mut acc = 0.0;
    let mut i = 0;
    while i < cells.len() {
        let v = cells[i].0;
        while i < cells.len() && cells[i].0 == v {
            acc += cells[i].1;
            i += 1;
        }
        best = best.max(v * acc.powf(1.0 / p));
    }
    Ok(best)
}

/// Result of [`doubling_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoublingReport {
    /// `w(λQ) / w(Q)`
    pub ratio: f64,
    /// `λ^{nq}`
    pub bound: f64,
    pub constant: f64,
    pub pass: bool,
}

/// Module constant for [`doubling_check`].
pub const DOUBLING_CONSTANT: f64 = 4.0;

pub fn doubling_check(w: &Weight, q: f64, cube: &Cube, lambda: f64) -> Result<DoublingReport> {
    if !(q >= 1.0) || !(lambda > 1.0) {
        return Err(Error::Config(format!("doubling check needs q >= 1 and λ > 1, got q={q}, λ={lambda}")));
    }
    let ratio = w.measure(&cube.dilate(lambda)) / w.measure(cube);
    let bound = lambda.powf(w.n as f64 * q);
    Ok(DoublingReport { ratio, bound, constant: DOUBLING_CONSTANT, pass: ratio <= DOUBLING_CONSTANT * bound })
}

/// Result of [`tail_integral_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailReport {
    /// `∫_{|x| >= r} w(x) |x|^{-nq} dx`
    pub lhs: f64,
    /// `r^{-nq} w(Q(0, 2r))`
    pub rhs: f64,
    pub ratio: f64,
}

pub fn tail_integral_check(w: &Weight, q: f64, r: f64) -> Result<TailReport> {
    if !(q > 1.0) || !(r > 0.0) {
        return Err(Error::Config(format!("tail check needs q > 1 and r > 0, got q={q}, r={r}")));
    }
    let n = w.n;
    let nq = n as f64 * q;
    let total_gamma: f64 = w.factors.iter().map(|f| f.gamma).sum();
    // radial decay exponent of w |x|^{-nq} |x|^{n-1}
    let e = total_gamma - nq + n as f64;
    let sphere = if n == 1 { 2.0 } else { 2.0 * std::f64::consts::PI };
    let lhs = if e >= 0.0 {
        f64::INFINITY
    } else if w.factors.iter().all(|f| f.center == [0.0, 0.0]) {
        w.scale * sphere * r.powf(e) / -e
    } else {
        let big = r * 4096.0;
        let tail = w.scale * sphere * big.powf(e) / -e;
        let body = if n == 1 {
            let g = |x: f64| w.eval(&[x]) * x.abs().powf(-nq);
            let mut cuts: Vec<f64> = w.factors.iter().map(|f| f.center[0].abs()).filter(|c| *c > r && *c < big).collect();
            cuts.push(r);
            cuts.push(big);
            cuts.sort_by(f64::total_cmp);
            let neg: Vec<f64> = cuts.iter().rev().map(|c| -c).collect();
            integrate_pieces(&cuts, g) + integrate_pieces(&neg, g)
        } else {
            let mut radii: Vec<f64> = w.factors.iter().map(|f| f.center[0].hypot(f.center[1])).filter(|c| *c > r && *c < big).collect();
            radii.push(r);
            radii.push(big);
            radii.sort_by(f64::total_cmp);
            let mut angles: Vec<f64> = w.factors.iter().map(|f| f.center[1].atan2(f.center[0]).rem_euclid(std::f64::consts::TAU)).collect();
            angles.push(0.0);
            angles.push(std::f64::consts::TAU);
            angles.sort_by(f64::total_cmp);
            integrate_pieces(&radii, |rho| {
                rho.powf(1.0 - nq) * integrate_pieces(&angles, |th| w.eval(&[rho * th.cos(), rho * th.sin()]))
            })
        };
        body + tail
    };
    let rhs = r.powf(-nq) * w.measure(&Cube { center: [0.0, 0.0], side: 2.0 * r });
    Ok(TailReport { lhs, rhs, ratio: lhs / rhs })
}

/// Depths and threshold used by [`critical_index_estimate`].
pub const CRITICAL_GROWTH: f64 = 1.5;

/// Whether `ap_constant` stays finite and grows by at most
/// [`CRITICAL_GROWTH`] from depth `D` to `D + 4`.
pub fn ap_bounded(w: &Weight, p: f64, fam: &CubeFamily) -> Result<bool> {
    let d = fam.depth;
    let a = ap_constant(w, p, &fam.with_depth(d))?;
    let b = ap_constant(w, p, &fam.with_depth(d + 2))?;
    let c = ap_constant(w, p, &fam.with_depth(d + 4))?;
    Ok(a.is_finite() && b.is_finite() && c.is_finite() && c <= CRITICAL_GROWTH * a)
}

/// Bisection estimate of `inf{q > 1 : w ∈ A_q}` to within 0.01, judged by
/// boundedness of `ap_constant` at depths `D, D+2, D+4`. `+∞` if no `q <= 16`
/// qualifies.
pub fn critical_index_estimate(w: &Weight, fam: &CubeFamily) -> Result<f64> {
    let (mut lo, mut hi) = (1.0, 16.0);
    if !ap_bounded(w, hi, fam)? {
        return Ok(f64::INFINITY);
    }
    while hi - lo > 0.01 {
        let mid = 0.5 * (lo + hi);
        if ap_bounded(w, mid, fam)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
