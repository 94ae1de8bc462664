//! Closed-form anchors of the quadrature layer.

use std::f64::consts::{LN_2, PI, SQRT_2};

use isq_core::grid::{cone_integral, convolve_at, BoxDomain, ConeSpec, GridFunction, HalfSpaceGrid, Lattice, Point};
use isq_core::sqfn::PoissonExtension;
use isq_core::weights::{weak_lp_quasinorm, Weight};

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::report::ReportRow;
use crate::suite::{lp_suite, Profile};

/// Relative tolerance of the cone and convolution anchors.
pub const QUADRATURE_TOL: f64 = 0.005;
/// Absolute tolerance of the Poisson anchor.
pub const POISSON_TOL: f64 = 1e-4;
/// Relative tolerance of the weak-norm anchor.
pub const WEAK_TOL: f64 = 0.02;
/// Absolute tolerance between analytic and finite-difference gradients.
pub const GRADIENT_TOL: f64 = 1e-4;

const EXPERIMENT: &str = "anchors";

/// `∬_{Γ(x), 1 <= t <= 2} dy dt / t^2 = 2 ln 2` on a lattice of spacing `h`.
pub fn cone_anchor(h: f64, per_octave: usize) -> Result<f64> {
    let lat = Lattice { n: 1, origin: [0.0, 0.0], h };
    let cone = ConeSpec::new(1.0, HalfSpaceGrid::covering(1.0, 2.0, per_octave)?)?;
    Ok(cone_integral(|_: &Point, _: f64| 1.0, &[0.3], &cone, &lat).value)
}

fn sine(u: &[f64]) -> f64 {
    if u[0].abs() <= 1.0 {
        (PI * u[0]).sin() / PI
    } else {
        0.0
    }
}

fn indicator(h: f64) -> Result<GridFunction> {
    Ok(GridFunction::make_grid(1, &BoxDomain::new(&[-2.0], &[4.0]), h, |x| if (0.0..1.0).contains(&x[0]) { 1.0 } else { 0.0 })?)
}

/// `χ_[0,1) * (sin(π·)/π)(0) = -2/π²`.
pub fn convolution_anchor(h: f64) -> Result<f64> {
    Ok(convolve_at(&indicator(h)?, &sine, 1.0, &[0.0])?)
}

/// Poisson extension of `χ_[0,1)` at `(0.5, 0.5)`, exactly `1/2`.
pub fn poisson_anchor(h: f64) -> Result<f64> {
    Ok(PoissonExtension::new(&indicator(h)?).value(&[0.5], 0.5))
}

/// `‖|x|^{-1/2}‖_{WL^2}` on `[-4, 4)`, tending to `√2`.
pub fn weak_anchor(h: f64) -> Result<f64> {
    let f = GridFunction::make_grid(1, &BoxDomain::centered(1, 4.0), h, |x| if x[0] == 0.0 { 0.0 } else { x[0].abs().powf(-0.5) })?;
    Ok(weak_lp_quasinorm(&f, &Weight::constant(1, 1.0)?, 2.0)?)
}

pub fn run_anchors(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    let cone = cone_anchor(1.0 / 64.0, 8)?;
    rows.push(ReportRow::relative(EXPERIMENT, "cone integral F=1 beta=1 t in [1,2]", cone, 2.0 * LN_2, QUADRATURE_TOL));
    let exact = -2.0 / (PI * PI);
    let conv = convolution_anchor(1.0 / 512.0)?;
    rows.push(ReportRow::absolute(EXPERIMENT, "indicator * sine at y=0 t=1", conv, exact, QUADRATURE_TOL * exact.abs()));
    rows.push(ReportRow::absolute(EXPERIMENT, "poisson u(0.5,0.5) of indicator", poisson_anchor(1.0 / 8.0)?, 0.5, POISSON_TOL));
    for k in [6, 8, 10] {
        let h = (-(k as f64)).exp2();
        rows.push(ReportRow::relative(EXPERIMENT, &format!("weak L2 norm of |x|^-1/2 h=2^-{k}"), weak_anchor(h)?, SQRT_2, WEAK_TOL));
    }
    let template = GridFunction::make_grid(1, &BoxDomain::centered(1, 4.0), 1.0 / 16.0, |_| 0.0)?;
    for input in lp_suite(cfg.seed) {
        if !matches!(input.profile, Profile::Bump { .. } | Profile::Gaussian { .. } | Profile::Packet { .. }) {
            continue;
        }
        let ext = PoissonExtension::new(&input.realize(&template, 0)?);
        for (y, t) in [(0.25, 0.3), (-1.0, 0.8), (2.5, 1.5)] {
            let a = ext.gradient(&[y, 0.0], t);
            let b = ext.gradient_fd(&[y, 0.0], t, 1e-4);
            let (na, nb) = (a.iter().map(|v| v * v).sum::<f64>().sqrt(), b.iter().map(|v| v * v).sum::<f64>().sqrt());
            rows.push(ReportRow::absolute(EXPERIMENT, &format!("{} | grad u analytic vs fd at ({y},{t})", input.id), na, nb, GRADIENT_TOL));
        }
    }
    Ok(rows)
}
