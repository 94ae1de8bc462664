//! Convergence certification: headline numbers re-run at `(h/2, 2L, 2 t_max)`.

use std::f64::consts::LN_2;

use isq_core::weights::Weight;

use super::anchors::{cone_anchor, poisson_anchor, weak_anchor, POISSON_TOL, QUADRATURE_TOL, WEAK_TOL};
use super::decay::{lemma31_slope, DRIFT_TOL};
use super::theorems::STABILITY_TOL;
use crate::config::{ExperimentConfig, ExperimentId};
use crate::error::Result;
use crate::report::ReportRow;
use crate::session::{Functional, Session};
use crate::suite::hardy_suite;

const EXPERIMENT: &str = "cert";

/// `cfg` with halved spacing, doubled levels per octave and doubled window.
pub fn refined(cfg: &ExperimentConfig) -> ExperimentConfig {
    let mut r = cfg.clone();
    r.h = cfg.h / 2.0;
    r.t_min = cfg.t_min.map(|t| t / 2.0);
    r.per_octave = 2 * cfg.per_octave;
    r.t_max = 2.0 * cfg.t_max;
    r
}

fn drift(a: f64, b: f64) -> f64 {
    (b - a).abs() / a.abs()
}

/// Weak-type ratio of `𝒮_1` for the single atom with `w = 1`, `p = 1`.
fn single_atom_ratio(cfg: &ExperimentConfig) -> Result<f64> {
    let mut s = Session::new(cfg)?;
    let input = &hardy_suite()[0];
    let sampled = s.sample(input, 1.0, 0, 0, Functional::Area(1.0))?;
    let w = Weight::constant(1, 1.0)?;
    let meas = s.measures(&w, 0)?;
    let lhs = isq_core::weights::weak_lp_with(sampled.values(), &meas, 1.0)?;
    Ok(lhs / input.hardy_c(1.0, 1.0, &w, 0)?)
}

pub fn run_convergence_cert(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let (c0, c1) = (cone_anchor(1.0 / 64.0, 8)?, cone_anchor(1.0 / 128.0, 16)?);
    rows.push(ReportRow::at_most(EXPERIMENT, "cone integral 2 ln 2 drift", drift(c0, c1), 0.0, QUADRATURE_TOL));
    rows.push(ReportRow::relative(EXPERIMENT, "cone integral 2 ln 2 refined", c1, 2.0 * LN_2, QUADRATURE_TOL));
    let (p0, p1) = (poisson_anchor(1.0 / 8.0)?, poisson_anchor(1.0 / 16.0)?);
    rows.push(ReportRow::at_most(EXPERIMENT, "poisson u(0.5,0.5) drift", (p1 - p0).abs(), 0.0, POISSON_TOL));
    let (w0, w1) = (weak_anchor(1.0 / 256.0)?, weak_anchor(1.0 / 512.0)?);
    rows.push(ReportRow::at_most(EXPERIMENT, "weak L2 norm of |x|^-1/2 drift", drift(w0, w1), 0.0, WEAK_TOL));

    let decay = ExperimentConfig { experiment: ExperimentId::Lemma31, ..cfg.clone() };
    decay.validate()?;
    let fine = refined(&decay);
    for &alpha in &cfg.alphas {
        let (s0, s1) = (lemma31_slope(&decay, 0, alpha)?, lemma31_slope(&fine, 0, alpha)?);
        rows.push(ReportRow::absolute(EXPERIMENT, &format!("lemma-3.1 slope drift a={alpha}"), s1, s0, DRIFT_TOL));
    }

    let theorem = ExperimentConfig { seed: cfg.seed, ..ExperimentConfig::default_for(ExperimentId::Theorem11) };
    let (r0, r1) = (single_atom_ratio(&theorem)?, single_atom_ratio(&refined(&theorem))?);
    rows.push(ReportRow::relative(EXPERIMENT, "theorem-1.1 single atom ratio w=1 p=1 a=1", r1, r0, STABILITY_TOL));
    Ok(rows)
}
