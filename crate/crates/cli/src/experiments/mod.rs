//! Experiment runners. Each returns report rows; `*_in` variants share a
//! [`Session`] so that fields computed once serve several experiments.

mod anchors;
mod cert;
mod decay;
mod theorems;
mod weight_checks;

pub use anchors::run_anchors;
pub use cert::run_convergence_cert;
pub use decay::{run_lemma_31, run_lemma_42};
pub use theorems::{
    run_corollary_13, run_corollary_13_in, run_lemma_41, run_lemma_41_in, run_theorem_11, run_theorem_11_in, run_theorem_12,
    run_theorem_12_in, run_theorem_a, run_theorem_a_in,
};
pub use weight_checks::run_weights;

use isq_core::weights::{ap_bounded, Cube, CubeFamily, Weight};

use crate::config::{ExperimentConfig, ExperimentId};
use crate::error::Result;
use crate::report::ReportRow;
use crate::session::Session;

/// Root side of the cube family used by the hypothesis guards.
pub const GUARD_ROOT_SIDE: f64 = 4.0;
/// Depth of the cube family used by the hypothesis guards.
pub const GUARD_DEPTH: u32 = 6;

/// Dyadic family on which `A_q` membership is judged.
pub fn guard_family(n: usize) -> Result<CubeFamily> {
    Ok(CubeFamily::new(n, Cube::new(&vec![0.0; n], GUARD_ROOT_SIDE)?, GUARD_DEPTH)?)
}

/// Whether `w ∈ A_q` by bounded growth of the characteristic constant.
pub fn in_ap(w: &Weight, q: f64) -> Result<bool> {
    if q <= 1.0 {
        return Ok(false);
    }
    Ok(ap_bounded(w, q, &guard_family(w.dim())?)?)
}

/// Runs the experiment named by `cfg` in a fresh session.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    cfg.validate()?;
    match cfg.experiment {
        ExperimentId::Anchors => run_anchors(cfg),
        ExperimentId::Weights => run_weights(cfg),
        ExperimentId::Lemma31 => run_lemma_31(cfg),
        ExperimentId::Lemma42 => run_lemma_42(cfg),
        ExperimentId::Cert => run_convergence_cert(cfg),
        _ => run_in(&mut Session::new(cfg)?, cfg),
    }
}

/// Runs `cfg` reusing `session` when the grid parameters agree.
pub fn run_in(session: &mut Session, cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    cfg.validate()?;
    if !session.compatible(cfg) {
        return run(cfg);
    }
    match cfg.experiment {
        ExperimentId::TheoremA => run_theorem_a_in(session, cfg),
        ExperimentId::Theorem11 => run_theorem_11_in(session, cfg),
        ExperimentId::Theorem12 => run_theorem_12_in(session, cfg),
        ExperimentId::Corollary13 => run_corollary_13_in(session, cfg),
        ExperimentId::Lemma41 => run_lemma_41_in(session, cfg),
        _ => run(cfg),
    }
}

/// Label of a hypothesis tuple.
fn case_label(w: &Weight, p: f64, alpha: f64) -> String {
    format!("w=[{w}] p={p} a={alpha}")
}

/// Row recording that a hypothesis tuple was refused.
fn guard_row(experiment: &str, w: &Weight, p: f64, alpha: f64, q: f64) -> ReportRow {
    ReportRow::new(experiment, &format!("skipped: w not in A_{q} | {}", case_label(w, p, alpha)), q, f64::NAN, 0.0, true)
}
