//! Single evaluations behind the `apconst`, `norms` and `sqfn eval` commands.

use isq_core::sqfn::{GStarParams, HalfSpaceField, Reach};
use isq_core::weights::{ap_constant, ap_constant_truncated, critical_index_estimate, lp_norm, weak_lp_quasinorm, Cube, CubeFamily, Weight};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::report::ReportRow;
use crate::session::{Session, FAR};
use crate::suite::{hardy_suite, lp_suite, SuiteInput};

/// Looks up a suite input by id in both suites.
pub fn find_input(id: &str, seed: u64) -> Result<SuiteInput> {
    hardy_suite()
        .into_iter()
        .chain(lp_suite(seed))
        .find(|s| s.id == id)
        .ok_or_else(|| CliError::Config(format!("unknown input `{id}`")))
}

/// `[w]_{A_p}` on the dyadic family of `Q(0, root_side)` to `depth`, its
/// truncated variant and the critical index.
pub fn apconst(w: &Weight, p: f64, depth: u32, root_side: f64) -> Result<Vec<ReportRow>> {
    let n = w.dim();
    let fam = CubeFamily::new(n, Cube::new(&vec![0.0; n], root_side)?, depth)?;
    let label = format!("w=[{w}] p={p} D={depth}");
    let a = ap_constant(w, p, &fam)?;
    let t = ap_constant_truncated(w, p, &fam)?;
    let q = critical_index_estimate(w, &fam.with_depth(depth.min(4)))?;
    Ok(vec![
        ReportRow::finite("apconst", &label, a, 1.0),
        ReportRow::finite("apconst", &format!("truncated | {label}"), t, 1.0),
        ReportRow::new("apconst", &format!("critical index | w=[{w}]"), q, p, 0.0, q < p),
    ])
}

/// `‖f‖_{L^p_w}` and `‖f‖_{WL^p_w}` of a suite input on the grid of `cfg`.
pub fn norms(cfg: &ExperimentConfig, input: &SuiteInput, w: &Weight, p: f64) -> Result<Vec<ReportRow>> {
    let mut s = Session::new(cfg)?;
    let f = s.input(input, 0, 0)?;
    let label = format!("{} | w=[{w}] p={p}", input.id);
    Ok(vec![
        ReportRow::finite("norms", &format!("Lp | {label}"), lp_norm(&f, w, p)?, 1.0),
        ReportRow::finite("norms", &format!("weak Lp | {label}"), weak_lp_quasinorm(&f, w, p)?, 1.0),
    ])
}

/// Square function selected by `sqfn eval`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SquareFunction {
    /// `𝒮_{α,β}`.
    Area(f64),
    /// `g_α`.
    G,
    /// `g*_{λ,α}`.
    GStar(f64),
    /// Classical area integral of the Poisson extension, aperture `β`.
    Poisson(f64),
}

/// One square-function value of a suite input at `x` (snapped to the grid).
pub fn sqfn_eval(cfg: &ExperimentConfig, input: &SuiteInput, alpha: f64, x: f64, which: SquareFunction) -> Result<Vec<ReportRow>> {
    let mut s = Session::new(cfg)?;
    let f = s.input(input, 0, 0)?;
    let lat = f.lattice();
    let x = lat.point([lat.nearest(x, 0), 0])[0];
    let hs = cfg.halfspace(0)?;
    let (name, value) = match which {
        SquareFunction::Area(beta) => {
            let field = HalfSpaceField::intrinsic_refined(&f, alpha, cfg.m, cfg.refine, &hs, &Reach::point(&[x], beta, 0.0)?, None)?;
            (format!("S a={alpha} beta={beta}"), field.area(&[x], beta)?)
        }
        SquareFunction::G => {
            let field = HalfSpaceField::intrinsic_refined(&f, alpha, cfg.m, cfg.refine, &hs, &Reach::point(&[x], 1.0, 0.0)?, None)?;
            (format!("g a={alpha}"), field.vertical(&[x])?)
        }
        SquareFunction::GStar(lambda) => {
            let field = HalfSpaceField::intrinsic_refined(&f, alpha, cfg.m, cfg.refine, &hs, &Reach::point(&[x], 1.0, FAR)?, None)?;
            (format!("g* a={alpha} lambda={lambda}"), field.gstar(&[x], &GStarParams::new(lambda, FAR)?)?)
        }
        SquareFunction::Poisson(beta) => {
            let field = HalfSpaceField::poisson(&f, &hs, &Reach::point(&[x], beta, 0.0)?)?;
            (format!("poisson S beta={beta}"), field.area(&[x], beta)?)
        }
    };
    let row = ReportRow::new("sqfn", &format!("{} | {name} | x={x}", input.id), value, f64::NAN, 0.0, value.is_finite());
    Ok(vec![row])
}
