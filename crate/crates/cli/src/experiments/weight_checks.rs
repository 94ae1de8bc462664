//! Muckenhoupt constants, doubling and tail estimates.

use isq_core::weights::{ap_constant, ap_constant_truncated, critical_index_estimate, doubling_check, tail_integral_check, Cube, CubeFamily, Weight};

use crate::config::{standard_weights, ExperimentConfig};
use crate::error::Result;
use crate::report::ReportRow;

/// Tolerance of `[1]_{A_p} = 1`.
pub const UNIT_TOL: f64 = 1e-12;
/// Relative tolerance of `[|x|^{1/2}]_{A_2} = 4/3`.
pub const SQRT_TOL: f64 = 0.01;
/// Smallest growth factor that flags divergence.
pub const DIVERGENCE_FACTOR: f64 = 1.5;
/// Tolerance of the critical index.
pub const INDEX_TOL: f64 = 0.05;
/// Relative spread allowed in the tail ratio.
pub const TAIL_TOL: f64 = 0.05;
/// Exponent of the doubling and tail checks.
pub const Q: f64 = 2.0;

const EXPERIMENT: &str = "weights";

fn family(depth: u32) -> Result<CubeFamily> {
    Ok(CubeFamily::new(1, Cube::new(&[0.0], 4.0)?, depth)?)
}

pub fn run_weights(_cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    let fam8 = family(8)?;
    let one = Weight::constant(1, 1.0)?;
    for p in [1.5, 2.0, 3.0] {
        rows.push(ReportRow::absolute(EXPERIMENT, &format!("ap_constant(1, p={p})"), ap_constant(&one, p, &fam8)?, 1.0, UNIT_TOL));
    }
    let sqrt_w = Weight::power(1, &[0.0], 0.5)?;
    rows.push(ReportRow::relative(EXPERIMENT, "ap_constant(|x|^1/2, p=2) D=8", ap_constant(&sqrt_w, 2.0, &fam8)?, 4.0 / 3.0, SQRT_TOL));

    let p = 2.0;
    let gamma = (p - 1.0) + 0.25;
    let bad = Weight::power(1, &[0.0], gamma)?;
    let values: Vec<f64> = (6..=10).map(|d| ap_constant_truncated(&bad, p, &family(d)?).map_err(Into::into)).collect::<Result<_>>()?;
    let monotone = values.windows(2).all(|w| w[1] > w[0]) && values.iter().all(|v| v.is_finite());
    let factor = values[values.len() - 1] / values[0];
    rows.push(ReportRow::new(
        EXPERIMENT,
        &format!("divergence of |x|^{gamma} in A_{p}, D=6..10"),
        factor,
        DIVERGENCE_FACTOR,
        0.0,
        monotone && factor > DIVERGENCE_FACTOR,
    ));
    let q = critical_index_estimate(&sqrt_w, &family(4)?)?;
    rows.push(ReportRow::absolute(EXPERIMENT, "critical index of |x|^1/2", q, 1.5, INDEX_TOL));

    let cubes = [Cube::new(&[0.0], 2.0)?, Cube::new(&[0.3], 1.5)?, Cube::new(&[8.0], 1.0)?];
    for w in standard_weights() {
        for (i, cube) in cubes.iter().enumerate() {
            for lambda in [2.0, 4.0, 8.0] {
                let r = doubling_check(&w, Q, cube, lambda)?;
                let id = format!("doubling w=[{w}] cube={i} lambda={lambda}");
                rows.push(ReportRow::new(EXPERIMENT, &id, r.ratio, r.constant * r.bound, 0.0, r.pass));
            }
        }
        let base = tail_integral_check(&w, Q, 1.0)?.ratio;
        for r in [1.0, 2.0, 4.0] {
            let t = tail_integral_check(&w, Q, r)?;
            rows.push(ReportRow::relative(EXPERIMENT, &format!("tail ratio w=[{w}] r={r} vs r=1"), t.ratio, base, TAIL_TOL));
        }
    }
    Ok(rows)
}
