//! Norm-ratio sweeps of the strong- and weak-type estimates.

use isq_core::atoms::fit_power_law;
use isq_core::weights::{ap_bounded, lp_norm_with, weak_lp_with, Weight};

use super::{case_label, guard_family, guard_row, in_ap};
use crate::config::{ExperimentConfig, ExperimentId};
use crate::error::{CliError, Result};
use crate::report::ReportRow;
use crate::session::{Functional, Session};
use crate::suite::{hardy_suite, lp_suite, SuiteInput};

/// Resolution stability tolerance of every norm ratio.
pub const STABILITY_TOL: f64 = 0.2;
/// Tolerance of the height-rescaling invariance.
pub const RESCALE_TOL: f64 = 0.01;
/// Height shift of the rescaling check (`f -> 4f`).
pub const RESCALE_SHIFT: i32 = 2;
/// Largest allowed ratio between the ladder and the single atom.
pub const LADDER_FACTOR: f64 = 3.0;
/// Slack of the aperture growth exponent.
pub const GROWTH_SLACK: f64 = 0.3;
/// Tolerance of the annulus partition identity.
pub const PARTITION_TOL: f64 = 1e-8;
/// Largest allowed dictionary excess over the LP value.
pub const SANDWICH_TOL: f64 = 1e-8;

/// Threshold `(3n + 2α)/n` of the `g*` estimate.
pub fn gstar_threshold(n: usize, alpha: f64) -> f64 {
    (3.0 * n as f64 + 2.0 * alpha) / n as f64
}

fn ids(suite: &[SuiteInput]) -> Vec<String> {
    suite.iter().map(|s| s.id.clone()).collect()
}

fn sandwich_row(session: &Session, experiment: &str, suite: &[SuiteInput]) -> ReportRow {
    let (excess, evals) = session.sandwich_for(&ids(suite));
    ReportRow::at_most(experiment, &format!("sandwich over {evals} evaluations"), excess, 0.0, SANDWICH_TOL)
}

#[derive(Debug, Clone, Copy)]
struct Case<'a> {
    w: &'a Weight,
    p: f64,
    alpha: f64,
}

/// `(‖T f‖_{WL^p_w}, c^{1/p})` for an atomic input.
fn weak_ratio(s: &mut Session, input: &SuiteInput, case: Case, func: Functional, level: u32, shift: i32) -> Result<(f64, f64)> {
    let sampled = s.sample(input, case.alpha, level, shift, func)?;
    let meas = s.measures(case.w, level)?;
    let lhs = weak_lp_with(sampled.values(), &meas, case.p)?;
    let c = input.hardy_c(case.p, case.alpha, case.w, shift)?;
    Ok((lhs, c.powf(1.0 / case.p)))
}

/// `(‖T f‖_{L^p_w}, ‖f‖_{L^p_w})`.
fn strong_ratio(s: &mut Session, input: &SuiteInput, case: Case, func: Functional, level: u32, shift: i32) -> Result<(f64, f64)> {
    let sampled = s.sample(input, case.alpha, level, shift, func)?;
    let f = s.input(input, level, shift)?;
    let meas = s.measures(case.w, level)?;
    let lhs = lp_norm_with(sampled.values(), &meas, case.p)?;
    let rhs = lp_norm_with(f.values(), &meas, case.p)?;
    if !(rhs > 0.0) {
        return Err(CliError::Config(format!("input `{}` has zero norm", input.id)));
    }
    Ok((lhs, rhs))
}

type RatioFn = fn(&mut Session, &SuiteInput, Case, Functional, u32, i32) -> Result<(f64, f64)>;

/// Finite ratio, resolution stability and (atomic inputs) rescaling rows.
/// Returns the base ratios in suite order.
#[allow(clippy::too_many_arguments)]
fn ratio_protocol(
    s: &mut Session,
    experiment: &str,
    suite: &[SuiteInput],
    case: Case,
    func: Functional,
    ratio: RatioFn,
    tag: &str,
    rows: &mut Vec<ReportRow>,
) -> Result<Vec<f64>> {
    let label = case_label(case.w, case.p, case.alpha);
    let mut base = Vec::with_capacity(suite.len());
    for input in suite {
        let id = format!("{}{tag} | {label}", input.id);
        let (l0, r0) = ratio(s, input, case, func, 0, 0)?;
        rows.push(ReportRow::finite(experiment, &id, l0, r0));
        let (l1, r1) = ratio(s, input, case, func, 1, 0)?;
        rows.push(ReportRow::relative(experiment, &format!("{id} | h/2 vs h"), l1 / r1, l0 / r0, STABILITY_TOL));
        if input.is_atomic() {
            let (l2, r2) = ratio(s, input, case, func, 0, RESCALE_SHIFT)?;
            rows.push(ReportRow::relative(experiment, &format!("{id} | 4f vs f"), l2 / r2, l0 / r0, RESCALE_TOL));
        }
        base.push(l0 / r0);
    }
    let max = base.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    rows.push(ReportRow::finite(experiment, &format!("max ratio{tag} | {label}"), max, 1.0));
    Ok(base)
}

fn ladder_row(experiment: &str, suite: &[SuiteInput], base: &[f64], label: &str) -> Option<ReportRow> {
    let at = |id: &str| suite.iter().position(|s| s.id == id).map(|i| base[i]);
    let (ladder, single) = (at("ladder")?, at("single")?);
    let r = ladder / single;
    let pass = r.is_finite() && (1.0 / LADDER_FACTOR..=LADDER_FACTOR).contains(&r);
    Some(ReportRow::new(experiment, &format!("ladder vs single | {label}"), ladder, single, LADDER_FACTOR, pass))
}

/// Hypothesis tuples of a weak-type run; refused tuples become guard rows.
fn weak_cases<'a>(cfg: &'a ExperimentConfig, experiment: &str, rows: &mut Vec<ReportRow>) -> Result<Vec<Case<'a>>> {
    let n = cfg.dim as f64;
    let mut cases = Vec::new();
    for w in &cfg.weights {
        for &p in &cfg.ps {
            for &alpha in &cfg.alphas {
                let q = p * (1.0 + alpha / n);
                if in_ap(w, q)? {
                    cases.push(Case { w, p, alpha });
                } else {
                    rows.push(guard_row(experiment, w, p, alpha, q));
                }
            }
        }
    }
    if cases.is_empty() {
        return Err(CliError::Hypothesis("no weight lies in A_{p(1+α/n)} for the requested (p, α)".into()));
    }
    Ok(cases)
}

fn weak_type(s: &mut Session, cfg: &ExperimentConfig, func: impl Fn(f64) -> Functional) -> Result<Vec<ReportRow>> {
    let experiment = cfg.experiment.name();
    let suite = hardy_suite();
    let mut rows = Vec::new();
    for case in weak_cases(cfg, experiment, &mut rows)? {
        let base = ratio_protocol(s, experiment, &suite, case, func(case.alpha), weak_ratio, "", &mut rows)?;
        rows.extend(ladder_row(experiment, &suite, &base, &case_label(case.w, case.p, case.alpha)));
    }
    rows.push(sandwich_row(s, experiment, &suite));
    Ok(rows)
}

fn expect(cfg: &ExperimentConfig, id: ExperimentId) -> Result<()> {
    if cfg.experiment != id {
        return Err(CliError::Config(format!("expected a {id} configuration, got {}", cfg.experiment)));
    }
    cfg.validate()
}

/// Weak-type ratio of `𝒮_α` over the weak Hardy suite.
pub fn run_theorem_11(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    run_theorem_11_in(&mut Session::new(cfg)?, cfg)
}

pub fn run_theorem_11_in(s: &mut Session, cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    expect(cfg, ExperimentId::Theorem11)?;
    weak_type(s, cfg, |_| Functional::Area(1.0))
}

/// Weak-type ratio of `g_α` plus its comparability with `𝒮_α`.
pub fn run_corollary_13(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    run_corollary_13_in(&mut Session::new(cfg)?, cfg)
}

pub fn run_corollary_13_in(s: &mut Session, cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    expect(cfg, ExperimentId::Corollary13)?;
    let experiment = cfg.experiment.name();
    let mut rows = weak_type(s, cfg, |_| Functional::Vertical)?;
    let sandwich = rows.pop();
    let suite = hardy_suite();
    let mut scratch = Vec::new();
    for case in weak_cases(cfg, experiment, &mut scratch)? {
        let label = case_label(case.w, case.p, case.alpha);
        let mut comp = [Vec::new(), Vec::new()];
        for (level, out) in comp.iter_mut().enumerate() {
            for input in &suite {
                let (lg, _) = weak_ratio(s, input, case, Functional::Vertical, level as u32, 0)?;
                let (ls, _) = weak_ratio(s, input, case, Functional::Area(1.0), level as u32, 0)?;
                out.push(lg / ls);
            }
        }
        let c2 = comp[0].iter().map(|r| r.max(1.0 / r)).fold(1.0, f64::max);
        for (input, r) in suite.iter().zip(&comp[1]) {
            let pass = r.is_finite() && *r <= c2 * (1.0 + STABILITY_TOL) && *r >= 1.0 / (c2 * (1.0 + STABILITY_TOL));
            rows.push(ReportRow::new(experiment, &format!("{} | g/S at h/2 within c2 | {label}", input.id), *r, c2, STABILITY_TOL, pass));
        }
    }
    rows.extend(sandwich);
    Ok(rows)
}

/// `λ` values of a `g*` run: explicit ones (validated) or the threshold sweep.
fn lambdas(cfg: &ExperimentConfig, alpha: f64) -> Result<Vec<f64>> {
    let thr = gstar_threshold(cfg.dim, alpha);
    if cfg.lambdas.is_empty() {
        return Ok(vec![thr + 0.5, thr + 1.0, thr + 2.0]);
    }
    if let Some(l) = cfg.lambdas.iter().find(|l| **l <= thr) {
        return Err(CliError::Hypothesis(format!("λ = {l} is not above the threshold {thr} for α = {alpha}")));
    }
    let mut l = cfg.lambdas.clone();
    l.sort_by(f64::total_cmp);
    Ok(l)
}

/// Weak-type ratio of `g*_{λ,α}` and its monotonicity in `λ`.
pub fn run_theorem_12(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    run_theorem_12_in(&mut Session::new(cfg)?, cfg)
}

pub fn run_theorem_12_in(s: &mut Session, cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    expect(cfg, ExperimentId::Theorem12)?;
    let experiment = cfg.experiment.name();
    for &a in &cfg.alphas {
        lambdas(cfg, a)?;
    }
    let suite = hardy_suite();
    let mut rows = Vec::new();
    for case in weak_cases(cfg, experiment, &mut rows)? {
        let ls = lambdas(cfg, case.alpha)?;
        let label = case_label(case.w, case.p, case.alpha);
        let tag = format!(" | lambda={}", ls[0]);
        let base = ratio_protocol(s, experiment, &suite, case, Functional::GStar(ls[0]), weak_ratio, &tag, &mut rows)?;
        rows.extend(ladder_row(experiment, &suite, &base, &format!("{label}{tag}")));
        for (i, input) in suite.iter().enumerate() {
            let mut prev = base[i];
            for pair in ls.windows(2) {
                let (l, r) = weak_ratio(s, input, case, Functional::GStar(pair[1]), 0, 0)?;
                let cur = l / r;
                let id = format!("{} | lambda {} -> {} | {label}", input.id, pair[0], pair[1]);
                rows.push(ReportRow::new(experiment, &id, cur, prev, 0.0, cur.is_finite() && cur <= prev * (1.0 + 1e-12)));
                prev = cur;
            }
        }
    }
    rows.push(sandwich_row(s, experiment, &suite));
    Ok(rows)
}

/// Strong-type ratio of `𝒮_α` on `L^p_w`, `p > 1`.
pub fn run_theorem_a(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    run_theorem_a_in(&mut Session::new(cfg)?, cfg)
}

pub fn run_theorem_a_in(s: &mut Session, cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    expect(cfg, ExperimentId::TheoremA)?;
    let experiment = cfg.experiment.name();
    let fam = guard_family(cfg.dim)?;
    for w in &cfg.weights {
        for &p in &cfg.ps {
            if !ap_bounded(w, p, &fam)? {
                return Err(CliError::Hypothesis(format!("w = {w} is not in A_{p}")));
            }
        }
    }
    let suite = lp_suite(cfg.seed);
    let mut rows = Vec::new();
    for w in &cfg.weights {
        for &p in &cfg.ps {
            for &alpha in &cfg.alphas {
                ratio_protocol(s, experiment, &suite, Case { w, p, alpha }, Functional::Area(1.0), strong_ratio, "", &mut rows)?;
            }
        }
    }
    rows.push(sandwich_row(s, experiment, &suite));
    Ok(rows)
}

/// `L^2_w` bound of `g*_{λ,α}`, aperture growth of `𝒮_{α,2^j}` and the
/// annulus partition of `g*`.
pub fn run_lemma_41(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    run_lemma_41_in(&mut Session::new(cfg)?, cfg)
}

pub fn run_lemma_41_in(s: &mut Session, cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    expect(cfg, ExperimentId::Lemma41)?;
    let experiment = cfg.experiment.name();
    let n = cfg.dim as f64;
    let lambdas = if cfg.lambdas.is_empty() { vec![3.0] } else { cfg.lambdas.clone() };
    for &p in &cfg.ps {
        for &a in &cfg.alphas {
            if let Some(l) = lambdas.iter().find(|l| **l <= p * (1.0 + a / n)) {
                return Err(CliError::Hypothesis(format!("λ = {l} must exceed p(1+α/n) = {}", p * (1.0 + a / n))));
            }
        }
    }
    if cfg.j_max < 2 {
        return Err(CliError::Config("the aperture fit needs J >= 2".into()));
    }
    let suite = lp_suite(cfg.seed);
    let mut rows = Vec::new();
    let mut cases = Vec::new();
    for w in &cfg.weights {
        for &p in &cfg.ps {
            for &alpha in &cfg.alphas {
                let q = p * (1.0 + alpha / n);
                if in_ap(w, q)? {
                    cases.push(Case { w, p, alpha });
                } else {
                    rows.push(guard_row(experiment, w, p, alpha, q));
                }
            }
        }
    }
    if cases.is_empty() {
        return Err(CliError::Hypothesis("no weight lies in A_{p(1+α/n)} for the requested (p, α)".into()));
    }
    for case in cases {
        let l2 = Case { p: 2.0, ..case };
        let label = case_label(case.w, case.p, case.alpha);
        for &lambda in &lambdas {
            let tag = format!(" | g* lambda={lambda} L2");
            ratio_protocol(s, experiment, &suite, l2, Functional::GStar(lambda), strong_ratio, &tag, &mut rows)?;
        }
        let bound = (n + case.alpha) * case.p;
        for input in &suite {
            let mut samples = Vec::new();
            for j in 0..=cfg.j_max {
                let beta = (j as f64).exp2();
                let (lhs, _) = strong_ratio(s, input, l2, Functional::Area(beta), 0, 0)?;
                if j >= 1 {
                    samples.push((beta, lhs * lhs));
                }
            }
            let (slope, _) = fit_power_law(&samples)?;
            rows.push(ReportRow::at_most(experiment, &format!("{} | aperture exponent | {label}", input.id), slope, bound, GROWTH_SLACK));
        }
    }
    let alphas: Vec<f64> = {
        let mut a = cfg.alphas.clone();
        a.dedup();
        a
    };
    for &alpha in &alphas {
        for input in &suite {
            let field = s.field(input, alpha, 0, 0)?;
            for &lambda in &lambdas {
                let gp = isq_core::sqfn::GStarParams::new(lambda, crate::session::FAR)?;
                let mut worst = 0.0f64;
                let template = s.template(0)?;
                for i in (0..template.len()).step_by(8) {
                    let x = template.node(i);
                    let g = field.gstar_sum(&x[..cfg.dim], &gp)?;
                    if g.direct > 0.0 {
                        worst = worst.max((g.direct - g.partitioned()).abs() / g.direct);
                    }
                }
                let id = format!("{} | annulus partition | a={alpha} lambda={lambda}", input.id);
                rows.push(ReportRow::at_most(experiment, &id, worst, 0.0, PARTITION_TOL));
            }
        }
    }
    rows.push(sandwich_row(s, experiment, &suite));
    Ok(rows)
}
