//! Far-field decay of the square functions of a single atom.

use isq_core::atoms::{decay_fit_on_field, fit_power_law, make_atom, ray, Atom, DecayFit, Shape};
use isq_core::calpha::{BallGrid, Dictionary};
use isq_core::grid::{BoxDomain, GridFunction, Point};
use isq_core::sqfn::{HalfSpaceField, Reach};
use isq_core::weights::Cube;
use std::sync::Arc;

use crate::config::{ExperimentConfig, ExperimentId};
use crate::error::{CliError, Result};
use crate::report::ReportRow;

/// Tolerance of the Lemma 3.1 slope.
pub const SLOPE_TOL: f64 = 0.1;
/// Tolerance of the aperture slopes.
pub const APERTURE_SLOPE_TOL: f64 = 0.15;
/// Largest slope change under resolution doubling.
pub const DRIFT_TOL: f64 = 0.05;
/// Slack of the aperture growth exponent.
pub const GROWTH_SLACK: f64 = 0.5;
/// Factor in `C_j <= factor C_0 2^{j(3n+2α)/2}`.
pub const GROWTH_FACTOR: f64 = 1.5;
/// Tolerance of the exact symmetries (homogeneity, translation).
pub const SYMMETRY_TOL: f64 = 1e-9;
/// Distances of the sample ray from the atom center, in units of the
/// aperture, and the number of samples.
pub const RAY: (f64, f64, usize) = (4.0, 32.0, 9);
/// Center and side of the test atom.
pub const ATOM_CUBE: (f64, f64) = (0.5, 1.0);

/// Decay setting at one resolution.
pub struct DecaySetup {
    pub template: GridFunction,
    pub atom: Atom,
}

impl DecaySetup {
    /// Atom on `Q(center + offset, side)` at `level`, sampled at refinement
    /// `refine_level` of `cfg`.
    pub fn new(cfg: &ExperimentConfig, refine_level: u32, level: i32, offset: f64) -> Result<Self> {
        if cfg.dim != 1 {
            return Err(CliError::Config("the decay fits are one-dimensional".into()));
        }
        let h = cfg.spacing() / (1u64 << refine_level) as f64;
        let template = GridFunction::make_grid(1, &BoxDomain::centered(1, cfg.box_half), h, |_| 0.0)?;
        let cube = Cube::new(&[ATOM_CUBE.0 + offset], ATOM_CUBE.1)?;
        let atom = make_atom(&template, &cube, level, 0, Shape::OddTent)?;
        Ok(Self { template, atom })
    }

    /// Sample points `x0 + d` with `d` geometric over `beta · [RAY.0, RAY.1]`.
    pub fn points(&self, beta: f64) -> Vec<Point> {
        ray(&self.template, &self.atom.cube.center, beta * RAY.0, beta * RAY.1, RAY.2)
    }

    /// `A_α(b)^2` over the rays of every aperture up to `beta`.
    pub fn field(&self, cfg: &ExperimentConfig, refine_level: u32, alpha: f64, beta: f64) -> Result<HalfSpaceField> {
        let hs = cfg.halfspace(refine_level)?;
        let lo = self.points(1.0)[0][0];
        let hi = self.points(beta)[RAY.2 - 1][0];
        let dict = Dictionary::default_for(Arc::new(BallGrid::new(1, cfg.m)?), alpha)?;
        let reach = Reach::new(&[lo], &[hi], beta, 0.0)?;
        Ok(HalfSpaceField::intrinsic_refined(&self.atom.profile, alpha, cfg.m, cfg.refine, &hs, &reach, Some(&dict))?)
    }

    pub fn fit(&self, field: &HalfSpaceField, alpha: f64, beta: f64) -> Result<DecayFit> {
        Ok(decay_fit_on_field(field, &self.atom, alpha, beta, &self.points(beta))?)
    }

    fn areas(&self, field: &HalfSpaceField) -> Result<Vec<f64>> {
        self.points(1.0).iter().map(|x| Ok(field.area(&x[..1], 1.0)?)).collect()
    }
}

fn sandwich_row(experiment: &str, id: &str, field: &HalfSpaceField) -> ReportRow {
    let s = field.stats();
    ReportRow::at_most(experiment, &format!("{id} | sandwich over {} evaluations", s.evaluations), s.max_dict_excess, 0.0, 1e-8)
}

fn largest_deviation(a: &[f64], b: &[f64], scale: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (scale * x - y).abs() / y.abs().max(f64::MIN_POSITIVE)).fold(0.0, f64::max)
}

fn expect(cfg: &ExperimentConfig, id: ExperimentId) -> Result<()> {
    if cfg.experiment != id && cfg.experiment != ExperimentId::Cert {
        return Err(CliError::Config(format!("expected a {id} configuration, got {}", cfg.experiment)));
    }
    cfg.validate()
}

/// Slope of `𝒮_α(b)` along the ray at refinement `level`.
pub fn lemma31_slope(cfg: &ExperimentConfig, level: u32, alpha: f64) -> Result<f64> {
    let setup = DecaySetup::new(cfg, level, 0, 0.0)?;
    let field = setup.field(cfg, level, alpha, 1.0)?;
    Ok(setup.fit(&field, alpha, 1.0)?.slope)
}

/// Decay slope `-(n+α)`, resolution drift, bounded normalized constant,
/// homogeneity and translation invariance.
pub fn run_lemma_31(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    expect(cfg, ExperimentId::Lemma31)?;
    let experiment = ExperimentId::Lemma31.name();
    let n = cfg.dim as f64;
    let mut rows = Vec::new();
    for &alpha in &cfg.alphas {
        let tag = format!("a={alpha}");
        let base = DecaySetup::new(cfg, 0, 0, 0.0)?;
        let field = base.field(cfg, 0, alpha, 1.0)?;
        let fit = base.fit(&field, alpha, 1.0)?;
        rows.push(ReportRow::absolute(experiment, &format!("slope | {tag}"), fit.slope, -(n + alpha), SLOPE_TOL));
        rows.push(ReportRow::finite(experiment, &format!("normalized constant | {tag}"), fit.normalized, 1.0));
        rows.push(sandwich_row(experiment, &tag, &field));

        let fine = DecaySetup::new(cfg, 1, 0, 0.0)?;
        let fine_field = fine.field(cfg, 1, alpha, 1.0)?;
        let fine_fit = fine.fit(&fine_field, alpha, 1.0)?;
        rows.push(ReportRow::absolute(experiment, &format!("slope h/2 vs h | {tag}"), fine_fit.slope, fit.slope, DRIFT_TOL));
        rows.push(sandwich_row(experiment, &format!("{tag} h/2"), &fine_field));

        let s0 = base.areas(&field)?;
        let high = DecaySetup::new(cfg, 0, 1, 0.0)?;
        let s1 = high.areas(&high.field(cfg, 0, alpha, 1.0)?)?;
        rows.push(ReportRow::at_most(experiment, &format!("homogeneity 2b | {tag}"), largest_deviation(&s0, &s1, 2.0), 0.0, SYMMETRY_TOL));
        let shifted = DecaySetup::new(cfg, 0, 0, 1.0)?;
        let st = shifted.areas(&shifted.field(cfg, 0, alpha, 1.0)?)?;
        rows.push(ReportRow::at_most(experiment, &format!("translation by 1 | {tag}"), largest_deviation(&s0, &st, 1.0), 0.0, SYMMETRY_TOL));
    }
    Ok(rows)
}

/// Aperture slopes for `j = 1..=J`, the growth of the constants `C_j` and
/// the bound `C_j <= 1.5 C_0 2^{j(3n+2α)/2}`.
pub fn run_lemma_42(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    expect(cfg, ExperimentId::Lemma42)?;
    let experiment = ExperimentId::Lemma42.name();
    let n = cfg.dim as f64;
    if cfg.j_max < 1 {
        return Err(CliError::Config("the aperture sweep needs J >= 1".into()));
    }
    let mut rows = Vec::new();
    for &alpha in &cfg.alphas {
        let tag = format!("a={alpha}");
        let setup = DecaySetup::new(cfg, 0, 0, 0.0)?;
        let field = setup.field(cfg, 0, alpha, (cfg.j_max as f64).exp2())?;
        let growth = (3.0 * n + 2.0 * alpha) / 2.0;
        let c0 = setup.fit(&field, alpha, 1.0)?.constant;
        let mut constants = vec![(1.0, c0)];
        for j in 1..=cfg.j_max {
            let beta = (j as f64).exp2();
            let fit = setup.fit(&field, alpha, beta)?;
            rows.push(ReportRow::absolute(experiment, &format!("slope j={j} | {tag}"), fit.slope, -(n + alpha), APERTURE_SLOPE_TOL));
            let bound = GROWTH_FACTOR * c0 * (j as f64 * growth).exp2();
            rows.push(ReportRow::at_most(experiment, &format!("C_j bound j={j} | {tag}"), fit.constant, bound, 0.0));
            constants.push((beta, fit.constant));
        }
        let (exponent, _) = if constants.len() >= 4 {
            fit_power_law(&constants)?
        } else {
            let (b, c) = constants[constants.len() - 1];
            ((c / c0).ln() / b.ln(), 0.0)
        };
        rows.push(ReportRow::at_most(experiment, &format!("growth exponent | {tag}"), exponent, growth, GROWTH_SLACK));
        rows.push(sandwich_row(experiment, &tag, &field));
    }
    Ok(rows)
}
