//! Caches of realized inputs, half-space fields and sampled functionals
//! shared by the experiments of one run.

use std::collections::HashMap;
use std::sync::Arc;

use isq_core::calpha::{BallGrid, Dictionary};
use isq_core::grid::{BoxDomain, GridFunction};
use isq_core::sqfn::{GStarParams, HalfSpaceField, Reach};
use isq_core::weights::Weight;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::suite::SuiteInput;

/// Largest aperture any evaluator uses.
pub const MAX_BETA: f64 = 64.0;
/// Spatial reach of fields: effectively unbounded (fields are clipped to the
/// support of the input anyway).
pub const FAR: f64 = 1e12;

/// Identifies one field: input, `α`, refinement level, height shift.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FieldKey {
    pub input: String,
    alpha_bits: u64,
    pub level: u32,
    pub shift: i32,
}

impl FieldKey {
    pub fn new(input: &SuiteInput, alpha: f64, level: u32, shift: i32) -> Self {
        Self { input: input.id.clone(), alpha_bits: alpha.to_bits(), level, shift }
    }

    pub fn alpha(&self) -> f64 {
        f64::from_bits(self.alpha_bits)
    }
}

/// Functionals sampled at every node of the evaluation grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Functional {
    /// `𝒮_{α,β}`.
    Area(f64),
    /// `g_α`.
    Vertical,
    /// `g*_{λ,α}`.
    GStar(f64),
}

impl Functional {
    fn key(self) -> (u8, u64) {
        match self {
            Functional::Area(b) => (0, b.to_bits()),
            Functional::Vertical => (1, 0),
            Functional::GStar(l) => (2, l.to_bits()),
        }
    }
}

/// Grid parameters and caches.
pub struct Session {
    grid: ExperimentConfig,
    inputs: HashMap<(String, u32, i32), Arc<GridFunction>>,
    fields: HashMap<FieldKey, Arc<HalfSpaceField>>,
    samples: HashMap<(FieldKey, (u8, u64)), Arc<GridFunction>>,
    measures: HashMap<(String, u32), Arc<Vec<f64>>>,
    dicts: HashMap<u64, Arc<Dictionary>>,
    ball: Arc<BallGrid>,
}

impl Session {
    /// Uses the grid parameters (`h`, box, half-space window, `m`, refinement,
    /// resolution scale) of `cfg`.
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(Self {
            grid: cfg.clone(),
            inputs: HashMap::new(),
            fields: HashMap::new(),
            samples: HashMap::new(),
            measures: HashMap::new(),
            dicts: HashMap::new(),
            ball: Arc::new(BallGrid::new(cfg.dim, cfg.m)?),
        })
    }

    /// Whether `cfg` has the same grid parameters as this session.
    pub fn compatible(&self, cfg: &ExperimentConfig) -> bool {
        let g = &self.grid;
        g.dim == cfg.dim
            && g.h == cfg.h
            && g.box_half == cfg.box_half
            && g.t_min == cfg.t_min
            && g.t_max == cfg.t_max
            && g.per_octave == cfg.per_octave
            && g.m == cfg.m
            && g.refine == cfg.refine
            && g.resolution_scale == cfg.resolution_scale
            && g.seed == cfg.seed
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.grid
    }

    /// Zero function on the evaluation box at refinement `level`.
    pub fn template(&self, level: u32) -> Result<GridFunction> {
        let h = self.grid.spacing() / (1u64 << level) as f64;
        Ok(GridFunction::make_grid(self.grid.dim, &BoxDomain::centered(self.grid.dim, self.grid.box_half), h, |_| 0.0)?)
    }

    pub fn input(&mut self, input: &SuiteInput, level: u32, shift: i32) -> Result<Arc<GridFunction>> {
        let key = (input.id.clone(), level, shift);
        if let Some(f) = self.inputs.get(&key) {
            return Ok(f.clone());
        }
        let f = Arc::new(input.realize(&self.template(level)?, shift)?);
        self.inputs.insert(key, f.clone());
        Ok(f)
    }

    pub fn dictionary(&mut self, alpha: f64) -> Result<Arc<Dictionary>> {
        if let Some(d) = self.dicts.get(&alpha.to_bits()) {
            return Ok(d.clone());
        }
        let d = Arc::new(Dictionary::default_for(self.ball.clone(), alpha)?);
        self.dicts.insert(alpha.to_bits(), d.clone());
        Ok(d)
    }

    /// `A_α(f)^2` over the half-space, with the dictionary sandwich tracked.
    pub fn field(&mut self, input: &SuiteInput, alpha: f64, level: u32, shift: i32) -> Result<Arc<HalfSpaceField>> {
        let key = FieldKey::new(input, alpha, level, shift);
        if let Some(f) = self.fields.get(&key) {
            return Ok(f.clone());
        }
        let f = self.input(input, level, shift)?;
        let dict = self.dictionary(alpha)?;
        let b = self.grid.box_half;
        let n = self.grid.dim;
        let reach = Reach::new(&vec![-b; n], &vec![b; n], MAX_BETA, FAR)?;
        let hs = self.grid.halfspace(level)?;
        let field = Arc::new(HalfSpaceField::intrinsic_refined(&f, alpha, self.grid.m, self.grid.refine, &hs, &reach, Some(&dict))?);
        self.fields.insert(key, field.clone());
        Ok(field)
    }

    /// `functional` of the input sampled on the evaluation grid.
    pub fn sample(&mut self, input: &SuiteInput, alpha: f64, level: u32, shift: i32, functional: Functional) -> Result<Arc<GridFunction>> {
        let key = (FieldKey::new(input, alpha, level, shift), functional.key());
        if let Some(s) = self.samples.get(&key) {
            return Ok(s.clone());
        }
        let field = self.field(input, alpha, level, shift)?;
        let template = self.template(level)?;
        let sampled = match functional {
            Functional::Area(beta) => HalfSpaceField::sample(&template, |x| field.area(x, beta))?,
            Functional::Vertical => HalfSpaceField::sample(&template, |x| field.vertical(x))?,
            Functional::GStar(lambda) => {
                let gp = GStarParams::new(lambda, FAR)?;
                HalfSpaceField::sample(&template, |x| field.gstar(x, &gp))?
            }
        };
        let sampled = Arc::new(sampled);
        self.samples.insert(key, sampled.clone());
        Ok(sampled)
    }

    /// `w` of every cell of the evaluation grid at `level`.
    pub fn measures(&mut self, w: &Weight, level: u32) -> Result<Arc<Vec<f64>>> {
        let key = (w.to_string(), level);
        if let Some(m) = self.measures.get(&key) {
            return Ok(m.clone());
        }
        let m = Arc::new(w.cell_measures(&self.template(level)?)?);
        self.measures.insert(key, m.clone());
        Ok(m)
    }

    /// Largest dictionary excess and number of evaluations over the fields of
    /// the given inputs computed so far.
    pub fn sandwich_for(&self, ids: &[String]) -> (f64, usize) {
        self.fields
            .iter()
            .filter(|(k, _)| ids.contains(&k.input))
            .fold((0.0f64, 0usize), |(e, n), (_, f)| (e.max(f.stats().max_dict_excess), n + f.stats().evaluations))
    }
}
