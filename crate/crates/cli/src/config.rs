//! Experiment configuration: defaults per experiment, overridden by a
//! sectioned `key = value` file and by command-line flags.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use ini::Ini;
use isq_core::grid::HalfSpaceGrid;
use isq_core::weights::{parse_weight, Weight};

use crate::error::{CliError, Result};

/// Default seed of randomized suite members.
pub const DEFAULT_SEED: u64 = 0x5EED;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentId {
    TheoremA,
    Theorem11,
    Theorem12,
    Corollary13,
    Lemma41,
    Lemma31,
    Lemma42,
    Anchors,
    Weights,
    Cert,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 10] = [
        ExperimentId::Anchors,
        ExperimentId::Weights,
        ExperimentId::Lemma31,
        ExperimentId::Lemma42,
        ExperimentId::Lemma41,
        ExperimentId::TheoremA,
        ExperimentId::Theorem11,
        ExperimentId::Theorem12,
        ExperimentId::Corollary13,
        ExperimentId::Cert,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::TheoremA => "theorem-a",
            ExperimentId::Theorem11 => "theorem-1.1",
            ExperimentId::Theorem12 => "theorem-1.2",
            ExperimentId::Corollary13 => "corollary-1.3",
            ExperimentId::Lemma41 => "lemma-4.1",
            ExperimentId::Lemma31 => "lemma-3.1",
            ExperimentId::Lemma42 => "lemma-4.2",
            ExperimentId::Anchors => "anchors",
            ExperimentId::Weights => "weights",
            ExperimentId::Cert => "cert",
        }
    }

    /// Experiments whose inputs are weak Hardy syntheses.
    pub fn is_weak_type(self) -> bool {
        matches!(self, ExperimentId::Theorem11 | ExperimentId::Theorem12 | ExperimentId::Corollary13)
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        let id = match s.trim().to_ascii_lowercase().as_str() {
            "a" | "theorem-a" | "theorema" => ExperimentId::TheoremA,
            "1.1" | "theorem-1.1" | "theorem1.1" => ExperimentId::Theorem11,
            "1.2" | "theorem-1.2" | "theorem1.2" => ExperimentId::Theorem12,
            "cor1.3" | "1.3" | "corollary-1.3" | "corollary1.3" => ExperimentId::Corollary13,
            "lemma4.1" | "lemma-4.1" | "4.1" => ExperimentId::Lemma41,
            "lemma3.1" | "lemma-3.1" | "3.1" => ExperimentId::Lemma31,
            "lemma4.2" | "lemma-4.2" | "4.2" => ExperimentId::Lemma42,
            "anchors" => ExperimentId::Anchors,
            "weights" => ExperimentId::Weights,
            "cert" => ExperimentId::Cert,
            other => return Err(CliError::Config(format!("unknown experiment `{other}`"))),
        };
        Ok(id)
    }
}

/// Parameters of one experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub dim: usize,
    pub weights: Vec<Weight>,
    pub alphas: Vec<f64>,
    pub ps: Vec<f64>,
    /// Explicit `g*` exponents; empty means the threshold sweep.
    pub lambdas: Vec<f64>,
    /// Grid spacing at resolution scale 1.
    pub h: f64,
    /// Functions and evaluation points live in `[-box, box)^n`.
    pub box_half: f64,
    /// Smallest scale; `None` means `2h`.
    pub t_min: Option<f64>,
    pub t_max: f64,
    pub per_octave: usize,
    /// Aperture cutoff `J`: apertures `2^j` for `j <= J`.
    pub j_max: u32,
    /// Ball resolution of the `C_α` program.
    pub m: usize,
    /// 1-d refinement cells (`0` disables).
    pub refine: usize,
    pub atom_spec: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub resolution_scale: u32,
}

impl ExperimentConfig {
    /// Defaults of the standard suite for `id`.
    pub fn default_for(id: ExperimentId) -> Self {
        let mut cfg = ExperimentConfig {
            experiment: id,
            dim: 1,
            weights: standard_weights(),
            alphas: vec![0.5, 1.0],
            ps: vec![0.85, 1.0],
            lambdas: Vec::new(),
            h: 1.0 / 16.0,
            box_half: 8.0,
            t_min: None,
            t_max: 16.0,
            per_octave: 8,
            j_max: 4,
            m: 16,
            refine: isq_core::calpha::DEFAULT_REFINE,
            atom_spec: None,
            out: None,
            seed: DEFAULT_SEED,
            resolution_scale: 1,
        };
        match id {
            ExperimentId::TheoremA => cfg.ps = vec![2.0],
            ExperimentId::Lemma41 => {
                cfg.ps = vec![1.0];
                cfg.lambdas = vec![3.0];
            }
            ExperimentId::Lemma31 | ExperimentId::Lemma42 | ExperimentId::Cert => {
                cfg.h = 1.0 / 8.0;
                cfg.box_half = 2.0;
                cfg.t_min = Some(0.5);
                cfg.t_max = 128.0;
                cfg.per_octave = 4;
                cfg.j_max = 3;
                cfg.ps = vec![1.0];
            }
            _ => {}
        }
        cfg
    }

    /// Loads defaults for the `id` named in the file (or `fallback`) and
    /// applies every key of `text`.
    pub fn from_ini(text: &str, fallback: Option<ExperimentId>) -> Result<Self> {
        let pairs = ini_pairs(text)?;
        let id = match pairs.iter().find(|(k, _)| k == "id" || k == "experiment") {
            Some((_, v)) => v.parse()?,
            None => fallback.ok_or_else(|| CliError::Config("config names no experiment".into()))?,
        };
        Self::apply(id, &pairs)
    }

    /// Defaults of `id` with every key of `text` applied; an experiment named
    /// in the file is ignored.
    pub fn for_experiment(text: &str, id: ExperimentId) -> Result<Self> {
        Self::apply(id, &ini_pairs(text)?)
    }

    fn apply(id: ExperimentId, pairs: &[(String, String)]) -> Result<Self> {
        let mut cfg = Self::default_for(id);
        let dim = pairs.iter().find(|(k, _)| k == "dim").map(|(_, v)| parse_num::<usize>("dim", v)).transpose()?;
        if let Some(d) = dim {
            cfg.dim = d;
            cfg.weights = cfg.weights.iter().map(|w| lift_weight(w, d)).collect::<Result<_>>()?;
        }
        for (k, v) in pairs {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "id" | "experiment" | "dim" => {}
            "weight" | "weights" => {
                self.weights = v
                    .split('|')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse_weight(s, self.dim).map_err(CliError::from))
                    .collect::<Result<_>>()?
            }
            "alpha" | "alphas" => self.alphas = parse_list("alpha", v)?,
            "p" | "ps" => self.ps = parse_list("p", v)?,
            "lambda" | "lambdas" => self.lambdas = parse_list("lambda", v)?,
            "h" => self.h = parse_num("h", v)?,
            "box" => self.box_half = parse_num("box", v)?,
            "t_min" => self.t_min = Some(parse_num("t_min", v)?),
            "t_max" => self.t_max = parse_num("t_max", v)?,
            "per_octave" | "l" => self.per_octave = parse_num("per_octave", v)?,
            "j_max" | "j" => self.j_max = parse_num("j_max", v)?,
            "m" => self.m = parse_num("m", v)?,
            "refine" => self.refine = parse_num("refine", v)?,
            "spec" | "atom_spec" => self.atom_spec = Some(PathBuf::from(v)),
            "out" => self.out = Some(PathBuf::from(v)),
            "seed" => self.seed = parse_seed(v)?,
            "resolution_scale" => self.resolution_scale = parse_num("resolution_scale", v)?,
            other => return Err(CliError::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Grid spacing after the resolution scale.
    pub fn spacing(&self) -> f64 {
        self.h / self.resolution_scale as f64
    }

    /// Half-space grid at refinement `level` (each level halves `h` and `t_min`).
    pub fn halfspace(&self, level: u32) -> Result<HalfSpaceGrid> {
        let h = self.spacing() / (1u64 << level) as f64;
        let t_min = self.t_min.map_or(2.0 * h, |t| t / self.resolution_scale as f64 / (1u64 << level) as f64);
        Ok(HalfSpaceGrid::covering(t_min, self.t_max, self.per_octave)?)
    }

    /// Checks ranges and referenced files.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(1..=2).contains(&self.dim) {
            return bad(format!("dimension must be 1 or 2, got {}", self.dim));
        }
        if self.weights.is_empty() || self.alphas.is_empty() || self.ps.is_empty() {
            return bad("weights, alphas and ps must be non-empty".into());
        }
        if self.weights.iter().any(|w| w.dim() != self.dim) {
            return bad("weight dimension differs from dim".into());
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
            return bad(format!("alpha must lie in (0, 1], got {a}"));
        }
        if let Some(p) = self.ps.iter().find(|p| !(**p > 0.0) || !p.is_finite()) {
            return bad(format!("p must be positive, got {p}"));
        }
        if !(self.h > 0.0) || !(self.box_half > 0.0) || !(self.t_max > 0.0) || self.per_octave == 0 {
            return bad("h, box, t_max and per_octave must be positive".into());
        }
        if self.resolution_scale == 0 || self.m < 2 {
            return bad("resolution scale must be at least 1 and m at least 2".into());
        }
        if let Some(t) = self.t_min {
            if !(t > 0.0 && t < self.t_max) {
                return bad(format!("t_min must lie in (0, t_max), got {t}"));
            }
        }
        if let Some(path) = &self.atom_spec {
            if !path.exists() {
                return bad(format!("atom spec `{}` does not exist", path.display()));
            }
        }
        let n = self.dim as f64;
        if self.experiment.is_weak_type() {
            for &a in &self.alphas {
                for &p in &self.ps {
                    if !(p * (1.0 + a / n) > 1.0 && p <= 1.0) {
                        return Err(CliError::Hypothesis(format!("need n/(n+α) < p <= 1, got p = {p}, α = {a}")));
                    }
                }
            }
            if self.dim != 1 {
                return bad("the theorem suites are one-dimensional".into());
            }
        }
        if self.experiment == ExperimentId::TheoremA {
            if let Some(p) = self.ps.iter().find(|p| **p <= 1.0) {
                return Err(CliError::Hypothesis(format!("Theorem A needs p > 1, got {p}")));
            }
        }
        if self.lambdas.iter().any(|l| !(*l > 0.0)) {
            return bad("lambda must be positive".into());
        }
        Ok(())
    }
}

fn ini_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let ini = Ini::load_from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
    let mut pairs = Vec::new();
    for (_, props) in ini.iter() {
        for (k, v) in props.iter() {
            pairs.push((k.trim().to_ascii_lowercase(), v.trim().to_string()));
        }
    }
    Ok(pairs)
}

/// `1`, `|x|^{1/2}` and `|x|^{-1/2}`.
pub fn standard_weights() -> Vec<Weight> {
    vec![
        Weight::constant(1, 1.0).expect("constant weight"),
        Weight::power(1, &[0.0], 0.5).expect("power weight"),
        Weight::power(1, &[0.0], -0.5).expect("power weight"),
    ]
}

fn lift_weight(w: &Weight, n: usize) -> Result<Weight> {
    Ok(parse_weight(&w.to_string(), n)?)
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.trim().parse::<T>().map_err(|e| CliError::Config(format!("key `{key}`: {e}")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse_num(key, s)).collect()
}

/// Decimal or `0x`-prefixed hexadecimal.
pub fn parse_seed(v: &str) -> Result<u64> {
    let v = v.trim();
    let r = match v.strip_prefix("0x").or_else(|| v.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => v.parse(),
    };
    r.map_err(|e| CliError::Config(format!("seed `{v}`: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for id in ExperimentId::ALL {
            ExperimentConfig::default_for(id).validate().unwrap();
            assert_eq!(id.name().parse::<ExperimentId>().unwrap(), id);
        }
    }

    #[test]
    fn ini_overrides() {
        let text = "[experiment]\nid = 1.1\nseed = 0x10\n[hypothesis]\nweights = const c=1 | power center=0 gamma=0.5\nalpha = 1\np = 0.9\n[grid]\nh = 0.125\n";
        let cfg = ExperimentConfig::from_ini(text, None).unwrap();
        assert_eq!(cfg.experiment, ExperimentId::Theorem11);
        assert_eq!(cfg.seed, 16);
        assert_eq!(cfg.weights.len(), 2);
        assert_eq!(cfg.alphas, vec![1.0]);
        assert_eq!(cfg.ps, vec![0.9]);
        assert_eq!(cfg.h, 0.125);
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ExperimentConfig::from_ini("id = nope\n", None).is_err());
        assert!(ExperimentConfig::from_ini("id = 1.1\nfoo = 1\n", None).is_err());
        let cfg = ExperimentConfig::from_ini("id = 1.1\np = 0.6\nalpha = 0.5\n", None).unwrap();
        assert!(matches!(cfg.validate(), Err(CliError::Hypothesis(_))));
        let cfg = ExperimentConfig::from_ini("id = a\np = 1\n", None).unwrap();
        assert!(matches!(cfg.validate(), Err(CliError::Hypothesis(_))));
        let cfg = ExperimentConfig::from_ini("id = 1.1\nspec = /nonexistent/spec.txt\n", None).unwrap();
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
        let cfg = ExperimentConfig::for_experiment("id = 1.1\nalpha = 1\n", ExperimentId::TheoremA).unwrap();
        assert_eq!((cfg.experiment, cfg.alphas.clone(), cfg.ps.clone()), (ExperimentId::TheoremA, vec![1.0], vec![2.0]));
        let cfg = ExperimentConfig::from_ini("id = 1.1\nlambda = 0\n", None).unwrap();
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn halfspace_levels_follow_scale() {
        let mut cfg = ExperimentConfig::default_for(ExperimentId::Theorem11);
        let base = cfg.halfspace(0).unwrap();
        assert!((base.t_min() - 2.0 * cfg.h).abs() < 1e-15);
        assert!((cfg.halfspace(1).unwrap().t_min() - cfg.h).abs() < 1e-15);
        cfg.resolution_scale = 2;
        assert!((cfg.halfspace(0).unwrap().t_min() - cfg.h).abs() < 1e-15);
    }
}
