//! Standard input suites.

use isq_core::atoms::{synthesize, WeakHardySpec};
use isq_core::grid::GridFunction;
use isq_core::weights::Weight;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

/// How a suite input is generated on a grid.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    /// Weak Hardy blocks `(k, x0, r)`, odd tents with moment order 0.
    Atoms(Vec<(i32, f64, f64)>),
    /// `exp(1 - 1/(1 - s^2))` with `s = (x - center)/radius`.
    Bump { center: f64, radius: f64 },
    /// Gaussian cut off at `|x - center| < cut`.
    Gaussian { center: f64, sigma: f64, cut: f64 },
    /// Sum of `value * χ_[a, b)`.
    Steps(Vec<(f64, f64, f64)>),
    /// `sin(2π freq (x - center)) (1 - s^2)_+`.
    Packet { center: f64, radius: f64, freq: f64 },
    /// Uniform `[-1, 1]` values on cells of `width` over `[lo, hi)`.
    Random { seed: u64, lo: f64, hi: f64, width: f64, zero_mean: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteInput {
    pub id: String,
    pub profile: Profile,
}

impl SuiteInput {
    fn new(id: &str, profile: Profile) -> Self {
        Self { id: id.to_string(), profile }
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self.profile, Profile::Atoms(_))
    }

    /// Samples the input on the grid of `template` with heights scaled by
    /// `2^shift` (atoms move up `shift` levels).
    pub fn realize(&self, template: &GridFunction, shift: i32) -> Result<GridFunction> {
        let h = template.h();
        let scale = (shift as f64).exp2();
        let rule = |g: &dyn Fn(f64) -> f64| -> Result<GridFunction> {
            Ok(GridFunction::make_grid(1, &template.domain(), h, |x| scale * g(x[0] + 0.5 * h))?)
        };
        match &self.profile {
            Profile::Atoms(cubes) => {
                let spec = self.spec(1.0, 1.0, &Weight::constant(1, 1.0)?, shift, f64::MAX)?;
                debug_assert_eq!(spec.cubes.len(), cubes.len());
                Ok(synthesize(&spec, template)?.f)
            }
            Profile::Bump { center, radius } => rule(&|x| {
                let s = (x - center) / radius;
                if s.abs() < 1.0 {
                    (1.0 - 1.0 / (1.0 - s * s)).exp()
                } else {
                    0.0
                }
            }),
            Profile::Gaussian { center, sigma, cut } => {
                rule(&|x| if (x - center).abs() < *cut { (-0.5 * ((x - center) / sigma).powi(2)).exp() } else { 0.0 })
            }
            Profile::Steps(steps) => rule(&|x| steps.iter().filter(|(a, b, _)| (*a..*b).contains(&x)).map(|s| s.2).sum()),
            Profile::Packet { center, radius, freq } => rule(&|x| {
                let s = (x - center) / radius;
                (2.0 * std::f64::consts::PI * freq * (x - center)).sin() * (1.0 - s * s).max(0.0)
            }),
            Profile::Random { seed, lo, hi, width, zero_mean } => {
                let cells = ((hi - lo) / width).round() as usize;
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut vals: Vec<f64> = (0..cells).map(|_| rng.gen_range(-1.0..1.0)).collect();
                if *zero_mean {
                    let mean = vals.iter().sum::<f64>() / cells as f64;
                    vals.iter_mut().for_each(|v| *v -= mean);
                }
                rule(&|x| {
                    let i = ((x - lo) / width).floor();
                    if i >= 0.0 && (i as usize) < cells {
                        vals[i as usize]
                    } else {
                        0.0
                    }
                })
            }
        }
    }

    /// Weak Hardy specification of an atomic input with levels shifted by
    /// `shift` and budget constant `c`.
    pub fn spec(&self, p: f64, alpha: f64, w: &Weight, shift: i32, c: f64) -> Result<WeakHardySpec> {
        let Profile::Atoms(cubes) = &self.profile else {
            return Err(crate::error::CliError::Config(format!("input `{}` is not atomic", self.id)));
        };
        let mut spec = WeakHardySpec::new(1, p, alpha, w.clone(), c, cubes.len().max(1))?;
        for &(k, x0, r) in cubes {
            spec.push(k + shift, &[x0], r)?;
        }
        Ok(spec)
    }

    /// Realized `c = max_k 2^{kp} Σ_i w(Q^k_i)`.
    pub fn hardy_c(&self, p: f64, alpha: f64, w: &Weight, shift: i32) -> Result<f64> {
        Ok(self.spec(p, alpha, w, shift, 1.0)?.realized_c())
    }
}

/// Geometric ladder of five levels with shrinking cubes.
pub fn ladder() -> Vec<(i32, f64, f64)> {
    vec![(0, -3.0, 2.0), (1, -1.0, 1.5), (2, 0.5, 1.0), (3, 1.625, 0.75), (4, 2.5, 0.5)]
}

/// Inputs of the weak-type theorems.
pub fn hardy_suite() -> Vec<SuiteInput> {
    use Profile::Atoms;
    vec![
        SuiteInput::new("single", Atoms(vec![(0, 0.5, 1.0)])),
        SuiteInput::new("single-high", Atoms(vec![(2, 0.5, 1.0)])),
        SuiteInput::new("small", Atoms(vec![(1, 1.25, 0.5)])),
        SuiteInput::new("wide", Atoms(vec![(0, 1.0, 2.0)])),
        SuiteInput::new("low-level", Atoms(vec![(-1, -1.0, 2.0)])),
        SuiteInput::new("off-center", Atoms(vec![(0, 3.5, 1.0)])),
        SuiteInput::new("at-origin", Atoms(vec![(0, 0.0, 1.0)])),
        SuiteInput::new("pair", Atoms(vec![(0, -1.5, 1.0), (0, 1.5, 1.0)])),
        SuiteInput::new("two-level", Atoms(vec![(0, -1.0, 1.0), (1, 1.25, 0.5)])),
        SuiteInput::new("overlap", Atoms(vec![(0, 0.0, 2.0), (0, 0.5, 1.0)])),
        SuiteInput::new("cluster", Atoms(vec![(1, -2.0, 0.5), (1, -1.0, 0.5), (1, 0.0, 0.5)])),
        SuiteInput::new("ladder", Atoms(ladder())),
    ]
}

/// Inputs of the strong-type estimates.
pub fn lp_suite(seed: u64) -> Vec<SuiteInput> {
    vec![
        SuiteInput::new("atom", Profile::Atoms(vec![(0, 0.5, 1.0)])),
        SuiteInput::new("two-atoms", Profile::Atoms(vec![(0, -1.5, 1.0), (1, 1.25, 0.5)])),
        SuiteInput::new("ladder", Profile::Atoms(ladder())),
        SuiteInput::new("bump", Profile::Bump { center: 0.0, radius: 1.0 }),
        SuiteInput::new("wide-bump", Profile::Bump { center: 1.0, radius: 2.5 }),
        SuiteInput::new("gaussian", Profile::Gaussian { center: -1.0, sigma: 0.5, cut: 3.0 }),
        SuiteInput::new("indicator", Profile::Steps(vec![(0.0, 1.0, 1.0)])),
        SuiteInput::new("steps", Profile::Steps(vec![(-2.0, -1.0, 1.0), (1.0, 2.0, -0.5)])),
        SuiteInput::new("packet", Profile::Packet { center: 0.0, radius: 2.0, freq: 1.0 }),
        SuiteInput::new("random", Profile::Random { seed, lo: -2.0, hi: 2.0, width: 0.25, zero_mean: false }),
        SuiteInput::new(
            "random-mean-zero",
            Profile::Random { seed: seed.wrapping_add(1), lo: 0.0, hi: 3.0, width: 0.125, zero_mean: true },
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use isq_core::grid::BoxDomain;

    fn template(h: f64) -> GridFunction {
        GridFunction::make_grid(1, &BoxDomain::centered(1, 8.0), h, |_| 0.0).unwrap()
    }

    #[test]
    fn suites_are_large_enough() {
        assert!(hardy_suite().len() >= 10);
        assert!(lp_suite(1).len() >= 10);
    }

    #[test]
    fn inputs_realize_at_both_resolutions() {
        for h in [1.0 / 16.0, 1.0 / 32.0] {
            let t = template(h);
            for s in hardy_suite().iter().chain(lp_suite(7).iter()) {
                let f = s.realize(&t, 0).unwrap();
                assert!(f.sup_norm() > 0.0, "{}", s.id);
                let g = s.realize(&t, 2).unwrap();
                let diff = g.combine(1.0, &f, -4.0).unwrap().sup_norm();
                assert!(diff <= 1e-12 * g.sup_norm(), "{}", s.id);
            }
        }
    }

    #[test]
    fn random_inputs_are_seeded_and_resolution_free() {
        let a = lp_suite(5)[9].realize(&template(1.0 / 16.0), 0).unwrap();
        let b = lp_suite(5)[9].realize(&template(1.0 / 16.0), 0).unwrap();
        assert_eq!(a, b);
        let c = lp_suite(6)[9].realize(&template(1.0 / 16.0), 0).unwrap();
        assert_ne!(a, c);
        let fine = lp_suite(5)[9].realize(&template(1.0 / 32.0), 0).unwrap();
        assert!((fine.integral() - a.integral()).abs() < 1e-12);
    }

    #[test]
    fn hardy_c_scales_with_height() {
        let w = Weight::power(1, &[0.0], 0.5).unwrap();
        for s in hardy_suite() {
            let c = s.hardy_c(0.85, 1.0, &w, 0).unwrap();
            let c4 = s.hardy_c(0.85, 1.0, &w, 2).unwrap();
            assert!((c4 / c - 4f64.powf(0.85)).abs() < 1e-12, "{}", s.id);
        }
    }
}
