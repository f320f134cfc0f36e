//! Synthetic data: pass a stationary signal from a ground-truth innovation
//! model through the filter bank and estimate the state covariance.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterbank::FilterBank;
use crate::io::{matrix, matrix_opt, FilterBankSpec};
use crate::linalg::{self, cholesky_lower, fro, hermitize, identity, CMat};
use crate::moment_space::MomentSpace;

pub const MIN_SAMPLES: usize = 100;

/// Ground-truth model `y = H(q) e` with `H(z) = H_c (zI − F)⁻¹ G_h + D` and
/// `E e e* = innovation_cov` (identity when absent).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TruthModel {
    WhiteNoise {
        #[serde(default, with = "matrix_opt", skip_serializing_if = "Option::is_none")]
        innovation_cov: Option<CMat>,
    },
    StateSpace {
        #[serde(rename = "F", with = "matrix")]
        f: CMat,
        #[serde(rename = "G", with = "matrix")]
        g: CMat,
        #[serde(rename = "H", with = "matrix")]
        h: CMat,
        #[serde(rename = "D", with = "matrix")]
        d: CMat,
        #[serde(default, with = "matrix_opt", skip_serializing_if = "Option::is_none")]
        innovation_cov: Option<CMat>,
    },
}

impl Default for TruthModel {
    fn default() -> Self {
        Self::WhiteNoise { innovation_cov: None }
    }
}

impl TruthModel {
    fn innovation_cov(&self, m: usize) -> CMat {
        match self {
            Self::WhiteNoise { innovation_cov } | Self::StateSpace { innovation_cov, .. } => {
                innovation_cov.clone().unwrap_or_else(|| identity(m))
            }
        }
    }

    fn matrices(&self) -> Vec<&CMat> {
        match self {
            Self::WhiteNoise { innovation_cov } => innovation_cov.iter().collect(),
            Self::StateSpace { f, g, h, d, innovation_cov } => {
                let mut out = vec![f, g, h, d];
                out.extend(innovation_cov.iter());
                out
            }
        }
    }

    /// Checks shapes against the signal dimension `m`, stability of `F`,
    /// invertibility of `D` and positivity of the innovation covariance.
    pub fn validate(&self, m: usize) -> Result<()> {
        let cov = hermitize(&self.innovation_cov(m));
        if cov.shape() != (m, m) {
            return Err(Error::DimensionMismatch(format!("innovation covariance must be {m}x{m}")));
        }
        if !(linalg::min_hermitian_eigenvalue(&cov) > 0.0) {
            return Err(Error::InvalidInput("innovation covariance is not positive definite".into()));
        }
        if let Self::StateSpace { f, g, h, d, .. } = self {
            let k = f.nrows();
            if f.ncols() != k || g.shape() != (k, m) || h.shape() != (m, k) || d.shape() != (m, m) {
                return Err(Error::DimensionMismatch(format!(
                    "truth model F {:?}, G {:?}, H {:?}, D {:?} do not fit m = {m}",
                    f.shape(),
                    g.shape(),
                    h.shape(),
                    d.shape()
                )));
            }
            let radius = linalg::spectral_radius(f)?;
            if radius >= 1.0 {
                return Err(Error::UnstableMatrix { radius });
            }
            let sv = linalg::singular_values(d);
            if !(sv.last().copied().unwrap_or(0.0) > 1e-12 * sv[0]) {
                return Err(Error::Singular("truth feedthrough D"));
            }
        }
        Ok(())
    }

    /// True spectrum `H(z) Ω H(z)*`.
    pub fn spectrum(&self, z: Complex64, m: usize) -> Result<CMat> {
        let cov = self.innovation_cov(m);
        let h = match self {
            Self::WhiteNoise { .. } => identity(m),
            Self::StateSpace { f, g, h, d, .. } => {
                let shifted = identity(f.nrows()) * z - f;
                h * linalg::lu_solve(&shifted, g, "zI − F")? + d
            }
        };
        Ok(hermitize(&(&h * cov * h.adjoint())))
    }
}

/// `{"fb": ..., "truth": ..., "T": ..., "seed": ..., "real_valued": ...}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub fb: FilterBankSpec,
    #[serde(default)]
    pub truth: TruthModel,
    #[serde(rename = "T")]
    pub samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub real_valued: bool,
    /// Overrides the default burn-in of `max(1000, 10n)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub fb: FilterBank,
    pub truth: TruthModel,
    pub samples: usize,
    pub seed: u64,
    pub real_valued: bool,
    pub burn_in: Option<usize>,
}

impl Scenario {
    /// White-noise truth with complex data.
    pub fn white(fb: FilterBank, samples: usize, seed: u64) -> Self {
        Self { fb, truth: TruthModel::default(), samples, seed, real_valued: false, burn_in: None }
    }

    pub fn from_spec(spec: ScenarioSpec) -> Result<Self> {
        Ok(Self {
            fb: spec.fb.build()?,
            truth: spec.truth,
            samples: spec.samples,
            seed: spec.seed,
            real_valued: spec.real_valued,
            burn_in: spec.burn_in,
        })
    }

    pub fn to_spec(&self) -> ScenarioSpec {
        ScenarioSpec {
            fb: FilterBankSpec::from(&self.fb),
            truth: self.truth.clone(),
            samples: self.samples,
            seed: self.seed,
            real_valued: self.real_valued,
            burn_in: self.burn_in,
        }
    }

    pub fn default_burn_in(&self) -> usize {
        1000.max(10 * self.fb.n())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationDiagnostics {
    #[serde(rename = "T")]
    pub samples: usize,
    pub burn_in: usize,
    pub min_eigenvalue: f64,
    pub trace: f64,
    /// Sample covariance of the signal `y`.
    #[serde(with = "matrix")]
    pub signal_covariance: CMat,
}

fn draw(rng: &mut ChaCha8Rng, m: usize, real: bool) -> CMat {
    if real {
        CMat::from_fn(m, 1, |_, _| Complex64::new(rng.sample(StandardNormal), 0.0))
    } else {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        CMat::from_fn(m, 1, |_, _| {
            Complex64::new(rng.sample::<f64, _>(StandardNormal) * s, rng.sample::<f64, _>(StandardNormal) * s)
        })
    }
}

/// Runs truth model and filter bank, returning `Σ̂ = (1/T) Σ x(t) x(t)*`.
pub fn simulate_scenario(sc: &Scenario) -> Result<(CMat, SimulationDiagnostics)> {
    if sc.samples < MIN_SAMPLES {
        return Err(Error::InvalidInput(format!("T = {} is below {MIN_SAMPLES}", sc.samples)));
    }
    let (n, m) = (sc.fb.n(), sc.fb.m());
    sc.truth.validate(m)?;
    if sc.real_valued {
        let complex = std::iter::once(sc.fb.a())
            .chain(std::iter::once(sc.fb.b()))
            .chain(sc.truth.matrices())
            .any(|x| x.iter().any(|z| z.im != 0.0));
        if complex {
            return Err(Error::InvalidInput("real_valued scenario with complex matrices".into()));
        }
    }
    let noise_factor = cholesky_lower(&hermitize(&sc.truth.innovation_cov(m)))?;
    let burn_in = sc.burn_in.unwrap_or_else(|| sc.default_burn_in());
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);

    let (a, b) = (sc.fb.a(), sc.fb.b());
    let mut x = CMat::zeros(n, 1);
    let mut xi = match &sc.truth {
        TruthModel::StateSpace { f, .. } => CMat::zeros(f.nrows(), 1),
        TruthModel::WhiteNoise { .. } => CMat::zeros(0, 1),
    };
    let mut sigma = CMat::zeros(n, n);
    let mut signal = CMat::zeros(m, m);
    for t in 0..burn_in + sc.samples {
        if t >= burn_in {
            sigma += &x * x.adjoint();
        }
        let e = &noise_factor * draw(&mut rng, m, sc.real_valued);
        let y = match &sc.truth {
            TruthModel::WhiteNoise { .. } => e,
            TruthModel::StateSpace { f, g, h, d, .. } => {
                let y = h * &xi + d * &e;
                xi = f * &xi + g * &e;
                y
            }
        };
        if t >= burn_in {
            signal += &y * y.adjoint();
        }
        x = a * &x + b * &y;
    }
    let t = sc.samples as f64;
    let sigma = hermitize(&sigma.unscale(t));
    let diagnostics = SimulationDiagnostics {
        samples: sc.samples,
        burn_in,
        min_eigenvalue: linalg::min_hermitian_eigenvalue(&sigma),
        trace: linalg::trace(&sigma).re,
        signal_covariance: hermitize(&signal.unscale(t)),
    };
    Ok((sigma, diagnostics))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetReport {
    /// `‖Σ̂ − Π(Σ̂)‖_F`
    pub distance: f64,
    pub relative_distance: f64,
    pub min_eigenvalue: f64,
    pub infeasible: bool,
}

/// Projects a sample covariance onto `im Γ`.
pub fn prepare_target(ms: &MomentSpace, sigma_hat: &CMat) -> (CMat, TargetReport) {
    let sigma_hat = hermitize(sigma_hat);
    let sigma = ms.project_im_gamma(&sigma_hat).matrix().clone();
    let distance = fro(&(&sigma_hat - &sigma));
    let norm = fro(&sigma_hat);
    let min_eigenvalue = linalg::min_hermitian_eigenvalue(&sigma);
    let report = TargetReport {
        distance,
        relative_distance: if norm > 0.0 { distance / norm } else { 0.0 },
        min_eigenvalue,
        infeasible: !(min_eigenvalue > 0.0),
    };
    (sigma, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, from_real_rows};
    use crate::numerics::GridSpec;

    fn shift_bank() -> FilterBank {
        FilterBank::new(from_real_rows(&[&[0.0, 0.0], &[1.0, 0.0]]), from_real_rows(&[&[1.0], &[0.0]])).unwrap()
    }

    #[test]
    fn white_noise_reaches_gramian() {
        let (sigma, diag) = simulate_scenario(&Scenario::white(shift_bank(), 100_000, 7)).unwrap();
        assert!(fro(&(&sigma - identity(2))) / 2f64.sqrt() <= 0.05);
        assert_eq!(diag.burn_in, 1000);
        let mut real = Scenario::white(shift_bank(), 100_000, 7);
        real.real_valued = true;
        let (sigma, _) = simulate_scenario(&real).unwrap();
        assert!(sigma.iter().all(|z| z.im == 0.0));
        assert!(fro(&(&sigma - identity(2))) / 2f64.sqrt() <= 0.05);
    }

    #[test]
    fn short_runs_are_psd_and_deterministic() {
        let sc = Scenario::white(shift_bank(), 100, 42);
        let (s1, _) = simulate_scenario(&sc).unwrap();
        let (s2, _) = simulate_scenario(&sc).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(linalg::hermitian_defect(&s1), 0.0);
        assert!(linalg::min_hermitian_eigenvalue(&s1) >= -1e-12);
        assert!(simulate_scenario(&Scenario::white(shift_bank(), 99, 1)).is_err());
    }

    #[test]
    fn unstable_truth_is_rejected() {
        let mut sc = Scenario::white(shift_bank(), 1000, 1);
        sc.truth = TruthModel::StateSpace {
            f: from_real_rows(&[&[1.2]]),
            g: from_real_rows(&[&[1.0]]),
            h: from_real_rows(&[&[1.0]]),
            d: from_real_rows(&[&[1.0]]),
            innovation_cov: None,
        };
        assert!(matches!(simulate_scenario(&sc), Err(Error::UnstableMatrix { .. })));
    }

    #[test]
    fn state_space_truth_spectrum() {
        // y = (1 + 0.5 z⁻¹) e, so Φ(e^{iθ}) = |1 + 0.5 e^{−iθ}|².
        let truth = TruthModel::StateSpace {
            f: from_real_rows(&[&[0.0]]),
            g: from_real_rows(&[&[1.0]]),
            h: from_real_rows(&[&[0.5]]),
            d: from_real_rows(&[&[1.0]]),
            innovation_cov: None,
        };
        let z = Complex64::from_polar(1.0, 0.8);
        let expected = (c(1.0, 0.0) + z.inv() * 0.5).norm_sqr();
        assert!((truth.spectrum(z, 1).unwrap()[(0, 0)].re - expected).abs() < 1e-14);
        // Scalar bank x(t+1) = y(t): Σ = E|y|² = 1.25.
        let fb = FilterBank::new(from_real_rows(&[&[0.0]]), from_real_rows(&[&[1.0]])).unwrap();
        let sc = Scenario { truth, ..Scenario::white(fb, 100_000, 3) };
        let (sigma, _) = simulate_scenario(&sc).unwrap();
        assert!((sigma[(0, 0)].re - 1.25).abs() < 0.05);
    }

    #[test]
    fn target_projection() {
        let fb = shift_bank();
        let ms = MomentSpace::build(&fb, GridSpec::new(64).unwrap(), 1e-9).unwrap();
        let (sigma, rep) = prepare_target(&ms, &identity(2));
        assert!(rep.distance <= 1e-12 && !rep.infeasible);
        assert!(fro(&(sigma - identity(2))) <= 1e-12);
        let kernel = &ms.kernel_basis()[0];
        let (sigma, rep) = prepare_target(&ms, &(identity(2) + kernel * c(0.01, 0.0)));
        assert!(fro(&(sigma - identity(2))) <= 1e-12);
        assert!((rep.distance - 0.01).abs() <= 1e-12);
        assert!(prepare_target(&ms, &-identity(2)).1.infeasible);
    }

    #[test]
    fn scenario_json_round_trip() {
        let text = r#"{"fb": {"A": [[0, 0], [1, 0]], "B": [[1], [0]]}, "T": 500, "seed": 9}"#;
        let spec: ScenarioSpec = serde_json::from_str(text).unwrap();
        let sc = Scenario::from_spec(spec.clone()).unwrap();
        assert_eq!(sc.truth, TruthModel::default());
        let back: ScenarioSpec = serde_json::from_str(&serde_json::to_string(&sc.to_spec()).unwrap()).unwrap();
        assert_eq!(back, spec);
    }
}
