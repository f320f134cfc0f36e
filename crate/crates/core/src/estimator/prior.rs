use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{matrix, matrix_vec};
use crate::linalg::{self, identity, CMat};
use crate::moment_space::MomentSpace;
use crate::numerics::{GridSpec, MatrixFunctionSamples};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorKind {
    /// `Ψ = ψ I_m` with scalar `ψ`.
    Scalar,
    Matrix,
}

/// How a prior is described in input files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorSource {
    Constant(#[serde(with = "matrix")] CMat),
    /// `[R₀, R₁, …, R_p]` with `Ψ(e^{iθ}) = R₀ + Σ_k (R_k e^{ikθ} + R_k* e^{−ikθ})`.
    Fourier(#[serde(with = "matrix_vec")] Vec<CMat>),
    /// Values at `θ_k = 2πk/N − π`; only usable on a grid of exactly `N` points.
    Samples(#[serde(with = "matrix_vec")] Vec<CMat>),
}

/// Prior file contents, e.g. `{"kind": "scalar", "constant": 1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub kind: PriorKind,
    #[serde(flatten)]
    pub source: PriorSource,
}

impl PriorSource {
    fn sample(&self, grid: &GridSpec) -> Result<Vec<CMat>> {
        match self {
            Self::Constant(m) => Ok(vec![m.clone(); grid.len()]),
            Self::Fourier(coeffs) => {
                if coeffs.is_empty() {
                    return Err(Error::InvalidInput("Fourier prior needs at least R₀".into()));
                }
                Ok(grid
                    .points()
                    .into_iter()
                    .map(|z| {
                        let mut acc = coeffs[0].clone();
                        let mut zk = Complex64::new(1.0, 0.0);
                        for r in &coeffs[1..] {
                            zk *= z;
                            acc += r * zk + r.adjoint() * zk.conj();
                        }
                        acc
                    })
                    .collect())
            }
            Self::Samples(values) => {
                if values.len() != grid.len() {
                    return Err(Error::GridMismatch { expected: grid.len(), actual: values.len() });
                }
                Ok(values.clone())
            }
        }
    }
}

/// A coercive prior density sampled on a grid.
#[derive(Clone, Debug)]
pub struct Prior {
    kind: PriorKind,
    samples: MatrixFunctionSamples,
    source: Option<PriorSource>,
}

impl Prior {
    /// Wraps samples; scalar priors take `1 x 1` samples.
    pub fn new(kind: PriorKind, samples: MatrixFunctionSamples) -> Result<Self> {
        if !samples.is_hermitian() {
            return Err(Error::InvalidInput("prior samples must be Hermitian-flagged".into()));
        }
        if kind == PriorKind::Scalar && samples.rows() != 1 {
            return Err(Error::DimensionMismatch(format!(
                "scalar prior needs 1x1 samples, got {}x{}",
                samples.rows(),
                samples.cols()
            )));
        }
        let worst = samples.values().iter().map(linalg::min_hermitian_eigenvalue).fold(f64::INFINITY, f64::min);
        if !(worst > 0.0) {
            return Err(Error::InvalidInput(format!(
                "prior is not positive definite on the grid (smallest eigenvalue {worst:.3e})"
            )));
        }
        Ok(Self { kind, samples, source: None })
    }

    pub fn from_spec(spec: &PriorSpec, grid: GridSpec) -> Result<Self> {
        let values = spec.source.sample(&grid)?;
        let mut prior = Self::new(spec.kind, MatrixFunctionSamples::hermitian(grid, values)?)?;
        prior.source = Some(spec.source.clone());
        Ok(prior)
    }

    pub fn constant_scalar(grid: GridSpec, psi: f64) -> Result<Self> {
        let spec = PriorSpec { kind: PriorKind::Scalar, source: PriorSource::Constant(linalg::diag_real(&[psi])) };
        Self::from_spec(&spec, grid)
    }

    pub fn constant_matrix(grid: GridSpec, psi: CMat) -> Result<Self> {
        Self::from_spec(&PriorSpec { kind: PriorKind::Matrix, source: PriorSource::Constant(psi) }, grid)
    }

    /// Same prior on another grid, when the description allows it.
    pub fn resample(&self, grid: GridSpec) -> Option<Self> {
        let source = self.source.as_ref()?;
        Self::from_spec(&PriorSpec { kind: self.kind, source: source.clone() }, grid).ok()
    }

    pub fn kind(&self) -> PriorKind {
        self.kind
    }

    pub fn samples(&self) -> &MatrixFunctionSamples {
        &self.samples
    }

    /// `Ψ(z_k)` as an `m x m` matrix.
    pub fn value(&self, k: usize, m: usize) -> CMat {
        let v = &self.samples.values()[k];
        match self.kind {
            PriorKind::Scalar => identity(m) * v[(0, 0)],
            PriorKind::Matrix => v.clone(),
        }
    }

    /// `ψ(z_k)` for scalar priors.
    pub(crate) fn scalar_value(&self, k: usize) -> f64 {
        self.samples.values()[k][(0, 0)].re
    }

    /// Checks grid and size compatibility with `ms`.
    pub fn check(&self, ms: &MomentSpace) -> Result<()> {
        if self.samples.grid().len() != ms.grid().len() {
            return Err(Error::GridMismatch { expected: ms.grid().len(), actual: self.samples.grid().len() });
        }
        if self.kind == PriorKind::Matrix && self.samples.rows() != ms.filter_bank().m() {
            return Err(Error::DimensionMismatch(format!(
                "prior is {}x{}, filter bank has m = {}",
                self.samples.rows(),
                self.samples.cols(),
                ms.filter_bank().m()
            )));
        }
        Ok(())
    }

    /// `R = ∫ Ψ` as an `m x m` matrix.
    pub fn mean(&self, m: usize) -> CMat {
        let n = self.samples.grid().len();
        let total = (0..n).fold(CMat::zeros(m, m), |acc, k| acc + self.value(k, m));
        linalg::hermitize(&total.unscale(n as f64))
    }
}
