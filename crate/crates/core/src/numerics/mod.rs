//! Shared numerical kernels: unit-circle quadrature, the discrete Lyapunov
//! solver, rank-revealing orthonormal splitting and an ordered complex QZ.

mod lyapunov;
pub mod qz;
mod split;

pub use lyapunov::solve_discrete_lyapunov;
pub use split::{orthonormal_split, DEFAULT_RANK_TOL};

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{fro, CMat};

pub const DEFAULT_GRID_N: usize = 1024;
pub const DEFAULT_TOL_REFINE: f64 = 1e-10;
pub const MIN_GRID_N: usize = 8;
pub const MAX_GRID_N: usize = 65536;

/// Uniform grid `θ_k = 2πk/N − π`, `k = 0..N`, on the unit circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    n: usize,
    tol_refine: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { n: DEFAULT_GRID_N, tol_refine: DEFAULT_TOL_REFINE }
    }
}

impl GridSpec {
    pub fn new(n: usize) -> Result<Self> {
        Self::with_tolerance(n, DEFAULT_TOL_REFINE)
    }

    pub fn with_tolerance(n: usize, tol_refine: f64) -> Result<Self> {
        if !n.is_power_of_two() || !(MIN_GRID_N..=MAX_GRID_N).contains(&n) {
            return Err(Error::InvalidGrid(format!("N = {n} must be a power of two in [{MIN_GRID_N}, {MAX_GRID_N}]")));
        }
        if !(tol_refine > 0.0 && tol_refine.is_finite()) {
            return Err(Error::InvalidGrid(format!("tol_refine = {tol_refine} must be positive")));
        }
        Ok(Self { n, tol_refine })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tol_refine(&self) -> f64 {
        self.tol_refine
    }

    pub fn angle(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.n as f64 - PI
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.angle(k)).collect()
    }

    pub fn point(&self, k: usize) -> Complex64 {
        Complex64::from_polar(1.0, self.angle(k))
    }

    pub fn points(&self) -> Vec<Complex64> {
        (0..self.n).map(|k| self.point(k)).collect()
    }

    /// The grid with twice as many points, or `None` at the cap.
    ///
    /// Every point of `self` is the even-indexed point of the doubled grid.
    pub fn doubled(&self) -> Option<Self> {
        (self.n < MAX_GRID_N).then_some(Self { n: 2 * self.n, tol_refine: self.tol_refine })
    }
}

/// Samples of a `p x q` matrix-valued function on a [`GridSpec`].
#[derive(Clone, Debug)]
pub struct MatrixFunctionSamples {
    grid: GridSpec,
    values: Vec<CMat>,
    hermitian: bool,
}

impl MatrixFunctionSamples {
    pub fn new(grid: GridSpec, values: Vec<CMat>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        let shape = values[0].shape();
        if let Some(bad) = values.iter().find(|v| v.shape() != shape) {
            return Err(Error::DimensionMismatch(format!(
                "sample of shape {:?} among samples of shape {:?}",
                bad.shape(),
                shape
            )));
        }
        if !values.iter().all(crate::linalg::is_finite) {
            return Err(Error::NonFinite("function samples"));
        }
        Ok(Self { grid, values, hermitian: false })
    }

    /// Builds Hermitian-flagged samples, checking each sample's symmetry.
    pub fn hermitian(grid: GridSpec, values: Vec<CMat>) -> Result<Self> {
        let mut s = Self::new(grid, values)?;
        if s.rows() != s.cols() {
            return Err(Error::DimensionMismatch("Hermitian samples must be square".into()));
        }
        for v in &s.values {
            let defect = fro(&(v - v.adjoint()));
            if defect > 1e-12 * (1.0 + fro(v)) {
                return Err(Error::InvalidInput(format!("sample is not Hermitian (defect {defect:.3e})")));
            }
        }
        s.hermitian = true;
        Ok(s)
    }

    /// Samples `f(z_k)` at every grid point.
    pub fn from_fn(grid: GridSpec, f: impl Fn(Complex64) -> CMat) -> Result<Self> {
        Self::new(grid, grid.points().into_iter().map(f).collect())
    }

    pub(crate) fn from_parts_unchecked(grid: GridSpec, values: Vec<CMat>, hermitian: bool) -> Self {
        Self { grid, values, hermitian }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[CMat] {
        &self.values
    }

    pub fn into_values(self) -> Vec<CMat> {
        self.values
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn rows(&self) -> usize {
        self.values[0].nrows()
    }

    pub fn cols(&self) -> usize {
        self.values[0].ncols()
    }

    /// Largest Frobenius norm over the grid.
    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(fro).fold(0.0, f64::max)
    }
}

/// `∫ F dθ/2π` by the uniform-grid mean (periodic trapezoid rule).
pub fn integrate_circle(samples: &MatrixFunctionSamples) -> Result<CMat> {
    mean(samples.values())
}

/// Elementwise mean of equally shaped samples.
pub fn mean(values: &[CMat]) -> Result<CMat> {
    let first = values.first().ok_or_else(|| Error::InvalidInput("no samples".into()))?;
    let shape = first.shape();
    let mut acc = CMat::zeros(shape.0, shape.1);
    for v in values {
        if v.shape() != shape {
            return Err(Error::DimensionMismatch(format!(
                "sample of shape {:?} among samples of shape {:?}",
                v.shape(),
                shape
            )));
        }
        acc += v;
    }
    Ok(acc.unscale(values.len() as f64))
}

/// Integrates `f` over the circle, doubling the grid from `start` until the
/// relative change drops below `start.tol_refine()` or the grid cap is hit.
///
/// Returns the value and the grid it was accepted on.
pub fn integrate_adaptive(start: GridSpec, f: impl Fn(Complex64) -> CMat) -> Result<(CMat, GridSpec)> {
    let mut grid = start;
    let mut value = mean(&grid.points().into_iter().map(&f).collect::<Vec<_>>())?;
    while let Some(fine) = grid.doubled() {
        // The fine grid's even points coincide with the current grid.
        let odd: Vec<CMat> = (0..grid.len()).map(|k| f(fine.point(2 * k + 1))).collect();
        let refined = (&value + mean(&odd)?).scale(0.5);
        let change = fro(&(&refined - &value));
        value = refined;
        grid = fine;
        if change <= start.tol_refine() * fro(&value).max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok((value, grid))
}
