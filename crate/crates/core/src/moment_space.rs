//! Geometry of the moment operator `Γ: Φ ↦ ∫ G Φ G*` and its adjoint
//! `Γ*: X ↦ G* X G`.
//!
//! [`MomentSpace`] carries orthonormal bases of `im Γ` (under
//! `⟨X, Y⟩ = trace(XY)`), of its orthogonal complement `ker Γ*`, and of the
//! factor space `𝔠 = {C : CB lower triangular with real diagonal}` (under
//! `Re trace(C₁* C₂)`). Both parameter spaces have real dimension
//! `M = m(2n − m)`.

use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterbank::FilterBank;
use crate::linalg::{self, c, frob_inner, herm_inner, hermitize, lower_triangular_defect, CMat, RMat, I, ONE};
use crate::numerics::{mean, orthonormal_split, GridSpec, MatrixFunctionSamples};

/// Relative distance to `im Γ` accepted by [`MomentSpace::feasibility_check`].
pub const FEASIBILITY_DISTANCE_TOL: f64 = 1e-8;
/// Relative tolerance on the triangular structure of `CB` in `𝒞₊` checks.
pub const C_PLUS_STRUCTURE_TOL: f64 = 1e-10;

/// A Hermitian `Λ = Σ x_j Λ_j` in `im Γ` together with its coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterPoint {
    coords: DVector<f64>,
    matrix: CMat,
}

impl ParameterPoint {
    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }
}

/// A factor `C = Σ y_k C_k` in `𝔠` together with its coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorPoint {
    coords: DVector<f64>,
    matrix: CMat,
}

impl FactorPoint {
    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }
}

/// Result of an `ℒ₊` membership test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LPlusMembership {
    pub member: bool,
    /// Smallest eigenvalue of `G* Λ G` over the grid.
    pub margin: f64,
}

/// Result of a `𝒞₊` membership test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CPlusMembership {
    pub member: bool,
    pub diag_cb: Vec<[f64; 2]>,
    pub structure_defect: f64,
    /// `ρ(A − B (CB)⁻¹ C A)`; infinite when `CB` is singular.
    pub closed_loop_radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub min_eigenvalue: f64,
    pub relative_distance: f64,
    pub dimension: usize,
}

#[derive(Clone, Debug)]
pub struct MomentSpace {
    fb: FilterBank,
    grid: GridSpec,
    g: Arc<[CMat]>,
    lambda_basis: Vec<CMat>,
    kernel_basis: Vec<CMat>,
    c_basis: Vec<CMat>,
}

/// Orthonormal basis of `ℌ_n` under `trace(XY)`: diagonal units, then for
/// each `i < j` the symmetric and skew parts.
fn hermitian_basis(n: usize) -> Vec<CMat> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let mut e = CMat::zeros(n, n);
        e[(i, i)] = ONE;
        out.push(e);
    }
    for i in 0..n {
        for j in i + 1..n {
            let mut sym = CMat::zeros(n, n);
            sym[(i, j)] = c(s, 0.0);
            sym[(j, i)] = c(s, 0.0);
            out.push(sym);
            let mut skew = CMat::zeros(n, n);
            skew[(i, j)] = I * s;
            skew[(j, i)] = -I * s;
            out.push(skew);
        }
    }
    out
}

/// Flips the sign of `m` so its largest-modulus entry (first in row-major
/// order) has positive real part, or positive imaginary part when real.
fn fix_sign(m: &mut CMat) {
    let mut best = Complex64::new(0.0, 0.0);
    let mut best_abs = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            if v.norm() > best_abs * (1.0 + 1e-9) {
                best = v;
                best_abs = v.norm();
            }
        }
    }
    let key = if best.re.abs() > 1e-12 * best_abs { best.re } else { best.im };
    if key < 0.0 {
        *m = -m.clone();
    }
}

fn combine(basis: &[CMat], coords: &[f64]) -> CMat {
    let (r, cols) = basis[0].shape();
    let mut out = CMat::zeros(r, cols);
    for (b, &x) in basis.iter().zip(coords) {
        out += b * c(x, 0.0);
    }
    out
}

impl MomentSpace {
    /// Builds the bases from samples of `G` on `grid`.
    ///
    /// `im Γ` and `ker Γ*` come from splitting the real-linear map
    /// `X ↦ (G*(z_k) X G(z_k))_k` on an orthonormal basis of `ℌ_n`; the
    /// numerical kernel dimension must equal `n² − m(2n − m)`.
    pub fn build(fb: &FilterBank, grid: GridSpec, rank_tol: f64) -> Result<Self> {
        let (n, m) = (fb.n(), fb.m());
        if grid.len() < 4 * n {
            return Err(Error::InvalidGrid(format!(
                "grid of {} points is too coarse for n = {n} (need ≥ {})",
                grid.len(),
                4 * n
            )));
        }
        let g = fb.samples(&grid)?;
        let herm = hermitian_basis(n);

        // Columns: basis elements; rows: real and imaginary parts of every
        // entry of every sample.
        let block = 2 * m * m;
        let mut map = RMat::zeros(grid.len() * block, herm.len());
        for (col, e) in herm.iter().enumerate() {
            for (k, gk) in g.iter().enumerate() {
                let v = gk.adjoint() * e * gk;
                for (idx, z) in v.iter().enumerate() {
                    map[(k * block + 2 * idx, col)] = z.re;
                    map[(k * block + 2 * idx + 1, col)] = z.im;
                }
            }
        }
        let (range, kernel) = orthonormal_split(&map, rank_tol)?;
        let expected = m * (2 * n - m);
        if range.ncols() != expected {
            return Err(Error::MomentDimension { found: range.ncols(), expected });
        }
        let to_matrices = |basis: &RMat| -> Vec<CMat> {
            (0..basis.ncols())
                .map(|j| {
                    let coeffs: Vec<f64> = basis.column(j).iter().copied().collect();
                    let mut x = hermitize(&combine(&herm, &coeffs));
                    fix_sign(&mut x);
                    x
                })
                .collect()
        };
        let lambda_basis = to_matrices(&range);
        let kernel_basis = to_matrices(&kernel);
        let c_basis = factor_space_basis(fb)?;

        Ok(Self { fb: fb.clone(), grid, g, lambda_basis, kernel_basis, c_basis })
    }

    pub fn filter_bank(&self) -> &FilterBank {
        &self.fb
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Samples of `G` on the grid.
    pub fn g_samples(&self) -> &[CMat] {
        &self.g
    }

    /// Real dimension `M = m(2n − m)` of `im Γ` and of `𝔠`.
    pub fn dim(&self) -> usize {
        self.lambda_basis.len()
    }

    pub fn lambda_basis(&self) -> &[CMat] {
        &self.lambda_basis
    }

    pub fn kernel_basis(&self) -> &[CMat] {
        &self.kernel_basis
    }

    pub fn c_basis(&self) -> &[CMat] {
        &self.c_basis
    }

    /// Coordinates `⟨Λ_j, X⟩` of the projection of Hermitian `X` onto `im Γ`.
    pub fn lambda_coords(&self, x: &CMat) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.lambda_basis.iter().map(|b| herm_inner(b, x)))
    }

    pub fn lambda_from_coords(&self, coords: &DVector<f64>) -> ParameterPoint {
        ParameterPoint { matrix: combine(&self.lambda_basis, coords.as_slice()), coords: coords.clone() }
    }

    /// Coordinates `Re trace(C_k* C)`.
    pub fn c_coords(&self, cm: &CMat) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.c_basis.iter().map(|b| frob_inner(b, cm)))
    }

    pub fn c_from_coords(&self, coords: &DVector<f64>) -> FactorPoint {
        FactorPoint { matrix: combine(&self.c_basis, coords.as_slice()), coords: coords.clone() }
    }

    /// Wraps `C` as a [`FactorPoint`], rejecting matrices outside `𝔠`.
    pub fn factor_point(&self, cm: &CMat) -> Result<FactorPoint> {
        let (m, n) = (self.fb.m(), self.fb.n());
        if cm.shape() != (m, n) {
            return Err(Error::DimensionMismatch(format!("C is {:?}, expected ({m}, {n})", cm.shape())));
        }
        let point = self.c_from_coords(&self.c_coords(cm));
        let defect = linalg::fro(&(point.matrix() - cm));
        if defect > 1e-9 * (1.0 + linalg::fro(cm)) {
            return Err(Error::NotInCPlus(format!("C is not in 𝔠 (defect {defect:.3e})")));
        }
        Ok(point)
    }

    /// `Γ(Φ) = ∫ G Φ G*` by grid quadrature.
    pub fn gamma_apply(&self, density: &MatrixFunctionSamples) -> Result<CMat> {
        if density.grid().len() != self.grid.len() {
            return Err(Error::GridMismatch { expected: self.grid.len(), actual: density.grid().len() });
        }
        if !density.is_hermitian() {
            return Err(Error::InvalidInput("density samples must be Hermitian-flagged".into()));
        }
        let m = self.fb.m();
        if density.rows() != m {
            return Err(Error::DimensionMismatch(format!(
                "density is {}x{}, expected {m}x{m}",
                density.rows(),
                density.cols()
            )));
        }
        Ok(hermitize(&self.gamma_apply_values(density.values())))
    }

    pub(crate) fn gamma_apply_values(&self, phi: &[CMat]) -> CMat {
        let terms: Vec<CMat> = self.g.iter().zip(phi).map(|(g, p)| g * p * g.adjoint()).collect();
        mean(&terms).expect("grid is nonempty")
    }

    /// Samples of `Γ*(X) = G* X G` on the grid.
    pub fn gamma_adjoint(&self, x: &CMat) -> MatrixFunctionSamples {
        let values = self.g.iter().map(|g| hermitize(&(g.adjoint() * x * g))).collect();
        MatrixFunctionSamples::from_parts_unchecked(self.grid, values, true)
    }

    /// Orthogonal projection onto `im Γ`.
    pub fn project_im_gamma(&self, x: &CMat) -> ParameterPoint {
        let coords = self.lambda_coords(&hermitize(x));
        let mut p = self.lambda_from_coords(&coords);
        p.matrix = hermitize(&p.matrix);
        p
    }

    /// `ℒ₊` test on the quadrature grid.
    pub fn membership_l_plus(&self, lambda: &CMat) -> LPlusMembership {
        l_plus_margin(&self.g, lambda)
    }

    /// `ℒ₊` test on the grid with twice as many points.
    pub fn membership_l_plus_fine(&self, lambda: &CMat) -> Result<LPlusMembership> {
        match self.grid.doubled() {
            Some(fine) => Ok(l_plus_margin(&self.fb.samples(&fine)?, lambda)),
            None => Ok(self.membership_l_plus(lambda)),
        }
    }

    pub fn feasibility_check(&self, sigma: &CMat) -> FeasibilityReport {
        let sigma = hermitize(sigma);
        let min_eigenvalue = linalg::min_hermitian_eigenvalue(&sigma);
        let projected = self.project_im_gamma(&sigma);
        let norm = linalg::fro(&sigma);
        let relative_distance = if norm > 0.0 { linalg::fro(&(&sigma - projected.matrix())) / norm } else { 0.0 };
        FeasibilityReport {
            feasible: min_eigenvalue > 0.0 && relative_distance <= FEASIBILITY_DISTANCE_TOL,
            min_eigenvalue,
            relative_distance,
            dimension: self.dim(),
        }
    }
}

fn l_plus_margin(g: &[CMat], lambda: &CMat) -> LPlusMembership {
    let margin = g
        .iter()
        .map(|gk| linalg::min_hermitian_eigenvalue(&hermitize(&(gk.adjoint() * lambda * gk))))
        .fold(f64::INFINITY, f64::min);
    LPlusMembership { member: margin > 0.0, margin }
}

/// Orthonormal basis of `𝔠` from `C = [T₁ T₂] [B B⊥]⁻¹`, with `T₁` lower
/// triangular real-diagonal and `T₂` free.
fn factor_space_basis(fb: &FilterBank) -> Result<Vec<CMat>> {
    let (n, m) = (fb.n(), fb.m());
    let mut completed = CMat::zeros(n, n);
    completed.view_mut((0, 0), (n, m)).copy_from(fb.b());
    completed.view_mut((0, m), (n, n - m)).copy_from(&linalg::orthogonal_complement(fb.b()));
    let inv = linalg::lu_solve(&completed, &linalg::identity(n), "[B B⊥]")?;

    let mut generators = Vec::with_capacity(m * (2 * n - m));
    let unit = |i: usize, j: usize, v: Complex64| {
        let mut t = CMat::zeros(m, n);
        t[(i, j)] = v;
        t
    };
    for i in 0..m {
        for j in 0..n {
            if j == i {
                generators.push(unit(i, j, ONE));
            } else if j < i || j >= m {
                generators.push(unit(i, j, ONE));
                generators.push(unit(i, j, I));
            }
        }
    }

    // Orthonormalize in the real inner product Re trace(X* Y) via thin QR of
    // the real-vectorized generators.
    let dim = generators.len();
    let len = 2 * m * n;
    let mut stacked = RMat::zeros(len, dim);
    for (col, t) in generators.iter().enumerate() {
        let cm = t * &inv;
        for (idx, z) in cm.iter().enumerate() {
            stacked[(2 * idx, col)] = z.re;
            stacked[(2 * idx + 1, col)] = z.im;
        }
    }
    let q = stacked.qr().q();
    Ok((0..dim)
        .map(|col| {
            let mut cm = CMat::from_fn(m, n, |i, j| {
                let idx = i + m * j;
                c(q[(2 * idx, col)], q[(2 * idx + 1, col)])
            });
            fix_sign(&mut cm);
            cm
        })
        .collect())
}

/// Checks `C ∈ 𝒞₊`: `CB` lower triangular with real positive diagonal and
/// `A − B (CB)⁻¹ C A` Schur stable.
pub fn membership_c_plus(fb: &FilterBank, cm: &CMat) -> CPlusMembership {
    let cb = cm * fb.b();
    let m = fb.m();
    let diag_cb: Vec<[f64; 2]> = (0..m).map(|i| [cb[(i, i)].re, cb[(i, i)].im]).collect();
    let structure_defect = lower_triangular_defect(&cb) / (1.0 + linalg::fro(&cb));
    let positive = diag_cb.iter().all(|d| d[0] > 0.0);
    let closed_loop_radius = closed_loop_radius(fb, cm).unwrap_or(f64::INFINITY);
    CPlusMembership {
        member: positive && structure_defect <= C_PLUS_STRUCTURE_TOL && closed_loop_radius < 1.0,
        diag_cb,
        structure_defect,
        closed_loop_radius,
    }
}

/// `ρ(A − B (CB)⁻¹ C A)`.
pub fn closed_loop_radius(fb: &FilterBank, cm: &CMat) -> Result<f64> {
    let cb = cm * fb.b();
    let gain = linalg::lu_solve(&cb, &(cm * fb.a()), "CB")?;
    let closed = fb.a() - fb.b() * gain;
    linalg::spectral_radius(&closed)
}
