//! Spectral factorization `G* Λ G = (CG)* (CG)` through the zero-weight DARE
//!
//! ```text
//! Π = A* Π A − A* Π B (B* Π B)⁻¹ B* Π A + Λ
//! ```
//!
//! for possibly indefinite `Λ ∈ ℒ₊`, and the factorization diffeomorphism
//! `h: Λ ↦ C = L⁻* B* P` with inverse `h⁻¹: C ↦ Π_{im Γ}(C* C)`.
//!
//! The stabilizing solution is read off the deflating subspace of the
//! `(2n + m)`-dimensional pencil `F − zE` with
//!
//! ```text
//!     [ A  0  B ]        [ I   0   0 ]
//! F = [ Λ −I  0 ],   E = [ 0  −A*  0 ]
//!     [ 0  0  0 ]        [ 0  −B*  0 ]
//! ```
//!
//! belonging to its `n` eigenvalues inside the unit disk. `E` is singular
//! (the input block carries `m` infinite eigenvalues), so the pencil is first
//! moved by a disk automorphism `z ↦ (z − μ)/(1 − μ̄z)`, which keeps every
//! deflating subspace and the inside/outside split while making all
//! eigenvalues finite.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterbank::FilterBank;
use crate::linalg::{self, fro, herm_inner, hermitize, identity, CMat, RMat};
use crate::moment_space::{membership_c_plus, FactorPoint, MomentSpace, ParameterPoint};
use crate::numerics::{qz::GeneralizedSchur, solve_discrete_lyapunov};

/// Candidate Möbius parameters; the one giving the best-conditioned `E − μ̄F` wins.
const MOBIUS_CANDIDATES: [(f64, f64); 5] = [(0.5, 0.3), (0.5, 2.1), (0.5, -1.7), (0.3, 1.0), (0.7, -0.4)];
const REFINEMENT_STEPS: usize = 4;

/// Stabilizing DARE solution and the derived factor.
#[derive(Clone, Debug)]
pub struct DareSolution {
    /// Stabilizing solution `P`.
    pub p: CMat,
    /// Lower triangular, real positive diagonal, `B* P B = L* L`.
    pub l: CMat,
    /// `C = L⁻* B* P`.
    pub c: CMat,
    /// `‖P − A*PA + A*PB(B*PB)⁻¹B*PA − Λ‖_F`.
    pub residual: f64,
    /// `ρ(A − B (CB)⁻¹ C A)`.
    pub closed_loop_radius: f64,
}

fn riccati_residual(fb: &FilterBank, lambda: &CMat, p: &CMat) -> Result<(CMat, CMat)> {
    let (a, b) = (fb.a(), fb.b());
    let bpb = b.adjoint() * p * b;
    let gain = linalg::lu_solve(&bpb, &(b.adjoint() * p * a), "B*PB")?;
    let closed = a - b * &gain;
    // A*PA − A*PB K + Λ − P, with K = (B*PB)⁻¹ B*PA.
    let residual = a.adjoint() * p * a - a.adjoint() * p * b * &gain + lambda - p;
    Ok((hermitize(&residual), closed))
}

pub fn solve_dare(fb: &FilterBank, lambda: &CMat) -> Result<DareSolution> {
    let (n, m) = (fb.n(), fb.m());
    if lambda.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!("Λ is {:?}, expected ({n}, {n})", lambda.shape())));
    }
    let lambda = hermitize(lambda);
    let (a, b) = (fb.a(), fb.b());
    let size = 2 * n + m;

    let mut f = CMat::zeros(size, size);
    f.view_mut((0, 0), (n, n)).copy_from(a);
    f.view_mut((0, 2 * n), (n, m)).copy_from(b);
    f.view_mut((n, 0), (n, n)).copy_from(&lambda);
    f.view_mut((n, n), (n, n)).copy_from(&-identity(n));
    let mut e = CMat::zeros(size, size);
    e.view_mut((0, 0), (n, n)).copy_from(&identity(n));
    e.view_mut((n, n), (n, n)).copy_from(&-a.adjoint());
    e.view_mut((2 * n, n), (m, n)).copy_from(&-b.adjoint());

    let mut candidates: Vec<(f64, CMat, CMat)> = MOBIUS_CANDIDATES
        .iter()
        .map(|&(r, phi)| {
            let mu = Complex64::from_polar(r, phi);
            let fm = &f - &e * mu;
            let em = &e - &f * mu.conj();
            let sv = linalg::singular_values(&em);
            let rcond = sv.last().copied().unwrap_or(0.0) / sv[0].max(f64::MIN_POSITIVE);
            (rcond, fm, em)
        })
        .collect();
    candidates.sort_by(|x, y| y.0.total_cmp(&x.0));
    // Defective eigenvalue clusters can stall QZ for one shift and not another.
    let mut schur = None;
    for (_, fm, em) in &candidates {
        match GeneralizedSchur::new(fm, em) {
            Ok(s) => {
                schur = Some(s);
                break;
            }
            Err(Error::QzNoConvergence) => continue,
            Err(err) => return Err(err),
        }
    }
    let mut schur = schur.ok_or(Error::QzNoConvergence)?;
    let inside = schur.reorder(|alpha, beta| alpha.norm() < beta.norm());
    if inside != n {
        return Err(Error::NoStabilizingSolution(format!(
            "{inside} pencil eigenvalues inside the unit disk, expected {n}"
        )));
    }
    let x1 = schur.z.view((0, 0), (n, n)).into_owned();
    let x2 = schur.z.view((n, 0), (n, n)).into_owned();
    let sv = linalg::singular_values(&x1);
    if sv.last().copied().unwrap_or(0.0) <= 1e-13 * sv[0] {
        return Err(Error::NoStabilizingSolution("deflating subspace has singular leading block".into()));
    }
    let mut p = hermitize(&linalg::lu_solve_right(&x1, &x2, "deflating subspace basis")?);

    // Newton polishing: Δ − A_c* Δ A_c = R(P).
    let (mut res, mut closed) = riccati_residual(fb, &lambda, &p)?;
    for _ in 0..REFINEMENT_STEPS {
        if fro(&res) <= 1e-14 * (1.0 + fro(&lambda)) {
            break;
        }
        let Ok(delta) = solve_discrete_lyapunov(&closed.adjoint(), &res) else { break };
        let candidate = hermitize(&(&p + delta));
        let Ok((cres, cclosed)) = riccati_residual(fb, &lambda, &candidate) else { break };
        if fro(&cres) >= fro(&res) {
            break;
        }
        (p, res, closed) = (candidate, cres, cclosed);
    }

    let bpb = hermitize(&(b.adjoint() * &p * b));
    if linalg::min_hermitian_eigenvalue(&bpb) <= 0.0 {
        return Err(Error::NoStabilizingSolution("B*PB is not positive definite".into()));
    }
    let l = linalg::cholesky_lower_right(&bpb)?;
    let c = linalg::lu_solve(&l.adjoint(), &(b.adjoint() * &p), "L*")?;
    let closed_loop_radius = linalg::spectral_radius(&closed)?;
    if closed_loop_radius >= 1.0 {
        return Err(Error::NoStabilizingSolution(format!("closed-loop spectral radius {closed_loop_radius}")));
    }
    Ok(DareSolution { p, l, c, residual: fro(&res), closed_loop_radius })
}

/// `W(z) = z C G(z) = C A (zI − A)⁻¹ B + C B`.
pub fn eval_w(fb: &FilterBank, c: &CMat, z: Complex64) -> Result<CMat> {
    Ok(c * fb.eval_g(z)? * z)
}

/// Largest grid deviation `max_k ‖G*ΛG − (CG)*(CG)‖_F`.
pub fn factorization_residual(ms: &MomentSpace, lambda: &CMat, c: &CMat) -> f64 {
    ms.g_samples()
        .iter()
        .map(|g| {
            let cg = c * g;
            fro(&(g.adjoint() * lambda * g - cg.adjoint() * cg))
        })
        .fold(0.0, f64::max)
}

/// `h: ℒ₊^Γ → 𝒞₊`.
///
/// Membership is verified on the grid with twice the points of `ms` before
/// the Riccati solve.
pub fn h_map(ms: &MomentSpace, lambda: &ParameterPoint) -> Result<FactorPoint> {
    let membership = ms.membership_l_plus_fine(lambda.matrix())?;
    if !membership.member {
        return Err(Error::NotInLPlus { margin: membership.margin });
    }
    let sol = solve_dare(ms.filter_bank(), lambda.matrix())?;
    ms.factor_point(&sol.c)
}

/// `h⁻¹: C ↦ Π_{im Γ}(C* C)`.
pub fn h_inverse(ms: &MomentSpace, c: &FactorPoint) -> Result<ParameterPoint> {
    let report = membership_c_plus(ms.filter_bank(), c.matrix());
    if !report.member {
        return Err(Error::NotInCPlus(format!(
            "diag(CB) = {:?}, closed-loop radius {:.6}",
            report.diag_cb, report.closed_loop_radius
        )));
    }
    let cm = c.matrix();
    Ok(ms.project_im_gamma(&(cm.adjoint() * cm)))
}

/// Jacobian of `h⁻¹` in the `(y → x)` coordinates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HInverseJacobian {
    /// Row-major `M x M` entries `∂x_j/∂y_k`.
    pub entries: Vec<Vec<f64>>,
    pub min_singular_value: f64,
    pub norm: f64,
}

impl HInverseJacobian {
    pub fn matrix(&self) -> RMat {
        let m = self.entries.len();
        RMat::from_fn(m, m, |i, j| self.entries[i][j])
    }
}

/// `∂x_j/∂y_k = ⟨Λ_j, C_k* C(y) + C(y)* C_k⟩`.
pub fn jacobian_h_inverse(ms: &MomentSpace, c: &FactorPoint) -> HInverseJacobian {
    let cm = c.matrix();
    let columns: Vec<DVector<f64>> = ms
        .c_basis()
        .iter()
        .map(|ck| {
            let sym = ck.adjoint() * cm + cm.adjoint() * ck;
            DVector::from_iterator(ms.dim(), ms.lambda_basis().iter().map(|lj| herm_inner(lj, &sym)))
        })
        .collect();
    let dim = ms.dim();
    let jac = RMat::from_fn(dim, dim, |j, k| columns[k][j]);
    let sv = jac.clone().svd(false, false).singular_values;
    let min_singular_value = sv.iter().copied().fold(f64::INFINITY, f64::min);
    HInverseJacobian {
        entries: (0..dim).map(|j| jac.row(j).iter().copied().collect()).collect(),
        min_singular_value,
        norm: jac.norm(),
    }
}
