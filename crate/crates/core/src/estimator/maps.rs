//! The parametric densities, the moment maps they induce and the
//! differentials of those maps.

use nalgebra::DVector;
use num_complex::Complex64;

use super::prior::{Prior, PriorKind};
use crate::error::{Error, Result};
use crate::linalg::{self, hermitize, CMat, RMat};
use crate::moment_space::{membership_c_plus, FactorPoint, MomentSpace, ParameterPoint};
use crate::numerics::{mean, MatrixFunctionSamples};
use crate::spectral_factor::h_map;

/// Either parametrization of the density family.
#[derive(Clone, Copy, Debug)]
pub enum DensityParameter<'a> {
    Lambda(&'a ParameterPoint),
    Factor(&'a FactorPoint),
}

impl<'a> From<&'a ParameterPoint> for DensityParameter<'a> {
    fn from(p: &'a ParameterPoint) -> Self {
        Self::Lambda(p)
    }
}

impl<'a> From<&'a FactorPoint> for DensityParameter<'a> {
    fn from(p: &'a FactorPoint) -> Self {
        Self::Factor(p)
    }
}

fn require_l_plus(ms: &MomentSpace, lambda: &CMat) -> Result<()> {
    let report = ms.membership_l_plus(lambda);
    if report.member {
        Ok(())
    } else {
        Err(Error::NotInLPlus { margin: report.margin })
    }
}

fn require_c_plus(ms: &MomentSpace, cm: &CMat) -> Result<()> {
    let report = membership_c_plus(ms.filter_bank(), cm);
    if report.member {
        Ok(())
    } else {
        Err(Error::NotInCPlus(format!(
            "diag(CB) = {:?}, closed-loop radius {:.6}",
            report.diag_cb, report.closed_loop_radius
        )))
    }
}

/// `(CG)⁻¹` at every grid point.
fn inverse_outer_factor(ms: &MomentSpace, cm: &CMat) -> Result<Vec<CMat>> {
    ms.g_samples()
        .iter()
        .map(|g| {
            let w = cm * g;
            w.try_inverse().ok_or(Error::Singular("C G(z)"))
        })
        .collect()
}

/// `(CG)⁻¹ Ψ (CG)⁻*` on the grid; `C` must already be in `𝒞₊`.
fn factor_density(ms: &MomentSpace, prior: &Prior, cm: &CMat) -> Result<Vec<CMat>> {
    let m = ms.filter_bank().m();
    Ok(inverse_outer_factor(ms, cm)?
        .iter()
        .enumerate()
        .map(|(k, winv)| hermitize(&(winv * prior.value(k, m) * winv.adjoint())))
        .collect())
}

/// `ψ (G* Λ G)⁻¹` on the grid; `Λ` must already be in `ℒ₊`.
fn scalar_density(ms: &MomentSpace, prior: &Prior, lambda: &CMat) -> Result<Vec<CMat>> {
    ms.g_samples()
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let s = hermitize(&(g.adjoint() * lambda * g));
            let inv = s.try_inverse().ok_or(Error::Singular("G* Λ G"))?;
            Ok(hermitize(&(inv * Complex64::new(prior.scalar_value(k), 0.0))))
        })
        .collect()
}

/// Samples of `Φ_Λ` or `Φ_C` on the grid of `ms`.
///
/// With a scalar prior and a `Λ` parameter the density is `ψ (G*ΛG)⁻¹`
/// directly; a matrix prior with a `Λ` parameter goes through `h`.
pub fn density_eval<'a>(
    ms: &MomentSpace,
    prior: &Prior,
    param: impl Into<DensityParameter<'a>>,
) -> Result<MatrixFunctionSamples> {
    prior.check(ms)?;
    let values = match (param.into(), prior.kind()) {
        (DensityParameter::Lambda(lambda), PriorKind::Scalar) => {
            require_l_plus(ms, lambda.matrix())?;
            scalar_density(ms, prior, lambda.matrix())?
        }
        (DensityParameter::Lambda(lambda), PriorKind::Matrix) => {
            let cp = h_map(ms, lambda)?;
            factor_density(ms, prior, cp.matrix())?
        }
        (DensityParameter::Factor(cp), _) => {
            require_c_plus(ms, cp.matrix())?;
            factor_density(ms, prior, cp.matrix())?
        }
    };
    MatrixFunctionSamples::hermitian(*ms.grid(), values)
}

/// `ω(Λ) = ∫ G Φ_Λ G*`.
pub fn omega_eval(ms: &MomentSpace, prior: &Prior, lambda: &ParameterPoint) -> Result<CMat> {
    ms.gamma_apply(&density_eval(ms, prior, lambda)?)
}

/// `τ(C) = ∫ G (CG)⁻¹ Ψ (CG)⁻* G*`.
pub fn tau_eval(ms: &MomentSpace, prior: &Prior, cp: &FactorPoint) -> Result<CMat> {
    ms.gamma_apply(&density_eval(ms, prior, cp)?)
}

/// `δτ(C; δC) = −∫ G [(CG)⁻¹ δC G Φ_C + Φ_C G* δC* (CG)⁻*] G*`.
pub fn differential_tau(ms: &MomentSpace, prior: &Prior, cp: &FactorPoint, dc: &CMat) -> Result<CMat> {
    prior.check(ms)?;
    if dc.shape() != cp.matrix().shape() {
        return Err(Error::DimensionMismatch(format!("δC is {:?}, expected {:?}", dc.shape(), cp.matrix().shape())));
    }
    require_c_plus(ms, cp.matrix())?;
    let m = ms.filter_bank().m();
    let winv = inverse_outer_factor(ms, cp.matrix())?;
    let terms: Vec<CMat> = ms
        .g_samples()
        .iter()
        .zip(&winv)
        .enumerate()
        .map(|(k, (g, wi))| {
            let phi = wi * prior.value(k, m) * wi.adjoint();
            let x = wi * dc * g * phi;
            -(g * (&x + x.adjoint()) * g.adjoint())
        })
        .collect();
    Ok(hermitize(&mean(&terms)?))
}

/// `δω̃(Λ; δΛ) = −∫ ψ G (G*ΛG)⁻¹ (G* δΛ G) (G*ΛG)⁻¹ G*` for scalar priors.
pub fn differential_omega_scalar(
    ms: &MomentSpace,
    prior: &Prior,
    lambda: &ParameterPoint,
    dlambda: &CMat,
) -> Result<CMat> {
    prior.check(ms)?;
    if prior.kind() != PriorKind::Scalar {
        return Err(Error::Unsupported("the scalar-prior differential needs a scalar prior".into()));
    }
    if dlambda.shape() != lambda.matrix().shape() {
        return Err(Error::DimensionMismatch(format!(
            "δΛ is {:?}, expected {:?}",
            dlambda.shape(),
            lambda.matrix().shape()
        )));
    }
    require_l_plus(ms, lambda.matrix())?;
    let terms: Vec<CMat> = ms
        .g_samples()
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let s = hermitize(&(g.adjoint() * lambda.matrix() * g));
            let h = g * s.try_inverse().ok_or(Error::Singular("G* Λ G"))?;
            Ok(-(&h * (g.adjoint() * dlambda * g) * h.adjoint()) * Complex64::new(prior.scalar_value(k), 0.0))
        })
        .collect::<Result<_>>()?;
    Ok(hermitize(&mean(&terms)?))
}

fn vec_of(m: &CMat) -> DVector<Complex64> {
    DVector::from_column_slice(m.as_slice())
}

/// Per-grid-point tables that turn the moment maps and their Jacobians into
/// small dense products in coordinates.
///
/// Column `j` of `pullbacks[k]` is `vec(G_k* Λ_j G_k)`, so for any `m x m`
/// matrix `X` the coordinates of `∫ G X G*` are `mean_k Re(P_k* vec X_k)`.
pub(crate) struct Workspace<'a> {
    pub ms: &'a MomentSpace,
    pub prior: &'a Prior,
    pullbacks: Vec<CMat>,
    /// Column `l` of `factor_images[k]` is `vec(C_l G_k)`.
    factor_images: Vec<CMat>,
}

pub(crate) struct ScalarState {
    pub value: DVector<f64>,
    pub margin: f64,
    inverses: Vec<CMat>,
}

pub(crate) struct FactorState {
    pub value: DVector<f64>,
    winv: Vec<CMat>,
    densities: Vec<CMat>,
}

impl<'a> Workspace<'a> {
    pub fn new(ms: &'a MomentSpace, prior: &'a Prior) -> Result<Self> {
        prior.check(ms)?;
        let dim = ms.dim();
        let m = ms.filter_bank().m();
        let stack = |mats: &mut dyn Iterator<Item = CMat>| {
            let mut out = CMat::zeros(m * m, dim);
            for (j, x) in mats.enumerate() {
                out.column_mut(j).copy_from_slice(x.as_slice());
            }
            out
        };
        let pullbacks =
            ms.g_samples().iter().map(|g| stack(&mut ms.lambda_basis().iter().map(|l| g.adjoint() * l * g))).collect();
        let factor_images = match prior.kind() {
            PriorKind::Matrix => {
                ms.g_samples().iter().map(|g| stack(&mut ms.c_basis().iter().map(|cl| cl * g))).collect()
            }
            PriorKind::Scalar => Vec::new(),
        };
        Ok(Self { ms, prior, pullbacks, factor_images })
    }

    fn coords_of_gamma(&self, values: &[CMat]) -> DVector<f64> {
        let mut acc = DVector::zeros(self.ms.dim());
        for (p, v) in self.pullbacks.iter().zip(values) {
            acc += (p.adjoint() * vec_of(v)).map(|z| z.re);
        }
        acc.unscale(values.len() as f64)
    }

    /// `ω̃(Λ(x))` in coordinates, with the grid margin of `G*ΛG`.
    pub fn scalar_eval(&self, x: &DVector<f64>) -> Result<ScalarState> {
        let m = self.ms.filter_bank().m();
        let xc = x.map(|v| Complex64::new(v, 0.0));
        let mut margin = f64::INFINITY;
        let mut inverses = Vec::with_capacity(self.pullbacks.len());
        for (k, p) in self.pullbacks.iter().enumerate() {
            let s = CMat::from_column_slice(m, m, (p * &xc).as_slice());
            let s = hermitize(&s);
            margin = margin.min(linalg::min_hermitian_eigenvalue(&s));
            if !(margin > 0.0) {
                return Err(Error::NotInLPlus { margin });
            }
            let inv = s.try_inverse().ok_or(Error::Singular("G* Λ G"))?;
            inverses.push(inv * Complex64::new(self.prior.scalar_value(k), 0.0));
        }
        Ok(ScalarState { value: self.coords_of_gamma(&inverses), margin, inverses })
    }

    /// `∂ω̃_j/∂x_i = −mean ψ tr(P_j Q P_i Q)` with `Q = (G*ΛG)⁻¹`.
    pub fn scalar_jacobian(&self, state: &ScalarState) -> RMat {
        let dim = self.ms.dim();
        let mut acc = RMat::zeros(dim, dim);
        for (k, (p, qpsi)) in self.pullbacks.iter().zip(&state.inverses).enumerate() {
            let psi = self.prior.scalar_value(k);
            // ψQ ⊗ ψQ carries ψ², so divide once.
            let kron = qpsi.transpose().kronecker(qpsi);
            let block = p.adjoint() * kron * p;
            acc -= block.map(|z| z.re / psi);
        }
        let n = self.pullbacks.len() as f64;
        (&acc + acc.transpose()).scale(0.5 / n)
    }

    /// `τ(C(y))` in coordinates; `C(y)` must lie in `𝒞₊` with diagonal of
    /// `CB` at least `guard`.
    pub fn factor_eval(&self, y: &DVector<f64>, guard: f64) -> Result<FactorState> {
        let m = self.ms.filter_bank().m();
        let cp = self.ms.c_from_coords(y);
        let factor = cp.matrix();
        let report = membership_c_plus(self.ms.filter_bank(), factor);
        let diag_min = report.diag_cb.iter().map(|d| d[0]).fold(f64::INFINITY, f64::min);
        if !report.member || diag_min < guard || report.closed_loop_radius > 1.0 - guard {
            return Err(Error::NotInCPlus(format!(
                "min diag(CB) = {diag_min:.3e}, closed-loop radius {:.6}",
                report.closed_loop_radius
            )));
        }
        let winv = inverse_outer_factor(self.ms, factor)?;
        let densities: Vec<CMat> =
            winv.iter().enumerate().map(|(k, wi)| wi * self.prior.value(k, m) * wi.adjoint()).collect();
        Ok(FactorState { value: self.coords_of_gamma(&densities), winv, densities })
    }

    /// `∂τ_j/∂y_l = −2 mean Re tr(P_j (CG)⁻¹ C_l G Φ)`.
    pub fn factor_jacobian(&self, state: &FactorState) -> RMat {
        let dim = self.ms.dim();
        let mut acc = RMat::zeros(dim, dim);
        for ((p, d), (wi, phi)) in
            self.pullbacks.iter().zip(&self.factor_images).zip(state.winv.iter().zip(&state.densities))
        {
            let kron = phi.transpose().kronecker(wi);
            acc -= (p.adjoint() * kron * d).map(|z| 2.0 * z.re);
        }
        acc.unscale(self.pullbacks.len() as f64)
    }
}
