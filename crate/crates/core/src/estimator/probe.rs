//! Empirical check of the prior condition
//! `trace ∫ F* Ψ F = trace ∫ F Ψ F*` with `F = V G (CG)⁻¹`, `C ∈ 𝒞₊`, `V ∈ 𝔠`.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::prior::Prior;
use crate::error::{Error, Result};
use crate::io::matrix;
use crate::linalg::{self, fro, CMat};
use crate::moment_space::{membership_c_plus, MomentSpace};
use crate::spectral_factor::h_map;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeWitness {
    #[serde(rename = "C", with = "matrix")]
    pub c: CMat,
    #[serde(rename = "V", with = "matrix")]
    pub v: CMat,
    /// `trace ∫ F* Ψ F`
    pub lhs: f64,
    /// `trace ∫ F Ψ F*`
    pub rhs: f64,
}

impl ProbeWitness {
    pub fn gap(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }

    /// `max(1, |lhs|, |rhs|)`
    pub fn scale(&self) -> f64 {
        1f64.max(self.lhs.abs()).max(self.rhs.abs())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub trials: usize,
    pub max_gap: f64,
    /// Largest `gap / scale` over all pairs.
    pub max_relative_gap: f64,
    pub worst: ProbeWitness,
}

impl ProbeReport {
    pub fn holds(&self, rel_tol: f64) -> bool {
        self.max_relative_gap <= rel_tol
    }
}

/// Both traces for one `(C, V)` pair.
pub fn probe_pair(ms: &MomentSpace, prior: &Prior, c: &CMat, v: &CMat) -> Result<ProbeWitness> {
    prior.check(ms)?;
    let (m, n) = (ms.filter_bank().m(), ms.filter_bank().n());
    if c.shape() != (m, n) || v.shape() != (m, n) {
        return Err(Error::DimensionMismatch(format!("C and V must be {m}x{n}")));
    }
    if !membership_c_plus(ms.filter_bank(), c).member {
        return Err(Error::NotInCPlus("probe factor is not in 𝒞₊".into()));
    }
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for (k, g) in ms.g_samples().iter().enumerate() {
        let wi = (c * g).try_inverse().ok_or(Error::Singular("C G(z)"))?;
        let f = v * g * wi;
        let psi = prior.value(k, m);
        lhs += linalg::trace(&(f.adjoint() * &psi * &f)).re;
        rhs += linalg::trace(&(&f * &psi * f.adjoint())).re;
    }
    let count = ms.g_samples().len() as f64;
    Ok(ProbeWitness { c: c.clone(), v: v.clone(), lhs: lhs / count, rhs: rhs / count })
}

/// Random `C = h(Π(R))` for Hermitian positive definite `R`, unit-norm `V`.
fn random_pair(ms: &MomentSpace, rng: &mut ChaCha8Rng) -> Result<(CMat, CMat)> {
    let n = ms.filter_bank().n();
    let lambda = ms.project_im_gamma(&linalg::random_hpd(rng, n, 0.1));
    let c = h_map(ms, &lambda)?.matrix().clone();
    let coords = DVector::from_fn(ms.dim(), |_, _| StandardNormal.sample(rng));
    let v = ms.c_from_coords(&coords).matrix().clone();
    let norm = fro(&v);
    Ok((c, v.unscale(norm)))
}

/// Probes `trials` random pairs plus any `extra` pairs.
pub fn prior_condition_probe(
    ms: &MomentSpace,
    prior: &Prior,
    trials: usize,
    seed: u64,
    extra: &[(CMat, CMat)],
) -> Result<ProbeReport> {
    if trials == 0 {
        return Err(Error::InvalidOption("trials must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = extra.to_vec();
    for _ in 0..trials {
        pairs.push(random_pair(ms, &mut rng)?);
    }
    let mut worst: Option<ProbeWitness> = None;
    let (mut max_gap, mut max_relative_gap) = (0.0f64, -1.0f64);
    for (c, v) in &pairs {
        let w = probe_pair(ms, prior, c, v)?;
        max_gap = max_gap.max(w.gap());
        let rel = w.gap() / w.scale();
        if rel > max_relative_gap {
            max_relative_gap = rel;
            worst = Some(w);
        }
    }
    Ok(ProbeReport { trials: pairs.len(), max_gap, max_relative_gap, worst: worst.expect("at least one pair") })
}
