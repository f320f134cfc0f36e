//! The filter bank `G(z) = (zI − A)⁻¹B` driven by the observed signal.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, identity, CMat};
use crate::numerics::{solve_discrete_lyapunov, GridSpec};

/// Stability margin required of `A`: `ρ(A) ≤ 1 − STABILITY_MARGIN`.
pub const STABILITY_MARGIN: f64 = 1e-8;
/// `B` must satisfy `σ_min(B) > B_RANK_TOL · σ_max(B)`.
pub const B_RANK_TOL: f64 = 1e-10;
/// Relative rank tolerance for the reachability matrix.
pub const REACHABILITY_TOL: f64 = 1e-9;

type SampleCache = RwLock<HashMap<usize, Arc<[CMat]>>>;

/// A validated pair `(A, B)`: `A` Schur stable, `B` of full column rank and
/// `(A, B)` reachable.
#[derive(Clone)]
pub struct FilterBank {
    a: CMat,
    b: CMat,
    cache: Arc<SampleCache>,
}

impl fmt::Debug for FilterBank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FilterBank").field("a", &self.a).field("b", &self.b).finish()
    }
}

impl PartialEq for FilterBank {
    fn eq(&self, other: &Self) -> bool {
        self.a == other.a && self.b == other.b
    }
}

impl FilterBank {
    pub fn new(a: CMat, b: CMat) -> Result<Self> {
        let n = a.nrows();
        let m = b.ncols();
        if a.ncols() != n || b.nrows() != n {
            return Err(Error::DimensionMismatch(format!("A is {:?} and B is {:?}", a.shape(), b.shape())));
        }
        if m == 0 || n < m {
            return Err(Error::DimensionMismatch(format!("need n ≥ m ≥ 1, got n = {n}, m = {m}")));
        }
        if !linalg::is_finite(&a) || !linalg::is_finite(&b) {
            return Err(Error::NonFinite("filter bank"));
        }

        let radius = linalg::spectral_radius(&a)?;
        if radius > 1.0 - STABILITY_MARGIN {
            return Err(Error::NotSchurStable { radius });
        }

        let sv = linalg::singular_values(&b);
        let ratio = sv.last().copied().unwrap_or(0.0) / sv[0].max(f64::MIN_POSITIVE);
        if !(ratio > B_RANK_TOL) {
            return Err(Error::RankDeficientB { ratio });
        }

        let mut reach = CMat::zeros(n, n * m);
        let mut block = b.clone();
        for k in 0..n {
            reach.view_mut((0, k * m), (n, m)).copy_from(&block);
            block = &a * block;
        }
        let rank = linalg::numerical_rank(&reach, REACHABILITY_TOL);
        if rank < n {
            return Err(Error::Unreachable { rank, n });
        }

        Ok(Self { a, b, cache: Arc::default() })
    }

    /// Static bank `A = 0`, `B = I_m` realizing `G(z) = z⁻¹ I`.
    pub fn static_bank(m: usize) -> Result<Self> {
        Self::new(CMat::zeros(m, m), identity(m))
    }

    pub fn a(&self) -> &CMat {
        &self.a
    }

    pub fn b(&self) -> &CMat {
        &self.b
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Input (signal) dimension.
    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    /// True when `n = m`, `A = 0` and `B = I`.
    pub fn is_static(&self) -> bool {
        self.n() == self.m()
            && linalg::max_abs(&self.a) <= 1e-14
            && linalg::max_abs(&(&self.b - identity(self.m()))) <= 1e-14
    }

    /// `G(z) = (zI − A)⁻¹ B` for `z` on the unit circle.
    pub fn eval_g(&self, z: Complex64) -> Result<CMat> {
        if (z.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("|z| = {} is not on the unit circle", z.norm())));
        }
        self.resolvent_b(z)
    }

    pub(crate) fn resolvent_b(&self, z: Complex64) -> Result<CMat> {
        let n = self.n();
        let shifted = identity(n) * z - &self.a;
        linalg::lu_solve(&shifted, &self.b, "zI − A")
    }

    /// Samples of `G` on `grid`, computed once per grid size and shared.
    pub fn samples(&self, grid: &GridSpec) -> Result<Arc<[CMat]>> {
        if let Some(hit) = self.cache.read().expect("sample cache poisoned").get(&grid.len()) {
            return Ok(Arc::clone(hit));
        }
        let values: Vec<CMat> = grid.points().into_iter().map(|z| self.resolvent_b(z)).collect::<Result<_>>()?;
        let values: Arc<[CMat]> = values.into();
        let mut cache = self.cache.write().expect("sample cache poisoned");
        Ok(Arc::clone(cache.entry(grid.len()).or_insert(values)))
    }

    /// `∫ G G* = Σ_k A^k B B* (A*)^k`, the solution of `X − A X A* = B B*`.
    pub fn reachability_gramian(&self) -> Result<CMat> {
        let bb = &self.b * self.b.adjoint();
        solve_discrete_lyapunov(&self.a, &bb)
    }
}
