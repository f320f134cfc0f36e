#![allow(dead_code)]

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use spectramoment::estimator::{Prior, PriorKind, PriorSource, PriorSpec};
use spectramoment::filterbank::FilterBank;
use spectramoment::linalg::{self, c, fro, identity, random_complex, random_hpd, CMat, RMat};
use spectramoment::moment_space::{MomentSpace, ParameterPoint};
use spectramoment::numerics::{GridSpec, DEFAULT_RANK_TOL};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Reachability Gramians beyond this condition number are redrawn.
pub const MAX_GRAMIAN_CONDITION: f64 = 1e4;

/// Complex `(A, B)` with `ρ(A)` drawn from `[0.3, 0.9]` and a reachability
/// Gramian of condition number at most [`MAX_GRAMIAN_CONDITION`].
pub fn random_filter_bank(rng: &mut ChaCha8Rng, n: usize, m: usize) -> FilterBank {
    loop {
        let a = random_complex(rng, n, n);
        let rho = linalg::spectral_radius(&a).unwrap();
        let target = rng.random_range(0.3..0.9);
        let a = if rho > 0.0 { a * c(target / rho, 0.0) } else { a };
        let Ok(fb) = FilterBank::new(a, random_complex(rng, n, m)) else { continue };
        let ev = linalg::hermitian_eigenvalues(&fb.reachability_gramian().unwrap());
        if ev[ev.len() - 1] <= MAX_GRAMIAN_CONDITION * ev[0] {
            return fb;
        }
    }
}

/// `n ≤ 6`, `m ≤ min(3, n)`.
pub fn random_dims(rng: &mut ChaCha8Rng) -> (usize, usize) {
    let n = rng.random_range(1..=6);
    let m = rng.random_range(1..=n.min(3));
    (n, m)
}

pub fn random_space(rng: &mut ChaCha8Rng, grid_n: usize) -> MomentSpace {
    let (n, m) = random_dims(rng);
    let fb = random_filter_bank(rng, n, m);
    MomentSpace::build(&fb, GridSpec::new(grid_n).unwrap(), DEFAULT_RANK_TOL).unwrap()
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    linalg::hermitize(&random_complex(rng, n, n))
}

pub fn random_coords(rng: &mut ChaCha8Rng, dim: usize) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| StandardNormal.sample(rng))
}

/// A point of `ℒ₊ ∩ im Γ`: the projection of a positive definite seed,
/// pushed along a negative semidefinite direction in `im Γ` to 70% of the
/// distance to the boundary when `indefinite` is set.
pub fn random_lambda(ms: &MomentSpace, rng: &mut ChaCha8Rng, indefinite: bool) -> ParameterPoint {
    let n = ms.filter_bank().n();
    let base = ms.project_im_gamma(&random_hpd(rng, n, 0.2));
    if !indefinite {
        return base;
    }
    let u = random_complex(rng, n, 1);
    let dir = ms.project_im_gamma(&-(&u * u.adjoint()));
    let inside = |t: f64| ms.membership_l_plus(&(base.matrix() + dir.matrix() * c(t, 0.0))).member;
    let mut hi = 1.0;
    while inside(hi) && hi < 1e6 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if inside(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    ms.project_im_gamma(&(base.matrix() + dir.matrix() * c(0.7 * lo, 0.0)))
}

/// Positive scalar prior `r₀ + 2 Re(r₁ e^{iθ})` with `|r₁| ≤ 0.4 r₀`.
pub fn random_scalar_prior(ms: &MomentSpace, rng: &mut ChaCha8Rng) -> Prior {
    let r0 = rng.random_range(0.5..2.0);
    let r1 = Complex64::from_polar(rng.random_range(0.0..0.4) * r0, rng.random_range(-3.0..3.0));
    let spec = PriorSpec {
        kind: PriorKind::Scalar,
        source: PriorSource::Fourier(vec![linalg::diag_real(&[r0]), CMat::from_element(1, 1, r1)]),
    };
    Prior::from_spec(&spec, *ms.grid()).unwrap()
}

/// Matrix prior `R₀ + R₁ e^{iθ} + R₁* e^{−iθ}` with `R₀ ≥ 2‖R₁‖ I + HPD`.
pub fn random_matrix_prior(ms: &MomentSpace, rng: &mut ChaCha8Rng) -> Prior {
    let m = ms.filter_bank().m();
    let r1 = random_complex(rng, m, m) * c(0.3, 0.0);
    let r0 = random_hpd(rng, m, 0.5) + identity(m) * c(2.0 * fro(&r1), 0.0);
    let spec = PriorSpec { kind: PriorKind::Matrix, source: PriorSource::Fourier(vec![r0, r1]) };
    Prior::from_spec(&spec, *ms.grid()).unwrap()
}

/// Relative error `‖a − b‖ / max(‖b‖, floor)`.
pub fn rel(a: &DVector<f64>, b: &DVector<f64>, floor: f64) -> f64 {
    (a - b).norm() / b.norm().max(floor)
}

/// `[B, AB, …, A^{k−1}B]`
fn krylov(fb: &FilterBank, k: usize) -> CMat {
    let (n, m) = (fb.n(), fb.m());
    let mut out = CMat::zeros(n, k * m);
    let mut block = fb.b().clone();
    for j in 0..k {
        out.view_mut((0, j * m), (n, m)).copy_from(&block);
        block = fb.a() * block;
    }
    out
}

/// Outer factor of `S = G*ΛG` computed without any Riccati equation: the
/// Fourier coefficients of `S` form a block Toeplitz matrix whose block
/// Cholesky factor converges to the Markov parameters `W_i = C A^{i−1} B`
/// (`W_0 = CB`) of `W = zCG`; `C` is then recovered by least squares on
/// `C [B, AB, …] = [W_0, W_1, …]`.
pub fn bauer_factor(fb: &FilterBank, lambda: &CMat, blocks: usize, markov: usize) -> CMat {
    let (n, m) = (fb.n(), fb.m());
    let grid = GridSpec::new(4096).unwrap();
    let samples = fb.samples(&grid).unwrap();
    let s: Vec<CMat> = samples.iter().map(|g| linalg::hermitize(&(g.adjoint() * lambda * g))).collect();
    // Coefficient of z^{-j}: S_j = ∫ S e^{ijθ}.
    let coeff = |j: i64| -> CMat {
        let mut acc = CMat::zeros(m, m);
        for (k, sk) in s.iter().enumerate() {
            acc += sk * Complex64::from_polar(1.0, j as f64 * grid.angle(k));
        }
        acc.unscale(s.len() as f64)
    };
    let coeffs: Vec<CMat> = (-(blocks as i64)..=(blocks as i64)).map(coeff).collect();
    let t = |p: usize, q: usize| coeffs[(q as i64 - p as i64 + blocks as i64) as usize].clone();

    // T = U* U with U block upper triangular; diagonal blocks are lower
    // triangular in the `M = L* L` sense.
    let mut u = vec![vec![CMat::zeros(m, m); blocks]; blocks];
    for k in 0..blocks {
        let mut diag = t(k, k);
        for row in u.iter().take(k) {
            diag -= row[k].adjoint() * &row[k];
        }
        u[k][k] = linalg::cholesky_lower_right(&linalg::hermitize(&diag)).unwrap();
        let inv_adj = u[k][k].adjoint().try_inverse().unwrap();
        for q in k + 1..blocks {
            let mut rhs = t(k, q);
            for row in u.iter().take(k) {
                rhs -= row[k].adjoint() * &row[q];
            }
            u[k][q] = &inv_adj * rhs;
        }
    }
    let last = blocks - 1;
    let mut w = CMat::zeros(m, markov * m);
    for i in 0..markov {
        w.view_mut((0, i * m), (m, m)).copy_from(&u[last - i][last]);
    }
    let k = krylov(fb, markov);
    // C = W K⁺ via the normal equations on K K*.
    let kk = &k * k.adjoint();
    let rhs = &w * k.adjoint();
    let sol = kk.transpose().lu().solve(&rhs.transpose()).unwrap().transpose();
    assert_eq!(sol.shape(), (m, n));
    sol
}

/// Central difference of a vector-valued map in the direction `e_i`.
pub fn central_difference(
    f: impl Fn(&DVector<f64>) -> DVector<f64>,
    x: &DVector<f64>,
    i: usize,
    h: f64,
) -> DVector<f64> {
    let mut xp = x.clone();
    xp[i] += h;
    let mut xm = x.clone();
    xm[i] -= h;
    (f(&xp) - f(&xm)) / (2.0 * h)
}

pub fn smallest_singular_ratio(j: &RMat) -> (f64, f64) {
    let sv = j.clone().svd(false, false).singular_values;
    (sv.min(), sv.max())
}

pub struct Criterion {
    pub id: u32,
    pub name: &'static str,
}

impl Criterion {
    pub fn finish(&self, ok: bool, detail: String) {
        println!("[{}] criterion {:>2}: {} ({})", if ok { "PASS" } else { "FAIL" }, self.id, self.name, detail);
        assert!(ok, "criterion {} failed: {detail}", self.id);
    }
}
