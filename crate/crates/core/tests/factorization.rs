mod common;

use common::*;
use spectramoment::linalg::{self, fro, lower_triangular_defect};
use spectramoment::spectral_factor::solve_dare;

/// The Riccati route and the block-Toeplitz route are independent; they must
/// land on the same normalized factor.
#[test]
fn riccati_factor_matches_toeplitz_factorization() {
    let mut r = rng(4242);
    let mut worst: f64 = 0.0;
    for i in 0..30 {
        let ms = random_space(&mut r, 256);
        let fb = ms.filter_bank();
        let lam = random_lambda(&ms, &mut r, i % 2 == 0);
        let sol = solve_dare(fb, lam.matrix()).unwrap();
        let oracle = bauer_factor(fb, lam.matrix(), 160, fb.n() + 2);
        worst = worst.max(fro(&(&oracle - &sol.c)) / fro(&sol.c));
    }
    assert!(worst <= 1e-6, "Riccati vs Toeplitz factor: {worst:.2e}");
}

#[test]
fn factor_normalization_and_stability() {
    let mut r = rng(77);
    for i in 0..40 {
        let ms = random_space(&mut r, 256);
        let fb = ms.filter_bank();
        let lam = random_lambda(&ms, &mut r, i % 3 == 0);
        let sol = solve_dare(fb, lam.matrix()).unwrap();
        let cb = &sol.c * fb.b();
        assert!(lower_triangular_defect(&cb) <= 1e-12 * fro(&cb));
        assert!((0..fb.m()).all(|k| cb[(k, k)].re > 0.0 && cb[(k, k)].im.abs() <= 1e-12 * fro(&cb)));
        // B*PB = L*L with L lower triangular.
        let bpb = fb.b().adjoint() * &sol.p * fb.b();
        assert!(fro(&(linalg::hermitize(&bpb) - sol.l.adjoint() * &sol.l)) <= 1e-10 * (1.0 + fro(&bpb)));
        assert!(sol.closed_loop_radius < 1.0);
    }
}
