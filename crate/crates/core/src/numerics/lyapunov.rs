use crate::error::{Error, Result};
use crate::linalg::{fro, hermitian_defect, hermitize, lu_solve, spectral_radius, CMat, ONE, ZERO};

/// Largest dimension solved through the dense Kronecker system.
const DIRECT_MAX_N: usize = 12;
const STABILITY_MARGIN: f64 = 1e-10;

/// Solves the Stein equation `X − A X A* = Q` for Schur-stable `A`.
///
/// Small problems go through the `n² x n²` Kronecker system; larger ones
/// through Smith's squaring iteration `X ← X + A_k X A_k*`, `A_k ← A_k²`.
pub fn solve_discrete_lyapunov(a: &CMat, q: &CMat) -> Result<CMat> {
    let n = a.nrows();
    if a.ncols() != n || q.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!("Lyapunov: A is {:?}, Q is {:?}", a.shape(), q.shape())));
    }
    if n == 0 {
        return Ok(CMat::zeros(0, 0));
    }
    let radius = spectral_radius(a)?;
    if radius >= 1.0 - STABILITY_MARGIN {
        return Err(Error::UnstableMatrix { radius });
    }

    let x = if n <= DIRECT_MAX_N { kronecker_solve(a, q)? } else { smith(a, q) };
    if hermitian_defect(q) <= 1e-14 * (1.0 + fro(q)) {
        Ok(hermitize(&x))
    } else {
        Ok(x)
    }
}

fn kronecker_solve(a: &CMat, q: &CMat) -> Result<CMat> {
    let n = a.nrows();
    let nn = n * n;
    // Column-major vec: (A X A*)[i, j] = Σ_{k,l} A[i,k] X[k,l] conj(A[j,l]).
    let mut k = CMat::zeros(nn, nn);
    for j in 0..n {
        for i in 0..n {
            let row = i + n * j;
            for l in 0..n {
                let ajl = a[(j, l)].conj();
                if ajl == ZERO {
                    continue;
                }
                for kk in 0..n {
                    k[(row, kk + n * l)] -= a[(i, kk)] * ajl;
                }
            }
            k[(row, row)] += ONE;
        }
    }
    let rhs = CMat::from_column_slice(nn, 1, q.as_slice());
    let sol = lu_solve(&k, &rhs, "Kronecker Lyapunov system")?;
    Ok(CMat::from_column_slice(n, n, sol.as_slice()))
}

fn smith(a: &CMat, q: &CMat) -> CMat {
    let mut x = q.clone();
    let mut ak = a.clone();
    for _ in 0..128 {
        let increment = &ak * &x * ak.adjoint();
        x += &increment;
        ak = &ak * &ak;
        if fro(&increment) <= f64::EPSILON * fro(&x) && fro(&ak) < 1e-8 {
            break;
        }
    }
    x
}
