//! Small dense complex linear-algebra helpers shared across the crate.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::qz;

pub type CMat = DMatrix<Complex64>;
pub type RMat = DMatrix<f64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Complex matrix from real entries given row by row.
pub fn from_real_rows(rows: &[&[f64]]) -> CMat {
    let r = rows.len();
    let cols = rows.first().map_or(0, |row| row.len());
    CMat::from_fn(r, cols, |i, j| c(rows[i][j], 0.0))
}

pub fn real_to_complex(m: &RMat) -> CMat {
    m.map(|x| c(x, 0.0))
}

pub fn diag_real(d: &[f64]) -> CMat {
    let n = d.len();
    CMat::from_fn(n, n, |i, j| if i == j { c(d[i], 0.0) } else { ZERO })
}

/// Frobenius norm.
pub fn fro(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn is_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

pub fn hermitian_defect(m: &CMat) -> f64 {
    fro(&(m - m.adjoint()))
}

/// Real inner product `Re trace(X Y)` on Hermitian matrices.
pub fn herm_inner(x: &CMat, y: &CMat) -> f64 {
    debug_assert_eq!(x.shape(), y.shape());
    let n = x.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..n {
            acc += (x[(i, k)] * y[(k, i)]).re;
        }
    }
    acc
}

/// Real inner product `Re trace(X* Y)` on general complex matrices.
pub fn frob_inner(x: &CMat, y: &CMat) -> f64 {
    debug_assert_eq!(x.shape(), y.shape());
    x.iter().zip(y.iter()).map(|(a, b)| (a.conj() * b).re).sum()
}

/// `trace(X Y)` without forming the product.
pub fn trace_product(x: &CMat, y: &CMat) -> Complex64 {
    let n = x.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..x.ncols() {
            acc += x[(i, k)] * y[(k, i)];
        }
    }
    acc
}

pub fn trace(m: &CMat) -> Complex64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    match m.nrows() {
        0 => Vec::new(),
        1 => vec![m[(0, 0)].re],
        2 => {
            let a = m[(0, 0)].re;
            let d = m[(1, 1)].re;
            let b = m[(0, 1)];
            let mean = 0.5 * (a + d);
            let rad = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
            vec![mean - rad, mean + rad]
        }
        _ => {
            let mut ev: Vec<f64> = hermitize(m).symmetric_eigenvalues().iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            ev
        }
    }
}

pub fn min_hermitian_eigenvalue(m: &CMat) -> f64 {
    hermitian_eigenvalues(m).first().copied().unwrap_or(f64::INFINITY)
}

/// Eigenvalues of a general square complex matrix.
pub fn eigenvalues(m: &CMat) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![m[(0, 0)]]);
    }
    let schur = qz::GeneralizedSchur::new(m, &identity(n))?;
    Ok(schur.eigenvalues())
}

/// Spectral radius; the empty matrix has radius 0.
pub fn spectral_radius(m: &CMat) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn numerical_rank(m: &CMat, rel_tol: f64) -> usize {
    let s = singular_values(m);
    let Some(&smax) = s.first() else { return 0 };
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > rel_tol * smax).count()
}

/// Solves `A X = B` by LU with partial pivoting.
pub fn lu_solve(a: &CMat, b: &CMat, what: &'static str) -> Result<CMat> {
    a.clone().lu().solve(b).ok_or(Error::Singular(what))
}

/// Solves `X A = B`.
pub fn lu_solve_right(a: &CMat, b: &CMat, what: &'static str) -> Result<CMat> {
    Ok(lu_solve(&a.adjoint(), &b.adjoint(), what)?.adjoint())
}

/// Standard lower Cholesky factor `L` with `M = L L*`.
pub fn cholesky_lower(m: &CMat) -> Result<CMat> {
    nalgebra::Cholesky::new(hermitize(m))
        .map(|ch| ch.unpack())
        .ok_or(Error::Singular("Cholesky (matrix not positive definite)"))
}

/// Lower triangular `L` with real positive diagonal such that `M = L* L`.
///
/// Obtained from the ordinary Cholesky factor of the index-reversed matrix.
pub fn cholesky_lower_right(m: &CMat) -> Result<CMat> {
    let n = m.nrows();
    let flip = |x: &CMat| CMat::from_fn(n, n, |i, j| x[(n - 1 - i, n - 1 - j)]);
    let k = cholesky_lower(&flip(m))?;
    Ok(flip(&k.adjoint()))
}

/// Lower-triangularity defect: largest modulus strictly above the diagonal
/// together with the largest imaginary part on the diagonal.
pub fn lower_triangular_defect(m: &CMat) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > i {
                worst = worst.max(m[(i, j)].norm());
            } else if j == i {
                worst = worst.max(m[(i, j)].im.abs());
            }
        }
    }
    worst
}

/// Orthonormal basis of the orthogonal complement of the column space of a
/// full-column-rank `n x m` matrix, as an `n x (n - m)` matrix.
pub fn orthogonal_complement(b: &CMat) -> CMat {
    let (n, m) = b.shape();
    if n == m {
        return CMat::zeros(n, 0);
    }
    // Left singular vectors of the padded square matrix [B 0] beyond rank m.
    let mut padded = CMat::zeros(n, n);
    padded.view_mut((0, 0), (n, m)).copy_from(b);
    let svd = padded.svd(true, false);
    let u = svd.u.expect("requested U");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let mut out = CMat::zeros(n, n - m);
    for (col, &k) in order[m..].iter().enumerate() {
        out.set_column(col, &u.column(k));
    }
    out
}

/// Random complex matrix with i.i.d. standard complex Gaussian entries.
pub fn random_complex<R: rand::Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    use rand_distr::{Distribution, StandardNormal};
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c(s * re, s * im)
    })
}

/// Random Hermitian positive definite matrix `Z Z* / n + shift I`.
pub fn random_hpd<R: rand::Rng + ?Sized>(rng: &mut R, n: usize, shift: f64) -> CMat {
    let z = random_complex(rng, n, n);
    let mut m = (&z * z.adjoint()).scale(1.0 / n.max(1) as f64);
    for i in 0..n {
        m[(i, i)] += c(shift, 0.0);
    }
    hermitize(&m)
}
