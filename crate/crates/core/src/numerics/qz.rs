//! Complex generalized Schur (QZ) decomposition with eigenvalue reordering.
//!
//! For a square pencil `(A, B)` computes unitary `Q`, `Z` with
//! `Q* A Z = S` and `Q* B Z = T` upper triangular. The generalized
//! eigenvalues are the pairs `(S_kk, T_kk)`, i.e. `λ_k = S_kk / T_kk`.
//! [`GeneralizedSchur::reorder`] moves a selected set of eigenvalues to the
//! leading block, so the first columns of `Z` span the corresponding right
//! deflating subspace.
//!
//! The iteration is a single-shift complex QZ on the Hessenberg-triangular
//! form. It does not chase zeros off the diagonal of `T`; callers with
//! singular `B` should first apply a Möbius change of variable (see
//! `spectral_factor`), which keeps all eigenvalues finite.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{fro, identity, CMat, ZERO};

const MAX_SWEEPS_PER_EIGENVALUE: usize = 60;

/// Plane rotation `G = [[c, s], [−conj(s), c]]` with real `c`.
#[derive(Clone, Copy, Debug)]
struct Rotation {
    c: f64,
    s: Complex64,
}

impl Rotation {
    /// Rotation with `G [f; g] = [r; 0]`.
    fn zeroing(f: Complex64, g: Complex64) -> Self {
        if g == ZERO {
            return Self { c: 1.0, s: ZERO };
        }
        if f == ZERO {
            return Self { c: 0.0, s: g.conj() / g.norm() };
        }
        let fa = f.norm();
        let norm = fa.hypot(g.norm());
        Self { c: fa / norm, s: (f / fa) * g.conj() / norm }
    }

    /// `M ← G M` on rows `i`, `j`.
    fn rows(&self, m: &mut CMat, i: usize, j: usize) {
        for k in 0..m.ncols() {
            let (x, y) = (m[(i, k)], m[(j, k)]);
            m[(i, k)] = x * self.c + self.s * y;
            m[(j, k)] = -self.s.conj() * x + y * self.c;
        }
    }

    /// `M ← M G*` on columns `i`, `j`.
    fn cols_adjoint(&self, m: &mut CMat, i: usize, j: usize) {
        for r in 0..m.nrows() {
            let (x, y) = (m[(r, i)], m[(r, j)]);
            m[(r, i)] = x * self.c + y * self.s.conj();
            m[(r, j)] = -x * self.s + y * self.c;
        }
    }

    /// `M ← M G` on columns `i`, `j`.
    fn cols(&self, m: &mut CMat, i: usize, j: usize) {
        for r in 0..m.nrows() {
            let (x, y) = (m[(r, i)], m[(r, j)]);
            m[(r, i)] = x * self.c - y * self.s.conj();
            m[(r, j)] = x * self.s + y * self.c;
        }
    }
}

#[derive(Clone, Debug)]
pub struct GeneralizedSchur {
    pub s: CMat,
    pub t: CMat,
    pub q: CMat,
    pub z: CMat,
}

impl GeneralizedSchur {
    pub fn new(a: &CMat, b: &CMat) -> Result<Self> {
        let n = a.nrows();
        if a.shape() != (n, n) || b.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!("QZ pencil of shapes {:?} and {:?}", a.shape(), b.shape())));
        }
        if !crate::linalg::is_finite(a) || !crate::linalg::is_finite(b) {
            return Err(Error::NonFinite("QZ pencil"));
        }
        let mut out = Self::hessenberg_triangular(a, b);
        out.iterate()?;
        Ok(out)
    }

    /// Generalized eigenvalue pairs `(α_k, β_k)` with `λ_k = α_k / β_k`.
    pub fn pairs(&self) -> Vec<(Complex64, Complex64)> {
        (0..self.s.nrows()).map(|k| (self.s[(k, k)], self.t[(k, k)])).collect()
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.pairs()
            .into_iter()
            .map(|(alpha, beta)| if beta == ZERO { Complex64::new(f64::INFINITY, 0.0) } else { alpha / beta })
            .collect()
    }

    /// Moves every eigenvalue for which `select(α, β)` holds to the leading
    /// block, preserving relative order. Returns the size of that block.
    pub fn reorder(&mut self, select: impl Fn(Complex64, Complex64) -> bool) -> usize {
        let n = self.s.nrows();
        let mut target = 0;
        for j in 0..n {
            if select(self.s[(j, j)], self.t[(j, j)]) {
                for k in (target..j).rev() {
                    self.swap_adjacent(k);
                }
                target += 1;
            }
        }
        target
    }

    fn hessenberg_triangular(a: &CMat, b: &CMat) -> Self {
        let n = a.nrows();
        let qr = b.clone().qr();
        let q0 = qr.q();
        let mut t = qr.r();
        for j in 0..n {
            for i in j + 1..n {
                t[(i, j)] = ZERO;
            }
        }
        let mut s = q0.adjoint() * a;
        let mut q = q0;
        let mut z = identity(n);

        for j in 0..n.saturating_sub(2) {
            for i in (j + 2..n).rev() {
                let g = Rotation::zeroing(s[(i - 1, j)], s[(i, j)]);
                g.rows(&mut s, i - 1, i);
                g.rows(&mut t, i - 1, i);
                g.cols_adjoint(&mut q, i - 1, i);
                s[(i, j)] = ZERO;

                let h = Rotation::zeroing(t[(i, i)], t[(i, i - 1)]);
                h.cols(&mut s, i - 1, i);
                h.cols(&mut t, i - 1, i);
                h.cols(&mut z, i - 1, i);
                t[(i, i - 1)] = ZERO;
            }
        }
        Self { s, t, q, z }
    }

    fn iterate(&mut self) -> Result<()> {
        let n = self.s.nrows();
        if n < 2 {
            return Ok(());
        }
        let eps = f64::EPSILON;
        let s_norm = fro(&self.s).max(f64::MIN_POSITIVE);
        let mut hi = n - 1;
        let mut sweeps = 0usize;
        let mut total = 0usize;

        while hi > 0 {
            let mut lo = 0;
            for k in (1..=hi).rev() {
                let sub = self.s[(k, k - 1)].norm();
                let local = self.s[(k - 1, k - 1)].norm() + self.s[(k, k)].norm();
                if sub <= eps * local || sub <= eps * s_norm {
                    self.s[(k, k - 1)] = ZERO;
                    lo = k;
                    break;
                }
            }
            if lo == hi {
                hi -= 1;
                sweeps = 0;
                continue;
            }

            sweeps += 1;
            total += 1;
            if sweeps > MAX_SWEEPS_PER_EIGENVALUE || total > MAX_SWEEPS_PER_EIGENVALUE * n {
                return Err(Error::QzNoConvergence);
            }
            let shift = if sweeps % 11 == 0 { self.exceptional_shift(hi) } else { self.shift(hi) };
            self.sweep(lo, hi, shift);
        }
        Ok(())
    }

    /// Eigenvalue of the trailing 2x2 pencil closest to `S_hh / T_hh`.
    fn shift(&self, hi: usize) -> Complex64 {
        let k = hi - 1;
        let (a00, a01, a10, a11) = (self.s[(k, k)], self.s[(k, hi)], self.s[(hi, k)], self.s[(hi, hi)]);
        let (b00, b01, b11) = (self.t[(k, k)], self.t[(k, hi)], self.t[(hi, hi)]);
        let tiny = f64::EPSILON * fro(&self.t).max(f64::MIN_POSITIVE);
        if b11.norm() <= tiny || b00.norm() <= tiny {
            return if b11.norm() > tiny { a11 / b11 } else { a11 };
        }
        let target = a11 / b11;
        // det(a − λ b) = qa λ² − qb λ + qc.
        let qa = b00 * b11;
        let qb = a00 * b11 + a11 * b00 - a10 * b01;
        let qc = a00 * a11 - a01 * a10;
        let disc = (qb * qb - qa * qc * 4.0).sqrt();
        let (p, m) = (qb + disc, qb - disc);
        let big = if p.norm() >= m.norm() { p } else { m };
        if big == ZERO {
            return target;
        }
        let r1 = big / (qa * 2.0);
        let r2 = (qc * 2.0) / big;
        if (r1 - target).norm() <= (r2 - target).norm() {
            r1
        } else {
            r2
        }
    }

    fn exceptional_shift(&self, hi: usize) -> Complex64 {
        let tiny = f64::MIN_POSITIVE;
        let b = self.t[(hi - 1, hi - 1)];
        let base = if self.t[(hi, hi)].norm() > tiny { self.s[(hi, hi)] / self.t[(hi, hi)] } else { ZERO };
        if b.norm() > tiny {
            base + self.s[(hi, hi - 1)].norm() / b.norm() * 0.75
        } else {
            base + 0.75
        }
    }

    fn sweep(&mut self, lo: usize, hi: usize, shift: Complex64) {
        let x = self.s[(lo, lo)] - shift * self.t[(lo, lo)];
        let y = self.s[(lo + 1, lo)];
        let g = Rotation::zeroing(x, y);
        self.rotate_rows(&g, lo);

        for k in lo..hi {
            let h = Rotation::zeroing(self.t[(k + 1, k + 1)], self.t[(k + 1, k)]);
            self.rotate_cols(&h, k);
            self.t[(k + 1, k)] = ZERO;
            if k + 2 <= hi {
                let g = Rotation::zeroing(self.s[(k + 1, k)], self.s[(k + 2, k)]);
                self.rotate_rows(&g, k + 1);
                self.s[(k + 2, k)] = ZERO;
            }
        }
    }

    fn rotate_rows(&mut self, g: &Rotation, k: usize) {
        g.rows(&mut self.s, k, k + 1);
        g.rows(&mut self.t, k, k + 1);
        g.cols_adjoint(&mut self.q, k, k + 1);
    }

    fn rotate_cols(&mut self, h: &Rotation, k: usize) {
        h.cols(&mut self.s, k, k + 1);
        h.cols(&mut self.t, k, k + 1);
        h.cols(&mut self.z, k, k + 1);
    }

    /// Exchanges the diagonal entries at `k` and `k + 1`.
    fn swap_adjacent(&mut self, k: usize) {
        let (s00, s01, s11) = (self.s[(k, k)], self.s[(k, k + 1)], self.s[(k + 1, k + 1)]);
        let (t00, t01, t11) = (self.t[(k, k)], self.t[(k, k + 1)], self.t[(k + 1, k + 1)]);
        // Right eigenvector of the 2x2 pencil for the trailing eigenvalue:
        // (t11 S − s11 T) v = 0 with a first row (m00, m01).
        let m00 = t11 * s00 - s11 * t00;
        let m01 = t11 * s01 - s11 * t01;
        let (v0, v1) = (m01, -m00);
        let norm = v0.norm().hypot(v1.norm());
        if norm == 0.0 {
            return;
        }
        // G [v0; v1] = [r; 0], so the first column of G* is parallel to v.
        let h = Rotation::zeroing(v0, v1);
        h.cols_adjoint(&mut self.s, k, k + 1);
        h.cols_adjoint(&mut self.t, k, k + 1);
        h.cols_adjoint(&mut self.z, k, k + 1);

        let (ws, wt) = ((self.s[(k, k)], self.s[(k + 1, k)]), (self.t[(k, k)], self.t[(k + 1, k)]));
        let use_s = ws.0.norm().hypot(ws.1.norm()) >= wt.0.norm().hypot(wt.1.norm());
        let (f, g) = if use_s { ws } else { wt };
        let r = Rotation::zeroing(f, g);
        self.rotate_rows(&r, k);
        self.s[(k + 1, k)] = ZERO;
        self.t[(k + 1, k)] = ZERO;
    }
}
