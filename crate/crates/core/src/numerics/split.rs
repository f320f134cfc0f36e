use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::RMat;

/// Relative singular-value threshold below which a direction counts as kernel.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Splits the domain of a real linear map into orthonormal bases of its
/// kernel and of the kernel's orthogonal complement (the row space).
///
/// Returns `(range_basis, kernel_basis)` as column sets. Singular values at or
/// below `rank_tol · σ_max` are treated as zero. Each basis vector is
/// sign-fixed so its largest-magnitude component is positive.
pub fn orthonormal_split(map: &RMat, rank_tol: f64) -> Result<(RMat, RMat)> {
    if !(rank_tol > 0.0) {
        return Err(Error::InvalidOption(format!("rank_tol = {rank_tol} must be positive")));
    }
    if map.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("map matrix"));
    }
    let (rows, cols) = map.shape();
    if cols == 0 {
        return Ok((RMat::zeros(0, 0), RMat::zeros(0, 0)));
    }

    // Compress tall maps to their triangular factor; pad short ones with zero
    // rows so the SVD yields a full right basis.
    let square = if rows > cols {
        map.clone().qr().unpack_r()
    } else {
        let mut padded = RMat::zeros(cols, cols);
        padded.view_mut((0, 0), (rows, cols)).copy_from(map);
        padded
    };
    let svd = square.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let sv = &svd.singular_values;

    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
    let smax = sv[order[0]];
    let rank = order.iter().filter(|&&k| smax > 0.0 && sv[k] > rank_tol * smax).count();

    let collect = |idx: &[usize]| {
        let mut out = DMatrix::zeros(cols, idx.len());
        for (col, &k) in idx.iter().enumerate() {
            let mut v = v_t.row(k).transpose();
            fix_sign(v.as_mut_slice());
            out.set_column(col, &v);
        }
        out
    };
    Ok((collect(&order[..rank]), collect(&order[rank..])))
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() * (1.0 + 1e-12) {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}
