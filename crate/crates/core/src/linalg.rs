//! Small dense linear-algebra helpers shared by the flex and minor modules.

use nalgebra::{DMatrix, DVector};

/// Singular values (descending) and the full set of right singular vectors.
///
/// Wide matrices are padded with zero rows so that the right factor is
/// square; the padding contributes zero singular values only.
pub struct RightSvd {
    /// All `ncols` singular values, descending; the padded ones are zero.
    pub singular_values: Vec<f64>,
    /// `ncols x ncols`, column `i` pairs with `singular_values[i]`.
    pub right_vectors: DMatrix<f64>,
    /// Number of singular values that belong to the unpadded matrix.
    pub genuine: usize,
}

pub fn right_svd(m: &DMatrix<f64>) -> RightSvd {
    let (r, c) = m.shape();
    let padded = if r < c {
        let mut p = DMatrix::zeros(c, c);
        p.view_mut((0, 0), (r, c)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut right_vectors = DMatrix::zeros(c, c);
    for (dst, &src) in order.iter().enumerate() {
        right_vectors.set_column(dst, &v_t.row(src).transpose());
    }
    RightSvd {
        singular_values,
        right_vectors,
        genuine: r.min(c),
    }
}

/// Count of singular values strictly above `rank_tol * max`.
pub fn numerical_rank(singular_values: &[f64], rank_tol: f64) -> usize {
    let max = singular_values.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    singular_values.iter().filter(|&&s| s > rank_tol * max).count()
}

/// Modified Gram-Schmidt with one re-orthogonalization pass.
///
/// Vectors whose remaining norm falls below `tol` times their original norm
/// are dropped.
pub fn orthonormalize(vectors: &[DVector<f64>], tol: f64) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let n0 = v.norm();
        if n0 == 0.0 {
            continue;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                let c = q.dot(&w);
                w.axpy(-c, q, 1.0);
            }
        }
        let n = w.norm();
        if n > tol * n0 {
            out.push(w / n);
        }
    }
    out
}

/// Determinant of a row-major `k x k` matrix by partial-pivot LU; `a` is
/// overwritten.
pub fn det_in_place(a: &mut [f64], k: usize) -> f64 {
    debug_assert_eq!(a.len(), k * k);
    let mut det = 1.0;
    for col in 0..k {
        let mut piv = col;
        let mut best = a[col * k + col].abs();
        for r in col + 1..k {
            let v = a[r * k + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if piv != col {
            for j in 0..k {
                a.swap(col * k + j, piv * k + j);
            }
            det = -det;
        }
        let d = a[col * k + col];
        det *= d;
        for r in col + 1..k {
            let f = a[r * k + col] / d;
            if f != 0.0 {
                for j in col + 1..k {
                    a[r * k + j] -= f * a[col * k + j];
                }
            }
        }
    }
    det
}
