//! Small dense symmetric factorizations used on kernel restrictions.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Log-determinant of a symmetric PSD matrix with a pivot floor applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlooredLogDet<T> {
    pub value: T,
    /// Some pivot sat at (or below) the floor, i.e. the restriction is rank-deficient
    /// up to jitter.
    pub degenerate: bool,
}

/// Pivot floor for a kernel with jitter `eps` and diagonal scale `scale`.
///
/// With positive jitter every pivot of `L + eps*I` is at least `eps`. Without
/// jitter the floor falls back to machine epsilon relative to the scale.
pub fn pivot_floor<T: Scalar>(eps: T, scale: T) -> T {
    if eps > T::zero() {
        eps
    } else {
        (T::epsilon() * scale).max(T::min_positive_value())
    }
}

/// Pivots within this factor of the floor carry no variance beyond jitter.
/// A token duplicated in the selection yields a pivot of about `2ε`.
pub const DEGENERACY_FACTOR: f64 = 10.0;

/// Pivots at or below this value are reported as degenerate.
pub(crate) fn degenerate_threshold<T: Scalar>(floor: T) -> T {
    floor * T::of(DEGENERACY_FACTOR)
}

/// Cholesky log-determinant of the row-major `n x n` symmetric matrix `mat`,
/// overwritten with its lower factor.
///
/// Pivots below `floor` are clamped to it and their column decoupled; pivots
/// that are clearly negative (beyond roundoff relative to the largest diagonal
/// entry) or non-finite are reported as [`Error::Indefinite`].
pub fn cholesky_logdet<T: Scalar>(mat: &mut [T], n: usize, floor: T) -> Result<FlooredLogDet<T>> {
    let pivots = cholesky_log_pivots(mat, n, floor)?;
    Ok(FlooredLogDet {
        value: pivots.log_pivots.iter().copied().sum(),
        degenerate: pivots.first_degenerate.is_some(),
    })
}

/// Per-pivot logs of a floored Cholesky factorization.
#[derive(Debug, Clone, PartialEq)]
pub struct LogPivots<T> {
    /// `log` of each (floored) pivot; their running sums are the leading
    /// principal log-determinants.
    pub log_pivots: Vec<T>,
    /// First pivot position at or below the degeneracy threshold.
    pub first_degenerate: Option<usize>,
}

/// Same factorization as [`cholesky_logdet`], keeping each pivot.
pub fn cholesky_log_pivots<T: Scalar>(mat: &mut [T], n: usize, floor: T) -> Result<LogPivots<T>> {
    assert_eq!(mat.len(), n * n, "matrix buffer does not match order");
    let scale = (0..n).map(|i| mat[i * n + i].abs()).fold(T::zero(), T::max);
    let neg_tol = T::epsilon().sqrt() * scale.max(floor);
    let threshold = degenerate_threshold(floor);

    let mut log_pivots = Vec::with_capacity(n);
    let mut first_degenerate = None;
    for j in 0..n {
        let mut pivot = mat[j * n + j];
        for k in 0..j {
            let l = mat[j * n + k];
            pivot -= l * l;
        }
        if !pivot.is_finite() || pivot < -neg_tol {
            return Err(Error::Indefinite {
                position: j,
                pivot: pivot.to_f64_lossy(),
            });
        }
        if pivot <= threshold && first_degenerate.is_none() {
            first_degenerate = Some(j);
        }
        if pivot < floor {
            log_pivots.push(floor.ln());
            mat[j * n + j] = floor.sqrt();
            for i in j + 1..n {
                mat[i * n + j] = T::zero();
            }
            continue;
        }
        let root = pivot.sqrt();
        mat[j * n + j] = root;
        log_pivots.push(pivot.ln());
        for i in j + 1..n {
            let mut s = mat[i * n + j];
            for k in 0..j {
                s -= mat[i * n + k] * mat[j * n + k];
            }
            mat[i * n + j] = s / root;
        }
    }
    Ok(LogPivots {
        log_pivots,
        first_degenerate,
    })
}
