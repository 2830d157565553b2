//! Text-conditioned DPP kernel over visual tokens.
//!
//! For visual embeddings `V` (`N x d`) and the text embeddings `Z` (`T x d`) of the
//! current reasoning step, the subspace operator is `M = Zᵀ Z` and the kernel is
//! `L = V M Vᵀ`. Since `L = A Aᵀ` with `A = V Zᵀ` (`N x T`), only `A` is stored;
//! `N x N` kernels are never formed. Subset determinants work on the `m x m`
//! restriction `L_S + ε I`, where `ε` is a jitter proportional to the mean diagonal.

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_logdet, pivot_floor};
use crate::scalar::{compensated_sum, dot, Scalar};

/// Default jitter scale, relative to `trace(L) / N`.
pub const DEFAULT_JITTER_SCALE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelOptions {
    /// Jitter relative to the mean kernel diagonal; must be nonnegative.
    pub jitter_scale: f64,
    /// Rescale visual and text rows to unit norm before forming the kernel.
    pub normalize: bool,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self {
            jitter_scale: DEFAULT_JITTER_SCALE,
            normalize: false,
        }
    }
}

/// The `d x d` operator `M = Σ_j z_j z_jᵀ`, held through its text factor.
#[derive(Debug, Clone)]
pub struct SubspaceOperator<T> {
    text: EmbeddingMatrix<T>,
}

impl<T: Scalar> SubspaceOperator<T> {
    pub fn new(text: EmbeddingMatrix<T>) -> Self {
        Self { text }
    }

    pub fn dim(&self) -> usize {
        self.text.dim()
    }

    /// `uᵀ M v`, evaluated as `Σ_j (u·z_j)(v·z_j)`.
    pub fn bilinear(&self, u: &[T], v: &[T]) -> T {
        compensated_sum(self.text.iter_rows().map(|z| dot(u, z) * dot(v, z)))
    }

    /// Dense row-major `d x d` matrix. Only for inspection and tests.
    pub fn materialize(&self) -> Vec<T> {
        let d = self.dim();
        let mut m = vec![T::zero(); d * d];
        for z in self.text.iter_rows() {
            for r in 0..d {
                for c in 0..d {
                    m[r * d + c] += z[r] * z[c];
                }
            }
        }
        m
    }
}

/// The factor `A = V Zᵀ` of the kernel `L = A Aᵀ`, plus the jitter used for
/// subset determinants.
#[derive(Debug, Clone)]
pub struct KernelFactor<T> {
    a: Vec<T>,
    n: usize,
    t: usize,
    relevance: Vec<T>,
    trace: T,
    jitter: T,
}

/// Builds `A = V Zᵀ` with jitter `ε = jitter_scale · trace(L) / N`.
pub fn build_kernel_factor<T: Scalar>(
    visual: &EmbeddingMatrix<T>,
    text: &EmbeddingMatrix<T>,
    jitter_scale: T,
) -> Result<KernelFactor<T>> {
    KernelFactor::build(visual, text, jitter_scale)
}

/// Squared relevances `r_i² = Σ_j (v_i·z_j)²`, the kernel diagonal.
pub fn relevance_scores<T: Scalar>(k: &KernelFactor<T>) -> Vec<T> {
    k.relevance().to_vec()
}

/// `log det(L_S + ε I)` for an ordered subset of distinct indices.
pub fn logdet_subset<T: Scalar>(k: &KernelFactor<T>, subset: &[usize]) -> Result<T> {
    k.logdet_subset(subset)
}

/// Relevance/diversity split of a subset log-determinant.
pub fn decompose<T: Scalar>(k: &KernelFactor<T>, subset: &[usize]) -> Result<DecompositionReport<T>> {
    k.decompose(subset)
}

impl<T: Scalar> KernelFactor<T> {
    pub fn build(visual: &EmbeddingMatrix<T>, text: &EmbeddingMatrix<T>, jitter_scale: T) -> Result<Self> {
        if visual.dim() != text.dim() {
            return Err(Error::DimensionMismatch {
                visual: visual.dim(),
                text: text.dim(),
            });
        }
        if !jitter_scale.is_finite() || jitter_scale < T::zero() {
            return Err(Error::InvalidParameter(format!(
                "jitter scale must be finite and nonnegative, got {jitter_scale}"
            )));
        }
        let n = visual.rows();
        let t = text.rows();
        let mut a = Vec::with_capacity(n * t);
        for v in visual.iter_rows() {
            a.extend(text.iter_rows().map(|z| dot(v, z)));
        }
        if let Some(pos) = a.iter().position(|x| !x.is_finite()) {
            // Finite inputs can still overflow in the products.
            return Err(Error::NonFinite {
                row: pos / t,
                col: pos % t,
            });
        }
        let relevance: Vec<T> = a
            .chunks_exact(t)
            .map(|row| compensated_sum(row.iter().map(|&x| x * x)))
            .collect();
        let trace = compensated_sum(relevance.iter().copied());
        let jitter = jitter_scale * trace / T::from_usize(n).unwrap();
        Ok(Self {
            a,
            n,
            t,
            relevance,
            trace,
            jitter,
        })
    }

    pub fn build_with(
        visual: &EmbeddingMatrix<T>,
        text: &EmbeddingMatrix<T>,
        options: &KernelOptions,
    ) -> Result<Self> {
        let scale = T::of(options.jitter_scale);
        if options.normalize {
            Self::build(&visual.unit_rows(), &text.unit_rows(), scale)
        } else {
            Self::build(visual, text, scale)
        }
    }

    /// Number of visual tokens `N`.
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of text tokens `T`.
    #[inline]
    pub fn t(&self) -> usize {
        self.t
    }

    /// Effective diagonal jitter `ε`.
    #[inline]
    pub fn jitter(&self) -> T {
        self.jitter
    }

    /// `trace(L) = Σ_i r_i²`.
    pub fn trace(&self) -> T {
        self.trace
    }

    /// Pivot floor applied inside subset factorizations.
    pub fn floor(&self) -> T {
        let mean = if self.n > 0 {
            self.trace / T::from_usize(self.n).unwrap()
        } else {
            T::zero()
        };
        pivot_floor(self.jitter, mean)
    }

    /// Row `i` of `A`: the projections of visual token `i` onto each text token.
    #[inline]
    pub fn factor_row(&self, i: usize) -> &[T] {
        &self.a[i * self.t..(i + 1) * self.t]
    }

    pub fn relevance(&self) -> &[T] {
        &self.relevance
    }

    /// Unjittered kernel entry `L[i][j]`.
    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> T {
        if i == j {
            self.relevance[i]
        } else {
            dot(self.factor_row(i), self.factor_row(j))
        }
    }

    /// Row-major `m x m` restriction `L_S + ε I`.
    pub fn restriction(&self, subset: &[usize]) -> Result<Vec<T>> {
        self.validate_subset(subset)?;
        let m = subset.len();
        let mut out = vec![T::zero(); m * m];
        for (p, &i) in subset.iter().enumerate() {
            out[p * m + p] = self.relevance[i] + self.jitter;
            for (q, &j) in subset.iter().enumerate().take(p) {
                let v = self.entry(i, j);
                out[p * m + q] = v;
                out[q * m + p] = v;
            }
        }
        Ok(out)
    }

    pub fn logdet_subset(&self, subset: &[usize]) -> Result<T> {
        let m = subset.len();
        let mut mat = self.restriction(subset)?;
        Ok(cholesky_logdet(&mut mat, m, self.floor())?.value)
    }

    /// Splits `log det(L_S + εI)` into `Σ log r̃_i²` and `log det` of the
    /// unit-diagonal normalized restriction, where `r̃_i² = r_i² + ε`.
    pub fn decompose(&self, subset: &[usize]) -> Result<DecompositionReport<T>> {
        let m = subset.len();
        let mut total = self.restriction(subset)?;
        let diag: Vec<T> = (0..m).map(|p| total[p * m + p]).collect();
        if let Some(p) = diag.iter().position(|&r| r <= T::zero()) {
            return Err(Error::ZeroRelevance { index: subset[p] });
        }
        let roots: Vec<T> = diag.iter().map(|r| r.sqrt()).collect();
        let mut normalized = total.clone();
        for p in 0..m {
            for q in 0..m {
                normalized[p * m + q] = if p == q {
                    T::one()
                } else {
                    total[p * m + q] / (roots[p] * roots[q])
                };
            }
        }

        let floor = self.floor();
        let max_diag = diag.iter().copied().fold(T::zero(), T::max);
        let total_ld = cholesky_logdet(&mut total, m, floor)?;
        let diversity = cholesky_logdet(&mut normalized, m, (floor / max_diag).max(T::min_positive_value()))?;
        let relevance_sum = compensated_sum(diag.iter().map(|r| r.ln()));
        let residual = (total_ld.value - relevance_sum - diversity.value).abs();
        Ok(DecompositionReport {
            relevance_sum,
            diversity_logdet: diversity.value,
            total_logdet: total_ld.value,
            residual,
            degenerate: total_ld.degenerate || diversity.degenerate,
        })
    }

    fn validate_subset(&self, subset: &[usize]) -> Result<()> {
        if subset.is_empty() {
            return Err(Error::InvalidSubset("subset must contain at least one index".into()));
        }
        let mut seen = vec![false; self.n];
        for &i in subset {
            if i >= self.n {
                return Err(Error::InvalidSubset(format!(
                    "index {i} out of range for {} tokens",
                    self.n
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidSubset(format!("duplicate index {i}")));
            }
        }
        Ok(())
    }
}

/// Relevance/diversity split of a subset log-determinant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionReport<T> {
    pub relevance_sum: T,
    pub diversity_logdet: T,
    pub total_logdet: T,
    /// `|total − relevance − diversity|`.
    pub residual: T,
    /// A pivot hit the jitter floor; log-determinants are floored, not `−∞`.
    pub degenerate: bool,
}

impl<T: Scalar> DecompositionReport<T> {
    /// Residual relative to the largest term magnitude (at least 1).
    pub fn relative_residual(&self) -> T {
        let scale = T::one()
            .max(self.total_logdet.abs())
            .max(self.relevance_sum.abs())
            .max(self.diversity_logdet.abs());
        self.residual / scale
    }
}
