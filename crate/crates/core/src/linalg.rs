//! Dense kernels: the sensing matrix type, kernel bases, weighted
//! least-squares solves on the affine solution set and a Cholesky solver.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Dense real vector used for signals, measurements and weights.
pub type RealVector = DVector<f64>;

/// Relative threshold below which a singular value counts as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Condition-number estimate above which the normal system is rejected.
pub const MAX_CONDITION: f64 = 1e14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix must be underdetermined (m < N), got {rows}x{cols}")]
    NotUnderdetermined { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite entry at position {0}")]
    NonFinite(usize),
    #[error("rank deficient: numerical rank {rank} < {rows}")]
    RankDeficient { rank: usize, rows: usize },
    #[error("ill-conditioned normal system (condition estimate {estimate:.3e})")]
    IllConditioned { estimate: f64 },
    #[error("matrix is not positive definite (pivot {pivot} = {value:.3e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("weights must be strictly positive and finite (index {0})")]
    NonPositiveWeight(usize),
}

/// The m x N measurement operator with m < N and full row rank.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix {
    inner: DMatrix<f64>,
}

impl SensingMatrix {
    /// Builds a matrix from row-major entries, checking shape, finiteness and rank.
    pub fn from_row_major(rows: usize, cols: usize, entries: &[f64]) -> Result<Self, LinalgError> {
        if entries.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch {
                expected: rows * cols,
                got: entries.len(),
            });
        }
        Self::from_matrix(DMatrix::from_row_slice(rows, cols, entries))
    }

    pub fn from_matrix(inner: DMatrix<f64>) -> Result<Self, LinalgError> {
        let (rows, cols) = inner.shape();
        if rows == 0 || rows >= cols {
            return Err(LinalgError::NotUnderdetermined { rows, cols });
        }
        // nalgebra stores column-major; report the row-major position.
        if let Some(pos) = inner.iter().position(|v| !v.is_finite()) {
            let (c, r) = (pos / rows, pos % rows);
            return Err(LinalgError::NonFinite(r * cols + c));
        }
        let rank = numerical_rank(&inner);
        if rank < rows {
            return Err(LinalgError::RankDeficient { rank, rows });
        }
        Ok(Self { inner })
    }

    pub fn rows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn cols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.norm()
    }

    /// Computes Φz.
    pub fn apply(&self, z: &RealVector) -> RealVector {
        &self.inner * z
    }

    /// Entries in row-major order.
    pub fn row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for r in 0..self.rows() {
            out.extend(self.inner.row(r).iter().copied());
        }
        out
    }

    /// Columns restricted to `support`, in the given order.
    pub fn columns(&self, support: &[usize]) -> DMatrix<f64> {
        self.inner.select_columns(support)
    }

    /// FNV-1a hash over the shape and the bit patterns of the entries.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |bytes: &[u8]| {
            for b in bytes {
                h ^= u64::from(*b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        feed(&(self.rows() as u64).to_le_bytes());
        feed(&(self.cols() as u64).to_le_bytes());
        for v in self.row_major() {
            feed(&v.to_bits().to_le_bytes());
        }
        h
    }
}

/// Number of singular values above `RANK_TOL * sigma_max`.
pub fn numerical_rank(a: &DMatrix<f64>) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = a.singular_values();
    let smax = sv.iter().copied().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * smax).count()
}

/// Orthonormal basis of the kernel of a sensing matrix, stored as the
/// columns of an N x (N - m) matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct NullSpaceBasis {
    matrix: DMatrix<f64>,
    source_fingerprint: u64,
}

impl NullSpaceBasis {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn source_fingerprint(&self) -> u64 {
        self.source_fingerprint
    }

    /// Maps kernel coordinates `c` to the null-space vector `Bc`.
    pub fn combine(&self, coords: &RealVector) -> RealVector {
        &self.matrix * coords
    }

    /// Orthogonal projection of `v` onto the kernel.
    pub fn project(&self, v: &RealVector) -> RealVector {
        &self.matrix * (self.matrix.transpose() * v)
    }
}

/// Orthonormal basis for the kernel of `phi`.
///
/// Built from a Householder QR factorization of Φᵗ: the trailing N - m
/// columns of the full orthogonal factor span the orthogonal complement of
/// the row space. The factorization has no pivoting, so the result is a
/// deterministic function of the input.
pub fn null_space_basis(phi: &SensingMatrix) -> Result<NullSpaceBasis, LinalgError> {
    let (m, n) = (phi.rows(), phi.cols());
    let rank = numerical_rank(phi.as_matrix());
    if rank < m {
        return Err(LinalgError::RankDeficient { rank, rows: m });
    }
    let qr = phi.as_matrix().transpose().qr();
    let mut q_t = DMatrix::<f64>::identity(n, n);
    qr.q_tr_mul(&mut q_t);
    let matrix = q_t.rows(m, n - m).transpose();
    Ok(NullSpaceBasis {
        matrix,
        source_fingerprint: phi.fingerprint(),
    })
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DMatrix<f64>,
}

impl Cholesky {
    /// Factorizes `a`, reading only its lower triangle.
    pub fn factor(a: &DMatrix<f64>) -> Result<Self, LinalgError> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                got: a.ncols(),
            });
        }
        let mut l = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(LinalgError::NotPositiveDefinite { pivot: j, value: d });
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { l })
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// Cheap condition estimate `(max l_ii / min l_ii)^2`; a lower bound on
    /// the 2-norm condition number.
    pub fn condition_estimate(&self) -> f64 {
        let diag = self.l.diagonal();
        let max = diag.iter().copied().fold(0.0_f64, f64::max);
        let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
        (max / min).powi(2)
    }

    pub fn solve(&self, b: &RealVector) -> RealVector {
        let n = self.l.nrows();
        let mut v = b.clone();
        for i in 0..n {
            let mut s = v[i];
            for k in 0..i {
                s -= self.l[(i, k)] * v[k];
            }
            v[i] = s / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = v[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)] * v[k];
            }
            v[i] = s / self.l[(i, i)];
        }
        v
    }
}

/// Solves `a v = b` for symmetric positive-definite `a`.
pub fn spd_solve(a: &DMatrix<f64>, b: &RealVector) -> Result<RealVector, LinalgError> {
    if b.len() != a.nrows() {
        return Err(LinalgError::DimensionMismatch {
            expected: a.nrows(),
            got: b.len(),
        });
    }
    Ok(Cholesky::factor(a)?.solve(b))
}

/// Minimizer of Σ w_j z_j² over {z : Φz = y}.
///
/// Computed as `x = D Φᵗ (Φ D Φᵗ)⁻¹ y` with `D = diag(1/w_j)`. This is the
/// diagonal that makes `x` satisfy the weighted orthogonality conditions
/// `⟨x, η⟩_w = 0` for every η in the kernel.
pub fn weighted_ls_solve(
    phi: &SensingMatrix,
    y: &RealVector,
    w: &RealVector,
) -> Result<RealVector, LinalgError> {
    let (m, n) = (phi.rows(), phi.cols());
    if y.len() != m {
        return Err(LinalgError::DimensionMismatch { expected: m, got: y.len() });
    }
    if w.len() != n {
        return Err(LinalgError::DimensionMismatch { expected: n, got: w.len() });
    }
    if let Some(j) = w.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(LinalgError::NonPositiveWeight(j));
    }
    let d: RealVector = w.map(|v| 1.0 / v);
    let a = phi.as_matrix();
    let mut scaled = a.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= d[j];
    }
    let normal = &scaled * a.transpose();
    let chol = match Cholesky::factor(&normal) {
        Ok(c) => c,
        Err(LinalgError::NotPositiveDefinite { .. }) => {
            return Err(LinalgError::IllConditioned {
                estimate: f64::INFINITY,
            })
        }
        Err(e) => return Err(e),
    };
    let estimate = chol.condition_estimate();
    if !(estimate <= MAX_CONDITION) {
        return Err(LinalgError::IllConditioned { estimate });
    }
    let lambda = chol.solve(y);
    Ok(scaled.transpose() * lambda)
}

/// Weighted inner product Σ w_j u_j v_j.
pub fn weighted_inner(u: &RealVector, v: &RealVector, w: &RealVector) -> f64 {
    u.iter().zip(v.iter()).zip(w.iter()).map(|((a, b), c)| a * b * c).sum()
}

/// Largest relative violation of the weighted orthogonality conditions
/// `|⟨x, η⟩_w| / (‖x‖_w ‖η‖_w)` over the basis columns.
pub fn orthogonality_defect(x: &RealVector, w: &RealVector, basis: &NullSpaceBasis) -> f64 {
    let xnorm = weighted_inner(x, x, w).sqrt();
    basis
        .matrix()
        .column_iter()
        .map(|col| {
            let eta: RealVector = col.into_owned();
            let enorm = weighted_inner(&eta, &eta, w).sqrt();
            let denom = xnorm * enorm;
            if denom == 0.0 {
                0.0
            } else {
                weighted_inner(x, &eta, w).abs() / denom
            }
        })
        .fold(0.0, f64::max)
}

/// Kernel of a small dense matrix (any shape), as orthonormal columns.
///
/// Pads to at least `ncols` rows so that the SVD returns a full set of right
/// singular vectors.
pub(crate) fn small_kernel(a: &DMatrix<f64>) -> DMatrix<f64> {
    let d = a.ncols();
    if a.nrows() == 0 {
        return DMatrix::identity(d, d);
    }
    let rows = a.nrows().max(d);
    let mut padded = DMatrix::<f64>::zeros(rows, d);
    padded.view_mut((0, 0), (a.nrows(), d)).copy_from(a);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.iter().copied().fold(0.0_f64, f64::max);
    let cut = if smax == 0.0 { 0.5 } else { 1e-10 * smax };
    let cols: Vec<RealVector> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= cut)
        .map(|(i, _)| v_t.row(i).transpose())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(d, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}
