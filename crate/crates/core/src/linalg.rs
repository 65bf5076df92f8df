//! Cholesky factorization and symmetric positive definite factors.

use alloc::format;

use crate::error::{arg_err, Error, Result};
use crate::matrix::DenseMatrix;

/// Relative tolerance for accepting a matrix as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Counts multiply-add operations performed by instrumented kernels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounter(pub u64);

impl OpCounter {
    #[inline]
    pub fn add(&mut self, n: usize) {
        self.0 += n as u64;
    }
}

/// Lower Cholesky factor of a symmetric matrix, reading only its lower
/// triangle. Returns `None` when a pivot is not strictly positive.
pub fn cholesky(a: &DenseMatrix, ops: &mut OpCounter) -> Option<DenseMatrix> {
    let n = a.rows();
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        ops.add(j);
        if !(diag > 0.0) || !diag.is_finite() {
            return None;
        }
        let ljj = libm::sqrt(diag);
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            ops.add(j);
            l[(i, j)] = s / ljj;
        }
    }
    Some(l)
}

/// Solves `L y = x` in place for lower-triangular `L`.
#[inline]
pub fn forward_substitute(l: &DenseMatrix, x: &mut [f64]) {
    let n = x.len();
    for i in 0..n {
        let row = l.row(i);
        let mut s = x[i];
        for k in 0..i {
            s -= row[k] * x[k];
        }
        x[i] = s / row[i];
    }
}

/// Solves `Lᵀ y = x` in place for lower-triangular `L`.
#[inline]
pub fn backward_substitute_transposed(l: &DenseMatrix, x: &mut [f64]) {
    let n = x.len();
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
}

/// A symmetric positive definite matrix together with its Cholesky factor
/// and log-determinant.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdFactor {
    matrix: DenseMatrix,
    chol: DenseMatrix,
    logdet: f64,
}

impl SpdFactor {
    pub fn new(matrix: DenseMatrix) -> Result<Self> {
        Self::new_counted(matrix, &mut OpCounter::default())
    }

    pub(crate) fn new_counted(matrix: DenseMatrix, ops: &mut OpCounter) -> Result<Self> {
        if !matrix.is_square() {
            return Err(arg_err!(
                "covariance factor must be square, got {}x{}",
                matrix.rows(),
                matrix.cols()
            ));
        }
        if !matrix.is_finite() {
            return Err(Error::NotPositiveDefinite("non-finite entries".into()));
        }
        let scale = matrix.max_abs().max(f64::MIN_POSITIVE);
        let asym = matrix.asymmetry();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::NotPositiveDefinite(format!(
                "asymmetry {asym:e} exceeds tolerance"
            )));
        }
        let chol = cholesky(&matrix, ops).ok_or_else(|| {
            Error::NotPositiveDefinite(format!(
                "Cholesky factorization of a {}x{} matrix failed",
                matrix.rows(),
                matrix.rows()
            ))
        })?;
        let logdet = 2.0
            * (0..chol.rows())
                .map(|i| libm::log(chol[(i, i)]))
                .sum::<f64>();
        Ok(Self {
            matrix,
            chol,
            logdet,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    /// `s·I` for `s > 0`.
    pub fn scaled_identity(n: usize, s: f64) -> Self {
        assert!(s > 0.0, "scaled identity needs a positive scale");
        let mut matrix = DenseMatrix::identity(n);
        let mut chol = DenseMatrix::identity(n);
        let r = libm::sqrt(s);
        for i in 0..n {
            matrix[(i, i)] = s;
            chol[(i, i)] = r;
        }
        Self {
            matrix,
            chol,
            logdet: n as f64 * libm::log(s),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    #[inline]
    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    #[inline]
    pub fn chol(&self) -> &DenseMatrix {
        &self.chol
    }

    #[inline]
    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    /// `s·Σ` without refactorizing.
    pub fn scaled(&self, s: f64) -> Self {
        assert!(s > 0.0, "scale must be positive");
        Self {
            matrix: self.matrix.scaled(s),
            chol: self.chol.scaled(libm::sqrt(s)),
            logdet: self.logdet + self.dim() as f64 * libm::log(s),
        }
    }

    /// `x ← Σ⁻¹ x`.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        forward_substitute(&self.chol, x);
        backward_substitute_transposed(&self.chol, x);
    }

    /// `x ← L⁻¹ x`, the whitening transform.
    pub fn whiten_in_place(&self, x: &mut [f64]) {
        forward_substitute(&self.chol, x);
    }

    /// Dense inverse; used only for small matrices and diagnostics.
    pub fn inverse(&self) -> DenseMatrix {
        let n = self.dim();
        let mut inv = DenseMatrix::zeros(n, n);
        let mut col = alloc::vec![0.0; n];
        for j in 0..n {
            col.iter_mut().for_each(|c| *c = 0.0);
            col[j] = 1.0;
            self.solve_in_place(&mut col);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}
