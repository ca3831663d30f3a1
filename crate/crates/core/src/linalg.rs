//! Dense complex linear-algebra helpers.
//!
//! Every inverse in the crate goes through [`HpdFactor`], a Cholesky
//! factorization of a Hermitian positive-definite matrix. Explicit inverses
//! are never formed on the construction path.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{CwcuError, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Maximum absolute Hermitian deviation accepted before symmetrizing.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Eigenvalues below `-PSD_TOL * max(1, λ_max)` reject a PSD claim.
pub const PSD_TOL: f64 = 1e-8;

pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Largest entry modulus.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "max_abs_diff: shape mismatch");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Max-entry deviation relative to the max-entry modulus of `reference`.
/// Falls back to the absolute deviation for an all-zero reference.
pub fn rel_dev(actual: &CMatrix, reference: &CMatrix) -> f64 {
    let d = max_abs_diff(actual, reference);
    let scale = max_abs(reference);
    if scale > 0.0 {
        d / scale
    } else {
        d
    }
}

pub fn vec_rel_dev(actual: &CVector, reference: &CVector) -> f64 {
    let d = actual
        .iter()
        .zip(reference.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    let scale = reference.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale > 0.0 {
        d / scale
    } else {
        d
    }
}

/// Max |a_ij - conj(a_ji)|.
pub fn hermitian_deviation(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    dev
}

pub fn symmetrize(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

/// Checks squareness and Hermitian symmetry, then returns `(A + Aᴴ)/2`.
pub fn checked_hermitian(a: &CMatrix, what: &'static str) -> Result<CMatrix> {
    if !a.is_square() {
        return Err(CwcuError::DimensionMismatch(format!(
            "{what} must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let deviation = hermitian_deviation(a);
    if !(deviation <= HERMITIAN_TOL) {
        return Err(CwcuError::NotHermitian { what, deviation });
    }
    Ok(symmetrize(a))
}

/// Real eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    let eig = SymmetricEigen::new(a.clone());
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

/// Fails if the Hermitian matrix has an eigenvalue below `-PSD_TOL * max(1, λ_max)`.
pub fn check_psd(a: &CMatrix, what: &'static str) -> Result<()> {
    let values = hermitian_eigenvalues(a);
    let min = values.first().copied().unwrap_or(0.0);
    let max = values.last().copied().unwrap_or(0.0);
    if min < -PSD_TOL * max.abs().max(1.0) {
        return Err(CwcuError::NotPositiveSemidefinite {
            what,
            min_eigenvalue: min,
        });
    }
    Ok(())
}

/// λ_max / λ_min of a Hermitian matrix; infinite when λ_min ≤ 0.
pub fn hermitian_condition(a: &CMatrix) -> f64 {
    let values = hermitian_eigenvalues(a);
    match (values.first(), values.last()) {
        (Some(&min), Some(&max)) if min > 0.0 => max / min,
        _ => f64::INFINITY,
    }
}

// Complex square roots never fail, so nalgebra happily factors indefinite
// matrices; a valid factor has a real positive diagonal.
fn positive_pivots(chol: &Cholesky<Complex64, Dyn>) -> bool {
    chol.l_dirty()
        .diagonal()
        .iter()
        .all(|z| z.re > 0.0 && z.re.is_finite() && z.im.abs() <= 1e-12 * z.re)
}

/// Cholesky factor of a Hermitian positive-definite matrix.
#[derive(Clone, Debug)]
pub struct HpdFactor {
    chol: Cholesky<Complex64, Dyn>,
}

impl HpdFactor {
    pub fn new(a: &CMatrix, what: &'static str) -> Result<Self> {
        if !a.is_square() {
            return Err(CwcuError::DimensionMismatch(format!(
                "{what} must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        Cholesky::new(a.clone())
            .filter(positive_pivots)
            .map(|chol| HpdFactor { chol })
            .ok_or(CwcuError::SingularCovariance(what))
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    /// A⁻¹·B
    pub fn solve(&self, b: &CMatrix) -> CMatrix {
        self.chol.solve(b)
    }

    pub fn solve_vec(&self, b: &CVector) -> CVector {
        self.chol.solve(b)
    }

    /// Lower-triangular L with A = L·Lᴴ.
    pub fn lower(&self) -> CMatrix {
        self.chol.l()
    }
}

/// Returns L with L·Lᴴ = A for a Hermitian PSD matrix. Tries Cholesky first
/// and falls back to an eigendecomposition with clamped eigenvalues, which
/// handles rank-deficient covariances.
pub fn psd_factor(a: &CMatrix, what: &'static str) -> Result<CMatrix> {
    let a =
        checked_hermitian(a, what).map_err(|e| CwcuError::FactorizationFailure(e.to_string()))?;
    if let Some(chol) = Cholesky::new(a.clone()).filter(positive_pivots) {
        let l = chol.l();
        // near-singular inputs can factor with tiny pivots and lose accuracy
        if max_abs_diff(&(&l * l.adjoint()), &a) <= 1e-12 * max_abs(&a).max(1.0) {
            return Ok(l);
        }
    }
    let eig = SymmetricEigen::new(a);
    let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let min = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if !(min >= -PSD_TOL * max.max(1.0)) {
        return Err(CwcuError::FactorizationFailure(format!(
            "{what} has eigenvalue {min:.3e}"
        )));
    }
    let mut factor = eig.eigenvectors;
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        factor.column_mut(j).scale_mut(s);
    }
    Ok(factor)
}

/// Complex diagonal matrix from real entries.
pub fn real_diag(values: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(
        values.len(),
        values.iter().map(|&v| c64(v, 0.0)),
    ))
}

/// Real parts of the diagonal.
pub fn real_diagonal(a: &CMatrix) -> Vec<f64> {
    a.diagonal().iter().map(|z| z.re).collect()
}

/// Drops column `skip` from `a`.
pub fn remove_column(a: &CMatrix, skip: usize) -> CMatrix {
    a.clone().remove_column(skip)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}
