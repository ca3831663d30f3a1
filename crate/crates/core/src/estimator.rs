use serde::{Deserialize, Serialize};

use crate::error::{CwcuError, Result};
use crate::linalg::{real_diag, CMatrix, CVector};

/// Which construction produced an [`AffineEstimator`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EstimatorKind {
    Lmmse,
    CwcuMoments,
    CwcuLinearGaussian,
    CwcuIndependent,
    B1,
    B2,
    Trivial,
}

impl EstimatorKind {
    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::Lmmse => "LMMSE",
            EstimatorKind::CwcuMoments => "CWCU_MOMENTS",
            EstimatorKind::CwcuLinearGaussian => "CWCU_LINEAR_GAUSSIAN",
            EstimatorKind::CwcuIndependent => "CWCU_INDEPENDENT",
            EstimatorKind::B1 => "B1",
            EstimatorKind::B2 => "B2",
            EstimatorKind::Trivial => "TRIVIAL",
        }
    }

    /// Estimators that satisfy E[x̂ᵢ | xᵢ] = xᵢ under their prerequisites.
    pub fn is_conditionally_unbiased(self) -> bool {
        !matches!(self, EstimatorKind::Lmmse)
    }

    pub fn is_cwcu(self) -> bool {
        matches!(
            self,
            EstimatorKind::CwcuMoments
                | EstimatorKind::CwcuLinearGaussian
                | EstimatorKind::CwcuIndependent
        )
    }
}

/// `x̂ = E·y + c`
#[derive(Clone, Debug)]
pub struct AffineEstimator {
    matrix: CMatrix,
    offset: CVector,
    kind: EstimatorKind,
}

impl AffineEstimator {
    pub fn new(matrix: CMatrix, offset: CVector, kind: EstimatorKind) -> Result<Self> {
        if matrix.nrows() != offset.len() {
            return Err(CwcuError::DimensionMismatch(format!(
                "estimator matrix has {} rows but offset has {} entries",
                matrix.nrows(),
                offset.len()
            )));
        }
        Ok(AffineEstimator {
            matrix,
            offset,
            kind,
        })
    }

    /// Number of estimated parameters.
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    /// Number of measurements consumed.
    pub fn m(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn offset(&self) -> &CVector {
        &self.offset
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    pub fn apply(&self, y: &CVector) -> Result<CVector> {
        if y.len() != self.m() {
            return Err(CwcuError::DimensionMismatch(format!(
                "estimator expects {} measurements, got {}",
                self.m(),
                y.len()
            )));
        }
        Ok(&self.matrix * y + &self.offset)
    }

    /// Writes E·y + c into `out` without allocating. Dimensions are the
    /// caller's responsibility.
    pub(crate) fn apply_into(&self, y: &CVector, out: &mut CVector) {
        out.copy_from(&self.offset);
        out.gemv(1.0.into(), &self.matrix, y, 1.0.into());
    }

    /// Same estimator with a different matrix; used by fault injection.
    pub fn with_matrix(&self, matrix: CMatrix) -> Result<Self> {
        AffineEstimator::new(matrix, self.offset.clone(), self.kind)
    }
}

/// Applies `est` to `y`.
pub fn apply_estimator(est: &AffineEstimator, y: &CVector) -> Result<CVector> {
    est.apply(y)
}

/// Diagonal of the real gain matrix D relating CWCU and LMMSE estimators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalGain(Vec<f64>);

impl DiagonalGain {
    pub fn new(values: Vec<f64>) -> Self {
        DiagonalGain(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn to_matrix(&self) -> CMatrix {
        real_diag(&self.0)
    }

    /// D·M, scaling row i of `m` by dᵢ.
    pub fn scale_rows(&self, m: &CMatrix) -> CMatrix {
        let mut out = m.clone();
        for (i, &d) in self.0.iter().enumerate() {
            out.row_mut(i).scale_mut(d);
        }
        out
    }
}
