//! Analytic error statistics of affine estimators.

use serde::Serialize;

use crate::error::{CwcuError, Result};
use crate::estimator::{AffineEstimator, DiagonalGain};
use crate::io::serde_complex;
use crate::linalg::{identity, real_diagonal, symmetrize, CMatrix, CVector};
use crate::model::{JointGaussianModel, LinearModel};

/// Error `e = x − x̂` statistics under the Bayesian model.
///
/// `error_cov` is the central covariance of `e`; `bmse[i]` is
/// `E|eᵢ|² = [error_cov]ᵢᵢ + |error_meanᵢ|²`.
#[derive(Clone, Debug, Serialize)]
pub struct EstimatorPerformance {
    #[serde(with = "serde_complex::matrix")]
    pub error_cov: CMatrix,
    pub bmse: Vec<f64>,
    #[serde(with = "serde_complex::vector")]
    pub error_mean: CVector,
}

impl EstimatorPerformance {
    fn from_parts(error_cov: CMatrix, error_mean: CVector) -> Self {
        let error_cov = symmetrize(&error_cov);
        let bmse = real_diagonal(&error_cov)
            .into_iter()
            .zip(error_mean.iter())
            .map(|(v, mu)| v + mu.norm_sqr())
            .collect();
        EstimatorPerformance {
            error_cov,
            bmse,
            error_mean,
        }
    }
}

/// `C_ee = C_xx − A·D − D·A + D·A·D` with `A = C_xy·C_yy⁻¹·C_yx`.
/// The CWCU error has zero mean.
pub fn cwcu_error_covariance(
    model: &JointGaussianModel,
    gain: &DiagonalGain,
) -> Result<EstimatorPerformance> {
    if gain.len() != model.n() {
        return Err(CwcuError::DimensionMismatch(format!(
            "gain has {} entries, model has n = {}",
            gain.len(),
            model.n()
        )));
    }
    let a = model.cxy() * model.cyy_factor().solve(&model.cxy().adjoint());
    let da = gain.scale_rows(&a);
    let ad = da.adjoint();
    let dad = gain.scale_rows(&ad);
    let cov = model.cxx() - &ad - &da + dad;
    Ok(EstimatorPerformance::from_parts(
        cov,
        CVector::zeros(model.n()),
    ))
}

/// Error statistics of any affine estimator applied to a linear model.
///
/// `e = (I − E·H)·x − E·n − c`, so
/// `E[e] = (I − E·H)·E[x] − c` and
/// `Cov[e] = (I − E·H)·C_xx·(I − E·H)ᴴ + E·C_nn·Eᴴ`.
pub fn generic_error_covariance(
    model: &LinearModel,
    est: &AffineEstimator,
) -> Result<EstimatorPerformance> {
    if est.m() != model.m() || est.n() != model.n() {
        return Err(CwcuError::DimensionMismatch(format!(
            "estimator is {}x{}, model needs {}x{}",
            est.n(),
            est.m(),
            model.n(),
            model.m()
        )));
    }
    let e = est.matrix();
    let residual = identity(model.n()) - e * model.h();
    let cov = &residual * model.cxx() * residual.adjoint() + e * model.cnn() * e.adjoint();
    let mean = &residual * model.mean_x() - est.offset();
    Ok(EstimatorPerformance::from_parts(cov, mean))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::EstimatorKind;
    use crate::linalg::{c64, max_abs_diff};

    #[test]
    fn cwcu_scalar_error_covariance() {
        let one = |v: f64| CMatrix::from_element(1, 1, c64(v, 0.0));
        let model = JointGaussianModel::new(
            CVector::zeros(1),
            CVector::zeros(1),
            one(1.0),
            one(0.5),
            one(1.0),
        )
        .unwrap();
        let perf = cwcu_error_covariance(&model, &DiagonalGain::new(vec![4.0])).unwrap();
        // 1 − 1 − 1 + 4
        assert!((perf.bmse[0] - 3.0).abs() < 1e-14);
        assert_eq!(perf.error_mean[0], c64(0.0, 0.0));
    }

    #[test]
    fn exact_inverse_error_covariance() {
        let h = CMatrix::from_row_slice(
            2,
            2,
            &[c64(2.0, 0.0), c64(0.0, 1.0), c64(1.0, 0.0), c64(1.0, 0.0)],
        );
        let cnn = CMatrix::from_row_slice(
            2,
            2,
            &[c64(1.0, 0.0), c64(0.2, 0.1), c64(0.2, -0.1), c64(0.5, 0.0)],
        );
        let model =
            LinearModel::new(h.clone(), CVector::zeros(2), identity(2), cnn.clone()).unwrap();
        let hinv = h.clone().try_inverse().unwrap();
        let est =
            AffineEstimator::new(hinv.clone(), CVector::zeros(2), EstimatorKind::Trivial).unwrap();
        let perf = generic_error_covariance(&model, &est).unwrap();
        let expected = &hinv * cnn * hinv.adjoint();
        assert!(max_abs_diff(&perf.error_cov, &expected) < 1e-12);
    }

    #[test]
    fn prior_mean_estimator_has_prior_covariance() {
        let mean = CVector::from_vec(vec![c64(1.0, -1.0), c64(0.5, 0.0)]);
        let model = LinearModel::new(identity(2), mean.clone(), identity(2), identity(2)).unwrap();
        let est = AffineEstimator::new(CMatrix::zeros(2, 2), mean, EstimatorKind::Trivial).unwrap();
        let perf = generic_error_covariance(&model, &est).unwrap();
        assert!(max_abs_diff(&perf.error_cov, &identity(2)) < 1e-15);
        assert!(perf.error_mean.iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn bias_enters_bmse() {
        let model =
            LinearModel::new(identity(1), CVector::zeros(1), identity(1), identity(1)).unwrap();
        let est = AffineEstimator::new(
            identity(1),
            CVector::from_element(1, c64(0.0, 2.0)),
            EstimatorKind::Trivial,
        )
        .unwrap();
        let perf = generic_error_covariance(&model, &est).unwrap();
        assert!((perf.bmse[0] - 5.0).abs() < 1e-15);
    }
}
