//! LMMSE and CWCU LMMSE estimator construction.
//!
//! The component-wise conditionally unbiased (CWCU) LMMSE estimator is the
//! LMMSE estimator with each row rescaled by a real gain `dᵢ`:
//!
//! ```text
//! E_CL = D · E_L,    E_L = C_xy · C_yy⁻¹,    c = E[x] − E_CL · E[y]
//! ```
//!
//! The gain forces `eᵢᴴ·C_yxᵢ = σ²_xᵢ`, which makes `E[x̂ᵢ | xᵢ] = xᵢ` whenever
//! the conditional mean of `y` given `xᵢ` is affine in `xᵢ` (jointly Gaussian
//! moments, linear model with Gaussian prior, or linear model with mutually
//! independent parameters).

use num_complex::Complex64;

use crate::error::{CwcuError, Result};
use crate::estimator::{AffineEstimator, DiagonalGain, EstimatorKind};
use crate::linalg::{CMatrix, CVector, HpdFactor};
use crate::model::{JointGaussianModel, LinearModel};

/// A component is uninformative when `C_xᵢy·C_yy⁻¹·C_yxᵢ ≤ UNINFORMATIVE_REL · σ²_xᵢ`.
pub const UNINFORMATIVE_REL: f64 = 1e-12;

/// Imaginary part allowed on quadratic forms that are real in exact arithmetic,
/// relative to `max(1, |re|)`.
pub const GAIN_IMAG_TOL: f64 = 1e-10;

/// Off-diagonal magnitude above which a prior is not treated as independent.
pub const DIAGONAL_PRIOR_TOL: f64 = 1e-12;

fn real_part(value: Complex64, component: usize) -> Result<f64> {
    if value.im.abs() > GAIN_IMAG_TOL * value.re.abs().max(1.0) {
        return Err(CwcuError::NonRealGain {
            component,
            imag: value.im,
        });
    }
    Ok(value.re)
}

fn check_variance(variance: f64, component: usize) -> Result<()> {
    if !(variance > 0.0) {
        return Err(CwcuError::NonPositiveVariance {
            component,
            variance,
        });
    }
    Ok(())
}

/// LMMSE matrix `C_xy·C_yy⁻¹` and the gain `dᵢ = σ²ᵢ / (C_xᵢy·C_yy⁻¹·C_yxᵢ)`.
fn lmmse_and_gain(
    cxy: &CMatrix,
    cyy: &HpdFactor,
    variances: &[f64],
) -> Result<(CMatrix, DiagonalGain)> {
    // C_yy⁻¹·C_yx, m×n
    let solved = cyy.solve(&cxy.adjoint());
    let m = cxy.ncols();
    let gain = variances
        .iter()
        .enumerate()
        .map(|(i, &variance)| {
            check_variance(variance, i)?;
            let quad: Complex64 = (0..m).map(|j| cxy[(i, j)] * solved[(j, i)]).sum();
            let denominator = real_part(quad, i)?;
            if !(denominator > UNINFORMATIVE_REL * variance) {
                return Err(CwcuError::UninformativeComponent {
                    component: i,
                    denominator,
                });
            }
            Ok(variance / denominator)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((solved.adjoint(), DiagonalGain::new(gain)))
}

fn affine(
    matrix: CMatrix,
    mean_x: &CVector,
    mean_y: &CVector,
    kind: EstimatorKind,
) -> Result<AffineEstimator> {
    let offset = mean_x - &matrix * mean_y;
    AffineEstimator::new(matrix, offset, kind)
}

/// LMMSE estimator `E = C_xy·C_yy⁻¹`, `c = E[x] − E·E[y]`.
pub fn lmmse_from_moments(model: &JointGaussianModel) -> Result<AffineEstimator> {
    let matrix = model.cyy_factor().solve(&model.cxy().adjoint()).adjoint();
    affine(matrix, model.mean_x(), model.mean_y(), EstimatorKind::Lmmse)
}

/// LMMSE estimator for the linear model, `E = C_xx·Hᴴ·(H·C_xx·Hᴴ + C_nn)⁻¹`.
pub fn lmmse_linear(model: &LinearModel) -> Result<AffineEstimator> {
    let cxy = model.cxx() * model.h().adjoint();
    let matrix = model.cyy_factor().solve(&cxy.adjoint()).adjoint();
    affine(
        matrix,
        model.mean_x(),
        &model.mean_y(),
        EstimatorKind::Lmmse,
    )
}

/// CWCU LMMSE estimator from jointly Gaussian moments.
pub fn cwcu_from_moments(model: &JointGaussianModel) -> Result<(AffineEstimator, DiagonalGain)> {
    let (lmmse, gain) = lmmse_and_gain(model.cxy(), model.cyy_factor(), &model.prior_variances())?;
    let est = affine(
        gain.scale_rows(&lmmse),
        model.mean_x(),
        model.mean_y(),
        EstimatorKind::CwcuMoments,
    )?;
    Ok((est, gain))
}

/// Gain through the ratio `diag(C_xx) / diag(C_xy·C_yy⁻¹·C_yx)`.
pub fn d_matrix_ratio_form(model: &JointGaussianModel) -> Result<DiagonalGain> {
    let cross = model.cxy() * model.cyy_factor().solve(&model.cxy().adjoint());
    let variances = model.prior_variances();
    let gain = (0..model.n())
        .map(|i| {
            check_variance(variances[i], i)?;
            let a = real_part(cross[(i, i)], i)?;
            if !(a > UNINFORMATIVE_REL * variances[i]) {
                return Err(CwcuError::UninformativeComponent {
                    component: i,
                    denominator: a,
                });
            }
            Ok(variances[i] / a)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiagonalGain::new(gain))
}

/// CWCU LMMSE estimator for the linear model with a (possibly correlated,
/// possibly singular) Gaussian prior.
pub fn cwcu_linear_gaussian(model: &LinearModel) -> Result<(AffineEstimator, DiagonalGain)> {
    let cxy = model.cxx() * model.h().adjoint();
    let (lmmse, gain) = lmmse_and_gain(&cxy, model.cyy_factor(), &model.prior_variances())?;
    let est = affine(
        gain.scale_rows(&lmmse),
        model.mean_x(),
        &model.mean_y(),
        EstimatorKind::CwcuLinearGaussian,
    )?;
    Ok((est, gain))
}

fn require_diagonal_prior(model: &LinearModel) -> Result<()> {
    match model.off_diagonal_violation(DIAGONAL_PRIOR_TOL) {
        Some((row, col, magnitude)) => Err(CwcuError::NotDiagonalPrior {
            row,
            col,
            magnitude,
        }),
        None => Ok(()),
    }
}

/// CWCU LMMSE estimator for the linear model with mutually independent
/// parameters: `dᵢ = 1 / (σ²ᵢ·hᵢᴴ·C_yy⁻¹·hᵢ)`.
pub fn cwcu_linear_independent(model: &LinearModel) -> Result<(AffineEstimator, DiagonalGain)> {
    require_diagonal_prior(model)?;
    let h = model.h();
    let variances = model.prior_variances();
    let solved = model.cyy_factor().solve(h);
    let gain = (0..model.n())
        .map(|i| {
            let quad = h.column(i).dotc(&solved.column(i));
            let denominator = variances[i] * real_part(quad, i)?;
            if !(denominator > UNINFORMATIVE_REL) {
                return Err(CwcuError::UninformativeComponent {
                    component: i,
                    denominator,
                });
            }
            Ok(1.0 / denominator)
        })
        .collect::<Result<Vec<_>>>()?;
    let gain = DiagonalGain::new(gain);
    // E_L = C_xx·Hᴴ·C_yy⁻¹ = (C_yy⁻¹·H·C_xx)ᴴ
    let lmmse = (solved * model.cxx()).adjoint();
    let est = affine(
        gain.scale_rows(&lmmse),
        model.mean_x(),
        &model.mean_y(),
        EstimatorKind::CwcuIndependent,
    )?;
    Ok((est, gain))
}

/// Row `i` of the independent-prior CWCU estimator through
/// `eᵢ = (hᵢᴴ·Cᵢ⁻¹·hᵢ)⁻¹·Cᵢ⁻¹·hᵢ` with `Cᵢ = H̄ᵢ·C_x̄x̄·H̄ᵢᴴ + C_nn` built
/// from all other components. Returns `eᵢ`; the estimator row is `eᵢᴴ`.
pub fn cwcu_row_alternative(model: &LinearModel, i: usize) -> Result<CVector> {
    require_diagonal_prior(model)?;
    let n = model.n();
    if i >= n {
        return Err(CwcuError::IndexOutOfRange { index: i, n });
    }
    let hi = model.h().column(i).into_owned();
    let mut others = model.cnn().clone();
    if n > 1 {
        let h_rest = model.h().clone().remove_column(i);
        let var_rest = model.cxx().clone().remove_row(i).remove_column(i);
        others += &h_rest * var_rest * h_rest.adjoint();
    }
    let factor = HpdFactor::new(&crate::linalg::symmetrize(&others), "C_i")?;
    let z = factor.solve_vec(&hi);
    let denominator = real_part(hi.dotc(&z), i)?;
    if !(denominator > 0.0) {
        return Err(CwcuError::UninformativeComponent {
            component: i,
            denominator,
        });
    }
    Ok(z.unscale(denominator))
}
