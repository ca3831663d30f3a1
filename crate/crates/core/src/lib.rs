//! Component-wise conditionally unbiased (CWCU) LMMSE estimation.
//!
//! The crate builds affine estimators `x̂ = E·y + c` for Bayesian linear
//! problems and evaluates them analytically and by simulation:
//!
//! * [`cwcu`]: LMMSE and the three CWCU LMMSE constructions (joint Gaussian
//!   moments, linear model with Gaussian prior, linear model with
//!   independent parameters).
//! * [`blue`]: the globally unbiased baselines B1 (`E·H = I`) and B2
//!   (`E·H·V = V` for a known subspace).
//! * [`performance`]: analytic error covariances and Bayesian MSEs.
//! * [`montecarlo`]: seeded, worker-count-independent trials and
//!   conditional-bias regression.
//! * [`chanest`]: the 802.11 long-training-symbol channel estimation study.
//!
//! All matrices are complex (`nalgebra::DMatrix<Complex64>`).

pub mod blue;
pub mod chanest;
pub mod cwcu;
pub mod error;
pub mod estimator;
pub mod io;
pub mod linalg;
pub mod model;
pub mod montecarlo;
pub mod performance;
pub mod random;
pub mod validate;

pub use blue::{blue_b1, blue_b2};
pub use cwcu::{
    cwcu_from_moments, cwcu_linear_gaussian, cwcu_linear_independent, cwcu_row_alternative,
    d_matrix_ratio_form, lmmse_from_moments, lmmse_linear,
};
pub use error::{CwcuError, Result};
pub use estimator::{apply_estimator, AffineEstimator, DiagonalGain, EstimatorKind};
pub use linalg::{c64, CMatrix, CVector};
pub use model::{JointGaussianModel, LinearModel, SubspaceConstraint};
pub use num_complex::Complex64;
pub use performance::{cwcu_error_covariance, generic_error_covariance, EstimatorPerformance};
