//! Sample-based validation of estimator claims.
//!
//! Trials draw `x` from a [`PriorSpec`] and noise from the model's `C_nn`,
//! apply a set of estimators, and keep enough statistics to compare the
//! empirical Bayesian MSE with its analytic value and to regress `x̂ᵢ` on `xᵢ`.

mod prior;
mod regression;
mod trials;

pub use prior::{
    sample_noise, sample_parameters, standard_complex_normal, ComponentPrior, NoiseSampler,
    ParameterSampler, PriorSpec,
};
pub use regression::{
    conditional_bias_regression, ComponentRegression, ConditionalBiasReport, PairAccumulator,
    MIN_PAIRS, MIN_REGRESSOR_VARIANCE,
};
pub use trials::{
    run_trials, EmpiricalPerformance, EstimatorTrials, TrialConfig, CHUNK_TRIALS,
    PRIOR_CONSISTENCY_TOL,
};
