//! Algebraic identity suite over seeded random models.
//!
//! Each identity ties a construction to an independent route for the same
//! quantity. The suite reports the worst deviation seen across all models.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::blue::{blue_b1, blue_b2};
use crate::cwcu::{
    cwcu_from_moments, cwcu_linear_gaussian, cwcu_linear_independent, cwcu_row_alternative,
    d_matrix_ratio_form, lmmse_from_moments, lmmse_linear,
};
use crate::error::Result;
use crate::estimator::AffineEstimator;
use crate::linalg::{identity, rel_dev, vec_rel_dev, CMatrix};
use crate::model::{JointGaussianModel, LinearModel, SubspaceConstraint};
use crate::performance::{cwcu_error_covariance, generic_error_covariance};
use crate::random::{random_joint_model, random_linear_model, PriorShape};

pub const TOL_FACTORIZATION: f64 = 1e-9;
pub const TOL_CONSTRAINT: f64 = 1e-9;
pub const TOL_RATIO_FORM: f64 = 1e-9;
pub const TOL_ROUTE_AGREEMENT: f64 = 1e-9;
pub const TOL_ROW_FORMS: f64 = 1e-8;
pub const TOL_UNIT_DIAGONAL: f64 = 1e-9;
pub const TOL_SUBSPACE_IDENTITY: f64 = 1e-10;
pub const TOL_ERROR_COVARIANCE: f64 = 1e-9;
pub const TOL_MSE_ORDERING: f64 = 1e-9;
pub const TOL_SCALING: f64 = 1e-9;

#[derive(Clone, Debug, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub max_dev: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityReport {
    pub seed: u64,
    pub n_models: usize,
    pub checks: Vec<IdentityCheck>,
    pub pass: bool,
}

struct Tracker {
    checks: Vec<IdentityCheck>,
}

impl Tracker {
    fn record(&mut self, name: &str, tol: f64, dev: f64) {
        let dev = if dev.is_nan() { f64::INFINITY } else { dev };
        match self.checks.iter_mut().find(|c| c.name == name) {
            Some(c) => c.max_dev = c.max_dev.max(dev),
            None => self.checks.push(IdentityCheck {
                name: name.to_string(),
                max_dev: dev,
                tol,
                pass: true,
            }),
        }
    }
}

/// Dimensions of the k-th model of the suite: n ∈ 1..=6, m ∈ n..=10.
pub fn suite_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn perturbed(est: &AffineEstimator, perturb: Option<f64>) -> Result<AffineEstimator> {
    match perturb {
        Some(eps) => est.with_matrix(est.matrix().scale(1.0 + eps)),
        None => Ok(est.clone()),
    }
}

fn factorization_dev(
    cwcu: &AffineEstimator,
    d: &crate::estimator::DiagonalGain,
    lmmse: &AffineEstimator,
) -> f64 {
    rel_dev(cwcu.matrix(), &d.scale_rows(lmmse.matrix()))
}

/// max_i |eᵢᴴ·C_yxᵢ − σ²ᵢ| / σ²ᵢ, i.e. the diagonal of E·C_yx against diag(C_xx).
fn constraint_dev(e: &CMatrix, cxy: &CMatrix, variances: &[f64]) -> f64 {
    let ecyx = e * cxy.adjoint();
    variances
        .iter()
        .enumerate()
        .map(|(i, &v)| (ecyx[(i, i)] - v).norm() / v)
        .fold(0.0, f64::max)
}

fn check_joint(t: &mut Tracker, model: &JointGaussianModel, perturb: Option<f64>) -> Result<()> {
    let lmmse = lmmse_from_moments(model)?;
    let (cwcu, d) = cwcu_from_moments(model)?;
    let cwcu = perturbed(&cwcu, perturb)?;
    t.record(
        "factorization_moments",
        TOL_FACTORIZATION,
        factorization_dev(&cwcu, &d, &lmmse),
    );
    t.record(
        "constraint_moments",
        TOL_CONSTRAINT,
        constraint_dev(cwcu.matrix(), model.cxy(), &model.prior_variances()),
    );
    let ratio = d_matrix_ratio_form(model)?;
    let ratio_dev = d
        .values()
        .iter()
        .zip(ratio.values())
        .map(|(a, b)| (a - b).abs() / b.abs())
        .fold(0.0, f64::max);
    t.record("d_ratio_form", TOL_RATIO_FORM, ratio_dev);
    let perf = cwcu_error_covariance(model, &d)?;
    // generic route through the joint moments: Cov[x − E·y]
    let e = cwcu.matrix();
    let generic = model.cxx() - e * model.cxy().adjoint() - model.cxy() * e.adjoint()
        + e * model.cyy() * e.adjoint();
    t.record(
        "cwcu_error_covariance_moments",
        TOL_ERROR_COVARIANCE,
        rel_dev(&perf.error_cov, &generic),
    );
    Ok(())
}

fn check_correlated(t: &mut Tracker, model: &LinearModel, perturb: Option<f64>) -> Result<()> {
    let lmmse = lmmse_linear(model)?;
    let (cwcu, d) = cwcu_linear_gaussian(model)?;
    let cwcu = perturbed(&cwcu, perturb)?;
    t.record(
        "factorization_linear_gaussian",
        TOL_FACTORIZATION,
        factorization_dev(&cwcu, &d, &lmmse),
    );
    let cxy = model.cxx() * model.h().adjoint();
    t.record(
        "constraint_linear_gaussian",
        TOL_CONSTRAINT,
        constraint_dev(cwcu.matrix(), &cxy, &model.prior_variances()),
    );
    let moments = model.induced_moments()?;
    let (via_moments, _) = cwcu_from_moments(&moments)?;
    t.record(
        "linear_gaussian_vs_moments",
        TOL_ROUTE_AGREEMENT,
        rel_dev(cwcu.matrix(), via_moments.matrix())
            .max(vec_rel_dev(cwcu.offset(), via_moments.offset())),
    );
    let analytic = cwcu_error_covariance(&moments, &d)?;
    let generic = generic_error_covariance(model, &cwcu)?;
    t.record(
        "cwcu_error_covariance",
        TOL_ERROR_COVARIANCE,
        rel_dev(&analytic.error_cov, &generic.error_cov),
    );
    mse_ordering(t, model, &lmmse, &cwcu)
}

fn mse_ordering(
    t: &mut Tracker,
    model: &LinearModel,
    lmmse: &AffineEstimator,
    cwcu: &AffineEstimator,
) -> Result<()> {
    let l = generic_error_covariance(model, lmmse)?.bmse;
    let c = generic_error_covariance(model, cwcu)?.bmse;
    let b = generic_error_covariance(model, &blue_b1(model)?)?.bmse;
    let violation = (0..model.n())
        .map(|i| (l[i] - c[i]).max(c[i] - b[i]).max(0.0))
        .fold(0.0, f64::max);
    t.record("mse_ordering", TOL_MSE_ORDERING, violation);
    Ok(())
}

fn check_independent(t: &mut Tracker, model: &LinearModel, perturb: Option<f64>) -> Result<()> {
    let lmmse = lmmse_linear(model)?;
    let (cwcu, d) = cwcu_linear_independent(model)?;
    let cwcu = perturbed(&cwcu, perturb)?;
    t.record(
        "factorization_independent",
        TOL_FACTORIZATION,
        factorization_dev(&cwcu, &d, &lmmse),
    );

    // dᵢ = 1 / (e_L,ᵢᴴ·hᵢ)
    let el_h = lmmse.matrix() * model.h();
    let d_dev = (0..model.n())
        .map(|i| {
            let alt = 1.0 / el_h[(i, i)];
            (alt - d.get(i)).norm() / d.get(i)
        })
        .fold(0.0, f64::max);
    t.record("d_independent_vs_lmmse_row", TOL_ROW_FORMS, d_dev);

    let mut row_dev: f64 = 0.0;
    for i in 0..model.n() {
        let e = cwcu_row_alternative(model, i)?;
        let row = cwcu.matrix().row(i).adjoint();
        row_dev = row_dev.max(vec_rel_dev(&row, &e));
    }
    t.record("row_form_independent", TOL_ROW_FORMS, row_dev);

    let eh = cwcu.matrix() * model.h();
    let unit = (0..model.n())
        .map(|i| (eh[(i, i)] - 1.0).norm())
        .fold(0.0, f64::max);
    t.record("unit_diagonal", TOL_UNIT_DIAGONAL, unit);

    // gain through the Gaussian route coincides for diagonal priors
    let (gaussian, _) = cwcu_linear_gaussian(model)?;
    t.record(
        "independent_vs_linear_gaussian",
        TOL_ROUTE_AGREEMENT,
        rel_dev(cwcu.matrix(), gaussian.matrix()),
    );

    let b1 = blue_b1(model)?;
    let b2 = blue_b2(model, &SubspaceConstraint::new(identity(model.n()))?)?;
    t.record(
        "b2_identity_subspace",
        TOL_SUBSPACE_IDENTITY,
        rel_dev(b2.matrix(), b1.matrix()),
    );

    mse_ordering(t, model, &lmmse, &cwcu)
}

/// Row i of the independent CWCU estimator is unchanged when σ²ᵢ is scaled.
fn check_scaling(
    t: &mut Tracker,
    model: &LinearModel,
    factor: f64,
    perturb: Option<f64>,
) -> Result<()> {
    let (base, _) = cwcu_linear_independent(model)?;
    let base = perturbed(&base, perturb)?;
    let mut dev: f64 = 0.0;
    for i in 0..model.n() {
        let mut cxx = model.cxx().clone();
        cxx[(i, i)] *= factor;
        let (scaled, _) = cwcu_linear_independent(&model.with_prior_covariance(cxx)?)?;
        let a = base.matrix().row(i).adjoint();
        let b = scaled.matrix().row(i).adjoint();
        dev = dev.max(vec_rel_dev(&a, &b));
    }
    t.record("scaling_invariance", TOL_SCALING, dev);
    Ok(())
}

/// Runs every identity on `n_models` random models. `perturb` scales each
/// CWCU matrix by `1 + eps` before checking (negative control).
pub fn run_identity_suite(
    seed: u64,
    n_models: usize,
    perturb: Option<f64>,
) -> Result<IdentityReport> {
    let mut t = Tracker { checks: Vec::new() };
    for k in 0..n_models {
        let mut rng = suite_rng(seed, k);
        let n = rng.random_range(1..=6);
        let m = rng.random_range(n..=10);
        let joint = random_joint_model(&mut rng, n, m)?;
        check_joint(&mut t, &joint, perturb)?;
        let correlated = random_linear_model(&mut rng, n, m, PriorShape::Correlated)?;
        check_correlated(&mut t, &correlated, perturb)?;
        let diagonal = random_linear_model(&mut rng, n, m, PriorShape::Diagonal)?;
        check_independent(&mut t, &diagonal, perturb)?;
        let factor = rng.random_range(0.1..10.0);
        check_scaling(&mut t, &diagonal, factor, perturb)?;
    }
    for c in &mut t.checks {
        c.pass = c.max_dev <= c.tol;
    }
    let pass = t.checks.iter().all(|c| c.pass);
    Ok(IdentityReport {
        seed,
        n_models,
        checks: t.checks,
        pass,
    })
}
