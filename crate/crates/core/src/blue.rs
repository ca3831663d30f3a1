//! Globally unbiased baselines.
//!
//! B1 enforces `E·H = I` and ignores the prior entirely. B2 only enforces
//! `E·H·V = V` for a known subspace `x = V·z`, which is a weaker constraint
//! and never performs worse when the subspace assumption holds.

use crate::error::{CwcuError, Result};
use crate::estimator::{AffineEstimator, EstimatorKind};
use crate::linalg::{hermitian_condition, symmetrize, CMatrix, CVector, HpdFactor};
use crate::model::{LinearModel, SubspaceConstraint};

/// Condition number above which the Fisher matrix is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Solves `(Gᴴ·C_nn⁻¹·G)⁻¹·Gᴴ·C_nn⁻¹` for an effective observation matrix G.
fn weighted_pseudo_inverse(model: &LinearModel, g: &CMatrix) -> Result<CMatrix> {
    let whitened = model.cnn_factor().solve(g);
    let fisher = symmetrize(&(g.adjoint() * &whitened));
    let cond = hermitian_condition(&fisher);
    if !(cond < MAX_CONDITION) {
        return Err(CwcuError::RankDeficient(format!(
            "Gram matrix condition number {cond:.3e}"
        )));
    }
    let factor = HpdFactor::new(&fisher, "Gram matrix")
        .map_err(|_| CwcuError::RankDeficient("Gram matrix is not positive definite".into()))?;
    Ok(factor.solve(&whitened.adjoint()))
}

/// `E = (Hᴴ·C_nn⁻¹·H)⁻¹·Hᴴ·C_nn⁻¹`, `c = 0`.
pub fn blue_b1(model: &LinearModel) -> Result<AffineEstimator> {
    if model.m() < model.n() {
        return Err(CwcuError::RankDeficient(format!(
            "B1 needs m >= n, got m = {}, n = {}",
            model.m(),
            model.n()
        )));
    }
    let matrix = weighted_pseudo_inverse(model, model.h())?;
    AffineEstimator::new(matrix, CVector::zeros(model.n()), EstimatorKind::B1)
}

/// `E = V·(Vᴴ·Hᴴ·C_nn⁻¹·H·V)⁻¹·Vᴴ·Hᴴ·C_nn⁻¹`, `c = 0`.
pub fn blue_b2(model: &LinearModel, sub: &SubspaceConstraint) -> Result<AffineEstimator> {
    if sub.basis().nrows() != model.n() {
        return Err(CwcuError::DimensionMismatch(format!(
            "subspace basis has {} rows, model has n = {}",
            sub.basis().nrows(),
            model.n()
        )));
    }
    let hv = model.h() * sub.basis();
    let reduced = weighted_pseudo_inverse(model, &hv)?;
    AffineEstimator::new(
        sub.basis() * reduced,
        CVector::zeros(model.n()),
        EstimatorKind::B2,
    )
}
