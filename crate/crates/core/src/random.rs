//! Seeded random model generators for validation runs and tests.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::linalg::{c64, identity, real_diag, symmetrize, CMatrix, CVector};
use crate::model::{JointGaussianModel, LinearModel};

/// Prior structure of a generated linear model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PriorShape {
    Correlated,
    Diagonal,
}

/// Entries drawn i.i.d. from CN(0, 1).
pub fn random_cmatrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c64(s * re, s * im)
    })
}

pub fn random_cvector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> CVector {
    random_cmatrix(rng, len, 1).column(0).into_owned()
}

/// `G·Gᴴ / dim + ridge·I`, Hermitian positive definite.
pub fn random_hpd<R: Rng + ?Sized>(rng: &mut R, dim: usize, ridge: f64) -> CMatrix {
    let g = random_cmatrix(rng, dim, dim);
    symmetrize(&((&g * g.adjoint()).unscale(dim as f64) + identity(dim).scale(ridge)))
}

/// A linear model with CN(0,1) observation matrix, random prior mean,
/// and a correlated or diagonal prior covariance.
pub fn random_linear_model<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    m: usize,
    shape: PriorShape,
) -> Result<LinearModel> {
    let h = random_cmatrix(rng, m, n);
    let mean_x = random_cvector(rng, n);
    let cxx = match shape {
        PriorShape::Correlated => random_hpd(rng, n, 0.2),
        PriorShape::Diagonal => {
            let vars: Vec<f64> = (0..n).map(|_| rng.random_range(0.3..2.0)).collect();
            real_diag(&vars)
        }
    };
    let cnn = random_hpd(rng, m, 0.1).scale(rng.random_range(0.2..1.0));
    LinearModel::new(h, mean_x, cxx, cnn)
}

/// Joint moments obtained by partitioning a random HPD matrix of size n + m.
pub fn random_joint_model<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    m: usize,
) -> Result<JointGaussianModel> {
    let block = random_hpd(rng, n + m, 0.1);
    let cxx = block.view((0, 0), (n, n)).into_owned();
    let cxy = block.view((0, n), (n, m)).into_owned();
    let cyy = block.view((n, n), (m, m)).into_owned();
    JointGaussianModel::new(
        random_cvector(rng, n),
        random_cvector(rng, m),
        cxx,
        cxy,
        cyy,
    )
}
