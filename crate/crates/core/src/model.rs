//! Second-order model descriptions: joint Gaussian moments, the linear
//! observation model `y = H·x + n`, and subspace constraints on `x`.

use nalgebra::SVD;

use crate::error::{CwcuError, Result};
use crate::linalg::{
    check_psd, checked_hermitian, hermitian_eigenvalues, CMatrix, CVector, HpdFactor, PSD_TOL,
};

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(CwcuError::DimensionMismatch(format!(
            "{what}: expected {want}, got {got}"
        )));
    }
    Ok(())
}

fn check_shape(what: &str, a: &CMatrix, rows: usize, cols: usize) -> Result<()> {
    if a.shape() != (rows, cols) {
        return Err(CwcuError::DimensionMismatch(format!(
            "{what}: expected {rows}x{cols}, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

fn positive_variances(cxx: &CMatrix) -> Result<Vec<f64>> {
    cxx.diagonal()
        .iter()
        .enumerate()
        .map(|(component, z)| {
            if z.re > 0.0 && z.re.is_finite() {
                Ok(z.re)
            } else {
                Err(CwcuError::NonPositiveVariance {
                    component,
                    variance: z.re,
                })
            }
        })
        .collect()
}

/// Means and covariances of jointly distributed `x` (n) and `y` (m).
#[derive(Clone, Debug)]
pub struct JointGaussianModel {
    mean_x: CVector,
    mean_y: CVector,
    cxx: CMatrix,
    cxy: CMatrix,
    cyy: CMatrix,
    cyy_factor: HpdFactor,
}

impl JointGaussianModel {
    pub fn new(
        mean_x: CVector,
        mean_y: CVector,
        cxx: CMatrix,
        cxy: CMatrix,
        cyy: CMatrix,
    ) -> Result<Self> {
        let n = mean_x.len();
        let m = mean_y.len();
        if n == 0 || m == 0 {
            return Err(CwcuError::DimensionMismatch(
                "model dimensions must be at least 1".into(),
            ));
        }
        check_shape("C_xx", &cxx, n, n)?;
        check_shape("C_xy", &cxy, n, m)?;
        check_shape("C_yy", &cyy, m, m)?;
        let cxx = checked_hermitian(&cxx, "C_xx")?;
        let cyy = checked_hermitian(&cyy, "C_yy")?;
        let cyy_factor = HpdFactor::new(&cyy, "C_yy")?;
        Ok(JointGaussianModel {
            mean_x,
            mean_y,
            cxx,
            cxy,
            cyy,
            cyy_factor,
        })
    }

    /// Checks that the joint covariance `[[C_xx, C_xy], [C_yx, C_yy]]` is PSD.
    pub fn validate_joint_psd(&self) -> Result<()> {
        let (n, m) = (self.n(), self.m());
        let mut block = CMatrix::zeros(n + m, n + m);
        block.view_mut((0, 0), (n, n)).copy_from(&self.cxx);
        block.view_mut((0, n), (n, m)).copy_from(&self.cxy);
        block
            .view_mut((n, 0), (m, n))
            .copy_from(&self.cxy.adjoint());
        block.view_mut((n, n), (m, m)).copy_from(&self.cyy);
        let min = hermitian_eigenvalues(&block)
            .first()
            .copied()
            .unwrap_or(0.0);
        if min < -PSD_TOL {
            return Err(CwcuError::NotPositiveSemidefinite {
                what: "joint covariance",
                min_eigenvalue: min,
            });
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.mean_x.len()
    }

    pub fn m(&self) -> usize {
        self.mean_y.len()
    }

    pub fn mean_x(&self) -> &CVector {
        &self.mean_x
    }

    pub fn mean_y(&self) -> &CVector {
        &self.mean_y
    }

    pub fn cxx(&self) -> &CMatrix {
        &self.cxx
    }

    pub fn cxy(&self) -> &CMatrix {
        &self.cxy
    }

    pub fn cyy(&self) -> &CMatrix {
        &self.cyy
    }

    pub(crate) fn cyy_factor(&self) -> &HpdFactor {
        &self.cyy_factor
    }

    /// σ²_xᵢ, the real diagonal of C_xx.
    pub fn prior_variances(&self) -> Vec<f64> {
        self.cxx.diagonal().iter().map(|z| z.re).collect()
    }
}

/// `y = H·x + n` with `x` of mean `mean_x` and covariance `C_xx`, and
/// zero-mean noise of covariance `C_nn` independent of `x`.
#[derive(Clone, Debug)]
pub struct LinearModel {
    h: CMatrix,
    mean_x: CVector,
    cxx: CMatrix,
    cnn: CMatrix,
    cyy: CMatrix,
    cnn_factor: HpdFactor,
    cyy_factor: HpdFactor,
}

impl LinearModel {
    /// Builds the model, rejecting observation matrices with an all-zero column.
    pub fn new(h: CMatrix, mean_x: CVector, cxx: CMatrix, cnn: CMatrix) -> Result<Self> {
        if let Some(column) = (0..h.ncols()).find(|&j| h.column(j).iter().all(|z| z.norm() == 0.0))
        {
            return Err(CwcuError::UnobservableComponent { column });
        }
        Self::with_unobserved_components(h, mean_x, cxx, cnn)
    }

    /// Like [`LinearModel::new`] but permits zero columns in `H`. Such
    /// components are only estimable through prior correlation with observed
    /// ones (e.g. unused OFDM subcarriers).
    pub fn with_unobserved_components(
        h: CMatrix,
        mean_x: CVector,
        cxx: CMatrix,
        cnn: CMatrix,
    ) -> Result<Self> {
        let (m, n) = h.shape();
        if n == 0 || m == 0 {
            return Err(CwcuError::DimensionMismatch(
                "model dimensions must be at least 1".into(),
            ));
        }
        check_len("mean_x", mean_x.len(), n)?;
        check_shape("C_xx", &cxx, n, n)?;
        check_shape("C_nn", &cnn, m, m)?;
        let cxx = checked_hermitian(&cxx, "C_xx")?;
        let cnn = checked_hermitian(&cnn, "C_nn")?;
        positive_variances(&cxx)?;
        check_psd(&cxx, "C_xx")?;
        let cnn_factor = HpdFactor::new(&cnn, "C_nn")?;
        let cyy = crate::linalg::symmetrize(&(&h * &cxx * h.adjoint() + &cnn));
        let cyy_factor = HpdFactor::new(&cyy, "C_yy")?;
        Ok(LinearModel {
            h,
            mean_x,
            cxx,
            cnn,
            cyy,
            cnn_factor,
            cyy_factor,
        })
    }

    pub fn n(&self) -> usize {
        self.h.ncols()
    }

    pub fn m(&self) -> usize {
        self.h.nrows()
    }

    pub fn h(&self) -> &CMatrix {
        &self.h
    }

    pub fn mean_x(&self) -> &CVector {
        &self.mean_x
    }

    pub fn cxx(&self) -> &CMatrix {
        &self.cxx
    }

    pub fn cnn(&self) -> &CMatrix {
        &self.cnn
    }

    /// H·C_xx·Hᴴ + C_nn
    pub fn cyy(&self) -> &CMatrix {
        &self.cyy
    }

    pub(crate) fn cnn_factor(&self) -> &HpdFactor {
        &self.cnn_factor
    }

    pub(crate) fn cyy_factor(&self) -> &HpdFactor {
        &self.cyy_factor
    }

    pub fn prior_variances(&self) -> Vec<f64> {
        self.cxx.diagonal().iter().map(|z| z.re).collect()
    }

    /// E[y] = H·E[x]
    pub fn mean_y(&self) -> CVector {
        &self.h * &self.mean_x
    }

    /// The largest off-diagonal entry of C_xx above `tol`, if any.
    pub fn off_diagonal_violation(&self, tol: f64) -> Option<(usize, usize, f64)> {
        let n = self.n();
        let mut worst: Option<(usize, usize, f64)> = None;
        for i in 0..n {
            for j in 0..n {
                let mag = self.cxx[(i, j)].norm();
                if i != j && mag > tol && worst.map_or(true, |(_, _, w)| mag > w) {
                    worst = Some((i, j, mag));
                }
            }
        }
        worst
    }

    /// Same model with C_xx replaced (H, mean and noise unchanged).
    pub fn with_prior_covariance(&self, cxx: CMatrix) -> Result<Self> {
        Self::with_unobserved_components(self.h.clone(), self.mean_x.clone(), cxx, self.cnn.clone())
    }

    /// Moments induced on (x, y): C_xy = C_xx·Hᴴ, C_yy = H·C_xx·Hᴴ + C_nn.
    pub fn induced_moments(&self) -> Result<JointGaussianModel> {
        JointGaussianModel::new(
            self.mean_x.clone(),
            self.mean_y(),
            self.cxx.clone(),
            &self.cxx * self.h.adjoint(),
            self.cyy.clone(),
        )
    }
}

/// Known subspace `x = V·z` with full column rank `V` (n×p, p ≤ n).
#[derive(Clone, Debug)]
pub struct SubspaceConstraint {
    basis: CMatrix,
}

impl SubspaceConstraint {
    pub fn new(basis: CMatrix) -> Result<Self> {
        let (n, p) = basis.shape();
        if p == 0 || p > n {
            return Err(CwcuError::DimensionMismatch(format!(
                "subspace basis must be n x p with 1 <= p <= n, got {n}x{p}"
            )));
        }
        let svd = SVD::new(basis.clone(), false, false);
        let max = svd.singular_values.iter().copied().fold(0.0, f64::max);
        let min = svd
            .singular_values
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if !(min > 1e-10 * max) {
            return Err(CwcuError::RankDeficient(format!(
                "subspace basis singular values span [{min:.3e}, {max:.3e}]"
            )));
        }
        Ok(SubspaceConstraint { basis })
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }
}
