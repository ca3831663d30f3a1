use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{CwcuError, Result};
use crate::io::serde_complex;
use crate::linalg::{c64, psd_factor, real_diag, CMatrix, CVector, HpdFactor};

/// Distribution of one independent parameter.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum ComponentPrior {
    ComplexGaussian {
        #[serde(with = "serde_complex::scalar")]
        mean: Complex64,
        var: f64,
    },
    /// Zero-mean symbols `±a ± ja` with `a = sqrt(var / 2)`.
    Qpsk { var: f64 },
    /// Uniform over a disk of radius `sqrt(2·var)` centred on `mean`.
    UniformDisk {
        #[serde(with = "serde_complex::scalar")]
        mean: Complex64,
        var: f64,
    },
}

impl ComponentPrior {
    pub fn mean(&self) -> Complex64 {
        match *self {
            ComponentPrior::ComplexGaussian { mean, .. }
            | ComponentPrior::UniformDisk { mean, .. } => mean,
            ComponentPrior::Qpsk { .. } => c64(0.0, 0.0),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            ComponentPrior::ComplexGaussian { var, .. }
            | ComponentPrior::Qpsk { var }
            | ComponentPrior::UniformDisk { var, .. } => var,
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        match *self {
            ComponentPrior::ComplexGaussian { mean, var } => {
                mean + standard_complex_normal(rng) * var.sqrt()
            }
            ComponentPrior::Qpsk { var } => {
                let a = (var / 2.0).sqrt();
                let re = if rng.random::<bool>() { a } else { -a };
                let im = if rng.random::<bool>() { a } else { -a };
                c64(re, im)
            }
            ComponentPrior::UniformDisk { mean, var } => {
                let radius = (2.0 * var).sqrt() * rng.random::<f64>().sqrt();
                let angle = std::f64::consts::TAU * rng.random::<f64>();
                mean + Complex64::from_polar(radius, angle)
            }
        }
    }
}

/// Prior on the parameter vector used to drive trials.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum PriorSpec {
    /// Circularly-symmetric complex Gaussian; the covariance may be singular.
    Gaussian {
        #[serde(with = "serde_complex::vector")]
        mean: CVector,
        #[serde(skip)]
        cov: CMatrix,
    },
    Independent {
        components: Vec<ComponentPrior>,
    },
}

impl PriorSpec {
    pub fn dim(&self) -> usize {
        match self {
            PriorSpec::Gaussian { mean, .. } => mean.len(),
            PriorSpec::Independent { components } => components.len(),
        }
    }

    pub fn mean(&self) -> CVector {
        match self {
            PriorSpec::Gaussian { mean, .. } => mean.clone(),
            PriorSpec::Independent { components } => {
                CVector::from_iterator(components.len(), components.iter().map(|c| c.mean()))
            }
        }
    }

    pub fn covariance(&self) -> CMatrix {
        match self {
            PriorSpec::Gaussian { cov, .. } => cov.clone(),
            PriorSpec::Independent { components } => {
                real_diag(&components.iter().map(|c| c.variance()).collect::<Vec<_>>())
            }
        }
    }

    /// Precomputes whatever factorization sampling needs.
    pub fn sampler(&self) -> Result<ParameterSampler> {
        match self {
            PriorSpec::Gaussian { mean, cov } => {
                if cov.shape() != (mean.len(), mean.len()) {
                    return Err(CwcuError::DimensionMismatch(
                        "Gaussian prior covariance does not match its mean".into(),
                    ));
                }
                Ok(ParameterSampler::Gaussian {
                    mean: mean.clone(),
                    factor: psd_factor(cov, "prior covariance")?,
                })
            }
            PriorSpec::Independent { components } => {
                if let Some((i, c)) = components
                    .iter()
                    .enumerate()
                    .find(|(_, c)| !(c.variance() > 0.0 && c.variance().is_finite()))
                {
                    return Err(CwcuError::NonPositiveVariance {
                        component: i,
                        variance: c.variance(),
                    });
                }
                Ok(ParameterSampler::Independent(components.clone()))
            }
        }
    }
}

/// Draws from a [`PriorSpec`] with its factorization cached.
#[derive(Clone, Debug)]
pub enum ParameterSampler {
    Gaussian { mean: CVector, factor: CMatrix },
    Independent(Vec<ComponentPrior>),
}

impl ParameterSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CVector {
        match self {
            ParameterSampler::Gaussian { mean, factor } => {
                let w = standard_complex_vector(rng, factor.ncols());
                mean + factor * w
            }
            ParameterSampler::Independent(components) => {
                CVector::from_iterator(components.len(), components.iter().map(|c| c.sample(rng)))
            }
        }
    }
}

/// Zero-mean complex Gaussian noise with a positive-definite covariance.
#[derive(Clone, Debug)]
pub struct NoiseSampler {
    factor: CMatrix,
}

impl NoiseSampler {
    pub fn new(cnn: &CMatrix) -> Result<Self> {
        let factor = HpdFactor::new(cnn, "noise covariance")
            .map_err(|e| CwcuError::FactorizationFailure(e.to_string()))?;
        Ok(NoiseSampler {
            factor: factor.lower(),
        })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CVector {
        &self.factor * standard_complex_vector(rng, self.factor.ncols())
    }
}

/// CN(0, 1): real and imaginary parts N(0, 1/2).
pub fn standard_complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn standard_complex_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> CVector {
    CVector::from_iterator(len, (0..len).map(|_| standard_complex_normal(rng)))
}

/// One draw of the parameter vector. Factorizes on every call; use
/// [`PriorSpec::sampler`] in loops.
pub fn sample_parameters<R: Rng + ?Sized>(prior: &PriorSpec, rng: &mut R) -> Result<CVector> {
    Ok(prior.sampler()?.sample(rng))
}

/// One draw of zero-mean noise with covariance `cnn`.
pub fn sample_noise<R: Rng + ?Sized>(cnn: &CMatrix, rng: &mut R) -> Result<CVector> {
    Ok(NoiseSampler::new(cnn)?.sample(rng))
}
