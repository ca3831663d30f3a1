//! Conditional-bias regression.
//!
//! Under the linear model the conditional mean `E[x̂ᵢ | xᵢ]` of any affine
//! estimator is itself affine in `xᵢ` whenever the remaining components
//! regress linearly on `xᵢ`. Fitting `x̂ᵢ ≈ αᵢ·xᵢ + βᵢ` by complex least squares
//! therefore recovers the conditional mean exactly (up to sampling noise),
//! and conditional unbiasedness is `αᵢ = 1, βᵢ = 0`.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{CwcuError, Result};
use crate::io::serde_complex;
use crate::linalg::CVector;

/// Fewest pairs accepted by [`conditional_bias_regression`].
pub const MIN_PAIRS: usize = 1000;

/// Regressor variance below which a component is rejected.
pub const MIN_REGRESSOR_VARIANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct ComponentSums {
    x: Complex64,
    xhat: Complex64,
    x_sq: f64,
    xhat_sq: f64,
    /// Σ conj(x)·x̂
    cross: Complex64,
}

/// Sufficient statistics of (xᵢ, x̂ᵢ) pairs, optionally with the raw pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct PairAccumulator {
    count: usize,
    sums: Vec<ComponentSums>,
    raw: Option<Vec<Vec<(Complex64, Complex64)>>>,
}

impl PairAccumulator {
    pub fn new(n: usize, keep_raw: bool) -> Self {
        PairAccumulator {
            count: 0,
            sums: vec![ComponentSums::default(); n],
            raw: keep_raw.then(|| vec![Vec::new(); n]),
        }
    }

    /// Single-component accumulator from explicit pairs.
    pub fn from_pairs<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (Complex64, Complex64)>,
    {
        let mut acc = PairAccumulator::new(1, false);
        for (x, xhat) in pairs {
            acc.push(
                &CVector::from_element(1, x),
                &CVector::from_element(1, xhat),
            );
        }
        acc
    }

    pub fn n(&self) -> usize {
        self.sums.len()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn push(&mut self, x: &CVector, xhat: &CVector) {
        debug_assert_eq!(x.len(), self.n());
        debug_assert_eq!(xhat.len(), self.n());
        self.count += 1;
        for (i, s) in self.sums.iter_mut().enumerate() {
            let (a, b) = (x[i], xhat[i]);
            s.x += a;
            s.xhat += b;
            s.x_sq += a.norm_sqr();
            s.xhat_sq += b.norm_sqr();
            s.cross += a.conj() * b;
        }
        if let Some(raw) = self.raw.as_mut() {
            for (i, pairs) in raw.iter_mut().enumerate() {
                pairs.push((x[i], xhat[i]));
            }
        }
    }

    /// Appends `other`; merge order determines floating-point rounding.
    pub fn merge(&mut self, other: &PairAccumulator) {
        assert_eq!(
            self.n(),
            other.n(),
            "merging accumulators of different size"
        );
        self.count += other.count;
        for (s, o) in self.sums.iter_mut().zip(&other.sums) {
            s.x += o.x;
            s.xhat += o.xhat;
            s.x_sq += o.x_sq;
            s.xhat_sq += o.xhat_sq;
            s.cross += o.cross;
        }
        if let (Some(mine), Some(theirs)) = (self.raw.as_mut(), other.raw.as_ref()) {
            for (a, b) in mine.iter_mut().zip(theirs) {
                a.extend_from_slice(b);
            }
        }
    }

    pub fn raw_pairs(&self) -> Option<&[Vec<(Complex64, Complex64)>]> {
        self.raw.as_deref()
    }

    /// CSV dump with columns `component,re_x,im_x,re_xhat,im_xhat`.
    /// Writes only the header when raw pairs were not kept.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["component", "re_x", "im_x", "re_xhat", "im_xhat"])?;
        if let Some(raw) = &self.raw {
            for (i, pairs) in raw.iter().enumerate() {
                for (x, xhat) in pairs {
                    w.write_record(&[
                        i.to_string(),
                        x.re.to_string(),
                        x.im.to_string(),
                        xhat.re.to_string(),
                        xhat.im.to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Fit of `x̂ᵢ ≈ slope·xᵢ + intercept` for one component.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ComponentRegression {
    #[serde(with = "serde_complex::scalar")]
    pub slope: Complex64,
    #[serde(with = "serde_complex::scalar")]
    pub intercept: Complex64,
    /// E|x̂ᵢ − slope·xᵢ − intercept|², unbiased (N − 2 denominator).
    pub residual_variance: f64,
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
}

impl ComponentRegression {
    /// |slope − expected| in units of the slope standard error.
    pub fn slope_z(&self, expected: Complex64) -> f64 {
        z_score(self.slope - expected, self.slope_stderr)
    }

    pub fn intercept_z(&self, expected: Complex64) -> f64 {
        z_score(self.intercept - expected, self.intercept_stderr)
    }
}

fn z_score(diff: Complex64, stderr: f64) -> f64 {
    let d = diff.norm();
    // exact fits: treat round-off-sized deviations as zero
    if d <= 1e-12 {
        0.0
    } else if stderr > 0.0 {
        d / stderr
    } else {
        f64::INFINITY
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionalBiasReport {
    pub n_pairs: usize,
    pub components: Vec<ComponentRegression>,
}

/// Complex least-squares fit of `x̂ᵢ` on `{xᵢ, 1}` for every component.
pub fn conditional_bias_regression(pairs: &PairAccumulator) -> Result<ConditionalBiasReport> {
    let count = pairs.count();
    if count < MIN_PAIRS {
        return Err(CwcuError::InsufficientSamples {
            required: MIN_PAIRS,
            got: count,
        });
    }
    let nf = count as f64;
    let components = pairs
        .sums
        .iter()
        .enumerate()
        .map(|(component, s)| {
            let mean_x = s.x / nf;
            let mean_xhat = s.xhat / nf;
            let var_x = s.x_sq / nf - mean_x.norm_sqr();
            if !(var_x >= MIN_REGRESSOR_VARIANCE) {
                return Err(CwcuError::DegenerateRegressor {
                    component,
                    variance: var_x,
                });
            }
            let var_xhat = s.xhat_sq / nf - mean_xhat.norm_sqr();
            let cov = s.cross / nf - mean_x.conj() * mean_xhat;
            let slope = cov / var_x;
            let intercept = mean_xhat - slope * mean_x;
            let rss = (nf * (var_xhat - slope.norm_sqr() * var_x)).max(0.0);
            let residual_variance = rss / (nf - 2.0);
            let slope_var = residual_variance / (nf * var_x);
            let intercept_var = residual_variance * (1.0 / nf + mean_x.norm_sqr() / (nf * var_x));
            Ok(ComponentRegression {
                slope,
                intercept,
                residual_variance,
                slope_stderr: slope_var.sqrt(),
                intercept_stderr: intercept_var.sqrt(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConditionalBiasReport {
        n_pairs: count,
        components,
    })
}
