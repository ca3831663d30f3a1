//! IEEE 802.11a/g/n long-training-symbol channel estimation.
//!
//! Two identical preamble symbols carry ±1 on 52 used subcarriers of a
//! 64-point DFT. After averaging the two received symbols in the frequency
//! domain and dropping unused bins, the observation is
//!
//! ```text
//! ȳ = D_p · Bᵀ · M₁ · h + ñ,    C_ññ = (N·σ_n² / 2) · I
//! ```
//!
//! where `D_p` holds the preamble signs, `B` selects the used subcarriers and
//! `M₁` is the first `l_h` columns of the unnormalized DFT matrix. The CIR
//! `h` has independent taps with an exponential power delay profile.
//!
//! Time-domain estimators estimate `h`; frequency-domain estimators estimate
//! the 64-bin response `h̃ = M₁·h`, including the unused bins.

use std::f64::consts::PI;
use std::io::Write;

use serde::Serialize;

use crate::blue::blue_b1;
use crate::cwcu::{cwcu_linear_gaussian, lmmse_linear};
use crate::error::{CwcuError, Result};
use crate::estimator::{AffineEstimator, DiagonalGain, EstimatorKind};
use crate::linalg::{c64, real_diag, symmetrize, CMatrix, CVector, HpdFactor};
use crate::model::LinearModel;
use crate::performance::generic_error_covariance;

/// Constants of the experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChanestSetup {
    /// DFT length N.
    pub dft_len: usize,
    /// Used subcarrier indices, ascending.
    pub used: Vec<usize>,
    /// CIR length l_h.
    pub channel_len: usize,
    /// Sampling period T_s in seconds.
    pub sample_period: f64,
    /// RMS delay spread τ_rms in seconds.
    pub delay_spread: f64,
    /// Time-domain noise variance σ_n².
    pub noise_var: f64,
    /// Preamble symbol on each used subcarrier, ±1.
    pub preamble_signs: Vec<f64>,
}

impl Default for ChanestSetup {
    fn default() -> Self {
        let used: Vec<usize> = (1..=26).chain(38..=63).collect();
        let preamble_signs = vec![1.0; used.len()];
        ChanestSetup {
            dft_len: 64,
            used,
            channel_len: 16,
            sample_period: 50e-9,
            delay_spread: 100e-9,
            noise_var: 0.01,
            preamble_signs,
        }
    }
}

impl ChanestSetup {
    pub fn with_noise_var(mut self, noise_var: f64) -> Self {
        self.noise_var = noise_var;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CwcuError::InvalidSetup(msg));
        if self.dft_len == 0 || self.channel_len == 0 || self.channel_len > self.dft_len {
            return bad(format!(
                "need 1 <= l_h <= N, got l_h = {}, N = {}",
                self.channel_len, self.dft_len
            ));
        }
        if self.used.is_empty() || self.used.windows(2).any(|w| w[0] >= w[1]) {
            return bad("used subcarriers must be non-empty and strictly ascending".into());
        }
        if self.used.iter().any(|&k| k >= self.dft_len) {
            return bad("used subcarrier index out of range".into());
        }
        if self.preamble_signs.len() != self.used.len()
            || self.preamble_signs.iter().any(|&s| s != 1.0 && s != -1.0)
        {
            return bad("preamble signs must be ±1, one per used subcarrier".into());
        }
        if !(self.sample_period > 0.0 && self.delay_spread > 0.0 && self.noise_var > 0.0) {
            return bad("T_s, τ_rms and σ_n² must be positive".into());
        }
        Ok(())
    }

    /// Per-bin noise variance after the DFT and two-symbol averaging.
    pub fn frequency_noise_var(&self) -> f64 {
        self.dft_len as f64 * self.noise_var / 2.0
    }
}

/// Unnormalized DFT matrix, entry (k, l) = exp(−j·2π·k·l / N).
pub fn build_dft_matrix(n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |k, l| {
        // reduce k·l mod N first to keep the phase argument small
        let phase = -2.0 * PI * ((k * l) % n) as f64 / n as f64;
        c64(phase.cos(), phase.sin())
    })
}

/// N×|used| carrier selection matrix; column k has a single one at row `used[k]`.
pub fn build_carrier_selection(setup: &ChanestSetup) -> CMatrix {
    let mut b = CMatrix::zeros(setup.dft_len, setup.used.len());
    for (k, &row) in setup.used.iter().enumerate() {
        b[(row, k)] = c64(1.0, 0.0);
    }
    b
}

/// Exponential power delay profile.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChannelPrior {
    pub variances: Vec<f64>,
}

impl ChannelPrior {
    pub fn covariance(&self) -> CMatrix {
        real_diag(&self.variances)
    }

    pub fn total_power(&self) -> f64 {
        self.variances.iter().sum()
    }
}

/// σᵢ² = (1 − exp(−T_s/τ_rms))·exp(−i·T_s/τ_rms), i = 0..l_h.
pub fn build_pdp(setup: &ChanestSetup) -> ChannelPrior {
    let ratio = setup.sample_period / setup.delay_spread;
    let scale = 1.0 - (-ratio).exp();
    ChannelPrior {
        variances: (0..setup.channel_len)
            .map(|i| scale * (-(i as f64) * ratio).exp())
            .collect(),
    }
}

/// All matrices of the experiment plus the time-domain linear model.
#[derive(Clone, Debug)]
pub struct ChanestModelBundle {
    pub setup: ChanestSetup,
    pub prior: ChannelPrior,
    /// F_N
    pub dft: CMatrix,
    /// B
    pub selection: CMatrix,
    /// D_p (diagonal, ±1)
    pub preamble: CMatrix,
    /// First l_h columns of F_N.
    pub m1: CMatrix,
    /// `ȳ = D_p·Bᵀ·M₁·h + ñ`
    pub model: LinearModel,
}

pub fn assemble_model(setup: &ChanestSetup) -> Result<ChanestModelBundle> {
    setup.validate()?;
    let dft = build_dft_matrix(setup.dft_len);
    let selection = build_carrier_selection(setup);
    let preamble = real_diag(&setup.preamble_signs);
    let m1 = dft.columns(0, setup.channel_len).into_owned();
    let prior = build_pdp(setup);
    let h = &preamble * selection.transpose() * &m1;
    let cnn = real_diag(&vec![setup.frequency_noise_var(); setup.used.len()]);
    let model = LinearModel::new(
        h,
        CVector::zeros(setup.channel_len),
        prior.covariance(),
        cnn,
    )?;
    Ok(ChanestModelBundle {
        setup: setup.clone(),
        prior,
        dft,
        selection,
        preamble,
        m1,
        model,
    })
}

impl ChanestModelBundle {
    /// C_h̃h̃ = M₁·C_hh·M₁ᴴ (rank l_h).
    pub fn frequency_prior_covariance(&self) -> CMatrix {
        symmetrize(&(&self.m1 * self.prior.covariance() * self.m1.adjoint()))
    }

    /// Model for the full 64-bin response: `ȳ = D_p·Bᵀ·h̃ + ñ`.
    /// Unused bins have zero columns in the observation matrix.
    pub fn frequency_model(&self) -> Result<LinearModel> {
        LinearModel::with_unobserved_components(
            &self.preamble * self.selection.transpose(),
            CVector::zeros(self.setup.dft_len),
            self.frequency_prior_covariance(),
            self.model.cnn().clone(),
        )
    }

    /// Model for the response at the used bins only: `ȳ = D_p·h̃_u + ñ`.
    pub fn used_bin_model(&self) -> Result<LinearModel> {
        let bt = self.selection.transpose();
        let cov = symmetrize(&(&bt * self.frequency_prior_covariance() * &self.selection));
        LinearModel::new(
            self.preamble.clone(),
            CVector::zeros(self.setup.used.len()),
            cov,
            self.model.cnn().clone(),
        )
    }
}

/// ȳ = ½·Bᵀ·F_N·(y⁽¹⁾ + y⁽²⁾)
pub fn average_received_preambles(
    y1: &CVector,
    y2: &CVector,
    bundle: &ChanestModelBundle,
) -> Result<CVector> {
    let n = bundle.setup.dft_len;
    if y1.len() != n || y2.len() != n {
        return Err(CwcuError::DimensionMismatch(format!(
            "received preambles must have length {n}, got {} and {}",
            y1.len(),
            y2.len()
        )));
    }
    let spectrum = &bundle.dft * (y1 + y2);
    Ok((bundle.selection.transpose() * spectrum).scale(0.5))
}

/// Estimators of the CIR h.
#[derive(Clone, Debug)]
pub struct TimeDomainEstimators {
    pub blue: AffineEstimator,
    pub lmmse: AffineEstimator,
    pub cwcu: AffineEstimator,
    pub gain: DiagonalGain,
}

/// Builds ĥ_B, ĥ_L and ĥ_CL from the closed forms specialised to
/// `D_pᴴ·D_p = I` and white noise:
///
/// ```text
/// ĥ_B  = (M₁ᴴ·B·Bᵀ·M₁)⁻¹ · M₁ᴴ·B·D_p⁻¹ · ȳ
/// ĥ_L  = (M₁ᴴ·B·Bᵀ·M₁ + (N·σ_n²/2)·C_hh⁻¹)⁻¹ · M₁ᴴ·B·D_p⁻¹ · ȳ
/// ĥ_CL = D · ĥ_L,   dᵢ = 1 / [E_L·H]ᵢᵢ
/// ```
pub fn time_domain_estimators(bundle: &ChanestModelBundle) -> Result<TimeDomainEstimators> {
    let l = bundle.setup.channel_len;
    let bt_m1 = bundle.selection.transpose() * &bundle.m1;
    let gram = symmetrize(&(bt_m1.adjoint() * &bt_m1));
    // D_p is ±1 on the diagonal, so D_p⁻¹ = D_p
    let matched = bt_m1.adjoint() * &bundle.preamble;

    let blue = HpdFactor::new(&gram, "M₁ᴴ·B·Bᵀ·M₁")?.solve(&matched);

    let regularizer: Vec<f64> = bundle
        .prior
        .variances
        .iter()
        .map(|v| bundle.setup.frequency_noise_var() / v)
        .collect();
    let regularized = &gram + real_diag(&regularizer);
    let lmmse = HpdFactor::new(&regularized, "regularized Gram matrix")?.solve(&matched);

    let gains_from_lmmse = &lmmse * bundle.model.h();
    let gain = (0..l)
        .map(|i| {
            let g = gains_from_lmmse[(i, i)];
            if !(g.re > 0.0) {
                return Err(CwcuError::UninformativeComponent {
                    component: i,
                    denominator: g.re,
                });
            }
            Ok(1.0 / g.re)
        })
        .collect::<Result<Vec<_>>>()?;
    let gain = DiagonalGain::new(gain);
    let cwcu = gain.scale_rows(&lmmse);

    let zero = CVector::zeros(l);
    Ok(TimeDomainEstimators {
        blue: AffineEstimator::new(blue, zero.clone(), EstimatorKind::B1)?,
        lmmse: AffineEstimator::new(lmmse, zero.clone(), EstimatorKind::Lmmse)?,
        cwcu: AffineEstimator::new(cwcu, zero, EstimatorKind::CwcuIndependent)?,
        gain,
    })
}

/// Estimators of the frequency response h̃.
#[derive(Clone, Debug)]
pub struct FrequencyDomainEstimators {
    /// D_p⁻¹·ȳ, defined on the used bins only (|used| outputs).
    pub trivial: AffineEstimator,
    /// M₁·ĥ_B
    pub blue: AffineEstimator,
    /// M₁·ĥ_L
    pub lmmse: AffineEstimator,
    /// CWCU LMMSE for h̃ under the prior M₁·C_hh·M₁ᴴ. Not M₁·ĥ_CL.
    pub cwcu: AffineEstimator,
    pub gain: DiagonalGain,
}

/// Relative tolerance on the equal per-bin prior variance of h̃.
const BIN_VARIANCE_TOL: f64 = 1e-9;

pub fn frequency_domain_estimators(
    bundle: &ChanestModelBundle,
) -> Result<FrequencyDomainEstimators> {
    let model = &bundle.model;
    let blue_time = blue_b1(model)?;
    let lmmse_time = lmmse_linear(model)?;
    let n_bins = bundle.setup.dft_len;
    let zero = CVector::zeros(n_bins);

    let freq_model = bundle.frequency_model()?;
    let total = bundle.prior.total_power();
    if let Some((bin, v)) = freq_model
        .prior_variances()
        .into_iter()
        .enumerate()
        .find(|(_, v)| (v - total).abs() > BIN_VARIANCE_TOL * total)
    {
        return Err(CwcuError::InvalidSetup(format!(
            "bin {bin} prior variance {v} differs from total tap power {total}"
        )));
    }
    let (cwcu_freq, gain) = cwcu_linear_gaussian(&freq_model)?;

    Ok(FrequencyDomainEstimators {
        trivial: AffineEstimator::new(
            bundle.preamble.clone(),
            CVector::zeros(bundle.setup.used.len()),
            EstimatorKind::Trivial,
        )?,
        blue: AffineEstimator::new(
            &bundle.m1 * blue_time.matrix(),
            zero.clone(),
            EstimatorKind::B2,
        )?,
        lmmse: AffineEstimator::new(&bundle.m1 * lmmse_time.matrix(), zero, EstimatorKind::Lmmse)?,
        cwcu: AffineEstimator::new(
            cwcu_freq.matrix().clone(),
            cwcu_freq.offset().clone(),
            EstimatorKind::CwcuLinearGaussian,
        )?,
        gain,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Time,
    Frequency,
}

/// Per-index Bayesian MSE of one estimator.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BmseCurve {
    pub label: String,
    /// Tap or subcarrier index of each value.
    pub axis: Vec<usize>,
    pub bmse: Vec<f64>,
}

impl BmseCurve {
    pub fn at(&self, index: usize) -> Option<f64> {
        self.axis
            .iter()
            .position(|&k| k == index)
            .map(|p| self.bmse[p])
    }

    pub fn mean(&self) -> f64 {
        self.bmse.iter().sum::<f64>() / self.bmse.len() as f64
    }

    /// (index, value) of the largest entry.
    pub fn argmax(&self) -> (usize, f64) {
        self.axis
            .iter()
            .zip(&self.bmse)
            .fold((0, f64::NEG_INFINITY), |best, (&k, &v)| {
                if v > best.1 {
                    (k, v)
                } else {
                    best
                }
            })
    }
}

pub const LABEL_BLUE: &str = "blue";
pub const LABEL_LMMSE: &str = "lmmse";
pub const LABEL_CWCU: &str = "cwcu";
pub const LABEL_TRIVIAL: &str = "trivial";

/// Analytic Bayesian MSE curves. Time domain: blue, lmmse, cwcu over taps.
/// Frequency domain: the same over all bins plus trivial over used bins.
pub fn analytic_bmse_curves(bundle: &ChanestModelBundle, which: Domain) -> Result<Vec<BmseCurve>> {
    let curve = |label: &str, axis: Vec<usize>, model: &LinearModel, est: &AffineEstimator| {
        generic_error_covariance(model, est).map(|p| BmseCurve {
            label: label.to_string(),
            axis,
            bmse: p.bmse,
        })
    };
    match which {
        Domain::Time => {
            let est = time_domain_estimators(bundle)?;
            let taps: Vec<usize> = (0..bundle.setup.channel_len).collect();
            Ok(vec![
                curve(LABEL_BLUE, taps.clone(), &bundle.model, &est.blue)?,
                curve(LABEL_LMMSE, taps.clone(), &bundle.model, &est.lmmse)?,
                curve(LABEL_CWCU, taps, &bundle.model, &est.cwcu)?,
            ])
        }
        Domain::Frequency => {
            let est = frequency_domain_estimators(bundle)?;
            let freq_model = bundle.frequency_model()?;
            let bins: Vec<usize> = (0..bundle.setup.dft_len).collect();
            Ok(vec![
                curve(LABEL_BLUE, bins.clone(), &freq_model, &est.blue)?,
                curve(LABEL_LMMSE, bins.clone(), &freq_model, &est.lmmse)?,
                curve(LABEL_CWCU, bins, &freq_model, &est.cwcu)?,
                curve(
                    LABEL_TRIVIAL,
                    bundle.setup.used.clone(),
                    &bundle.used_bin_model()?,
                    &est.trivial,
                )?,
            ])
        }
    }
}

/// `x` with 9 significant digits.
pub fn format_sig9(x: f64) -> String {
    format!("{x:.8e}")
}

fn find<'a>(curves: &'a [BmseCurve], label: &str) -> Result<&'a BmseCurve> {
    curves
        .iter()
        .find(|c| c.label == label)
        .ok_or_else(|| CwcuError::InvalidSetup(format!("missing {label} curve")))
}

fn cell(curve: &BmseCurve, index: usize) -> String {
    curve.at(index).map(format_sig9).unwrap_or_default()
}

/// CSV `tap_index,bmse_blue,bmse_lmmse,bmse_cwcu`.
pub fn write_time_csv<W: Write>(curves: &[BmseCurve], out: W) -> Result<()> {
    let blue = find(curves, LABEL_BLUE)?;
    let lmmse = find(curves, LABEL_LMMSE)?;
    let cwcu = find(curves, LABEL_CWCU)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["tap_index", "bmse_blue", "bmse_lmmse", "bmse_cwcu"])?;
    for &k in &blue.axis {
        w.write_record([k.to_string(), cell(blue, k), cell(lmmse, k), cell(cwcu, k)])?;
    }
    w.flush()?;
    Ok(())
}

/// CSV `subcarrier,bmse_blue,bmse_lmmse,bmse_cwcu,bmse_trivial`; the trivial
/// column is empty off the used set.
pub fn write_frequency_csv<W: Write>(curves: &[BmseCurve], out: W) -> Result<()> {
    let blue = find(curves, LABEL_BLUE)?;
    let lmmse = find(curves, LABEL_LMMSE)?;
    let cwcu = find(curves, LABEL_CWCU)?;
    let trivial = find(curves, LABEL_TRIVIAL)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "subcarrier",
        "bmse_blue",
        "bmse_lmmse",
        "bmse_cwcu",
        "bmse_trivial",
    ])?;
    for &k in &blue.axis {
        w.write_record([
            k.to_string(),
            cell(blue, k),
            cell(lmmse, k),
            cell(cwcu, k),
            cell(trivial, k),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, max_abs_diff};

    #[test]
    fn dft_two_point() {
        let f = build_dft_matrix(2);
        let expected = CMatrix::from_row_slice(
            2,
            2,
            &[c64(1.0, 0.0), c64(1.0, 0.0), c64(1.0, 0.0), c64(-1.0, 0.0)],
        );
        assert!(max_abs_diff(&f, &expected) < 1e-15);
    }

    #[test]
    fn dft_orthogonality() {
        let f = build_dft_matrix(64);
        let gram = f.adjoint() * &f;
        assert!(max_abs_diff(&gram, &identity(64).scale(64.0)) < 1e-9);
        assert!(f.row(0).iter().all(|z| (z - c64(1.0, 0.0)).norm() == 0.0));
        assert!(f
            .column(0)
            .iter()
            .all(|z| (z - c64(1.0, 0.0)).norm() == 0.0));
    }

    #[test]
    fn selection_matrix() {
        let setup = ChanestSetup::default();
        let b = build_carrier_selection(&setup);
        let bt = b.transpose();
        let mut e0 = CVector::zeros(64);
        e0[0] = c64(1.0, 0.0);
        assert!((&bt * &e0).iter().all(|z| z.norm() == 0.0));
        let mut e1 = CVector::zeros(64);
        e1[1] = c64(1.0, 0.0);
        let first = &bt * &e1;
        assert_eq!(first[0], c64(1.0, 0.0));
        assert!(first.iter().skip(1).all(|z| z.norm() == 0.0));
        assert_eq!(&bt * &b, identity(52));
        let mask = &b * &bt;
        let ones = (0..64).filter(|&k| mask[(k, k)] == c64(1.0, 0.0)).count();
        assert_eq!(ones, 52);
        assert_eq!(mask.iter().filter(|z| z.norm() != 0.0).count(), 52);
    }

    #[test]
    fn default_setup_is_valid() {
        let setup = ChanestSetup::default();
        setup.validate().unwrap();
        assert_eq!(setup.used.len(), 52);
        assert!(setup
            .used
            .iter()
            .all(|&k| k != 0 && !(27..=37).contains(&k)));
    }

    #[test]
    fn setup_rejects_bad_signs() {
        let mut setup = ChanestSetup::default();
        setup.preamble_signs[3] = 0.5;
        assert!(matches!(setup.validate(), Err(CwcuError::InvalidSetup(_))));
    }

    #[test]
    fn bundle_structure() {
        let bundle = assemble_model(&ChanestSetup::default()).unwrap();
        assert_eq!(bundle.model.m(), 52);
        assert_eq!(bundle.model.n(), 16);
        let m1_gram = bundle.m1.adjoint() * &bundle.m1;
        assert!(max_abs_diff(&m1_gram, &identity(16).scale(64.0)) < 1e-9);
        assert_eq!(bundle.preamble.adjoint() * &bundle.preamble, identity(52));
        for j in 0..16 {
            assert!((bundle.model.h().column(j).norm_squared() - 52.0).abs() < 1e-9);
        }
        assert!((bundle.model.cnn()[(0, 0)].re - 0.32).abs() < 1e-15);
    }

    #[test]
    fn average_rejects_wrong_length() {
        let bundle = assemble_model(&ChanestSetup::default()).unwrap();
        let err = average_received_preambles(&CVector::zeros(64), &CVector::zeros(63), &bundle);
        assert!(matches!(err, Err(CwcuError::DimensionMismatch(_))));
    }

    #[test]
    fn sig9_format() {
        assert_eq!(format_sig9(36.372927624), "3.63729276e1");
        assert_eq!(format_sig9(0.32), "3.20000000e-1");
    }
}
