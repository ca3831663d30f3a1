use std::thread;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::prior::{NoiseSampler, PriorSpec};
use super::regression::PairAccumulator;
use crate::error::{CwcuError, Result};
use crate::estimator::{AffineEstimator, EstimatorKind};
use crate::io::serde_complex;
use crate::linalg::{max_abs, max_abs_diff, CMatrix, CVector};
use crate::model::LinearModel;

/// Trials per RNG stream. Work is split into chunks of this size so the
/// random draws never depend on the worker count.
pub const CHUNK_TRIALS: usize = 1024;

/// Tolerance on prior/model moment agreement, relative to `max(1, scale)`.
pub const PRIOR_CONSISTENCY_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct TrialConfig {
    pub n_trials: usize,
    pub seed: u64,
    pub n_workers: usize,
    /// Keep raw (xᵢ, x̂ᵢ) pairs for CSV dumps.
    pub keep_pairs: bool,
    /// Accumulate the full empirical error covariance (O(n²) per trial).
    pub track_covariance: bool,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            n_trials: 100_000,
            seed: 0,
            n_workers: 1,
            keep_pairs: false,
            track_covariance: false,
        }
    }
}

/// Sample statistics of the error `x − x̂`.
#[derive(Clone, Debug, Serialize)]
pub struct EmpiricalPerformance {
    pub n_trials: usize,
    pub bmse: Vec<f64>,
    /// Standard error of each `bmse` entry.
    pub bmse_stderr: Vec<f64>,
    #[serde(with = "serde_complex::vector")]
    pub error_mean: CVector,
    #[serde(with = "serde_complex::option_matrix")]
    pub error_cov: Option<CMatrix>,
    /// Entrywise standard error of the second-moment estimate.
    pub error_cov_stderr: Option<Vec<Vec<f64>>>,
}

/// Per-estimator output of [`run_trials`].
#[derive(Clone, Debug)]
pub struct EstimatorTrials {
    pub kind: EstimatorKind,
    pub performance: EmpiricalPerformance,
    pub pairs: PairAccumulator,
}

#[derive(Clone, Debug)]
struct ErrorSums {
    sum: CVector,
    sq: Vec<f64>,
    quad: Vec<f64>,
    outer: Option<CMatrix>,
    outer_sq: Option<DMatrix<f64>>,
}

impl ErrorSums {
    fn new(n: usize, track_covariance: bool) -> Self {
        ErrorSums {
            sum: CVector::zeros(n),
            sq: vec![0.0; n],
            quad: vec![0.0; n],
            outer: track_covariance.then(|| CMatrix::zeros(n, n)),
            outer_sq: track_covariance.then(|| DMatrix::zeros(n, n)),
        }
    }

    fn push(&mut self, err: &CVector) {
        self.sum += err;
        for (i, e) in err.iter().enumerate() {
            let p = e.norm_sqr();
            self.sq[i] += p;
            self.quad[i] += p * p;
        }
        if let (Some(outer), Some(outer_sq)) = (self.outer.as_mut(), self.outer_sq.as_mut()) {
            let n = err.len();
            for j in 0..n {
                let ej = err[j].conj();
                for i in 0..n {
                    let v = err[i] * ej;
                    outer[(i, j)] += v;
                    outer_sq[(i, j)] += v.norm_sqr();
                }
            }
        }
    }

    fn merge(&mut self, other: &ErrorSums) {
        self.sum += &other.sum;
        for (a, b) in self.sq.iter_mut().zip(&other.sq) {
            *a += b;
        }
        for (a, b) in self.quad.iter_mut().zip(&other.quad) {
            *a += b;
        }
        if let (Some(a), Some(b)) = (self.outer.as_mut(), other.outer.as_ref()) {
            *a += b;
        }
        if let (Some(a), Some(b)) = (self.outer_sq.as_mut(), other.outer_sq.as_ref()) {
            *a += b;
        }
    }

    fn finish(&self, count: usize) -> EmpiricalPerformance {
        let nf = count as f64;
        let bmse: Vec<f64> = self.sq.iter().map(|s| s / nf).collect();
        let bmse_stderr = self
            .quad
            .iter()
            .zip(&bmse)
            .map(|(q, b)| ((q / nf - b * b).max(0.0) / nf).sqrt())
            .collect();
        let error_mean = self.sum.unscale(nf);
        let (error_cov, error_cov_stderr) = match (&self.outer, &self.outer_sq) {
            (Some(outer), Some(outer_sq)) => {
                let second = outer.unscale(nf);
                let cov = &second - &error_mean * error_mean.adjoint();
                let stderr = (0..second.nrows())
                    .map(|i| {
                        (0..second.ncols())
                            .map(|j| {
                                ((outer_sq[(i, j)] / nf - second[(i, j)].norm_sqr()).max(0.0) / nf)
                                    .sqrt()
                            })
                            .collect()
                    })
                    .collect();
                (Some(cov), Some(stderr))
            }
            _ => (None, None),
        };
        EmpiricalPerformance {
            n_trials: count,
            bmse,
            bmse_stderr,
            error_mean,
            error_cov,
            error_cov_stderr,
        }
    }
}

#[derive(Clone, Debug)]
struct ChunkStats {
    count: usize,
    per_estimator: Vec<(ErrorSums, PairAccumulator)>,
}

impl ChunkStats {
    fn new(estimators: &[AffineEstimator], cfg: &TrialConfig) -> Self {
        ChunkStats {
            count: 0,
            per_estimator: estimators
                .iter()
                .map(|e| {
                    (
                        ErrorSums::new(e.n(), cfg.track_covariance),
                        PairAccumulator::new(e.n(), cfg.keep_pairs),
                    )
                })
                .collect(),
        }
    }

    fn merge(&mut self, other: &ChunkStats) {
        self.count += other.count;
        for ((a_err, a_pairs), (b_err, b_pairs)) in
            self.per_estimator.iter_mut().zip(&other.per_estimator)
        {
            a_err.merge(b_err);
            a_pairs.merge(b_pairs);
        }
    }
}

fn check_consistency(
    model: &LinearModel,
    prior: &PriorSpec,
    estimators: &[AffineEstimator],
) -> Result<()> {
    if prior.dim() != model.n() {
        return Err(CwcuError::InconsistentPrior(format!(
            "prior has dimension {}, model has n = {}",
            prior.dim(),
            model.n()
        )));
    }
    let mean_dev = (prior.mean() - model.mean_x())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    let mean_scale = model.mean_x().iter().map(|z| z.norm()).fold(1.0, f64::max);
    if mean_dev > PRIOR_CONSISTENCY_TOL * mean_scale {
        return Err(CwcuError::InconsistentPrior(format!(
            "prior mean deviates from model mean by {mean_dev:.3e}"
        )));
    }
    let cov_dev = max_abs_diff(&prior.covariance(), model.cxx());
    if cov_dev > PRIOR_CONSISTENCY_TOL * max_abs(model.cxx()).max(1.0) {
        return Err(CwcuError::InconsistentPrior(format!(
            "prior covariance deviates from model C_xx by {cov_dev:.3e}"
        )));
    }
    if let Some(est) = estimators
        .iter()
        .find(|e| e.n() != model.n() || e.m() != model.m())
    {
        return Err(CwcuError::DimensionMismatch(format!(
            "{} estimator is {}x{}, model needs {}x{}",
            est.kind().label(),
            est.n(),
            est.m(),
            model.n(),
            model.m()
        )));
    }
    Ok(())
}

/// Draws `(x, n)`, forms `y = H·x + n` and applies every estimator.
///
/// Trials are grouped into chunks of [`CHUNK_TRIALS`]; chunk `k` uses a
/// ChaCha8 stream seeded with `(seed, k)`. Workers process chunks
/// `w, w + W, ...` and the per-chunk sums are merged in chunk order, so the
/// result is bit-identical for any worker count.
pub fn run_trials(
    model: &LinearModel,
    prior: &PriorSpec,
    estimators: &[AffineEstimator],
    cfg: &TrialConfig,
) -> Result<Vec<EstimatorTrials>> {
    if cfg.n_trials == 0 || cfg.n_workers == 0 {
        return Err(CwcuError::InvalidSetup(
            "n_trials and n_workers must be positive".into(),
        ));
    }
    check_consistency(model, prior, estimators)?;
    let sampler = prior.sampler()?;
    let noise = NoiseSampler::new(model.cnn())?;
    let n_chunks = cfg.n_trials.div_ceil(CHUNK_TRIALS);
    let workers = cfg.n_workers.min(n_chunks);

    let run_chunk = |chunk: usize| -> ChunkStats {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(chunk as u64);
        let start = chunk * CHUNK_TRIALS;
        let len = CHUNK_TRIALS.min(cfg.n_trials - start);
        let mut stats = ChunkStats::new(estimators, cfg);
        let mut y = CVector::zeros(model.m());
        let mut outputs: Vec<CVector> = estimators.iter().map(|e| CVector::zeros(e.n())).collect();
        for _ in 0..len {
            let x = sampler.sample(&mut rng);
            let n = noise.sample(&mut rng);
            y.copy_from(&n);
            y.gemv(1.0.into(), model.h(), &x, 1.0.into());
            for ((est, out), (errs, pairs)) in estimators
                .iter()
                .zip(outputs.iter_mut())
                .zip(stats.per_estimator.iter_mut())
            {
                est.apply_into(&y, out);
                pairs.push(&x, out);
                errs.push(&(&x - &*out));
            }
            stats.count += 1;
        }
        stats
    };

    let mut chunks: Vec<Option<ChunkStats>> = vec![None; n_chunks];
    if workers == 1 {
        for (k, slot) in chunks.iter_mut().enumerate() {
            *slot = Some(run_chunk(k));
        }
    } else {
        let results: Vec<Vec<(usize, ChunkStats)>> = thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let run_chunk = &run_chunk;
                    scope.spawn(move || {
                        (w..n_chunks)
                            .step_by(workers)
                            .map(|k| (k, run_chunk(k)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("trial worker panicked"))
                .collect()
        });
        for (k, stats) in results.into_iter().flatten() {
            chunks[k] = Some(stats);
        }
    }

    let mut total = ChunkStats::new(estimators, cfg);
    for stats in chunks.iter().flatten() {
        total.merge(stats);
    }
    Ok(estimators
        .iter()
        .zip(total.per_estimator)
        .map(|(est, (errs, pairs))| EstimatorTrials {
            kind: est.kind(),
            performance: errs.finish(total.count),
            pairs,
        })
        .collect())
}
