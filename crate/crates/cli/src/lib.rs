//! `cwcu` command-line front end.
//!
//! Subcommands:
//!
//! * `validate`: algebraic identity suite on seeded random models.
//! * `compare`: analytic per-component Bayesian MSE of every applicable
//!   estimator on one model.
//! * `mc`: Monte Carlo run with conditional-bias regression.
//! * `chanest`: the 802.11 channel estimation curves.
//!
//! Exit status is 0 when every executed check passes, 1 when a check fails
//! and 2 on errors. Errors go to stderr as `error[CODE]: message`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use cwcu_core::chanest::{self, BmseCurve, ChanestSetup, Domain};
use cwcu_core::io::{parse_model, serde_complex, LoadedModel};
use cwcu_core::montecarlo::{
    conditional_bias_regression, run_trials, ComponentPrior, ComponentRegression,
    EmpiricalPerformance, PriorSpec, TrialConfig,
};
use cwcu_core::random::{random_linear_model, PriorShape};
use cwcu_core::validate::run_identity_suite;
use cwcu_core::{
    blue_b1, c64, cwcu_error_covariance, cwcu_from_moments, cwcu_linear_gaussian,
    cwcu_linear_independent, generic_error_covariance, lmmse_linear, AffineEstimator, CVector,
    Complex64, CwcuError, DiagonalGain, EstimatorKind, JointGaussianModel, LinearModel, Result,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Slack on the LMMSE ≤ CWCU ≤ B1 ordering.
pub const ORDERING_SLACK: f64 = 1e-9;

/// Width of the slope/intercept acceptance band in standard errors.
pub const BAND_SIGMAS: f64 = 3.0;

#[derive(Debug, Parser)]
#[command(name = "cwcu", version, about = "CWCU LMMSE estimation toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub opts: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Monte Carlo trials.
    #[arg(long, global = true, default_value_t = 100_000)]
    pub trials: usize,
    /// Worker threads for Monte Carlo runs; results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Time-domain noise variance of the channel study.
    #[arg(long = "sigma-n2", global = true, default_value_t = 0.01)]
    pub sigma_n2: f64,
    /// JSON model file; a random model is generated when absent.
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Prior family used for estimator selection and sampling.
    #[arg(long, global = true, value_enum, default_value_t = PriorKind::Gaussian)]
    pub prior: PriorKind,
    /// Output directory; reports go to stdout when absent (except chanest).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Parameters of generated models.
    #[arg(long, global = true, default_value_t = 3)]
    pub n: usize,
    #[arg(long, global = true, default_value_t = 5)]
    pub m: usize,
    /// Random models in the identity suite.
    #[arg(long, global = true, default_value_t = 100)]
    pub models: usize,
    /// Write raw (x, x̂) pairs of each estimator as CSV into --out.
    #[arg(long = "dump-pairs", global = true)]
    pub dump_pairs: bool,
    /// Scales every CWCU matrix by 1 + eps before validation.
    #[arg(long, global = true, hide = true)]
    pub perturb: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Run the algebraic identity suite.
    Validate,
    /// Analytic Bayesian MSE of every applicable estimator on one model.
    Compare,
    /// Monte Carlo conditional-bias and Bayesian MSE check.
    Mc,
    /// 802.11 channel estimation curves.
    Chanest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PriorKind {
    Gaussian,
    /// Independent complex Gaussian components.
    Independent,
    #[value(name = "independent:gaussian")]
    IndependentGaussian,
    #[value(name = "independent:qpsk")]
    IndependentQpsk,
    #[value(name = "independent:uniform")]
    IndependentUniform,
}

impl PriorKind {
    pub fn is_independent(self) -> bool {
        self != PriorKind::Gaussian
    }

    pub fn label(self) -> &'static str {
        match self {
            PriorKind::Gaussian => "gaussian",
            PriorKind::Independent | PriorKind::IndependentGaussian => "independent:gaussian",
            PriorKind::IndependentQpsk => "independent:qpsk",
            PriorKind::IndependentUniform => "independent:uniform",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Result of a command that did not error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    ChecksFailed,
}

impl Outcome {
    fn from_pass(pass: bool) -> Self {
        if pass {
            Outcome::Pass
        } else {
            Outcome::ChecksFailed
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::ChecksFailed => 1,
        }
    }
}

/// Exit code for errors.
pub const ERROR_EXIT: i32 = 2;

/// One-line stderr rendering of an error.
pub fn render_error(e: &CwcuError) -> String {
    format!("error[{}]: {e}", e.code())
}

pub fn run<W: Write>(cli: &Cli, stdout: &mut W) -> Result<Outcome> {
    let opts = &cli.opts;
    match cli.command {
        Command::Validate => cmd_validate(opts, stdout),
        Command::Compare => cmd_compare(opts, stdout),
        Command::Mc => cmd_mc(opts, stdout),
        Command::Chanest => cmd_chanest(opts, stdout),
    }
}

fn emit<W: Write>(opts: &GlobalOpts, file_name: &str, content: &str, stdout: &mut W) -> Result<()> {
    match &opts.out {
        Some(dir) => write_file(dir, file_name, content),
        None => {
            stdout.write_all(content.as_bytes())?;
            Ok(())
        }
    }
}

fn write_file(dir: &Path, file_name: &str, content: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CwcuError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(file_name);
    fs::write(&path, content).map_err(|e| CwcuError::Io(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serialization cannot fail");
    s.push('\n');
    s
}

fn csv_text<F>(fill: F) -> Result<String>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    fill(&mut w)?;
    let bytes = w.into_inner().map_err(|e| CwcuError::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn extension(format: Format) -> &'static str {
    match format {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

fn format_or(opts: &GlobalOpts, default: Format) -> Format {
    opts.format.unwrap_or(default)
}

// ---------------------------------------------------------------- validate

fn cmd_validate<W: Write>(opts: &GlobalOpts, stdout: &mut W) -> Result<Outcome> {
    let report = run_identity_suite(opts.seed, opts.models, opts.perturb)?;
    let format = format_or(opts, Format::Json);
    let text = match format {
        Format::Json => to_json(&report),
        Format::Csv => csv_text(|w| {
            w.write_record(["name", "max_dev", "tol", "pass"])?;
            for c in &report.checks {
                w.write_record([
                    c.name.clone(),
                    format!("{:e}", c.max_dev),
                    format!("{:e}", c.tol),
                    c.pass.to_string(),
                ])?;
            }
            Ok(())
        })?,
    };
    emit(
        opts,
        &format!("validate.{}", extension(format)),
        &text,
        stdout,
    )?;
    Ok(Outcome::from_pass(report.pass))
}

// ----------------------------------------------------------------- models

/// Generated models draw from a stream no trial chunk uses.
const MODEL_STREAM: u64 = u64::MAX;

fn model_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(MODEL_STREAM);
    rng
}

pub fn load_model(opts: &GlobalOpts) -> Result<LoadedModel> {
    match &opts.model {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CwcuError::Io(format!("{}: {e}", path.display())))?;
            parse_model(&text)
        }
        None => {
            let shape = if opts.prior.is_independent() {
                PriorShape::Diagonal
            } else {
                PriorShape::Correlated
            };
            let model = random_linear_model(&mut model_rng(opts.seed), opts.n, opts.m, shape)?;
            if opts.prior == PriorKind::IndependentQpsk {
                // QPSK symbols are zero mean
                return Ok(LoadedModel::Linear(LinearModel::new(
                    model.h().clone(),
                    CVector::zeros(model.n()),
                    model.cxx().clone(),
                    model.cnn().clone(),
                )?));
            }
            Ok(LoadedModel::Linear(model))
        }
    }
}

fn cwcu_for(model: &LinearModel, prior: PriorKind) -> Result<(AffineEstimator, DiagonalGain)> {
    if prior.is_independent() {
        cwcu_linear_independent(model)
    } else {
        cwcu_linear_gaussian(model)
    }
}

/// LMMSE, the CWCU variant selected by the prior, and B1 when m ≥ n.
fn linear_estimators(
    model: &LinearModel,
    prior: PriorKind,
) -> Result<(Vec<AffineEstimator>, DiagonalGain)> {
    let (cwcu, d) = cwcu_for(model, prior)?;
    let mut ests = vec![lmmse_linear(model)?, cwcu];
    if model.m() >= model.n() {
        ests.push(blue_b1(model)?);
    }
    Ok((ests, d))
}

// ---------------------------------------------------------------- compare

#[derive(Debug, Serialize)]
struct EstimatorBmse {
    kind: EstimatorKind,
    bmse: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct CompareReport {
    model_kind: &'static str,
    n: usize,
    m: usize,
    d: Vec<f64>,
    estimators: Vec<EstimatorBmse>,
    ordering_holds: bool,
}

fn compare_linear(model: &LinearModel, prior: PriorKind) -> Result<CompareReport> {
    let (ests, d) = linear_estimators(model, prior)?;
    let estimators = ests
        .iter()
        .map(|e| {
            generic_error_covariance(model, e).map(|p| EstimatorBmse {
                kind: e.kind(),
                bmse: p.bmse,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CompareReport {
        model_kind: "linear",
        n: model.n(),
        m: model.m(),
        d: d.values().to_vec(),
        ordering_holds: ordering_holds(&estimators),
        estimators,
    })
}

fn compare_joint(model: &JointGaussianModel) -> Result<CompareReport> {
    let (_, d) = cwcu_from_moments(model)?;
    let ones = DiagonalGain::new(vec![1.0; model.n()]);
    let estimators = vec![
        EstimatorBmse {
            kind: EstimatorKind::Lmmse,
            bmse: cwcu_error_covariance(model, &ones)?.bmse,
        },
        EstimatorBmse {
            kind: EstimatorKind::CwcuMoments,
            bmse: cwcu_error_covariance(model, &d)?.bmse,
        },
    ];
    Ok(CompareReport {
        model_kind: "joint_gaussian",
        n: model.n(),
        m: model.m(),
        d: d.values().to_vec(),
        ordering_holds: ordering_holds(&estimators),
        estimators,
    })
}

/// Row-wise bmse(LMMSE) ≤ bmse(CWCU) ≤ bmse(B1) for whichever are present.
fn ordering_holds(ests: &[EstimatorBmse]) -> bool {
    ests.windows(2).all(|w| {
        w[0].bmse
            .iter()
            .zip(&w[1].bmse)
            .all(|(a, b)| *a <= b + ORDERING_SLACK)
    })
}

fn cmd_compare<W: Write>(opts: &GlobalOpts, stdout: &mut W) -> Result<Outcome> {
    let report = match load_model(opts)? {
        LoadedModel::Linear(model) => compare_linear(&model, opts.prior)?,
        LoadedModel::JointGaussian(model) => compare_joint(&model)?,
    };
    let format = format_or(opts, Format::Csv);
    let text = match format {
        Format::Json => to_json(&report),
        Format::Csv => csv_text(|w| {
            let mut header = vec!["component".to_string(), "d".to_string()];
            header.extend(
                report
                    .estimators
                    .iter()
                    .map(|e| format!("bmse_{}", e.kind.label().to_ascii_lowercase())),
            );
            w.write_record(header)?;
            for i in 0..report.n {
                let mut row = vec![i.to_string(), chanest::format_sig9(report.d[i])];
                row.extend(
                    report
                        .estimators
                        .iter()
                        .map(|e| chanest::format_sig9(e.bmse[i])),
                );
                w.write_record(row)?;
            }
            Ok(())
        })?,
    };
    emit(
        opts,
        &format!("compare.{}", extension(format)),
        &text,
        stdout,
    )?;
    Ok(Outcome::Pass)
}

// --------------------------------------------------------------------- mc

/// Sampling prior matching the model's first and second moments.
pub fn sampling_prior(model: &LinearModel, kind: PriorKind) -> Result<PriorSpec> {
    if kind.is_independent() {
        if let Some((row, col, magnitude)) =
            model.off_diagonal_violation(cwcu_core::cwcu::DIAGONAL_PRIOR_TOL)
        {
            return Err(CwcuError::NotDiagonalPrior {
                row,
                col,
                magnitude,
            });
        }
    }
    let vars = model.prior_variances();
    let mean = model.mean_x();
    let components = |f: &dyn Fn(usize, f64) -> ComponentPrior| {
        vars.iter().enumerate().map(|(i, &v)| f(i, v)).collect()
    };
    Ok(match kind {
        PriorKind::Gaussian => PriorSpec::Gaussian {
            mean: mean.clone(),
            cov: model.cxx().clone(),
        },
        PriorKind::Independent | PriorKind::IndependentGaussian => PriorSpec::Independent {
            components: components(&|i, var| ComponentPrior::ComplexGaussian {
                mean: mean[i],
                var,
            }),
        },
        PriorKind::IndependentQpsk => PriorSpec::Independent {
            components: components(&|_, var| ComponentPrior::Qpsk { var }),
        },
        PriorKind::IndependentUniform => PriorSpec::Independent {
            components: components(&|i, var| ComponentPrior::UniformDisk { mean: mean[i], var }),
        },
    })
}

#[derive(Debug, Serialize)]
pub struct BandCheck {
    pub component: usize,
    pub quantity: &'static str,
    #[serde(with = "serde_complex::scalar")]
    pub expected: Complex64,
    #[serde(with = "serde_complex::scalar")]
    pub estimate: Complex64,
    pub stderr: f64,
    pub z: f64,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct McEstimatorReport {
    pub kind: EstimatorKind,
    pub performance: EmpiricalPerformance,
    pub analytic_bmse: Vec<f64>,
    /// |empirical − analytic| / stderr per component (informational).
    pub bmse_z: Vec<f64>,
    pub regression: Vec<ComponentRegression>,
    pub checks: Vec<BandCheck>,
}

#[derive(Debug, Serialize)]
pub struct McReport {
    pub seed: u64,
    pub n_trials: usize,
    pub prior: &'static str,
    pub n: usize,
    pub m: usize,
    pub d: Vec<f64>,
    pub estimators: Vec<McEstimatorReport>,
    pub pass: bool,
}

fn band(
    component: usize,
    quantity: &'static str,
    expected: Complex64,
    r: &ComponentRegression,
) -> BandCheck {
    let (estimate, stderr, z) = match quantity {
        "slope" => (r.slope, r.slope_stderr, r.slope_z(expected)),
        _ => (r.intercept, r.intercept_stderr, r.intercept_z(expected)),
    };
    BandCheck {
        component,
        quantity,
        expected,
        estimate,
        stderr,
        z,
        pass: z <= BAND_SIGMAS,
    }
}

/// Expected conditional-mean line of component i: CWCU and B1 give slope 1,
/// intercept 0; the LMMSE gives slope 1/dᵢ and intercept (1 − 1/dᵢ)·E[xᵢ].
fn expected_line(kind: EstimatorKind, d: f64, mean: Complex64) -> (Complex64, Complex64) {
    if kind.is_conditionally_unbiased() {
        (c64(1.0, 0.0), c64(0.0, 0.0))
    } else {
        let inv = 1.0 / d;
        (c64(inv, 0.0), mean * (1.0 - inv))
    }
}

/// Runs the Monte Carlo report for a linear model.
pub fn mc_report(
    model: &LinearModel,
    kind: PriorKind,
    cfg: &TrialConfig,
) -> Result<(
    McReport,
    Vec<(EstimatorKind, cwcu_core::montecarlo::PairAccumulator)>,
)> {
    let prior = sampling_prior(model, kind)?;
    let (ests, d) = linear_estimators(model, kind)?;
    let trials = run_trials(model, &prior, &ests, cfg)?;
    let mut estimators = Vec::new();
    let mut pairs = Vec::new();
    for (est, t) in ests.iter().zip(trials) {
        let analytic = generic_error_covariance(model, est)?.bmse;
        let bmse_z = t
            .performance
            .bmse
            .iter()
            .zip(&analytic)
            .zip(&t.performance.bmse_stderr)
            .map(|((e, a), s)| (e - a).abs() / s)
            .collect();
        let regression = conditional_bias_regression(&t.pairs)?;
        let mut checks = Vec::new();
        for (i, r) in regression.components.iter().enumerate() {
            let (slope, intercept) = expected_line(est.kind(), d.get(i), model.mean_x()[i]);
            checks.push(band(i, "slope", slope, r));
            checks.push(band(i, "intercept", intercept, r));
        }
        pairs.push((est.kind(), t.pairs));
        estimators.push(McEstimatorReport {
            kind: est.kind(),
            performance: t.performance,
            analytic_bmse: analytic,
            bmse_z,
            regression: regression.components,
            checks,
        });
    }
    let pass = estimators.iter().all(|e| e.checks.iter().all(|c| c.pass));
    Ok((
        McReport {
            seed: cfg.seed,
            n_trials: cfg.n_trials,
            prior: kind.label(),
            n: model.n(),
            m: model.m(),
            d: d.values().to_vec(),
            estimators,
            pass,
        },
        pairs,
    ))
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn cmd_mc<W: Write>(opts: &GlobalOpts, stdout: &mut W) -> Result<Outcome> {
    let model = match load_model(opts)? {
        LoadedModel::Linear(model) => model,
        LoadedModel::JointGaussian(_) => {
            return Err(CwcuError::InvalidSetup(
                "mc needs a linear model (joint moments do not define a sampler)".into(),
            ))
        }
    };
    if opts.dump_pairs && opts.out.is_none() {
        return Err(CwcuError::InvalidSetup("--dump-pairs needs --out".into()));
    }
    let cfg = TrialConfig {
        n_trials: opts.trials,
        seed: opts.seed,
        n_workers: opts.workers.unwrap_or_else(default_workers),
        keep_pairs: opts.dump_pairs,
        track_covariance: false,
    };
    let (report, pairs) = mc_report(&model, opts.prior, &cfg)?;
    if let (true, Some(dir)) = (opts.dump_pairs, &opts.out) {
        for (kind, acc) in &pairs {
            let mut buf = Vec::new();
            acc.write_csv(&mut buf)?;
            let text = String::from_utf8(buf).expect("csv output is utf-8");
            let name = format!("pairs_{}.csv", kind.label().to_ascii_lowercase());
            write_file(dir, &name, &text)?;
        }
    }
    let format = format_or(opts, Format::Json);
    let text = match format {
        Format::Json => to_json(&report),
        Format::Csv => csv_text(|w| {
            w.write_record([
                "estimator",
                "component",
                "quantity",
                "expected_re",
                "expected_im",
                "estimate_re",
                "estimate_im",
                "stderr",
                "z",
                "pass",
            ])?;
            for e in &report.estimators {
                for c in &e.checks {
                    w.write_record([
                        e.kind.label().to_ascii_lowercase(),
                        c.component.to_string(),
                        c.quantity.to_string(),
                        c.expected.re.to_string(),
                        c.expected.im.to_string(),
                        c.estimate.re.to_string(),
                        c.estimate.im.to_string(),
                        c.stderr.to_string(),
                        c.z.to_string(),
                        c.pass.to_string(),
                    ])?;
                }
            }
            Ok(())
        })?,
    };
    emit(opts, &format!("mc.{}", extension(format)), &text, stdout)?;
    Ok(Outcome::from_pass(report.pass))
}

// ---------------------------------------------------------------- chanest

#[derive(Debug, Serialize)]
pub struct ChanestSummary {
    pub sigma_n2: f64,
    pub max_blue_freq_bmse: f64,
    pub argmax_subcarrier: usize,
    pub mean_bmse_time: BTreeMap<String, f64>,
    pub mean_bmse_frequency: BTreeMap<String, f64>,
    /// Mean over taps of bmse(CWCU) / bmse(LMMSE).
    pub time_cwcu_lmmse_ratio: f64,
}

pub struct ChanestOutput {
    pub time: Vec<BmseCurve>,
    pub frequency: Vec<BmseCurve>,
    pub summary: ChanestSummary,
}

fn curve<'a>(curves: &'a [BmseCurve], label: &str) -> &'a BmseCurve {
    curves
        .iter()
        .find(|c| c.label == label)
        .expect("analytic_bmse_curves returns every label")
}

pub fn chanest_output(sigma_n2: f64) -> Result<ChanestOutput> {
    let bundle = chanest::assemble_model(&ChanestSetup::default().with_noise_var(sigma_n2))?;
    let time = chanest::analytic_bmse_curves(&bundle, Domain::Time)?;
    let frequency = chanest::analytic_bmse_curves(&bundle, Domain::Frequency)?;
    let (argmax_subcarrier, max_blue_freq_bmse) = curve(&frequency, chanest::LABEL_BLUE).argmax();
    let lmmse = curve(&time, chanest::LABEL_LMMSE);
    let cwcu = curve(&time, chanest::LABEL_CWCU);
    let time_cwcu_lmmse_ratio = cwcu
        .bmse
        .iter()
        .zip(&lmmse.bmse)
        .map(|(c, l)| c / l)
        .sum::<f64>()
        / cwcu.bmse.len() as f64;
    let means = |curves: &[BmseCurve]| curves.iter().map(|c| (c.label.clone(), c.mean())).collect();
    let summary = ChanestSummary {
        sigma_n2,
        max_blue_freq_bmse,
        argmax_subcarrier,
        mean_bmse_time: means(&time),
        mean_bmse_frequency: means(&frequency),
        time_cwcu_lmmse_ratio,
    };
    Ok(ChanestOutput {
        time,
        frequency,
        summary,
    })
}

fn cmd_chanest<W: Write>(opts: &GlobalOpts, stdout: &mut W) -> Result<Outcome> {
    let out = chanest_output(opts.sigma_n2)?;
    let dir = opts.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let mut fig2 = Vec::new();
    chanest::write_time_csv(&out.time, &mut fig2)?;
    let mut fig3 = Vec::new();
    chanest::write_frequency_csv(&out.frequency, &mut fig3)?;
    write_file(
        &dir,
        "fig2.csv",
        &String::from_utf8(fig2).expect("csv output is utf-8"),
    )?;
    write_file(
        &dir,
        "fig3.csv",
        &String::from_utf8(fig3).expect("csv output is utf-8"),
    )?;
    let summary = to_json(&out.summary);
    write_file(&dir, "summary.json", &summary)?;
    stdout.write_all(summary.as_bytes())?;
    Ok(Outcome::Pass)
}
