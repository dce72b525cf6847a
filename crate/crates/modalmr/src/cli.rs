//! Command-line definitions and the process entry point.
//!
//! Every flag of a subcommand can also come from `--config FILE`, a flat
//! `key = value` file keyed by the long flag name. Flags on the command line
//! win over the file.

use std::ffi::OsString;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use log::LevelFilter;
use modalmr_core::harness::ParameterSchedule;
use modalmr_core::solver::{Penalty, RmrConfig};
use modalmr_core::{
    ChainFamily, HypothesisKernel, NoiseModel, PhiKind, RepresentingFunction, SyntheticTask,
    TargetFunction, TransitionKernel,
};
use serde::Serialize;

use crate::commands::{self, Report};
use crate::formats;
use crate::CliError;

#[derive(Parser, Debug, Clone)]
#[command(
    name = "modalmr",
    version,
    about = "Regularized modal regression on Markov-dependent samples"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Stationary law, spectral gaps and TV decay of a chain
    ChainInfo(ChainInfoArgs),
    /// Calibration report for the representing functions
    CheckKernel(CheckKernelArgs),
    /// Fit RMR to a dataset file and save the model
    Fit(FitArgs),
    /// Evaluate a saved model on covariates
    Predict(PredictArgs),
    /// Excess risk against sample size on one chain
    LearningCurve(LearningCurveArgs),
    /// Excess risk at one sample size across chains with different gaps
    GammaSweep(GammaSweepArgs),
    /// Breakdown quantity N and coefficient norms under repeated outliers
    Breakdown(BreakdownArgs),
    /// RMR against kernel ridge least squares on heavy-tailed noise
    RobustCompare(RobustCompareArgs),
}

impl Command {
    pub fn common(&self) -> &CommonArgs {
        match self {
            Command::ChainInfo(a) => &a.common,
            Command::CheckKernel(a) => &a.common,
            Command::Fit(a) => &a.common,
            Command::Predict(a) => &a.common,
            Command::LearningCurve(a) => &a.common,
            Command::GammaSweep(a) => &a.common,
            Command::Breakdown(a) => &a.common,
            Command::RobustCompare(a) => &a.common,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::ChainInfo(_) => "chain-info",
            Command::CheckKernel(_) => "check-kernel",
            Command::Fit(_) => "fit",
            Command::Predict(_) => "predict",
            Command::LearningCurve(_) => "learning-curve",
            Command::GammaSweep(_) => "gamma-sweep",
            Command::Breakdown(_) => "breakdown",
            Command::RobustCompare(_) => "robust-compare",
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CommonArgs {
    /// Base seed for data generation
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    /// Output file; tables go to stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `key = value` file supplying defaults for any flag of this command
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Worker threads for independent fits
    #[arg(long, default_value_t = 1)]
    #[serde(skip)]
    pub jobs: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyArg {
    Iid,
    TwoState,
    LazyWalk,
    Metropolis,
    Sticky,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ChainArgs {
    /// Chain file (`n d`, n rows of probabilities, n rows of coordinates); overrides --family
    #[arg(long)]
    pub chain_file: Option<PathBuf>,
    /// Built-in chain family
    #[arg(long, value_enum, default_value_t = FamilyArg::Iid)]
    pub family: FamilyArg,
    /// Number of states (ignored by two-state)
    #[arg(long, default_value_t = 16)]
    pub states: usize,
    /// Embedding dimension; the state count must be a perfect power of it
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// Two-state: probability of leaving state 0
    #[arg(long, default_value_t = 0.3)]
    pub p: f64,
    /// Two-state: probability of leaving state 1
    #[arg(long, default_value_t = 0.2)]
    pub q: f64,
    /// Lazy walk: holding probability
    #[arg(long, default_value_t = 0.5)]
    pub laziness: f64,
    /// Sticky: holding probability (the absolute gap is 1 - stay)
    #[arg(long, default_value_t = 0.9)]
    pub stay: f64,
    /// Comma-separated state weights for iid, sticky and metropolis (uniform when omitted)
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
}

impl ChainArgs {
    pub fn build(&self) -> Result<TransitionKernel, CliError> {
        if let Some(path) = &self.chain_file {
            return formats::read_chain(path);
        }
        let weights = match &self.weights {
            Some(w) => {
                if self.family != FamilyArg::TwoState
                    && self.family != FamilyArg::LazyWalk
                    && w.len() != self.states
                {
                    return Err(CliError::invalid(
                        "weights",
                        format!("{} weights given for {} states", w.len(), self.states),
                    ));
                }
                w.clone()
            }
            None => vec![1.0; self.states],
        };
        let family = match self.family {
            FamilyArg::Iid => ChainFamily::Iid { weights },
            FamilyArg::TwoState => ChainFamily::TwoState {
                p: self.p,
                q: self.q,
            },
            FamilyArg::LazyWalk => ChainFamily::LazyRandomWalk {
                n: self.states,
                laziness: self.laziness,
            },
            FamilyArg::Metropolis => ChainFamily::MetropolisGrid { target: weights },
            FamilyArg::Sticky => ChainFamily::StickyIid {
                weights,
                stay: self.stay,
            },
        };
        Ok(family.build(self.dim)?)
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetArg {
    SinExp,
    Zero,
    Constant,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseArg {
    Gaussian,
    StudentT,
    ShiftedGamma,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TaskArgs {
    #[command(flatten)]
    pub chain: ChainArgs,
    /// Regression function on the chain states
    #[arg(long, value_enum, default_value_t = TargetArg::SinExp)]
    pub target: TargetArg,
    /// Value of the constant target
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub target_value: f64,
    /// Noise law; every choice has its mode at zero
    #[arg(long, value_enum, default_value_t = NoiseArg::Gaussian)]
    pub noise: NoiseArg,
    /// Noise scale
    #[arg(long, default_value_t = 0.5)]
    pub noise_scale: f64,
    /// Student-t degrees of freedom
    #[arg(long, default_value_t = 2.0)]
    pub dof: f64,
    /// Shifted-gamma shape (at least 1; above 3 for a twice-differentiable density)
    #[arg(long, default_value_t = 4.0)]
    pub shape: f64,
}

impl TaskArgs {
    pub fn noise(&self) -> Result<NoiseModel, CliError> {
        Ok(match self.noise {
            NoiseArg::Gaussian => NoiseModel::gaussian(self.noise_scale)?,
            NoiseArg::StudentT => NoiseModel::student_t(self.dof, self.noise_scale)?,
            NoiseArg::ShiftedGamma => NoiseModel::shifted_gamma(self.shape, self.noise_scale)?,
        })
    }

    pub fn target(&self) -> TargetFunction {
        match self.target {
            TargetArg::SinExp => TargetFunction::SinExp,
            TargetArg::Zero => TargetFunction::Zero,
            TargetArg::Constant => TargetFunction::Constant(self.target_value),
        }
    }

    pub fn build(&self) -> Result<SyntheticTask, CliError> {
        Ok(SyntheticTask::new(self.chain.build()?, self.target(), self.noise()?)?)
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelArg {
    GaussianRbf,
    Laplacian,
    Polynomial,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct KernelArgs {
    /// Hypothesis kernel K
    #[arg(long, value_enum, default_value_t = KernelArg::GaussianRbf)]
    pub kernel: KernelArg,
    /// Bandwidth of the gaussian-rbf and laplacian kernels
    #[arg(long, default_value_t = 0.2)]
    pub bandwidth: f64,
    /// Polynomial degree
    #[arg(long, default_value_t = 1)]
    pub degree: u32,
    /// Polynomial offset
    #[arg(long, default_value_t = 1.0)]
    pub offset: f64,
}

impl KernelArgs {
    pub fn build(&self) -> Result<HypothesisKernel, CliError> {
        Ok(match self.kernel {
            KernelArg::GaussianRbf => HypothesisKernel::gaussian_rbf(self.bandwidth)?,
            KernelArg::Laplacian => HypothesisKernel::laplacian(self.bandwidth)?,
            KernelArg::Polynomial => HypothesisKernel::polynomial(self.degree, self.offset)?,
        })
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhiArg {
    Gaussian,
    Epanechnikov,
    Quadratic,
    Triangular,
    Correntropy,
}

impl PhiArg {
    pub fn kind(self) -> PhiKind {
        match self {
            PhiArg::Gaussian => PhiKind::Gaussian,
            PhiArg::Epanechnikov => PhiKind::Epanechnikov,
            PhiArg::Quadratic => PhiKind::Quadratic,
            PhiArg::Triangular => PhiKind::Triangular,
            PhiArg::Correntropy => PhiKind::Correntropy,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyArg {
    #[value(alias = "1")]
    L1,
    #[value(alias = "2")]
    L2,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SolverArgs {
    /// Representing function phi
    #[arg(long, value_enum, default_value_t = PhiArg::Gaussian)]
    pub phi: PhiArg,
    /// Modal bandwidth sigma
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Regularization weight lambda
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Penalty ||alpha||_q^q with q = 1 or 2
    #[arg(long, value_enum, default_value_t = PenaltyArg::L2)]
    pub penalty: PenaltyArg,
    /// Outer Half-Quadratic iterations
    #[arg(long, default_value_t = 200)]
    pub max_hq_iters: usize,
    /// Stop once the objective changes by less than this
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Coordinate-descent sweeps per Half-Quadratic step (q = 1)
    #[arg(long, default_value_t = 100)]
    pub inner_max_iters: usize,
    /// Iterations of the gradient solver (non-Gaussian phi)
    #[arg(long, default_value_t = 5000)]
    pub max_gradient_iters: usize,
}

impl SolverArgs {
    pub fn phi(&self) -> RepresentingFunction {
        RepresentingFunction::new(self.phi.kind())
    }

    /// Solver settings with `sigma` and `lambda` falling back to the given defaults.
    pub fn config(&self, sigma: f64, lambda: f64) -> Result<RmrConfig, CliError> {
        let config = RmrConfig {
            sigma: self.sigma.unwrap_or(sigma),
            lambda: self.lambda.unwrap_or(lambda),
            penalty: match self.penalty {
                PenaltyArg::L1 => Penalty::L1,
                PenaltyArg::L2 => Penalty::L2,
            },
            max_hq_iters: self.max_hq_iters,
            tol: self.tol,
            inner_max_iters: self.inner_max_iters,
            max_gradient_iters: self.max_gradient_iters,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleArg {
    Theorem2,
    Fixed,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ScheduleArgs {
    /// theorem2 sets lambda and sigma from m and the exact gap; fixed uses --lambda and --sigma
    #[arg(long, value_enum, default_value_t = ScheduleArg::Theorem2)]
    pub schedule: ScheduleArg,
    /// Smoothness exponent beta in (0, 2]
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
    /// Capacity exponent s in (0, 2)
    #[arg(long, default_value_t = 0.01)]
    pub s: f64,
}

impl ScheduleArgs {
    pub fn build(&self, solver: &SolverArgs) -> Result<ParameterSchedule, CliError> {
        match self.schedule {
            ScheduleArg::Theorem2 => Ok(ParameterSchedule::Theorem2 {
                beta: self.beta,
                s: self.s,
            }),
            ScheduleArg::Fixed => match (solver.lambda, solver.sigma) {
                (Some(lambda), Some(sigma)) => Ok(ParameterSchedule::Fixed { lambda, sigma }),
                _ => Err(CliError::invalid(
                    "schedule",
                    "the fixed schedule needs both --lambda and --sigma",
                )),
            },
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ChainInfoArgs {
    #[command(flatten)]
    pub chain: ChainArgs,
    /// Largest power k in the pseudo spectral gap
    #[arg(long, default_value_t = 10)]
    pub k_max: usize,
    /// Steps of the TV mixing curve
    #[arg(long, default_value_t = 20)]
    pub t_max: usize,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CheckKernelArgs {
    /// Representing function to check; all calibrated kinds when omitted
    #[arg(long, value_enum)]
    pub phi: Option<PhiArg>,
    /// Half-width of the integration grid
    #[arg(long, default_value_t = 12.0)]
    pub halfwidth: f64,
    /// Grid points
    #[arg(long, default_value_t = 240_001)]
    pub points: usize,
    /// Largest accepted |integral - 1|
    #[arg(long, default_value_t = 1e-6)]
    pub integral_tol: f64,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct FitArgs {
    /// Dataset file (`m d`, then m lines of d covariates and y)
    #[arg(long)]
    pub data: PathBuf,
    /// Where to write the fitted model
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PredictArgs {
    /// Model file written by `fit`
    #[arg(long)]
    pub model: PathBuf,
    /// Covariates (`m d`, then m lines of d values, an extra y column is ignored)
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct LearningCurveArgs {
    #[command(flatten)]
    pub task: TaskArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    /// Comma-separated, strictly increasing sample sizes
    #[arg(long, value_delimiter = ',', default_value = "64,128,256,512")]
    pub m_grid: Vec<usize>,
    /// Replicates per sample size
    #[arg(long, default_value_t = 20)]
    pub replicates: usize,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GammaSweepArgs {
    #[command(flatten)]
    pub task: TaskArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    /// Holding probabilities of sticky uniform chains to sweep (gap 1 - stay)
    #[arg(long, value_delimiter = ',')]
    pub sweep_stays: Vec<f64>,
    /// Further chain files to sweep
    #[arg(long, value_delimiter = ',')]
    pub sweep_chains: Vec<PathBuf>,
    /// Sample size
    #[arg(long, default_value_t = 512)]
    pub m: usize,
    /// Replicates per chain
    #[arg(long, default_value_t = 20)]
    pub replicates: usize,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct BreakdownArgs {
    #[command(flatten)]
    pub task: TaskArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Clean sample size (at least 10)
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    /// Comma-separated outlier counts
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,5,10")]
    pub outliers: Vec<usize>,
    /// Comma-separated outlier responses
    #[arg(long, value_delimiter = ',', default_value = "100,10000,1000000", allow_negative_numbers = true)]
    pub magnitudes: Vec<f64>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct RobustCompareArgs {
    #[command(flatten)]
    pub task: TaskArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Sample size
    #[arg(long, default_value_t = 500)]
    pub m: usize,
    /// Replicates
    #[arg(long, default_value_t = 20)]
    pub replicates: usize,
    #[command(flatten)]
    pub common: CommonArgs,
}

fn flag_given(args: &[String], key: &str) -> bool {
    let flag = format!("--{key}");
    let prefix = format!("--{key}=");
    args.iter().any(|a| *a == flag || a.starts_with(&prefix))
}

fn flag_value(args: &[String], key: &str) -> Option<String> {
    let flag = format!("--{key}");
    let prefix = format!("--{key}=");
    args.iter().enumerate().find_map(|(k, a)| {
        if *a == flag {
            args.get(k + 1).cloned()
        } else {
            a.strip_prefix(&prefix).map(str::to_string)
        }
    })
}

/// Long flag names accepted by `subcommand`, minus `config` and `help`.
pub fn valid_keys(subcommand: &str) -> Option<Vec<String>> {
    let command = Cli::command();
    let sub = command.find_subcommand(subcommand)?;
    Some(
        sub.get_arguments()
            .filter_map(|a| a.get_long())
            .filter(|l| *l != "config" && *l != "help")
            .map(str::to_string)
            .collect(),
    )
}

/// Splices the entries of `--config FILE` into `argv` as `--key=value`
/// right after the subcommand, skipping keys already given as flags.
pub fn expand_config(argv: Vec<String>) -> Result<Vec<String>, CliError> {
    let Some(sub_pos) = argv.iter().skip(1).position(|a| !a.starts_with('-')).map(|p| p + 1) else {
        return Ok(argv);
    };
    let rest = &argv[sub_pos + 1..];
    let Some(path) = flag_value(rest, "config") else {
        return Ok(argv);
    };
    // clap reports the unknown subcommand itself
    let Some(valid) = valid_keys(&argv[sub_pos]) else {
        return Ok(argv);
    };
    let path = PathBuf::from(path);
    let entries = formats::parse_config(&formats::read_text(&path)?, &path)?;
    let mut injected = Vec::new();
    for (key, value, _) in entries {
        if !valid.contains(&key) {
            return Err(CliError::UnknownKey {
                key,
                valid: valid.join(", "),
            });
        }
        if !flag_given(rest, &key) {
            injected.push(format!("--{key}={value}"));
        }
    }
    let mut out = argv[..=sub_pos].to_vec();
    out.extend(injected);
    out.extend_from_slice(rest);
    Ok(out)
}

fn log_level() -> Result<LevelFilter, CliError> {
    match std::env::var("MODALMR_LOG") {
        Err(_) => Ok(LevelFilter::Warn),
        Ok(v) => match v.as_str() {
            "quiet" => Ok(LevelFilter::Off),
            "info" => Ok(LevelFilter::Info),
            "debug" => Ok(LevelFilter::Debug),
            _ => Err(CliError::invalid(
                "MODALMR_LOG",
                format!("`{v}` is not one of quiet, info, debug"),
            )),
        },
    }
}

fn init_logging() -> Result<(), CliError> {
    let level = log_level()?;
    // a second call (tests running several commands in one process) is harmless
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();
    Ok(())
}

/// Sidecar JSON path for a table written to `out`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    if out.extension().is_some_and(|e| e == "json") {
        out.with_extension("manifest.json")
    } else {
        out.with_extension("json")
    }
}

fn emit(report: &Report, out: Option<&Path>, out_file: Option<File>) -> Result<(), CliError> {
    let json = report
        .json
        .as_ref()
        .map(|v| serde_json::to_string_pretty(v).expect("JSON values serialize") + "\n");
    match (out, out_file) {
        (Some(path), Some(mut file)) => {
            let body = report.csv.as_deref().or(json.as_deref()).unwrap_or("");
            file.write_all(body.as_bytes())
                .map_err(|e| CliError::io(path, e))?;
            if let (Some(_), Some(json)) = (&report.csv, &json) {
                formats::write_text(&sidecar_path(path), json)?;
            }
            println!("{}", report.summary);
        }
        _ => {
            if let Some(csv) = &report.csv {
                print!("{csv}");
                eprintln!("{}", report.summary);
            } else {
                println!("{}", report.summary);
            }
        }
    }
    Ok(())
}

fn run_args(argv: Vec<String>) -> Result<i32, CliError> {
    init_logging()?;
    let argv = expand_config(argv)?;
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return Ok(code);
        }
    };
    let common = cli.command.common();
    if common.jobs == 0 {
        return Err(CliError::invalid("jobs", "must be at least 1"));
    }
    // fail on an unwritable output before any work is done
    let out_file = match &common.out {
        Some(path) => Some(File::create(path).map_err(|e| CliError::io(path, e))?),
        None => None,
    };
    log::info!("running {}", cli.command.name());
    let report = commands::run(&cli.command)?;
    emit(&report, common.out.as_deref(), out_file)?;
    if let Some(reason) = &report.failure {
        eprintln!("error: {reason}");
        return Ok(1);
    }
    Ok(0)
}

/// Runs the tool on `args` (program name first) and returns the exit code.
pub fn main_with_args(args: Vec<OsString>) -> i32 {
    let argv: Vec<String> = args
        .into_iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match run_args(argv) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn clap_definitions_are_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn config_entries_fill_missing_flags_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "sigma = 0.5\nlambda = 0.1\n# comment\nphi = epanechnikov\n").unwrap();
        let argv = strings(&["modalmr", "fit", "--lambda", "0.3", "--config", path.to_str().unwrap()]);
        let expanded = expand_config(argv).unwrap();
        assert_eq!(
            &expanded[..4],
            &strings(&["modalmr", "fit", "--sigma=0.5", "--phi=epanechnikov"])[..]
        );
        assert!(expanded.contains(&"0.3".to_string()));
        assert!(!expanded.iter().any(|a| a == "--lambda=0.1"));
    }

    #[test]
    fn unknown_config_key_lists_valid_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "sigmaa = 0.5\n").unwrap();
        let argv = strings(&["modalmr", "fit", "--config", path.to_str().unwrap()]);
        let err = expand_config(argv).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("`sigmaa`"), "{text}");
        assert!(text.contains("sigma") && text.contains("lambda") && text.contains("bandwidth"));
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn sidecar_next_to_table() {
        assert_eq!(sidecar_path(Path::new("a/curve.csv")), PathBuf::from("a/curve.json"));
        assert_eq!(sidecar_path(Path::new("x.json")), PathBuf::from("x.manifest.json"));
        assert_eq!(sidecar_path(Path::new("plain")), PathBuf::from("plain.json"));
    }
}
