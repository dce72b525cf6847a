//! Synthetic experiments: data generation on a chain, learning curves over
//! sample sizes, spectral-gap sweeps and the comparison with least squares.
//!
//! Every experiment is split into independent cells (one fit each) plus an
//! order-independent summary, so a caller can run the cells on several
//! threads. Replicate `r` uses seed `base + r * SEED_STRIDE` at every sample
//! size and on every chain, which pairs replicates across cells.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kernels::{gram_matrix, HypothesisKernel, RepresentingFunction};
use crate::markov::{Start, TransitionKernel};
use crate::risk::{excess_risk, SyntheticTask};
use crate::solver::{fit_least_squares, schedule_theorem2, RmrConfig, RmrModel};
use crate::stats::{mean, ols_slope, quantile};
use crate::Error;

pub const SEED_STRIDE: u64 = 1_000_003;
pub const BOOTSTRAP_RESAMPLES: usize = 2000;

pub fn replicate_seed(base: u64, replicate: usize) -> u64 {
    base.wrapping_add((replicate as u64).wrapping_mul(SEED_STRIDE))
}

/// A sample path with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub states: Vec<usize>,
    pub inputs: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    /// The noise draws `y_i - f*(x_i)`.
    pub noise: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Stationary-start path of length `m`; the chain and the noise use separate
/// streams of the same seed.
pub fn generate_dataset(task: &SyntheticTask, m: usize, seed: u64) -> Result<Dataset, Error> {
    let mut chain_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
    noise_rng.set_stream(1);
    let states = task.chain().sample_with(m, Start::Stationary, &mut chain_rng)?;
    let embedding = task.chain().embedding();
    let noise: Vec<f64> = (0..m).map(|_| task.noise().sample(&mut noise_rng)).collect();
    let inputs = states.iter().map(|&s| embedding[s].clone()).collect();
    let y = states
        .iter()
        .zip(&noise)
        .map(|(&s, e)| task.f_star()[s] + e)
        .collect();
    Ok(Dataset {
        states,
        inputs,
        y,
        noise,
    })
}

/// How `lambda` and `sigma` are chosen for each fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParameterSchedule {
    /// The rate-optimal schedule at the chain's exact absolute spectral gap.
    Theorem2 { beta: f64, s: f64 },
    Fixed { lambda: f64, sigma: f64 },
}

impl ParameterSchedule {
    /// `(lambda, sigma)` at sample size `m`.
    pub fn parameters(&self, m: usize, gamma_abs: f64) -> Result<(f64, f64), Error> {
        match *self {
            ParameterSchedule::Theorem2 { beta, s } => {
                let schedule = schedule_theorem2(m, gamma_abs, beta, s)?;
                Ok((schedule.lambda, schedule.sigma))
            }
            ParameterSchedule::Fixed { lambda, sigma } => Ok((lambda, sigma)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub task: SyntheticTask,
    pub kernel: HypothesisKernel,
    pub phi: RepresentingFunction,
    pub m_grid: Vec<usize>,
    pub n_replicates: usize,
    pub schedule: ParameterSchedule,
    pub seed: u64,
    /// Solver settings; `sigma` and `lambda` are replaced by the schedule.
    pub solver: RmrConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.m_grid.is_empty() || self.m_grid[0] == 0 {
            return Err(Error::InvalidParameter {
                name: "m_grid",
                reason: "needs at least one positive sample size",
            });
        }
        if self.m_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter {
                name: "m_grid",
                reason: "must be strictly increasing",
            });
        }
        if self.n_replicates == 0 {
            return Err(Error::InvalidParameter {
                name: "n_replicates",
                reason: "must be at least 1",
            });
        }
        self.solver.validate()
    }
}

/// One fit: excess risk and the parameters that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicateOutcome {
    pub excess_risk: f64,
    pub lambda: f64,
    pub sigma: f64,
}

/// Generates replicate `replicate` at size `m` on `task` and fits it.
pub fn run_replicate(
    config: &ExperimentConfig,
    task: &SyntheticTask,
    gamma_abs: f64,
    m: usize,
    replicate: usize,
) -> Result<ReplicateOutcome, Error> {
    let (lambda, sigma) = config.schedule.parameters(m, gamma_abs)?;
    let solver = RmrConfig {
        lambda,
        sigma,
        ..config.solver
    };
    solver.validate()?;
    let data = generate_dataset(task, m, replicate_seed(config.seed, replicate))?;
    let model = RmrModel::fit(config.kernel, &data.inputs, &data.y, config.phi, solver)?;
    Ok(ReplicateOutcome {
        excess_risk: excess_risk(task, &model)?,
        lambda,
        sigma,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurveRow {
    pub m: usize,
    pub gamma_abs: f64,
    pub replicate: usize,
    /// `None` when the fit failed.
    pub excess_risk: Option<f64>,
    pub lambda_used: f64,
    pub sigma_used: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurveResult {
    /// Sorted by `(m, replicate)`.
    pub rows: Vec<LearningCurveRow>,
    /// `(m, mean excess risk, successful replicates)`.
    pub means: Vec<(usize, f64, usize)>,
    /// Least-squares slope of log mean excess risk on log m.
    pub slope: Option<f64>,
    /// Bootstrap 90% interval of the slope, resampling replicates.
    pub slope_ci: Option<(f64, f64)>,
    pub failures: usize,
}

/// All `(m, replicate)` cells of a learning curve.
pub fn learning_curve_cells(config: &ExperimentConfig) -> Vec<(usize, usize)> {
    config
        .m_grid
        .iter()
        .flat_map(|&m| (0..config.n_replicates).map(move |r| (m, r)))
        .collect()
}

pub fn run_learning_curve_cell(
    config: &ExperimentConfig,
    gamma_abs: f64,
    m: usize,
    replicate: usize,
) -> LearningCurveRow {
    let (lambda_used, sigma_used) = config
        .schedule
        .parameters(m, gamma_abs)
        .unwrap_or((f64::NAN, f64::NAN));
    let excess_risk = run_replicate(config, &config.task, gamma_abs, m, replicate)
        .ok()
        .map(|o| o.excess_risk);
    LearningCurveRow {
        m,
        gamma_abs,
        replicate,
        excess_risk,
        lambda_used,
        sigma_used,
    }
}

/// Aggregates cell results in any order.
pub fn summarize_learning_curve(config: &ExperimentConfig, mut rows: Vec<LearningCurveRow>) -> LearningCurveResult {
    rows.sort_by_key(|a| (a.m, a.replicate));
    let n_rep = config.n_replicates;
    let grid = &config.m_grid;
    // table[i][r] = excess risk at grid[i], replicate r
    let mut table = vec![vec![None; n_rep]; grid.len()];
    for row in &rows {
        if let (Some(i), true) = (grid.iter().position(|&m| m == row.m), row.replicate < n_rep) {
            table[i][row.replicate] = row.excess_risk;
        }
    }
    let failures = rows.iter().filter(|r| r.excess_risk.is_none()).count();
    let means: Vec<(usize, f64, usize)> = grid
        .iter()
        .zip(&table)
        .map(|(&m, column)| {
            let ok: Vec<f64> = column.iter().flatten().copied().collect();
            (m, mean(&ok), ok.len())
        })
        .collect();

    let log_m: Vec<f64> = grid.iter().map(|&m| (m as f64).ln()).collect();
    let slope_of = |risks: &[f64]| -> Option<f64> {
        if risks.iter().any(|r| !(*r > 0.0)) {
            return None;
        }
        let log_r: Vec<f64> = risks.iter().map(|r| r.ln()).collect();
        Some(ols_slope(&log_m, &log_r))
    };
    let (slope, slope_ci) = if grid.len() >= 3 {
        let slope = slope_of(&means.iter().map(|m| m.1).collect::<Vec<_>>());
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_b007);
        let mut boots = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
        for _ in 0..BOOTSTRAP_RESAMPLES {
            let picks: Vec<usize> = (0..n_rep).map(|_| rng.gen_range(0..n_rep)).collect();
            let resampled: Vec<f64> = table
                .iter()
                .map(|column| {
                    let ok: Vec<f64> = picks.iter().filter_map(|&r| column[r]).collect();
                    mean(&ok)
                })
                .collect();
            if let Some(s) = slope_of(&resampled) {
                boots.push(s);
            }
        }
        let ci = (!boots.is_empty()).then(|| (quantile(&boots, 0.05), quantile(&boots, 0.95)));
        (slope, ci)
    } else {
        (None, None)
    };
    LearningCurveResult {
        rows,
        means,
        slope,
        slope_ci,
        failures,
    }
}

/// Excess risk against sample size on the configured task.
pub fn learning_curve(config: &ExperimentConfig) -> Result<LearningCurveResult, Error> {
    config.validate()?;
    let gamma_abs = config.task.chain().absolute_spectral_gap();
    let rows = learning_curve_cells(config)
        .into_iter()
        .map(|(m, r)| run_learning_curve_cell(config, gamma_abs, m, r))
        .collect();
    Ok(summarize_learning_curve(config, rows))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaSweepRow {
    /// Position of the chain in the input list.
    pub chain_index: usize,
    pub gamma_abs: f64,
    /// `2 gamma_abs - gamma_abs^2`.
    pub discount: f64,
    pub mean_excess_risk: f64,
    /// Per replicate, `None` for failed fits.
    pub risks: Vec<Option<f64>>,
    pub failures: usize,
}

/// The task of `base` moved onto each chain, with its exact gap.
pub fn gamma_sweep_tasks(
    base: &ExperimentConfig,
    chains: &[TransitionKernel],
) -> Result<Vec<(SyntheticTask, f64)>, Error> {
    chains
        .iter()
        .map(|chain| {
            let task = base.task.with_chain(chain.clone())?;
            let gamma = chain.absolute_spectral_gap();
            Ok((task, gamma))
        })
        .collect()
}

/// Orders per-chain replicate risks into the sweep table.
pub fn summarize_gamma_sweep(tasks: &[(SyntheticTask, f64)], risks: Vec<Vec<Option<f64>>>) -> Vec<GammaSweepRow> {
    let mut rows: Vec<GammaSweepRow> = tasks
        .iter()
        .zip(risks)
        .enumerate()
        .map(|(chain_index, ((_, gamma), risks))| {
            let ok: Vec<f64> = risks.iter().flatten().copied().collect();
            GammaSweepRow {
                chain_index,
                gamma_abs: *gamma,
                discount: 2.0 * gamma - gamma * gamma,
                mean_excess_risk: mean(&ok),
                failures: risks.len() - ok.len(),
                risks,
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        a.gamma_abs
            .total_cmp(&b.gamma_abs)
            .then(a.chain_index.cmp(&b.chain_index))
    });
    rows
}

/// Mean excess risk at size `m` on each chain; replicate `r` uses the same
/// seed on every chain.
pub fn gamma_sweep(base: &ExperimentConfig, chains: &[TransitionKernel], m: usize) -> Result<Vec<GammaSweepRow>, Error> {
    base.validate()?;
    let tasks = gamma_sweep_tasks(base, chains)?;
    let risks = tasks
        .iter()
        .map(|(task, gamma)| {
            (0..base.n_replicates)
                .map(|r| run_replicate(base, task, *gamma, m, r).ok().map(|o| o.excess_risk))
                .collect()
        })
        .collect();
    Ok(summarize_gamma_sweep(&tasks, risks))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustnessRow {
    pub replicate: usize,
    /// Mean squared distance to `f*` over the chain states.
    pub mse_rmr: f64,
    pub mse_ls: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessResult {
    pub rows: Vec<RobustnessRow>,
    /// Share of replicates with `mse_rmr <= mse_ls`.
    pub rmr_win_fraction: f64,
    pub mean_mse_rmr: f64,
    pub mean_mse_ls: f64,
}

/// Fits RMR and kernel ridge (same Gram matrix, same `lambda`) on one replicate.
pub fn robustness_replicate(
    task: &SyntheticTask,
    kernel: HypothesisKernel,
    phi: RepresentingFunction,
    m: usize,
    config: RmrConfig,
    seed: u64,
    replicate: usize,
) -> Result<RobustnessRow, Error> {
    let data = generate_dataset(task, m, replicate_seed(seed, replicate))?;
    let gram = gram_matrix(&kernel, &data.inputs)?;
    let rmr = RmrModel::fit_with_gram(kernel, &data.inputs, &gram, &data.y, phi, config)?;
    let ls_alpha = fit_least_squares(&gram, &data.y, config.lambda)?;
    let ls = RmrModel::from_parts(ls_alpha, data.inputs, kernel, phi, config, Vec::new())?;
    let states = task.chain().embedding();
    let mse = |model: &RmrModel| -> Result<f64, Error> {
        let predictions = model.predict_many(states)?;
        let sq: Vec<f64> = predictions
            .iter()
            .zip(task.f_star())
            .map(|(p, f)| (p - f) * (p - f))
            .collect();
        Ok(mean(&sq))
    };
    Ok(RobustnessRow {
        replicate,
        mse_rmr: mse(&rmr)?,
        mse_ls: mse(&ls)?,
    })
}

pub fn summarize_robustness(mut rows: Vec<RobustnessRow>) -> RobustnessResult {
    rows.sort_by_key(|r| r.replicate);
    let wins = rows.iter().filter(|r| r.mse_rmr <= r.mse_ls).count();
    let rmr: Vec<f64> = rows.iter().map(|r| r.mse_rmr).collect();
    let ls: Vec<f64> = rows.iter().map(|r| r.mse_ls).collect();
    RobustnessResult {
        rmr_win_fraction: wins as f64 / rows.len().max(1) as f64,
        mean_mse_rmr: mean(&rmr),
        mean_mse_ls: mean(&ls),
        rows,
    }
}

/// RMR against the least-squares baseline over `n_replicates` datasets.
#[allow(clippy::too_many_arguments)]
pub fn robustness_comparison(
    task: &SyntheticTask,
    kernel: HypothesisKernel,
    phi: RepresentingFunction,
    m: usize,
    config: RmrConfig,
    n_replicates: usize,
    seed: u64,
) -> Result<RobustnessResult, Error> {
    if n_replicates == 0 {
        return Err(Error::InvalidParameter {
            name: "n_replicates",
            reason: "must be at least 1",
        });
    }
    config.validate()?;
    let rows = (0..n_replicates)
        .map(|r| robustness_replicate(task, kernel, phi, m, config, seed, r))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(summarize_robustness(rows))
}
