//! The regularized modal regression estimator.
//!
//! For training inputs `x_1..x_m` with Gram matrix `G[j][i] = K(x_j, x_i)` the
//! estimator maximizes over coefficient vectors `alpha`
//!
//! ```text
//! J(alpha) = 1/(m sigma) sum_i phi((y_i - K_i^T alpha) / sigma) - lambda ||alpha||_q^q
//! ```
//!
//! where `K_i` is column `i` of `G`. The objective is not concave; both solvers
//! are ascent methods started from `alpha = 0` unless a warm start is given,
//! and return a local maximizer.
//!
//! ## Repeated inputs
//!
//! Inputs drawn from a finite-state chain repeat. When samples `i` and `i'`
//! share both their row and column of `G`, the data term depends on their
//! coefficients only through the sum `alpha_i + alpha_i'`, and for a fixed sum
//! the penalty is smallest for an even split (for `q = 1` the even split is
//! among the minimizers). The solvers therefore work on one aggregate
//! coefficient `a_s` per group of identical samples with penalty
//! `sum_s a_s^2 / c_s` (`q = 2`) or `sum_s |a_s|` (`q = 1`), `c_s` being the
//! group size, and expand back to `alpha_j = a_s / c_s`. With distinct inputs
//! every group is a singleton and nothing changes.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::kernels::{gram_matrix, input_dimension, HypothesisKernel, KernelFunction, PhiKind, RepresentingFunction, INV_SQRT_2PI};
use crate::Error;

/// Coefficient penalty `||alpha||_q^q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Penalty {
    L1,
    #[default]
    L2,
}

impl Penalty {
    pub fn name(self) -> &'static str {
        match self {
            Penalty::L1 => "l1",
            Penalty::L2 => "l2",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "l1" | "L1" | "1" => Some(Penalty::L1),
            "l2" | "L2" | "2" => Some(Penalty::L2),
            _ => None,
        }
    }

    /// `||alpha||_q^q`.
    pub fn norm(self, alpha: &[f64]) -> f64 {
        match self {
            Penalty::L1 => alpha.iter().map(|a| a.abs()).sum(),
            Penalty::L2 => alpha.iter().map(|a| a * a).sum(),
        }
    }
}

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmrConfig {
    /// Modal bandwidth.
    pub sigma: f64,
    /// Regularization weight.
    pub lambda: f64,
    pub penalty: Penalty,
    /// Outer Half-Quadratic iterations.
    pub max_hq_iters: usize,
    /// Stop once the objective changes by less than this.
    pub tol: f64,
    /// Coordinate-descent sweeps per HQ step (`q = 1`).
    pub inner_max_iters: usize,
    /// Ascent steps of the gradient solver.
    pub max_gradient_iters: usize,
}

impl Default for RmrConfig {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            lambda: 1e-2,
            penalty: Penalty::L2,
            max_hq_iters: 200,
            tol: 1e-8,
            inner_max_iters: 100,
            max_gradient_iters: 5000,
        }
    }
}

impl RmrConfig {
    pub fn new(sigma: f64, lambda: f64, penalty: Penalty) -> Result<Self, Error> {
        let config = Self {
            sigma,
            lambda,
            penalty,
            ..Self::default()
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidParameter {
                name: "sigma",
                reason: "must be a positive finite number",
            });
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: "must be a non-negative finite number",
            });
        }
        if self.max_hq_iters == 0 {
            return Err(Error::InvalidParameter {
                name: "max_hq_iters",
                reason: "must be at least 1",
            });
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter {
                name: "tol",
                reason: "must be positive",
            });
        }
        if self.inner_max_iters == 0 || self.max_gradient_iters == 0 {
            return Err(Error::InvalidParameter {
                name: "inner_max_iters",
                reason: "iteration limits must be at least 1",
            });
        }
        Ok(())
    }
}

/// Result of a solver run on a Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub alpha: Vec<f64>,
    /// Objective before the first step and after every accepted step.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl Fit {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace is never empty")
    }
}

fn check_problem(gram: &DMatrix<f64>, y: &[f64], alpha: Option<&[f64]>) -> Result<usize, Error> {
    let m = y.len();
    if m == 0 {
        return Err(Error::InvalidParameter {
            name: "y",
            reason: "need at least one observation",
        });
    }
    if gram.nrows() != m || gram.ncols() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: gram.nrows().max(gram.ncols()),
        });
    }
    if let Some(alpha) = alpha {
        if alpha.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: alpha.len(),
            });
        }
    }
    Ok(m)
}

/// Residuals `r_i = y_i - K_i^T alpha`.
pub fn residuals(alpha: &[f64], gram: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    (0..y.len())
        .map(|i| y[i] - gram.column(i).iter().zip(alpha).map(|(k, a)| k * a).sum::<f64>())
        .collect()
}

/// Exact value of the RMR objective.
pub fn objective(
    alpha: &[f64],
    gram: &DMatrix<f64>,
    y: &[f64],
    phi: &RepresentingFunction,
    config: &RmrConfig,
) -> Result<f64, Error> {
    let m = check_problem(gram, y, Some(alpha))?;
    let sigma = config.sigma;
    let data: f64 = residuals(alpha, gram, y).iter().map(|&r| phi.loss(r, sigma)).sum();
    Ok(data / (m as f64 * sigma) - config.lambda * config.penalty.norm(alpha))
}

/// Gradient of the smooth part of the objective: the data term, plus the
/// penalty when `q = 2`.
pub fn objective_gradient(
    alpha: &[f64],
    gram: &DMatrix<f64>,
    y: &[f64],
    phi: &RepresentingFunction,
    config: &RmrConfig,
) -> Result<Vec<f64>, Error> {
    let m = check_problem(gram, y, Some(alpha))?;
    let sigma = config.sigma;
    let dr: Vec<f64> = residuals(alpha, gram, y)
        .iter()
        .map(|&r| phi.loss_derivative(r, sigma))
        .collect();
    let scale = 1.0 / (m as f64 * sigma);
    Ok((0..m)
        .map(|j| {
            let data: f64 = gram.row(j).iter().zip(&dr).map(|(g, d)| g * d).sum();
            let pen = match config.penalty {
                Penalty::L2 => 2.0 * config.lambda * alpha[j],
                Penalty::L1 => 0.0,
            };
            -scale * data - pen
        })
        .collect())
}

/// Samples grouped by identical Gram rows and columns.
struct Reduced<'a> {
    y: &'a [f64],
    group_of: Vec<usize>,
    counts: Vec<f64>,
    /// `c[(s, t)] = G[rep_s, rep_t]`.
    c: DMatrix<f64>,
}

impl<'a> Reduced<'a> {
    fn new(gram: &DMatrix<f64>, y: &'a [f64]) -> Self {
        let m = y.len();
        let mut reps: Vec<usize> = Vec::new();
        let mut by_hash: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        let mut group_of = vec![0; m];
        let mut counts: Vec<f64> = Vec::new();
        for (i, slot) in group_of.iter_mut().enumerate() {
            let key = signature(gram, i);
            let candidates = by_hash.entry(key).or_default();
            let found = candidates
                .iter()
                .copied()
                .find(|&g| same_sample(gram, reps[g], i));
            let g = match found {
                Some(g) => g,
                None => {
                    reps.push(i);
                    counts.push(0.0);
                    candidates.push(reps.len() - 1);
                    reps.len() - 1
                }
            };
            *slot = g;
            counts[g] += 1.0;
        }
        let n = reps.len();
        let c = DMatrix::from_fn(n, n, |s, t| gram[(reps[s], reps[t])]);
        Self {
            y,
            group_of,
            counts,
            c,
        }
    }

    /// Groups by identical input vectors, which needs only the Gram matrix
    /// of the distinct inputs.
    fn from_inputs<K: KernelFunction + ?Sized>(
        kernel: &K,
        inputs: &[Vec<f64>],
        y: &'a [f64],
    ) -> Result<Self, Error> {
        let mut index: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
        let mut unique: Vec<Vec<f64>> = Vec::new();
        let mut counts: Vec<f64> = Vec::new();
        let group_of = inputs
            .iter()
            .map(|x| {
                let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
                *index.entry(key).or_insert_with(|| {
                    unique.push(x.clone());
                    counts.push(0.0);
                    unique.len() - 1
                })
            })
            .collect::<Vec<usize>>();
        for &g in &group_of {
            counts[g] += 1.0;
        }
        let c = gram_matrix(kernel, &unique)?;
        Ok(Self {
            y,
            group_of,
            counts,
            c,
        })
    }

    fn n_groups(&self) -> usize {
        self.counts.len()
    }

    fn m(&self) -> f64 {
        self.y.len() as f64
    }

    /// Fitted value of each group, `b = C^T a`.
    fn fitted(&self, a: &[f64]) -> Vec<f64> {
        let a = DVector::from_column_slice(a);
        self.c.tr_mul(&a).iter().copied().collect()
    }

    fn residuals(&self, a: &[f64]) -> Vec<f64> {
        let b = self.fitted(a);
        self.y
            .iter()
            .zip(&self.group_of)
            .map(|(y, &g)| y - b[g])
            .collect()
    }

    fn penalty(&self, a: &[f64], penalty: Penalty) -> f64 {
        match penalty {
            Penalty::L1 => a.iter().map(|v| v.abs()).sum(),
            Penalty::L2 => a.iter().zip(&self.counts).map(|(v, c)| v * v / c).sum(),
        }
    }

    fn objective(&self, a: &[f64], phi: &RepresentingFunction, cfg: &RmrConfig) -> f64 {
        let data: f64 = self
            .residuals(a)
            .iter()
            .map(|&r| phi.loss(r, cfg.sigma))
            .sum();
        data / (self.m() * cfg.sigma) - cfg.lambda * self.penalty(a, cfg.penalty)
    }

    /// The objective at full coefficients `alpha`.
    fn full_objective(&self, alpha: &[f64], phi: &RepresentingFunction, cfg: &RmrConfig) -> f64 {
        let data: f64 = self
            .residuals(&self.reduce(alpha))
            .iter()
            .map(|&r| phi.loss(r, cfg.sigma))
            .sum();
        data / (self.m() * cfg.sigma) - cfg.lambda * cfg.penalty.norm(alpha)
    }

    /// Gradient of the data term with respect to the group coefficients.
    fn data_gradient(&self, a: &[f64], phi: &RepresentingFunction, sigma: f64) -> Vec<f64> {
        let mut per_group = vec![0.0; self.n_groups()];
        for (r, &g) in self.residuals(a).iter().zip(&self.group_of) {
            per_group[g] += phi.loss_derivative(*r, sigma);
        }
        let scale = -1.0 / (self.m() * sigma);
        let v = DVector::from_vec(per_group);
        (&self.c * v).iter().map(|x| scale * x).collect()
    }

    fn reduce(&self, alpha: &[f64]) -> Vec<f64> {
        let mut a = vec![0.0; self.n_groups()];
        for (v, &g) in alpha.iter().zip(&self.group_of) {
            a[g] += v;
        }
        a
    }

    fn expand(&self, a: &[f64]) -> Vec<f64> {
        self.group_of.iter().map(|&g| a[g] / self.counts[g]).collect()
    }

    /// Per-group weight totals `W_s` and weighted responses `sum w_i y_i`.
    fn weighted_sums(&self, weights: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n_groups();
        let mut w_sum = vec![0.0; n];
        let mut wy_sum = vec![0.0; n];
        for ((w, y), &g) in weights.iter().zip(self.y).zip(&self.group_of) {
            w_sum[g] += w;
            wy_sum[g] += w * y;
        }
        (w_sum, wy_sum)
    }

    /// Minimizer of `kappa sum_i w_i (y_i - b_i)^2 + lambda sum_s a_s^2 / c_s`,
    /// i.e. `(C W C^T + (lambda / kappa) D^{-1}) a = C (W y)`.
    fn solve_weighted_ridge(&self, weights: &[f64], ridge: f64) -> Result<Vec<f64>, Error> {
        let n = self.n_groups();
        let (w_sum, wy_sum) = self.weighted_sums(weights);
        let mut scaled = self.c.clone();
        for (t, w) in w_sum.iter().enumerate() {
            scaled.column_mut(t).scale_mut(*w);
        }
        let mut system = &scaled * self.c.transpose();
        for s in 0..n {
            system[(s, s)] += ridge / self.counts[s];
        }
        let rhs = &self.c * DVector::from_vec(wy_sum);
        solve_spd(system, rhs)
    }
}

fn signature(gram: &DMatrix<f64>, i: usize) -> u64 {
    // FNV-1a over the bit patterns of column i then row i
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |v: f64| {
        h ^= v.to_bits();
        h = h.wrapping_mul(0x0100_0000_01b3);
    };
    gram.column(i).iter().for_each(|&v| feed(v));
    gram.row(i).iter().for_each(|&v| feed(v));
    h
}

fn same_sample(gram: &DMatrix<f64>, a: usize, b: usize) -> bool {
    gram.column(a) == gram.column(b) && gram.row(a) == gram.row(b)
}

/// Cholesky, then once more with `1e-10 trace / n` on the diagonal, then LU.
/// A solution is accepted only if it reproduces the right-hand side.
fn solve_spd(mut system: DMatrix<f64>, rhs: DVector<f64>) -> Result<Vec<f64>, Error> {
    let scale = rhs.amax().max(system.amax() * f64::EPSILON);
    let accept = |system: &DMatrix<f64>, x: DVector<f64>| -> Option<Vec<f64>> {
        if !x.iter().all(|v| v.is_finite()) {
            return None;
        }
        let residual = (system * &x - &rhs).amax();
        (residual <= 1e-6 * scale.max(f64::MIN_POSITIVE)).then(|| x.iter().copied().collect())
    };
    if let Some(chol) = system.clone().cholesky() {
        if let Some(x) = accept(&system, chol.solve(&rhs)) {
            return Ok(x);
        }
    }
    let original = system.clone();
    let n = system.nrows();
    let jitter = 1e-10 * system.trace().abs().max(f64::MIN_POSITIVE) / n as f64;
    for s in 0..n {
        system[(s, s)] += jitter;
    }
    if let Some(chol) = system.clone().cholesky() {
        if let Some(x) = accept(&original, chol.solve(&rhs)) {
            return Ok(x);
        }
    }
    match system.lu().solve(&rhs) {
        Some(x) if x.iter().all(|v| v.is_finite()) => Ok(x.iter().copied().collect()),
        _ => Err(Error::SingularSystem),
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Half-Quadratic ascent for the Gaussian and correntropy kinds.
///
/// With `phi` the standard normal density, `phi(r / sigma) = c0 exp(-r^2 / (2 sigma^2))`.
/// Convexity of `exp(-v)` gives `exp(-v) >= exp(-v0) (1 + v0 - v)`, equal at
/// `v = v0`. Substituting `v = r^2 / (2 sigma^2)` at the current residuals
/// shows that maximizing `J` can be replaced, one step at a time, by
///
/// ```text
/// minimize  kappa sum_i w_i r_i^2 + lambda ||alpha||_q^q,
/// w_i = exp(-r_i^2 / (2 sigma^2)),   kappa = c0 / (2 m sigma^3),
/// ```
///
/// and any decrease of this surrogate raises `J`. For `q = 2` its
/// stationarity condition `kappa G W (G^T alpha - y) + lambda alpha = 0` is the
/// ridge system `(G W G^T + (lambda / kappa) I) alpha = G W y`, so the ridge
/// carries `lambda / kappa = 2 sqrt(2 pi) lambda m sigma^3`. The correntropy
/// kind uses `w_i = exp(-r_i^2 / sigma)` and `kappa = 1 / (m sigma^2)`, which
/// gives the ridge `lambda m sigma^2`. For `q = 1` the surrogate is minimized
/// by cyclic coordinate descent with soft-thresholding, warm-started at the
/// current coefficients.
pub fn fit_hq(
    gram: &DMatrix<f64>,
    y: &[f64],
    phi: &RepresentingFunction,
    config: &RmrConfig,
    init: Option<&[f64]>,
) -> Result<Fit, Error> {
    config.validate()?;
    check_problem(gram, y, init)?;
    hq_reduced(&Reduced::new(gram, y), phi, config, init)
}

fn hq_reduced(
    problem: &Reduced<'_>,
    phi: &RepresentingFunction,
    config: &RmrConfig,
    init: Option<&[f64]>,
) -> Result<Fit, Error> {
    let kind = phi.kind();
    if !matches!(kind, PhiKind::Gaussian | PhiKind::Correntropy) {
        return Err(Error::NonGaussianPhi { kind: kind.name() });
    }
    let sigma = config.sigma;
    let m = problem.m();
    let (kappa, weight_scale) = match kind {
        PhiKind::Gaussian => (INV_SQRT_2PI / (2.0 * m * sigma.powi(3)), 2.0 * sigma * sigma),
        _ => (1.0 / (m * sigma * sigma), sigma),
    };

    let mut trace = Vec::new();
    let mut a = match init {
        Some(alpha) => {
            trace.push(problem.full_objective(alpha, phi, config));
            problem.reduce(alpha)
        }
        None => vec![0.0; problem.n_groups()],
    };
    let mut current = problem.objective(&a, phi, config);
    trace.push(current);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_hq_iters {
        iterations += 1;
        let weights: Vec<f64> = problem
            .residuals(&a)
            .iter()
            .map(|r| (-r * r / weight_scale).exp())
            .collect();
        let proposal = match config.penalty {
            Penalty::L2 => problem.solve_weighted_ridge(&weights, config.lambda / kappa)?,
            Penalty::L1 => coordinate_descent(problem, &weights, kappa, config, &a),
        };
        let Some((next, value)) = accept_ascent(problem, phi, config, &a, proposal, current) else {
            converged = true;
            break;
        };
        let change = value - current;
        a = next;
        current = value;
        trace.push(current);
        if change.abs() < config.tol {
            converged = true;
            break;
        }
    }
    Ok(Fit {
        alpha: problem.expand(&a),
        objective_trace: trace,
        iterations,
        converged,
    })
}

/// Takes the HQ proposal, or the largest fraction of the step toward it that
/// does not lower the objective. The surrogate is convex, so every point on
/// the segment decreases it; backtracking only absorbs rounding.
fn accept_ascent(
    problem: &Reduced<'_>,
    phi: &RepresentingFunction,
    config: &RmrConfig,
    from: &[f64],
    proposal: Vec<f64>,
    current: f64,
) -> Option<(Vec<f64>, f64)> {
    let value = problem.objective(&proposal, phi, config);
    if value >= current {
        return Some((proposal, value));
    }
    let mut t = 0.5;
    for _ in 0..30 {
        let trial: Vec<f64> = from
            .iter()
            .zip(&proposal)
            .map(|(f, p)| f + t * (p - f))
            .collect();
        let value = problem.objective(&trial, phi, config);
        if value >= current {
            return Some((trial, value));
        }
        t *= 0.5;
    }
    None
}

/// Cyclic coordinate descent on `kappa sum_i w_i r_i^2 + lambda sum_s |a_s|`.
fn coordinate_descent(
    problem: &Reduced<'_>,
    weights: &[f64],
    kappa: f64,
    config: &RmrConfig,
    start: &[f64],
) -> Vec<f64> {
    let n = problem.n_groups();
    let (w_sum, wy_sum) = problem.weighted_sums(weights);
    let c = &problem.c;
    let mut a = start.to_vec();
    let mut b = problem.fitted(&a);
    // curvature of each coordinate: kappa sum_t W_t C[s,t]^2
    let curvature: Vec<f64> = (0..n)
        .map(|s| kappa * (0..n).map(|t| w_sum[t] * c[(s, t)] * c[(s, t)]).sum::<f64>())
        .collect();
    for _ in 0..config.inner_max_iters {
        let mut max_change = 0.0f64;
        let mut max_coef = 0.0f64;
        for s in 0..n {
            if curvature[s] <= 0.0 {
                if a[s] != 0.0 {
                    for t in 0..n {
                        b[t] -= c[(s, t)] * a[s];
                    }
                    max_change = max_change.max(a[s].abs());
                    a[s] = 0.0;
                }
                continue;
            }
            // correlation with the partial residual that excludes coordinate s
            let mut rho = 0.0;
            for t in 0..n {
                let partial = b[t] - c[(s, t)] * a[s];
                rho += c[(s, t)] * (wy_sum[t] - w_sum[t] * partial);
            }
            let updated = soft_threshold(kappa * rho, 0.5 * config.lambda) / curvature[s];
            let delta = updated - a[s];
            if delta != 0.0 {
                for t in 0..n {
                    b[t] += c[(s, t)] * delta;
                }
                a[s] = updated;
            }
            max_change = max_change.max(delta.abs());
            max_coef = max_coef.max(updated.abs());
        }
        if max_change <= 1e-13 * (1.0 + max_coef) {
            break;
        }
    }
    a
}

/// Proximal gradient ascent with backtracking, for any representing function.
/// The first trial step of each iteration is the Barzilai-Borwein length.
pub fn fit_gradient(
    gram: &DMatrix<f64>,
    y: &[f64],
    phi: &RepresentingFunction,
    config: &RmrConfig,
    init: Option<&[f64]>,
) -> Result<Fit, Error> {
    config.validate()?;
    check_problem(gram, y, init)?;
    gradient_reduced(&Reduced::new(gram, y), phi, config, init)
}

fn gradient_reduced(
    problem: &Reduced<'_>,
    phi: &RepresentingFunction,
    config: &RmrConfig,
    init: Option<&[f64]>,
) -> Result<Fit, Error> {
    const MAX_HALVINGS: usize = 50;
    let sigma = config.sigma;
    let lambda = config.lambda;

    let mut trace = Vec::new();
    let mut a = match init {
        Some(alpha) => {
            trace.push(problem.full_objective(alpha, phi, config));
            problem.reduce(alpha)
        }
        None => vec![0.0; problem.n_groups()],
    };
    let smooth_gradient = |a: &[f64]| -> Vec<f64> {
        let mut g = problem.data_gradient(a, phi, sigma);
        if config.penalty == Penalty::L2 {
            for ((gs, as_), c) in g.iter_mut().zip(a).zip(&problem.counts) {
                *gs -= 2.0 * lambda * as_ / c;
            }
        }
        g
    };
    let step_to = |a: &[f64], g: &[f64], t: f64| -> Vec<f64> {
        a.iter()
            .zip(g)
            .map(|(x, gx)| match config.penalty {
                Penalty::L2 => x + t * gx,
                Penalty::L1 => soft_threshold(x + t * gx, t * lambda),
            })
            .collect()
    };

    let mut current = problem.objective(&a, phi, config);
    trace.push(current);
    let mut grad = smooth_gradient(&a);
    let mut step = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_gradient_iters {
        iterations += 1;
        let mut t = step;
        let mut accepted = None;
        for halving in 0..=MAX_HALVINGS {
            let trial = step_to(&a, &grad, t);
            let moved: f64 = trial.iter().zip(&a).map(|(p, q)| (p - q) * (p - q)).sum();
            let scale = 1.0 + a.iter().map(|v| v * v).sum::<f64>();
            if halving == 0 && moved <= 1e-28 * scale {
                break;
            }
            let value = problem.objective(&trial, phi, config);
            if value >= current + 1e-4 * moved / t {
                accepted = Some((trial, value, t));
                break;
            }
            t *= 0.5;
        }
        let Some((next, value, used)) = accepted else {
            let trial = step_to(&a, &grad, step);
            let moved: f64 = trial.iter().zip(&a).map(|(p, q)| (p - q) * (p - q)).sum();
            if moved <= 1e-28 * (1.0 + a.iter().map(|v| v * v).sum::<f64>()) {
                converged = true;
                break;
            }
            return Err(Error::LineSearchFailed {
                halvings: MAX_HALVINGS,
            });
        };
        let next_grad = smooth_gradient(&next);
        // Barzilai-Borwein: s^T s / s^T (g - g') for the ascent direction
        let mut ss = 0.0;
        let mut sy = 0.0;
        for s in 0..a.len() {
            let ds = next[s] - a[s];
            ss += ds * ds;
            sy += ds * (grad[s] - next_grad[s]);
        }
        step = if sy > 0.0 && ss > 0.0 {
            (ss / sy).clamp(1e-12, 1e12)
        } else {
            (2.0 * used).min(1e12)
        };
        let change = value - current;
        a = next;
        grad = next_grad;
        current = value;
        trace.push(current);
        if change.abs() < config.tol {
            converged = true;
            break;
        }
    }
    Ok(Fit {
        alpha: problem.expand(&a),
        objective_trace: trace,
        iterations,
        converged,
    })
}

/// Half-Quadratic for the Gaussian and correntropy kinds, the gradient
/// solver otherwise.
pub fn fit(
    gram: &DMatrix<f64>,
    y: &[f64],
    phi: &RepresentingFunction,
    config: &RmrConfig,
    init: Option<&[f64]>,
) -> Result<Fit, Error> {
    match phi.kind() {
        PhiKind::Gaussian | PhiKind::Correntropy => fit_hq(gram, y, phi, config, init),
        _ => fit_gradient(gram, y, phi, config, init),
    }
}

/// The better, by objective, of the zero-start solve and a continuation path
/// over `sigma_k = 2 max|y_i|, 0.8 sigma_k, ..., sigma`. The zero start stays
/// at the mode nearest `alpha = 0`; the path can reach a heavier mode further
/// away. For residuals small against `sigma_k` the data term is a quadratic
/// with curvature proportional to `sigma_k^{-3}`, so each stage uses
/// `lambda (sigma / sigma_k)^3` to keep the penalty in the same proportion.
/// Stages before the last use the squared penalty, since under `q = 1` a
/// stage that lands on `alpha = 0` would pin every later stage there. The last
/// stage is the requested problem. This is the strategy behind
/// [`RmrModel::fit`]; it improves on the zero start but still returns a local
/// maximizer.
pub fn fit_multistart(
    gram: &DMatrix<f64>,
    y: &[f64],
    phi: &RepresentingFunction,
    config: &RmrConfig,
) -> Result<Fit, Error> {
    config.validate()?;
    check_problem(gram, y, None)?;
    multistart_reduced(&Reduced::new(gram, y), phi, config)
}

fn dispatch(
    problem: &Reduced<'_>,
    phi: &RepresentingFunction,
    config: &RmrConfig,
    init: Option<&[f64]>,
) -> Result<Fit, Error> {
    match phi.kind() {
        PhiKind::Gaussian | PhiKind::Correntropy => hq_reduced(problem, phi, config, init),
        _ => gradient_reduced(problem, phi, config, init),
    }
}

/// Ratio between consecutive bandwidths of the continuation path.
const PATH_RATIO: f64 = 0.8;

fn multistart_reduced(problem: &Reduced<'_>, phi: &RepresentingFunction, config: &RmrConfig) -> Result<Fit, Error> {
    let direct = dispatch(problem, phi, config, None)?;
    let spread = problem.y.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if spread <= config.sigma {
        return Ok(direct);
    }
    let mut sigma = 2.0 * spread;
    let mut alpha: Option<Vec<f64>> = None;
    let path = loop {
        let last = sigma <= config.sigma;
        let stage = RmrConfig {
            sigma,
            lambda: config.lambda * (config.sigma / sigma).powi(3),
            penalty: if last { config.penalty } else { Penalty::L2 },
            ..*config
        };
        let result = dispatch(problem, phi, &stage, alpha.as_deref())?;
        if sigma <= config.sigma {
            break result;
        }
        alpha = Some(result.alpha);
        sigma = (PATH_RATIO * sigma).max(config.sigma);
    };
    let direct_value = problem.full_objective(&direct.alpha, phi, config);
    let path_value = problem.full_objective(&path.alpha, phi, config);
    Ok(if path_value > direct_value { path } else { direct })
}

/// Kernel ridge regression `min (1/m) ||y - G^T alpha||^2 + lambda ||alpha||^2`,
/// the least-squares baseline.
pub fn fit_least_squares(gram: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<Vec<f64>, Error> {
    check_problem(gram, y, None)?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter {
            name: "lambda",
            reason: "must be a non-negative finite number",
        });
    }
    let problem = Reduced::new(gram, y);
    let ones = vec![1.0; y.len()];
    let a = problem.solve_weighted_ridge(&ones, lambda * problem.m())?;
    Ok(problem.expand(&a))
}

/// A fitted estimator `f(x) = sum_i alpha_i K(x_i, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RmrModel {
    alpha: Vec<f64>,
    train_inputs: Vec<Vec<f64>>,
    kernel: HypothesisKernel,
    phi: RepresentingFunction,
    config: RmrConfig,
    objective_trace: Vec<f64>,
}

impl RmrModel {
    /// Fits on raw inputs with [`fit_multistart`]: Half-Quadratic for the
    /// Gaussian and correntropy kinds, the gradient solver otherwise.
    pub fn fit(
        kernel: HypothesisKernel,
        inputs: &[Vec<f64>],
        y: &[f64],
        phi: RepresentingFunction,
        config: RmrConfig,
    ) -> Result<Self, Error> {
        config.validate()?;
        input_dimension(inputs)?;
        if y.len() != inputs.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.len(),
                found: y.len(),
            });
        }
        let problem = Reduced::from_inputs(&kernel, inputs, y)?;
        let result = multistart_reduced(&problem, &phi, &config)?;
        Self::from_parts(result.alpha, inputs.to_vec(), kernel, phi, config, result.objective_trace)
    }

    /// As [`fit`](Self::fit) with a precomputed Gram matrix of `inputs`.
    pub fn fit_with_gram(
        kernel: HypothesisKernel,
        inputs: &[Vec<f64>],
        gram: &DMatrix<f64>,
        y: &[f64],
        phi: RepresentingFunction,
        config: RmrConfig,
    ) -> Result<Self, Error> {
        let result = fit_multistart(gram, y, &phi, &config)?;
        Self::from_parts(result.alpha, inputs.to_vec(), kernel, phi, config, result.objective_trace)
    }

    pub fn from_parts(
        alpha: Vec<f64>,
        train_inputs: Vec<Vec<f64>>,
        kernel: HypothesisKernel,
        phi: RepresentingFunction,
        config: RmrConfig,
        objective_trace: Vec<f64>,
    ) -> Result<Self, Error> {
        input_dimension(&train_inputs)?;
        if alpha.len() != train_inputs.len() {
            return Err(Error::DimensionMismatch {
                expected: train_inputs.len(),
                found: alpha.len(),
            });
        }
        config.validate()?;
        Ok(Self {
            alpha,
            train_inputs,
            kernel,
            phi,
            config,
            objective_trace,
        })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn train_inputs(&self) -> &[Vec<f64>] {
        &self.train_inputs
    }

    pub fn kernel(&self) -> &HypothesisKernel {
        &self.kernel
    }

    pub fn phi(&self) -> &RepresentingFunction {
        &self.phi
    }

    pub fn config(&self) -> &RmrConfig {
        &self.config
    }

    pub fn objective_trace(&self) -> &[f64] {
        &self.objective_trace
    }

    pub fn dim(&self) -> usize {
        self.train_inputs[0].len()
    }

    /// `||alpha||_q^q` under the model's penalty.
    pub fn penalty_norm(&self) -> f64 {
        self.config.penalty.norm(&self.alpha)
    }

    /// Euclidean norm of the coefficients.
    pub fn coef_norm(&self) -> f64 {
        self.alpha.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64, Error> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(self
            .train_inputs
            .iter()
            .zip(&self.alpha)
            .map(|(xi, a)| a * self.kernel.eval(xi, x))
            .sum())
    }

    pub fn predict_many(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>, Error> {
        xs.iter().map(|x| self.predict(x)).collect()
    }
}

/// `sum_i alpha_i K(x_i, x)`.
pub fn predict(model: &RmrModel, x: &[f64]) -> Result<f64, Error> {
    model.predict(x)
}

/// Parameter schedule that yields the `m^{-theta}` excess-risk bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub theta: f64,
    pub lambda: f64,
    pub sigma: f64,
}

/// `theta = 2 beta / (8 beta + 5 s beta + 2 s + 4)`,
/// `lambda = (2 g - g^2)^{-theta/beta} m^{-theta/beta}` and
/// `sigma = (2 g - g^2)^{-theta/(2 beta)} m^{-theta/(2 beta)}`
/// with `g` the absolute spectral gap.
pub fn schedule_theorem2(m: usize, gamma_abs: f64, beta: f64, s: f64) -> Result<Schedule, Error> {
    if m == 0 {
        return Err(Error::InvalidParameter {
            name: "m",
            reason: "must be at least 1",
        });
    }
    if !(gamma_abs > 0.0 && gamma_abs <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "gamma_abs",
            reason: "must lie in (0, 1]",
        });
    }
    if !(beta > 0.0 && beta <= 2.0) {
        return Err(Error::InvalidParameter {
            name: "beta",
            reason: "must lie in (0, 2]",
        });
    }
    if !(s > 0.0 && s < 2.0) {
        return Err(Error::InvalidParameter {
            name: "s",
            reason: "must lie in (0, 2)",
        });
    }
    let theta = 2.0 * beta / (8.0 * beta + 5.0 * s * beta + 2.0 * s + 4.0);
    let discount = 2.0 * gamma_abs - gamma_abs * gamma_abs;
    let base = discount * m as f64;
    Ok(Schedule {
        theta,
        lambda: base.powf(-theta / beta),
        sigma: base.powf(-theta / (2.0 * beta)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_config(sigma: f64, lambda: f64, penalty: Penalty) -> RmrConfig {
        RmrConfig {
            tol: 1e-12,
            max_hq_iters: 1000,
            ..RmrConfig::new(sigma, lambda, penalty).unwrap()
        }
    }

    #[test]
    fn objective_examples() {
        let phi = RepresentingFunction::gaussian();
        let gram = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let cfg = RmrConfig::new(1.0, 0.1, Penalty::L2).unwrap();
        let got = objective(&[1.0, 0.0], &gram, &[1.0, 0.0], &phi, &cfg).unwrap();
        assert!((got - 0.275_51).abs() < 1e-5, "{got}");

        let y = [0.4, -0.7];
        let zero = objective(&[0.0, 0.0], &gram, &y, &phi, &cfg).unwrap();
        let expected = (phi.eval(0.4) + phi.eval(-0.7)) / 2.0;
        assert!((zero - expected).abs() < 1e-15);

        let identity = DMatrix::identity(2, 2);
        let interp = objective(&y, &identity, &y, &phi, &cfg).unwrap();
        assert!((interp - (phi.peak_value() - 0.1 * (0.16 + 0.49))).abs() < 1e-15);

        assert!(objective(&[0.0], &gram, &y, &phi, &cfg).is_err());
    }

    #[test]
    fn single_sample_ridge_matches_grid() {
        let phi = RepresentingFunction::gaussian();
        let gram = DMatrix::from_element(1, 1, 1.0);
        let cfg = gaussian_config(1.0, 1e-8, Penalty::L2);
        let fit = fit_hq(&gram, &[2.0], &phi, &cfg, None).unwrap();
        // grid oracle over [-5, 5] with step 1e-4
        let best = (0..=100_000)
            .map(|k| -5.0 + k as f64 * 1e-4)
            .max_by(|a, b| {
                let fa = objective(&[*a], &gram, &[2.0], &phi, &cfg).unwrap();
                let fb = objective(&[*b], &gram, &[2.0], &phi, &cfg).unwrap();
                fa.total_cmp(&fb)
            })
            .unwrap();
        assert!((best - 2.0).abs() < 1e-3);
        assert!((fit.alpha[0] - 2.0).abs() < 1e-3, "{:?}", fit.alpha);
    }

    #[test]
    fn zero_response_gives_zero_coefficients() {
        let gram = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.1, 0.3, 1.0, 0.3, 0.1, 0.3, 1.0]);
        for penalty in [Penalty::L1, Penalty::L2] {
            let cfg = gaussian_config(0.5, 0.1, penalty);
            let fit = fit_hq(&gram, &[0.0; 3], &RepresentingFunction::gaussian(), &cfg, None).unwrap();
            assert!(fit.alpha.iter().all(|&a| a == 0.0));
        }
        let epa = RepresentingFunction::new(PhiKind::Epanechnikov);
        let fit = fit_gradient(&gram, &[0.0; 3], &epa, &gaussian_config(0.5, 0.1, Penalty::L2), None).unwrap();
        assert!(fit.alpha.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn hq_rejects_compact_phi() {
        let gram = DMatrix::identity(2, 2);
        let epa = RepresentingFunction::new(PhiKind::Epanechnikov);
        let cfg = RmrConfig::default();
        assert!(matches!(
            fit_hq(&gram, &[1.0, 2.0], &epa, &cfg, None),
            Err(Error::NonGaussianPhi { kind: "epanechnikov" })
        ));
    }

    #[test]
    fn duplicate_inputs_share_coefficients() {
        let kernel = HypothesisKernel::gaussian_rbf(0.5).unwrap();
        let inputs = vec![vec![0.0], vec![1.0], vec![0.0], vec![0.5], vec![1.0]];
        let y = [0.1, 0.9, 0.3, 0.4, 1.1];
        let gram = gram_matrix(&kernel, &inputs).unwrap();
        let phi = RepresentingFunction::gaussian();
        let cfg = gaussian_config(0.7, 0.05, Penalty::L2);
        let fit = fit_hq(&gram, &y, &phi, &cfg, None).unwrap();
        assert_eq!(fit.alpha[0], fit.alpha[2]);
        assert_eq!(fit.alpha[1], fit.alpha[4]);
        // the reduced objective agrees with the full one
        let full = objective(&fit.alpha, &gram, &y, &phi, &cfg).unwrap();
        assert!((full - fit.objective()).abs() < 1e-14);
        // and the HQ fixed point is stationary for the full objective
        let g = objective_gradient(&fit.alpha, &gram, &y, &phi, &cfg).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-6), "{g:?}");
    }

    #[test]
    fn input_grouping_matches_gram_grouping() {
        let kernel = HypothesisKernel::gaussian_rbf(0.4).unwrap();
        let inputs: Vec<Vec<f64>> = [0.0, 0.5, 0.0, 1.0, 0.5, 0.0].iter().map(|&v| vec![v]).collect();
        let y = [0.2, 1.0, -0.1, 0.3, 0.8, 0.1];
        let phi = RepresentingFunction::gaussian();
        let cfg = gaussian_config(0.6, 0.02, Penalty::L2);
        let gram = gram_matrix(&kernel, &inputs).unwrap();
        let a = RmrModel::fit(kernel, &inputs, &y, phi, cfg).unwrap();
        let b = RmrModel::fit_with_gram(kernel, &inputs, &gram, &y, phi, cfg).unwrap();
        for (u, v) in a.alpha().iter().zip(b.alpha()) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn least_squares_interpolates_with_tiny_ridge() {
        let gram = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.0]);
        let y = [1.0, -1.0];
        let alpha = fit_least_squares(&gram, &y, 1e-12).unwrap();
        let r = residuals(&alpha, &gram, &y);
        assert!(r.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn predict_examples() {
        let kernel = HypothesisKernel::gaussian_rbf(1.0).unwrap();
        let phi = RepresentingFunction::gaussian();
        let cfg = RmrConfig::default();
        let inputs = vec![vec![0.0], vec![1.0]];
        let zero = RmrModel::from_parts(vec![0.0, 0.0], inputs.clone(), kernel, phi, cfg, vec![]).unwrap();
        assert_eq!(zero.predict(&[0.3]).unwrap(), 0.0);

        let single = RmrModel::from_parts(vec![2.5], vec![vec![0.4]], kernel, phi, cfg, vec![]).unwrap();
        assert_eq!(predict(&single, &[0.4]).unwrap(), 2.5);

        let pair = RmrModel::from_parts(vec![1.0, -1.0], inputs, kernel, phi, cfg, vec![]).unwrap();
        assert!((pair.predict(&[0.0]).unwrap() - 0.632_120_558_828_557_7).abs() < 1e-15);
        assert!(pair.predict(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn schedule_examples() {
        let s = schedule_theorem2(1024, 1.0, 2.0, 1e-9).unwrap();
        assert!((s.theta - 0.2).abs() < 1e-6);
        assert!((s.lambda - 0.5).abs() < 1e-6);
        assert!((s.sigma - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
        assert!(schedule_theorem2(0, 1.0, 2.0, 0.5).is_err());
        assert!(schedule_theorem2(10, 0.0, 2.0, 0.5).is_err());
        assert!(schedule_theorem2(10, 0.5, 2.5, 0.5).is_err());
        assert!(schedule_theorem2(10, 0.5, 1.0, 2.0).is_err());
    }

    #[test]
    fn l1_large_lambda_kills_everything() {
        let gram = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.1, 0.3, 1.0, 0.3, 0.1, 0.3, 1.0]);
        let y = [0.5, -1.0, 2.0];
        let cfg = gaussian_config(1.0, 10.0, Penalty::L1);
        let fit = fit_hq(&gram, &y, &RepresentingFunction::gaussian(), &cfg, None).unwrap();
        assert!(fit.alpha.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn config_validation() {
        assert!(RmrConfig::new(0.0, 0.1, Penalty::L2).is_err());
        assert!(RmrConfig::new(1.0, -0.1, Penalty::L2).is_err());
        let bad = RmrConfig {
            max_hq_iters: 0,
            ..RmrConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
