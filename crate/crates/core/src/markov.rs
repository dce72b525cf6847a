//! Finite-state Markov chains embedded in `[0, 1]^d`.
//!
//! States are indexed `0..n`; state `i` sits at covariate `embedding[i]`. The
//! spectral quantities follow the usual L2(pi) operator conventions: for a
//! reversible chain the spectrum is read off the symmetrized matrix
//! `D^{1/2} P D^{-1/2}` with `D = diag(pi)`, otherwise off `P` itself.
//!
//! Note the ranges: the reversible spectral gap lies in `[0, 2]` (the swap
//! chain has eigenvalue -1 and gap 2) while the absolute gap lies in `[0, 1]`.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Error;

/// Tolerance on row sums and entries of a transition matrix.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Eigenvalues within this distance of 1 count toward its multiplicity.
pub const UNIT_EIGENVALUE_TOL: f64 = 1e-8;
/// Tolerance of the detailed-balance check.
pub const REVERSIBILITY_TOL: f64 = 1e-10;

/// Row-stochastic matrix with a covariate attached to each state.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    matrix: DMatrix<f64>,
    embedding: Vec<Vec<f64>>,
}

/// Where a sampled path begins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Start {
    /// Draw the first state from the stationary distribution.
    #[default]
    Stationary,
    State(usize),
}

impl TransitionKernel {
    pub fn new(matrix: DMatrix<f64>, embedding: Vec<Vec<f64>>) -> Result<Self, Error> {
        let n = matrix.nrows();
        if n == 0 || matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n.max(1),
                found: matrix.ncols(),
            });
        }
        for i in 0..n {
            let row = matrix.row(i);
            if row.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                return Err(Error::NotStochastic {
                    row: i,
                    reason: "has a negative or non-finite entry",
                });
            }
            if (row.sum() - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::NotStochastic {
                    row: i,
                    reason: "does not sum to 1",
                });
            }
        }
        if embedding.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: embedding.len(),
            });
        }
        let d = embedding[0].len();
        for x in &embedding {
            if x.len() != d || d == 0 {
                return Err(Error::DimensionMismatch {
                    expected: d.max(1),
                    found: x.len(),
                });
            }
            if x.iter().any(|&c| !(0.0..=1.0).contains(&c)) {
                return Err(Error::InvalidParameter {
                    name: "state_embedding",
                    reason: "coordinates must lie in [0, 1]",
                });
            }
        }
        Ok(Self { matrix, embedding })
    }

    /// Chain on an evenly spaced grid in `[0, 1]^d`.
    pub fn with_grid(matrix: DMatrix<f64>, d: usize) -> Result<Self, Error> {
        let embedding = grid_embedding(matrix.nrows(), d)?;
        Self::new(matrix, embedding)
    }

    pub fn n_states(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dim(&self) -> usize {
        self.embedding[0].len()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn embedding(&self) -> &[Vec<f64>] {
        &self.embedding
    }

    /// All eigenvalues of `P` as a matrix.
    pub fn eigenvalues(&self) -> Vec<Complex<f64>> {
        self.matrix.complex_eigenvalues().iter().copied().collect()
    }

    /// Number of eigenvalues of `P` within [`UNIT_EIGENVALUE_TOL`] of 1.
    pub fn unit_multiplicity(&self) -> usize {
        unit_multiplicity(&self.eigenvalues())
    }

    /// The invariant distribution `pi P = pi`.
    pub fn stationary_distribution(&self) -> Result<Vec<f64>, Error> {
        let multiplicity = self.unit_multiplicity();
        if multiplicity != 1 {
            return Err(Error::NonUniqueStationary { multiplicity });
        }
        let n = self.n_states();
        // (P^T - I) pi = 0 with the last equation replaced by sum(pi) = 1
        let mut a = self.matrix.transpose();
        for i in 0..n {
            a[(i, i)] -= 1.0;
        }
        for j in 0..n {
            a[(n - 1, j)] = 1.0;
        }
        let mut b = DVector::zeros(n);
        b[n - 1] = 1.0;
        let solved = a
            .lu()
            .solve(&b)
            .ok_or(Error::NonUniqueStationary { multiplicity })?;
        let mut pi: Vec<f64> = solved.iter().map(|&v| v.max(0.0)).collect();
        let total: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|v| *v /= total);
        // one step of power iteration polishes the residual
        let polished = self.left_multiply(&pi);
        let total: f64 = polished.iter().sum();
        Ok(polished.into_iter().map(|v| v / total).collect())
    }

    /// Detailed balance `pi_i P_ij = pi_j P_ji` within [`REVERSIBILITY_TOL`].
    pub fn is_reversible(&self, pi: &[f64]) -> bool {
        self.balance_violation(pi) <= REVERSIBILITY_TOL
    }

    fn balance_violation(&self, pi: &[f64]) -> f64 {
        let n = self.n_states();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = (pi[i] * self.matrix[(i, j)] - pi[j] * self.matrix[(j, i)]).abs();
                worst = worst.max(v);
            }
        }
        worst
    }

    /// Time reversal `P*_ij = pi_j P_ji / pi_i`.
    pub fn adjoint(&self, pi: &[f64]) -> Result<DMatrix<f64>, Error> {
        if let Some(state) = pi.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::ZeroMass { state });
        }
        let n = self.n_states();
        Ok(DMatrix::from_fn(n, n, |i, j| {
            pi[j] * self.matrix[(j, i)] / pi[i]
        }))
    }

    /// `gamma_a = 1 - max{|lambda| : lambda != 1}`, or 0 when eigenvalue 1 is
    /// not simple.
    pub fn absolute_spectral_gap(&self) -> f64 {
        let eigenvalues = self.eigenvalues();
        if unit_multiplicity(&eigenvalues) != 1 {
            return 0.0;
        }
        let spectrum = match self.stationary_distribution() {
            Ok(pi) if self.is_reversible(&pi) && pi.iter().all(|&v| v > 0.0) => {
                symmetrized_spectrum(&self.matrix, &pi)
                    .into_iter()
                    .map(|v| Complex::new(v, 0.0))
                    .collect()
            }
            _ => eigenvalues,
        };
        let rest = drop_unit(spectrum);
        let largest = rest.iter().map(|z| modulus(*z)).fold(0.0, f64::max);
        (1.0 - largest).max(0.0)
    }

    /// `gamma = 1 - max{lambda : lambda != 1}` for a reversible chain, or 0
    /// when eigenvalue 1 is not simple.
    pub fn spectral_gap_reversible(&self) -> Result<f64, Error> {
        if self.unit_multiplicity() != 1 {
            return Ok(0.0);
        }
        let pi = self.stationary_distribution()?;
        let violation = self.balance_violation(&pi);
        if violation > REVERSIBILITY_TOL {
            return Err(Error::NotReversible { violation });
        }
        Ok(self_adjoint_gap(&self.matrix, &pi))
    }

    /// `gamma_p = max_{1 <= k <= k_max} gamma((P*)^k P^k) / k`.
    pub fn pseudo_spectral_gap(&self, k_max: usize) -> Result<f64, Error> {
        if k_max == 0 {
            return Err(Error::InvalidParameter {
                name: "k_max",
                reason: "must be at least 1",
            });
        }
        let pi = self.stationary_distribution()?;
        let adjoint = self.adjoint(&pi)?;
        let mut forward = self.matrix.clone();
        let mut backward = adjoint.clone();
        let mut best = 0.0f64;
        for k in 1..=k_max {
            if k > 1 {
                forward = &forward * &self.matrix;
                backward = &backward * &adjoint;
            }
            let product = &backward * &forward;
            best = best.max(self_adjoint_gap(&product, &pi) / k as f64);
        }
        Ok(best)
    }

    /// Samples a path of `m` states.
    pub fn sample(&self, m: usize, seed: u64, start: Start) -> Result<Vec<usize>, Error> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(m, start, &mut rng)
    }

    /// Samples a path of `m` states from a caller-supplied generator.
    pub fn sample_with<R: Rng + ?Sized>(
        &self,
        m: usize,
        start: Start,
        rng: &mut R,
    ) -> Result<Vec<usize>, Error> {
        if m == 0 {
            return Err(Error::InvalidParameter {
                name: "m",
                reason: "must be at least 1",
            });
        }
        let n = self.n_states();
        let cumulative: Vec<Vec<f64>> = (0..n)
            .map(|i| cumulative(self.matrix.row(i).iter().copied()))
            .collect();
        let first = match start {
            Start::State(state) if state >= n => {
                return Err(Error::InvalidStart { state, n_states: n })
            }
            Start::State(state) => state,
            Start::Stationary => {
                let pi = self.stationary_distribution()?;
                draw(&cumulative_of(&pi), rng)
            }
        };
        let mut path = Vec::with_capacity(m);
        path.push(first);
        let mut current = first;
        for _ in 1..m {
            current = draw(&cumulative[current], rng);
            path.push(current);
        }
        Ok(path)
    }

    /// `(t, ||P^t(start, .) - pi||_TV)` for `t = 1..=t_max`.
    pub fn tv_mixing_curve(&self, start_state: usize, t_max: usize) -> Result<Vec<(usize, f64)>, Error> {
        let n = self.n_states();
        if start_state >= n {
            return Err(Error::InvalidStart {
                state: start_state,
                n_states: n,
            });
        }
        if t_max == 0 {
            return Err(Error::InvalidParameter {
                name: "t_max",
                reason: "must be at least 1",
            });
        }
        let pi = self.stationary_distribution()?;
        let mut dist = vec![0.0; n];
        dist[start_state] = 1.0;
        let mut curve = Vec::with_capacity(t_max);
        for t in 1..=t_max {
            dist = self.left_multiply(&dist);
            let tv = 0.5 * dist.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum::<f64>();
            curve.push((t, tv));
        }
        Ok(curve)
    }

    /// Everything above in one report.
    pub fn diagnostics(&self, k_max: usize, t_max: usize) -> Result<ChainDiagnostics, Error> {
        let pi = self.stationary_distribution()?;
        let reversible = self.is_reversible(&pi);
        let gamma = if reversible {
            Some(self.spectral_gap_reversible()?)
        } else {
            None
        };
        let start = pi
            .iter()
            .enumerate()
            .fold(0, |best, (i, &v)| if v < pi[best] { i } else { best });
        Ok(ChainDiagnostics {
            gamma,
            gamma_abs: self.absolute_spectral_gap(),
            gamma_pseudo: self.pseudo_spectral_gap(k_max)?,
            tv_decay: self.tv_mixing_curve(start, t_max)?,
            reversible,
            pi,
        })
    }

    /// `v P` for a row vector `v`.
    pub fn left_multiply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n_states();
        let mut out = vec![0.0; n];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (j, o) in out.iter_mut().enumerate() {
                *o += vi * self.matrix[(i, j)];
            }
        }
        out
    }
}

/// Summary of a chain's stationary and mixing behaviour.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDiagnostics {
    pub pi: Vec<f64>,
    pub reversible: bool,
    /// Reversible spectral gap; `None` for non-reversible chains.
    pub gamma: Option<f64>,
    pub gamma_abs: f64,
    pub gamma_pseudo: f64,
    /// TV distance to `pi` from the least likely start state.
    pub tv_decay: Vec<(usize, f64)>,
}

/// Built-in chain families.
#[derive(Debug, Clone, PartialEq)]
pub enum ChainFamily {
    /// Every row equals the (normalized) weights.
    Iid { weights: Vec<f64> },
    /// `[[1 - p, p], [q, 1 - q]]`.
    TwoState { p: f64, q: f64 },
    /// Walk on a path of `n` states: stay with probability `laziness`, else
    /// step left or right with equal odds, holding at the ends.
    LazyRandomWalk { n: usize, laziness: f64 },
    /// Metropolis chain on a path targeting the (normalized) weights with
    /// nearest-neighbour proposals.
    MetropolisGrid { target: Vec<f64> },
    /// Hold with probability `stay`, otherwise redraw from the weights.
    /// The absolute spectral gap is exactly `1 - stay`.
    StickyIid { weights: Vec<f64>, stay: f64 },
}

impl ChainFamily {
    pub fn iid_uniform(n: usize) -> Self {
        ChainFamily::Iid {
            weights: vec![1.0; n],
        }
    }

    pub fn sticky_uniform(n: usize, stay: f64) -> Self {
        ChainFamily::StickyIid {
            weights: vec![1.0; n],
            stay,
        }
    }

    pub fn n_states(&self) -> usize {
        match self {
            ChainFamily::Iid { weights } | ChainFamily::StickyIid { weights, .. } => weights.len(),
            ChainFamily::TwoState { .. } => 2,
            ChainFamily::LazyRandomWalk { n, .. } => *n,
            ChainFamily::MetropolisGrid { target } => target.len(),
        }
    }

    /// The transition matrix with states on an evenly spaced grid in `[0, 1]^d`.
    pub fn build(&self, d: usize) -> Result<TransitionKernel, Error> {
        let matrix = match self {
            ChainFamily::Iid { weights } => {
                let w = normalized(weights, "weights")?;
                DMatrix::from_fn(w.len(), w.len(), |_, j| w[j])
            }
            ChainFamily::TwoState { p, q } => {
                probability("p", *p)?;
                probability("q", *q)?;
                DMatrix::from_row_slice(2, 2, &[1.0 - p, *p, *q, 1.0 - q])
            }
            ChainFamily::LazyRandomWalk { n, laziness } => {
                at_least_two(*n)?;
                probability("laziness", *laziness)?;
                let step = 0.5 * (1.0 - laziness);
                let mut p = DMatrix::zeros(*n, *n);
                for i in 0..*n {
                    if i > 0 {
                        p[(i, i - 1)] = step;
                    }
                    if i + 1 < *n {
                        p[(i, i + 1)] = step;
                    }
                    let off: f64 = p.row(i).sum();
                    p[(i, i)] = 1.0 - off;
                }
                p
            }
            ChainFamily::MetropolisGrid { target } => {
                let w = normalized(target, "target")?;
                let n = w.len();
                if w.iter().any(|&v| v <= 0.0) {
                    return Err(Error::InvalidParameter {
                        name: "target",
                        reason: "weights must be strictly positive",
                    });
                }
                let mut p = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in [i.wrapping_sub(1), i + 1] {
                        if j < n {
                            p[(i, j)] = 0.5 * (w[j] / w[i]).min(1.0);
                        }
                    }
                    let off: f64 = p.row(i).sum();
                    p[(i, i)] = 1.0 - off;
                }
                p
            }
            ChainFamily::StickyIid { weights, stay } => {
                let w = normalized(weights, "weights")?;
                probability("stay", *stay)?;
                let n = w.len();
                DMatrix::from_fn(n, n, |i, j| {
                    let hold = if i == j { *stay } else { 0.0 };
                    hold + (1.0 - stay) * w[j]
                })
            }
        };
        TransitionKernel::with_grid(matrix, d)
    }
}

/// Convenience for [`ChainFamily::build`].
pub fn builtin_chain(family: &ChainFamily, d: usize) -> Result<TransitionKernel, Error> {
    family.build(d)
}

/// `n` evenly spaced points of `[0, 1]^d`, row-major (last coordinate fastest).
/// `n` must be a perfect `d`-th power.
pub fn grid_embedding(n: usize, d: usize) -> Result<Vec<Vec<f64>>, Error> {
    if d == 0 {
        return Err(Error::InvalidParameter {
            name: "d",
            reason: "must be at least 1",
        });
    }
    at_least_two(n)?;
    let side = (n as f64).powf(1.0 / d as f64).round() as usize;
    if side < 2 || side.checked_pow(d as u32) != Some(n) {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: "number of states must be a perfect d-th power for a grid embedding",
        });
    }
    let coord = |k: usize| k as f64 / (side - 1) as f64;
    Ok((0..n)
        .map(|idx| {
            let mut point = vec![0.0; d];
            let mut rest = idx;
            for c in (0..d).rev() {
                point[c] = coord(rest % side);
                rest /= side;
            }
            point
        })
        .collect())
}

fn at_least_two(n: usize) -> Result<(), Error> {
    if n < 2 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: "chain needs at least 2 states",
        });
    }
    Ok(())
}

fn probability(name: &'static str, v: f64) -> Result<(), Error> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: "must be a probability in [0, 1]",
        })
    }
}

fn normalized(weights: &[f64], name: &'static str) -> Result<Vec<f64>, Error> {
    at_least_two(weights.len())?;
    if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidParameter {
            name,
            reason: "weights must be non-negative and finite",
        });
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidParameter {
            name,
            reason: "weights must not all be zero",
        });
    }
    Ok(weights.iter().map(|w| w / total).collect())
}

fn cumulative(row: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    row.map(|v| {
        acc += v;
        acc
    })
    .collect()
}

fn cumulative_of(p: &[f64]) -> Vec<f64> {
    cumulative(p.iter().copied())
}

fn draw<R: Rng + ?Sized>(cumulative: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen::<f64>() * cumulative[cumulative.len() - 1];
    match cumulative.iter().position(|&c| u < c) {
        Some(i) => i,
        // rounding at the top end: fall back to the last state with mass
        None => cumulative
            .windows(2)
            .rposition(|w| w[1] > w[0])
            .map_or(0, |i| i + 1),
    }
}

fn unit_multiplicity(eigenvalues: &[Complex<f64>]) -> usize {
    eigenvalues
        .iter()
        .filter(|z| modulus(*z - Complex::new(1.0, 0.0)) < UNIT_EIGENVALUE_TOL)
        .count()
}

fn modulus(z: Complex<f64>) -> f64 {
    z.re.hypot(z.im)
}

/// Removes the eigenvalue closest to 1.
fn drop_unit(mut spectrum: Vec<Complex<f64>>) -> Vec<Complex<f64>> {
    let one = Complex::new(1.0, 0.0);
    if let Some(idx) = (0..spectrum.len()).min_by(|&a, &b| {
        modulus(spectrum[a] - one)
            .partial_cmp(&modulus(spectrum[b] - one))
            .unwrap_or(core::cmp::Ordering::Equal)
    }) {
        spectrum.swap_remove(idx);
    }
    spectrum
}

/// Real spectrum of an operator self-adjoint in L2(pi), via
/// `D^{1/2} M D^{-1/2}` symmetrized against rounding.
fn symmetrized_spectrum(m: &DMatrix<f64>, pi: &[f64]) -> Vec<f64> {
    let n = m.nrows();
    let roots: Vec<f64> = pi.iter().map(|v| v.sqrt()).collect();
    let s = DMatrix::from_fn(n, n, |i, j| roots[i] * m[(i, j)] / roots[j]);
    let sym = (&s + s.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.iter().copied().collect()
}

/// `1 - max{lambda != 1}` for an operator self-adjoint in L2(pi).
fn self_adjoint_gap(m: &DMatrix<f64>, pi: &[f64]) -> f64 {
    let spectrum: Vec<f64> = if pi.iter().all(|&v| v > 0.0) {
        symmetrized_spectrum(m, pi)
    } else {
        m.complex_eigenvalues().iter().map(|z| z.re).collect()
    };
    let multiplicity = spectrum
        .iter()
        .filter(|&&v| (v - 1.0).abs() < UNIT_EIGENVALUE_TOL)
        .count();
    if multiplicity != 1 {
        return 0.0;
    }
    let rest = drop_unit(spectrum.into_iter().map(|v| Complex::new(v, 0.0)).collect());
    let largest = rest.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    if largest.is_finite() {
        1.0 - largest
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state(p: f64, q: f64) -> TransitionKernel {
        ChainFamily::TwoState { p, q }.build(1).unwrap()
    }

    fn cycle3() -> TransitionKernel {
        let p = DMatrix::from_row_slice(3, 3, &[0., 1., 0., 0., 0., 1., 1., 0., 0.]);
        TransitionKernel::with_grid(p, 1).unwrap()
    }

    #[test]
    fn two_state_stationary() {
        let pi = two_state(0.3, 0.2).stationary_distribution().unwrap();
        assert!((pi[0] - 0.4).abs() < 1e-12 && (pi[1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn doubly_stochastic_is_uniform() {
        let p = DMatrix::from_row_slice(3, 3, &[0.5, 0.3, 0.2, 0.2, 0.5, 0.3, 0.3, 0.2, 0.5]);
        let chain = TransitionKernel::with_grid(p, 1).unwrap();
        for v in chain.stationary_distribution().unwrap() {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_has_no_unique_stationary_law() {
        let chain = TransitionKernel::with_grid(DMatrix::identity(3, 3), 1).unwrap();
        assert!(matches!(
            chain.stationary_distribution(),
            Err(Error::NonUniqueStationary { multiplicity: 3 })
        ));
        assert_eq!(chain.spectral_gap_reversible().unwrap(), 0.0);
        assert_eq!(chain.absolute_spectral_gap(), 0.0);
    }

    #[test]
    fn rejects_non_stochastic() {
        let p = DMatrix::from_row_slice(2, 2, &[0.5, 0.6, 0.5, 0.5]);
        assert!(matches!(
            TransitionKernel::with_grid(p, 1),
            Err(Error::NotStochastic { row: 0, .. })
        ));
        let p = DMatrix::from_row_slice(2, 2, &[1.5, -0.5, 0.5, 0.5]);
        assert!(TransitionKernel::with_grid(p, 1).is_err());
    }

    #[test]
    fn reversibility_examples() {
        let chain = two_state(0.3, 0.2);
        let pi = chain.stationary_distribution().unwrap();
        assert!(chain.is_reversible(&pi));

        let cyc = cycle3();
        let pi = cyc.stationary_distribution().unwrap();
        assert!(!cyc.is_reversible(&pi));
        assert!(matches!(
            cyc.spectral_gap_reversible(),
            Err(Error::NotReversible { .. })
        ));

        let sym = DMatrix::from_row_slice(3, 3, &[0.5, 0.25, 0.25, 0.25, 0.5, 0.25, 0.25, 0.25, 0.5]);
        let chain = TransitionKernel::with_grid(sym, 1).unwrap();
        assert!(chain.is_reversible(&[1.0 / 3.0; 3]));
    }

    #[test]
    fn adjoint_examples() {
        let chain = two_state(0.3, 0.2);
        let pi = chain.stationary_distribution().unwrap();
        let adj = chain.adjoint(&pi).unwrap();
        assert!((adj - chain.matrix()).abs().max() < 1e-12);

        let cyc = cycle3();
        let pi = cyc.stationary_distribution().unwrap();
        let adj = cyc.adjoint(&pi).unwrap();
        let reverse = DMatrix::from_row_slice(3, 3, &[0., 0., 1., 1., 0., 0., 0., 1., 0.]);
        assert!((adj - reverse).abs().max() < 1e-12);

        assert!(matches!(
            chain.adjoint(&[1.0, 0.0]),
            Err(Error::ZeroMass { state: 1 })
        ));
    }

    #[test]
    fn absolute_gap_examples() {
        assert!((two_state(0.3, 0.2).absolute_spectral_gap() - 0.5).abs() < 1e-10);
        let iid = ChainFamily::iid_uniform(8).build(1).unwrap();
        assert!((iid.absolute_spectral_gap() - 1.0).abs() < 1e-10);
        assert!(two_state(1.0, 1.0).absolute_spectral_gap().abs() < 1e-10);
    }

    #[test]
    fn reversible_gap_examples() {
        assert!((two_state(1.0, 1.0).spectral_gap_reversible().unwrap() - 2.0).abs() < 1e-10);
        assert!((two_state(0.3, 0.2).spectral_gap_reversible().unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn pseudo_gap_examples() {
        let chain = two_state(0.3, 0.2);
        assert!((chain.pseudo_spectral_gap(3).unwrap() - 0.75).abs() < 1e-8);
        assert!((chain.pseudo_spectral_gap(1).unwrap() - 0.75).abs() < 1e-8);
        let iid = ChainFamily::iid_uniform(5).build(1).unwrap();
        assert!((iid.pseudo_spectral_gap(4).unwrap() - 1.0).abs() < 1e-10);
        assert!(chain.pseudo_spectral_gap(0).is_err());
    }

    #[test]
    fn cycle_sampling_is_deterministic() {
        let path = cycle3().sample(4, 9, Start::State(0)).unwrap();
        assert_eq!(path, [0, 1, 2, 0]);
        assert!(matches!(
            cycle3().sample(4, 9, Start::State(3)),
            Err(Error::InvalidStart { state: 3, n_states: 3 })
        ));
        assert!(cycle3().sample(0, 9, Start::Stationary).is_err());
    }

    #[test]
    fn same_seed_same_path() {
        let chain = ChainFamily::LazyRandomWalk { n: 6, laziness: 0.3 }.build(1).unwrap();
        let a = chain.sample(500, 42, Start::Stationary).unwrap();
        let b = chain.sample(500, 42, Start::Stationary).unwrap();
        assert_eq!(a, b);
        let c = chain.sample(500, 43, Start::Stationary).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn iid_sampling_frequencies() {
        let chain = ChainFamily::iid_uniform(4).build(1).unwrap();
        let m = 10_000;
        let path = chain.sample(m, 7, Start::Stationary).unwrap();
        let mut counts = [0usize; 4];
        path.iter().for_each(|&s| counts[s] += 1);
        let tol = 3.0 / (m as f64).sqrt();
        for c in counts {
            assert!((c as f64 / m as f64 - 0.25).abs() < tol);
        }
    }

    #[test]
    fn tv_curve_examples() {
        let iid = ChainFamily::iid_uniform(3).build(1).unwrap();
        assert!(iid.tv_mixing_curve(0, 5).unwrap().iter().all(|&(_, tv)| tv < 1e-15));

        let curve = two_state(0.3, 0.2).tv_mixing_curve(0, 8).unwrap();
        for &(t, tv) in &curve {
            assert!((tv - 0.6 * 0.5f64.powi(t as i32)).abs() < 1e-12);
        }
        assert_eq!(two_state(0.3, 0.2).tv_mixing_curve(1, 1).unwrap().len(), 1);
    }

    #[test]
    fn builtin_examples() {
        let chain = two_state(0.3, 0.2);
        assert_eq!(chain.embedding(), &[vec![0.0], vec![1.0]]);
        let walk = ChainFamily::LazyRandomWalk { n: 3, laziness: 0.5 }.build(1).unwrap();
        let pi = walk.stationary_distribution().unwrap();
        assert!(walk.is_reversible(&pi));
        let sticky = ChainFamily::sticky_uniform(8, 0.9).build(1).unwrap();
        assert!((sticky.absolute_spectral_gap() - 0.1).abs() < 1e-10);
        assert!(ChainFamily::TwoState { p: 1.2, q: 0.1 }.build(1).is_err());
        assert!(ChainFamily::LazyRandomWalk { n: 1, laziness: 0.1 }.build(1).is_err());
    }

    #[test]
    fn grid_embedding_row_major() {
        let pts = grid_embedding(9, 2).unwrap();
        assert_eq!(pts[0], [0.0, 0.0]);
        assert_eq!(pts[1], [0.0, 0.5]);
        assert_eq!(pts[3], [0.5, 0.0]);
        assert_eq!(pts[8], [1.0, 1.0]);
        assert!(grid_embedding(8, 2).is_err());
    }

    #[test]
    fn metropolis_targets_its_weights() {
        let target = vec![1.0, 2.0, 3.0, 4.0];
        let chain = ChainFamily::MetropolisGrid { target: target.clone() }.build(1).unwrap();
        let pi = chain.stationary_distribution().unwrap();
        for (p, w) in pi.iter().zip(&target) {
            assert!((p - w / 10.0).abs() < 1e-12);
        }
        assert!(chain.is_reversible(&pi));
    }
}
