//! Noise models, synthetic tasks and the three modal risk functionals.
//!
//! For a task `Y = f*(X) + eps` with `X` distributed as the chain's stationary
//! law over finitely many states, the conditional density of `Y` at `t` is
//! `p_eps(t - f*(x))`. The true modal risk is therefore an exact finite sum,
//! and the smoothed (surrogate) risk only needs a one-dimensional quadrature
//! per state.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, StudentT};

use crate::kernels::{integrate_uniform, RepresentingFunction, INV_SQRT_2PI};
use crate::markov::TransitionKernel;
use crate::solver::RmrModel;
use crate::Error;

/// Points of the uniform grid used for the mode and curvature checks.
pub const NOISE_GRID_POINTS: usize = 10_001;
/// Default number of quadrature nodes for the surrogate risk.
pub const DEFAULT_QUAD_POINTS: usize = 20_001;

/// Additive noise whose density has its mode at zero.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel {
    Gaussian { scale: f64 },
    /// Student t with `dof` degrees of freedom, scaled by `scale`.
    StudentT { dof: f64, scale: f64 },
    /// `Gamma(shape, scale) - (shape - 1) scale`, so the mode sits at zero.
    ShiftedGamma { shape: f64, scale: f64 },
    Mixture {
        weights: Vec<f64>,
        components: Vec<NoiseModel>,
    },
}

impl NoiseModel {
    pub fn gaussian(scale: f64) -> Result<Self, Error> {
        positive("scale", scale)?;
        NoiseModel::Gaussian { scale }.validated()
    }

    pub fn student_t(dof: f64, scale: f64) -> Result<Self, Error> {
        positive("dof", dof)?;
        positive("scale", scale)?;
        if dof < 1.0 {
            return Err(Error::InvalidParameter {
                name: "dof",
                reason: "must be at least 1",
            });
        }
        NoiseModel::StudentT { dof, scale }.validated()
    }

    pub fn shifted_gamma(shape: f64, scale: f64) -> Result<Self, Error> {
        positive("scale", scale)?;
        if !(shape >= 1.0) || !shape.is_finite() {
            return Err(Error::InvalidParameter {
                name: "shape",
                reason: "must be at least 1 for the density to have a mode",
            });
        }
        NoiseModel::ShiftedGamma { shape, scale }.validated()
    }

    /// Mixture of mode-zero components. The mixture itself is checked
    /// numerically for a mode at zero and rejected otherwise.
    pub fn mixture(weights: Vec<f64>, components: Vec<NoiseModel>) -> Result<Self, Error> {
        if weights.len() != components.len() || weights.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: components.len(),
                found: weights.len(),
            });
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "weights",
                reason: "mixture weights must be positive",
            });
        }
        let total: f64 = weights.iter().sum();
        let weights = weights.iter().map(|w| w / total).collect();
        NoiseModel::Mixture {
            weights,
            components,
        }
        .validated()
    }

    /// Runs the mode-at-zero and unit-mass checks.
    pub fn validated(self) -> Result<Self, Error> {
        let argmax = self.grid_argmax();
        let step = 20.0 * self.scale() / (NOISE_GRID_POINTS - 1) as f64;
        if argmax.abs() > step * (1.0 + 1e-9) {
            return Err(Error::ModeNotAtZero { argmax });
        }
        let integral = self.total_mass();
        if (integral - 1.0).abs() > 1e-4 {
            return Err(Error::NotNormalized { integral });
        }
        Ok(self)
    }

    /// Characteristic scale; the checks use the window `[-10 s, 10 s]`.
    pub fn scale(&self) -> f64 {
        match self {
            NoiseModel::Gaussian { scale } | NoiseModel::StudentT { scale, .. } => *scale,
            NoiseModel::ShiftedGamma { shape, scale } => scale * shape.sqrt(),
            NoiseModel::Mixture { components, .. } => {
                components.iter().map(NoiseModel::scale).fold(0.0, f64::max)
            }
        }
    }

    pub fn pdf(&self, t: f64) -> f64 {
        match self {
            NoiseModel::Gaussian { scale } => {
                let z = t / scale;
                INV_SQRT_2PI / scale * (-0.5 * z * z).exp()
            }
            NoiseModel::StudentT { dof, scale } => {
                let z = t / scale;
                let log_norm = libm::lgamma(0.5 * (dof + 1.0))
                    - libm::lgamma(0.5 * dof)
                    - 0.5 * (dof * PI).ln()
                    - scale.ln();
                (log_norm - 0.5 * (dof + 1.0) * (1.0 + z * z / dof).ln()).exp()
            }
            NoiseModel::ShiftedGamma { shape, scale } => {
                let x = t + (shape - 1.0) * scale;
                if x < 0.0 || (x == 0.0 && *shape > 1.0) {
                    return 0.0;
                }
                let log_norm = -libm::lgamma(*shape) - shape * scale.ln();
                (log_norm + (shape - 1.0) * x.ln() - x / scale).exp()
            }
            NoiseModel::Mixture {
                weights,
                components,
            } => weights.iter().zip(components).map(|(w, c)| w * c.pdf(t)).sum(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            NoiseModel::Gaussian { scale } => Normal::new(0.0, *scale)
                .expect("validated scale")
                .sample(rng),
            NoiseModel::StudentT { dof, scale } => {
                scale * StudentT::new(*dof).expect("validated dof").sample(rng)
            }
            NoiseModel::ShiftedGamma { shape, scale } => {
                Gamma::new(*shape, *scale).expect("validated shape").sample(rng)
                    - (shape - 1.0) * scale
            }
            NoiseModel::Mixture {
                weights,
                components,
            } => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (w, c) in weights.iter().zip(components) {
                    acc += w;
                    if u < acc {
                        return c.sample(rng);
                    }
                }
                components[components.len() - 1].sample(rng)
            }
        }
    }

    /// Whether the density is twice continuously differentiable.
    pub fn smoothness(&self) -> Result<(), Error> {
        match self {
            NoiseModel::Gaussian { .. } | NoiseModel::StudentT { .. } => Ok(()),
            // x^(k-1) near the left edge is C^2 only for k > 3
            NoiseModel::ShiftedGamma { shape, .. } if *shape <= 3.0 => Err(Error::NonSmoothNoise {
                reason: "shifted gamma needs shape > 3",
            }),
            NoiseModel::ShiftedGamma { .. } => Ok(()),
            NoiseModel::Mixture { components, .. } => {
                components.iter().try_for_each(NoiseModel::smoothness)
            }
        }
    }

    /// `sup |p''|`: exact for Gaussian noise, otherwise estimated by central
    /// differences on the check grid.
    pub fn second_derivative_sup(&self) -> f64 {
        if let NoiseModel::Gaussian { scale } = self {
            // attained at the mode
            return INV_SQRT_2PI / scale.powi(3);
        }
        let half = 10.0 * self.scale();
        let h = 2.0 * half / (NOISE_GRID_POINTS - 1) as f64;
        (1..NOISE_GRID_POINTS - 1)
            .map(|k| {
                let t = -half + k as f64 * h;
                ((self.pdf(t + h) - 2.0 * self.pdf(t) + self.pdf(t - h)) / (h * h)).abs()
            })
            .fold(0.0, f64::max)
    }

    fn grid_argmax(&self) -> f64 {
        let half = 10.0 * self.scale();
        let h = 2.0 * half / (NOISE_GRID_POINTS - 1) as f64;
        let mut best = (f64::NEG_INFINITY, 0.0);
        for k in 0..NOISE_GRID_POINTS {
            let t = -half + k as f64 * h;
            let v = self.pdf(t);
            if v > best.0 {
                best = (v, t);
            }
        }
        best.1
    }

    /// Mass over the real line via `t = s tan(v)`, which keeps heavy tails finite.
    fn total_mass(&self) -> f64 {
        let s = self.scale();
        let intervals = 200_000;
        let dv = PI / intervals as f64;
        (0..intervals)
            .map(|k| {
                let v = -0.5 * PI + (k as f64 + 0.5) * dv;
                let c = v.cos();
                self.pdf(s * v.tan()) * s / (c * c)
            })
            .sum::<f64>()
            * dv
    }
}

fn positive(name: &'static str, v: f64) -> Result<(), Error> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: "must be a positive finite number",
        })
    }
}

/// Regression target `f*`.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetFunction {
    /// `sin(2 pi x_1) exp(-x_1)`, rescaled to unit sup norm over the states.
    SinExp,
    Zero,
    Constant(f64),
    /// One value per chain state.
    Tabulated(Vec<f64>),
}

impl TargetFunction {
    fn raw(&self, x: &[f64]) -> f64 {
        match self {
            TargetFunction::SinExp => (TAU * x[0]).sin() * (-x[0]).exp(),
            TargetFunction::Zero => 0.0,
            TargetFunction::Constant(c) => *c,
            TargetFunction::Tabulated(_) => f64::NAN,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TargetFunction::SinExp => "sin-exp",
            TargetFunction::Zero => "zero",
            TargetFunction::Constant(_) => "constant",
            TargetFunction::Tabulated(_) => "tabulated",
        }
    }
}

/// `Y = f*(X) + eps` with covariates driven by a Markov chain.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTask {
    chain: TransitionKernel,
    pi: Vec<f64>,
    noise: NoiseModel,
    target: TargetFunction,
    f_star: Vec<f64>,
    sup_norm: f64,
}

impl SyntheticTask {
    pub fn new(chain: TransitionKernel, target: TargetFunction, noise: NoiseModel) -> Result<Self, Error> {
        let pi = chain.stationary_distribution()?;
        let states = chain.embedding();
        let f_star: Vec<f64> = match &target {
            TargetFunction::Tabulated(values) => {
                if values.len() != states.len() {
                    return Err(Error::DimensionMismatch {
                        expected: states.len(),
                        found: values.len(),
                    });
                }
                values.clone()
            }
            TargetFunction::SinExp => {
                let raw: Vec<f64> = states.iter().map(|x| target.raw(x)).collect();
                let peak = raw.iter().map(|v| v.abs()).fold(0.0, f64::max);
                if peak > 0.0 {
                    raw.iter().map(|v| v / peak).collect()
                } else {
                    raw
                }
            }
            _ => states.iter().map(|x| target.raw(x)).collect(),
        };
        if f_star.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "target",
                reason: "target values must be finite",
            });
        }
        let sup_norm = f_star.iter().map(|v| v.abs()).fold(0.0, f64::max);
        Ok(Self {
            chain,
            pi,
            noise,
            target,
            f_star,
            sup_norm,
        })
    }

    /// Same target and noise over a different chain with the same states.
    pub fn with_chain(&self, chain: TransitionKernel) -> Result<Self, Error> {
        if chain.embedding() != self.chain.embedding() {
            return Err(Error::InvalidParameter {
                name: "chain",
                reason: "replacement chain must share the state embedding",
            });
        }
        Self::new(chain, self.target.clone(), self.noise.clone())
    }

    pub fn chain(&self) -> &TransitionKernel {
        &self.chain
    }

    pub fn stationary(&self) -> &[f64] {
        &self.pi
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn target(&self) -> &TargetFunction {
        &self.target
    }

    /// `f*` at every state.
    pub fn f_star(&self) -> &[f64] {
        &self.f_star
    }

    /// `M = max |f*|` over the states.
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    fn offsets(&self, f_values: &[f64]) -> Result<Vec<f64>, Error> {
        if f_values.len() != self.f_star.len() {
            return Err(Error::DimensionMismatch {
                expected: self.f_star.len(),
                found: f_values.len(),
            });
        }
        Ok(f_values.iter().zip(&self.f_star).map(|(f, s)| f - s).collect())
    }
}

/// `(1 / (m sigma)) sum_i phi((y_i - f(x_i)) / sigma)`.
pub fn empirical_modal_risk(
    f_values: &[f64],
    y: &[f64],
    phi: &RepresentingFunction,
    sigma: f64,
) -> Result<f64, Error> {
    if f_values.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            found: f_values.len(),
        });
    }
    positive("sigma", sigma)?;
    let m = y.len() as f64;
    let total: f64 = y.iter().zip(f_values).map(|(yi, fi)| phi.loss(yi - fi, sigma)).sum();
    Ok(total / (m * sigma))
}

/// `R(f) = sum_s pi_s p_eps(f(x_s) - f*(x_s))`.
pub fn true_modal_risk(task: &SyntheticTask, f_on_states: &[f64]) -> Result<f64, Error> {
    let offsets = task.offsets(f_on_states)?;
    Ok(task
        .pi
        .iter()
        .zip(&offsets)
        .map(|(p, d)| p * task.noise.pdf(*d))
        .sum())
}

/// `R^sigma(f) = sum_s pi_s int (1/sigma) phi((t - d_s) / sigma) p_eps(t) dt`
/// with `d_s = f(x_s) - f*(x_s)`.
pub fn surrogate_risk(
    task: &SyntheticTask,
    f_on_states: &[f64],
    phi: &RepresentingFunction,
    sigma: f64,
    quad_points: usize,
) -> Result<f64, Error> {
    positive("sigma", sigma)?;
    if quad_points < 1001 {
        return Err(Error::InvalidParameter {
            name: "quad_points",
            reason: "must be at least 1001",
        });
    }
    let offsets = task.offsets(f_on_states)?;
    let half = smoothing_halfwidth(phi, sigma);
    let step = 2.0 * half / (quad_points - 1) as f64;
    let mut values = vec![0.0; quad_points];
    let mut total = 0.0;
    for (p, d) in task.pi.iter().zip(&offsets) {
        for (k, v) in values.iter_mut().enumerate() {
            let u = -half + k as f64 * step;
            *v = phi.loss(u, sigma) / sigma * task.noise.pdf(d + u);
        }
        total += p * integrate_uniform(&values, step);
    }
    Ok(total)
}

/// Half-width of the window outside which the smoothing term is negligible.
fn smoothing_halfwidth(phi: &RepresentingFunction, sigma: f64) -> f64 {
    match (phi.support_halfwidth(), phi.kind()) {
        (Some(h), _) => h * sigma,
        (None, crate::PhiKind::Correntropy) => (60.0 * sigma).sqrt(),
        (None, _) => 12.0 * sigma,
    }
}

/// Comparison-inequality check: the measured
/// `|R(f*) - R(f) - (R^sigma(f*) - R^sigma(f))|` and the bound
/// `C1 sigma^2` with `C1 = sup|p''| int u^2 phi(u) du`.
pub fn comparison_gap(
    task: &SyntheticTask,
    f_on_states: &[f64],
    phi: &RepresentingFunction,
    sigma: f64,
    quad_points: usize,
) -> Result<(f64, f64), Error> {
    task.noise.smoothness()?;
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "sigma",
            reason: "must lie in (0, 1]",
        });
    }
    let f_star = task.f_star.clone();
    let true_gap = true_modal_risk(task, &f_star)? - true_modal_risk(task, f_on_states)?;
    let smooth_gap = surrogate_risk(task, &f_star, phi, sigma, quad_points)?
        - surrogate_risk(task, f_on_states, phi, sigma, quad_points)?;
    let c1 = task.noise.second_derivative_sup() * phi.second_moment();
    Ok(((true_gap - smooth_gap).abs(), c1 * sigma * sigma))
}

/// `R(f*) - R(f_z)` with the model evaluated at every chain state.
pub fn excess_risk(task: &SyntheticTask, model: &RmrModel) -> Result<f64, Error> {
    let predictions = model.predict_many(task.chain.embedding())?;
    let f_star = task.f_star.clone();
    Ok(true_modal_risk(task, &f_star)? - true_modal_risk(task, &predictions)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::ChainFamily;
    use crate::PhiKind;

    fn uniform_pair(noise: NoiseModel, f_star: Vec<f64>) -> SyntheticTask {
        let chain = ChainFamily::iid_uniform(2).build(1).unwrap();
        SyntheticTask::new(chain, TargetFunction::Tabulated(f_star), noise).unwrap()
    }

    #[test]
    fn empirical_risk_examples() {
        let phi = RepresentingFunction::gaussian();
        let y = [0.3, -1.2, 2.0];
        let r = empirical_modal_risk(&y, &y, &phi, 0.5).unwrap();
        assert!((r - phi.peak_value() / 0.5).abs() < 1e-15);

        let epa = RepresentingFunction::new(PhiKind::Epanechnikov);
        assert_eq!(empirical_modal_risk(&[0.0], &[5.0], &epa, 1.0).unwrap(), 0.0);

        let r = empirical_modal_risk(&[0.0, 0.0], &[0.0, 1.0], &phi, 1.0).unwrap();
        assert!((r - 0.320_456_6).abs() < 1e-6);

        assert!(empirical_modal_risk(&[0.0], &[0.0, 1.0], &phi, 1.0).is_err());
    }

    #[test]
    fn true_risk_examples() {
        let task = uniform_pair(NoiseModel::gaussian(1.0).unwrap(), vec![0.0, 0.0]);
        let at_star = true_modal_risk(&task, &[0.0, 0.0]).unwrap();
        assert!((at_star - INV_SQRT_2PI).abs() < 1e-15);
        let off = true_modal_risk(&task, &[0.0, 1.0]).unwrap();
        assert!((off - 0.320_456_6).abs() < 1e-6);

        let gamma = NoiseModel::shifted_gamma(2.0, 0.5).unwrap();
        let task = uniform_pair(gamma, vec![0.2, -0.1]);
        // support of the shifted gamma starts at -(k - 1) scale = -0.5
        assert_eq!(true_modal_risk(&task, &[0.2 - 0.6, -0.1 - 0.6]).unwrap(), 0.0);
    }

    #[test]
    fn surrogate_examples() {
        let task = uniform_pair(NoiseModel::gaussian(1.0).unwrap(), vec![0.5, -0.5]);
        let phi = RepresentingFunction::gaussian();
        let f = task.f_star().to_vec();
        let small = surrogate_risk(&task, &f, &phi, 0.01, DEFAULT_QUAD_POINTS).unwrap();
        assert!((small - INV_SQRT_2PI).abs() < 2e-3);

        // N(0, s^2) convolved with N(0, sigma^2) evaluated at 0
        let s: f64 = 1.0;
        let sigma: f64 = 0.4;
        let exact = INV_SQRT_2PI / (s * s + sigma * sigma).sqrt();
        let got = surrogate_risk(&task, &f, &phi, sigma, DEFAULT_QUAD_POINTS).unwrap();
        assert!((got - exact).abs() < 1e-12);

        let plus = [0.5 + 0.3, -0.5 + 0.3];
        let minus = [0.5 - 0.3, -0.5 - 0.3];
        let a = surrogate_risk(&task, &plus, &phi, 0.3, DEFAULT_QUAD_POINTS).unwrap();
        let b = surrogate_risk(&task, &minus, &phi, 0.3, DEFAULT_QUAD_POINTS).unwrap();
        assert!((a - b).abs() < 1e-14);
        assert!(surrogate_risk(&task, &f, &phi, 0.3, 1000).is_err());
    }

    #[test]
    fn comparison_gap_vanishes_at_target() {
        let task = uniform_pair(NoiseModel::gaussian(1.0).unwrap(), vec![0.5, -0.5]);
        let phi = RepresentingFunction::gaussian();
        let f = task.f_star().to_vec();
        let (gap, bound) = comparison_gap(&task, &f, &phi, 0.5, DEFAULT_QUAD_POINTS).unwrap();
        assert_eq!(gap, 0.0);
        assert!(bound > 0.0);
    }

    #[test]
    fn comparison_gap_rejects_rough_noise() {
        let task = uniform_pair(NoiseModel::shifted_gamma(2.0, 1.0).unwrap(), vec![0.0, 0.0]);
        let phi = RepresentingFunction::gaussian();
        assert!(matches!(
            comparison_gap(&task, &[0.0, 0.0], &phi, 0.5, DEFAULT_QUAD_POINTS),
            Err(Error::NonSmoothNoise { .. })
        ));
    }

    #[test]
    fn shipped_noise_models_have_mode_zero() {
        let models = [
            NoiseModel::gaussian(0.3).unwrap(),
            NoiseModel::student_t(2.0, 1.0).unwrap(),
            NoiseModel::student_t(1.0, 0.5).unwrap(),
            NoiseModel::shifted_gamma(1.0, 1.0).unwrap(),
            NoiseModel::shifted_gamma(4.0, 0.5).unwrap(),
            NoiseModel::mixture(
                vec![0.7, 0.3],
                vec![
                    NoiseModel::gaussian(0.5).unwrap(),
                    NoiseModel::student_t(3.0, 2.0).unwrap(),
                ],
            )
            .unwrap(),
        ];
        for m in models {
            assert!(m.grid_argmax().abs() <= 20.0 * m.scale() / 10_000.0 + 1e-12, "{m:?}");
        }
    }

    #[test]
    fn invalid_direct_constructions_are_caught() {
        // shape < 1 puts an integrable spike at the left edge, away from zero
        let spike = NoiseModel::ShiftedGamma { shape: 0.5, scale: 1.0 };
        assert!(matches!(spike.validated(), Err(Error::ModeNotAtZero { .. })));
        let light = NoiseModel::Mixture {
            weights: vec![0.5, 0.2],
            components: vec![NoiseModel::Gaussian { scale: 1.0 }, NoiseModel::Gaussian { scale: 2.0 }],
        };
        assert!(matches!(light.validated(), Err(Error::NotNormalized { .. })));
        assert!(NoiseModel::shifted_gamma(0.5, 1.0).is_err());
        assert!(NoiseModel::mixture(vec![1.0], vec![]).is_err());
    }

    #[test]
    fn excess_risk_hand_instance() {
        let task = uniform_pair(NoiseModel::gaussian(1.0).unwrap(), vec![0.0, 1.0]);
        let got = true_modal_risk(&task, &[0.0, 1.0]).unwrap()
            - true_modal_risk(&task, &[0.0, 0.0]).unwrap();
        assert!((got - 0.078_48).abs() < 1e-5);
    }

    #[test]
    fn sin_exp_target_is_unit_bounded() {
        let chain = ChainFamily::iid_uniform(16).build(1).unwrap();
        let task = SyntheticTask::new(chain, TargetFunction::SinExp, NoiseModel::gaussian(1.0).unwrap()).unwrap();
        assert!((task.sup_norm() - 1.0).abs() < 1e-15);
    }
}
