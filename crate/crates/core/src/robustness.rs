//! Finite-sample breakdown of the RMR coefficients.
//!
//! For a fitted model the quantity
//!
//! ```text
//! N = phi(0)^{-1} sum_i phi((y_i - K_i^T alpha) / sigma) - lambda phi(0)^{-1} m sigma ||alpha||_q^q
//! ```
//!
//! counts, roughly, how many training points the fit explains. Adding up to
//! about `N` identical outliers cannot carry the coefficients away, and the
//! breakdown point is `n* / (m + n*)` with `n*` in `[floor(N), floor(N) + 1]`.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::harness::generate_dataset;
use crate::kernels::{gram_matrix, HypothesisKernel, RepresentingFunction};
use crate::risk::SyntheticTask;
use crate::solver::{self, RmrConfig, RmrModel};
use crate::Error;

/// One refit on contaminated data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContaminationPoint {
    pub n_outliers: usize,
    pub magnitude: f64,
    /// `||alpha||_2` of the refit on the `m + n_outliers` points.
    pub coef_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BreakdownReport {
    pub n_value: f64,
    pub n_star_low: usize,
    pub n_star_high: usize,
    pub breakdown_fraction: f64,
    /// Clean sample size the fraction refers to.
    pub m: usize,
    pub clean_norm: f64,
    pub curve: Vec<ContaminationPoint>,
}

/// `N` for `model` on its own training responses `y`.
pub fn breakdown_n(model: &RmrModel, y: &[f64], phi: &RepresentingFunction) -> Result<f64, Error> {
    let m = model.train_inputs().len();
    if y.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: y.len(),
        });
    }
    let fitted = model.predict_many(model.train_inputs())?;
    let config = model.config();
    Ok(breakdown_n_from_residuals(
        y.iter().zip(&fitted).map(|(a, b)| a - b),
        model.penalty_norm(),
        phi,
        config,
    ))
}

fn breakdown_n_from_residuals(
    residuals: impl Iterator<Item = f64>,
    penalty_norm: f64,
    phi: &RepresentingFunction,
    config: &RmrConfig,
) -> f64 {
    let sigma = config.sigma;
    let peak = phi.loss(0.0, sigma);
    let mut m = 0usize;
    let mut data = 0.0;
    for r in residuals {
        data += phi.loss(r, sigma);
        m += 1;
    }
    data / peak - config.lambda * m as f64 * sigma * penalty_norm / peak
}

/// `(floor(N), floor(N) + 1, n_high / (m + n_high))`, both ends clamped to `[1, m]`.
pub fn breakdown_bracket(n_value: f64, m: usize) -> (usize, usize, f64) {
    let m = m.max(1);
    let floor = if n_value.is_finite() && n_value > 0.0 {
        n_value.floor().min(m as f64) as usize
    } else {
        0
    };
    let low = floor.clamp(1, m);
    let high = (floor + 1).clamp(1, m);
    (low, high, high as f64 / (m + high) as f64)
}

/// Fits on a clean sample of size `m`, then for every `(n, magnitude)` adds
/// `n` copies of `(x_1, magnitude)` (the first clean covariate) and refits.
/// Every fit uses [`solver::fit_multistart`].
#[allow(clippy::too_many_arguments)]
pub fn contamination_experiment(
    task: &SyntheticTask,
    m: usize,
    n_outliers: &[usize],
    magnitudes: &[f64],
    kernel: HypothesisKernel,
    phi: RepresentingFunction,
    config: RmrConfig,
    seed: u64,
) -> Result<BreakdownReport, Error> {
    if m < 10 {
        return Err(Error::InvalidParameter {
            name: "m",
            reason: "contamination runs need at least 10 clean points",
        });
    }
    if magnitudes.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "magnitudes",
            reason: "outlier magnitudes must be finite",
        });
    }
    config.validate()?;
    let data = generate_dataset(task, m, seed)?;
    let gram = gram_matrix(&kernel, &data.inputs)?;
    let clean = solver::fit_multistart(&gram, &data.y, &phi, &config)?.alpha;
    let model = RmrModel::from_parts(clean, data.inputs.clone(), kernel, phi, config, Vec::new())?;
    let n_value = breakdown_n(&model, &data.y, &phi)?;
    let (n_star_low, n_star_high, breakdown_fraction) = breakdown_bracket(n_value, m);
    let clean_norm = model.coef_norm();

    let outlier_x = data.inputs[0].clone();
    let mut curve = Vec::with_capacity(n_outliers.len() * magnitudes.len());
    for &n in n_outliers {
        for &magnitude in magnitudes {
            let coef_norm = if n == 0 {
                clean_norm
            } else {
                let mut inputs = data.inputs.clone();
                let mut y = data.y.clone();
                inputs.extend(core::iter::repeat_n(outlier_x.clone(), n));
                y.extend(core::iter::repeat_n(magnitude, n));
                let gram = gram_matrix(&kernel, &inputs)?;
                let alpha = solver::fit_multistart(&gram, &y, &phi, &config)?.alpha;
                alpha.iter().map(|a| a * a).sum::<f64>().sqrt()
            };
            curve.push(ContaminationPoint {
                n_outliers: n,
                magnitude,
                coef_norm,
            });
        }
    }
    Ok(BreakdownReport {
        n_value,
        n_star_low,
        n_star_high,
        breakdown_fraction,
        m,
        clean_norm,
        curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::PhiKind;
    use crate::solver::Penalty;
    use alloc::vec;

    fn model_with(alpha: Vec<f64>, inputs: Vec<Vec<f64>>, sigma: f64, lambda: f64, phi: RepresentingFunction) -> RmrModel {
        let kernel = HypothesisKernel::gaussian_rbf(1.0).unwrap();
        let config = RmrConfig::new(sigma, lambda, Penalty::L2).unwrap();
        RmrModel::from_parts(alpha, inputs, kernel, phi, config, Vec::new()).unwrap()
    }

    #[test]
    fn hand_computed_n() {
        // single far-apart inputs make the Gram matrix the identity
        let phi = RepresentingFunction::gaussian();
        let model = model_with(vec![1.0, 0.0], vec![vec![0.0], vec![100.0]], 1.0, 0.1, phi);
        let n = breakdown_n(&model, &[1.0, 1.0], &phi).unwrap();
        let expected = (0.398_942_280_401_432_7 + 0.241_970_724_519_143_37) / 0.398_942_280_401_432_7
            - 0.1 * 2.0 * 1.0 * 1.0 / 0.398_942_280_401_432_7;
        assert!((n - expected).abs() < 1e-12);
        assert!((n - 1.105_16).abs() < 1e-4);
    }

    #[test]
    fn interpolation_and_empty_support() {
        let phi = RepresentingFunction::gaussian();
        let model = model_with(vec![0.5, -2.0, 3.0], vec![vec![0.0], vec![50.0], vec![100.0]], 0.3, 0.0, phi);
        assert_eq!(breakdown_n(&model, &[0.5, -2.0, 3.0], &phi).unwrap(), 3.0);

        let epa = RepresentingFunction::new(PhiKind::Epanechnikov);
        let model = model_with(vec![0.0, 0.0], vec![vec![0.0], vec![50.0]], 0.5, 0.0, epa);
        assert_eq!(breakdown_n(&model, &[4.0, -4.0], &epa).unwrap(), 0.0);
        assert!(breakdown_n(&model, &[1.0], &epa).is_err());
    }

    #[test]
    fn bracket_examples() {
        assert_eq!(breakdown_bracket(10.0, 10), (10, 10, 0.5));
        let (lo, hi, frac) = breakdown_bracket(0.3, 100);
        assert_eq!((lo, hi), (1, 1));
        assert!((frac - 1.0 / 101.0).abs() < 1e-15);
        assert_eq!(breakdown_bracket(4.0, 10).0, 4);
        assert_eq!(breakdown_bracket(4.0, 10).1, 5);
        assert_eq!(breakdown_bracket(9.999_999, 10), (9, 10, 0.5));
    }

    #[test]
    fn n_ignores_sample_order() {
        let phi = RepresentingFunction::gaussian();
        let inputs = vec![vec![0.0], vec![0.4], vec![1.1]];
        let a = model_with(vec![0.2, -0.1, 0.7], inputs.clone(), 0.5, 0.05, phi);
        let permuted_inputs = vec![inputs[2].clone(), inputs[0].clone(), inputs[1].clone()];
        let b = model_with(vec![0.7, 0.2, -0.1], permuted_inputs, 0.5, 0.05, phi);
        let na = breakdown_n(&a, &[0.3, 0.1, 0.9], &phi).unwrap();
        let nb = breakdown_n(&b, &[0.9, 0.3, 0.1], &phi).unwrap();
        assert!((na - nb).abs() < 1e-12);
    }
}
