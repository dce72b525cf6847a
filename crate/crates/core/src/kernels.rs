//! Representing functions for the modal loss and kernels for the hypothesis space.
//!
//! A representing function `phi` turns mode seeking into a kernel density style
//! criterion: a residual `r` at bandwidth `sigma` contributes `phi(r / sigma)`.
//! Every calibrated kind is symmetric, peaked at zero, Lipschitz and integrates
//! to one. The hypothesis kernels `K` span the sample-dependent space
//! `f = sum_i alpha_i K(x_i, .)`; neither symmetry nor positive definiteness is
//! required of them, although all shipped kinds are symmetric.

use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};
use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use crate::Error;

/// `1 / sqrt(2 pi)`, the peak of the standard normal density.
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Shape of a representing function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhiKind {
    /// Standard normal density.
    Gaussian,
    /// `0.75 (1 - u^2)` on `[-1, 1]`.
    Epanechnikov,
    /// Biweight `15/16 (1 - u^2)^2` on `[-1, 1]`.
    Quadratic,
    /// `1 - |u|` on `[-1, 1]`.
    Triangular,
    /// Unnormalized `exp(-u^2)`. The residual term is `exp(-r^2 / sigma)`
    /// rather than `phi(r / sigma)`, which is the classic correntropy
    /// objective. Not calibrated: it does not integrate to one.
    Correntropy,
}

impl PhiKind {
    pub const ALL: [PhiKind; 5] = [
        PhiKind::Gaussian,
        PhiKind::Epanechnikov,
        PhiKind::Quadratic,
        PhiKind::Triangular,
        PhiKind::Correntropy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PhiKind::Gaussian => "gaussian",
            PhiKind::Epanechnikov => "epanechnikov",
            PhiKind::Quadratic => "quadratic",
            PhiKind::Triangular => "triangular",
            PhiKind::Correntropy => "correntropy",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        PhiKind::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// A representing function together with its frozen constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepresentingFunction {
    kind: PhiKind,
    lipschitz_bound: f64,
    peak_value: f64,
}

impl RepresentingFunction {
    pub fn new(kind: PhiKind) -> Self {
        let (lipschitz_bound, peak_value) = match kind {
            // max |phi'| is attained at |u| = 1
            PhiKind::Gaussian => (INV_SQRT_2PI * (-0.5f64).exp(), INV_SQRT_2PI),
            PhiKind::Epanechnikov => (1.5, 0.75),
            // |phi'(u)| = 15/4 |u| (1 - u^2), maximal at u = 1/sqrt(3)
            PhiKind::Quadratic => (5.0 / (2.0 * 3.0f64.sqrt()), 15.0 / 16.0),
            PhiKind::Triangular => (1.0, 1.0),
            // |d/du exp(-u^2)| = 2|u| exp(-u^2), maximal at |u| = 1/sqrt(2)
            PhiKind::Correntropy => (SQRT_2 * (-0.5f64).exp(), 1.0),
        };
        Self {
            kind,
            lipschitz_bound,
            peak_value,
        }
    }

    pub fn gaussian() -> Self {
        Self::new(PhiKind::Gaussian)
    }

    pub fn kind(&self) -> PhiKind {
        self.kind
    }

    /// Lipschitz constant `L_phi`.
    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz_bound
    }

    /// `phi(0)`, which is also the sup norm.
    pub fn peak_value(&self) -> f64 {
        self.peak_value
    }

    /// Whether the kind is normalized to unit integral.
    pub fn is_calibrated(&self) -> bool {
        self.kind != PhiKind::Correntropy
    }

    /// Half-width of the support, `None` for unbounded support.
    pub fn support_halfwidth(&self) -> Option<f64> {
        match self.kind {
            PhiKind::Gaussian | PhiKind::Correntropy => None,
            _ => Some(1.0),
        }
    }

    /// Closed-form `int u^2 phi(u) du`.
    pub fn second_moment(&self) -> f64 {
        match self.kind {
            PhiKind::Gaussian => 1.0,
            PhiKind::Epanechnikov => 0.2,
            PhiKind::Quadratic => 1.0 / 7.0,
            PhiKind::Triangular => 1.0 / 6.0,
            PhiKind::Correntropy => PI.sqrt() / 2.0,
        }
    }

    /// Evaluates `phi(u)`.
    pub fn eval(&self, u: f64) -> f64 {
        match self.kind {
            PhiKind::Gaussian => INV_SQRT_2PI * (-0.5 * u * u).exp(),
            PhiKind::Epanechnikov => {
                if u.abs() <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
            PhiKind::Quadratic => {
                if u.abs() <= 1.0 {
                    let s = 1.0 - u * u;
                    15.0 / 16.0 * s * s
                } else {
                    0.0
                }
            }
            PhiKind::Triangular => {
                let a = u.abs();
                if a <= 1.0 {
                    1.0 - a
                } else {
                    0.0
                }
            }
            PhiKind::Correntropy => (-u * u).exp(),
        }
    }

    /// Derivative of `phi`. At kinks the symmetric subgradient is returned
    /// (zero at the origin for the triangular kind, the inner one-sided value
    /// at the support edge).
    pub fn derivative(&self, u: f64) -> f64 {
        match self.kind {
            PhiKind::Gaussian => -u * self.eval(u),
            PhiKind::Epanechnikov => {
                if u.abs() < 1.0 {
                    -1.5 * u
                } else {
                    0.0
                }
            }
            PhiKind::Quadratic => {
                if u.abs() < 1.0 {
                    -3.75 * u * (1.0 - u * u)
                } else {
                    0.0
                }
            }
            PhiKind::Triangular => {
                if u == 0.0 || u.abs() >= 1.0 {
                    0.0
                } else {
                    -u.signum()
                }
            }
            PhiKind::Correntropy => -2.0 * u * (-u * u).exp(),
        }
    }

    /// Contribution of one residual to the modal objective before the
    /// `1 / (m sigma)` normalization: `phi(r / sigma)`, or `exp(-r^2 / sigma)`
    /// for the correntropy kind.
    pub fn loss(&self, residual: f64, sigma: f64) -> f64 {
        match self.kind {
            PhiKind::Correntropy => (-residual * residual / sigma).exp(),
            _ => self.eval(residual / sigma),
        }
    }

    /// `d/dr` of [`loss`](Self::loss).
    pub fn loss_derivative(&self, residual: f64, sigma: f64) -> f64 {
        match self.kind {
            PhiKind::Correntropy => {
                -2.0 * residual / sigma * (-residual * residual / sigma).exp()
            }
            _ => self.derivative(residual / sigma) / sigma,
        }
    }

    /// Numeric check of the calibration conditions on a uniform grid.
    pub fn check_calibration(
        &self,
        grid_halfwidth: f64,
        grid_points: usize,
    ) -> Result<CalibrationReport, Error> {
        if !(grid_halfwidth > 0.0) || !grid_halfwidth.is_finite() {
            return Err(Error::InvalidParameter {
                name: "grid_halfwidth",
                reason: "must be a positive finite number",
            });
        }
        if grid_points < 3 {
            return Err(Error::InvalidParameter {
                name: "grid_points",
                reason: "must be at least 3",
            });
        }
        let intervals = grid_points - 1;
        let step = 2.0 * grid_halfwidth / intervals as f64;
        let grid: Vec<f64> = (0..grid_points)
            .map(|k| -grid_halfwidth + k as f64 * step)
            .collect();
        let values: Vec<f64> = grid.iter().map(|&u| self.eval(u)).collect();

        let peak = self.peak_value;
        let mut symmetry_violation = 0.0f64;
        let mut peak_excess = f64::NEG_INFINITY;
        let mut lipschitz_estimate = 0.0f64;
        for (k, (&u, &v)) in grid.iter().zip(&values).enumerate() {
            symmetry_violation = symmetry_violation.max((v - self.eval(-u)).abs());
            peak_excess = peak_excess.max(v - peak);
            if k + 1 < grid_points {
                lipschitz_estimate = lipschitz_estimate.max((values[k + 1] - v).abs() / step);
            }
        }
        let moments: Vec<f64> = grid.iter().zip(&values).map(|(u, v)| u * u * v).collect();
        let integral = integrate_uniform(&values, step);
        let second_moment = integrate_uniform(&moments, step);

        Ok(CalibrationReport {
            kind: self.kind,
            symmetry_violation,
            peak_excess,
            integral,
            integral_error: (integral - 1.0).abs(),
            second_moment,
            lipschitz_estimate,
            lipschitz_bound: self.lipschitz_bound,
        })
    }
}

/// Composite Simpson's rule when the interval count is even, trapezoid otherwise.
pub(crate) fn integrate_uniform(values: &[f64], step: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let intervals = n - 1;
    if intervals.is_multiple_of(2) {
        let mut odd = 0.0;
        let mut even = 0.0;
        for (k, v) in values.iter().enumerate().take(n - 1).skip(1) {
            if k % 2 == 1 {
                odd += v;
            } else {
                even += v;
            }
        }
        step / 3.0 * (values[0] + values[n - 1] + 4.0 * odd + 2.0 * even)
    } else {
        let inner: f64 = values[1..n - 1].iter().sum();
        step * (0.5 * (values[0] + values[n - 1]) + inner)
    }
}

/// Outcome of [`RepresentingFunction::check_calibration`].
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub kind: PhiKind,
    /// `max |phi(u) - phi(-u)|` over the grid.
    pub symmetry_violation: f64,
    /// `max phi(u) - phi(0)`; must not be positive.
    pub peak_excess: f64,
    pub integral: f64,
    /// `|int phi - 1|`.
    pub integral_error: f64,
    /// `int u^2 phi(u) du`.
    pub second_moment: f64,
    /// Largest finite-difference slope on the grid.
    pub lipschitz_estimate: f64,
    pub lipschitz_bound: f64,
}

impl CalibrationReport {
    /// All calibration conditions hold at the given integral tolerance.
    pub fn passes(&self, integral_tol: f64) -> bool {
        self.symmetry_violation <= 1e-14
            && self.peak_excess <= 0.0
            && self.integral_error < integral_tol
            && self.second_moment.is_finite()
            && self.lipschitz_estimate <= self.lipschitz_bound * 1.01
    }
}

/// Anything usable as the `K` of the hypothesis space.
pub trait KernelFunction {
    fn eval(&self, x: &[f64], z: &[f64]) -> f64;
}

/// Built-in hypothesis kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HypothesisKernel {
    /// `exp(-|x - z|^2 / h^2)`.
    GaussianRbf { bandwidth: f64 },
    /// `exp(-|x - z| / h)`.
    Laplacian { bandwidth: f64 },
    /// `(x . z + offset)^degree`.
    Polynomial { degree: u32, offset: f64 },
}

impl HypothesisKernel {
    pub fn gaussian_rbf(bandwidth: f64) -> Result<Self, Error> {
        positive("bandwidth", bandwidth)?;
        Ok(HypothesisKernel::GaussianRbf { bandwidth })
    }

    pub fn laplacian(bandwidth: f64) -> Result<Self, Error> {
        positive("bandwidth", bandwidth)?;
        Ok(HypothesisKernel::Laplacian { bandwidth })
    }

    pub fn polynomial(degree: u32, offset: f64) -> Result<Self, Error> {
        if degree == 0 {
            return Err(Error::InvalidParameter {
                name: "degree",
                reason: "must be at least 1",
            });
        }
        if !(offset >= 0.0) || !offset.is_finite() {
            return Err(Error::InvalidParameter {
                name: "offset",
                reason: "must be a non-negative finite number",
            });
        }
        Ok(HypothesisKernel::Polynomial { degree, offset })
    }

    pub fn name(&self) -> &'static str {
        match self {
            HypothesisKernel::GaussianRbf { .. } => "gaussian-rbf",
            HypothesisKernel::Laplacian { .. } => "laplacian",
            HypothesisKernel::Polynomial { .. } => "polynomial",
        }
    }

    pub fn is_symmetric(&self) -> bool {
        true
    }
}

impl KernelFunction for HypothesisKernel {
    fn eval(&self, x: &[f64], z: &[f64]) -> f64 {
        match *self {
            HypothesisKernel::GaussianRbf { bandwidth } => {
                (-squared_distance(x, z) / (bandwidth * bandwidth)).exp()
            }
            HypothesisKernel::Laplacian { bandwidth } => {
                (-squared_distance(x, z).sqrt() / bandwidth).exp()
            }
            HypothesisKernel::Polynomial { degree, offset } => {
                let dot: f64 = x.iter().zip(z).map(|(a, b)| a * b).sum();
                (dot + offset).powi(degree as i32)
            }
        }
    }
}

fn positive(name: &'static str, value: f64) -> Result<(), Error> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: "must be a positive finite number",
        })
    }
}

fn squared_distance(x: &[f64], z: &[f64]) -> f64 {
    x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Common dimension of a set of covariate vectors.
pub fn input_dimension(inputs: &[Vec<f64>]) -> Result<usize, Error> {
    let d = inputs.first().map_or(0, Vec::len);
    if d == 0 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: 0,
        });
    }
    for x in inputs {
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: x.len(),
            });
        }
    }
    Ok(d)
}

/// Gram matrix with entry `(j, i) = K(x_j, x_i)`, so column `i` is the vector
/// `K_i` that multiplies the coefficients when predicting at `x_i`.
pub fn gram_matrix<K: KernelFunction + ?Sized>(
    kernel: &K,
    inputs: &[Vec<f64>],
) -> Result<DMatrix<f64>, Error> {
    input_dimension(inputs)?;
    let m = inputs.len();
    Ok(DMatrix::from_fn(m, m, |j, i| kernel.eval(&inputs[j], &inputs[i])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn epanechnikov_peak() {
        assert_eq!(RepresentingFunction::new(PhiKind::Epanechnikov).eval(0.0), 0.75);
    }

    #[test]
    fn gaussian_peak_and_symmetry() {
        let phi = RepresentingFunction::gaussian();
        assert!((phi.eval(0.0) - 0.398_942_280_4).abs() < 1e-10);
        assert_eq!(phi.eval(1.3), phi.eval(-1.3));
    }

    #[test]
    fn compact_kinds_vanish_outside_support() {
        for kind in [PhiKind::Epanechnikov, PhiKind::Quadratic, PhiKind::Triangular] {
            let phi = RepresentingFunction::new(kind);
            assert_eq!(phi.eval(1.0 + 1e-12), 0.0);
            assert_eq!(phi.eval(-5.0), 0.0);
        }
    }

    #[test]
    fn calibration_examples() {
        let epa = RepresentingFunction::new(PhiKind::Epanechnikov)
            .check_calibration(2.0, 10001)
            .unwrap();
        assert!(epa.integral_error < 1e-8, "{epa:?}");
        assert!((epa.second_moment - 0.2).abs() < 1e-8);

        let gauss = RepresentingFunction::gaussian()
            .check_calibration(10.0, 100_001)
            .unwrap();
        assert!((gauss.second_moment - 1.0).abs() < 1e-4);

        let tri = RepresentingFunction::new(PhiKind::Triangular);
        assert_eq!(tri.peak_value(), 1.0);
        let report = tri.check_calibration(2.0, 10001).unwrap();
        assert!(report.integral_error < 1e-8);
    }

    #[test]
    fn calibration_rejects_bad_grid() {
        let phi = RepresentingFunction::gaussian();
        assert!(phi.check_calibration(0.0, 1000).is_err());
        assert!(phi.check_calibration(-1.0, 1000).is_err());
        assert!(phi.check_calibration(1.0, 0).is_err());
    }

    #[test]
    fn correntropy_is_not_calibrated() {
        let phi = RepresentingFunction::new(PhiKind::Correntropy);
        let report = phi.check_calibration(10.0, 20001).unwrap();
        assert!(!report.passes(1e-6));
        assert!((report.integral - PI.sqrt()).abs() < 1e-8);
        assert!((phi.loss(0.5, 0.25) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for kind in PhiKind::ALL {
            let phi = RepresentingFunction::new(kind);
            for &u in &[-0.7, -0.3, 0.2, 0.55, 0.9] {
                let h = 1e-6;
                let fd = (phi.eval(u + h) - phi.eval(u - h)) / (2.0 * h);
                assert!((fd - phi.derivative(u)).abs() < 1e-6, "{kind:?} at {u}");
            }
        }
    }

    #[test]
    fn gram_examples() {
        let k = HypothesisKernel::gaussian_rbf(1.0).unwrap();
        let single = gram_matrix(&k, &[vec![0.3, 0.1]]).unwrap();
        assert_eq!(single[(0, 0)], 1.0);

        let twin = gram_matrix(&k, &[vec![0.5], vec![0.5]]).unwrap();
        assert!(twin.iter().all(|&v| v == 1.0));

        let pair = gram_matrix(&k, &[vec![0.0], vec![1.0]]).unwrap();
        assert!((pair[(0, 1)] - 0.367_879_441_171_442_3).abs() < 1e-15);
        assert_eq!(pair[(0, 1)], pair[(1, 0)]);
    }

    #[test]
    fn gram_rejects_mixed_dimensions() {
        let k = HypothesisKernel::gaussian_rbf(1.0).unwrap();
        let err = gram_matrix(&k, &[vec![0.0], vec![1.0, 2.0]]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 1, found: 2 }));
        assert!(gram_matrix(&k, &[]).is_err());
    }

    #[test]
    fn kernel_constructors_validate() {
        assert!(HypothesisKernel::gaussian_rbf(0.0).is_err());
        assert!(HypothesisKernel::laplacian(f64::NAN).is_err());
        assert!(HypothesisKernel::polynomial(0, 1.0).is_err());
        let p = HypothesisKernel::polynomial(2, 1.0).unwrap();
        assert_eq!(p.eval(&[1.0, 2.0], &[0.5, 0.25]), 4.0);
    }
}
