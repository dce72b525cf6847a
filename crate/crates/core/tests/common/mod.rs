#![allow(dead_code)]

pub mod grid_oracle;

use modalmr_core::solver::{Penalty, RmrConfig};
use nalgebra::DMatrix;
use rand::Rng;

use grid_oracle::Instance;

/// Random RMR problem with distinct inputs on `[0, 1]`, a Gaussian RBF Gram
/// matrix written out by hand, and Gaussian phi.
pub fn random_instance<R: Rng>(rng: &mut R, m: usize) -> (Instance, DMatrix<f64>, RmrConfig) {
    let x: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0)).collect();
    let h: f64 = rng.gen_range(0.2..1.0);
    let gram: Vec<Vec<f64>> = (0..m)
        .map(|j| (0..m).map(|i| (-(x[j] - x[i]).powi(2) / (h * h)).exp()).collect())
        .collect();
    let y: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.5..1.5)).collect();
    let sigma = rng.gen_range(0.3..1.5);
    let lambda = rng.gen_range(0.01..0.3);
    let l1 = rng.gen_bool(0.5);
    let matrix = DMatrix::from_fn(m, m, |j, i| gram[j][i]);
    let config = RmrConfig {
        sigma,
        lambda,
        penalty: if l1 { Penalty::L1 } else { Penalty::L2 },
        tol: 1e-12,
        max_hq_iters: 2000,
        inner_max_iters: 500,
        ..RmrConfig::default()
    };
    (
        Instance {
            gram,
            y,
            sigma,
            lambda,
            l1,
        },
        matrix,
        config,
    )
}
