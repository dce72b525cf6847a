//! Exact maximum of the RMR objective (Gaussian phi) over the grid
//! `{-3, -2.99, ..., 3}^m`, by branch and bound over boxes of grid points.
//!
//! Everything here is written against the objective's definition and does not
//! call the library solvers.

use std::collections::BinaryHeap;

pub const GRID_LO: f64 = -3.0;
pub const GRID_STEP: f64 = 0.01;
pub const GRID_POINTS: i64 = 601;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// `max_u phi''(u)` for the standard normal density, attained at `u^2 = 3`.
const PHI2_SUP: f64 = 2.0 * 0.223_130_160_148_429_83 * INV_SQRT_2PI;

pub struct Instance {
    /// `gram[j][i] = K(x_j, x_i)`.
    pub gram: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub sigma: f64,
    pub lambda: f64,
    pub l1: bool,
}

fn phi(u: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * u * u).exp()
}

impl Instance {
    fn m(&self) -> usize {
        self.y.len()
    }

    fn fitted(&self, i: usize, alpha: &[f64]) -> f64 {
        (0..self.m()).map(|j| self.gram[j][i] * alpha[j]).sum()
    }

    fn data(&self, alpha: &[f64]) -> f64 {
        let m = self.m() as f64;
        (0..self.m())
            .map(|i| phi((self.y[i] - self.fitted(i, alpha)) / self.sigma))
            .sum::<f64>()
            / (m * self.sigma)
    }

    fn data_gradient(&self, alpha: &[f64]) -> Vec<f64> {
        let m = self.m() as f64;
        let s = self.sigma;
        let dphi: Vec<f64> = (0..self.m())
            .map(|i| {
                let u = (self.y[i] - self.fitted(i, alpha)) / s;
                -u * phi(u)
            })
            .collect();
        (0..self.m())
            .map(|j| -(0..self.m()).map(|i| dphi[i] * self.gram[j][i]).sum::<f64>() / (m * s * s))
            .collect()
    }

    fn penalty_of(&self, v: f64) -> f64 {
        if self.l1 {
            v.abs()
        } else {
            v * v
        }
    }

    pub fn objective(&self, alpha: &[f64]) -> f64 {
        self.data(alpha) - self.lambda * alpha.iter().map(|&a| self.penalty_of(a)).sum::<f64>()
    }

    /// Upper bound for the data term on the box `center +- half`, from
    /// `f(c + d) <= f(c) + g.d + 0.5 H ||d||^2` with `H` a bound on the
    /// largest Hessian eigenvalue.
    fn data_upper(&self, center: &[f64], half: &[f64]) -> f64 {
        let m = self.m() as f64;
        let col_sq: f64 = (0..self.m())
            .map(|i| (0..self.m()).map(|j| self.gram[j][i].powi(2)).sum::<f64>())
            .sum();
        let curvature = PHI2_SUP * col_sq / (m * self.sigma.powi(3));
        let g = self.data_gradient(center);
        let linear: f64 = g.iter().zip(half).map(|(g, h)| g.abs() * h).sum();
        let quad: f64 = half.iter().map(|h| h * h).sum();
        self.data(center) + linear + 0.5 * curvature * quad
    }
}

fn value_at(k: i64) -> f64 {
    GRID_LO + k as f64 * GRID_STEP
}

#[derive(PartialEq)]
struct Node {
    bound: f64,
    lo: Vec<i64>,
    hi: Vec<i64>,
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.bound.total_cmp(&other.bound)
    }
}

/// `(max over the grid, maximizing grid point)`.
pub fn grid_maximum(inst: &Instance) -> (f64, Vec<f64>) {
    let m = inst.m();
    let bound_of = |lo: &[i64], hi: &[i64]| -> (f64, Vec<f64>) {
        let mid: Vec<i64> = lo.iter().zip(hi).map(|(a, b)| (a + b) / 2).collect();
        let center: Vec<f64> = mid.iter().map(|&k| value_at(k)).collect();
        let half: Vec<f64> = (0..m)
            .map(|j| (mid[j] - lo[j]).max(hi[j] - mid[j]) as f64 * GRID_STEP)
            .collect();
        // smallest penalty anywhere in the box, per coordinate
        let penalty: f64 = (0..m)
            .map(|j| {
                let (a, b) = (value_at(lo[j]), value_at(hi[j]));
                let nearest = if a <= 0.0 && b >= 0.0 { 0.0 } else { a.abs().min(b.abs()) };
                inst.penalty_of(nearest)
            })
            .sum();
        (inst.data_upper(&center, &half) - inst.lambda * penalty, center)
    };

    let mut best = f64::NEG_INFINITY;
    let mut best_point = vec![0.0; m];
    let mut heap = BinaryHeap::new();
    let root_lo = vec![0; m];
    let root_hi = vec![GRID_POINTS - 1; m];
    let (bound, _) = bound_of(&root_lo, &root_hi);
    heap.push(Node {
        bound,
        lo: root_lo,
        hi: root_hi,
    });
    while let Some(node) = heap.pop() {
        if node.bound <= best {
            break;
        }
        let (_, center) = bound_of(&node.lo, &node.hi);
        let value = inst.objective(&center);
        if value > best {
            best = value;
            best_point = center;
        }
        // split the widest side
        let (axis, width) = (0..m)
            .map(|j| (j, node.hi[j] - node.lo[j]))
            .max_by_key(|&(_, w)| w)
            .unwrap();
        if width == 0 {
            continue;
        }
        let cut = node.lo[axis] + width / 2;
        for (lo_a, hi_a) in [(node.lo[axis], cut), (cut + 1, node.hi[axis])] {
            let mut lo = node.lo.clone();
            let mut hi = node.hi.clone();
            lo[axis] = lo_a;
            hi[axis] = hi_a;
            let (bound, _) = bound_of(&lo, &hi);
            if bound > best {
                heap.push(Node { bound, lo, hi });
            }
        }
    }
    (best, best_point)
}

/// Exhaustive scan, for cross-checking the branch and bound on coarse grids.
pub fn scan_maximum(inst: &Instance, points: i64) -> f64 {
    let m = inst.m();
    let total = points.pow(m as u32);
    let step = (GRID_POINTS - 1) / (points - 1);
    (0..total)
        .map(|mut code| {
            let alpha: Vec<f64> = (0..m)
                .map(|_| {
                    let k = code % points;
                    code /= points;
                    value_at(k * step)
                })
                .collect();
            inst.objective(&alpha)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}
