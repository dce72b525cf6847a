use modalmr_core::markov::{ChainFamily, Start, TransitionKernel};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn kernel(rows: &[Vec<f64>]) -> TransitionKernel {
    let n = rows.len();
    let matrix = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    let embedding = (0..n).map(|i| vec![i as f64 / n.max(2) as f64]).collect();
    TransitionKernel::new(matrix, embedding).unwrap()
}

/// Row-normalized positive weights.
fn stochastic(weights: &[Vec<f64>]) -> Vec<Vec<f64>> {
    weights
        .iter()
        .map(|row| {
            let total: f64 = row.iter().sum();
            row.iter().map(|w| w / total).collect()
        })
        .collect()
}

/// Symmetric weights give a reversible chain with `pi` proportional to row sums.
fn reversible(weights: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = weights.len();
    let sym: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| weights[i][j] + weights[j][i]).collect())
        .collect();
    stochastic(&sym)
}

fn weights(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<Vec<f64>>> {
    n.prop_flat_map(|n| prop::collection::vec(prop::collection::vec(0.05..1.0f64, n), n))
}

#[test]
fn three_state_gap_matches_characteristic_polynomial() {
    // The non-unit eigenvalues of a 3x3 stochastic matrix solve
    // t^2 - (tr P - 1) t + det P = 0.
    let cases = [
        vec![vec![0.5, 0.3, 0.2], vec![0.1, 0.6, 0.3], vec![0.3, 0.3, 0.4]],
        vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.5, 0.0, 0.5]],
        vec![vec![0.9, 0.05, 0.05], vec![0.2, 0.7, 0.1], vec![0.0, 0.4, 0.6]],
    ];
    for rows in cases {
        let p = DMatrix::from_fn(3, 3, |i, j| rows[i][j]);
        let b: f64 = p.trace() - 1.0;
        let c: f64 = p.determinant();
        let disc: f64 = b * b - 4.0 * c;
        let largest = if disc >= 0.0 {
            ((b + disc.sqrt()) / 2.0).abs().max(((b - disc.sqrt()) / 2.0).abs())
        } else {
            // complex pair: |t|^2 = c
            c.sqrt()
        };
        let k = kernel(&rows);
        assert!((k.absolute_spectral_gap() - (1.0 - largest)).abs() < 1e-10);
    }
}

#[test]
fn two_state_closed_forms() {
    for (p, q) in [(0.3, 0.2), (0.9, 0.05), (0.5, 0.5), (1.0, 1.0)] {
        let k = ChainFamily::TwoState { p, q }.build(1).unwrap();
        let pi = k.stationary_distribution().unwrap();
        assert!((pi[0] - q / (p + q)).abs() < 1e-12);
        let lambda2: f64 = 1.0 - p - q;
        assert!((k.absolute_spectral_gap() - (1.0 - lambda2.abs())).abs() < 1e-10);
        assert!((k.spectral_gap_reversible().unwrap() - (p + q)).abs() < 1e-10);
    }
}

#[test]
fn lazy_walk_sampling_matches_transition_frequencies() {
    let k = ChainFamily::LazyRandomWalk { n: 4, laziness: 0.5 }.build(1).unwrap();
    let path = k.sample(200_000, 77, Start::State(0)).unwrap();
    let mut counts = [[0usize; 4]; 4];
    for w in path.windows(2) {
        counts[w[0]][w[1]] += 1;
    }
    for (i, row) in counts.iter().enumerate() {
        let total: usize = row.iter().sum();
        for (j, &count) in row.iter().enumerate() {
            let freq = count as f64 / total as f64;
            assert!((freq - k.matrix()[(i, j)]).abs() < 0.01, "{i}->{j}: {freq}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stationary_law_is_invariant(w in weights(2..=7)) {
        let k = kernel(&stochastic(&w));
        let pi = k.stationary_distribution().unwrap();
        prop_assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let moved = k.left_multiply(&pi);
        for (a, b) in moved.iter().zip(&pi) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        let gap = k.absolute_spectral_gap();
        prop_assert!((0.0..=1.0).contains(&gap));
    }

    #[test]
    fn symmetric_weights_are_reversible(w in weights(2..=7)) {
        let k = kernel(&reversible(&w));
        let pi = k.stationary_distribution().unwrap();
        prop_assert!(k.is_reversible(&pi));
        let gamma = k.spectral_gap_reversible().unwrap();
        prop_assert!(gamma >= k.absolute_spectral_gap() - 1e-12);
    }

    #[test]
    fn reversible_pseudo_gap_is_the_one_step_term(w in weights(2..=6)) {
        // For reversible P the k-th term is (1 - (1 - g)^{2k}) / k with g the
        // absolute gap, which is largest at k = 1.
        let k = kernel(&reversible(&w));
        let g = k.absolute_spectral_gap();
        let expected = 2.0 * g - g * g;
        for k_max in [1, 3, 8] {
            prop_assert!((k.pseudo_spectral_gap(k_max).unwrap() - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn pseudo_gap_grows_with_k_max(w in weights(2..=6)) {
        let k = kernel(&stochastic(&w));
        let mut last = 0.0;
        for k_max in 1..=6 {
            let v = k.pseudo_spectral_gap(k_max).unwrap();
            prop_assert!(v >= last - 1e-14);
            last = v;
        }
    }

    #[test]
    fn tv_distance_never_increases(w in weights(2..=6), start in 0usize..2) {
        let k = kernel(&stochastic(&w));
        let curve = k.tv_mixing_curve(start, 20).unwrap();
        for pair in curve.windows(2) {
            prop_assert!(pair[1].1 <= pair[0].1 + 1e-12);
        }
    }
}
