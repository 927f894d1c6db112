//! Benchmark models: a 1D piecewise-Gaussian, a 2D Gaussian with
//! tractable ground truth, and an MA(2) time series summarised by its
//! lag-1/lag-2 autocovariances.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::model::{ModelSpec, Prior};

/// A model together with optional ground-truth information.
#[derive(Clone)]
pub struct ExampleModel {
    pub spec: ModelSpec,
    /// Unnormalised true posterior density, when tractable.
    pub ground_truth_unnorm: Option<Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>>,
    /// Parameter vector that generated the observed data, when synthetic.
    pub generating_theta: Option<Vec<f64>>,
    /// Seed that generated the observed data (0 when the observation is
    /// a fixed constant rather than a simulator draw).
    pub data_seed: u64,
}

fn standard_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Offset that makes the 1D mean function continuous at |theta| = 0.5:
/// |0.5| - c = 0.5^4.
pub const MEAN_SHIFT_1D: f64 = 0.4375;

/// Mean function of the 1D example: theta^4 inside [-0.5, 0.5],
/// |theta| - c outside.
pub fn mean_1d(theta: f64) -> f64 {
    if theta.abs() <= 0.5 {
        theta.powi(4)
    } else {
        theta.abs() - MEAN_SHIFT_1D
    }
}

/// One-dimensional example: uniform prior on [-2.5, 2.5], unit-variance
/// Gaussian likelihood around `mean_1d`, observation 0.
pub fn example_1d() -> ExampleModel {
    let bounds = vec![(-2.5, 2.5)];
    let prior = Prior::uniform_box(&bounds);
    let gt_prior = prior.clone();
    let spec = ModelSpec {
        prior,
        simulator: Arc::new(|theta: &[f64], seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let noise = Normal::new(0.0, 1.0).expect("unit normal").sample(&mut rng);
            Ok(vec![mean_1d(theta[0]) + noise])
        }),
        summary: Arc::new(|y: &[f64]| y.to_vec()),
        distance: Arc::new(|a: &[f64], b: &[f64]| (a[0] - b[0]).abs()),
        observed: vec![0.0],
        bounds,
    };
    ExampleModel {
        spec,
        ground_truth_unnorm: Some(Arc::new(move |theta: &[f64]| {
            gt_prior.pdf(theta) * standard_normal_pdf(mean_1d(theta[0]))
        })),
        generating_theta: None,
        data_seed: 0,
    }
}

/// Two-dimensional Gaussian example: uniform prior on [-2.5, 2.5]^2,
/// simulator theta + N(0, I), observation (-0.5, 0.5).
pub fn example_2d() -> ExampleModel {
    let bounds = vec![(-2.5, 2.5), (-2.5, 2.5)];
    let prior = Prior::uniform_box(&bounds);
    let gt_prior = prior.clone();
    let observed = vec![-0.5, 0.5];
    let gt_observed = observed.clone();
    let spec = ModelSpec {
        prior,
        simulator: Arc::new(|theta: &[f64], seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal = Normal::new(0.0, 1.0).expect("unit normal");
            Ok(theta.iter().map(|t| t + normal.sample(&mut rng)).collect())
        }),
        summary: Arc::new(|y: &[f64]| y.to_vec()),
        distance: Arc::new(|a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        }),
        observed,
        bounds,
    };
    ExampleModel {
        spec,
        ground_truth_unnorm: Some(Arc::new(move |theta: &[f64]| {
            gt_prior.pdf(theta)
                * standard_normal_pdf(gt_observed[0] - theta[0])
                * standard_normal_pdf(gt_observed[1] - theta[1])
        })),
        generating_theta: None,
        data_seed: 0,
    }
}

/// Series length of the MA(2) example.
pub const MA2_T: usize = 100;

/// Parameters that generated the MA(2) observation.
pub const MA2_GENERATING_THETA: [f64; 2] = [0.6, 0.2];

/// Seed of the recorded MA(2) observation; fixed so that every
/// experiment shares one observed series.
pub const MA2_DATA_SEED: u64 = 21;

/// MA(2) recursion y_t = w_t + theta_1 w_{t-1} + theta_2 w_{t-2}.
///
/// `noise` holds (w_{-1}, w_0, w_1, ..., w_T); the output has length
/// `noise.len() - 2`.
pub fn ma2_series(theta: &[f64], noise: &[f64]) -> Vec<f64> {
    let t_len = noise.len() - 2;
    (0..t_len)
        .map(|i| noise[i + 2] + theta[0] * noise[i + 1] + theta[1] * noise[i])
        .collect()
}

/// Lag-1 and lag-2 autocovariance summaries of a series.
pub fn ma2_summaries(y: &[f64]) -> Vec<f64> {
    let t_len = y.len();
    let s1: f64 = (1..t_len).map(|i| y[i] * y[i - 1]).sum::<f64>() / (t_len - 1) as f64;
    let s2: f64 = (2..t_len).map(|i| y[i] * y[i - 2]).sum::<f64>() / (t_len - 2) as f64;
    vec![s1, s2]
}

fn ma2_simulate(theta: &[f64], seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    // presample w_{-1}, w_0 come first from the same stream
    let noise: Vec<f64> = (0..MA2_T + 2).map(|_| normal.sample(&mut rng)).collect();
    ma2_series(theta, &noise)
}

/// MA(2) example with the triangular identifiability prior
/// p(theta_1) = U(-2, 2), p(theta_2 | theta_1) = U(theta_1 - 1, theta_1 + 1).
pub fn example_ma2() -> ExampleModel {
    use rand::Rng;
    // optimiser/search box restricted to the MA(2) identifiability band
    // |theta_2| <= 1; the prior support is wider but the posterior mass
    // concentrates well inside
    let bounds = vec![(-2.0, 2.0), (-1.0, 1.0)];
    let prior = Prior::new(
        2,
        |rng: &mut ChaCha8Rng| {
            let t1 = rng.random_range(-2.0..2.0);
            let t2 = rng.random_range(t1 - 1.0..t1 + 1.0);
            vec![t1, t2]
        },
        |theta: &[f64]| {
            let (t1, t2) = (theta[0], theta[1]);
            if (-2.0..=2.0).contains(&t1) && t2 >= t1 - 1.0 && t2 <= t1 + 1.0 {
                1.0 / 8.0
            } else {
                0.0
            }
        },
    );
    let observed = ma2_simulate(&MA2_GENERATING_THETA, MA2_DATA_SEED);
    let spec = ModelSpec {
        prior,
        simulator: Arc::new(|theta: &[f64], seed: u64| Ok(ma2_simulate(theta, seed))),
        summary: Arc::new(|y: &[f64]| ma2_summaries(y)),
        distance: Arc::new(|a: &[f64], b: &[f64]| {
            a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
        }),
        observed,
        bounds,
    };
    ExampleModel {
        spec,
        ground_truth_unnorm: None,
        generating_theta: Some(MA2_GENERATING_THETA.to_vec()),
        data_seed: MA2_DATA_SEED,
    }
}

/// Looks an example up by its registered name.
pub fn by_name(name: &str) -> Option<ExampleModel> {
    match name {
        "gauss1d" => Some(example_1d()),
        "gauss2d" => Some(example_2d()),
        "ma2" => Some(example_ma2()),
        _ => None,
    }
}

/// Names accepted by [`by_name`].
pub const MODEL_NAMES: [&str; 3] = ["gauss1d", "gauss2d", "ma2"];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluate::tabulate;
    use crate::exec::Exec;

    #[test]
    fn mean_function_values() {
        assert_eq!(mean_1d(0.5), 0.0625);
        // continuity across the break: |0.5| - c = 0.5^4
        assert!((mean_1d(0.5 + 1e-12) - 0.0625).abs() < 1e-9);
        assert!((mean_1d(-0.5 - 1e-12) - 0.0625).abs() < 1e-9);
        assert_eq!(MEAN_SHIFT_1D, 0.5 - 0.5f64.powi(4));
    }

    #[test]
    fn ground_truth_1d_is_symmetric() {
        let gt = example_1d().ground_truth_unnorm.unwrap();
        for theta in [0.1, 0.5, 1.3, 2.2] {
            assert!((gt(&[theta]) - gt(&[-theta])).abs() < 1e-12);
        }
    }

    #[test]
    fn ground_truth_2d_statistics_match_truncated_normal() {
        let example = example_2d();
        let gt = example.ground_truth_unnorm.unwrap();
        let grid = tabulate(
            |theta| Ok(gt(theta)),
            &example.spec.bounds,
            0.01,
            Exec::Parallel,
        )
        .unwrap();
        let total: f64 = grid.values().iter().sum();
        let mut mean = [0.0; 2];
        for (i, v) in grid.values().iter().enumerate() {
            let c = grid.cell_center(i);
            mean[0] += v * c[0];
            mean[1] += v * c[1];
        }
        mean[0] /= total;
        mean[1] /= total;
        let mut var = [0.0; 2];
        for (i, v) in grid.values().iter().enumerate() {
            let c = grid.cell_center(i);
            var[0] += v * (c[0] - mean[0]) * (c[0] - mean[0]);
            var[1] += v * (c[1] - mean[1]) * (c[1] - mean[1]);
        }
        let std = [(var[0] / total).sqrt(), (var[1] / total).sqrt()];
        assert!((mean[0] + 0.45).abs() < 0.01, "mean {mean:?}");
        assert!((mean[1] - 0.45).abs() < 0.01, "mean {mean:?}");
        assert!((std[0] - 0.935).abs() < 0.01, "std {std:?}");
        assert!((std[1] - 0.935).abs() < 0.01, "std {std:?}");
    }

    #[test]
    fn ground_truth_2d_peaks_at_the_observation() {
        let example = example_2d();
        let gt = example.ground_truth_unnorm.unwrap();
        let grid = tabulate(
            |theta| Ok(gt(theta)),
            &example.spec.bounds,
            0.01,
            Exec::Parallel,
        )
        .unwrap();
        let argmax = grid
            .values()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let center = grid.cell_center(argmax);
        assert!((center[0] + 0.5).abs() < 0.0051, "{center:?}");
        assert!((center[1] - 0.5).abs() < 0.0051, "{center:?}");
    }

    #[test]
    fn ground_truths_riemann_normalise_to_one() {
        for example in [example_1d(), example_2d()] {
            let gt = example.ground_truth_unnorm.unwrap();
            let grid =
                tabulate(|t| Ok(gt(t)), &example.spec.bounds, 0.01, Exec::Parallel).unwrap();
            let z = grid.integral();
            assert!(z > 0.0);
            let normalised = grid.scaled(1.0 / z);
            assert!((normalised.integral() - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn ma2_prior_density_values() {
        let prior = example_ma2().spec.prior;
        assert_eq!(prior.pdf(&[0.0, 0.0]), 0.125);
        assert_eq!(prior.pdf(&[0.0, 1.5]), 0.0);
    }

    #[test]
    fn ma2_recursion_hand_example() {
        // theta = 0 passes the noise through: y = w, both summaries zero
        let noise = [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let y = ma2_series(&[0.0, 0.0], &noise);
        assert_eq!(y, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        let s = ma2_summaries(&y);
        assert_eq!(s, vec![0.0, 0.0]);
    }

    #[test]
    fn ma2_weighted_recursion() {
        let noise = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = ma2_series(&[0.5, 0.25], &noise);
        // y_1 = 3 + 0.5*2 + 0.25*1, y_2 = 4 + 0.5*3 + 0.25*2, y_3 = 5 + 0.5*4 + 0.25*3
        assert_eq!(y, vec![4.25, 6.0, 7.75]);
    }

    #[test]
    fn ma2_sample_summaries_match_theory() {
        // MA(2) autocovariances: gamma_1 = theta_1 (1 + theta_2),
        // gamma_2 = theta_2 (unit noise variance)
        let theta = [0.6, 0.2];
        let n = 1000;
        let mut acc = [0.0, 0.0];
        for seed in 0..n {
            let y = ma2_simulate(&theta, seed);
            let s = ma2_summaries(&y);
            acc[0] += s[0];
            acc[1] += s[1];
        }
        let mean = [acc[0] / n as f64, acc[1] / n as f64];
        assert!((mean[0] - 0.72).abs() < 0.05, "s1 mean {}", mean[0]);
        assert!((mean[1] - 0.2).abs() < 0.05, "s2 mean {}", mean[1]);
    }

    #[test]
    fn all_simulators_are_deterministic() {
        for name in MODEL_NAMES {
            let model = by_name(name).unwrap().spec;
            let theta = vec![0.3; model.dim()];
            let a = (model.simulator)(&theta, 77).unwrap();
            let b = (model.simulator)(&theta, 77).unwrap();
            assert_eq!(a, b, "{name} simulator not deterministic");
        }
    }

    #[test]
    fn registry_knows_the_three_models() {
        for name in MODEL_NAMES {
            assert!(by_name(name).is_some());
        }
        assert!(by_name("nope").is_none());
    }
}
