//! Bayesian-optimisation solver with a Gaussian-process surrogate.
//!
//! Used when gradients are unreliable or unavailable: the objective is
//! evaluated at a seeded initial design, a GP with squared-exponential
//! kernel is fitted (hyperparameters by log-marginal-likelihood grid
//! search), and further evaluations follow a lower-confidence-bound
//! acquisition over seeded candidate sets. Besides the incumbent, the
//! fitted posterior mean is kept as a cheap stand-in for the objective.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Result, RomcError};
use crate::model::{DistanceFn, ObjectiveProblem};
use crate::optim::OptimResult;

/// Gaussian process with squared-exponential kernel and per-dimension
/// lengthscales, conditioned on its training set.
pub struct GaussianProcess {
    inputs: Vec<Vec<f64>>,
    target_mean: f64,
    alpha: DVector<f64>,
    chol_l: DMatrix<f64>,
    signal_var: f64,
    lengthscales: Vec<f64>,
    noise_var: f64,
}

fn kernel(a: &[f64], b: &[f64], signal_var: f64, lengthscales: &[f64]) -> f64 {
    let mut acc = 0.0;
    for ((x, y), l) in a.iter().zip(b).zip(lengthscales) {
        let z = (x - y) / l;
        acc += z * z;
    }
    signal_var * (-0.5 * acc).exp()
}

struct FittedCore {
    alpha: DVector<f64>,
    chol_l: DMatrix<f64>,
    log_marginal: f64,
}

fn fit_core(
    inputs: &[Vec<f64>],
    centered: &DVector<f64>,
    signal_var: f64,
    lengthscales: &[f64],
    noise_var: f64,
) -> Option<FittedCore> {
    let n = inputs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = kernel(&inputs[i], &inputs[j], signal_var, lengthscales);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] += noise_var;
    }
    let chol = k.cholesky()?;
    let alpha = chol.solve(centered);
    let log_det: f64 = (0..n).map(|i| chol.l_dirty()[(i, i)].ln()).sum();
    let log_marginal = -0.5 * centered.dot(&alpha)
        - log_det
        - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    Some(FittedCore {
        alpha,
        chol_l: chol.unpack(),
        log_marginal,
    })
}

/// Grid values multiplying the per-dimension input range to form
/// candidate lengthscales.
const LENGTHSCALE_GRID: [f64; 5] = [0.05, 0.1, 0.2, 0.4, 0.8];
/// Grid values multiplying var(y) to form candidate signal variances.
const SIGNAL_GRID: [f64; 3] = [0.25, 1.0, 4.0];

/// Fits hyperparameters by maximising the log marginal likelihood over
/// the fixed grid, then conditions the GP on `(x, y)`.
pub fn gp_fit(x: &[Vec<f64>], y: &[f64]) -> Result<GaussianProcess> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return Err(RomcError::InvalidArgument(
            "gp_fit needs at least two matching input/target pairs".into(),
        ));
    }
    let dim = x[0].len();
    if x.iter().any(|r| r.len() != dim || r.iter().any(|v| !v.is_finite())) {
        return Err(RomcError::InvalidArgument("non-finite or ragged GP inputs".into()));
    }
    if x.iter().all(|r| r == &x[0]) {
        return Err(RomcError::FitError("all GP inputs identical".into()));
    }

    let target_mean = y.iter().sum::<f64>() / n as f64;
    let centered = DVector::from_iterator(n, y.iter().map(|v| v - target_mean));
    let var_y = centered.dot(&centered) / n as f64;
    let noise_var = 1e-6 * var_y + 1e-10;

    let mut ranges = vec![0.0; dim];
    for d in 0..dim {
        let lo = x.iter().map(|r| r[d]).fold(f64::INFINITY, f64::min);
        let hi = x.iter().map(|r| r[d]).fold(f64::NEG_INFINITY, f64::max);
        ranges[d] = (hi - lo).max(1e-8);
    }

    // exhaustive per-dimension grid is exponential in D; tie the
    // lengthscale multiplier across dimensions once it gets large
    let tied = LENGTHSCALE_GRID.len().pow(dim as u32) > 1024;
    let combos: Vec<Vec<f64>> = if tied {
        LENGTHSCALE_GRID
            .iter()
            .map(|m| ranges.iter().map(|r| m * r).collect())
            .collect()
    } else {
        let mut combos: Vec<Vec<f64>> = vec![Vec::new()];
        for d in 0..dim {
            let mut next = Vec::with_capacity(combos.len() * LENGTHSCALE_GRID.len());
            for prefix in &combos {
                for m in LENGTHSCALE_GRID {
                    let mut c = prefix.clone();
                    c.push(m * ranges[d]);
                    next.push(c);
                }
            }
            combos = next;
        }
        combos
    };

    let mut best: Option<(f64, f64, Vec<f64>, FittedCore)> = None;
    for &sf_mult in &SIGNAL_GRID {
        let signal_var = (sf_mult * var_y).max(1e-12);
        for lengthscales in &combos {
            let Some(core) = fit_core(x, &centered, signal_var, lengthscales, noise_var) else {
                continue;
            };
            let better = match &best {
                None => true,
                Some((_, _, _, prev)) => core.log_marginal > prev.log_marginal,
            };
            if better {
                best = Some((signal_var, noise_var, lengthscales.clone(), core));
            }
        }
    }
    let (signal_var, noise_var, lengthscales, core) =
        best.ok_or_else(|| RomcError::FitError("no hyperparameter candidate factorised".into()))?;
    Ok(GaussianProcess {
        inputs: x.to_vec(),
        target_mean,
        alpha: core.alpha,
        chol_l: core.chol_l,
        signal_var,
        lengthscales,
        noise_var,
    })
}

/// Posterior mean and (clamped nonnegative) variance at `theta`.
pub fn gp_predict(gp: &GaussianProcess, theta: &[f64]) -> (f64, f64) {
    let n = gp.inputs.len();
    let k_star = DVector::from_iterator(
        n,
        gp.inputs
            .iter()
            .map(|xi| kernel(xi, theta, gp.signal_var, &gp.lengthscales)),
    );
    let mean = gp.target_mean + k_star.dot(&gp.alpha);
    let v = gp
        .chol_l
        .solve_lower_triangular(&k_star)
        .expect("Cholesky factor is nonsingular");
    let variance = (gp.signal_var - v.norm_squared()).max(0.0);
    (mean, variance)
}

impl GaussianProcess {
    pub fn signal_var(&self) -> f64 {
        self.signal_var
    }

    pub fn lengthscales(&self) -> &[f64] {
        &self.lengthscales
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }
}

/// Settings for [`solve_bo`].
#[derive(Debug, Clone)]
pub struct BoOpts {
    pub n_init: usize,
    pub n_iters: usize,
    /// Exploration weight in the acquisition mean - scale * stddev.
    pub lcb_scale: f64,
    pub n_candidates: usize,
    pub seed: u64,
}

impl Default for BoOpts {
    fn default() -> Self {
        Self {
            n_init: 10,
            n_iters: 40,
            lcb_scale: 2.0,
            n_candidates: 512,
            seed: 0,
        }
    }
}

fn uniform_in_bounds(rng: &mut ChaCha8Rng, bounds: &[(f64, f64)]) -> Vec<f64> {
    bounds.iter().map(|&(lo, hi)| rng.random_range(lo..hi)).collect()
}

/// Minimises g_i with `n_init` seeded design points plus `n_iters`
/// acquisition-driven evaluations; returns the incumbent and the GP
/// posterior mean as a surrogate distance.
pub fn solve_bo(problem: &ObjectiveProblem, opts: &BoOpts) -> Result<(OptimResult, DistanceFn)> {
    if opts.n_init < 2 {
        return Err(RomcError::InvalidArgument("n_init must be >= 2".into()));
    }
    for &(lo, hi) in &problem.bounds {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(RomcError::InvalidArgument(
                "Bayesian optimisation needs finite bounds".into(),
            ));
        }
    }
    let fail = |e: RomcError| RomcError::OptimisationFailed {
        problem: problem.index,
        message: e.to_string(),
    };
    let bounds = &problem.bounds;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let perturb = Normal::new(0.0, 1.0).expect("unit normal");

    let mut xs: Vec<Vec<f64>> = (0..opts.n_init)
        .map(|_| uniform_in_bounds(&mut rng, bounds))
        .collect();
    let mut ys = xs
        .iter()
        .map(|x| problem.eval(x))
        .collect::<Result<Vec<f64>>>()
        .map_err(fail)?;

    for _ in 0..opts.n_iters {
        let gp = gp_fit(&xs, &ys).map_err(fail)?;
        let incumbent_idx = argmin(&ys);
        let mut candidates: Vec<Vec<f64>> = (0..opts.n_candidates)
            .map(|_| uniform_in_bounds(&mut rng, bounds))
            .collect();
        let jittered: Vec<f64> = xs[incumbent_idx]
            .iter()
            .zip(bounds)
            .map(|(t, &(lo, hi))| {
                (t + 0.01 * (hi - lo) * perturb.sample(&mut rng)).clamp(lo, hi)
            })
            .collect();
        candidates.push(jittered);

        let next = candidates
            .into_iter()
            .map(|c| {
                let (mean, var) = gp_predict(&gp, &c);
                (mean - opts.lcb_scale * var.sqrt(), c)
            })
            .min_by(|a, b| a.0.partial_cmp(&b.0).expect("finite acquisition"))
            .expect("nonempty candidate set")
            .1;
        let y_next = problem.eval(&next).map_err(fail)?;
        xs.push(next);
        ys.push(y_next);
    }

    let gp = gp_fit(&xs, &ys).map_err(fail)?;
    let best = argmin(&ys);
    let theta_star = xs[best].clone();
    let d_star = ys[best];
    let n_evals = opts.n_init + opts.n_iters;

    // curvature proxy for region construction: gradient of the GP mean
    let gradient_at_star = {
        let mut grad = vec![0.0; theta_star.len()];
        let mut point = theta_star.clone();
        for (d, g) in grad.iter_mut().enumerate() {
            let h = 1e-5 * theta_star[d].abs().max(1.0);
            point[d] = theta_star[d] + h;
            let plus = gp_predict(&gp, &point).0;
            point[d] = theta_star[d] - h;
            let minus = gp_predict(&gp, &point).0;
            point[d] = theta_star[d];
            *g = (plus - minus) / (2.0 * h);
        }
        grad
    };

    let surrogate: DistanceFn = Arc::new(move |theta: &[f64]| Ok(gp_predict(&gp, theta).0));
    Ok((
        OptimResult {
            theta_star,
            d_star,
            success: d_star.is_finite(),
            n_evals,
            gradient_at_star,
        },
        surrogate,
    ))
}

fn argmin(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).expect("finite objective"))
        .expect("nonempty")
        .0
}
