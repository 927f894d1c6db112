//! Approximate posterior: evaluation, weighted sampling, expectations.
//!
//! The unnormalised posterior is the prior times the count of accepted
//! problems whose distance at theta stays below the cutoff. Sampling
//! draws from each problem's box proposal, rejects draws above the
//! cutoff and weights the survivors by prior over proposal density.

use std::collections::HashMap;
use std::sync::Mutex;

use crate::error::{Result, RomcError};
use crate::evaluate::{tabulate, GridFunction};
use crate::exec::Exec;
use crate::model::{indicator, DistanceFn, ObjectiveProblem, Prior};
use crate::regions::{box_pdf, box_sample, BoundingBox};
use crate::seeds::{derive_seed, StreamTag};

/// One accepted problem inside the posterior: its inference-time
/// distance and its proposal regions.
pub struct PosteriorPart {
    pub problem_index: usize,
    distance: DistanceFn,
    regions: Vec<BoundingBox>,
}

impl PosteriorPart {
    pub fn distance(&self, theta: &[f64]) -> Result<f64> {
        (self.distance)(theta)
    }

    pub fn regions(&self) -> &[BoundingBox] {
        &self.regions
    }
}

/// The trained approximate posterior.
pub struct RomcPosterior {
    parts: Vec<PosteriorPart>,
    prior: Prior,
    eps_cutoff: f64,
    bounds: Vec<(f64, f64)>,
    z_cache: Mutex<HashMap<u64, f64>>,
}

/// Weighted posterior samples with their provenance.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WeightedSampleSet {
    pub problem_index: Vec<usize>,
    pub thetas: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub n_requested_per_region: usize,
}

impl WeightedSampleSet {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.thetas.first().map_or(0, |t| t.len())
    }

    /// Per-dimension weighted mean.
    pub fn weighted_mean(&self) -> Vec<f64> {
        let dim = self.dim();
        let total: f64 = self.weights.iter().sum();
        let mut mean = vec![0.0; dim];
        for (theta, w) in self.thetas.iter().zip(&self.weights) {
            for (m, t) in mean.iter_mut().zip(theta) {
                *m += w * t;
            }
        }
        mean.iter_mut().for_each(|m| *m /= total);
        mean
    }

    /// Per-dimension weighted standard deviation around the weighted
    /// mean.
    pub fn weighted_std(&self) -> Vec<f64> {
        let mean = self.weighted_mean();
        let total: f64 = self.weights.iter().sum();
        let mut var = vec![0.0; self.dim()];
        for (theta, w) in self.thetas.iter().zip(&self.weights) {
            for ((v, t), m) in var.iter_mut().zip(theta).zip(&mean) {
                *v += w * (t - m) * (t - m);
            }
        }
        var.iter().map(|v| (v / total).sqrt()).collect()
    }
}

impl RomcPosterior {
    /// Collects the accepted problems into a posterior.
    ///
    /// Each part's distance follows the precedence local surrogate >
    /// GP surrogate > objective; `force_objective` pins the true
    /// objective for validation runs.
    pub fn from_problems(
        problems: &[ObjectiveProblem],
        accepted: &[usize],
        prior: Prior,
        eps_cutoff: f64,
        bounds: Vec<(f64, f64)>,
        force_objective: bool,
    ) -> Result<Self> {
        let mut parts = Vec::with_capacity(accepted.len());
        for &i in accepted {
            let problem = &problems[i];
            if problem.regions().is_empty() {
                continue;
            }
            parts.push(PosteriorPart {
                problem_index: problem.index,
                distance: problem.distance_callable(force_objective),
                regions: problem.regions().to_vec(),
            });
        }
        if parts.is_empty() {
            let min_d_star = problems
                .iter()
                .filter_map(|p| p.result().map(|r| r.d_star))
                .fold(f64::INFINITY, f64::min);
            return Err(RomcError::NoAcceptedRegions { min_d_star });
        }
        Ok(Self {
            parts,
            prior,
            eps_cutoff,
            bounds,
            z_cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn parts(&self) -> &[PosteriorPart] {
        &self.parts
    }

    pub fn n_regions(&self) -> usize {
        self.parts.iter().map(|p| p.regions.len()).sum()
    }

    pub fn eps_cutoff(&self) -> f64 {
        self.eps_cutoff
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    /// Unnormalised posterior: prior density times the number of
    /// accepted problems whose distance at theta is within the cutoff.
    pub fn eval_unnorm(&self, theta: &[f64]) -> Result<f64> {
        let prior_pdf = self.prior.pdf(theta);
        if prior_pdf == 0.0 {
            return Ok(0.0);
        }
        let mut count = 0usize;
        for part in &self.parts {
            if indicator(part.distance(theta)?, self.eps_cutoff) {
                count += 1;
            }
        }
        Ok(prior_pdf * count as f64)
    }

    /// Partition function on the grid with the given step, cached per
    /// step value.
    pub fn partition_function(&self, step: f64, exec: Exec) -> Result<f64> {
        if let Some(z) = self.z_cache.lock().unwrap().get(&step.to_bits()) {
            return Ok(*z);
        }
        let grid = self.unnorm_grid(step, exec)?;
        let z = grid.integral();
        if z <= 0.0 {
            return Err(RomcError::DegeneratePosterior { step });
        }
        self.z_cache.lock().unwrap().insert(step.to_bits(), z);
        Ok(z)
    }

    /// Tabulates the unnormalised posterior over the bounds.
    pub fn unnorm_grid(&self, step: f64, exec: Exec) -> Result<GridFunction> {
        if self.bounds.len() > 3 {
            return Err(RomcError::InvalidArgument(
                "grid normalisation is limited to at most 3 dimensions".into(),
            ));
        }
        tabulate(|theta| self.eval_unnorm(theta), &self.bounds, step, exec)
    }

    /// Normalised posterior density at theta, using the Riemann
    /// partition-function approximation on the given step.
    pub fn eval_posterior(&self, theta: &[f64], step: f64, exec: Exec) -> Result<f64> {
        let z = self.partition_function(step, exec)?;
        Ok(self.eval_unnorm(theta)? / z)
    }

    /// Weighted sampling: `n2` draws from every region's proposal,
    /// rejection on the distance cutoff, importance weights
    /// prior/proposal. Per-region streams are derived from
    /// (`seed`, problem index), so the result is independent of
    /// execution order and worker count.
    pub fn sample(&self, n2: usize, seed: u64, exec: Exec) -> Result<WeightedSampleSet> {
        if n2 < 1 {
            return Err(RomcError::InvalidArgument("n2 must be >= 1".into()));
        }
        let per_part: Vec<Vec<(usize, Vec<f64>, f64)>> =
            exec.try_map(self.parts.len(), |part_idx| {
                let part = &self.parts[part_idx];
                let mut kept = Vec::new();
                for (region_idx, region) in part.regions.iter().enumerate() {
                    let stream_index = (part.problem_index as u64) << 8 | region_idx as u64;
                    let region_seed = derive_seed(seed, StreamTag::PosteriorSample, stream_index);
                    for theta in box_sample(region, n2, region_seed) {
                        let d = part.distance(&theta)?;
                        if !indicator(d, self.eps_cutoff) {
                            continue;
                        }
                        let proposal = box_pdf(region, &theta);
                        debug_assert!(proposal > 0.0);
                        let weight = self.prior.pdf(&theta) / proposal;
                        kept.push((part.problem_index, theta, weight));
                    }
                }
                Ok(kept)
            })?;

        let mut problem_index = Vec::new();
        let mut thetas = Vec::new();
        let mut weights = Vec::new();
        for kept in per_part {
            for (idx, theta, w) in kept {
                problem_index.push(idx);
                thetas.push(theta);
                weights.push(w);
            }
        }
        if weights.is_empty() {
            return Err(RomcError::EmptySampleSet {
                requested: self.n_regions() * n2,
            });
        }
        Ok(WeightedSampleSet {
            problem_index,
            thetas,
            weights,
            n_requested_per_region: n2,
        })
    }
}

/// Self-normalised importance-sampling estimate of E[h(theta)].
pub fn compute_expectation<H>(samples: &WeightedSampleSet, h: H) -> Result<f64>
where
    H: Fn(&[f64]) -> f64,
{
    let total: f64 = samples.weights.iter().sum();
    if !(total > 0.0) {
        return Err(RomcError::InvalidArgument(
            "expectation requires positive total weight".into(),
        ));
    }
    let acc: f64 = samples
        .thetas
        .iter()
        .zip(&samples.weights)
        .map(|(theta, w)| w * h(theta))
        .sum();
    Ok(acc / total)
}

/// Effective sample size of a weight vector: (sum w)^2 / sum w^2.
pub fn compute_ess(weights: &[f64]) -> Result<f64> {
    if weights.is_empty() {
        return Err(RomcError::InvalidArgument("empty weight vector".into()));
    }
    if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
        return Err(RomcError::InvalidArgument(
            "weights must be finite and nonnegative".into(),
        ));
    }
    let sum: f64 = weights.iter().sum();
    let sum_sq: f64 = weights.iter().map(|w| w * w).sum();
    if sum_sq == 0.0 {
        return Err(RomcError::InvalidArgument("all weights are zero".into()));
    }
    Ok(sum * sum / sum_sq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluate::{divergence, DivergenceKind};
    use crate::model::{make_objective, ModelSpec, Prior};
    use crate::optim::OptimResult;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn normal_pdf(x: f64) -> f64 {
        (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }

    fn analytic_posterior(
        dim: usize,
        bounds: (f64, f64),
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        eps: f64,
        extents: f64,
    ) -> RomcPosterior {
        let spec = ModelSpec {
            prior: Prior::uniform_box(&vec![bounds; dim]),
            simulator: Arc::new(move |theta: &[f64], _| Ok(vec![f(theta)])),
            summary: Arc::new(|y: &[f64]| y.to_vec()),
            distance: Arc::new(|a: &[f64], b: &[f64]| (a[0] - b[0]).abs()),
            observed: vec![0.0],
            bounds: vec![bounds; dim],
        };
        let mut problem = make_objective(&spec, 0, 1);
        let theta_star = vec![0.0; dim];
        let d_star = problem.eval(&theta_star).unwrap();
        problem.set_result(OptimResult {
            theta_star: theta_star.clone(),
            d_star,
            success: true,
            n_evals: 1,
            gradient_at_star: vec![0.0; dim],
        });
        let dirs = (0..dim)
            .map(|i| {
                let mut e = vec![0.0; dim];
                e[i] = 1.0;
                e
            })
            .collect();
        let bbox =
            BoundingBox::new(theta_star, dirs, &vec![(extents, extents); dim]).unwrap();
        problem.set_regions(vec![bbox]);
        RomcPosterior::from_problems(
            &[problem],
            &[0],
            Prior::uniform_box(&vec![bounds; dim]),
            eps,
            vec![bounds; dim],
            false,
        )
        .unwrap()
    }

    #[test]
    fn ess_identities() {
        assert_eq!(compute_ess(&[1.0, 1.0, 1.0, 1.0]).unwrap(), 4.0);
        assert_eq!(compute_ess(&[5.0]).unwrap(), 1.0);
    }

    #[test]
    fn ess_rejects_degenerate_weights() {
        assert!(compute_ess(&[]).is_err());
        assert!(compute_ess(&[0.0, 0.0]).is_err());
        assert!(compute_ess(&[1.0, -0.5]).is_err());
    }

    #[test]
    fn expectation_of_one_is_one() {
        let samples = WeightedSampleSet {
            problem_index: vec![0, 0, 1],
            thetas: vec![vec![1.0], vec![2.0], vec![3.0]],
            weights: vec![0.2, 0.5, 0.3],
            n_requested_per_region: 3,
        };
        assert!((compute_expectation(&samples, |_| 1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn expectation_requires_positive_weight() {
        let samples = WeightedSampleSet {
            problem_index: vec![0],
            thetas: vec![vec![1.0]],
            weights: vec![0.0],
            n_requested_per_region: 1,
        };
        assert!(compute_expectation(&samples, |t| t[0]).is_err());
    }

    #[test]
    fn posterior_construction_fails_without_regions() {
        let spec = ModelSpec {
            prior: Prior::uniform_box(&[(-1.0, 1.0)]),
            simulator: Arc::new(|_: &[f64], _| Ok(vec![0.0])),
            summary: Arc::new(|y: &[f64]| y.to_vec()),
            distance: Arc::new(|a: &[f64], b: &[f64]| (a[0] - b[0]).abs()),
            observed: vec![0.0],
            bounds: vec![(-1.0, 1.0)],
        };
        let problem = make_objective(&spec, 0, 1);
        let r = RomcPosterior::from_problems(
            &[problem],
            &[],
            Prior::uniform_box(&[(-1.0, 1.0)]),
            0.5,
            vec![(-1.0, 1.0)],
            false,
        );
        assert!(matches!(r, Err(RomcError::NoAcceptedRegions { .. })));
    }

    #[test]
    fn unnorm_vanishes_outside_prior_support() {
        let post = analytic_posterior(1, (-1.0, 1.0), |t| t[0].abs(), 0.5, 1.0);
        assert_eq!(post.eval_unnorm(&[2.0]).unwrap(), 0.0);
        assert!(post.eval_unnorm(&[0.0]).unwrap() > 0.0);
    }

    #[test]
    fn indicator_everywhere_recovers_the_prior() {
        // one problem with zero distance and a box covering the bounds:
        // the normalised posterior equals the prior density
        let post = analytic_posterior(1, (-1.0, 1.0), |_| 0.0, 0.5, 3.0);
        let step = 0.05;
        let density = post.eval_posterior(&[0.3], step, Exec::Sequential).unwrap();
        assert!((density - 0.5).abs() < 1e-12, "density {density}");
    }

    #[test]
    fn normalised_posterior_integrates_to_one() {
        let post = analytic_posterior(1, (-1.0, 1.0), |t| t[0].abs(), 0.5, 1.0);
        let step = 0.01;
        let grid = post.unnorm_grid(step, Exec::Sequential).unwrap();
        let z = post.partition_function(step, Exec::Sequential).unwrap();
        let riemann: f64 = grid.values().iter().map(|v| v / z).sum::<f64>() * step;
        assert!((riemann - 1.0).abs() < 1e-9, "riemann {riemann}");
    }

    #[test]
    fn riemann_engine_matches_standard_normal() {
        let g = tabulate(
            |t| Ok(normal_pdf(t[0])),
            &[(-5.0, 5.0)],
            0.01,
            Exec::Sequential,
        )
        .unwrap();
        assert!((g.integral() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn degenerate_posterior_is_reported() {
        // cutoff so small that no cell center is accepted
        let post = analytic_posterior(1, (-1.0, 1.0), |t| t[0].abs() + 1.0, 0.5, 1.0);
        let r = post.partition_function(0.1, Exec::Sequential);
        assert!(matches!(r, Err(RomcError::DegeneratePosterior { .. })));
    }

    #[test]
    fn sampling_is_deterministic_and_order_independent() {
        let post = analytic_posterior(2, (-1.0, 1.0), |t| (t[0] * t[0] + t[1] * t[1]).sqrt(), 0.8, 1.0);
        let seq = post.sample(200, 7, Exec::Sequential).unwrap();
        let par = post.sample(200, 7, Exec::Parallel).unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn constant_distance_keeps_all_draws_with_equal_weights() {
        let post = analytic_posterior(1, (-2.0, 2.0), |_| 0.0, 0.5, 1.0);
        let n2 = 500;
        let samples = post.sample(n2, 3, Exec::Sequential).unwrap();
        assert_eq!(samples.len(), n2);
        let expected = 0.25 * 2.0; // prior pdf * box volume
        for w in &samples.weights {
            assert!((w - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_sample_set_is_an_error() {
        let post = analytic_posterior(1, (-1.0, 1.0), |t| t[0].abs() + 10.0, 0.5, 1.0);
        assert!(matches!(
            post.sample(50, 3, Exec::Sequential),
            Err(RomcError::EmptySampleSet { .. })
        ));
    }

    #[test]
    fn sample_histogram_matches_normalised_posterior_on_box() {
        // single-region posterior restricted to the box: the weighted
        // histogram and the grid-normalised posterior must agree
        let post = analytic_posterior(1, (-1.0, 1.0), |t| t[0].abs(), 0.5, 1.0);
        let samples = post.sample(10_000, 5, Exec::Sequential).unwrap();
        let step = 0.1;
        let grid = post.unnorm_grid(step, Exec::Sequential).unwrap();
        let mut hist = vec![0.0; grid.len()];
        for (theta, w) in samples.thetas.iter().zip(&samples.weights) {
            let cell = ((theta[0] - (-1.0)) / step).floor() as usize;
            hist[cell.min(grid.len() - 1)] += w;
        }
        let hist_grid = GridFunction::from_values(grid.bounds(), step, hist).unwrap();
        let js = divergence(&grid, &hist_grid, DivergenceKind::JensenShannon).unwrap();
        assert!(js <= 0.02, "js {js}");
    }

    proptest! {
        #[test]
        fn ess_is_scale_invariant_and_in_range(weights in proptest::collection::vec(0.0f64..10.0, 1..50), scale in 0.1f64..100.0) {
            prop_assume!(weights.iter().any(|w| *w > 0.0));
            let ess = compute_ess(&weights).unwrap();
            prop_assert!(ess >= 1.0 - 1e-12);
            prop_assert!(ess <= weights.len() as f64 + 1e-12);
            let scaled: Vec<f64> = weights.iter().map(|w| w * scale).collect();
            let ess_scaled = compute_ess(&scaled).unwrap();
            prop_assert!((ess - ess_scaled).abs() <= 1e-12 * ess.max(1.0));
        }
    }
}
