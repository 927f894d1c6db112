//! Simulator-based model abstraction.
//!
//! A model is a prior, a seeded simulator, a summary map and a distance.
//! Fixing the simulator seed u_i turns the stochastic generator into a
//! deterministic map, and the distance of its output from the observed
//! summary becomes the deterministic objective g_i(theta) that the rest
//! of the engine optimises, bounds and samples from.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, RomcError};
use crate::optim::OptimResult;
use crate::regions::BoundingBox;
use crate::seeds::{self, StreamTag};
use crate::surrogate::QuadraticModel;

/// Seeded simulator: `(theta, seed) -> outputs`. Must be a pure function
/// of its arguments; identical inputs give bit-identical outputs.
pub type SimulatorFn = Arc<dyn Fn(&[f64], u64) -> Result<Vec<f64>> + Send + Sync>;

/// Summary statistic map applied to simulator outputs (identity allowed).
pub type SummaryFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Distance between two summary vectors; nonnegative, zero on equal inputs.
pub type MetricFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// A deterministic objective or surrogate distance `theta -> d`.
pub type DistanceFn = Arc<dyn Fn(&[f64]) -> Result<f64> + Send + Sync>;

/// Prior distribution over the parameters.
#[derive(Clone)]
pub struct Prior {
    dim: usize,
    sampler: Arc<dyn Fn(&mut ChaCha8Rng) -> Vec<f64> + Send + Sync>,
    density: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl Prior {
    pub fn new(
        dim: usize,
        sampler: impl Fn(&mut ChaCha8Rng) -> Vec<f64> + Send + Sync + 'static,
        density: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            sampler: Arc::new(sampler),
            density: Arc::new(density),
        }
    }

    /// Independent uniforms over an axis-aligned box.
    pub fn uniform_box(bounds: &[(f64, f64)]) -> Self {
        let bounds = bounds.to_vec();
        let volume: f64 = bounds.iter().map(|(lo, hi)| hi - lo).product();
        let b2 = bounds.clone();
        Self::new(
            bounds.len(),
            move |rng| bounds.iter().map(|&(lo, hi)| rng.random_range(lo..hi)).collect(),
            move |theta| {
                let inside = theta
                    .iter()
                    .zip(b2.iter())
                    .all(|(t, &(lo, hi))| *t >= lo && *t <= hi);
                if inside {
                    1.0 / volume
                } else {
                    0.0
                }
            },
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (self.sampler)(rng)
    }

    pub fn pdf(&self, theta: &[f64]) -> f64 {
        (self.density)(theta)
    }

    pub fn log_pdf(&self, theta: &[f64]) -> f64 {
        self.pdf(theta).ln()
    }
}

/// The inference problem definition: prior, seeded simulator, summary,
/// distance and the observed data.
#[derive(Clone)]
pub struct ModelSpec {
    pub prior: Prior,
    pub simulator: SimulatorFn,
    pub summary: SummaryFn,
    pub distance: MetricFn,
    pub observed: Vec<f64>,
    /// One (lo, hi) pair per parameter; must contain all prior mass.
    pub bounds: Vec<(f64, f64)>,
}

impl ModelSpec {
    pub fn dim(&self) -> usize {
        self.prior.dim()
    }

    /// Summary of the observed data (computed once per use site).
    pub fn observed_summary(&self) -> Vec<f64> {
        (self.summary)(&self.observed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bounds.len() != self.dim() {
            return Err(RomcError::InvalidArgument(format!(
                "bounds has {} entries for a {}-dimensional prior",
                self.bounds.len(),
                self.dim()
            )));
        }
        for &(lo, hi) in &self.bounds {
            if !(lo < hi) {
                return Err(RomcError::InvalidArgument(format!(
                    "bounds entry ({lo}, {hi}) must satisfy lo < hi"
                )));
            }
        }
        Ok(())
    }
}

/// Thresholds for accepting solutions, sizing regions and cutting off
/// the posterior indicator. Constructed from a single eps they coincide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonConfig {
    pub filter: f64,
    pub region: f64,
    pub cutoff: f64,
}

impl EpsilonConfig {
    pub fn from_single(eps: f64) -> Self {
        Self {
            filter: eps,
            region: eps,
            cutoff: eps,
        }
    }
}

/// One deterministic optimisation problem: a nuisance seed u_i together
/// with its objective g_i and everything derived from it later in the
/// run. Derived fields only ever transition from absent to present.
pub struct ObjectiveProblem {
    pub index: usize,
    pub seed: u64,
    pub bounds: Vec<(f64, f64)>,
    objective: DistanceFn,
    result: Option<OptimResult>,
    regions: Vec<BoundingBox>,
    surrogate: Option<DistanceFn>,
    local_surrogate: Option<QuadraticModel>,
}

impl ObjectiveProblem {
    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    /// Evaluates the true deterministic objective g_i.
    pub fn eval(&self, theta: &[f64]) -> Result<f64> {
        (self.objective)(theta)
    }

    pub fn objective(&self) -> DistanceFn {
        Arc::clone(&self.objective)
    }

    pub fn result(&self) -> Option<&OptimResult> {
        self.result.as_ref()
    }

    pub fn set_result(&mut self, result: OptimResult) {
        assert!(self.result.is_none(), "result already set");
        self.result = Some(result);
    }

    pub fn regions(&self) -> &[BoundingBox] {
        &self.regions
    }

    pub fn set_regions(&mut self, regions: Vec<BoundingBox>) {
        assert!(self.regions.is_empty(), "regions already set");
        self.regions = regions;
    }

    pub fn surrogate(&self) -> Option<DistanceFn> {
        self.surrogate.as_ref().map(Arc::clone)
    }

    pub fn set_surrogate(&mut self, surrogate: DistanceFn) {
        assert!(self.surrogate.is_none(), "surrogate already set");
        self.surrogate = Some(surrogate);
    }

    pub fn local_surrogate(&self) -> Option<&QuadraticModel> {
        self.local_surrogate.as_ref()
    }

    pub fn set_local_surrogate(&mut self, model: QuadraticModel) {
        assert!(self.local_surrogate.is_none(), "local surrogate already set");
        self.local_surrogate = Some(model);
    }

    /// The distance used at inference time: local surrogate if fitted,
    /// else the GP surrogate, else the true objective. `force_objective`
    /// bypasses the surrogates for validation runs.
    pub fn distance_callable(&self, force_objective: bool) -> DistanceFn {
        if !force_objective {
            if let Some(model) = &self.local_surrogate {
                let model = model.clone();
                return Arc::new(move |theta: &[f64]| Ok(model.predict(theta)));
            }
            if let Some(surrogate) = &self.surrogate {
                return Arc::clone(surrogate);
            }
        }
        Arc::clone(&self.objective)
    }
}

/// Draws the `n1` nuisance seeds u_i from U{1, 2^32 - 1}, keyed only by
/// `master_seed`.
pub fn sample_nuisance(n1: usize, master_seed: u64) -> Result<Vec<u64>> {
    if n1 < 1 {
        return Err(RomcError::InvalidArgument("n1 must be >= 1".into()));
    }
    let mut rng = seeds::stream(master_seed, StreamTag::Nuisance, 0);
    Ok((0..n1)
        .map(|_| rng.random_range(1..=u32::MAX as u64))
        .collect())
}

/// Builds the deterministic objective g_i for nuisance seed `u_i`:
/// `g_i(theta) = distance(summary(simulator(theta, u_i)), summary(observed))`.
pub fn make_objective(model: &ModelSpec, index: usize, u_i: u64) -> ObjectiveProblem {
    let simulator = Arc::clone(&model.simulator);
    let summary = Arc::clone(&model.summary);
    let distance = Arc::clone(&model.distance);
    let observed_summary = model.observed_summary();
    let objective: DistanceFn = Arc::new(move |theta: &[f64]| {
        let output = simulator(theta, u_i).map_err(|e| RomcError::Evaluation {
            theta: theta.to_vec(),
            seed: Some(u_i),
            message: e.to_string(),
        })?;
        let d = distance(&summary(&output), &observed_summary);
        if !d.is_finite() || d < 0.0 {
            return Err(RomcError::Evaluation {
                theta: theta.to_vec(),
                seed: Some(u_i),
                message: format!("distance evaluated to {d}"),
            });
        }
        Ok(d)
    });
    ObjectiveProblem {
        index,
        seed: u_i,
        bounds: model.bounds.clone(),
        objective,
        result: None,
        regions: Vec::new(),
        surrogate: None,
        local_surrogate: None,
    }
}

/// Indicator of the eps-ball: true iff `d_value <= eps` (boundary
/// inclusive).
pub fn indicator(d_value: f64, eps: f64) -> bool {
    d_value <= eps
}
