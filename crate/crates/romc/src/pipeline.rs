//! End-to-end orchestration: training, inference, reporting.
//!
//! Drives the full sequence (nuisance seeds, objectives, solving,
//! filtering, region construction, optional local surrogates, posterior
//! sampling, diagnostics) for a named example model and writes
//! machine-readable artifacts. Every phase is a seeded map over problem
//! indices, so sequential and parallel runs emit byte-identical sample
//! files.

use std::fmt;
use std::io::Write as IoWrite;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::abc::rejection_abc;
use crate::bo::{solve_bo, BoOpts};
use crate::error::{Result, RomcError};
use crate::evaluate::{divergence, tabulate, DivergenceKind, GridFunction};
use crate::examples::{self, ExampleModel};
use crate::exec::Exec;
use crate::model::{make_objective, sample_nuisance, EpsilonConfig, ObjectiveProblem};
use crate::optim::{compute_eps, filter_solutions, solve_gradients, GradOpts, OptimResult};
use crate::posterior::{compute_ess, RomcPosterior, WeightedSampleSet};
use crate::regions::build_box;
use crate::seeds::{self, StreamTag};
use crate::surrogate::{fit_box_surrogate, DEFAULT_N_TRAIN};

/// Serialises a float with 17 significant digits, enough to survive a
/// parse/print round trip bit-exactly.
pub fn fmt_f64(value: f64) -> String {
    format!("{value:.16e}")
}

/// Threshold request: an explicit value or the automatic quantile rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsSpec {
    Auto,
    Value(f64),
}

impl Serialize for EpsSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            EpsSpec::Auto => serializer.serialize_str("auto"),
            EpsSpec::Value(v) => serializer.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for EpsSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct EpsVisitor;
        impl Visitor<'_> for EpsVisitor {
            type Value = EpsSpec;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or the string \"auto\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<EpsSpec, E> {
                Ok(EpsSpec::Value(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<EpsSpec, E> {
                Ok(EpsSpec::Value(v as f64))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<EpsSpec, E> {
                Ok(EpsSpec::Value(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<EpsSpec, E> {
                if v == "auto" {
                    Ok(EpsSpec::Auto)
                } else {
                    v.parse::<f64>()
                        .map(EpsSpec::Value)
                        .map_err(|_| E::custom(format!("bad eps value {v:?}")))
                }
            }
        }
        deserializer.deserialize_any(EpsVisitor)
    }
}

impl std::str::FromStr for EpsSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s == "auto" {
            Ok(EpsSpec::Auto)
        } else {
            s.parse::<f64>()
                .map(EpsSpec::Value)
                .map_err(|_| format!("eps must be a number or \"auto\", got {s:?}"))
        }
    }
}

/// Configuration of one inference run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub model_name: String,
    pub n1: usize,
    pub n2: usize,
    pub eps: EpsSpec,
    /// Quantile of the d* distribution used when `eps` is auto.
    pub quantile: f64,
    pub use_bo: bool,
    pub fit_models: bool,
    pub seed: u64,
    pub parallel: bool,
    /// Worker threads for parallel phases; 0 keeps the default pool.
    pub workers: usize,
    pub grid_step: f64,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn new(model_name: &str, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            model_name: model_name.to_string(),
            n1: 500,
            n2: 50,
            eps: EpsSpec::Auto,
            quantile: 0.9,
            use_bo: false,
            fit_models: false,
            seed: 21,
            parallel: false,
            workers: 0,
            grid_step: 0.05,
            output_dir: output_dir.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 < 1 || self.n2 < 1 {
            return Err(RomcError::Config("n1 and n2 must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.quantile) {
            return Err(RomcError::Config(format!(
                "quantile {} outside [0, 1]",
                self.quantile
            )));
        }
        if self.grid_step <= 0.0 {
            return Err(RomcError::Config("grid step must be > 0".into()));
        }
        if let EpsSpec::Value(v) = self.eps {
            if !(v > 0.0) {
                return Err(RomcError::Config(format!("eps must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    fn exec(&self) -> Exec {
        if self.parallel {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

/// Configuration of a rejection-ABC run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AbcConfig {
    pub model_name: String,
    pub n_accept: usize,
    pub eps: f64,
    pub max_trials: u64,
    pub seed: u64,
    pub parallel: bool,
    pub workers: usize,
    pub output_dir: PathBuf,
}

impl AbcConfig {
    pub fn new(model_name: &str, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            model_name: model_name.to_string(),
            n_accept: 10_000,
            eps: 0.1,
            max_trials: 0, // 0 chooses a budget proportional to n_accept
            seed: 21,
            parallel: false,
            workers: 0,
            output_dir: output_dir.into(),
        }
    }

    pub fn resolved_max_trials(&self) -> u64 {
        if self.max_trials == 0 {
            (self.n_accept as u64).saturating_mul(2000)
        } else {
            self.max_trials
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_accept < 1 {
            return Err(RomcError::Config("n_accept must be >= 1".into()));
        }
        if self.eps < 0.0 {
            return Err(RomcError::Config("eps must be >= 0".into()));
        }
        if self.resolved_max_trials() < self.n_accept as u64 {
            return Err(RomcError::Config(
                "max_trials must be at least n_accept".into(),
            ));
        }
        Ok(())
    }
}

/// One proposal region in the report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionSummary {
    pub problem_index: usize,
    pub center: Vec<f64>,
    /// Per-direction (negative, positive) extents.
    pub limits: Vec<(f64, f64)>,
    pub volume: f64,
}

/// Weighted-sample statistics; recomputable from the samples array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub n_kept: usize,
    pub n_rejected: usize,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub ess: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DivergenceReport {
    /// Divergence family; values are natural-log based.
    pub kind: String,
    pub value: f64,
    pub grid_step: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AbcInfo {
    pub n_trials: u64,
    pub acceptance_rate: f64,
}

/// Wall-clock seconds per phase (zero when a phase did not run).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub solve: f64,
    pub regions: f64,
    pub sample: f64,
    pub posterior_eval: f64,
}

/// Full machine-readable account of a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub eps_used: f64,
    pub d_stars: Vec<f64>,
    pub accepted: usize,
    pub regions: Vec<RegionSummary>,
    pub samples: WeightedSampleSet,
    pub summary: RunSummary,
    pub divergence: Option<DivergenceReport>,
    pub abc: Option<AbcInfo>,
    pub timings: PhaseTimings,
}

struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W: ?Sized + std::io::Write>(
        &mut self,
        writer: &mut W,
        value: f64,
    ) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

/// JSON with floats at 17 significant digits; parse/serialise round
/// trips are byte-identical.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFormatter);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

fn run_in_pool<T: Send>(parallel: bool, workers: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    if parallel && workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| RomcError::Config(format!("worker pool: {e}")))?;
        pool.install(f)
    } else {
        f()
    }
}

/// Training state shared by the inference and timing entry points.
struct Trained {
    problems: Vec<ObjectiveProblem>,
    accepted: Vec<usize>,
    d_stars: Vec<f64>,
    eps: EpsilonConfig,
    solve_seconds: f64,
    regions_seconds: f64,
}

fn train(example: &ExampleModel, config: &RunConfig, exec: Exec) -> Result<Trained> {
    let model = &example.spec;
    model.validate()?;

    let nuisance = sample_nuisance(config.n1, config.seed)?;
    let mut problems: Vec<ObjectiveProblem> = nuisance
        .iter()
        .enumerate()
        .map(|(i, &u)| make_objective(model, i, u))
        .collect();

    let solve_start = Instant::now();
    if config.use_bo {
        let solved = exec.try_map(problems.len(), |i| {
            let opts = BoOpts {
                seed: seeds::derive_seed(config.seed, StreamTag::BayesOpt, i as u64),
                ..BoOpts::default()
            };
            solve_bo(&problems[i], &opts)
        })?;
        for (problem, (result, surrogate)) in problems.iter_mut().zip(solved) {
            problem.set_result(result);
            problem.set_surrogate(surrogate);
        }
    } else {
        let opts = GradOpts::default();
        let solved = exec.try_map(problems.len(), |i| {
            let mut rng = seeds::stream(config.seed, StreamTag::OptimStart, i as u64);
            // prior draw clamped into the search box (the prior support
            // may be wider than the bounds)
            let start: Vec<f64> = model
                .prior
                .sample(&mut rng)
                .iter()
                .zip(&model.bounds)
                .map(|(t, &(lo, hi))| t.clamp(lo, hi))
                .collect();
            solve_gradients(&problems[i], &start, &opts)
        })?;
        for (problem, result) in problems.iter_mut().zip(solved) {
            problem.set_result(result);
        }
    }
    let solve_seconds = solve_start.elapsed().as_secs_f64();

    let results: Vec<OptimResult> = problems
        .iter()
        .map(|p| p.result().expect("solved above").clone())
        .collect();
    let d_stars: Vec<f64> = results.iter().map(|r| r.d_star).collect();

    let eps_value = match config.eps {
        EpsSpec::Value(v) => v,
        EpsSpec::Auto => {
            let successful: Vec<f64> = results
                .iter()
                .filter(|r| r.success)
                .map(|r| r.d_star)
                .collect();
            if successful.is_empty() {
                return Err(RomcError::NoAcceptedRegions {
                    min_d_star: d_stars.iter().cloned().fold(f64::INFINITY, f64::min),
                });
            }
            compute_eps(&successful, config.quantile)?
        }
    };
    let eps = EpsilonConfig::from_single(eps_value);

    let accepted = filter_solutions(&results, eps.filter);
    if accepted.is_empty() {
        return Err(RomcError::NoAcceptedRegions {
            min_d_star: d_stars.iter().cloned().fold(f64::INFINITY, f64::min),
        });
    }

    let regions_start = Instant::now();
    let eta0 = 0.05
        * model
            .bounds
            .iter()
            .map(|(lo, hi)| hi - lo)
            .fold(f64::NEG_INFINITY, f64::max);
    let boxes = exec.try_map(accepted.len(), |k| {
        build_box(&problems[accepted[k]], eps.region, eta0, 10, config.use_bo)
    })?;
    for (k, bbox) in boxes.into_iter().enumerate() {
        problems[accepted[k]].set_regions(vec![bbox]);
    }
    if config.fit_models {
        let fitted = exec.try_map(accepted.len(), |k| {
            let problem = &problems[accepted[k]];
            let seed = seeds::derive_seed(config.seed, StreamTag::SurrogateTrain, problem.index as u64);
            fit_box_surrogate(problem, &problem.regions()[0], DEFAULT_N_TRAIN, seed)
        })?;
        for (k, model_fit) in fitted.into_iter().enumerate() {
            problems[accepted[k]].set_local_surrogate(model_fit);
        }
    }
    let regions_seconds = regions_start.elapsed().as_secs_f64();

    Ok(Trained {
        problems,
        accepted,
        d_stars,
        eps,
        solve_seconds,
        regions_seconds,
    })
}

fn summarise(samples: &WeightedSampleSet, n_proposed: usize) -> Result<RunSummary> {
    Ok(RunSummary {
        n_kept: samples.len(),
        n_rejected: n_proposed - samples.len(),
        means: samples.weighted_mean(),
        stds: samples.weighted_std(),
        ess: compute_ess(&samples.weights)?,
    })
}

/// Normalised posterior and ground-truth grids plus their divergence.
fn posterior_diagnostics(
    posterior: &RomcPosterior,
    example: &ExampleModel,
    step: f64,
    exec: Exec,
) -> Result<(GridFunction, DivergenceReport)> {
    let unnorm = posterior.unnorm_grid(step, exec)?;
    let z = unnorm.integral();
    if z <= 0.0 {
        return Err(RomcError::DegeneratePosterior { step });
    }
    let approx = unnorm.scaled(1.0 / z);
    let gt = example
        .ground_truth_unnorm
        .as_ref()
        .expect("caller checked ground truth");
    let gt_grid = tabulate(|theta| Ok(gt(theta)), posterior.bounds(), step, exec)?;
    let gz = gt_grid.integral();
    let gt_grid = gt_grid.scaled(1.0 / gz);
    let js = divergence(&approx, &gt_grid, DivergenceKind::JensenShannon)?;
    Ok((
        approx,
        DivergenceReport {
            kind: "jensen-shannon".into(),
            value: js,
            grid_step: step,
        },
    ))
}

fn region_summaries(problems: &[ObjectiveProblem], accepted: &[usize]) -> Vec<RegionSummary> {
    accepted
        .iter()
        .flat_map(|&i| {
            problems[i].regions().iter().map(move |bbox| RegionSummary {
                problem_index: i,
                center: bbox.center().to_vec(),
                limits: bbox.limits(),
                volume: bbox.volume(),
            })
        })
        .collect()
}

/// Runs the full training + inference pipeline and writes
/// `report.json`, `samples.csv`, `dstar_hist.csv` and, when ground
/// truth is available in at most two dimensions, `posterior_grid.csv`.
pub fn run_inference(config: &RunConfig) -> Result<RunReport> {
    let example = examples::by_name(&config.model_name)
        .ok_or_else(|| RomcError::Config(format!("unknown model {:?}", config.model_name)))?;
    run_inference_on_example(&example, config)
}

/// [`run_inference`] for a model supplied directly instead of looked up
/// in the registry.
pub fn run_inference_on_example(example: &ExampleModel, config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    run_in_pool(config.parallel, config.workers, || {
        run_inference_on(example, config)
    })
}

fn run_inference_on(example: &ExampleModel, config: &RunConfig) -> Result<RunReport> {
    let exec = config.exec();
    let trained = train(example, config, exec)?;

    let posterior = RomcPosterior::from_problems(
        &trained.problems,
        &trained.accepted,
        example.spec.prior.clone(),
        trained.eps.cutoff,
        example.spec.bounds.clone(),
        false,
    )?;

    let sample_start = Instant::now();
    let samples = posterior.sample(config.n2, config.seed, exec)?;
    let sample_seconds = sample_start.elapsed().as_secs_f64();
    let summary = summarise(&samples, posterior.n_regions() * config.n2)?;

    let mut divergence_report = None;
    let mut posterior_grid = None;
    let mut posterior_eval_seconds = 0.0;
    if example.spec.dim() <= 2 && example.ground_truth_unnorm.is_some() {
        let eval_start = Instant::now();
        let (grid, report) = posterior_diagnostics(&posterior, example, config.grid_step, exec)?;
        posterior_eval_seconds = eval_start.elapsed().as_secs_f64();
        posterior_grid = Some(grid);
        divergence_report = Some(report);
    }

    let report = RunReport {
        config: config.clone(),
        eps_used: trained.eps.cutoff,
        d_stars: trained.d_stars.clone(),
        accepted: trained.accepted.len(),
        regions: region_summaries(&trained.problems, &trained.accepted),
        samples,
        summary,
        divergence: divergence_report,
        abc: None,
        timings: PhaseTimings {
            solve: trained.solve_seconds,
            regions: trained.regions_seconds,
            sample: sample_seconds,
            posterior_eval: posterior_eval_seconds,
        },
    };
    write_run_artifacts(&report, posterior_grid.as_ref(), &config.output_dir)?;
    Ok(report)
}

/// Runs the rejection-ABC baseline with the report/file conventions of
/// [`run_inference`].
pub fn run_rejection_abc(config: &AbcConfig) -> Result<RunReport> {
    config.validate()?;
    let example = examples::by_name(&config.model_name)
        .ok_or_else(|| RomcError::Config(format!("unknown model {:?}", config.model_name)))?;
    run_in_pool(config.parallel, config.workers, || {
        let exec = if config.parallel {
            Exec::Parallel
        } else {
            Exec::Sequential
        };
        let start = Instant::now();
        let result = rejection_abc(
            &example.spec,
            config.n_accept,
            config.eps,
            config.resolved_max_trials(),
            config.seed,
            exec,
        )?;
        let solve_seconds = start.elapsed().as_secs_f64();

        let n = result.samples.len();
        let samples = WeightedSampleSet {
            problem_index: result.trial_indices.iter().map(|&t| t as usize).collect(),
            thetas: result.samples.clone(),
            weights: vec![1.0; n],
            n_requested_per_region: config.n_accept,
        };
        let summary = summarise(&samples, result.n_trials as usize)?;
        let run_config = RunConfig {
            model_name: config.model_name.clone(),
            n1: config.n_accept,
            n2: 1,
            eps: EpsSpec::Value(config.eps),
            quantile: 0.0,
            use_bo: false,
            fit_models: false,
            seed: config.seed,
            parallel: config.parallel,
            workers: config.workers,
            grid_step: 0.05,
            output_dir: config.output_dir.clone(),
        };
        let report = RunReport {
            config: run_config,
            eps_used: config.eps,
            d_stars: result.distances.clone(),
            accepted: n,
            regions: Vec::new(),
            samples,
            summary,
            divergence: None,
            abc: Some(AbcInfo {
                n_trials: result.n_trials,
                acceptance_rate: result.acceptance_rate(),
            }),
            timings: PhaseTimings {
                solve: solve_seconds,
                ..PhaseTimings::default()
            },
        };
        write_run_artifacts(&report, None, &config.output_dir)?;
        Ok(report)
    })
}

/// Pipeline phases that can be timed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Solve,
    Regions,
    Sample,
    PosteriorEval,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::Solve, Phase::Regions, Phase::Sample, Phase::PosteriorEval];

    pub fn name(self) -> &'static str {
        match self {
            Phase::Solve => "solve",
            Phase::Regions => "regions",
            Phase::Sample => "sample",
            Phase::PosteriorEval => "posterior-eval",
        }
    }

    pub fn parse(name: &str) -> Option<Phase> {
        Phase::ALL.iter().copied().find(|p| p.name() == name)
    }

    fn extract(self, timings: &PhaseTimings) -> f64 {
        match self {
            Phase::Solve => timings.solve,
            Phase::Regions => timings.regions,
            Phase::Sample => timings.sample,
            Phase::PosteriorEval => timings.posterior_eval,
        }
    }
}

/// One timing comparison row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingRow {
    pub phase: String,
    pub baseline: String,
    pub baseline_seconds: f64,
    pub variant: String,
    pub variant_seconds: f64,
    /// baseline_seconds / variant_seconds.
    pub speedup: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingTable {
    pub rows: Vec<TimingRow>,
}

fn speedup(baseline: f64, variant: f64) -> f64 {
    baseline / variant.max(1e-12)
}

/// Times the requested phases sequentially and in parallel, plus (when
/// local surrogates are fitted) simulator-backed against
/// surrogate-backed posterior evaluation.
pub fn run_timing(config: &RunConfig, phases: &[Phase]) -> Result<TimingTable> {
    config.validate()?;
    let example = examples::by_name(&config.model_name)
        .ok_or_else(|| RomcError::Config(format!("unknown model {:?}", config.model_name)))?;

    let mut sequential_cfg = config.clone();
    sequential_cfg.parallel = false;
    sequential_cfg.output_dir = config.output_dir.join("sequential");
    let sequential = run_inference(&sequential_cfg)?;

    let mut parallel_cfg = config.clone();
    parallel_cfg.parallel = true;
    parallel_cfg.output_dir = config.output_dir.join("parallel");
    let parallel = run_inference(&parallel_cfg)?;

    let mut rows: Vec<TimingRow> = phases
        .iter()
        .map(|phase| {
            let seq = phase.extract(&sequential.timings);
            let par = phase.extract(&parallel.timings);
            TimingRow {
                phase: phase.name().into(),
                baseline: "sequential".into(),
                baseline_seconds: seq,
                variant: "parallel".into(),
                variant_seconds: par,
                speedup: speedup(seq, par),
            }
        })
        .collect();

    if config.fit_models {
        let (simulator_seconds, surrogate_seconds) =
            time_distance_sources(&example, &sequential_cfg)?;
        rows.push(TimingRow {
            phase: "posterior-eval-distance-source".into(),
            baseline: "simulator".into(),
            baseline_seconds: simulator_seconds,
            variant: "local-surrogate".into(),
            variant_seconds: surrogate_seconds,
            speedup: speedup(simulator_seconds, surrogate_seconds),
        });
    }

    let table = TimingTable { rows };
    std::fs::create_dir_all(&config.output_dir)?;
    write_timing_csv(&table, &config.output_dir.join("timing.csv"))?;
    Ok(table)
}

/// Grid-evaluates the trained posterior once with the true simulator
/// distances and once with local surrogates; returns both wall times.
pub fn time_distance_sources(example: &ExampleModel, config: &RunConfig) -> Result<(f64, f64)> {
    let mut cfg = config.clone();
    cfg.fit_models = true;
    let exec = Exec::Sequential;
    let trained = train(example, &cfg, exec)?;
    let mut seconds = [0.0f64; 2];
    for (slot, force_objective) in [(0, true), (1, false)] {
        let posterior = RomcPosterior::from_problems(
            &trained.problems,
            &trained.accepted,
            example.spec.prior.clone(),
            trained.eps.cutoff,
            example.spec.bounds.clone(),
            force_objective,
        )?;
        let start = Instant::now();
        posterior.unnorm_grid(cfg.grid_step, exec)?;
        seconds[slot] = start.elapsed().as_secs_f64();
    }
    Ok((seconds[0], seconds[1]))
}

// ---------------------------------------------------------------------
// file output
// ---------------------------------------------------------------------

fn write_run_artifacts(
    report: &RunReport,
    posterior_grid: Option<&GridFunction>,
    dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), to_json(report)?)?;
    write_samples_csv(&report.samples, &dir.join("samples.csv"))?;
    write_dstar_csv(&report.d_stars, &dir.join("dstar_hist.csv"))?;
    if let Some(grid) = posterior_grid {
        let file = std::fs::File::create(dir.join("posterior_grid.csv"))?;
        grid.write_csv(std::io::BufWriter::new(file))?;
    }
    Ok(())
}

fn write_samples_csv(samples: &WeightedSampleSet, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    write!(out, "problem_index")?;
    for d in 0..samples.dim() {
        write!(out, ",theta_{}", d + 1)?;
    }
    writeln!(out, ",weight")?;
    for ((idx, theta), weight) in samples
        .problem_index
        .iter()
        .zip(&samples.thetas)
        .zip(&samples.weights)
    {
        write!(out, "{idx}")?;
        for t in theta {
            write!(out, ",{}", fmt_f64(*t))?;
        }
        writeln!(out, ",{}", fmt_f64(*weight))?;
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn write_dstar_csv(d_stars: &[f64], path: &Path) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "problem_index,d_star")?;
    for (i, d) in d_stars.iter().enumerate() {
        writeln!(out, "{i},{}", fmt_f64(*d))?;
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn write_timing_csv(table: &TimingTable, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    writeln!(
        out,
        "phase,baseline,baseline_seconds,variant,variant_seconds,speedup"
    )?;
    for row in &table.rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.phase,
            row.baseline,
            fmt_f64(row.baseline_seconds),
            row.variant,
            fmt_f64(row.variant_seconds),
            fmt_f64(row.speedup)
        )?;
    }
    std::fs::write(path, out)?;
    Ok(())
}
