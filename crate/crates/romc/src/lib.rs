//! Robust Optimisation Monte Carlo (ROMC) inference engine.
//!
//! Likelihood-free inference for simulator-based models: fixing the
//! simulator seed turns the stochastic generator into deterministic
//! objective functions, which are minimised (by gradients or Bayesian
//! optimisation), wrapped in bounding-box proposal regions and used for
//! weighted posterior sampling, posterior evaluation and diagnostics.
//!
//! The high-level entry points live in [`pipeline`]; the building
//! blocks (models, solvers, regions, surrogates, posterior) are usable
//! on their own.

pub mod abc;
pub mod bo;
pub mod error;
pub mod evaluate;
pub mod examples;
pub mod exec;
pub mod model;
pub mod optim;
pub mod pipeline;
pub mod posterior;
pub mod regions;
pub mod seeds;
pub mod surrogate;

pub use error::{Result, RomcError};
pub use exec::Exec;
pub use model::{indicator, make_objective, sample_nuisance, EpsilonConfig, ModelSpec, ObjectiveProblem, Prior};
pub use optim::{compute_eps, filter_solutions, finite_diff_gradient, solve_gradients, GradOpts, OptimResult};
pub use pipeline::{run_inference, run_rejection_abc, run_timing, AbcConfig, EpsSpec, Phase, RunConfig, RunReport};
pub use posterior::{compute_ess, compute_expectation, RomcPosterior, WeightedSampleSet};
pub use regions::{box_pdf, box_sample, build_box, curvature_directions, BoundingBox};
