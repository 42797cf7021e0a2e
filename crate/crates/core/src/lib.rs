//! Linear-quadratic mean-field games with common noise and incomplete information.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: coefficient schedules on a uniform time grid, validation of the
//!   standing assumptions and the advisory well-posedness diagnostic.
//! - [`riccati`]: the backward Riccati system `(P, Γ, Φ)`, solved directly,
//!   by the monotone Lyapunov iteration, or through the `Π = P + Γ` transform,
//!   and the decentralized feedback law built from it.
//! - [`meanfield`]: the deterministic mean `E[m]`, the common-noise driven
//!   mean-field limit `m`, and the filtered state `ẑᵢ` of a single agent.
//! - [`population`]: the coupled `N`-agent system, realized costs, and the
//!   Monte-Carlo rate and deviation experiments.
//! - [`presets`]: the two network-security parameter sets.

pub mod error;
mod kernels;
pub mod linalg;
pub mod meanfield;
pub mod model;
pub mod population;
pub mod presets;
pub mod riccati;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use meanfield::{
    integrate_em, integrate_m, integrate_z_hat, mean_field_path, CommonNoiseCoupling,
    FilteredStatePath, MeanFieldPath, NoisePath,
};
pub use model::{
    validate, wellposedness_diagnostic, Coefficient, CoefficientSchedule, DiagnosticReport,
    LqMfgModel, ModelData, TimeGrid, ValidationReport,
};
pub use population::{
    deviation_experiment, deviation_ladder, rate_experiment_cost, rate_experiment_state,
    rate_experiments, simulate_population, simulate_population_with_streams, Candidate,
    CandidateOutcome, DeviationLadder, DeviationReport, Equilibrium, PopulationSample,
    RateExperiments, RateFitReport,
};
pub use riccati::{
    build_feedback, solve_gamma_direct, solve_gamma_via_pi, solve_p_direct, solve_p_iterative,
    solve_phi, FeedbackLaw, GammaMethod, PMethod, PiConditionReport, RiccatiSolution,
    SolveOptions,
};
