//! Scenario-driven runs of the solvers and experiments, writing CSV and JSON
//! artifacts. The `lqmfg` binary is a thin wrapper around [`run`].

pub mod config;
mod output;

use std::path::PathBuf;
use std::time::Instant;

use lqmfg::population::deviation_experiment;
use lqmfg::riccati::{self, PiConditionReport};
use lqmfg::{
    linalg, rate_experiments, simulate_population, wellposedness_diagnostic, CommonNoiseCoupling,
    Equilibrium, LqMfgModel, RiccatiSolution,
};
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::json;

pub use config::{preset, ExperimentKind, GammaChoice, PChoice, ScenarioConfig, PRESETS};
use output::Artifacts;

/// Version stamped into every JSON artifact.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] lqmfg::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::Usage(_) => "usage",
            CliError::Core(e) => e.kind(),
        }
    }

    /// Machine-readable error record.
    pub fn record(&self) -> serde_json::Value {
        let mut error = json!({ "kind": self.kind(), "message": self.to_string() });
        if let CliError::Parse { path, line, column, .. } = self {
            error["path"] = json!(path);
            error["line"] = json!(line);
            error["column"] = json!(column);
        }
        json!({ "format_version": FORMAT_VERSION, "error": error })
    }
}

/// What a successful run produced.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub kind: ExperimentKind,
    pub out_dir: PathBuf,
    pub artifacts: Vec<String>,
}

/// Runs on a dedicated pool of `threads` workers (machine parallelism when
/// `None`).
pub fn run_with_threads(config: &ScenarioConfig, threads: Option<usize>) -> Result<RunSummary, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::Usage("thread count must be positive".into()));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run(config))
}

pub fn run(config: &ScenarioConfig) -> Result<RunSummary, CliError> {
    let started = Instant::now();
    let model = config.build_model()?;
    let mut out = Artifacts::new(&config.output.dir, &config.output.prefix)?;

    let (solution, crosscheck) = solve_with_crosscheck(&model, config)?;
    let coupling = if config.solver.m00_beta_literal {
        CommonNoiseCoupling::LiteralPrinted
    } else {
        CommonNoiseCoupling::Consistent
    };
    let eq = Equilibrium::from_solution(model, solution, coupling)?;
    out.write("riccati.csv", &output::riccati_csv(&eq))?;
    out.write_json("crosscheck.json", &crosscheck)?;

    let exp = &config.experiment;
    match exp.kind {
        ExperimentKind::Solve => {
            let path = lqmfg::mean_field_path(eq.model(), eq.law(), exp.seed, coupling)?;
            out.write("meanfield.csv", &output::meanfield_csv(&path))?;
        }
        ExperimentKind::Simulate => {
            if exp.n_agents == 0 {
                return Err(CliError::Usage("experiment.N must be positive".into()));
            }
            let sample = simulate_population(&eq, exp.n_agents, exp.seed)?;
            out.write("meanfield.csv", &output::sample_meanfield_csv(&sample))?;
            out.write("population.csv", &output::population_csv(&sample))?;
            for i in 0..sample.n_agents {
                out.write(&format!("agent_{:03}.csv", i + 1), &output::agent_csv(&sample, i))?;
            }
            out.write("costs.csv", &output::costs_csv(&sample))?;
        }
        ExperimentKind::RateState | ExperimentKind::RateCost => {
            let all = rate_experiments(&eq, &exp.ns, exp.samples, exp.seed)?;
            let primary = if exp.kind == ExperimentKind::RateState { &all.state } else { &all.cost };
            let report = json!({
                "format_version": FORMAT_VERSION,
                "kind": exp.kind,
                "statistic": primary.statistic,
                "Ns": primary.ns,
                "S": exp.samples,
                "seed": exp.seed,
                "values": primary.values,
                "stderrs": primary.stderrs,
                "fit": primary.fit,
                "degenerate": primary.degenerate,
                "all_statistics": all,
                "config": config,
            });
            out.write_json("report.json", &report)?;
            out.write("report.csv", &output::rate_csv(primary))?;
        }
        ExperimentKind::Deviation => {
            let family = exp.candidates.family();
            let report = deviation_experiment(&eq, exp.n_agents, exp.samples, &family, exp.seed)?;
            let doc = json!({
                "format_version": FORMAT_VERSION,
                "kind": exp.kind,
                "N": exp.n_agents,
                "S": exp.samples,
                "seed": exp.seed,
                "report": report,
                "config": config,
            });
            out.write_json("deviation.json", &doc)?;
            out.write("deviation.csv", &output::deviation_csv(&report))?;
        }
    }

    let mut artifacts = out.names().to_vec();
    artifacts.push(out.file_name("manifest.json"));
    let manifest = json!({
        "format_version": FORMAT_VERSION,
        "config": config,
        "versions": {
            "lqmfg-cli": env!("CARGO_PKG_VERSION"),
            "format": FORMAT_VERSION,
        },
        "wall_time_seconds": started.elapsed().as_secs_f64(),
        "artifacts": artifacts,
    });
    out.write_json("manifest.json", &manifest)?;
    Ok(RunSummary {
        kind: exp.kind,
        out_dir: config.output.dir.clone(),
        artifacts: out.names().to_vec(),
    })
}

#[derive(Debug, Serialize)]
struct RouteCheck {
    method: &'static str,
    ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<serde_json::Value>,
    /// Max over nodes of the Frobenius distance to the primary route.
    #[serde(skip_serializing_if = "Option::is_none")]
    max_difference: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    condition: Option<PiConditionReport>,
}

impl RouteCheck {
    fn failed(method: &'static str, e: lqmfg::Error) -> Self {
        Self {
            method,
            ok: false,
            error: Some(CliError::Core(e).record()["error"].clone()),
            max_difference: None,
            iterations: None,
            condition: None,
        }
    }
}

fn max_distance(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| linalg::frobenius_distance(x, y)).fold(0.0, f64::max)
}

/// Solves with the configured routes. With `both`, the direct route feeds the
/// downstream pipeline and the alternative is reported, failures included.
fn solve_with_crosscheck(
    model: &LqMfgModel,
    config: &ScenarioConfig,
) -> Result<(RiccatiSolution, serde_json::Value), CliError> {
    let solver = &config.solver;
    let mut routes = Vec::new();

    let p = match solver.p_method {
        PChoice::Direct => riccati::solve_p_direct(model)?,
        PChoice::Iterative => {
            let (p, iterations) = riccati::solve_p_iterative(model, solver.max_iters, solver.tol)?;
            routes.push(RouteCheck {
                method: "p_iterative",
                ok: true,
                error: None,
                max_difference: None,
                iterations: Some(iterations),
                condition: None,
            });
            p
        }
        PChoice::Both => {
            let p = riccati::solve_p_direct(model)?;
            routes.push(match riccati::solve_p_iterative(model, solver.max_iters, solver.tol) {
                Ok((alt, iterations)) => RouteCheck {
                    method: "p_iterative",
                    ok: true,
                    error: None,
                    max_difference: Some(max_distance(&p, &alt)),
                    iterations: Some(iterations),
                    condition: None,
                },
                Err(e) => RouteCheck::failed("p_iterative", e),
            });
            p
        }
    };

    let gamma = match solver.gamma_method {
        GammaChoice::Direct => riccati::solve_gamma_direct(model, &p)?,
        GammaChoice::PiTransform => {
            let (gamma, condition) = riccati::solve_gamma_via_pi(model, &p)?;
            routes.push(RouteCheck {
                method: "gamma_pi_transform",
                ok: true,
                error: None,
                max_difference: None,
                iterations: None,
                condition: Some(condition),
            });
            gamma
        }
        GammaChoice::Both => {
            let gamma = riccati::solve_gamma_direct(model, &p)?;
            routes.push(match riccati::solve_gamma_via_pi(model, &p) {
                Ok((alt, condition)) => RouteCheck {
                    method: "gamma_pi_transform",
                    ok: true,
                    error: None,
                    max_difference: Some(max_distance(&gamma, &alt)),
                    iterations: None,
                    condition: Some(condition),
                },
                Err(e) => RouteCheck::failed("gamma_pi_transform", e),
            });
            gamma
        }
    };

    let phi = riccati::solve_phi(model, &p, &gamma)?;
    let sigma = riccati::sigma_nodes(model, &p)?;
    let solution = RiccatiSolution {
        grid: *model.grid(),
        p,
        gamma,
        phi,
        sigma,
    };
    let doc = json!({
        "format_version": FORMAT_VERSION,
        "p_method": solver.p_method,
        "gamma_method": solver.gamma_method,
        "validation": model.validate(),
        "diagnostic": wellposedness_diagnostic(model),
        "routes": routes,
    });
    Ok((solution, doc))
}
