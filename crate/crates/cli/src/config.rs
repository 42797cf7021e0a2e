//! Scenario files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use lqmfg::model::{Coefficient, CoefficientSchedule, ModelData, TimeGrid};
use lqmfg::presets::{NetworkSecurity, NETSEC_NUMERIC_AGENTS};
use lqmfg::{Candidate, LqMfgModel};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const PRESETS: [&str; 2] = ["netsec-closed-form", "netsec-numeric"];
pub const DEFAULT_STEPS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Either a preset (optionally with coefficient overrides) or a full inline
/// model. Coefficients are keyed `A, B, alpha, b, C, D, beta, sigma, C0, D0,
/// beta0, sigma0, Q, R, G`; missing ones are zero.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_min: Option<f64>,
    #[serde(flatten)]
    pub coefficients: BTreeMap<String, MatrixSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixSpec {
    /// Row-major constant matrix.
    Const(Vec<Vec<f64>>),
    /// One row-major matrix per grid node.
    Schedule(Vec<Vec<Vec<f64>>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PChoice {
    #[default]
    Direct,
    Iterative,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaChoice {
    #[default]
    Direct,
    PiTransform,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Overrides the model's step count (constant coefficients only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default)]
    pub gamma_method: GammaChoice,
    #[serde(default)]
    pub p_method: PChoice,
    #[serde(default)]
    pub m00_beta_literal: bool,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_max_iters() -> usize {
    lqmfg::riccati::DEFAULT_MAX_ITERS
}

fn default_tol() -> f64 {
    lqmfg::riccati::DEFAULT_TOL
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            steps: None,
            gamma_method: GammaChoice::Direct,
            p_method: PChoice::Direct,
            m00_beta_literal: false,
            max_iters: default_max_iters(),
            tol: default_tol(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    #[default]
    Solve,
    Simulate,
    RateState,
    RateCost,
    Deviation,
}

impl std::str::FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        serde_json::from_value(serde_json::Value::String(s.into()))
            .map_err(|_| format!("unknown experiment kind {s:?}; expected solve, simulate, rate_state, rate_cost or deviation"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub kind: ExperimentKind,
    #[serde(rename = "Ns", default = "default_ns")]
    pub ns: Vec<usize>,
    #[serde(rename = "S", default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(rename = "N", default = "default_agents")]
    pub n_agents: usize,
    #[serde(default)]
    pub candidates: CandidateConfig,
}

fn default_ns() -> Vec<usize> {
    vec![25, 50, 100, 200, 400, 800]
}

fn default_samples() -> usize {
    256
}

fn default_agents() -> usize {
    NETSEC_NUMERIC_AGENTS
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Solve,
            ns: default_ns(),
            samples: default_samples(),
            seed: 0,
            n_agents: default_agents(),
            candidates: CandidateConfig::default(),
        }
    }
}

/// The deviation family: gain scalings, optional zero control, and `±offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateConfig {
    #[serde(default = "default_thetas")]
    pub thetas: Vec<f64>,
    #[serde(default = "default_true")]
    pub zero_control: bool,
    #[serde(default = "default_offset")]
    pub offset: f64,
}

fn default_thetas() -> Vec<f64> {
    vec![0.0, 0.5, 0.8, 1.2, 1.5, 2.0]
}

fn default_true() -> bool {
    true
}

fn default_offset() -> f64 {
    0.5
}

impl Default for CandidateConfig {
    fn default() -> Self {
        Self {
            thetas: default_thetas(),
            zero_control: true,
            offset: default_offset(),
        }
    }
}

impl CandidateConfig {
    /// Always starts with the equilibrium law itself.
    pub fn family(&self) -> Vec<Candidate> {
        let mut out = vec![Candidate::Equilibrium];
        out.extend(self.thetas.iter().map(|&t| Candidate::ScaledGain(t)));
        if self.zero_control {
            out.push(Candidate::ZeroControl);
        }
        if self.offset != 0.0 {
            out.push(Candidate::Offset(self.offset));
            out.push(Candidate::Offset(-self.offset));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub prefix: String,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            prefix: String::new(),
        }
    }
}

/// Scenario built around one of the bundled parameter sets.
pub fn preset(name: &str) -> Result<ScenarioConfig, CliError> {
    preset_parameters(name)?;
    Ok(ScenarioConfig {
        model: ModelSpec {
            preset: Some(name.into()),
            ..ModelSpec::default()
        },
        solver: SolverConfig::default(),
        experiment: ExperimentConfig::default(),
        output: OutputConfig::default(),
    })
}

fn preset_parameters(name: &str) -> Result<NetworkSecurity, CliError> {
    match name {
        "netsec-closed-form" => Ok(NetworkSecurity::CLOSED_FORM),
        "netsec-numeric" => Ok(NetworkSecurity::NUMERIC),
        _ => Err(CliError::Usage(format!(
            "unknown preset {name:?}; available presets: {}",
            PRESETS.join(", ")
        ))),
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str, origin: &Path) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Parse {
            path: origin.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text, path)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Step count after the solver override.
    pub fn steps(&self) -> usize {
        self.solver.steps.or(self.model.steps).unwrap_or(DEFAULT_STEPS)
    }

    /// Builds and validates the model.
    pub fn build_model(&self) -> Result<LqMfgModel, CliError> {
        let spec = &self.model;
        let data = match &spec.preset {
            Some(name) => {
                let params = preset_parameters(name)?;
                for (field, present) in [
                    ("n", spec.n.is_some()),
                    ("k", spec.k.is_some()),
                    ("T", spec.horizon.is_some()),
                    ("x0", spec.x0.is_some()),
                ] {
                    if present {
                        return Err(CliError::Usage(format!("model field {field} cannot be combined with a preset")));
                    }
                }
                let mut data = params.data(self.steps());
                apply_coefficients(&mut data, &spec.coefficients)?;
                data
            }
            None => {
                let missing = |f: &str| CliError::Usage(format!("inline model requires field {f}"));
                let n = spec.n.ok_or_else(|| missing("n"))?;
                let k = spec.k.ok_or_else(|| missing("k"))?;
                let horizon = spec.horizon.ok_or_else(|| missing("T"))?;
                let x0 = spec.x0.as_ref().ok_or_else(|| missing("x0"))?;
                let steps = spec.steps.ok_or_else(|| missing("steps"))?;
                let grid = TimeGrid::new(horizon, steps)?;
                let mut data = ModelData::new(n, k, grid).with_initial_state(DVector::from_column_slice(x0));
                apply_coefficients(&mut data, &spec.coefficients)?;
                data
            }
        };
        let data = match spec.r_min {
            Some(r) => data.with_r_min(r),
            None => data,
        };
        let model = data.build()?;
        if model.grid().steps() != self.steps() {
            return Ok(model.with_steps(self.steps())?);
        }
        Ok(model)
    }
}

fn matrix(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, CliError> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(CliError::Usage(format!("coefficient {name} is not a non-empty rectangular matrix")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn apply_coefficients(data: &mut ModelData, coefficients: &BTreeMap<String, MatrixSpec>) -> Result<(), CliError> {
    for (name, spec) in coefficients {
        if name == "G" {
            match spec {
                MatrixSpec::Const(rows) => data.terminal = matrix(name, rows)?,
                MatrixSpec::Schedule(_) => {
                    return Err(CliError::Usage("G is a terminal matrix and takes a const value".into()))
                }
            }
            continue;
        }
        let coefficient = Coefficient::from_name(name)
            .ok_or_else(|| CliError::Usage(format!("unknown model field {name:?}")))?;
        let schedule = match spec {
            MatrixSpec::Const(rows) => CoefficientSchedule::constant(matrix(name, rows)?, &data.grid),
            MatrixSpec::Schedule(nodes) => CoefficientSchedule::from_values(
                nodes.iter().map(|rows| matrix(name, rows)).collect::<Result<_, _>>()?,
            ),
        };
        data.set(coefficient, schedule);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_resolve() {
        let cfg = preset("netsec-closed-form").unwrap();
        let model = cfg.build_model().unwrap();
        assert_eq!(model.grid().steps(), DEFAULT_STEPS);
        let cfg = preset("netsec-numeric").unwrap();
        assert_eq!(cfg.build_model().unwrap().terminal()[(0, 0)], 5.0);
        let err = preset("nope").unwrap_err().to_string();
        assert!(err.contains("netsec-closed-form") && err.contains("netsec-numeric"));
    }

    #[test]
    fn inline_model_parses() {
        let text = r#"{
            "model": {"n": 1, "k": 1, "T": 2.0, "steps": 10, "x0": [0.5],
                      "A": {"const": [[0.3]]}, "R": {"const": [[1.0]]},
                      "Q": {"schedule": [[[1]],[[1]],[[1]],[[1]],[[1]],[[1]],[[1]],[[1]],[[1]],[[1]],[[2]]]},
                      "G": {"const": [[1.0]]}},
            "experiment": {"kind": "simulate", "N": 3, "seed": 4}
        }"#;
        let cfg = ScenarioConfig::from_json(text, Path::new("x.json")).unwrap();
        let model = cfg.build_model().unwrap();
        assert_eq!(model.grid().horizon(), 2.0);
        assert_eq!(model.schedule(Coefficient::Q).at(10)[(0, 0)], 2.0);
        assert_eq!(model.initial_state()[0], 0.5);
        assert_eq!(cfg.experiment.kind, ExperimentKind::Simulate);
    }

    #[test]
    fn parse_errors_carry_position() {
        match ScenarioConfig::from_json("{\n  \"model\": {,}\n}", Path::new("bad.json")) {
            Err(CliError::Parse { line, column, .. }) => {
                assert_eq!(line, 2);
                assert!(column > 0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = r#"{"model": {"preset": "netsec-numeric", "Z": {"const": [[1]]}}}"#;
        let cfg = ScenarioConfig::from_json(bad, Path::new("x")).unwrap();
        assert!(matches!(cfg.build_model(), Err(CliError::Usage(_))));
        let bad = r#"{"model": {"preset": "netsec-numeric"}, "solvr": {}}"#;
        assert!(ScenarioConfig::from_json(bad, Path::new("x")).is_err());
    }

    #[test]
    fn round_trip() {
        let mut cfg = preset("netsec-numeric").unwrap();
        cfg.model.coefficients.insert("beta".into(), MatrixSpec::Const(vec![vec![0.1]]));
        cfg.solver.gamma_method = GammaChoice::Both;
        cfg.experiment.seed = u64::MAX;
        cfg.experiment.candidates.offset = 0.1 + 0.2;
        let again = ScenarioConfig::from_json(&cfg.to_json(), Path::new("x")).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn steps_override() {
        let mut cfg = preset("netsec-closed-form").unwrap();
        cfg.solver.steps = Some(250);
        assert_eq!(cfg.build_model().unwrap().grid().steps(), 250);
    }
}
