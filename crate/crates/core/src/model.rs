//! Game data: time grid, coefficient schedules and assumption checks.
//!
//! The state of agent `i` follows
//!
//! ```text
//! dxᵢ = [A xᵢ + B uᵢ + α x⁽ᴺ⁾ + b] dt
//!     + [C xᵢ + D uᵢ + β x⁽ᴺ⁾ + σ] dWᵢ
//!     + [C₀ xᵢ + D₀ uᵢ + β₀ x⁽ᴺ⁾ + σ₀] dW₀,      xᵢ(0) = x0,
//! ```
//!
//! with running cost `½⟨Q(xᵢ - x⁽ᴺ⁾), xᵢ - x⁽ᴺ⁾⟩ + ½⟨R uᵢ, uᵢ⟩` and terminal
//! cost `½⟨G xᵢ(T), xᵢ(T)⟩`.
//!
//! Every schedule is piecewise constant on the grid: the matrix stored at node
//! `j` is used on the whole interval `[t_j, t_{j+1})`.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Absolute tolerance on `max |M - Mᵀ|`.
pub const TAU_SYM: f64 = 1e-10;
/// Tolerance on negative eigenvalues of matrices that must be PSD.
pub const TAU_PSD: f64 = 1e-10;
/// Default lower bound on the spectrum of `R(t)`.
pub const DEFAULT_R_MIN: f64 = 1e-8;

/// Uniform grid `t_j = jT/M`, `j = 0..=M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Grid(format!("horizon must be positive and finite, got {horizon}")));
        }
        if steps == 0 {
            return Err(Error::Grid("at least one step is required".into()));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of intervals `M`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of nodes, `M + 1`.
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.horizon / self.steps as f64
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(move |j| self.time(j))
    }

    /// Same horizon with a different number of steps.
    pub fn with_steps(&self, steps: usize) -> Result<Self> {
        Self::new(self.horizon, steps)
    }
}

/// The fourteen time-dependent coefficients of the game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Coefficient {
    A,
    B,
    Alpha,
    DriftOffset,
    C,
    D,
    Beta,
    Sigma,
    C0,
    D0,
    Beta0,
    Sigma0,
    Q,
    R,
}

impl Coefficient {
    pub const ALL: [Coefficient; 14] = [
        Coefficient::A,
        Coefficient::B,
        Coefficient::Alpha,
        Coefficient::DriftOffset,
        Coefficient::C,
        Coefficient::D,
        Coefficient::Beta,
        Coefficient::Sigma,
        Coefficient::C0,
        Coefficient::D0,
        Coefficient::Beta0,
        Coefficient::Sigma0,
        Coefficient::Q,
        Coefficient::R,
    ];

    /// Key used in scenario files and error messages.
    pub fn name(self) -> &'static str {
        match self {
            Coefficient::A => "A",
            Coefficient::B => "B",
            Coefficient::Alpha => "alpha",
            Coefficient::DriftOffset => "b",
            Coefficient::C => "C",
            Coefficient::D => "D",
            Coefficient::Beta => "beta",
            Coefficient::Sigma => "sigma",
            Coefficient::C0 => "C0",
            Coefficient::D0 => "D0",
            Coefficient::Beta0 => "beta0",
            Coefficient::Sigma0 => "sigma0",
            Coefficient::Q => "Q",
            Coefficient::R => "R",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }

    /// Expected shape for state dimension `n`, control dimension `k`, and
    /// the coefficient whose shape fixes the same dimensions.
    fn expected_shape(self, n: usize, k: usize) -> ((usize, usize), &'static str) {
        use Coefficient::*;
        match self {
            A | Alpha | C | Beta | C0 | Beta0 | Q => ((n, n), "state dimension n (shape of A)"),
            DriftOffset | Sigma | Sigma0 => ((n, 1), "state dimension n (shape of A)"),
            B | D | D0 => ((n, k), "control dimension k (shape of B)"),
            R => ((k, k), "control dimension k (shape of B)"),
        }
    }
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One matrix per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSchedule {
    values: Vec<DMatrix<f64>>,
}

impl CoefficientSchedule {
    pub fn constant(value: DMatrix<f64>, grid: &TimeGrid) -> Self {
        Self {
            values: vec![value; grid.len()],
        }
    }

    pub fn zeros(rows: usize, cols: usize, grid: &TimeGrid) -> Self {
        Self::constant(DMatrix::zeros(rows, cols), grid)
    }

    /// Scalar constant, for `n = k = 1` models.
    pub fn scalar(value: f64, grid: &TimeGrid) -> Self {
        Self::constant(DMatrix::from_element(1, 1, value), grid)
    }

    pub fn from_values(values: Vec<DMatrix<f64>>) -> Self {
        Self { values }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.first().map_or((0, 0), |m| m.shape())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value on the interval starting at node `j`.
    pub fn at(&self, j: usize) -> &DMatrix<f64> {
        &self.values[j]
    }

    pub fn values(&self) -> &[DMatrix<f64>] {
        &self.values
    }

    pub fn is_constant(&self) -> bool {
        self.values.windows(2).all(|w| w[0] == w[1])
    }
}

/// Unvalidated model ingredients. Missing schedules are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelData {
    pub n: usize,
    pub k: usize,
    pub grid: TimeGrid,
    pub schedules: BTreeMap<Coefficient, CoefficientSchedule>,
    pub terminal: DMatrix<f64>,
    pub initial_state: DVector<f64>,
    pub r_min: f64,
}

impl ModelData {
    pub fn new(n: usize, k: usize, grid: TimeGrid) -> Self {
        Self {
            n,
            k,
            grid,
            schedules: BTreeMap::new(),
            terminal: DMatrix::zeros(n, n),
            initial_state: DVector::zeros(n),
            r_min: DEFAULT_R_MIN,
        }
    }

    pub fn set(&mut self, coefficient: Coefficient, schedule: CoefficientSchedule) -> &mut Self {
        self.schedules.insert(coefficient, schedule);
        self
    }

    pub fn set_constant(&mut self, coefficient: Coefficient, value: DMatrix<f64>) -> &mut Self {
        let grid = self.grid;
        self.set(coefficient, CoefficientSchedule::constant(value, &grid))
    }

    pub fn with(mut self, coefficient: Coefficient, value: DMatrix<f64>) -> Self {
        self.set_constant(coefficient, value);
        self
    }

    /// Scalar shorthand for `n = k = 1` models.
    pub fn with_scalar(self, coefficient: Coefficient, value: f64) -> Self {
        self.with(coefficient, DMatrix::from_element(1, 1, value))
    }

    pub fn with_terminal(mut self, g: DMatrix<f64>) -> Self {
        self.terminal = g;
        self
    }

    pub fn with_initial_state(mut self, x0: DVector<f64>) -> Self {
        self.initial_state = x0;
        self
    }

    pub fn with_r_min(mut self, r_min: f64) -> Self {
        self.r_min = r_min;
        self
    }

    fn schedule(&self, c: Coefficient) -> CoefficientSchedule {
        self.schedules.get(&c).cloned().unwrap_or_else(|| {
            let ((r, cols), _) = c.expected_shape(self.n, self.k);
            CoefficientSchedule::zeros(r, cols, &self.grid)
        })
    }

    pub fn build(self) -> Result<LqMfgModel> {
        LqMfgModel::new(self)
    }
}

/// One named condition of a [`ValidationReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub condition: String,
    pub passed: bool,
    /// Node of the worst violation (or the worst value when passing).
    pub node: Option<usize>,
    /// Offending asymmetry or eigenvalue.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| match (c.node, c.value) {
                (Some(j), Some(v)) => format!("{} (node {j}, value {v:e})", c.condition),
                _ => c.condition.clone(),
            })
            .collect()
    }

    pub fn check(&self, condition: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.condition == condition)
    }
}

/// Checks shapes, finiteness, symmetry and definiteness.
///
/// Structural problems (wrong shapes, wrong schedule length, non-finite
/// entries) are errors; definiteness and symmetry go into the report.
pub fn validate(data: &ModelData) -> Result<ValidationReport> {
    let (n, k) = (data.n, data.k);
    if n == 0 || k == 0 {
        return Err(Error::Usage(format!("dimensions must be positive, got n = {n}, k = {k}")));
    }
    for c in Coefficient::ALL {
        let s = data.schedule(c);
        if s.len() != data.grid.len() {
            return Err(Error::ScheduleLength {
                name: c.name(),
                found: s.len(),
                expected: data.grid.len(),
            });
        }
        let (expected, reference) = c.expected_shape(n, k);
        for m in s.values() {
            if m.shape() != expected {
                return Err(Error::ShapeMismatch {
                    name: c.name(),
                    found: m.shape(),
                    expected,
                    reference,
                });
            }
        }
        for (node, m) in s.values().iter().enumerate() {
            if let Some(pos) = m.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    name: c.name(),
                    node,
                    row: pos % m.nrows(),
                    col: pos / m.nrows(),
                });
            }
        }
    }
    if data.terminal.shape() != (n, n) {
        return Err(Error::ShapeMismatch {
            name: "G",
            found: data.terminal.shape(),
            expected: (n, n),
            reference: "state dimension n (shape of A)",
        });
    }
    if let Some(pos) = data.terminal.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            name: "G",
            node: data.grid.steps(),
            row: pos % n,
            col: pos / n,
        });
    }
    if data.initial_state.len() != n {
        return Err(Error::ShapeMismatch {
            name: "x0",
            found: (data.initial_state.len(), 1),
            expected: (n, 1),
            reference: "state dimension n (shape of A)",
        });
    }
    if let Some(pos) = data.initial_state.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            name: "x0",
            node: 0,
            row: pos,
            col: 0,
        });
    }
    if !(data.r_min > 0.0) {
        return Err(Error::Usage(format!("r_min must be positive, got {}", data.r_min)));
    }

    let q = data.schedule(Coefficient::Q);
    let r = data.schedule(Coefficient::R);
    let g = std::slice::from_ref(&data.terminal);

    let checks = vec![
        symmetry_check("Q symmetric", q.values()),
        symmetry_check("R symmetric", r.values()),
        symmetry_check("G symmetric", g),
        eigen_check("Q positive semidefinite", q.values(), -TAU_PSD),
        eigen_check("G positive semidefinite", g, -TAU_PSD),
        eigen_check("R uniformly positive definite (R >> 0)", r.values(), data.r_min),
    ];
    Ok(ValidationReport { checks })
}

fn symmetry_check(condition: &str, values: &[DMatrix<f64>]) -> Check {
    let (node, worst) = values
        .iter()
        .map(linalg::max_asymmetry)
        .enumerate()
        .fold((0, 0.0f64), |acc, (j, v)| if v > acc.1 { (j, v) } else { acc });
    Check {
        condition: condition.into(),
        passed: worst <= TAU_SYM,
        node: Some(node),
        value: Some(worst),
    }
}

fn eigen_check(condition: &str, values: &[DMatrix<f64>], lower: f64) -> Check {
    let (node, lowest) = values
        .iter()
        .map(linalg::min_eigenvalue)
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (j, v)| if v < acc.1 { (j, v) } else { acc });
    Check {
        condition: condition.into(),
        passed: lowest >= lower,
        node: Some(node),
        value: Some(lowest),
    }
}

/// Validated game data. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct LqMfgModel {
    n: usize,
    k: usize,
    grid: TimeGrid,
    schedules: Vec<CoefficientSchedule>,
    terminal: DMatrix<f64>,
    initial_state: DVector<f64>,
    r_min: f64,
}

/// Borrowed view of every coefficient on one grid interval.
#[derive(Debug, Clone, Copy)]
pub struct Node<'a> {
    pub a: &'a DMatrix<f64>,
    pub b: &'a DMatrix<f64>,
    pub alpha: &'a DMatrix<f64>,
    pub drift_offset: &'a DMatrix<f64>,
    pub c: &'a DMatrix<f64>,
    pub d: &'a DMatrix<f64>,
    pub beta: &'a DMatrix<f64>,
    pub sigma: &'a DMatrix<f64>,
    pub c0: &'a DMatrix<f64>,
    pub d0: &'a DMatrix<f64>,
    pub beta0: &'a DMatrix<f64>,
    pub sigma0: &'a DMatrix<f64>,
    pub q: &'a DMatrix<f64>,
    pub r: &'a DMatrix<f64>,
}

impl LqMfgModel {
    /// Validates `data`; fails unless every check passes.
    pub fn new(data: ModelData) -> Result<Self> {
        let report = validate(&data)?;
        if !report.all_pass() {
            return Err(Error::Validation(report));
        }
        let schedules = Coefficient::ALL.iter().map(|&c| data.schedule(c)).collect();
        Ok(Self {
            n: data.n,
            k: data.k,
            grid: data.grid,
            schedules,
            terminal: data.terminal,
            initial_state: data.initial_state,
            r_min: data.r_min,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn control_dim(&self) -> usize {
        self.k
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn schedule(&self, c: Coefficient) -> &CoefficientSchedule {
        &self.schedules[c as usize]
    }

    pub fn terminal(&self) -> &DMatrix<f64> {
        &self.terminal
    }

    pub fn initial_state(&self) -> &DVector<f64> {
        &self.initial_state
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    /// Coefficients in force on `[t_j, t_{j+1})` (node `M` for `j = M`).
    pub fn node(&self, j: usize) -> Node<'_> {
        let s = |c: Coefficient| self.schedules[c as usize].at(j);
        Node {
            a: s(Coefficient::A),
            b: s(Coefficient::B),
            alpha: s(Coefficient::Alpha),
            drift_offset: s(Coefficient::DriftOffset),
            c: s(Coefficient::C),
            d: s(Coefficient::D),
            beta: s(Coefficient::Beta),
            sigma: s(Coefficient::Sigma),
            c0: s(Coefficient::C0),
            d0: s(Coefficient::D0),
            beta0: s(Coefficient::Beta0),
            sigma0: s(Coefficient::Sigma0),
            q: s(Coefficient::Q),
            r: s(Coefficient::R),
        }
    }

    /// Back to editable ingredients, e.g. to change one coefficient.
    pub fn to_data(&self) -> ModelData {
        let mut data = ModelData::new(self.n, self.k, self.grid);
        for c in Coefficient::ALL {
            data.set(c, self.schedule(c).clone());
        }
        data.terminal = self.terminal.clone();
        data.initial_state = self.initial_state.clone();
        data.r_min = self.r_min;
        data
    }

    /// Same model on a grid with `steps` intervals. Only constant schedules
    /// can be resampled.
    pub fn with_steps(&self, steps: usize) -> Result<Self> {
        let grid = self.grid.with_steps(steps)?;
        let mut data = ModelData::new(self.n, self.k, grid);
        for c in Coefficient::ALL {
            let s = self.schedule(c);
            if !s.is_constant() {
                return Err(Error::Usage(format!(
                    "cannot change the step count: schedule {c} is time-varying"
                )));
            }
            data.set(c, CoefficientSchedule::constant(s.at(0).clone(), &grid));
        }
        data.terminal = self.terminal.clone();
        data.initial_state = self.initial_state.clone();
        data.r_min = self.r_min;
        Self::new(data)
    }

    pub fn validate(&self) -> ValidationReport {
        validate(&self.to_data()).expect("a built model is structurally valid")
    }
}

/// Advisory sufficient condition for well-posedness of the consistency system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    /// `sup_t λ_max((A + Aᵀ)/2)`.
    pub lambda_star: f64,
    pub norm_alpha: f64,
    pub norm_c: f64,
    pub norm_c0: f64,
    pub norm_beta: f64,
    pub norm_beta0: f64,
    /// `4 λ*`.
    pub lhs: f64,
    /// `-2|α| - 6|C|² - 6|C₀|² - 5|β|² - 5|β₀|²`.
    pub rhs: f64,
    pub holds: bool,
}

/// Evaluates `4λ* < -2|α| - 6|C|² - 6|C₀|² - 5|β|² - 5|β₀|²` with operator
/// 2-norms taken as a supremum over the grid nodes.
pub fn wellposedness_diagnostic(model: &LqMfgModel) -> DiagnosticReport {
    let sup = |c: Coefficient, f: fn(&DMatrix<f64>) -> f64| {
        model
            .schedule(c)
            .values()
            .iter()
            .map(f)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let lambda_star = sup(Coefficient::A, linalg::max_eigenvalue);
    let norm_alpha = sup(Coefficient::Alpha, linalg::operator_norm);
    let norm_c = sup(Coefficient::C, linalg::operator_norm);
    let norm_c0 = sup(Coefficient::C0, linalg::operator_norm);
    let norm_beta = sup(Coefficient::Beta, linalg::operator_norm);
    let norm_beta0 = sup(Coefficient::Beta0, linalg::operator_norm);
    let lhs = 4.0 * lambda_star;
    let rhs = -2.0 * norm_alpha
        - 6.0 * norm_c.powi(2)
        - 6.0 * norm_c0.powi(2)
        - 5.0 * norm_beta.powi(2)
        - 5.0 * norm_beta0.powi(2);
    DiagnosticReport {
        lambda_star,
        norm_alpha,
        norm_c,
        norm_c0,
        norm_beta,
        norm_beta0,
        lhs,
        rhs,
        holds: lhs < rhs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn scalar_data(q: f64, r: f64, g: f64) -> ModelData {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        ModelData::new(1, 1, grid)
            .with_scalar(Coefficient::Q, q)
            .with_scalar(Coefficient::R, r)
            .with_terminal(DMatrix::from_element(1, 1, g))
    }

    #[test]
    fn grid_nodes() {
        let grid = TimeGrid::new(2.5, 7).unwrap();
        assert_eq!(grid.time(0), 0.0);
        assert_eq!(grid.time(7), 2.5);
        let t: Vec<f64> = grid.times().collect();
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        assert!(TimeGrid::new(0.0, 3).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
    }

    #[test]
    fn identity_weights_pass() {
        let report = validate(&scalar_data(1.0, 1.0, 0.0)).unwrap();
        assert!(report.all_pass(), "{report:?}");
    }

    #[test]
    fn zero_r_fails() {
        let report = validate(&scalar_data(1.0, 0.0, 0.0)).unwrap();
        assert!(!report.all_pass());
        let check = report.check("R uniformly positive definite (R >> 0)").unwrap();
        assert!(!check.passed);
        assert_eq!(check.value, Some(0.0));
        assert!(matches!(scalar_data(1.0, 0.0, 0.0).build(), Err(Error::Validation(_))));
    }

    #[test]
    fn asymmetric_q_and_indefinite_g_fail() {
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let data = ModelData::new(2, 1, grid)
            .with(Coefficient::Q, DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]))
            .with(Coefficient::R, DMatrix::identity(1, 1))
            .with_terminal(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]));
        let report = validate(&data).unwrap();
        assert!(!report.check("Q symmetric").unwrap().passed);
        let g = report.check("G positive semidefinite").unwrap();
        assert!(!g.passed);
        assert!((g.value.unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn structural_errors() {
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let data = ModelData::new(2, 1, grid)
            .with(Coefficient::A, DMatrix::zeros(3, 3))
            .with(Coefficient::R, DMatrix::identity(1, 1));
        match validate(&data) {
            Err(Error::ShapeMismatch { name, .. }) => assert_eq!(name, "A"),
            other => panic!("{other:?}"),
        }

        let mut data = scalar_data(1.0, 1.0, 0.0);
        let mut values = vec![DMatrix::from_element(1, 1, 0.0); 11];
        values[3][(0, 0)] = f64::NAN;
        data.set(Coefficient::C, CoefficientSchedule::from_values(values));
        match validate(&data) {
            Err(Error::NonFinite { name, node, .. }) => {
                assert_eq!(name, "C");
                assert_eq!(node, 3);
            }
            other => panic!("{other:?}"),
        }

        let mut data = scalar_data(1.0, 1.0, 0.0);
        data.set(Coefficient::A, CoefficientSchedule::from_values(vec![DMatrix::zeros(1, 1); 5]));
        assert!(matches!(validate(&data), Err(Error::ScheduleLength { .. })));
    }

    #[test]
    fn netsec_numeric_validates() {
        let model = presets::netsec_numeric(1000);
        assert!(model.validate().all_pass());
        assert_eq!(model.validate(), model.validate());
    }

    #[test]
    fn diagnostic_stable_drift_passes() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let model = ModelData::new(1, 1, grid)
            .with_scalar(Coefficient::A, -10.0)
            .with_scalar(Coefficient::R, 1.0)
            .build()
            .unwrap();
        let d = wellposedness_diagnostic(&model);
        assert_eq!(d.lambda_star, -10.0);
        assert_eq!(d.lhs, -40.0);
        assert_eq!(d.rhs, 0.0);
        assert!(d.holds);
    }

    #[test]
    fn diagnostic_mean_field_coupling_fails() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let model = ModelData::new(1, 1, grid)
            .with_scalar(Coefficient::Alpha, 1.0)
            .with_scalar(Coefficient::R, 1.0)
            .build()
            .unwrap();
        let d = wellposedness_diagnostic(&model);
        assert!(!d.holds);
        assert_eq!((d.lhs, d.rhs), (0.0, -2.0));
    }

    #[test]
    fn diagnostic_netsec_numeric() {
        let d = wellposedness_diagnostic(&presets::netsec_numeric(100));
        assert_eq!(d.lambda_star, 1.5);
        assert!((d.rhs - (-4.16)).abs() < 1e-12);
        assert_eq!(d.lhs, 6.0);
        assert!(!d.holds);
    }

    #[test]
    fn scalar_lambda_star_is_max_drift() {
        let grid = TimeGrid::new(1.0, 3).unwrap();
        let values = [0.3, -2.0, 1.7, 0.1]
            .iter()
            .map(|&v| DMatrix::from_element(1, 1, v))
            .collect();
        let mut data = scalar_data(0.0, 1.0, 0.0);
        data.grid = grid;
        data.schedules.clear();
        data.set(Coefficient::A, CoefficientSchedule::from_values(values));
        data.set(Coefficient::R, CoefficientSchedule::scalar(1.0, &grid));
        let model = data.build().unwrap();
        assert_eq!(wellposedness_diagnostic(&model).lambda_star, 1.7);
    }

    #[test]
    fn resampling_keeps_constants() {
        let model = presets::netsec_closed_form(100);
        let finer = model.with_steps(400).unwrap();
        assert_eq!(finer.grid().steps(), 400);
        assert_eq!(finer.node(17).a, model.node(3).a);
    }
}
