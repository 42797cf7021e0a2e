//! Backward Riccati system for the decentralized feedback law.
//!
//! With `S = PB + CᵀPD + C₀ᵀPD₀` and `Σ = R + DᵀPD + D₀ᵀPD₀`:
//!
//! ```text
//! Ṗ + PA + AᵀP + CᵀPC + C₀ᵀPC₀ + Q - S Σ⁻¹ Sᵀ = 0,                     P(T) = G
//! Γ̇ + Γ(A - BK) + (A - BK)ᵀΓ - ΓBΣ⁻¹W + CᵀPβ + C₀ᵀPβ₀ - SΣ⁻¹W
//!    + (P + Γ)α - ΓBΣ⁻¹BᵀΓ - Q = 0,                                      Γ(T) = 0
//! Φ̇ + (Aᵀ - LΣ⁻¹Bᵀ)Φ + (Cᵀ - LΣ⁻¹Dᵀ)Pσ + (C₀ᵀ - LΣ⁻¹D₀ᵀ)Pσ₀
//!    + (P + Γ)b = 0,                                                     Φ(T) = 0
//! ```
//!
//! where `K = Σ⁻¹Sᵀ`, `W = DᵀPβ + D₀ᵀPβ₀` and `L = S + ΓB`.
//!
//! Every equation is integrated backward with classical RK4 on the model grid.
//! Coefficients use the left-node value on each interval. Known node sequences
//! (`P` when solving for `Γ`, `P` and `Γ` when solving for `Φ`) are evaluated
//! at interval midpoints by four-point cubic interpolation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, frobenius_distance, min_eigenvalue, spd_solve, symmetrize};
use crate::model::{LqMfgModel, Node, TimeGrid, TAU_PSD};

/// Defaults for [`solve_p_iterative`].
pub const DEFAULT_MAX_ITERS: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub grid: TimeGrid,
    pub p: Vec<DMatrix<f64>>,
    pub gamma: Vec<DMatrix<f64>>,
    pub phi: Vec<DVector<f64>>,
    /// `Σ(t_j) = R + DᵀPD + D₀ᵀPD₀`.
    pub sigma: Vec<DMatrix<f64>>,
}

/// `ū(t) = K_z ẑ(t) + K_m E[m(t)] + c_u`, one entry per node.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackLaw {
    pub grid: TimeGrid,
    pub k_z: Vec<DMatrix<f64>>,
    pub k_m: Vec<DMatrix<f64>>,
    pub c_u: Vec<DVector<f64>>,
}

impl FeedbackLaw {
    /// Decentralized control at node `j`.
    pub fn control(&self, j: usize, z_hat: &DVector<f64>, em: &DVector<f64>) -> DVector<f64> {
        &self.k_z[j] * z_hat + &self.k_m[j] * em + &self.c_u[j]
    }

    /// `E[ū(t_j)]` given `E[m(t_j)]`.
    pub fn mean_control(&self, j: usize, em: &DVector<f64>) -> DVector<f64> {
        (&self.k_z[j] + &self.k_m[j]) * em + &self.c_u[j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PMethod {
    #[default]
    Direct,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GammaMethod {
    #[default]
    Direct,
    PiTransform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub p_method: PMethod,
    pub gamma_method: GammaMethod,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            p_method: PMethod::Direct,
            gamma_method: GammaMethod::Direct,
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
        }
    }
}

/// Per-node outcome of the `Π`-transform solvability condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiConditionReport {
    /// Min eigenvalue of `-CᵀPDΣ⁻¹D₀ᵀPC₀ - C₀ᵀPD₀Σ⁻¹DᵀPC` per node.
    pub min_eigenvalues: Vec<f64>,
    pub passed: Vec<bool>,
}

impl PiConditionReport {
    pub fn holds(&self) -> bool {
        self.passed.iter().all(|&p| p)
    }
}

/// Solves the full system and assembles `Σ` at the nodes.
pub fn solve(model: &LqMfgModel, options: &SolveOptions) -> Result<RiccatiSolution> {
    let p = match options.p_method {
        PMethod::Direct => solve_p_direct(model)?,
        PMethod::Iterative => solve_p_iterative(model, options.max_iters, options.tol)?.0,
    };
    let gamma = match options.gamma_method {
        GammaMethod::Direct => solve_gamma_direct(model, &p)?,
        GammaMethod::PiTransform => solve_gamma_via_pi(model, &p)?.0,
    };
    let phi = solve_phi(model, &p, &gamma)?;
    let sigma = sigma_nodes(model, &p)?;
    Ok(RiccatiSolution {
        grid: *model.grid(),
        p,
        gamma,
        phi,
        sigma,
    })
}

/// `Σ(t_j)` for every node of `p`.
pub fn sigma_nodes(model: &LqMfgModel, p: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
    p.iter()
        .enumerate()
        .map(|(j, pj)| {
            let node = model.node(j);
            let sigma = sigma_of(&node, pj);
            let lambda = min_eigenvalue(&sigma);
            if !(lambda >= model.r_min()) {
                return Err(Error::Singular {
                    time: model.grid().time(j),
                    min_eigenvalue: lambda,
                    r_min: model.r_min(),
                });
            }
            Ok(sigma)
        })
        .collect()
}

fn sigma_of(node: &Node<'_>, p: &DMatrix<f64>) -> DMatrix<f64> {
    node.r + node.d.transpose() * p * node.d + node.d0.transpose() * p * node.d0
}

/// Quantities shared by every equation at one evaluation point.
struct Gains {
    /// `PB + CᵀPD + C₀ᵀPD₀`, n×k.
    s: DMatrix<f64>,
    sigma: DMatrix<f64>,
    /// `Σ⁻¹Sᵀ`, k×n.
    k: DMatrix<f64>,
}

fn gains(node: &Node<'_>, p: &DMatrix<f64>, r_min: f64, time: f64) -> Result<Gains> {
    let s = p * node.b + node.c.transpose() * p * node.d + node.c0.transpose() * p * node.d0;
    let sigma = sigma_of(node, p);
    let k = solve_sigma(&sigma, &s.transpose(), r_min, time)?;
    Ok(Gains { s, sigma, k })
}

fn solve_sigma(sigma: &DMatrix<f64>, rhs: &DMatrix<f64>, r_min: f64, time: f64) -> Result<DMatrix<f64>> {
    spd_solve(sigma, rhs, r_min).map_err(|min_eigenvalue| Error::Singular {
        time,
        min_eigenvalue,
        r_min,
    })
}

/// Where inside interval `[t_j, t_{j+1}]` an RK4 stage is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Point {
    Right,
    Mid,
    Left,
}

impl Point {
    fn time(self, grid: &TimeGrid, j: usize) -> f64 {
        match self {
            Point::Right => grid.time(j + 1),
            Point::Mid => grid.time(j) + 0.5 * grid.step(),
            Point::Left => grid.time(j),
        }
    }
}

/// Node values of a known solution plus cubic midpoint values.
struct Track<'a> {
    nodes: &'a [DMatrix<f64>],
    mids: Vec<DMatrix<f64>>,
}

impl<'a> Track<'a> {
    fn new(nodes: &'a [DMatrix<f64>]) -> Self {
        let mids = (0..nodes.len().saturating_sub(1))
            .map(|j| cubic_midpoint(nodes, j))
            .collect();
        Self { nodes, mids }
    }

    fn at(&self, j: usize, point: Point) -> &DMatrix<f64> {
        match point {
            Point::Right => &self.nodes[j + 1],
            Point::Mid => &self.mids[j],
            Point::Left => &self.nodes[j],
        }
    }
}

/// Value halfway between nodes `j` and `j + 1` from the cubic through four
/// neighbouring nodes (one-sided stencils at the ends).
fn cubic_midpoint(nodes: &[DMatrix<f64>], j: usize) -> DMatrix<f64> {
    let len = nodes.len();
    if len < 4 {
        return (&nodes[j] + &nodes[j + 1]) * 0.5;
    }
    let (start, w) = if j == 0 {
        (0, [5.0, 15.0, -5.0, 1.0])
    } else if j + 2 >= len {
        (len - 4, [1.0, -5.0, 15.0, 5.0])
    } else {
        (j - 1, [-1.0, 9.0, 9.0, -1.0])
    };
    let mut out = &nodes[start] * (w[0] / 16.0);
    for (i, wi) in w.iter().enumerate().skip(1) {
        out += &nodes[start + i] * (wi / 16.0);
    }
    out
}

fn to_columns(vs: &[DVector<f64>]) -> Vec<DMatrix<f64>> {
    vs.iter().map(|v| DMatrix::from_column_slice(v.len(), 1, v.as_slice())).collect()
}

/// Classical RK4 in reversed time `s = T - t`. `rate(j, point, y)` returns
/// `dy/ds = -dy/dt` on interval `j`.
fn rk4_backward<F>(
    grid: &TimeGrid,
    terminal: DMatrix<f64>,
    what: &'static str,
    symmetric: bool,
    psd: bool,
    mut rate: F,
) -> Result<Vec<DMatrix<f64>>>
where
    F: FnMut(usize, Point, &DMatrix<f64>) -> Result<DMatrix<f64>>,
{
    let h = grid.step();
    let m = grid.steps();
    let fix = |mut y: DMatrix<f64>| {
        if symmetric {
            symmetrize(&mut y);
        }
        y
    };
    let mut out = vec![DMatrix::zeros(0, 0); m + 1];
    out[m] = terminal;
    for j in (0..m).rev() {
        let y = &out[j + 1];
        let k1 = rate(j, Point::Right, y)?;
        let k2 = rate(j, Point::Mid, &fix(y + &k1 * (0.5 * h)))?;
        let k3 = rate(j, Point::Mid, &fix(y + &k2 * (0.5 * h)))?;
        let k4 = rate(j, Point::Left, &fix(y + &k3 * h))?;
        let next = fix(y + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0));
        if !linalg::is_finite(&next) {
            return Err(Error::Divergence {
                what,
                node: j,
                time: grid.time(j),
                detail: "non-finite value".into(),
            });
        }
        if psd {
            let lambda = min_eigenvalue(&next);
            if lambda < -TAU_PSD {
                return Err(Error::Divergence {
                    what,
                    node: j,
                    time: grid.time(j),
                    detail: format!("lost positive semidefiniteness, min eigenvalue {lambda:e}"),
                });
            }
        }
        out[j] = next;
    }
    Ok(out)
}

/// `-Ṗ` for the nonlinear Riccati equation.
fn p_rate(node: &Node<'_>, p: &DMatrix<f64>, r_min: f64, time: f64) -> Result<DMatrix<f64>> {
    let g = gains(node, p, r_min, time)?;
    let (a, c, c0) = (node.a, node.c, node.c0);
    Ok(p * a + a.transpose() * p + c.transpose() * p * c + c0.transpose() * p * c0 + node.q
        - &g.s * &g.k)
}

/// `dP/dt` at node `j`.
pub fn p_derivative(model: &LqMfgModel, j: usize, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(-p_rate(&model.node(j), p, model.r_min(), model.grid().time(j))?)
}

/// Integrates the nonlinear `P` equation directly, symmetrizing every stage.
pub fn solve_p_direct(model: &LqMfgModel) -> Result<Vec<DMatrix<f64>>> {
    let grid = *model.grid();
    rk4_backward(&grid, model.terminal().clone(), "P", true, true, |j, point, p| {
        p_rate(&model.node(j), p, model.r_min(), point.time(&grid, j))
    })
}

/// Closed-loop coefficients of one Lyapunov step.
struct Lyapunov {
    a: DMatrix<f64>,
    c: DMatrix<f64>,
    c0: DMatrix<f64>,
    q: DMatrix<f64>,
}

impl Lyapunov {
    fn open_loop(node: &Node<'_>) -> Self {
        Self {
            a: node.a.clone(),
            c: node.c.clone(),
            c0: node.c0.clone(),
            q: node.q.clone(),
        }
    }

    /// `Ψ = Σ(Pᵢ)⁻¹(PᵢB + CᵀPᵢD + C₀ᵀPᵢD₀)ᵀ`, `Â = A - BΨ`, `Ĉ = C - DΨ`,
    /// `Ĉ₀ = C₀ - D₀Ψ`, `Q̂ = Q + ΨᵀRΨ`.
    fn closed_loop(node: &Node<'_>, p_prev: &DMatrix<f64>, r_min: f64, time: f64) -> Result<Self> {
        let psi = gains(node, p_prev, r_min, time)?.k;
        Ok(Self {
            a: node.a - node.b * &psi,
            c: node.c - node.d * &psi,
            c0: node.c0 - node.d0 * &psi,
            q: node.q + psi.transpose() * node.r * &psi,
        })
    }

    fn rate(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        p * &self.a
            + self.a.transpose() * p
            + self.c.transpose() * p * &self.c
            + self.c0.transpose() * p * &self.c0
            + &self.q
    }
}

fn lyapunov_solve(model: &LqMfgModel, previous: Option<&[DMatrix<f64>]>) -> Result<Vec<DMatrix<f64>>> {
    let grid = *model.grid();
    let track = previous.map(Track::new);
    rk4_backward(&grid, model.terminal().clone(), "P_i", true, true, |j, point, p| {
        let node = model.node(j);
        let coeffs = match &track {
            None => Lyapunov::open_loop(&node),
            Some(t) => Lyapunov::closed_loop(&node, t.at(j, point), model.r_min(), point.time(&grid, j))?,
        };
        Ok(coeffs.rate(p))
    })
}

/// Monotone iteration: `P₀` from the open-loop Lyapunov equation, then
/// `P_{i+1}` from the Lyapunov equation closed with the gain of `Pᵢ`.
///
/// Returns the last iterate and the number of Lyapunov re-solves performed.
pub fn solve_p_iterative(
    model: &LqMfgModel,
    max_iters: usize,
    tol: f64,
) -> Result<(Vec<DMatrix<f64>>, usize)> {
    iterate_p(model, max_iters, tol, |_| {})
}

/// Like [`solve_p_iterative`], also returning every iterate `P₀, P₁, …`.
pub fn solve_p_iterative_history(
    model: &LqMfgModel,
    max_iters: usize,
    tol: f64,
) -> Result<(Vec<Vec<DMatrix<f64>>>, usize)> {
    let mut history = Vec::new();
    let (_, iters) = iterate_p(model, max_iters, tol, |p| history.push(p.to_vec()))?;
    Ok((history, iters))
}

fn iterate_p<F>(model: &LqMfgModel, max_iters: usize, tol: f64, mut observe: F) -> Result<(Vec<DMatrix<f64>>, usize)>
where
    F: FnMut(&[DMatrix<f64>]),
{
    if max_iters == 0 || !(tol > 0.0) {
        return Err(Error::Usage("max_iters and tol must be positive".into()));
    }
    let mut current = lyapunov_solve(model, None)?;
    observe(&current);
    let mut residual = f64::INFINITY;
    for iteration in 1..=max_iters {
        let next = lyapunov_solve(model, Some(&current))?;
        observe(&next);
        residual = 0.0;
        for (node, (pi, pn)) in current.iter().zip(&next).enumerate() {
            let lambda = min_eigenvalue(&(pi - pn));
            if lambda < -TAU_PSD {
                return Err(Error::NotMonotone {
                    iteration,
                    node,
                    min_eigenvalue: lambda,
                });
            }
            residual = residual.max(frobenius_distance(pi, pn));
        }
        current = next;
        if residual < tol {
            return Ok((current, iteration));
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iters,
        residual,
    })
}

fn gamma_rate(
    node: &Node<'_>,
    p: &DMatrix<f64>,
    gamma: &DMatrix<f64>,
    r_min: f64,
    time: f64,
) -> Result<DMatrix<f64>> {
    let g = gains(node, p, r_min, time)?;
    let (a, b) = (node.a, node.b);
    let w = node.d.transpose() * p * node.beta + node.d0.transpose() * p * node.beta0;
    let sigma_inv_w = solve_sigma(&g.sigma, &w, r_min, time)?;
    let sigma_inv_bt = solve_sigma(&g.sigma, &b.transpose(), r_min, time)?;
    let closed = a - b * &g.k;
    let gamma_b = gamma * b;
    Ok(gamma * &closed + closed.transpose() * gamma
        - &gamma_b * &sigma_inv_w
        + node.c.transpose() * p * node.beta
        + node.c0.transpose() * p * node.beta0
        - &g.s * &sigma_inv_w
        + (p + gamma) * node.alpha
        - &gamma_b * sigma_inv_bt * gamma
        - node.q)
}

/// `dΓ/dt` at node `j`.
pub fn gamma_derivative(
    model: &LqMfgModel,
    j: usize,
    p: &DMatrix<f64>,
    gamma: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    Ok(-gamma_rate(&model.node(j), p, gamma, model.r_min(), model.grid().time(j))?)
}

/// Integrates the (non-symmetric) `Γ` equation for a given `P`.
pub fn solve_gamma_direct(model: &LqMfgModel, p: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
    check_track(model, p.len(), "P")?;
    let grid = *model.grid();
    let n = model.state_dim();
    let track = Track::new(p);
    rk4_backward(&grid, DMatrix::zeros(n, n), "Gamma", false, false, |j, point, gamma| {
        gamma_rate(&model.node(j), track.at(j, point), gamma, model.r_min(), point.time(&grid, j))
    })
}

/// Checks `α ≡ δI` for one scalar `δ` and `β ≡ β₀ ≡ 0`.
pub fn pi_transform_delta(model: &LqMfgModel) -> Result<f64> {
    use crate::model::Coefficient;
    let n = model.state_dim();
    let delta = model.schedule(Coefficient::Alpha).at(0)[(0, 0)];
    let scalar = DMatrix::identity(n, n) * delta;
    if model.schedule(Coefficient::Alpha).values().iter().any(|a| *a != scalar) {
        return Err(Error::Usage(
            "Π-transform requires alpha(t) = δ·I with one constant δ".into(),
        ));
    }
    for c in [Coefficient::Beta, Coefficient::Beta0] {
        if model.schedule(c).values().iter().any(|m| m.iter().any(|&v| v != 0.0)) {
            return Err(Error::Usage(format!("Π-transform requires {c} = 0")));
        }
    }
    Ok(delta)
}

fn pi_condition_matrix(node: &Node<'_>, p: &DMatrix<f64>, sigma: &DMatrix<f64>, r_min: f64, time: f64) -> Result<DMatrix<f64>> {
    let (c, c0, d, d0) = (node.c, node.c0, node.d, node.d0);
    let dt_p_c = d.transpose() * p * c;
    let d0t_p_c0 = d0.transpose() * p * c0;
    let x = solve_sigma(sigma, &d0t_p_c0, r_min, time)?;
    let y = solve_sigma(sigma, &dt_p_c, r_min, time)?;
    Ok(-(c.transpose() * p * d * x) - c0.transpose() * p * d0 * y)
}

fn pi_rate(
    node: &Node<'_>,
    delta: f64,
    p: &DMatrix<f64>,
    pi: &DMatrix<f64>,
    r_min: f64,
    time: f64,
) -> Result<DMatrix<f64>> {
    let sigma = sigma_of(node, p);
    let (a, b, c, c0, d, d0) = (node.a, node.b, node.c, node.c0, node.d, node.d0);
    let e = d.transpose() * p * c + d0.transpose() * p * c0;
    let shifted = a - b * solve_sigma(&sigma, &e, r_min, time)?;
    let p_d = p * d;
    let p_d0 = p * d0;
    let inner = p - &p_d * solve_sigma(&sigma, &p_d.transpose(), r_min, time)?;
    let inner0 = p - &p_d0 * solve_sigma(&sigma, &p_d0.transpose(), r_min, time)?;
    let cross = pi_condition_matrix(node, p, &sigma, r_min, time)?;
    let sigma_inv_bt = solve_sigma(&sigma, &b.transpose(), r_min, time)?;
    Ok(pi * &shifted + shifted.transpose() * pi + pi * delta
        + c.transpose() * inner * c
        + c0.transpose() * inner0 * c0
        + cross
        - pi * b * sigma_inv_bt * pi)
}

/// Solves `Γ` through `Π = P + Γ`, which obeys a symmetric Riccati equation
/// when `α = δI` and `β = β₀ = 0`.
pub fn solve_gamma_via_pi(
    model: &LqMfgModel,
    p: &[DMatrix<f64>],
) -> Result<(Vec<DMatrix<f64>>, PiConditionReport)> {
    check_track(model, p.len(), "P")?;
    let delta = pi_transform_delta(model)?;
    let grid = *model.grid();
    let r_min = model.r_min();

    let mut min_eigenvalues = Vec::with_capacity(p.len());
    for (j, pj) in p.iter().enumerate() {
        let node = model.node(j);
        let sigma = sigma_of(&node, pj);
        let cond = pi_condition_matrix(&node, pj, &sigma, r_min, grid.time(j))?;
        min_eigenvalues.push(min_eigenvalue(&cond));
    }
    let passed = min_eigenvalues.iter().map(|&l| l >= -TAU_PSD).collect();
    let report = PiConditionReport { min_eigenvalues, passed };

    let track = Track::new(p);
    let pi = rk4_backward(&grid, model.terminal().clone(), "Pi", true, true, |j, point, pi| {
        pi_rate(&model.node(j), delta, track.at(j, point), pi, r_min, point.time(&grid, j))
    })?;
    let gamma = pi.iter().zip(p).map(|(pi, p)| pi - p).collect();
    Ok((gamma, report))
}

fn phi_rate(
    node: &Node<'_>,
    p: &DMatrix<f64>,
    gamma: &DMatrix<f64>,
    phi: &DMatrix<f64>,
    r_min: f64,
    time: f64,
) -> Result<DMatrix<f64>> {
    let g = gains(node, p, r_min, time)?;
    let (b, d, d0) = (node.b, node.d, node.d0);
    let l = &g.s + gamma * b;
    let sib = solve_sigma(&g.sigma, &b.transpose(), r_min, time)?;
    let sid = solve_sigma(&g.sigma, &d.transpose(), r_min, time)?;
    let sid0 = solve_sigma(&g.sigma, &d0.transpose(), r_min, time)?;
    Ok((node.a.transpose() - &l * sib) * phi
        + (node.c.transpose() - &l * sid) * p * node.sigma
        + (node.c0.transpose() - &l * sid0) * p * node.sigma0
        + (p + gamma) * node.drift_offset)
}

/// `dΦ/dt` at node `j`.
pub fn phi_derivative(
    model: &LqMfgModel,
    j: usize,
    p: &DMatrix<f64>,
    gamma: &DMatrix<f64>,
    phi: &DVector<f64>,
) -> Result<DVector<f64>> {
    let phi = DMatrix::from_column_slice(phi.len(), 1, phi.as_slice());
    let rate = phi_rate(&model.node(j), p, gamma, &phi, model.r_min(), model.grid().time(j))?;
    Ok(-DVector::from_column_slice(rate.as_slice()))
}

/// Integrates the linear `Φ` equation for given `P` and `Γ`.
pub fn solve_phi(
    model: &LqMfgModel,
    p: &[DMatrix<f64>],
    gamma: &[DMatrix<f64>],
) -> Result<Vec<DVector<f64>>> {
    check_track(model, p.len(), "P")?;
    check_track(model, gamma.len(), "Gamma")?;
    let grid = *model.grid();
    let n = model.state_dim();
    let pt = Track::new(p);
    let gt = Track::new(gamma);
    let phi = rk4_backward(&grid, DMatrix::zeros(n, 1), "Phi", false, false, |j, point, phi| {
        phi_rate(
            &model.node(j),
            pt.at(j, point),
            gt.at(j, point),
            phi,
            model.r_min(),
            point.time(&grid, j),
        )
    })?;
    Ok(phi.into_iter().map(|m| DVector::from_column_slice(m.as_slice())).collect())
}

fn check_track(model: &LqMfgModel, len: usize, name: &str) -> Result<()> {
    if len != model.grid().len() {
        return Err(Error::Usage(format!(
            "{name} has {len} nodes, the model grid has {}",
            model.grid().len()
        )));
    }
    Ok(())
}

/// Feedback gains at every node.
pub fn build_feedback(model: &LqMfgModel, sol: &RiccatiSolution) -> Result<FeedbackLaw> {
    let grid = *model.grid();
    let len = grid.len();
    let mut k_z = Vec::with_capacity(len);
    let mut k_m = Vec::with_capacity(len);
    let mut c_u = Vec::with_capacity(len);
    let phi = to_columns(&sol.phi);
    for j in 0..len {
        let node = model.node(j);
        let p = &sol.p[j];
        let time = grid.time(j);
        let r_min = model.r_min();
        let sigma = &sol.sigma[j];
        let bt = node.b.transpose();
        let dt = node.d.transpose();
        let d0t = node.d0.transpose();
        let on_state = &bt * p + &dt * p * node.c + &d0t * p * node.c0;
        let on_mean = &bt * &sol.gamma[j] + &dt * p * node.beta + &d0t * p * node.beta0;
        let offset = &bt * &phi[j] + &dt * p * node.sigma + &d0t * p * node.sigma0;
        k_z.push(-solve_sigma(sigma, &on_state, r_min, time)?);
        k_m.push(-solve_sigma(sigma, &on_mean, r_min, time)?);
        let c = -solve_sigma(sigma, &offset, r_min, time)?;
        c_u.push(DVector::from_column_slice(c.as_slice()));
    }
    Ok(FeedbackLaw { grid, k_z, k_m, c_u })
}
