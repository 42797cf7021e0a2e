//! The coupled `N`-agent system under decentralized feedback, realized costs,
//! and the Monte-Carlo rate and deviation experiments.
//!
//! One sample integrates, on shared noise:
//!
//! - `m` on the common stream 0,
//! - for every agent `i` (stream `i + 1`): the filtered state `ẑᵢ` that feeds
//!   the control, the limiting state `z̄ᵢ` driven by `Wᵢ`, `W₀` and `m`, and
//!   the actual state `xᵢ` coupled through the current state average `x⁽ᴺ⁾`.
//!
//! Costs use the trapezoid rule on the grid plus the exact terminal term; the
//! central cost tracks `x⁽ᴺ⁾`, the limit cost tracks `m` along `z̄ᵢ`.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{sq_dist, ScalarNode, Tables};
use crate::meanfield::{self, diverged, unflatten, CommonNoiseCoupling, NoisePath};
use crate::model::{LqMfgModel, TimeGrid};
use crate::riccati::{build_feedback, solve, FeedbackLaw, RiccatiSolution, SolveOptions};
use crate::rng::{sample_seed, GaussianStream};
use crate::stats::{compensated_sum, fit_log_log, mean_and_stderr, LineFit};

/// Minimum sample count for experiments.
pub const MIN_SAMPLES: usize = 64;
/// Minimum number of population sizes in a rate ladder.
pub const MIN_LADDER: usize = 4;

/// A solved game: the model, its Riccati solution, the feedback law and the
/// deterministic mean path, ready for simulation.
#[derive(Debug, Clone)]
pub struct Equilibrium {
    model: LqMfgModel,
    solution: RiccatiSolution,
    law: FeedbackLaw,
    coupling: CommonNoiseCoupling,
    tables: Tables,
    /// Present for scalar models; drives the fast simulation loop.
    scalar: Option<Vec<ScalarNode>>,
    em: Vec<f64>,
}

impl Equilibrium {
    pub fn new(model: LqMfgModel, options: &SolveOptions, coupling: CommonNoiseCoupling) -> Result<Self> {
        let solution = solve(&model, options)?;
        Self::from_solution(model, solution, coupling)
    }

    pub fn from_solution(
        model: LqMfgModel,
        solution: RiccatiSolution,
        coupling: CommonNoiseCoupling,
    ) -> Result<Self> {
        let law = build_feedback(&model, &solution)?;
        let tables = Tables::new(&model, &law, coupling);
        let em = meanfield::em_flat(&tables, model.initial_state().as_slice())?;
        let scalar = tables.scalar_nodes();
        Ok(Self {
            model,
            solution,
            law,
            coupling,
            tables,
            scalar,
            em,
        })
    }

    pub fn model(&self) -> &LqMfgModel {
        &self.model
    }

    pub fn solution(&self) -> &RiccatiSolution {
        &self.solution
    }

    pub fn law(&self) -> &FeedbackLaw {
        &self.law
    }

    pub fn coupling(&self) -> CommonNoiseCoupling {
        self.coupling
    }

    pub fn em(&self) -> Vec<DVector<f64>> {
        unflatten(&self.em, self.tables.n)
    }

    /// `1 + sup_t |E[m(t)]|²`, the scale below which squared gaps count as zero.
    fn state_scale(&self) -> f64 {
        let n = self.tables.n;
        1.0 + self
            .em
            .chunks(n)
            .map(|v| v.iter().map(|x| x * x).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// An alternative feedback law for the deviating agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Candidate {
    /// The decentralized equilibrium law itself.
    Equilibrium,
    /// `θ·K_z ŷ + K_m E[m] + c_u`.
    ScaledGain(f64),
    /// `u ≡ 0`.
    ZeroControl,
    /// `K_z ŷ + K_m E[m] + c_u + v` in every control component.
    Offset(f64),
}

impl Candidate {
    /// Self, gain scalings `θ ∈ {0, 0.5, 0.8, 1.2, 1.5, 2}`, zero control and
    /// offsets `±offset`.
    pub fn default_family(offset: f64) -> Vec<Candidate> {
        let mut family = vec![Candidate::Equilibrium];
        family.extend([0.0, 0.5, 0.8, 1.2, 1.5, 2.0].map(Candidate::ScaledGain));
        family.push(Candidate::ZeroControl);
        family.push(Candidate::Offset(offset));
        family.push(Candidate::Offset(-offset));
        family
    }

    pub fn describe(&self) -> String {
        match self {
            Candidate::Equilibrium => "equilibrium".into(),
            Candidate::ScaledGain(theta) => format!("scaled gain theta={theta}"),
            Candidate::ZeroControl => "zero control".into(),
            Candidate::Offset(v) => format!("offset {v:+}"),
        }
    }

    fn policy(&self) -> Policy {
        match *self {
            Candidate::Equilibrium => Policy::EQUILIBRIUM,
            Candidate::ScaledGain(theta) => Policy {
                theta,
                ..Policy::EQUILIBRIUM
            },
            Candidate::ZeroControl => Policy {
                zero: true,
                ..Policy::EQUILIBRIUM
            },
            Candidate::Offset(offset) => Policy {
                offset,
                ..Policy::EQUILIBRIUM
            },
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Policy {
    theta: f64,
    offset: f64,
    zero: bool,
}

impl Policy {
    const EQUILIBRIUM: Policy = Policy {
        theta: 1.0,
        offset: 0.0,
        zero: false,
    };

    #[inline]
    fn control(&self, t: &Tables, j: usize, y: &[f64], em: &[f64], u: &mut [f64]) {
        if self.zero {
            u.fill(0.0);
        } else {
            t.control(j, self.theta, self.offset, y, em, u);
        }
    }
}

/// One Monte-Carlo draw of the coupled system.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSample {
    pub grid: TimeGrid,
    pub n_agents: usize,
    pub seed: u64,
    /// `x[i][j]`: state of agent `i` at node `j`.
    pub x: Vec<Vec<DVector<f64>>>,
    pub z_hat: Vec<Vec<DVector<f64>>>,
    pub z_bar: Vec<Vec<DVector<f64>>>,
    pub u: Vec<Vec<DVector<f64>>>,
    pub state_average: Vec<DVector<f64>>,
    pub m: Vec<DVector<f64>>,
    pub em: Vec<DVector<f64>>,
    pub j_central: Vec<f64>,
    pub j_limit: Vec<f64>,
}

/// Per-sample results that the experiments aggregate.
#[derive(Debug, Clone, PartialEq)]
struct Outcome {
    j_central: Vec<f64>,
    j_limit: Vec<f64>,
    /// `sup_t |x⁽ᴺ⁾ - m|²`.
    state_gap: f64,
    /// `sup_t |xᵢ - z̄ᵢ|²` per agent.
    agent_gap: Vec<f64>,
    /// `sup_t |(1/N)Σ z̄ᵢ - m|²`.
    filtered_gap: f64,
    paths: Option<Paths>,
}

/// Flat node-major trajectories, agents contiguous within a node.
#[derive(Debug, Clone, PartialEq)]
struct Paths {
    x: Vec<f64>,
    z_hat: Vec<f64>,
    z_bar: Vec<f64>,
    u: Vec<f64>,
    x_bar: Vec<f64>,
    m: Vec<f64>,
}

fn run(
    eq: &Equilibrium,
    streams: &[u64],
    seed: u64,
    deviator: Policy,
    record: bool,
) -> Result<Outcome> {
    if streams.is_empty() {
        return Err(Error::Usage("population needs at least one agent".into()));
    }
    if let (Some(nodes), false) = (&eq.scalar, record) {
        let noise = SampleNoise::draw(eq, streams, seed)?;
        return run_scalar(eq, nodes, &noise, streams.len(), deviator);
    }
    let t = &eq.tables;
    let (n, k, steps, h) = (t.n, t.k, t.steps, t.h);
    let agents = streams.len();
    let grid = eq.model.grid();
    let common = NoisePath::common(grid, seed);
    let m = meanfield::m_flat(t, &eq.em, common.increments())?;
    let mut gens: Vec<GaussianStream> = streams.iter().map(|&s| GaussianStream::new(seed, s)).collect();

    let x0 = eq.model.initial_state().as_slice();
    let fill = || x0.repeat(agents);
    let (mut x, mut z_hat, mut z_bar) = (fill(), fill(), fill());
    let (mut x_next, mut z_hat_next, mut z_bar_next) = (fill(), fill(), fill());
    let mut u = vec![0.0; agents * k];
    let mut x_bar = vec![0.0; n];
    let mut z_bar_mean = vec![0.0; n];
    let mut scratch = vec![0.0; n];

    let mut run_central = vec![0.0; agents];
    let mut run_limit = vec![0.0; agents];
    let mut agent_gap = vec![0.0f64; agents];
    let mut state_gap = 0.0f64;
    let mut filtered_gap = 0.0f64;
    let mut paths = record.then(|| Paths {
        x: Vec::with_capacity((steps + 1) * agents * n),
        z_hat: Vec::with_capacity((steps + 1) * agents * n),
        z_bar: Vec::with_capacity((steps + 1) * agents * n),
        u: Vec::with_capacity((steps + 1) * agents * k),
        x_bar: Vec::with_capacity((steps + 1) * n),
        m: m.clone(),
    });
    let inv_n = 1.0 / agents as f64;

    for j in 0..=steps {
        let em_j = &eq.em[j * n..(j + 1) * n];
        let m_j = &m[j * n..(j + 1) * n];
        average(&x, n, inv_n, &mut x_bar);
        average(&z_bar, n, inv_n, &mut z_bar_mean);
        state_gap = state_gap.max(sq_dist(&x_bar, m_j));
        filtered_gap = filtered_gap.max(sq_dist(&z_bar_mean, m_j));

        let weight = if j == 0 || j == steps { 0.5 * h } else { h };
        for i in 0..agents {
            let span = i * n..(i + 1) * n;
            let ui = &mut u[i * k..(i + 1) * k];
            let policy = if i == 0 { deviator } else { Policy::EQUILIBRIUM };
            policy.control(t, j, &z_hat[span.clone()], em_j, ui);
            run_central[i] += weight * t.running_cost(j, &x[span.clone()], &x_bar, ui, &mut scratch);
            run_limit[i] += weight * t.running_cost(j, &z_bar[span.clone()], m_j, ui, &mut scratch);
            agent_gap[i] = agent_gap[i].max(sq_dist(&x[span.clone()], &z_bar[span]));
        }
        if let Some(p) = paths.as_mut() {
            p.x.extend_from_slice(&x);
            p.z_hat.extend_from_slice(&z_hat);
            p.z_bar.extend_from_slice(&z_bar);
            p.u.extend_from_slice(&u);
            p.x_bar.extend_from_slice(&x_bar);
        }
        if j == steps {
            break;
        }

        let dw0 = common.increments()[j];
        let scale = h.sqrt();
        for (i, g) in gens.iter_mut().enumerate() {
            let dw = scale * g.next_standard();
            let span = i * n..(i + 1) * n;
            let ui = &u[i * k..(i + 1) * k];
            t.step(j, &z_hat[span.clone()], ui, em_j, Some(dw), None, &t.beta0, &mut scratch, &mut z_hat_next[span.clone()]);
            t.step(j, &z_bar[span.clone()], ui, m_j, Some(dw), Some(dw0), &t.beta0, &mut scratch, &mut z_bar_next[span.clone()]);
            t.step(j, &x[span.clone()], ui, &x_bar, Some(dw), Some(dw0), &t.beta0, &mut scratch, &mut x_next[span]);
        }
        std::mem::swap(&mut x, &mut x_next);
        std::mem::swap(&mut z_hat, &mut z_hat_next);
        std::mem::swap(&mut z_bar, &mut z_bar_next);
        if !x.iter().chain(&z_hat).chain(&z_bar).all(|v| v.is_finite()) {
            return Err(diverged("population", t, j + 1));
        }
    }

    let mut j_central = Vec::with_capacity(agents);
    let mut j_limit = Vec::with_capacity(agents);
    for i in 0..agents {
        let span = i * n..(i + 1) * n;
        j_central.push(0.5 * (run_central[i] + t.terminal_cost(&x[span.clone()])));
        j_limit.push(0.5 * (run_limit[i] + t.terminal_cost(&z_bar[span])));
    }
    Ok(Outcome {
        j_central,
        j_limit,
        state_gap,
        agent_gap,
        filtered_gap,
        paths,
    })
}

/// Noise of one sample: the common path, the resulting `m`, and every
/// individual increment stored node-major (`dw[j * agents + i]`).
struct SampleNoise {
    common: NoisePath,
    m: Vec<f64>,
    dw: Vec<f64>,
}

impl SampleNoise {
    fn draw(eq: &Equilibrium, streams: &[u64], seed: u64) -> Result<Self> {
        let t = &eq.tables;
        let common = NoisePath::common(eq.model.grid(), seed);
        let m = meanfield::m_flat(t, &eq.em, common.increments())?;
        let agents = streams.len();
        let scale = t.h.sqrt();
        let mut dw = vec![0.0; agents * t.steps];
        for (i, &s) in streams.iter().enumerate() {
            let mut g = GaussianStream::new(seed, s);
            for j in 0..t.steps {
                dw[j * agents + i] = scale * g.next_standard();
            }
        }
        Ok(Self { common, m, dw })
    }
}

/// [`run`] for scalar models, without trajectory recording. Produces the same
/// numbers as the generic loop.
fn run_scalar(eq: &Equilibrium, nodes: &[ScalarNode], noise: &SampleNoise, agents: usize, deviator: Policy) -> Result<Outcome> {
    let t = &eq.tables;
    let (steps, h) = (t.steps, t.h);
    let (common, m) = (&noise.common, &noise.m);
    let x0 = eq.model.initial_state()[0];
    let g = t.g[0];

    let mut x = vec![x0; agents];
    let mut z_hat = vec![x0; agents];
    let mut z_bar = vec![x0; agents];
    let mut run_central = vec![0.0; agents];
    let mut run_limit = vec![0.0; agents];
    let mut agent_gap = vec![0.0f64; agents];
    let mut state_gap = 0.0f64;
    let mut filtered_gap = 0.0f64;
    let inv_n = 1.0 / agents as f64;

    for j in 0..=steps {
        let node = &nodes[j];
        let (em_j, m_j) = (eq.em[j], m[j]);
        let x_bar = x.iter().fold(0.0, |acc, v| acc + v) * inv_n;
        let z_bar_mean = z_bar.iter().fold(0.0, |acc, v| acc + v) * inv_n;
        state_gap = state_gap.max((x_bar - m_j) * (x_bar - m_j));
        filtered_gap = filtered_gap.max((z_bar_mean - m_j) * (z_bar_mean - m_j));
        let weight = if j == 0 || j == steps { 0.5 * h } else { h };
        let last = j == steps;
        let dw0 = if last { 0.0 } else { common.increments()[j] };

        for i in 0..agents {
            let u = if i == 0 {
                if deviator.zero {
                    0.0
                } else {
                    node.control(deviator.theta, deviator.offset, z_hat[i], em_j)
                }
            } else {
                node.control(1.0, 0.0, z_hat[i], em_j)
            };
            let (xi, zh, zb) = (x[i], z_hat[i], z_bar[i]);
            run_central[i] += weight * node.running_cost(xi, x_bar, u);
            run_limit[i] += weight * node.running_cost(zb, m_j, u);
            agent_gap[i] = agent_gap[i].max((xi - zb) * (xi - zb));
            if last {
                continue;
            }
            let dw = noise.dw[j * agents + i];
            z_hat[i] = node.step_individual(h, zh, u, em_j, dw);
            z_bar[i] = node.step_both(h, zb, u, m_j, dw, dw0);
            x[i] = node.step_both(h, xi, u, x_bar, dw, dw0);
        }
        if !last && !x.iter().chain(&z_hat).chain(&z_bar).all(|v| v.is_finite()) {
            return Err(diverged("population", t, j + 1));
        }
    }

    let j_central = (0..agents).map(|i| 0.5 * (run_central[i] + x[i] * (g * x[i]))).collect();
    let j_limit = (0..agents).map(|i| 0.5 * (run_limit[i] + z_bar[i] * (g * z_bar[i]))).collect();
    Ok(Outcome {
        j_central,
        j_limit,
        state_gap,
        agent_gap,
        filtered_gap,
        paths: None,
    })
}

fn average(states: &[f64], n: usize, inv_n: f64, out: &mut [f64]) {
    out.fill(0.0);
    for chunk in states.chunks(n) {
        for (o, v) in out.iter_mut().zip(chunk) {
            *o += v;
        }
    }
    for o in out.iter_mut() {
        *o *= inv_n;
    }
}

fn default_streams(agents: usize) -> Vec<u64> {
    (1..=agents as u64).collect()
}

/// Simulates `n_agents` agents, agent `i` (0-based) on stream `i + 1`.
pub fn simulate_population(eq: &Equilibrium, n_agents: usize, seed: u64) -> Result<PopulationSample> {
    simulate_population_with_streams(eq, &default_streams(n_agents), seed)
}

/// Like [`simulate_population`] with explicit individual stream ids, one per
/// agent. Stream 0 is the common noise and may not be used here.
pub fn simulate_population_with_streams(eq: &Equilibrium, streams: &[u64], seed: u64) -> Result<PopulationSample> {
    if streams.contains(&crate::rng::COMMON_STREAM) {
        return Err(Error::Usage("stream 0 is reserved for the common noise".into()));
    }
    let out = run(eq, streams, seed, Policy::EQUILIBRIUM, true)?;
    let paths = out.paths.expect("recorded");
    let (n, k) = (eq.tables.n, eq.tables.k);
    let agents = streams.len();
    let per_agent = |flat: &[f64], dim: usize| -> Vec<Vec<DVector<f64>>> {
        (0..agents)
            .map(|i| {
                flat.chunks(agents * dim)
                    .map(|node| DVector::from_column_slice(&node[i * dim..(i + 1) * dim]))
                    .collect()
            })
            .collect()
    };
    Ok(PopulationSample {
        grid: *eq.model.grid(),
        n_agents: agents,
        seed,
        x: per_agent(&paths.x, n),
        z_hat: per_agent(&paths.z_hat, n),
        z_bar: per_agent(&paths.z_bar, n),
        u: per_agent(&paths.u, k),
        state_average: unflatten(&paths.x_bar, n),
        m: unflatten(&paths.m, n),
        em: eq.em(),
        j_central: out.j_central,
        j_limit: out.j_limit,
    })
}

/// Statistic-versus-`N` ladder with its log–log fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFitReport {
    pub statistic: String,
    pub ns: Vec<usize>,
    pub samples: usize,
    pub values: Vec<f64>,
    pub stderrs: Vec<f64>,
    /// `None` when every value is negligible and the slope is undefined.
    pub fit: Option<LineFit>,
    pub degenerate: bool,
}

impl RateFitReport {
    fn new(statistic: &str, ns: &[usize], samples: usize, values: Vec<f64>, stderrs: Vec<f64>, scale: f64) -> Self {
        let degenerate = values.iter().all(|&v| v <= 1e-12 * scale);
        let fit = (!degenerate).then(|| {
            let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
            fit_log_log(&x, &values)
        });
        Self {
            statistic: statistic.into(),
            ns: ns.to_vec(),
            samples,
            values,
            stderrs,
            fit,
            degenerate,
        }
    }

    pub fn slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }
}

/// All statistics of one rate ladder, computed on the same samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateExperiments {
    /// `E sup_t |x⁽ᴺ⁾ - m|²`.
    pub state: RateFitReport,
    /// `sup_i E sup_t |xᵢ - z̄ᵢ|²`.
    pub agent: RateFitReport,
    /// `E sup_t |(1/N)Σ z̄ᵢ - m|²`.
    pub filtered_mean: RateFitReport,
    /// `E (1/N)Σᵢ |𝒥ᵢ - Jᵢ|` on realized costs.
    pub cost: RateFitReport,
}

fn check_ladder(ns: &[usize], samples: usize) -> Result<()> {
    if ns.len() < MIN_LADDER {
        return Err(Error::Usage(format!(
            "rate experiments need at least {MIN_LADDER} population sizes, got {}",
            ns.len()
        )));
    }
    if ns[0] == 0 || ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Usage("population sizes must be positive and strictly increasing".into()));
    }
    check_samples(samples)
}

fn check_samples(samples: usize) -> Result<()> {
    if samples < MIN_SAMPLES {
        return Err(Error::Usage(format!("need at least {MIN_SAMPLES} samples, got {samples}")));
    }
    Ok(())
}

struct LadderPoint {
    state: Vec<f64>,
    filtered: Vec<f64>,
    cost: Vec<f64>,
    /// Per-agent gaps, one vector per sample.
    agent: Vec<Vec<f64>>,
    limit_cost: Vec<f64>,
}

/// Runs every `(N, s)` sample once and derives all rate statistics.
pub fn rate_experiments(eq: &Equilibrium, ns: &[usize], samples: usize, seed: u64) -> Result<RateExperiments> {
    check_ladder(ns, samples)?;
    let tasks: Vec<(usize, usize)> = ns.iter().flat_map(|&n| (0..samples).map(move |s| (n, s))).collect();
    let outcomes: Vec<Outcome> = tasks
        .par_iter()
        .map(|&(n, s)| run(eq, &default_streams(n), sample_seed(seed, n, s), Policy::EQUILIBRIUM, false))
        .collect::<Result<_>>()?;

    let points: Vec<LadderPoint> = outcomes
        .chunks(samples)
        .map(|chunk| LadderPoint {
            state: chunk.iter().map(|o| o.state_gap).collect(),
            filtered: chunk.iter().map(|o| o.filtered_gap).collect(),
            cost: chunk
                .iter()
                .map(|o| {
                    let diffs = o.j_central.iter().zip(&o.j_limit).map(|(a, b)| (a - b).abs());
                    compensated_sum(diffs) / o.j_central.len() as f64
                })
                .collect(),
            agent: chunk.iter().map(|o| o.agent_gap.clone()).collect(),
            limit_cost: chunk
                .iter()
                .map(|o| compensated_sum(o.j_limit.iter().copied()) / o.j_limit.len() as f64)
                .collect(),
        })
        .collect();

    let summarize = |f: &dyn Fn(&LadderPoint) -> &[f64]| -> (Vec<f64>, Vec<f64>) {
        points.iter().map(|p| mean_and_stderr(f(p))).unzip()
    };
    let (state_v, state_se) = summarize(&|p| &p.state);
    let (filt_v, filt_se) = summarize(&|p| &p.filtered);
    let (cost_v, cost_se) = summarize(&|p| &p.cost);
    let (limit_v, _) = summarize(&|p| &p.limit_cost);
    let (agent_v, agent_se): (Vec<f64>, Vec<f64>) = points
        .iter()
        .map(|p| {
            let agents = p.agent[0].len();
            (0..agents)
                .map(|i| mean_and_stderr(&p.agent.iter().map(|a| a[i]).collect::<Vec<_>>()))
                .fold((f64::NEG_INFINITY, 0.0), |best, cur| if cur.0 > best.0 { cur } else { best })
        })
        .unzip();

    let scale = eq.state_scale();
    let cost_scale = 1.0 + limit_v.iter().copied().fold(0.0, f64::max);
    Ok(RateExperiments {
        state: RateFitReport::new("E sup|x_avg - m|^2", ns, samples, state_v, state_se, scale),
        agent: RateFitReport::new("sup_i E sup|x_i - z_bar_i|^2", ns, samples, agent_v, agent_se, scale),
        filtered_mean: RateFitReport::new("E sup|avg z_bar - m|^2", ns, samples, filt_v, filt_se, scale),
        cost: RateFitReport::new("E mean_i |J_central_i - J_limit_i|", ns, samples, cost_v, cost_se, cost_scale),
    })
}

/// The `O(1/N)` state-average statistic.
pub fn rate_experiment_state(eq: &Equilibrium, ns: &[usize], samples: usize, seed: u64) -> Result<RateFitReport> {
    Ok(rate_experiments(eq, ns, samples, seed)?.state)
}

/// The `O(1/√N)` cost statistic.
pub fn rate_experiment_cost(eq: &Equilibrium, ns: &[usize], samples: usize, seed: u64) -> Result<RateFitReport> {
    Ok(rate_experiments(eq, ns, samples, seed)?.cost)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateOutcome {
    pub candidate: Candidate,
    pub description: String,
    /// Mean central cost of the deviating agent.
    pub cost: f64,
    pub cost_stderr: f64,
    /// `𝒥(ū) - 𝒥(candidate)` averaged over samples; positive means the
    /// deviation helped.
    pub gain: f64,
    pub gain_stderr: f64,
    /// Same on the limit cost `J`.
    pub limit_cost: f64,
    pub limit_cost_stderr: f64,
    pub limit_gain: f64,
    pub limit_gain_stderr: f64,
    /// Whether every per-sample gain was exactly zero.
    pub identical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub n_agents: usize,
    pub samples: usize,
    pub baseline_cost: f64,
    pub baseline_stderr: f64,
    pub baseline_limit_cost: f64,
    pub baseline_limit_stderr: f64,
    pub candidates: Vec<CandidateOutcome>,
    /// Largest mean central gain across candidates.
    pub max_gain: f64,
}

/// Agent 0 plays each candidate while the others keep the equilibrium law,
/// with the same noise for every candidate.
pub fn deviation_experiment(
    eq: &Equilibrium,
    n_agents: usize,
    samples: usize,
    candidates: &[Candidate],
    seed: u64,
) -> Result<DeviationReport> {
    if candidates.is_empty() {
        return Err(Error::Usage("deviation experiment needs at least one candidate".into()));
    }
    if n_agents == 0 {
        return Err(Error::Usage("population needs at least one agent".into()));
    }
    check_samples(samples)?;
    let streams = default_streams(n_agents);
    // Per sample: (central, limit) for the baseline followed by each candidate.
    let per_sample: Vec<Vec<(f64, f64)>> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let sseed = sample_seed(seed, n_agents, s);
            let policies = std::iter::once(Policy::EQUILIBRIUM).chain(candidates.iter().map(Candidate::policy));
            let costs = |o: Outcome| (o.j_central[0], o.j_limit[0]);
            match &eq.scalar {
                Some(nodes) => {
                    let noise = SampleNoise::draw(eq, &streams, sseed)?;
                    policies.map(|p| run_scalar(eq, nodes, &noise, n_agents, p).map(costs)).collect()
                }
                None => policies.map(|p| run(eq, &streams, sseed, p, false).map(costs)).collect(),
            }
        })
        .collect::<Result<_>>()?;

    let column = |c: usize, f: fn(&(f64, f64)) -> f64| -> Vec<f64> { per_sample.iter().map(|r| f(&r[c])).collect() };
    let central = |p: &(f64, f64)| p.0;
    let limit = |p: &(f64, f64)| p.1;
    let base_c = column(0, central);
    let base_l = column(0, limit);
    let (baseline_cost, baseline_stderr) = mean_and_stderr(&base_c);
    let (baseline_limit_cost, baseline_limit_stderr) = mean_and_stderr(&base_l);

    let outcomes: Vec<CandidateOutcome> = candidates
        .iter()
        .enumerate()
        .map(|(ci, cand)| {
            let cc = column(ci + 1, central);
            let cl = column(ci + 1, limit);
            let gains: Vec<f64> = base_c.iter().zip(&cc).map(|(b, c)| b - c).collect();
            let limit_gains: Vec<f64> = base_l.iter().zip(&cl).map(|(b, c)| b - c).collect();
            let (cost, cost_stderr) = mean_and_stderr(&cc);
            let (limit_cost, limit_cost_stderr) = mean_and_stderr(&cl);
            let (gain, gain_stderr) = mean_and_stderr(&gains);
            let (limit_gain, limit_gain_stderr) = mean_and_stderr(&limit_gains);
            CandidateOutcome {
                candidate: *cand,
                description: cand.describe(),
                cost,
                cost_stderr,
                gain,
                gain_stderr,
                limit_cost,
                limit_cost_stderr,
                limit_gain,
                limit_gain_stderr,
                identical: gains.iter().chain(&limit_gains).all(|&g| g == 0.0),
            }
        })
        .collect();
    let max_gain = outcomes.iter().map(|o| o.gain).fold(f64::NEG_INFINITY, f64::max);
    Ok(DeviationReport {
        n_agents,
        samples,
        baseline_cost,
        baseline_stderr,
        baseline_limit_cost,
        baseline_limit_stderr,
        candidates: outcomes,
        max_gain,
    })
}

/// Deviation reports over increasing `N` and a log–log fit of the positive
/// part of the maximum gain (absent when some maximum gain is not positive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationLadder {
    pub reports: Vec<DeviationReport>,
    pub fit: Option<LineFit>,
}

pub fn deviation_ladder(
    eq: &Equilibrium,
    ns: &[usize],
    samples: usize,
    candidates: &[Candidate],
    seed: u64,
) -> Result<DeviationLadder> {
    check_ladder(ns, samples)?;
    let reports = ns
        .iter()
        .map(|&n| deviation_experiment(eq, n, samples, candidates, seed))
        .collect::<Result<Vec<_>>>()?;
    let gains: Vec<f64> = reports.iter().map(|r| r.max_gain).collect();
    let fit = gains.iter().all(|&g| g > 0.0).then(|| {
        let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
        fit_log_log(&x, &gains)
    });
    Ok(DeviationLadder { reports, fit })
}
