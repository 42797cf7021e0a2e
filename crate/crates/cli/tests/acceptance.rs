//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits nonzero when any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use lqmfg::linalg::{frobenius_distance, min_eigenvalue};
use lqmfg::model::{Coefficient as C, ModelData, TimeGrid};
use lqmfg::presets::{closed_form_p, closed_form_pi, netsec_closed_form, netsec_numeric};
use lqmfg::riccati::{self, solve_p_iterative_history, DEFAULT_MAX_ITERS, DEFAULT_TOL};
use lqmfg::{
    deviation_experiment, rate_experiments, Candidate, CommonNoiseCoupling, Equilibrium,
    LqMfgModel, RateExperiments, SolveOptions,
};
use lqmfg_cli::{preset, ExperimentKind, GammaChoice, PChoice, ScenarioConfig};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LADDER: [usize; 6] = [25, 50, 100, 200, 400, 800];
const SAMPLES: usize = 256;
const SEED: u64 = 20240;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

// ---------------------------------------------------------------------------
// Random models

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..=1.0))
}

fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let l = uniform(rng, n, n);
    &l * l.transpose()
}

/// Entries in [-1, 1], Q and G random PSD, R = I + random PSD.
fn random_data(rng: &mut ChaCha8Rng, pi_route: bool) -> ModelData {
    let n = rng.random_range(1..=3);
    let k = rng.random_range(1..=2);
    let grid = TimeGrid::new(1.0, 1000).unwrap();
    let mut data = ModelData::new(n, k, grid)
        .with(C::A, uniform(rng, n, n))
        .with(C::B, uniform(rng, n, k))
        .with(C::DriftOffset, uniform(rng, n, 1))
        .with(C::C, uniform(rng, n, n))
        .with(C::D, uniform(rng, n, k))
        .with(C::Sigma, uniform(rng, n, 1))
        .with(C::D0, uniform(rng, n, k))
        .with(C::Sigma0, uniform(rng, n, 1))
        .with(C::Q, random_psd(rng, n))
        .with(C::R, DMatrix::identity(k, k) + random_psd(rng, k))
        .with_terminal(random_psd(rng, n))
        .with_initial_state(DVector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0)));
    if pi_route {
        let delta = rng.random_range(-1.0..=1.0);
        data = data.with(C::Alpha, DMatrix::identity(n, n) * delta);
    } else {
        data = data
            .with(C::Alpha, uniform(rng, n, n))
            .with(C::Beta, uniform(rng, n, n))
            .with(C::C0, uniform(rng, n, n))
            .with(C::Beta0, uniform(rng, n, n));
    }
    data
}

fn random_models(seed: u64, count: usize, pi_route: bool) -> Vec<LqMfgModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        if let Ok(model) = random_data(&mut rng, pi_route).build() {
            if model.validate().all_pass() {
                out.push(model);
            }
        }
    }
    out
}

fn max_dist(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| frobenius_distance(x, y)).fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Criteria

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let model = netsec_closed_form(1000);
    let p = riccati::solve_p_direct(&model).unwrap();
    let gamma = riccati::solve_gamma_direct(&model, &p).unwrap();
    let phi = riccati::solve_phi(&model, &p, &gamma).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let grid = model.grid();
    let (mut ep, mut epi, mut eg, mut ephi) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (j, t) in grid.times().enumerate() {
        let (pt, pit) = (closed_form_p(t, 1.0), closed_form_pi(t, 1.0));
        ep = ep.max((p[j][(0, 0)] - pt).abs());
        epi = epi.max((p[j][(0, 0)] + gamma[j][(0, 0)] - pit).abs());
        eg = eg.max((gamma[j][(0, 0)] - (pit - pt)).abs());
        ephi = ephi.max(phi[j][0].abs());
    }
    outcome(
        ep <= 1e-6 && epi <= 1e-6 && eg <= 2e-6 && ephi <= 1e-10 && elapsed <= 1.0,
        format!("P err {ep:.2e}, Pi err {epi:.2e}, Gamma err {eg:.2e}, |Phi| {ephi:.2e}, {elapsed:.3}s"),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut models = vec![netsec_closed_form(1000), netsec_numeric(1000)];
    models.extend(random_models(SEED, 20, false));
    let mut worst = 0.0f64;
    let mut worst_mono = f64::INFINITY;
    let mut failures = Vec::new();
    for (i, model) in models.iter().enumerate() {
        let direct = match riccati::solve_p_direct(model) {
            Ok(p) => p,
            Err(e) => {
                failures.push(format!("model {i}: direct: {e}"));
                continue;
            }
        };
        let (history, _) = match solve_p_iterative_history(model, DEFAULT_MAX_ITERS, DEFAULT_TOL) {
            Ok(h) => h,
            Err(e) => {
                failures.push(format!("model {i}: iterative: {e}"));
                continue;
            }
        };
        for pair in history.windows(2) {
            for (a, b) in pair[0].iter().zip(&pair[1]) {
                worst_mono = worst_mono.min(min_eigenvalue(&(a - b)));
            }
        }
        let d = max_dist(&direct, history.last().unwrap());
        worst = worst.max(d);
        if d > 1e-5 {
            failures.push(format!("model {i}: distance {d:.2e}"));
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let passed = failures.is_empty() && worst_mono >= -1e-10 && elapsed <= 30.0;
    outcome(
        passed,
        format!(
            "{} models, max distance {worst:.2e}, min monotonicity eigenvalue {worst_mono:.2e}, {elapsed:.1}s{}",
            models.len(),
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    )
}

fn criterion_3() -> Outcome {
    let models = random_models(SEED + 1, 20, true);
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for (i, model) in models.iter().enumerate() {
        let p = riccati::solve_p_direct(model).unwrap();
        let direct = riccati::solve_gamma_direct(model, &p).unwrap();
        match riccati::solve_gamma_via_pi(model, &p) {
            Ok((via_pi, report)) => {
                worst = worst.max(max_dist(&direct, &via_pi));
                if !report.holds() {
                    failures.push(format!("model {i}: condition reported violated"));
                }
            }
            Err(e) => failures.push(format!("model {i}: {e}")),
        }
    }
    outcome(
        failures.is_empty() && worst <= 1e-5,
        format!(
            "{} models, max distance {worst:.2e}{}",
            models.len(),
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    )
}

fn p_error(steps: usize) -> f64 {
    let model = netsec_closed_form(steps);
    let p = riccati::solve_p_direct(&model).unwrap();
    model
        .grid()
        .times()
        .zip(&p)
        .map(|(t, pj)| (pj[(0, 0)] - closed_form_p(t, 1.0)).abs())
        .fold(0.0, f64::max)
}

fn criterion_4() -> Outcome {
    let errors: Vec<f64> = [250, 500, 1000].iter().map(|&m| p_error(m)).collect();
    // A halving only has to gain a factor 8 while the coarser error is still
    // above the floor.
    let passed = errors.windows(2).all(|w| w[0] < 1e-10 || w[0] / w[1] >= 8.0);
    let ratios: Vec<String> = errors.windows(2).map(|w| format!("{:.1}", w[0] / w[1])).collect();
    outcome(
        passed,
        format!("errors {:.2e} / {:.2e} / {:.2e}, ratios {}", errors[0], errors[1], errors[2], ratios.join(", ")),
    )
}

fn slope_in(fit: Option<f64>, lo: f64, hi: f64) -> bool {
    fit.is_some_and(|s| (lo..=hi).contains(&s))
}

fn criterion_5(ladder: &RateExperiments, seconds: f64) -> Outcome {
    let s = ladder.state.slope();
    outcome(
        slope_in(s, -1.3, -0.7) && !ladder.state.degenerate,
        format!("slope {:.3} (values {:?}), ladder {seconds:.1}s", s.unwrap_or(f64::NAN), short(&ladder.state.values)),
    )
}

fn criterion_6(ladder: &RateExperiments) -> Outcome {
    let s = ladder.cost.slope();
    outcome(
        slope_in(s, -0.8, -0.2) && !ladder.cost.degenerate,
        format!("slope {:.3} (values {:?})", s.unwrap_or(f64::NAN), short(&ladder.cost.values)),
    )
}

fn short(values: &[f64]) -> Vec<String> {
    values.iter().map(|v| format!("{v:.3e}")).collect()
}

/// Envelope constant `c` with `cost_stat(N) ≈ c/√N`, as the geometric mean
/// of `cost_stat(N)·√N` over the ladder.
fn envelope_constant(ladder: &RateExperiments) -> f64 {
    let r = &ladder.cost;
    let logs: f64 = r.ns.iter().zip(&r.values).map(|(&n, &v)| (v * (n as f64).sqrt()).ln()).sum();
    (logs / r.ns.len() as f64).exp()
}

fn criterion_7(eq: &Equilibrium, ladder: &RateExperiments) -> Outcome {
    let n = 400;
    let c = envelope_constant(ladder);
    let envelope = c / (n as f64).sqrt();
    let family = Candidate::default_family(0.5);
    let start = Instant::now();
    let report = deviation_experiment(eq, n, SAMPLES, &family, SEED + 7).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let mut passed = true;
    let mut worst = f64::NEG_INFINITY;
    for o in &report.candidates {
        let slack = o.gain - 3.0 * o.gain_stderr - envelope;
        worst = worst.max(slack);
        if slack > 0.0 {
            passed = false;
        }
        if o.candidate == Candidate::Equilibrium && (o.gain != 0.0 || !o.identical) {
            passed = false;
        }
    }
    outcome(
        passed,
        format!(
            "max gain {:.3e}, envelope {envelope:.3e} (c = {c:.3}), worst gain - 3se - envelope {worst:.3e}, {elapsed:.1}s",
            report.max_gain
        ),
    )
}

/// Decoupled scalar model and its value `½P(0)x₀² + φ(0)x₀ + c(0)` for the
/// limit problem, computed independently with Heun's method on a fine grid.
struct Decoupled {
    a: f64,
    b: f64,
    drift: f64,
    sigma: f64,
    q: f64,
    r: f64,
    g: f64,
    x0: f64,
}

const DECOUPLED: Decoupled = Decoupled { a: 0.4, b: 1.0, drift: 0.5, sigma: 0.6, q: 2.0, r: 1.0, g: 1.0, x0: 1.0 };

impl Decoupled {
    fn model(&self, steps: usize) -> LqMfgModel {
        let grid = TimeGrid::new(1.0, steps).unwrap();
        ModelData::new(1, 1, grid)
            .with_scalar(C::A, self.a)
            .with_scalar(C::B, self.b)
            .with_scalar(C::DriftOffset, self.drift)
            .with_scalar(C::Sigma, self.sigma)
            .with_scalar(C::Q, self.q)
            .with_scalar(C::R, self.r)
            .with_terminal(DMatrix::from_element(1, 1, self.g))
            .with_initial_state(DVector::from_element(1, self.x0))
            .build()
            .unwrap()
    }

    fn value(&self) -> f64 {
        let l = 100_000;
        let h = 1.0 / l as f64;
        let bb = self.b * self.b / self.r;
        let mut p = vec![0.0; l + 1];
        p[l] = self.g;
        let fp = |p: f64| 2.0 * self.a * p - bb * p * p + self.q;
        for j in (0..l).rev() {
            let k1 = fp(p[j + 1]);
            let k2 = fp(p[j + 1] + h * k1);
            p[j] = p[j + 1] + 0.5 * h * (k1 + k2);
        }
        // Fixed point between the mean E[m] and the affine term φ.
        let mut em = vec![self.x0; l + 1];
        let mut phi = vec![0.0; l + 1];
        for _ in 0..200 {
            let mut next_phi = vec![0.0; l + 1];
            for j in (0..l).rev() {
                let f = |i: usize, v: f64| (self.a - bb * p[i]) * v + p[i] * self.drift - self.q * em[i];
                let k1 = f(j + 1, next_phi[j + 1]);
                let k2 = f(j, next_phi[j + 1] + h * k1);
                next_phi[j] = next_phi[j + 1] + 0.5 * h * (k1 + k2);
            }
            let mut next_em = vec![self.x0; l + 1];
            for j in 0..l {
                let f = |i: usize, v: f64| (self.a - bb * p[i]) * v - bb * next_phi[i] + self.drift;
                let k1 = f(j, next_em[j]);
                let k2 = f(j + 1, next_em[j] + h * k1);
                next_em[j + 1] = next_em[j] + 0.5 * h * (k1 + k2);
            }
            let change = em.iter().zip(&next_em).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            em = next_em;
            phi = next_phi;
            if change < 1e-13 {
                break;
            }
        }
        let integrand: Vec<f64> = (0..=l)
            .map(|i| {
                phi[i] * self.drift - 0.5 * bb * phi[i] * phi[i]
                    + 0.5 * self.sigma * self.sigma * p[i]
                    + 0.5 * self.q * em[i] * em[i]
            })
            .collect();
        let c0: f64 = (0..l).map(|i| 0.5 * h * (integrand[i] + integrand[i + 1])).sum();
        0.5 * p[0] * self.x0 * self.x0 + phi[0] * self.x0 + c0
    }
}

fn criterion_8() -> Outcome {
    let d = &DECOUPLED;
    let oracle = d.value();
    let eq = Equilibrium::new(d.model(2000), &SolveOptions::default(), CommonNoiseCoupling::Consistent).unwrap();
    let family = Candidate::default_family(0.5);
    let report = deviation_experiment(&eq, 1, 4096, &family, SEED + 8).unwrap();
    let se = report.baseline_limit_stderr;
    let value_ok = (report.baseline_limit_cost - oracle).abs() <= 3.0 * se;
    let worst = report
        .candidates
        .iter()
        .map(|o| o.limit_gain - 3.0 * o.limit_gain_stderr)
        .fold(f64::NEG_INFINITY, f64::max);
    // Paired standard errors: every candidate shares the baseline's noise.
    let deviations_ok = worst <= 0.0;
    outcome(
        value_ok && deviations_ok,
        format!(
            "simulated {:.5} ± {se:.5}, oracle {oracle:.5}, worst candidate gain - 3se {worst:.3e}",
            report.baseline_limit_cost
        ),
    )
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let mut bytes = fs::read(&path).unwrap();
        if name.ends_with("manifest.json") {
            let mut doc: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
            doc.as_object_mut().unwrap().remove("wall_time_seconds");
            bytes = serde_json::to_vec(&doc).unwrap();
        }
        files.insert(name, bytes);
    }
    files
}

fn criterion_9() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let mut scenarios = Vec::new();
    for (name, kind) in [
        ("netsec-closed-form", ExperimentKind::Solve),
        ("netsec-numeric", ExperimentKind::Simulate),
        ("netsec-closed-form", ExperimentKind::RateState),
        ("netsec-numeric", ExperimentKind::RateCost),
        ("netsec-closed-form", ExperimentKind::Deviation),
    ] {
        let mut config: ScenarioConfig = preset(name).unwrap();
        config.experiment.kind = kind;
        config.experiment.ns = vec![4, 8, 16, 32];
        config.experiment.samples = 64;
        config.experiment.n_agents = 8;
        config.experiment.seed = 99;
        config.solver.steps = Some(200);
        config.solver.p_method = PChoice::Both;
        config.solver.gamma_method = GammaChoice::Both;
        scenarios.push(config);
    }
    let mut failures = Vec::new();
    let mut files = 0;
    for (i, mut config) in scenarios.into_iter().enumerate() {
        let dir = root.path().join(format!("run{i}"));
        config.output.dir = dir.clone();
        lqmfg_cli::run(&config).unwrap();
        let first = snapshot(&dir);
        fs::remove_dir_all(&dir).unwrap();
        lqmfg_cli::run(&config).unwrap();
        let second = snapshot(&dir);
        files += first.len();
        if first != second {
            failures.push(format!("{:?}", config.experiment.kind));
        }
    }
    outcome(
        failures.is_empty(),
        format!("5 experiments, {files} artifacts compared{}", if failures.is_empty() { String::new() } else { format!("; differing: {}", failures.join(", ")) }),
    )
}

fn main() {
    // `cargo test` passes harness flags such as `--nocapture`; a filter
    // argument that matches nothing here skips the suite.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with("--")).collect();
    if args.iter().any(|a| !"acceptance".contains(a.as_str())) {
        return;
    }

    let mut results: Vec<(usize, Outcome)> = Vec::new();
    let mut report = |i: usize, o: Outcome| {
        println!("criterion {i}: {} — {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        results.push((i, o));
    };
    report(1, criterion_1());
    report(2, criterion_2());
    report(3, criterion_3());
    report(4, criterion_4());

    let eq = Equilibrium::new(netsec_closed_form(1000), &SolveOptions::default(), CommonNoiseCoupling::Consistent).unwrap();
    let start = Instant::now();
    let ladder = rate_experiments(&eq, &LADDER, SAMPLES, SEED).unwrap();
    let seconds = start.elapsed().as_secs_f64();
    report(5, criterion_5(&ladder, seconds));
    report(6, criterion_6(&ladder));
    report(7, criterion_7(&eq, &ladder));
    report(8, criterion_8());
    report(9, criterion_9());

    let failed: Vec<usize> = results.iter().filter(|(_, o)| !o.passed).map(|(i, _)| *i).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", results.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
