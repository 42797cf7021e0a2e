use lqmfg::linalg::{max_asymmetry, min_eigenvalue};
use lqmfg::model::{Coefficient as C, ModelData, TimeGrid};
use lqmfg::presets::netsec_numeric;
use lqmfg::stats::fit_log_log;
use lqmfg::{
    riccati, simulate_population, simulate_population_with_streams, CommonNoiseCoupling,
    Equilibrium, LqMfgModel, SolveOptions,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0..1.0f64, rows * cols).prop_map(move |v| DMatrix::from_row_slice(rows, cols, &v))
}

fn psd(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    matrix(n, n).prop_map(|l| &l * l.transpose())
}

/// Random model with entries in [-1, 1], PSD costs and `R ⪰ I`.
fn model() -> impl Strategy<Value = LqMfgModel> {
    (1usize..=3, 1usize..=2).prop_flat_map(|(n, k)| {
        (
            (matrix(n, n), matrix(n, k), matrix(n, n), matrix(n, 1)),
            (matrix(n, n), matrix(n, k), matrix(n, n), matrix(n, 1)),
            (matrix(n, n), matrix(n, k), matrix(n, n), matrix(n, 1)),
            (psd(n), psd(k), psd(n), matrix(n, 1)),
        )
            .prop_filter_map("model must validate", move |(drift, noise, common, cost)| {
                let grid = TimeGrid::new(1.0, 200).unwrap();
                let data = ModelData::new(n, k, grid)
                    .with(C::A, drift.0)
                    .with(C::B, drift.1)
                    .with(C::Alpha, drift.2)
                    .with(C::DriftOffset, drift.3)
                    .with(C::C, noise.0)
                    .with(C::D, noise.1)
                    .with(C::Beta, noise.2)
                    .with(C::Sigma, noise.3)
                    .with(C::C0, common.0)
                    .with(C::D0, common.1)
                    .with(C::Beta0, common.2)
                    .with(C::Sigma0, common.3)
                    .with(C::Q, cost.0)
                    .with(C::R, DMatrix::identity(k, k) + cost.1)
                    .with_terminal(cost.2)
                    .with_initial_state(DVector::from_column_slice(cost.3.as_slice()));
                let model = data.build().ok()?;
                model.validate().all_pass().then_some(model)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn p_is_symmetric_and_psd(model in model()) {
        let p = riccati::solve_p_direct(&model).unwrap();
        for pj in &p {
            prop_assert!(max_asymmetry(pj) <= 1e-12);
            prop_assert!(min_eigenvalue(pj) >= -1e-10);
        }
    }

    #[test]
    fn validation_is_deterministic(model in model()) {
        let data = model.to_data();
        prop_assert_eq!(lqmfg::validate(&data).unwrap(), lqmfg::validate(&data).unwrap());
        prop_assert_eq!(data.build().unwrap(), model);
    }

    #[test]
    fn realized_costs_are_nonnegative(model in model(), seed in any::<u64>()) {
        let eq = Equilibrium::new(model, &SolveOptions::default(), CommonNoiseCoupling::Consistent).unwrap();
        let sample = simulate_population(&eq, 3, seed).unwrap();
        for (c, l) in sample.j_central.iter().zip(&sample.j_limit) {
            prop_assert!(*c >= 0.0 && *l >= 0.0);
        }
    }

    #[test]
    fn log_log_fit_recovers_power_laws(c in 0.01..100.0f64, slope in -2.0..0.0f64) {
        let ns = [25.0, 50.0, 100.0, 200.0];
        let y: Vec<f64> = ns.iter().map(|n: &f64| c * n.powf(slope)).collect();
        let fit = fit_log_log(&ns, &y);
        prop_assert!((fit.slope - slope).abs() < 1e-10);
        prop_assert!((fit.intercept - c.ln()).abs() < 1e-9);
    }
}

fn numeric_equilibrium(steps: usize) -> Equilibrium {
    Equilibrium::new(netsec_numeric(steps), &SolveOptions::default(), CommonNoiseCoupling::Consistent).unwrap()
}

#[test]
fn permuting_agents_permutes_outputs() {
    let eq = numeric_equilibrium(100);
    let streams = [1, 2, 3, 4, 5];
    let permuted = [4, 1, 5, 3, 2];
    let a = simulate_population_with_streams(&eq, &streams, 11).unwrap();
    let b = simulate_population_with_streams(&eq, &permuted, 11).unwrap();
    assert_eq!(a.m, b.m);
    for (j, (xa, xb)) in a.state_average.iter().zip(&b.state_average).enumerate() {
        assert!((xa - xb).amax() <= 1e-12, "node {j}");
    }
    for (pos, &stream) in permuted.iter().enumerate() {
        let orig = stream as usize - 1;
        assert!((a.j_central[orig] - b.j_central[pos]).abs() <= 1e-10);
        assert!((a.j_limit[orig] - b.j_limit[pos]).abs() <= 1e-10);
        for (za, zb) in a.z_hat[orig].iter().zip(&b.z_hat[pos]) {
            assert_eq!(za, zb);
        }
    }
}

#[test]
fn single_agent_average_is_the_agent() {
    let eq = numeric_equilibrium(100);
    let s = simulate_population(&eq, 1, 5).unwrap();
    assert_eq!(s.state_average, s.x[0]);
}

#[test]
fn common_noise_drives_m_identically_for_every_population_size() {
    let eq = numeric_equilibrium(100);
    let small = simulate_population(&eq, 2, 8).unwrap();
    let large = simulate_population(&eq, 7, 8).unwrap();
    assert_eq!(small.m, large.m);
    // Agents on the same stream see the same filtered state.
    assert_eq!(small.z_hat[1], large.z_hat[1]);
}
