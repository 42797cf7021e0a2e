//! Criterion benchmarks for the Riccati solvers and the population simulator
//! live in `benches/solvers.rs`; run them with `cargo bench -p lqmfg-bench`.
