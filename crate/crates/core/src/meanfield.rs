//! The deterministic mean `E[m]`, the mean-field limit `m` under common noise,
//! and the filtered state `ẑᵢ` of one agent.
//!
//! `E[m]` is integrated with forward Euler, `m` and `ẑᵢ` with Euler–Maruyama,
//! all on the model grid with coefficients and gains frozen at the left node.
//! Both noisy equations use the mean control `E[ū] = (K_z + K_m)E[m] + c_u`
//! (for `m`) and `ū = K_z ẑ + K_m E[m] + c_u` (for `ẑ`), so averaging the
//! discrete `ẑ` or `m` recursion reproduces the discrete `E[m]` exactly.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Tables;
use crate::model::{LqMfgModel, TimeGrid};
use crate::riccati::FeedbackLaw;
use crate::rng::{self, COMMON_STREAM};

/// Which mean coupling multiplies `m` in the `dW₀` coefficient of the limit.
///
/// `Consistent` uses `C₀ + β₀`, matching the averaged state equation.
/// `LiteralPrinted` uses `C₀ + β`, the alternative reading of the same term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommonNoiseCoupling {
    #[default]
    Consistent,
    LiteralPrinted,
}

/// Scalar Brownian increments of one stream, one per grid step.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    grid: TimeGrid,
    stream: u64,
    increments: Vec<f64>,
}

impl NoisePath {
    pub fn generate(grid: &TimeGrid, seed: u64, stream: u64) -> Self {
        Self {
            grid: *grid,
            stream,
            increments: rng::increments(seed, stream, grid.steps(), grid.step()),
        }
    }

    pub fn common(grid: &TimeGrid, seed: u64) -> Self {
        Self::generate(grid, seed, COMMON_STREAM)
    }

    /// Wraps externally supplied increments, e.g. all zeros.
    pub fn from_increments(grid: &TimeGrid, stream: u64, increments: Vec<f64>) -> Result<Self> {
        if increments.len() != grid.steps() {
            return Err(Error::Usage(format!(
                "noise path has {} increments, the grid has {} steps",
                increments.len(),
                grid.steps()
            )));
        }
        Ok(Self {
            grid: *grid,
            stream,
            increments,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldPath {
    pub grid: TimeGrid,
    pub m: Vec<DVector<f64>>,
    pub em: Vec<DVector<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilteredStatePath {
    pub grid: TimeGrid,
    pub z_hat: Vec<DVector<f64>>,
    pub u: Vec<DVector<f64>>,
}

pub(crate) fn flatten(vs: &[DVector<f64>]) -> Vec<f64> {
    vs.iter().flat_map(|v| v.iter().copied()).collect()
}

pub(crate) fn unflatten(flat: &[f64], dim: usize) -> Vec<DVector<f64>> {
    flat.chunks(dim).map(DVector::from_column_slice).collect()
}

fn check_inputs(model: &LqMfgModel, law: &FeedbackLaw) -> Result<()> {
    if law.grid != *model.grid() || law.k_z.len() != model.grid().len() {
        return Err(Error::Usage("feedback law was built on a different grid".into()));
    }
    Ok(())
}

fn check_path(model: &LqMfgModel, name: &str, len: usize, expected: usize) -> Result<()> {
    if len != expected {
        return Err(Error::Usage(format!(
            "{name} has {len} entries, expected {expected} for a grid of {} nodes",
            model.grid().len()
        )));
    }
    Ok(())
}

pub(crate) fn diverged(what: &'static str, t: &Tables, node: usize) -> Error {
    Error::Divergence {
        what,
        node,
        time: node as f64 * t.h,
        detail: "non-finite state".into(),
    }
}

/// Forward Euler for `E[m]`, flattened node-major.
pub(crate) fn em_flat(t: &Tables, x0: &[f64]) -> Result<Vec<f64>> {
    let n = t.n;
    let mut out = vec![0.0; (t.steps + 1) * n];
    out[..n].copy_from_slice(x0);
    let mut u = vec![0.0; t.k];
    let mut scratch = vec![0.0; n];
    for j in 0..t.steps {
        let (done, rest) = out.split_at_mut((j + 1) * n);
        let cur = &done[j * n..];
        t.mean_control(j, cur, &mut u);
        t.step(j, cur, &u, cur, None, None, &t.beta0, &mut scratch, &mut rest[..n]);
        if rest[..n].iter().any(|v| !v.is_finite()) {
            return Err(diverged("E[m]", t, j + 1));
        }
    }
    Ok(out)
}

/// Euler–Maruyama for `m`, flattened node-major.
pub(crate) fn m_flat(t: &Tables, em: &[f64], dw0: &[f64]) -> Result<Vec<f64>> {
    let n = t.n;
    let mut out = vec![0.0; (t.steps + 1) * n];
    out[..n].copy_from_slice(&em[..n]);
    let mut u = vec![0.0; t.k];
    let mut scratch = vec![0.0; n];
    for j in 0..t.steps {
        let (done, rest) = out.split_at_mut((j + 1) * n);
        let cur = &done[j * n..];
        t.mean_control(j, &em[j * n..(j + 1) * n], &mut u);
        t.step(j, cur, &u, cur, None, Some(dw0[j]), &t.beta_m, &mut scratch, &mut rest[..n]);
        if rest[..n].iter().any(|v| !v.is_finite()) {
            return Err(diverged("m", t, j + 1));
        }
    }
    Ok(out)
}

/// `E[m(t_j)]` at every node.
pub fn integrate_em(model: &LqMfgModel, law: &FeedbackLaw) -> Result<Vec<DVector<f64>>> {
    check_inputs(model, law)?;
    let t = Tables::new(model, law, CommonNoiseCoupling::Consistent);
    Ok(unflatten(&em_flat(&t, model.initial_state().as_slice())?, t.n))
}

/// One realization of `m` driven by the common-noise path.
pub fn integrate_m(
    model: &LqMfgModel,
    law: &FeedbackLaw,
    em: &[DVector<f64>],
    common: &NoisePath,
    coupling: CommonNoiseCoupling,
) -> Result<Vec<DVector<f64>>> {
    check_inputs(model, law)?;
    check_path(model, "E[m]", em.len(), model.grid().len())?;
    check_path(model, "common noise", common.increments.len(), model.grid().steps())?;
    let t = Tables::new(model, law, coupling);
    Ok(unflatten(&m_flat(&t, &flatten(em), &common.increments)?, t.n))
}

/// The filtered state `ẑᵢ` and its control along one individual noise path.
pub fn integrate_z_hat(
    model: &LqMfgModel,
    law: &FeedbackLaw,
    em: &[DVector<f64>],
    individual: &NoisePath,
) -> Result<FilteredStatePath> {
    check_inputs(model, law)?;
    check_path(model, "E[m]", em.len(), model.grid().len())?;
    check_path(model, "individual noise", individual.increments.len(), model.grid().steps())?;
    let t = Tables::new(model, law, CommonNoiseCoupling::Consistent);
    let (n, k) = (t.n, t.k);
    let em = flatten(em);
    let mut z = vec![0.0; (t.steps + 1) * n];
    let mut u = vec![0.0; (t.steps + 1) * k];
    z[..n].copy_from_slice(model.initial_state().as_slice());
    let mut scratch = vec![0.0; n];
    for j in 0..=t.steps {
        let emj = &em[j * n..(j + 1) * n];
        t.control(j, 1.0, 0.0, &z[j * n..(j + 1) * n], emj, &mut u[j * k..(j + 1) * k]);
        if j == t.steps {
            break;
        }
        let (done, rest) = z.split_at_mut((j + 1) * n);
        let dw = individual.increments[j];
        t.step(j, &done[j * n..], &u[j * k..(j + 1) * k], emj, Some(dw), None, &t.beta0, &mut scratch, &mut rest[..n]);
        if rest[..n].iter().any(|v| !v.is_finite()) {
            return Err(diverged("z_hat", &t, j + 1));
        }
    }
    Ok(FilteredStatePath {
        grid: *model.grid(),
        z_hat: unflatten(&z, n),
        u: unflatten(&u, k),
    })
}

/// `E[m]` plus one realization of `m` on the common stream of `seed`.
pub fn mean_field_path(
    model: &LqMfgModel,
    law: &FeedbackLaw,
    seed: u64,
    coupling: CommonNoiseCoupling,
) -> Result<MeanFieldPath> {
    let em = integrate_em(model, law)?;
    let common = NoisePath::common(model.grid(), seed);
    let m = integrate_m(model, law, &em, &common, coupling)?;
    Ok(MeanFieldPath {
        grid: *model.grid(),
        m,
        em,
    })
}
