//! Allocation-free per-node tables and step kernels for path integration.
//!
//! All matrices are stored row-major, one block per grid node. The mean-field
//! integrators and the population simulator share these kernels so that the
//! same inputs give bit-identical paths in both.

use nalgebra::{DMatrix, DVector};

use crate::meanfield::CommonNoiseCoupling;
use crate::model::LqMfgModel;
use crate::riccati::FeedbackLaw;

#[derive(Debug, Clone)]
pub(crate) struct Block {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Block {
    fn from_matrices<'a>(ms: impl Iterator<Item = &'a DMatrix<f64>>, rows: usize, cols: usize) -> Self {
        let mut data = Vec::new();
        for m in ms {
            debug_assert_eq!(m.shape(), (rows, cols));
            for r in 0..rows {
                for c in 0..cols {
                    data.push(m[(r, c)]);
                }
            }
        }
        Self { rows, cols, data }
    }

    fn from_vectors<'a>(vs: impl Iterator<Item = &'a DVector<f64>>, rows: usize) -> Self {
        let data = vs.flat_map(|v| v.iter().copied()).collect();
        Self { rows, cols: 1, data }
    }

    #[inline]
    pub fn at(&self, j: usize) -> &[f64] {
        let size = self.rows * self.cols;
        &self.data[j * size..(j + 1) * size]
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// `out += M x` for a row-major `rows × x.len()` block.
#[inline]
pub(crate) fn gemv_add(out: &mut [f64], m: &[f64], x: &[f64]) {
    let cols = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        *o += dot(&m[r * cols..(r + 1) * cols], x);
    }
}

/// `xᵀ M x`.
#[inline]
pub(crate) fn quad(m: &[f64], x: &[f64]) -> f64 {
    let n = x.len();
    let mut acc = 0.0;
    for r in 0..n {
        let row = &m[r * n..(r + 1) * n];
        let mut s = 0.0;
        for (a, b) in row.iter().zip(x) {
            s += a * b;
        }
        acc += x[r] * s;
    }
    acc
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone)]
pub(crate) struct Tables {
    pub n: usize,
    pub k: usize,
    pub steps: usize,
    pub h: f64,
    pub a: Block,
    pub b: Block,
    pub alpha: Block,
    pub drift: Block,
    pub c: Block,
    pub d: Block,
    pub beta: Block,
    pub sigma: Block,
    pub c0: Block,
    pub d0: Block,
    pub beta0: Block,
    pub sigma0: Block,
    /// Mean coupling used in the `dW₀` term of the mean-field limit.
    pub beta_m: Block,
    pub q: Block,
    pub r: Block,
    pub g: Vec<f64>,
    pub kz: Block,
    pub km: Block,
    pub cu: Block,
    /// `K_z + K_m`, the gain of the mean control.
    pub k_mean: Block,
}

impl Tables {
    pub fn new(model: &LqMfgModel, law: &FeedbackLaw, coupling: CommonNoiseCoupling) -> Self {
        use crate::model::Coefficient as C;
        let (n, k) = (model.state_dim(), model.control_dim());
        let block = |c: C| {
            let s = model.schedule(c);
            let (rows, cols) = s.shape();
            Block::from_matrices(s.values().iter(), rows, cols)
        };
        let k_mean: Vec<DMatrix<f64>> = law.k_z.iter().zip(&law.k_m).map(|(a, b)| a + b).collect();
        let g = Block::from_matrices(std::iter::once(model.terminal()), n, n).data;
        Self {
            n,
            k,
            steps: model.grid().steps(),
            h: model.grid().step(),
            a: block(C::A),
            b: block(C::B),
            alpha: block(C::Alpha),
            drift: block(C::DriftOffset),
            c: block(C::C),
            d: block(C::D),
            beta: block(C::Beta),
            sigma: block(C::Sigma),
            c0: block(C::C0),
            d0: block(C::D0),
            beta0: block(C::Beta0),
            sigma0: block(C::Sigma0),
            beta_m: match coupling {
                CommonNoiseCoupling::Consistent => block(C::Beta0),
                CommonNoiseCoupling::LiteralPrinted => block(C::Beta),
            },
            q: block(C::Q),
            r: block(C::R),
            g,
            kz: Block::from_matrices(law.k_z.iter(), k, n),
            km: Block::from_matrices(law.k_m.iter(), k, n),
            cu: Block::from_vectors(law.c_u.iter(), k),
            k_mean: Block::from_matrices(k_mean.iter(), k, n),
        }
    }

    /// `u = θ·K_z y + K_m μ + c_u + offset`, summed in the same order as
    /// [`FeedbackLaw::control`] so the equilibrium control is reproduced exactly.
    #[inline]
    pub fn control(&self, j: usize, theta: f64, offset: f64, y: &[f64], em: &[f64], u: &mut [f64]) {
        let (n, kz, km, cu) = (self.n, self.kz.at(j), self.km.at(j), self.cu.at(j));
        for (r, v) in u.iter_mut().enumerate() {
            let mut on_state = dot(&kz[r * n..(r + 1) * n], y);
            if theta != 1.0 {
                on_state *= theta;
            }
            *v = on_state + dot(&km[r * n..(r + 1) * n], em) + cu[r];
            if offset != 0.0 {
                *v += offset;
            }
        }
    }

    /// `E[ū] = (K_z + K_m) E[m] + c_u`.
    #[inline]
    pub fn mean_control(&self, j: usize, em: &[f64], u: &mut [f64]) {
        u.copy_from_slice(self.cu.at(j));
        gemv_add(u, self.k_mean.at(j), em);
    }

    /// One Euler–Maruyama step of the generic state equation
    ///
    /// `dy = (Ay + Bu + αμ + b)dt + (Cy + Du + βμ + σ)dW + (C₀y + D₀u + β₀μ + σ₀)dW₀`
    ///
    /// with `dw`/`dw0` skipped when `None`.
    #[inline]
    #[allow(clippy::too_many_arguments)]
    pub fn step(
        &self,
        j: usize,
        y: &[f64],
        u: &[f64],
        mu: &[f64],
        dw: Option<f64>,
        dw0: Option<f64>,
        beta0: &Block,
        scratch: &mut [f64],
        out: &mut [f64],
    ) {
        let h = self.h;
        out.copy_from_slice(self.drift.at(j));
        gemv_add(out, self.a.at(j), y);
        gemv_add(out, self.b.at(j), u);
        gemv_add(out, self.alpha.at(j), mu);
        for (o, yi) in out.iter_mut().zip(y) {
            *o = yi + h * *o;
        }
        if let Some(dw) = dw {
            scratch.copy_from_slice(self.sigma.at(j));
            gemv_add(scratch, self.c.at(j), y);
            gemv_add(scratch, self.d.at(j), u);
            gemv_add(scratch, self.beta.at(j), mu);
            for (o, s) in out.iter_mut().zip(scratch.iter()) {
                *o += s * dw;
            }
        }
        if let Some(dw0) = dw0 {
            scratch.copy_from_slice(self.sigma0.at(j));
            gemv_add(scratch, self.c0.at(j), y);
            gemv_add(scratch, self.d0.at(j), u);
            gemv_add(scratch, beta0.at(j), mu);
            for (o, s) in out.iter_mut().zip(scratch.iter()) {
                *o += s * dw0;
            }
        }
    }

    /// Running-cost integrand `⟨Q(y - μ), y - μ⟩ + ⟨Ru, u⟩` at node `j`.
    #[inline]
    pub fn running_cost(&self, j: usize, y: &[f64], mu: &[f64], u: &[f64], scratch: &mut [f64]) -> f64 {
        for ((s, a), b) in scratch.iter_mut().zip(y).zip(mu) {
            *s = a - b;
        }
        quad(self.q.at(j), scratch) + quad(self.r.at(j), u)
    }

    pub fn terminal_cost(&self, y: &[f64]) -> f64 {
        quad(&self.g, y)
    }
}

/// Coefficients of a scalar model (`n = k = 1`) at one node, laid out for the
/// population hot loop. Every operation mirrors the generic kernels exactly.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ScalarNode {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub drift: f64,
    pub c: f64,
    pub d: f64,
    pub beta: f64,
    pub sigma: f64,
    pub c0: f64,
    pub d0: f64,
    pub beta0: f64,
    pub sigma0: f64,
    pub q: f64,
    pub r: f64,
    pub kz: f64,
    pub km: f64,
    pub cu: f64,
}

impl ScalarNode {
    #[inline(always)]
    pub fn control(&self, theta: f64, offset: f64, y: f64, em: f64) -> f64 {
        let mut on_state = self.kz * y;
        if theta != 1.0 {
            on_state *= theta;
        }
        let mut v = on_state + self.km * em + self.cu;
        if offset != 0.0 {
            v += offset;
        }
        v
    }

    /// Individual-noise step (`ẑ`): no common term.
    #[inline(always)]
    pub fn step_individual(&self, h: f64, y: f64, u: f64, mu: f64, dw: f64) -> f64 {
        let drift = self.drift + self.a * y + self.b * u + self.alpha * mu;
        let out = y + h * drift;
        let s = self.sigma + self.c * y + self.d * u + self.beta * mu;
        out + s * dw
    }

    /// Step with both noises (`z̄`, `x`).
    #[inline(always)]
    pub fn step_both(&self, h: f64, y: f64, u: f64, mu: f64, dw: f64, dw0: f64) -> f64 {
        let out = self.step_individual(h, y, u, mu, dw);
        let s0 = self.sigma0 + self.c0 * y + self.d0 * u + self.beta0 * mu;
        out + s0 * dw0
    }

    #[inline(always)]
    pub fn running_cost(&self, y: f64, mu: f64, u: f64) -> f64 {
        let e = y - mu;
        e * (self.q * e) + u * (self.r * u)
    }
}

impl Tables {
    pub fn scalar_nodes(&self) -> Option<Vec<ScalarNode>> {
        if self.n != 1 || self.k != 1 {
            return None;
        }
        Some(
            (0..=self.steps)
                .map(|j| ScalarNode {
                    a: self.a.at(j)[0],
                    b: self.b.at(j)[0],
                    alpha: self.alpha.at(j)[0],
                    drift: self.drift.at(j)[0],
                    c: self.c.at(j)[0],
                    d: self.d.at(j)[0],
                    beta: self.beta.at(j)[0],
                    sigma: self.sigma.at(j)[0],
                    c0: self.c0.at(j)[0],
                    d0: self.d0.at(j)[0],
                    beta0: self.beta0.at(j)[0],
                    sigma0: self.sigma0.at(j)[0],
                    q: self.q.at(j)[0],
                    r: self.r.at(j)[0],
                    kz: self.kz.at(j)[0],
                    km: self.km.at(j)[0],
                    cu: self.cu.at(j)[0],
                })
                .collect(),
        )
    }
}
