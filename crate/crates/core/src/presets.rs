//! Network-security parameter sets.
//!
//! Each user's security level follows
//! `dxᵢ = [a xᵢ + b uᵢ + δ x⁽ᴺ⁾ + k] dt + [c xᵢ + d uᵢ + σ] dWᵢ + [d₀ uᵢ + σ₀] dW₀`
//! with cost weights `q`, `r`, `g`.

use nalgebra::{DMatrix, DVector};

use crate::model::{Coefficient, LqMfgModel, ModelData, TimeGrid};

/// Scalar network-security parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkSecurity {
    pub a: f64,
    pub b: f64,
    pub delta: f64,
    pub k: f64,
    pub c: f64,
    pub d: f64,
    pub d0: f64,
    pub sigma: f64,
    pub sigma0: f64,
    pub q: f64,
    pub r: f64,
    pub g: f64,
    pub x0: f64,
    pub horizon: f64,
}

impl NetworkSecurity {
    /// The parameter set with an explicit solution.
    pub const CLOSED_FORM: Self = Self {
        a: 1.0,
        b: 1.0,
        delta: 1.0,
        k: 0.0,
        c: 0.0,
        d: 0.0,
        d0: 0.0,
        sigma: 1.0,
        sigma0: 1.0,
        q: 3.0,
        r: 1.0,
        g: 1.0,
        x0: 1.0,
        horizon: 1.0,
    };

    /// The parameter set used for the numerical illustration (N = 50).
    pub const NUMERIC: Self = Self {
        a: 1.5,
        b: 2.8,
        delta: 1.0,
        k: 2.0,
        c: 0.6,
        d: 2.5,
        d0: 6.0,
        sigma: 0.8,
        sigma0: 0.3,
        q: 3.3,
        r: 2.5,
        g: 5.0,
        x0: 1.0,
        horizon: 1.0,
    };

    pub fn data(&self, steps: usize) -> ModelData {
        let grid = TimeGrid::new(self.horizon, steps).expect("preset horizon is positive");
        ModelData::new(1, 1, grid)
            .with_scalar(Coefficient::A, self.a)
            .with_scalar(Coefficient::B, self.b)
            .with_scalar(Coefficient::Alpha, self.delta)
            .with_scalar(Coefficient::DriftOffset, self.k)
            .with_scalar(Coefficient::C, self.c)
            .with_scalar(Coefficient::D, self.d)
            .with_scalar(Coefficient::Sigma, self.sigma)
            .with_scalar(Coefficient::D0, self.d0)
            .with_scalar(Coefficient::Sigma0, self.sigma0)
            .with_scalar(Coefficient::Q, self.q)
            .with_scalar(Coefficient::R, self.r)
            .with_terminal(DMatrix::from_element(1, 1, self.g))
            .with_initial_state(DVector::from_element(1, self.x0))
    }

    pub fn model(&self, steps: usize) -> LqMfgModel {
        self.data(steps).build().expect("preset parameters are valid")
    }
}

pub fn netsec_closed_form(steps: usize) -> LqMfgModel {
    NetworkSecurity::CLOSED_FORM.model(steps)
}

pub fn netsec_numeric(steps: usize) -> LqMfgModel {
    NetworkSecurity::NUMERIC.model(steps)
}

/// Agent count used with the numeric parameter set.
pub const NETSEC_NUMERIC_AGENTS: usize = 50;

/// `P(t)` for the closed-form parameter set.
pub fn closed_form_p(t: f64, horizon: f64) -> f64 {
    let e = (4.0 * (t - horizon)).exp();
    (3.0 - e) / (1.0 + e)
}

/// `Π(t) = P(t) + Γ(t)` for the closed-form parameter set.
pub fn closed_form_pi(t: f64, horizon: f64) -> f64 {
    3.0 / (1.0 + 2.0 * (3.0 * (t - horizon)).exp())
}

pub fn closed_form_gamma(t: f64, horizon: f64) -> f64 {
    closed_form_pi(t, horizon) - closed_form_p(t, horizon)
}
