//! HAM rate-equation scheme for the spin, plus the Born-approximation
//! equilibrium used as a contrast value.
//!
//! ρ̇₁₁ = −(R₁₀+R₀₁)ρ₁₁ + R₁₀·P_c(0),   ρ̇₀₁ = (iΔE − R₀₁/2)ρ₀₁
//!
//! with R₀₁ = 2πλ²N₂/δε and R₁₀ = 2πλ²N₁/δε (ħ = 1). P_c(0) is the initial
//! weight of the resonant block; for product initial states it equals ρ₁₁(0).

use ndarray::Array1;
use num_complex::Complex64 as C64;
use serde::Serialize;
use std::f64::consts::TAU;
use thiserror::Error;

use crate::model::{check_conditions, ConditionReport, ModelParams};
use crate::ode::{self, OdeError, Tolerance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HamError {
    #[error("rates undefined for band_width = 0 (non-Markovian regime)")]
    UndefinedRates(Box<ConditionReport>),
    #[error("argument out of range: {0}")]
    OutOfRange(String),
    #[error(transparent)]
    Ode(#[from] OdeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HamRates {
    /// Downward rate, 2πλ²N₂/δε.
    pub r01: f64,
    /// Upward rate, 2πλ²N₁/δε.
    pub r10: f64,
}

impl HamRates {
    pub fn total(&self) -> f64 {
        self.r01 + self.r10
    }

    /// ρ₁₁(∞) for block weight `p_c0`.
    pub fn equilibrium(&self, p_c0: f64) -> f64 {
        let total = self.total();
        if total == 0.0 {
            // No dynamics: the fixed point is the initial value, handled by the caller.
            return f64::NAN;
        }
        p_c0 * self.r10 / total
    }
}

pub fn rates(params: &ModelParams) -> Result<HamRates, HamError> {
    if !(params.band_width > 0.0) {
        return Err(HamError::UndefinedRates(Box::new(check_conditions(params))));
    }
    let pre = TAU * params.lambda * params.lambda / params.band_width;
    Ok(HamRates { r01: pre * params.n2 as f64, r10: pre * params.n1 as f64 })
}

fn check_populations(rho11_0: f64, p_c0: f64) -> Result<(), HamError> {
    if !(0.0..=1.0).contains(&p_c0) || !(0.0..=p_c0 + 1e-12).contains(&rho11_0) {
        return Err(HamError::OutOfRange(format!(
            "need 0 <= rho11_0 <= p_c0 <= 1, got rho11_0 = {rho11_0}, p_c0 = {p_c0}"
        )));
    }
    Ok(())
}

/// Closed-form ρ₁₁(t) = ρ₁₁(∞) + (ρ₁₁(0) − ρ₁₁(∞))·exp(−(R₀₁+R₁₀)t).
pub fn predict_rho11(rates: &HamRates, rho11_0: f64, p_c0: f64, t_grid: &[f64]) -> Result<Vec<f64>, HamError> {
    check_populations(rho11_0, p_c0)?;
    let total = rates.total();
    if total == 0.0 {
        return Ok(vec![rho11_0; t_grid.len()]);
    }
    let eq = rates.equilibrium(p_c0);
    Ok(t_grid.iter().map(|&t| eq + (rho11_0 - eq) * (-total * t).exp()).collect())
}

/// Closed-form ρ₀₁(t) = ρ₀₁(0)·exp((iΔE − R₀₁/2)t).
pub fn predict_rho01(rates: &HamRates, rho01_0: C64, delta_e: f64, t_grid: &[f64]) -> Result<Vec<C64>, HamError> {
    if rho01_0.norm() > 0.5 + 1e-12 {
        return Err(HamError::OutOfRange(format!("|rho01(0)| = {} > 1/2", rho01_0.norm())));
    }
    let g = C64::new(-0.5 * rates.r01, delta_e);
    Ok(t_grid.iter().map(|&t| rho01_0 * (g * t).exp()).collect())
}

/// Numerical integration of the ρ₁₁ rate equation on `t_grid`.
pub fn integrate_eq6(rates: &HamRates, rho11_0: f64, p_c0: f64, t_grid: &[f64]) -> Result<Vec<f64>, HamError> {
    check_populations(rho11_0, p_c0)?;
    let total = rates.total();
    let source = rates.r10 * p_c0;
    let y0 = Array1::from_vec(vec![C64::new(rho11_0, 0.0)]);
    let tol = Tolerance { rtol: 1e-13, atol: 1e-13, ..Tolerance::default() };
    let ys = ode::integrate(|_, y| y.mapv(|r| C64::new(source, 0.0) - r * total), &y0, t_grid, tol)?;
    Ok(ys.into_iter().map(|y| y[0].re).collect())
}

/// Two-level Boltzmann occupation of the excited state at bath temperature kT.
pub fn ba_equilibrium(delta_e: f64, k_t_bath: f64) -> Result<f64, HamError> {
    if !(k_t_bath > 0.0) {
        return Err(HamError::OutOfRange(format!("k_t_bath = {k_t_bath} must be > 0")));
    }
    // 1/(1+e^{ΔE/kT}) == e^{−ΔE/kT}/(1+e^{−ΔE/kT}) without overflow at small kT.
    Ok(1.0 / (1.0 + (delta_e / k_t_bath).exp()))
}
