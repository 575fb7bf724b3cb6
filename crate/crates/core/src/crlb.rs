//! Cramér–Rao lower bounds for tracking the OU bath from photon counts.
//!
//! The closed forms use the information product
//! `I = τ_N·η·Γ·σ²·g(σ)` with `g(σ) = E_x[(∂ρ_ee/∂x)²/ρ_ee]`, `x ~ N(0, σ²)`:
//!
//! * full data: `σ²/√(1 + 2I)`
//! * causal (past data only): full × `2/(1 + 4/√(1 + 32I))`, valid for `I > 2`.
//!
//! [`FisherMatrices`] builds the discrete-time Fisher matrix directly so the
//! closed forms can be checked against an explicit inverse.

use crate::bath::BathParams;
use crate::cpt::{fisher_density, CptParams};
use crate::quadrature::GaussHermite;
use serde::Serialize;
use thiserror::Error;

pub const QUADRATURE_NODES: usize = 64;
pub const QUADRATURE_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CrlbError {
    #[error("g(σ) quadrature not converged: {coarse} ({QUADRATURE_NODES} nodes) vs {fine} (refined)")]
    QuadratureNotConverged { coarse: f64, fine: f64 },
    #[error("causal bound assumes information product > 2, got {info_product}; formula gives {value}")]
    AssumptionViolated { info_product: f64, value: f64 },
    #[error("Fisher matrix not positive definite at index {index}")]
    NotPositiveDefinite { index: usize },
    #[error("index {index} out of range for {n_steps} steps")]
    IndexOutOfRange { index: usize, n_steps: usize },
    #[error("invalid Fisher construction: {0}")]
    InvalidInput(String),
}

/// `E[(∂ρ_ee/∂x)²/ρ_ee]` over `x ~ N(0, σ²)`, checked against a rule with
/// twice the nodes.
pub fn g_of_sigma(p: &CptParams, sigma: f64) -> Result<f64, CrlbError> {
    let coarse = GaussHermite::new(QUADRATURE_NODES).expect_normal(0.0, sigma, |x| fisher_density(p, x));
    let fine = GaussHermite::new(2 * QUADRATURE_NODES).expect_normal(0.0, sigma, |x| fisher_density(p, x));
    if (coarse - fine).abs() > QUADRATURE_TOLERANCE * fine.abs() {
        return Err(CrlbError::QuadratureNotConverged { coarse, fine });
    }
    Ok(fine)
}

/// Dimensionless `τ_N·η·Γ·σ²·g(σ)`.
pub fn info_product(p: &CptParams, b: &BathParams) -> Result<f64, CrlbError> {
    let g = g_of_sigma(p, b.sigma())?;
    Ok(info_product_from_g(p, b, g))
}

fn info_product_from_g(p: &CptParams, b: &BathParams, g: f64) -> f64 {
    b.tau_n() * p.eta() * p.gamma() * b.variance() * g
}

pub fn full_bound(variance: f64, info: f64) -> f64 {
    variance / (1.0 + 2.0 * info).sqrt()
}

/// Ratio of the causal to the full-data bound.
pub fn causal_factor(info: f64) -> f64 {
    2.0 / (1.0 + 4.0 / (1.0 + 32.0 * info).sqrt())
}

pub fn crlb_full(p: &CptParams, b: &BathParams) -> Result<f64, CrlbError> {
    Ok(full_bound(b.variance(), info_product(p, b)?))
}

pub fn crlb_causal(p: &CptParams, b: &BathParams) -> Result<f64, CrlbError> {
    let info = info_product(p, b)?;
    let value = full_bound(b.variance(), info) * causal_factor(info);
    if info <= 2.0 {
        return Err(CrlbError::AssumptionViolated { info_product: info, value });
    }
    Ok(value)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrlbInputs {
    pub rabi: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub gamma_s: f64,
    pub bias: f64,
    pub eta: f64,
    pub tau_n: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrlbReport {
    pub inputs: CrlbInputs,
    pub g_value: f64,
    pub info_product: f64,
    pub var_full: f64,
    pub var_causal: f64,
    /// Whether `info_product > 2`, the regime where `var_causal` is meaningful.
    pub causal_assumption_holds: bool,
}

impl CrlbReport {
    pub fn compute(p: &CptParams, b: &BathParams) -> Result<Self, CrlbError> {
        let g = g_of_sigma(p, b.sigma())?;
        let info = info_product_from_g(p, b, g);
        let var_full = full_bound(b.variance(), info);
        Ok(Self {
            inputs: CrlbInputs {
                rabi: p.rabi(),
                gamma: p.gamma(),
                kappa: p.kappa(),
                gamma_s: p.gamma_s(),
                bias: p.bias(),
                eta: p.eta(),
                tau_n: b.tau_n(),
                sigma: b.sigma(),
            },
            g_value: g,
            info_product: info,
            var_full,
            var_causal: var_full * causal_factor(info),
            causal_assumption_holds: info > 2.0,
        })
    }
}

/// Fisher matrix `F = F_M + F_B` for `n_steps` samples spaced `τ`.
///
/// `F_M = Γ·η·τ·g(σ)·I` is the count information per step. `F_B` is the
/// precision matrix of the stationary AR(1) prior with `a = e^{−τ/τ_N}` and
/// `q = σ²(1 − a²)`, stored as its diagonal and off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrices {
    pub measurement: Vec<f64>,
    pub prior_diag: Vec<f64>,
    pub prior_off: Vec<f64>,
    pub n_steps: usize,
    pub tau: f64,
}

pub fn fisher_matrices(p: &CptParams, b: &BathParams, tau: f64, n_steps: usize) -> Result<FisherMatrices, CrlbError> {
    let g = g_of_sigma(p, b.sigma())?;
    fisher_matrices_with_g(p.gamma() * p.eta() * g, b, tau, n_steps)
}

/// As [`fisher_matrices`] with the information rate `Γ·η·g` given directly.
pub fn fisher_matrices_with_g(info_rate: f64, b: &BathParams, tau: f64, n_steps: usize) -> Result<FisherMatrices, CrlbError> {
    if !(tau > 0.0) || n_steps < 2 {
        return Err(CrlbError::InvalidInput("need tau > 0 and at least two steps".into()));
    }
    let (a, sd) = b.transition(tau);
    let q = sd * sd;
    let interior = (1.0 + a * a) / q;
    let mut prior_diag = vec![interior; n_steps];
    prior_diag[0] = 1.0 / b.variance() + a * a / q;
    prior_diag[n_steps - 1] = 1.0 / q;
    Ok(FisherMatrices {
        measurement: vec![info_rate * tau; n_steps],
        prior_diag,
        prior_off: vec![-a / q; n_steps - 1],
        n_steps,
        tau,
    })
}

impl FisherMatrices {
    pub fn total_diag(&self) -> Vec<f64> {
        self.measurement.iter().zip(&self.prior_diag).map(|(m, b)| m + b).collect()
    }

    /// Diagonal of `F⁻¹` from forward and backward pivots of the symmetric
    /// tridiagonal `F`: `(F⁻¹)_ii = 1/(L_i + R_i − d_i)`.
    pub fn inverse_diagonal(&self) -> Result<Vec<f64>, CrlbError> {
        let d = self.total_diag();
        let e = &self.prior_off;
        let n = d.len();
        let mut left = vec![0.0; n];
        let mut right = vec![0.0; n];
        left[0] = d[0];
        for i in 1..n {
            if !(left[i - 1] > 0.0) {
                return Err(CrlbError::NotPositiveDefinite { index: i - 1 });
            }
            left[i] = d[i] - e[i - 1] * e[i - 1] / left[i - 1];
        }
        if !(left[n - 1] > 0.0) {
            return Err(CrlbError::NotPositiveDefinite { index: n - 1 });
        }
        right[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            right[i] = d[i] - e[i] * e[i] / right[i + 1];
        }
        Ok((0..n).map(|i| 1.0 / (left[i] + right[i] - d[i])).collect())
    }
}

/// `(F⁻¹)_ii`, the bound on the variance of the estimate at step `index`.
pub fn crlb_discrete(fm: &FisherMatrices, index: usize) -> Result<f64, CrlbError> {
    if index >= fm.n_steps {
        return Err(CrlbError::IndexOutOfRange { index, n_steps: fm.n_steps });
    }
    Ok(fm.inverse_diagonal()?[index])
}
