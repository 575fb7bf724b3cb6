//! Scenario configuration. Frequencies are given as `ν = ω/2π` in MHz and
//! converted to angular units on resolution.

use super::HarnessError;
use crate::bath::BathParams;
use crate::cpt::CptParams;
use crate::estimators::EstimatorConfig;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::path::Path;

const MHZ: f64 = TAU * 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CptConfig {
    pub rabi_mhz: f64,
    pub gamma_mhz: f64,
    pub bias_mhz: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_mhz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_s_mhz: Option<f64>,
    pub eta: f64,
}

impl Default for CptConfig {
    fn default() -> Self {
        Self { rabi_mhz: 2.8, gamma_mhz: 13.0, bias_mhz: 0.25, kappa_mhz: None, gamma_s_mhz: None, eta: 0.016 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BathConfig {
    pub tau_n_s: f64,
    pub sigma_mhz: f64,
}

impl Default for BathConfig {
    fn default() -> Self {
        Self { tau_n_s: 1e-3, sigma_mhz: 0.13 }
    }
}

/// Bath parameters believed by the filters; unset fields follow the truth.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssumedBathConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_n_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_mhz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub duration_s: f64,
    pub t_discard_s: f64,
    pub update_interval_s: f64,
    pub bath_dt_s: f64,
    /// Generate counts from quantum-jump trajectories instead of the
    /// adiabatic Poisson model.
    pub sse: bool,
    pub sse_dt_s: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            duration_s: 10e-3,
            t_discard_s: 2e-3,
            update_interval_s: 1e-5,
            bath_dt_s: 1e-7,
            sse: false,
            sse_dt_s: 6e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub cpt: CptConfig,
    pub bath: BathConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assumed_bath: Option<AssumedBathConfig>,
    pub sim: SimConfig,
    pub runs: usize,
    pub master_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            cpt: CptConfig::default(),
            bath: BathConfig::default(),
            assumed_bath: None,
            sim: SimConfig::default(),
            runs: 100,
            master_seed: 0,
        }
    }
}

impl ScenarioConfig {
    /// Shorter runs for comparing quantum-jump and adiabatic counts.
    pub fn sse_preset() -> Self {
        let mut cfg = Self::default();
        cfg.sim.duration_s = 2e-3;
        cfg.sim.t_discard_s = 0.5e-3;
        cfg
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.cpt_params()?;
        self.bath_params()?;
        self.assumed_bath_params()?;
        let s = &self.sim;
        for (name, v) in [
            ("duration_s", s.duration_s),
            ("update_interval_s", s.update_interval_s),
            ("bath_dt_s", s.bath_dt_s),
            ("sse_dt_s", s.sse_dt_s),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(HarnessError::Config(format!("sim.{name} must be positive, got {v}")));
            }
        }
        if !(s.t_discard_s >= 0.0 && s.t_discard_s < s.duration_s) {
            return Err(HarnessError::Config(format!(
                "sim.t_discard_s must lie in [0, duration), got {}",
                s.t_discard_s
            )));
        }
        if s.update_interval_s < s.bath_dt_s * (1.0 - 1e-9) {
            return Err(HarnessError::Config("sim.update_interval_s must not be shorter than sim.bath_dt_s".into()));
        }
        let bins = s.duration_s / s.update_interval_s;
        if (bins - bins.round()).abs() > 1e-6 * bins {
            return Err(HarnessError::Config("sim.duration_s must be a whole number of update intervals".into()));
        }
        let window = self.estimator_config()?.avg_window();
        if s.duration_s < window * (1.0 - 1e-9) {
            return Err(HarnessError::Config(format!(
                "sim.duration_s must cover the {window} s averaging window"
            )));
        }
        if self.runs == 0 {
            return Err(HarnessError::Config("runs must be at least 1".into()));
        }
        Ok(())
    }

    pub fn cpt_params(&self) -> Result<CptParams, HarnessError> {
        let c = &self.cpt;
        let gamma = c.gamma_mhz * MHZ;
        let kappa = c.kappa_mhz.map_or(gamma / 2.0, |k| k * MHZ);
        let gamma_s = c.gamma_s_mhz.unwrap_or(0.0) * MHZ;
        Ok(CptParams::with_dephasing(c.rabi_mhz * MHZ, gamma, kappa, gamma_s, c.bias_mhz * MHZ, c.eta)?)
    }

    pub fn bath_params(&self) -> Result<BathParams, HarnessError> {
        Ok(BathParams::new(self.bath.tau_n_s, self.bath.sigma_mhz * MHZ)?)
    }

    pub fn assumed_bath_params(&self) -> Result<BathParams, HarnessError> {
        let a = self.assumed_bath.clone().unwrap_or_default();
        Ok(BathParams::new(
            a.tau_n_s.unwrap_or(self.bath.tau_n_s),
            a.sigma_mhz.unwrap_or(self.bath.sigma_mhz) * MHZ,
        )?)
    }

    pub fn estimator_config(&self) -> Result<EstimatorConfig, HarnessError> {
        Ok(EstimatorConfig::new(self.cpt_params()?, self.assumed_bath_params()?, self.sim.update_interval_s)?)
    }

    pub fn n_bins(&self) -> usize {
        (self.sim.duration_s / self.sim.update_interval_s).round() as usize
    }

    pub fn resolved(&self) -> Result<ResolvedConfig, HarnessError> {
        let p = self.cpt_params()?;
        let b = self.bath_params()?;
        let a = self.assumed_bath_params()?;
        let e = self.estimator_config()?;
        Ok(ResolvedConfig {
            rabi_rad_s: p.rabi(),
            gamma_rad_s: p.gamma(),
            kappa_rad_s: p.kappa(),
            gamma_s_rad_s: p.gamma_s(),
            bias_rad_s: p.bias(),
            eta: p.eta(),
            tau_n_s: b.tau_n(),
            sigma_rad_s: b.sigma(),
            assumed_tau_n_s: a.tau_n(),
            assumed_sigma_rad_s: a.sigma(),
            duration_s: self.sim.duration_s,
            t_discard_s: self.sim.t_discard_s,
            update_interval_s: self.sim.update_interval_s,
            bath_dt_s: self.sim.bath_dt_s,
            sse: self.sim.sse,
            sse_dt_s: self.sim.sse_dt_s,
            grid_halfwidth_sigma: e.grid_halfwidth,
            grid_size: e.grid_size,
            avg_window_bins: e.avg_window_bins,
            runs: self.runs,
            master_seed: self.master_seed,
        })
    }
}

/// Every parameter in SI angular units, as embedded in output files.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub rabi_rad_s: f64,
    pub gamma_rad_s: f64,
    pub kappa_rad_s: f64,
    pub gamma_s_rad_s: f64,
    pub bias_rad_s: f64,
    pub eta: f64,
    pub tau_n_s: f64,
    pub sigma_rad_s: f64,
    pub assumed_tau_n_s: f64,
    pub assumed_sigma_rad_s: f64,
    pub duration_s: f64,
    pub t_discard_s: f64,
    pub update_interval_s: f64,
    pub bath_dt_s: f64,
    pub sse: bool,
    pub sse_dt_s: f64,
    pub grid_halfwidth_sigma: f64,
    pub grid_size: usize,
    pub avg_window_bins: usize,
    pub runs: usize,
    pub master_seed: u64,
}
