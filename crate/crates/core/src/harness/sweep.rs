use super::{run_scenario, HarnessError, ScenarioConfig};
use crate::crlb::CrlbReport;
use crate::estimators::VarianceSummary;
use crate::seed::point_seed;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    /// Swept values in the order of [`SweepResult::parameters`].
    pub values: Vec<f64>,
    pub seed: u64,
    pub runs: usize,
    pub var_average: VarianceSummary,
    pub var_simple: VarianceSummary,
    pub var_ou: VarianceSummary,
    pub bath_variance: f64,
    pub crlb: CrlbReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub parameters: Vec<String>,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    /// Point `(i, j)` of a two-parameter grid laid out with the first
    /// parameter outermost.
    pub fn at(&self, i: usize, j: usize, inner_len: usize) -> &SweepPoint {
        &self.points[i * inner_len + j]
    }
}

/// Runs one scenario per config, each with its own point seed.
fn run_points(
    base: &ScenarioConfig,
    parameters: &[&str],
    points: Vec<(Vec<f64>, ScenarioConfig)>,
) -> Result<SweepResult, HarnessError> {
    if points.is_empty() {
        return Err(HarnessError::Config("sweep grid is empty".into()));
    }
    let mut out = Vec::with_capacity(points.len());
    for (i, (values, mut cfg)) in points.into_iter().enumerate() {
        cfg.master_seed = point_seed(base.master_seed, i);
        let res = run_scenario(&cfg)?;
        let s = res.summary;
        out.push(SweepPoint {
            values,
            seed: cfg.master_seed,
            runs: s.runs,
            var_average: s.var_average,
            var_simple: s.var_simple,
            var_ou: s.var_ou,
            bath_variance: s.bath_variance,
            crlb: s.crlb,
        });
    }
    Ok(SweepResult { parameters: parameters.iter().map(|s| s.to_string()).collect(), points: out })
}

fn require_positive(name: &str, values: &[f64]) -> Result<(), HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::Config(format!("{name}: no values given")));
    }
    if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(HarnessError::Config(format!("{name}: values must be positive, got {v}")));
    }
    Ok(())
}

/// True bath memory time sweep; the filters follow the truth unless the
/// base config overrides the assumed bath.
pub fn sweep_tau_n(base: &ScenarioConfig, tau_n_s: &[f64]) -> Result<SweepResult, HarnessError> {
    require_positive("tau_n_s", tau_n_s)?;
    let points = tau_n_s
        .iter()
        .map(|&t| {
            let mut cfg = base.clone();
            cfg.bath.tau_n_s = t;
            (vec![t], cfg)
        })
        .collect();
    run_points(base, &["tau_n_s"], points)
}

/// Filter parameters set to `ratio × truth` for every pair of ratios.
pub fn sweep_mismatch(base: &ScenarioConfig, tau_ratios: &[f64], sigma_ratios: &[f64]) -> Result<SweepResult, HarnessError> {
    require_positive("tau_n ratios", tau_ratios)?;
    require_positive("sigma ratios", sigma_ratios)?;
    let mut points = Vec::new();
    for &rt in tau_ratios {
        for &rs in sigma_ratios {
            let mut cfg = base.clone();
            cfg.assumed_bath = Some(super::config::AssumedBathConfig {
                tau_n_s: Some(rt * base.bath.tau_n_s),
                sigma_mhz: Some(rs * base.bath.sigma_mhz),
            });
            points.push((vec![rt, rs], cfg));
        }
    }
    run_points(base, &["tau_n_ratio", "sigma_ratio"], points)
}

/// Drive strength and bias grid, both in MHz (`ω/2π`).
pub fn sweep_omega_bias(base: &ScenarioConfig, rabi_mhz: &[f64], bias_mhz: &[f64]) -> Result<SweepResult, HarnessError> {
    require_positive("rabi_mhz", rabi_mhz)?;
    require_positive("bias_mhz", bias_mhz)?;
    let mut points = Vec::new();
    for &om in rabi_mhz {
        for &b in bias_mhz {
            let mut cfg = base.clone();
            cfg.cpt.rabi_mhz = om;
            cfg.cpt.bias_mhz = b;
            points.push((vec![om, b], cfg));
        }
    }
    run_points(base, &["rabi_mhz", "bias_mhz"], points)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalBiasSweep {
    pub grid: SweepResult,
    /// For each drive strength, the grid point with the smallest OU-Bayes
    /// variance.
    pub optimal: SweepResult,
}

pub fn sweep_omega_optbias(base: &ScenarioConfig, rabi_mhz: &[f64], bias_mhz: &[f64]) -> Result<OptimalBiasSweep, HarnessError> {
    let grid = sweep_omega_bias(base, rabi_mhz, bias_mhz)?;
    let optimal = grid
        .points
        .chunks(bias_mhz.len())
        .map(|row| {
            row.iter()
                .min_by(|a, b| a.var_ou.mean.total_cmp(&b.var_ou.mean))
                .cloned()
                .expect("non-empty row")
        })
        .collect();
    Ok(OptimalBiasSweep { optimal: SweepResult { parameters: grid.parameters.clone(), points: optimal }, grid })
}
