//! Causal estimators of the bath field from binned photon counts.
//!
//! Three estimators share one [`EstimatorConfig`]:
//!
//! * average-count: invert the lineshape for the mean count over a trailing window;
//! * simple Bayes: accumulate Poisson likelihoods on a fixed grid;
//! * OU Bayes: as above, with the posterior pushed through the OU transition
//!   kernel before every update.
//!
//! Grid densities are normalized with trapezoidal weights.

use crate::bath::{BathParams, BathPath};
use crate::cpt::{detuning_at_population, rho_ee_analytic, CptParams};
use crate::photon::CountSeries;
use std::io::{self, Write};
use thiserror::Error;

/// Smallest weight allowed as the largest entry of an unnormalized posterior.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;
/// Kernel entries below this fraction of the column peak are dropped.
const KERNEL_TRIM: f64 = 1e-16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("invalid estimator configuration: {0}")]
    InvalidConfig(String),
    #[error("posterior underflowed at bin {bin}; grid too narrow or model mismatched")]
    DegeneratePosterior { bin: usize },
    #[error("estimate and truth not aligned: {0}")]
    AlignmentError(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub cpt: CptParams,
    /// Bath parameters the filters believe, possibly different from the truth.
    pub assumed_bath: BathParams,
    pub update_interval: f64,
    pub grid_halfwidth: f64,
    pub grid_size: usize,
    pub avg_window_bins: usize,
}

impl EstimatorConfig {
    pub fn new(cpt: CptParams, assumed_bath: BathParams, update_interval: f64) -> Result<Self, EstimatorError> {
        let cfg = Self { cpt, assumed_bath, update_interval, grid_halfwidth: 5.0, grid_size: 251, avg_window_bins: 100 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), EstimatorError> {
        if !(self.update_interval > 0.0) || !self.update_interval.is_finite() {
            return Err(EstimatorError::InvalidConfig(format!("update interval must be positive, got {}", self.update_interval)));
        }
        if !(self.grid_halfwidth >= 4.0) || !self.grid_halfwidth.is_finite() {
            return Err(EstimatorError::InvalidConfig(format!("grid half-width must be at least 4σ, got {}", self.grid_halfwidth)));
        }
        if self.grid_size < 101 || self.grid_size.is_multiple_of(2) {
            return Err(EstimatorError::InvalidConfig(format!("grid size must be odd and at least 101, got {}", self.grid_size)));
        }
        if self.avg_window_bins == 0 {
            return Err(EstimatorError::InvalidConfig("averaging window must span at least one bin".into()));
        }
        Ok(())
    }

    /// Averaging time `τ_a` of the average-count estimator.
    pub fn avg_window(&self) -> f64 {
        self.avg_window_bins as f64 * self.update_interval
    }

    /// Mean detected counts per bin at field `x`.
    pub fn mean_count(&self, x: f64) -> f64 {
        self.cpt.eta() * self.update_interval * self.cpt.gamma() * rho_ee_analytic(&self.cpt, x)
    }
}

/// Probability density on a uniform grid centred on zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorGrid {
    pub nodes: Vec<f64>,
    pub spacing: f64,
    pub weights: Vec<f64>,
}

impl PosteriorGrid {
    fn uniform_nodes(halfwidth: f64, n: usize) -> (Vec<f64>, f64) {
        let half = (n / 2) as i64;
        let spacing = halfwidth / half as f64;
        ((-half..=half).map(|k| k as f64 * spacing).collect(), spacing)
    }

    /// Flat density over the grid range.
    pub fn uniform(cfg: &EstimatorConfig) -> Self {
        let (nodes, spacing) = Self::uniform_nodes(cfg.grid_halfwidth * cfg.assumed_bath.sigma(), cfg.grid_size);
        let mut g = Self { weights: vec![1.0; nodes.len()], nodes, spacing };
        g.normalize();
        g
    }

    /// Trapezoid factor of node `i`.
    fn quad(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.nodes.len() {
            0.5 * self.spacing
        } else {
            self.spacing
        }
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().enumerate().map(|(i, w)| w * self.quad(i)).sum()
    }

    fn normalize(&mut self) {
        let m = self.mass();
        self.weights.iter_mut().for_each(|w| *w /= m);
    }

    pub fn variance(&self) -> f64 {
        let m = posterior_mean(self);
        self.nodes.iter().zip(&self.weights).enumerate().map(|(i, (x, w))| (x - m).powi(2) * w * self.quad(i)).sum()
    }

    /// Point mass at node `i`, carried as a density.
    pub fn delta(cfg: &EstimatorConfig, i: usize) -> Self {
        let mut g = Self::uniform(cfg);
        g.weights.iter_mut().for_each(|w| *w = 0.0);
        g.weights[i] = 1.0 / g.quad(i);
        g
    }
}

pub fn init_prior(cfg: &EstimatorConfig) -> PosteriorGrid {
    let mut g = PosteriorGrid::uniform(cfg);
    let var = cfg.assumed_bath.variance();
    for (w, x) in g.weights.iter_mut().zip(&g.nodes) {
        *w = (-0.5 * x * x / var).exp();
    }
    g.normalize();
    g
}

pub fn posterior_mean(g: &PosteriorGrid) -> f64 {
    g.nodes.iter().zip(&g.weights).enumerate().map(|(i, (x, w))| x * w * g.quad(i)).sum()
}

/// Banded OU transition matrix, stored by column (source node).
#[derive(Debug, Clone)]
struct OuKernel {
    first: Vec<usize>,
    columns: Vec<Vec<f64>>,
}

impl OuKernel {
    fn new(grid: &PosteriorGrid, b: &BathParams, tau: f64) -> Self {
        let (a, sd) = b.transition(tau);
        let q2 = 2.0 * sd * sd;
        let n = grid.nodes.len();
        let mut first = Vec::with_capacity(n);
        let mut columns = Vec::with_capacity(n);
        for &xj in &grid.nodes {
            let centre = a * xj;
            // Exponents relative to the closest node keep very narrow kernels
            // from underflowing to an empty column.
            let d_min = grid.nodes.iter().map(|x| (x - centre).abs()).fold(f64::INFINITY, f64::min);
            let raw: Vec<f64> = grid
                .nodes
                .iter()
                .map(|x| {
                    let d = x - centre;
                    if q2 > 0.0 {
                        (-(d * d - d_min * d_min) / q2).exp()
                    } else if d.abs() == d_min {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            let peak = raw.iter().cloned().fold(0.0, f64::max);
            let lo = raw.iter().position(|&k| k > KERNEL_TRIM * peak).unwrap_or(0);
            let hi = raw.iter().rposition(|&k| k > KERNEL_TRIM * peak).unwrap_or(n - 1);
            let mut col = raw[lo..=hi].to_vec();
            let mass: f64 = col.iter().enumerate().map(|(k, v)| v * grid.quad(lo + k)).sum();
            col.iter_mut().for_each(|v| *v /= mass);
            first.push(lo);
            columns.push(col);
        }
        Self { first, columns }
    }
}

/// Per-configuration tables shared by every bin of every run.
#[derive(Debug, Clone)]
pub struct GridModel {
    cfg: EstimatorConfig,
    prior: PosteriorGrid,
    mean_counts: Vec<f64>,
    ln_mean_counts: Vec<f64>,
    kernel: OuKernel,
}

impl GridModel {
    pub fn new(cfg: &EstimatorConfig) -> Result<Self, EstimatorError> {
        cfg.validate()?;
        let prior = init_prior(cfg);
        let mean_counts: Vec<f64> = prior.nodes.iter().map(|&x| cfg.mean_count(x)).collect();
        let ln_mean_counts = mean_counts.iter().map(|m| m.ln()).collect();
        let kernel = OuKernel::new(&prior, &cfg.assumed_bath, cfg.update_interval);
        Ok(Self { cfg: cfg.clone(), prior, mean_counts, ln_mean_counts, kernel })
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.cfg
    }

    pub fn prior(&self) -> &PosteriorGrid {
        &self.prior
    }

    /// Mean counts `ȳ(x_i)` at each grid node.
    pub fn mean_counts(&self) -> &[f64] {
        &self.mean_counts
    }

    /// Poisson probability of `y` counts at node `i`.
    pub fn likelihood(&self, i: usize, y: u32) -> f64 {
        let mean = self.mean_counts[i];
        if y == 0 {
            return (-mean).exp();
        }
        if mean <= 0.0 {
            return 0.0;
        }
        (y as f64 * self.ln_mean_counts[i] - mean - ln_factorial(y)).exp()
    }
}

fn ln_factorial(y: u32) -> f64 {
    (2..=y).map(|k| (k as f64).ln()).sum()
}

/// Multiplies the density by the Poisson likelihood of `y` and renormalizes.
pub fn bayes_update(grid: &mut PosteriorGrid, y: u32, model: &GridModel) -> Result<(), EstimatorError> {
    let mut peak = 0.0f64;
    for (i, w) in grid.weights.iter_mut().enumerate() {
        *w *= model.likelihood(i, y);
        peak = peak.max(*w);
    }
    if !(peak >= UNDERFLOW_FLOOR) {
        return Err(EstimatorError::DegeneratePosterior { bin: 0 });
    }
    grid.normalize();
    Ok(())
}

/// Chapman–Kolmogorov step through the assumed OU transition over one bin.
pub fn ou_propagate(grid: &mut PosteriorGrid, model: &GridModel) {
    let mut out = vec![0.0; grid.weights.len()];
    for (j, (&lo, col)) in model.kernel.first.iter().zip(&model.kernel.columns).enumerate() {
        let src = grid.weights[j] * grid.quad(j);
        if src == 0.0 {
            continue;
        }
        for (k, v) in col.iter().enumerate() {
            out[lo + k] += v * src;
        }
    }
    grid.weights = out;
    grid.normalize();
}

/// Estimates aligned with the bins of a [`CountSeries`].
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSeries {
    pub t_start: f64,
    pub tau: f64,
    pub estimates: Vec<f64>,
    /// Entries before this index are placeholders.
    pub valid_from: usize,
}

impl EstimateSeries {
    pub fn len(&self) -> usize {
        self.estimates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.estimates.is_empty()
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t_start + self.tau * n as f64
    }

    /// CSV with columns `bin_index, t_s, x_true, y_n, x_est`.
    pub fn write_csv<W: Write>(&self, truth: &BathPath, counts: &CountSeries, mut w: W) -> io::Result<()> {
        writeln!(w, "bin_index,t_s,x_true,y_n,x_est")?;
        for (n, est) in self.estimates.iter().enumerate() {
            let x = truth.samples.get(n).copied().unwrap_or(f64::NAN);
            let y = counts.counts.get(n).copied().unwrap_or(0);
            writeln!(w, "{},{},{},{},{}", n, self.time(n), x, y, est)?;
        }
        Ok(())
    }
}

fn check_counts(counts: &CountSeries, cfg: &EstimatorConfig) -> Result<(), EstimatorError> {
    if (counts.bin_width - cfg.update_interval).abs() > 1e-9 * cfg.update_interval {
        return Err(EstimatorError::InvalidConfig(format!(
            "count bins of {} s do not match update interval {} s",
            counts.bin_width, cfg.update_interval
        )));
    }
    Ok(())
}

fn run_filter(counts: &CountSeries, model: &GridModel, propagate: bool) -> Result<EstimateSeries, EstimatorError> {
    check_counts(counts, model.config())?;
    let mut grid = model.prior().clone();
    let mut estimates = Vec::with_capacity(counts.len());
    for (bin, &y) in counts.counts.iter().enumerate() {
        if propagate {
            ou_propagate(&mut grid, model);
        }
        bayes_update(&mut grid, y, model).map_err(|_| EstimatorError::DegeneratePosterior { bin })?;
        estimates.push(posterior_mean(&grid));
    }
    Ok(EstimateSeries { t_start: counts.t_start, tau: counts.bin_width, estimates, valid_from: 0 })
}

/// Sequential Bayes updates from the stationary prior, no forgetting.
pub fn run_simple_bayes(counts: &CountSeries, model: &GridModel) -> Result<EstimateSeries, EstimatorError> {
    run_filter(counts, model, false)
}

/// Propagate, update, report the posterior mean; once per bin.
pub fn run_ou_bayes(counts: &CountSeries, model: &GridModel) -> Result<EstimateSeries, EstimatorError> {
    run_filter(counts, model, true)
}

/// Field whose mean population equals `rho`, on the branch `x ≤ Δ0`.
pub fn invert_population(cfg: &EstimatorConfig, rho: f64) -> f64 {
    cfg.cpt.bias() - detuning_at_population(&cfg.cpt, rho)
}

/// Lineshape inversion of the count total over the trailing `avg_window_bins`
/// bins. Bins before the first full window are reported as 0.
pub fn run_average_count(counts: &CountSeries, cfg: &EstimatorConfig) -> Result<EstimateSeries, EstimatorError> {
    cfg.validate()?;
    check_counts(counts, cfg)?;
    let w = cfg.avg_window_bins;
    let scale = cfg.cpt.eta() * cfg.cpt.gamma() * cfg.avg_window();
    let mut estimates = Vec::with_capacity(counts.len());
    let mut window: u64 = 0;
    for (n, &y) in counts.counts.iter().enumerate() {
        window += y as u64;
        if n >= w {
            window -= counts.counts[n - w] as u64;
        }
        estimates.push(if n + 1 >= w { invert_population(cfg, window as f64 / scale) } else { 0.0 });
    }
    Ok(EstimateSeries {
        t_start: counts.t_start,
        tau: counts.bin_width,
        estimates,
        valid_from: w.saturating_sub(1),
    })
}

/// Mean squared error pooled over runs, with its run-to-run standard error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct VarianceSummary {
    pub mean: f64,
    pub std_error: f64,
    pub n_runs: usize,
    pub n_bins: usize,
}

/// Pools `(x̃_n − x_n)²` over valid bins with `t ≥ discard_before`. Each truth
/// path must be sampled on the estimate's bin grid.
pub fn estimation_variance(pairs: &[(&EstimateSeries, &BathPath)], discard_before: f64) -> Result<VarianceSummary, EstimatorError> {
    if pairs.is_empty() {
        return Err(EstimatorError::AlignmentError("no runs given".into()));
    }
    let mut per_run = Vec::with_capacity(pairs.len());
    let mut n_bins = 0;
    for (r, (est, truth)) in pairs.iter().enumerate() {
        if (truth.dt - est.tau).abs() > 1e-9 * est.tau
            || (truth.t_start - est.t_start).abs() > 1e-9 * est.tau
            || truth.len() != est.len()
        {
            return Err(EstimatorError::AlignmentError(format!(
                "run {r}: estimate has {} bins of {} s from {} s, truth has {} samples of {} s from {} s",
                est.len(),
                est.tau,
                est.t_start,
                truth.len(),
                truth.dt,
                truth.t_start
            )));
        }
        let mut sum = 0.0;
        let mut count = 0;
        for n in est.valid_from..est.len() {
            if est.time(n) < discard_before - 1e-9 * est.tau {
                continue;
            }
            sum += (est.estimates[n] - truth.samples[n]).powi(2);
            count += 1;
        }
        if count == 0 {
            return Err(EstimatorError::AlignmentError(format!("run {r}: no valid bins after {discard_before} s")));
        }
        if r > 0 && count != n_bins {
            return Err(EstimatorError::AlignmentError(format!("run {r}: {count} valid bins, expected {n_bins}")));
        }
        n_bins = count;
        per_run.push(sum / count as f64);
    }
    let n = per_run.len() as f64;
    let mean = per_run.iter().sum::<f64>() / n;
    let std_error = if per_run.len() > 1 {
        (per_run.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    Ok(VarianceSummary { mean, std_error, n_runs: per_run.len(), n_bins })
}
