//! Ornstein–Uhlenbeck model of the nuclear-spin bath.
//!
//! `x(t)` is the bath-induced shift of the ground-state splitting in rad/s.
//! All sampling uses the exact AR(1) transition, so any step size gives the
//! correct finite-dimensional distributions.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use std::f64::consts::TAU;
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BathError {
    #[error("invalid bath parameters: {0}")]
    InvalidParams(String),
    #[error("invalid path request: {0}")]
    InvalidPath(String),
    #[error("paths differ in time step or length")]
    MismatchedPaths,
    #[error("need at least {needed} paths, got {got}")]
    TooFewPaths { needed: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BathParams {
    tau_n: f64,
    sigma: f64,
}

impl BathParams {
    pub fn new(tau_n: f64, sigma: f64) -> Result<Self, BathError> {
        if !(tau_n > 0.0 && tau_n.is_finite()) {
            return Err(BathError::InvalidParams("memory time must be positive".into()));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(BathError::InvalidParams("standard deviation must be positive".into()));
        }
        Ok(Self { tau_n, sigma })
    }

    /// `τ_N = 1 ms`, `σ/2π = 0.13 MHz`.
    pub fn reference() -> Self {
        Self { tau_n: 1e-3, sigma: TAU * 0.13e6 }
    }

    pub fn tau_n(&self) -> f64 {
        self.tau_n
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }

    /// Inhomogeneous dephasing time `√2/σ`.
    pub fn t2_star(&self) -> f64 {
        std::f64::consts::SQRT_2 / self.sigma
    }

    /// Decay factor and conditional standard deviation of one exact step.
    pub fn transition(&self, dt: f64) -> (f64, f64) {
        let decay = (-dt / self.tau_n).exp();
        // 1 − e^{−2dt/τ} without cancellation for small dt.
        let var = self.variance() * -(-2.0 * dt / self.tau_n).exp_m1();
        (decay, var.sqrt())
    }
}

impl Default for BathParams {
    fn default() -> Self {
        Self::reference()
    }
}

/// Uniformly sampled bath trajectory; sample `i` holds on `[t_i, t_i + dt)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BathPath {
    pub t_start: f64,
    pub dt: f64,
    pub samples: Vec<f64>,
}

impl BathPath {
    pub fn new(t_start: f64, dt: f64, samples: Vec<f64>) -> Result<Self, BathError> {
        if !(dt > 0.0) {
            return Err(BathError::InvalidPath("dt must be positive".into()));
        }
        if samples.is_empty() {
            return Err(BathError::InvalidPath("path must have at least one sample".into()));
        }
        Ok(Self { t_start, dt, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.samples.len() as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t_start + self.dt * i as f64
    }

    /// Index of the sample in force at time `t`, if inside the path.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        let u = (t - self.t_start) / self.dt;
        // Tolerate rounding when t sits on a sample boundary.
        let i = (u + 1e-9).floor();
        if i < 0.0 || i >= self.samples.len() as f64 {
            None
        } else {
            Some(i as usize)
        }
    }

    pub fn value_at(&self, t: f64) -> Option<f64> {
        self.index_at(t).map(|i| self.samples[i])
    }

    /// Samples the path at `t_start + n·step` for `n < count`.
    pub fn resample(&self, t_start: f64, step: f64, count: usize) -> Result<BathPath, BathError> {
        let samples = (0..count)
            .map(|n| self.value_at(t_start + step * n as f64))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| BathError::InvalidPath("resampling grid extends past the path".into()))?;
        BathPath::new(t_start, step, samples)
    }

    /// CSV with columns `t, x_rad_per_s`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,x_rad_per_s")?;
        for (i, x) in self.samples.iter().enumerate() {
            writeln!(w, "{},{}", self.time(i), x)?;
        }
        Ok(())
    }
}

/// One exact OU update driven by the standard-normal draw `xi`.
pub fn ou_step(x_prev: f64, dt: f64, b: &BathParams, xi: f64) -> f64 {
    let (decay, sd) = b.transition(dt);
    x_prev * decay + sd * xi
}

/// Stationary-start OU path of `round(duration/dt)` samples (at least one).
pub fn ou_path<R: Rng + ?Sized>(b: &BathParams, duration: f64, dt: f64, rng: &mut R) -> Result<BathPath, BathError> {
    if !(dt > 0.0) || !(duration >= dt * (1.0 - 1e-9)) {
        return Err(BathError::InvalidPath("need dt > 0 and duration >= dt".into()));
    }
    let n = ((duration / dt).round() as usize).max(1);
    let (decay, sd) = b.transition(dt);
    let mut samples = Vec::with_capacity(n);
    let first: f64 = rng.sample(StandardNormal);
    let mut x = b.sigma * first;
    samples.push(x);
    for _ in 1..n {
        let xi: f64 = rng.sample(StandardNormal);
        x = x * decay + sd * xi;
        samples.push(x);
    }
    BathPath::new(0.0, dt, samples)
}

/// Exact transition density `p(x_next, t + dt | x_prev, t)`.
pub fn ou_transition_pdf(x_next: f64, x_prev: f64, dt: f64, b: &BathParams) -> f64 {
    let (decay, sd) = b.transition(dt);
    let z = (x_next - x_prev * decay) / sd;
    (-0.5 * z * z).exp() / (sd * (TAU).sqrt())
}

/// Ensemble- and time-averaged `⟨x(t0) x(t0 + lag)⟩` at lags `k·dt ≤ max_lag`.
pub fn autocorrelation_estimate(paths: &[BathPath], max_lag: f64) -> Result<Vec<(f64, f64)>, BathError> {
    if paths.len() < 2 {
        return Err(BathError::TooFewPaths { needed: 2, got: paths.len() });
    }
    let dt = paths[0].dt;
    let len = paths[0].len();
    if paths.iter().any(|p| p.dt != dt || p.len() != len) {
        return Err(BathError::MismatchedPaths);
    }
    let max_k = ((max_lag / dt + 1e-9).floor() as usize).min(len - 1);
    let mut out = Vec::with_capacity(max_k + 1);
    for k in 0..=max_k {
        let mut acc = 0.0;
        for p in paths {
            let s = &p.samples;
            acc += s[..len - k].iter().zip(&s[k..]).map(|(a, b)| a * b).sum::<f64>();
        }
        out.push((k as f64 * dt, acc / (paths.len() * (len - k)) as f64));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::{derive, Purpose};

    #[test]
    fn reference_dephasing_time() {
        let t2 = BathParams::reference().t2_star();
        assert!((t2 - 1.7e-6).abs() / 1.7e-6 < 0.03, "{t2}");
    }

    #[test]
    fn rejects_bad_params() {
        assert!(BathParams::new(0.0, 1.0).is_err());
        assert!(BathParams::new(1.0, -1.0).is_err());
        assert!(BathPath::new(0.0, 0.0, vec![1.0]).is_err());
        assert!(BathPath::new(0.0, 1.0, vec![]).is_err());
    }

    #[test]
    fn step_e_fold() {
        let b = BathParams::reference();
        let x = ou_step(b.sigma(), b.tau_n(), &b, 0.0);
        assert!((x - b.sigma() / std::f64::consts::E).abs() < 1e-9 * b.sigma());
    }

    #[test]
    fn vanishing_noise_is_deterministic_decay() {
        let b = BathParams::new(1e-3, 1e-12).unwrap();
        let x = ou_step(5.0, 2e-4, &b, 1.7);
        assert!((x - 5.0 * (-0.2f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn long_step_forgets_initial_value() {
        let b = BathParams::reference();
        let (decay, sd) = b.transition(100.0 * b.tau_n());
        assert!(decay < 1e-40);
        assert!((sd - b.sigma()).abs() / b.sigma() < 1e-12);
        let mut rng = derive(1, 0, Purpose::Paths);
        let n = 20_000;
        let mut m2 = 0.0;
        for _ in 0..n {
            let xi: f64 = rng.sample(StandardNormal);
            let x = ou_step(50.0 * b.sigma(), 100.0 * b.tau_n(), &b, xi);
            m2 += x * x;
        }
        let var = m2 / n as f64;
        assert!((var / b.variance() - 1.0).abs() < 0.05, "{}", var / b.variance());
    }

    #[test]
    fn two_half_steps_match_one_step_in_distribution() {
        let b = BathParams::reference();
        for dt in [1e-7, 1e-5, 3e-4, 2e-3] {
            let (a1, s1) = b.transition(dt);
            let (ah, sh) = b.transition(dt / 2.0);
            // x → ah(ah x + sh ξ1) + sh ξ2
            let mean_coeff = ah * ah;
            let var = ah * ah * sh * sh + sh * sh;
            assert!((mean_coeff - a1).abs() <= 1e-15);
            assert!((var - s1 * s1).abs() / b.variance() <= 1e-12);
        }
    }

    #[test]
    fn path_is_deterministic_and_sized() {
        let b = BathParams::reference();
        let p1 = ou_path(&b, 1e-3, 1e-5, &mut derive(9, 2, Purpose::Bath)).unwrap();
        let p2 = ou_path(&b, 1e-3, 1e-5, &mut derive(9, 2, Purpose::Bath)).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(p1.len(), 100);
        let tiny = ou_path(&b, 1e-5, 1e-5, &mut derive(9, 2, Purpose::Bath)).unwrap();
        assert!(!tiny.is_empty());
        assert!(ou_path(&b, 1e-6, 1e-5, &mut derive(9, 2, Purpose::Bath)).is_err());
    }

    #[test]
    fn ensemble_variance_at_fixed_time() {
        let b = BathParams::reference();
        let paths: Vec<_> = (0..1000)
            .map(|r| ou_path(&b, 2e-3, 1e-5, &mut derive(4, r, Purpose::Bath)).unwrap())
            .collect();
        for idx in [0, 57, 199] {
            let var = paths.iter().map(|p| p.samples[idx].powi(2)).sum::<f64>() / paths.len() as f64;
            assert!((var / b.variance() - 1.0).abs() < 0.10, "idx {idx}: {}", var / b.variance());
        }
    }

    fn trapezoid(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / n as f64;
        let mut s = 0.5 * (f(lo) + f(hi));
        for i in 1..n {
            s += f(lo + h * i as f64);
        }
        s * h
    }

    #[test]
    fn transition_density_moments_by_quadrature() {
        let b = BathParams::reference();
        let s = b.sigma();
        for (x_prev, dt) in [(0.3 * s, 1e-5), (-1.5 * s, 4e-4), (2.0 * s, 5e-3)] {
            let (decay, sd) = b.transition(dt);
            let mean = x_prev * decay;
            let lo = mean - 8.0 * sd;
            let hi = mean + 8.0 * sd;
            let norm = trapezoid(|x| ou_transition_pdf(x, x_prev, dt, &b), lo, hi, 4000);
            assert!((norm - 1.0).abs() < 1e-6, "{norm}");
            let m1 = trapezoid(|x| x * ou_transition_pdf(x, x_prev, dt, &b), lo, hi, 4000);
            assert!((m1 - mean).abs() < 1e-6 * s);
        }
        // Over the stationary ±8σ window as well.
        let norm = trapezoid(|x| ou_transition_pdf(x, 0.1 * s, 1e-4, &b), -8.0 * s, 8.0 * s, 40_000);
        assert!((norm - 1.0).abs() < 1e-6);
    }

    #[test]
    fn transition_density_long_time_limit() {
        let b = BathParams::reference();
        let s = b.sigma();
        let stationary = |x: f64| (-0.5 * (x / s).powi(2)).exp() / (s * TAU.sqrt());
        for x_prev in [-3.0 * s, 0.0, 2.0 * s] {
            let v = ou_transition_pdf(0.7 * s, x_prev, 1e3 * b.tau_n(), &b);
            assert!((v - stationary(0.7 * s)).abs() / stationary(0.7 * s) < 1e-12);
        }
    }

    #[test]
    fn autocorrelation_matches_exponential() {
        let b = BathParams::reference();
        let paths: Vec<_> = (0..300)
            .map(|r| ou_path(&b, 20e-3, 1e-5, &mut derive(11, r, Purpose::Paths)).unwrap())
            .collect();
        let r = autocorrelation_estimate(&paths, b.tau_n()).unwrap();
        assert_eq!(r.len(), 101);
        assert!((r[0].1 / b.variance() - 1.0).abs() < 0.05);
        for (lag, val) in r.iter().step_by(10) {
            let theory = b.variance() * (-lag / b.tau_n()).exp();
            assert!((val - theory).abs() / theory < 0.08, "lag {lag}: {} vs {}", val, theory);
        }
    }

    #[test]
    fn autocorrelation_errors_and_quiet_limit() {
        let b = BathParams::reference();
        let p = ou_path(&b, 1e-3, 1e-5, &mut derive(1, 0, Purpose::Paths)).unwrap();
        assert!(matches!(autocorrelation_estimate(std::slice::from_ref(&p), 1e-4), Err(BathError::TooFewPaths { .. })));
        let q = ou_path(&b, 2e-3, 1e-5, &mut derive(1, 1, Purpose::Paths)).unwrap();
        assert_eq!(autocorrelation_estimate(&[p, q], 1e-4), Err(BathError::MismatchedPaths));

        let quiet = BathParams::new(1e-3, 1e-12).unwrap();
        let paths: Vec<_> = (0..2)
            .map(|r| ou_path(&quiet, 1e-3, 1e-5, &mut derive(1, r, Purpose::Paths)).unwrap())
            .collect();
        for (_, v) in autocorrelation_estimate(&paths, 5e-4).unwrap() {
            assert!(v.abs() < 1e-20);
        }
    }

    #[test]
    fn resample_and_lookup() {
        let p = BathPath::new(0.0, 1e-7, (0..1000).map(|i| i as f64).collect()).unwrap();
        assert_eq!(p.value_at(0.0), Some(0.0));
        assert_eq!(p.value_at(1e-5), Some(100.0));
        assert_eq!(p.value_at(1e-4), None);
        let r = p.resample(0.0, 1e-5, 10).unwrap();
        assert_eq!(r.samples, (0..10).map(|i| (100 * i) as f64).collect::<Vec<_>>());
        assert!(p.resample(0.0, 1e-5, 11).is_err());
    }
}
