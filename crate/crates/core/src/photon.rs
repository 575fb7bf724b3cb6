//! Detected-photon time series.
//!
//! Two generators share the same bath path:
//!
//! * [`sse_trajectory`] unravels the master equation into quantum jumps. The
//!   unnormalized state evolves under `H_eff = H(x) − i(Γ/2)|e⟩⟨e|`; a jump is
//!   emitted at the end of the step where `‖ψ‖²` drops below a uniform draw,
//!   the emitter collapses to `|0⟩` or `|1⟩` with equal probability, and a
//!   fresh threshold is drawn. This waiting-time form is statistically the
//!   same process as the normalized jump SSE.
//! * [`steady_emission_counts`] assumes `ρ_ee` follows the bath adiabatically
//!   and draws Poisson counts with mean `η·Γ·ρ_ee(x)·τ` per bin.
//!
//! Detection loss for the jump route is applied afterwards by
//! [`thin_detect`].

use crate::bath::BathPath;
use crate::cpt::{hamiltonian, rho_ee_analytic, CptParams};
use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;
use std::io::{self, Write};
use thiserror::Error;

type C = Complex64;

/// Largest allowed `Γ·dt` for the jump integrator.
pub const MAX_GAMMA_DT: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhotonError {
    #[error("integration step too coarse: Γ·dt = {gamma_dt:.4} > {MAX_GAMMA_DT}")]
    StepTooCoarse { gamma_dt: f64 },
    #[error("state norm increased between jumps at step {step}")]
    NormIncreased { step: usize },
    #[error("invalid binning: {0}")]
    InvalidBinning(String),
    #[error("detection efficiency must lie in (0, 1], got {0}")]
    InvalidEfficiency(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Channel {
    ToState0,
    ToState1,
}

impl Channel {
    pub fn index(self) -> u8 {
        match self {
            Channel::ToState0 => 0,
            Channel::ToState1 => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmissionEvent {
    pub time: f64,
    pub channel: Channel,
}

/// Unnormalized pure state over `(|0⟩, |1⟩, |e⟩)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureState3(pub Vector3<C>);

impl PureState3 {
    pub fn ground(k: usize) -> Self {
        let mut v = Vector3::zeros();
        v[k] = C::new(1.0, 0.0);
        Self(v)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn excited_population(&self) -> f64 {
        self.0[2].norm_sqr() / self.norm_sqr()
    }
}

/// Binned detected counts; bin `n` covers `[t_start + nτ, t_start + (n+1)τ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountSeries {
    pub bin_width: f64,
    pub t_start: f64,
    pub counts: Vec<u32>,
}

impl CountSeries {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn bin_time(&self, n: usize) -> f64 {
        self.t_start + self.bin_width * n as f64
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    pub fn mean_rate(&self) -> f64 {
        self.total() as f64 / (self.bin_width * self.counts.len() as f64)
    }

    /// CSV with columns `bin_index, t_s, count`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "bin_index,t_s,count")?;
        for (n, c) in self.counts.iter().enumerate() {
            writeln!(w, "{},{},{}", n, self.bin_time(n), c)?;
        }
        Ok(())
    }
}

pub fn write_events_csv<W: Write>(events: &[EmissionEvent], mut w: W) -> io::Result<()> {
    writeln!(w, "time_s,channel")?;
    for e in events {
        writeln!(w, "{},{}", e.time, e.channel.index())?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SseTrajectory {
    pub events: Vec<EmissionEvent>,
    /// `ρ_ee` sampled at the start of every bath interval, when requested.
    pub rho_ee_trace: Option<Vec<f64>>,
    /// Step actually used: `bath.dt` divided into equal sub-steps.
    pub dt_int: f64,
}

/// One classical RK4 step of `ψ̇ = −i H_eff ψ`. For a constant linear
/// generator this is exactly the 4th-order Taylor polynomial of `e^{Ah}`.
fn rk4_propagator(h_eff: &Matrix3<C>, dt: f64) -> Matrix3<C> {
    let a = h_eff * C::new(0.0, -dt);
    let a2 = a * a;
    let a3 = a2 * a;
    let a4 = a3 * a;
    Matrix3::identity() + a + a2 * C::new(0.5, 0.0) + a3 * C::new(1.0 / 6.0, 0.0) + a4 * C::new(1.0 / 24.0, 0.0)
}

/// Quantum-jump trajectory over the bath path, starting in `|0⟩`.
///
/// The bath is piecewise constant on `bath.dt`; each interval is split into
/// `ceil(bath.dt/dt_int)` equal RK4 steps.
pub fn sse_trajectory<R: Rng + ?Sized>(
    p: &CptParams,
    bath: &BathPath,
    dt_int: f64,
    rng: &mut R,
    record_trace: bool,
) -> Result<SseTrajectory, PhotonError> {
    let gamma_dt = p.gamma() * dt_int;
    if !(dt_int > 0.0) || gamma_dt > MAX_GAMMA_DT {
        return Err(PhotonError::StepTooCoarse { gamma_dt });
    }
    let substeps = ((bath.dt / dt_int) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let h = bath.dt / substeps as f64;

    let decay = C::new(0.0, -p.gamma() / 2.0);
    let mut psi = PureState3::ground(0).0;
    let mut norm = 1.0;
    let mut threshold: f64 = rng.random();
    let mut events = Vec::new();
    let mut trace = record_trace.then(|| Vec::with_capacity(bath.len()));
    let mut step = 0usize;

    for (i, &x) in bath.samples.iter().enumerate() {
        let mut h_eff = hamiltonian(p, x);
        h_eff[(2, 2)] += decay;
        let prop = rk4_propagator(&h_eff, h);
        if let Some(tr) = trace.as_mut() {
            tr.push(psi[2].norm_sqr() / norm);
        }
        let t0 = bath.time(i);
        for k in 0..substeps {
            psi = prop * psi;
            step += 1;
            let n2 = psi.norm_squared();
            if n2 > norm * (1.0 + 1e-12) {
                return Err(PhotonError::NormIncreased { step });
            }
            norm = n2;
            if norm < threshold {
                let channel = if rng.random_bool(0.5) { Channel::ToState1 } else { Channel::ToState0 };
                events.push(EmissionEvent { time: t0 + h * (k + 1) as f64, channel });
                psi = PureState3::ground(channel.index() as usize).0;
                norm = 1.0;
                threshold = rng.random();
            }
        }
    }
    Ok(SseTrajectory { events, rho_ee_trace: trace, dt_int: h })
}

/// Keeps each event independently with probability `eta`.
pub fn thin_detect<R: Rng + ?Sized>(
    events: &[EmissionEvent],
    eta: f64,
    rng: &mut R,
) -> Result<Vec<EmissionEvent>, PhotonError> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(PhotonError::InvalidEfficiency(eta));
    }
    if eta == 1.0 {
        return Ok(events.to_vec());
    }
    Ok(events.iter().copied().filter(|_| rng.random_bool(eta)).collect())
}

/// Histogram of event times into `round(duration/τ)` bins starting at `t_start`.
pub fn bin_events(events: &[EmissionEvent], bin_width: f64, t_start: f64, duration: f64) -> Result<CountSeries, PhotonError> {
    if !(bin_width > 0.0) {
        return Err(PhotonError::InvalidBinning("bin width must be positive".into()));
    }
    let n_bins = (duration / bin_width).round().max(0.0) as usize;
    let mut counts = vec![0u32; n_bins];
    for e in events {
        let u = (e.time - t_start) / bin_width;
        if u >= 0.0 {
            let idx = u.floor() as usize;
            if idx < n_bins {
                counts[idx] += 1;
            }
        }
    }
    Ok(CountSeries { bin_width, t_start, counts })
}

/// Adiabatic Poisson emission: bin `n` draws `Poisson(η·Γ·ρ_ee(x_n)·τ)` with
/// `x_n` the bath value at the bin start.
pub fn steady_emission_counts<R: Rng + ?Sized>(
    p: &CptParams,
    bath: &BathPath,
    bin_width: f64,
    rng: &mut R,
) -> Result<CountSeries, PhotonError> {
    if !(bin_width >= bath.dt * (1.0 - 1e-9)) {
        return Err(PhotonError::InvalidBinning(format!(
            "bin width {bin_width} shorter than bath step {}",
            bath.dt
        )));
    }
    let n_bins = ((bath.duration() / bin_width) * (1.0 + 1e-9)).floor() as usize;
    let mut counts = Vec::with_capacity(n_bins);
    for n in 0..n_bins {
        let t = bath.t_start + bin_width * n as f64;
        let x = bath
            .value_at(t)
            .ok_or_else(|| PhotonError::InvalidBinning("bin outside bath path".into()))?;
        let mean = p.eta() * p.gamma() * rho_ee_analytic(p, x) * bin_width;
        counts.push(poisson(mean, rng));
    }
    Ok(CountSeries { bin_width, t_start: bath.t_start, counts })
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u32 {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("finite positive mean");
    let k: f64 = d.sample(rng);
    k as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{ou_path, BathParams};
    use crate::cpt::liouvillian_steady_state;
    use crate::seed::{derive, Purpose};

    fn constant_bath(x: f64, duration: f64, dt: f64) -> BathPath {
        BathPath::new(0.0, dt, vec![x; (duration / dt).round() as usize]).unwrap()
    }

    fn events_at(times: &[f64]) -> Vec<EmissionEvent> {
        times.iter().map(|&time| EmissionEvent { time, channel: Channel::ToState0 }).collect()
    }

    #[test]
    fn rejects_coarse_step() {
        let p = CptParams::reference();
        let bath = constant_bath(0.0, 1e-6, 1e-7);
        let dt = 0.06 / p.gamma();
        assert!(matches!(
            sse_trajectory(&p, &bath, dt, &mut derive(0, 0, Purpose::Sse), false),
            Err(PhotonError::StepTooCoarse { .. })
        ));
    }

    #[test]
    fn undriven_emitter_never_emits() {
        let p = CptParams::reference().with_rabi(1e-300).unwrap();
        let bath = constant_bath(0.0, 20e-6, 1e-7);
        let traj = sse_trajectory(&p, &bath, 0.04 / p.gamma(), &mut derive(0, 0, Purpose::Sse), true).unwrap();
        assert!(traj.events.is_empty());
        assert!(traj.rho_ee_trace.unwrap().iter().all(|&r| r == 0.0));
    }

    #[test]
    fn trapping_suppresses_emission_at_raman_resonance() {
        let p = CptParams::reference();
        let bath = constant_bath(p.bias(), 5e-6, 1e-7);
        let runs = 400;
        let early_window = 0.2e-6;
        let (mut early, mut late) = (0usize, 0usize);
        for r in 0..runs {
            let traj = sse_trajectory(&p, &bath, 0.04 / p.gamma(), &mut derive(3, r, Purpose::Sse), false).unwrap();
            early += traj.events.iter().filter(|e| e.time < early_window).count();
            late += traj.events.iter().filter(|e| e.time >= 2e-6).count();
        }
        let early_rate = early as f64 / (runs as f64 * early_window);
        let late_rate = late as f64 / (runs as f64 * 3e-6);
        assert!(early > 100, "{early}");
        assert!(late_rate < 0.01 * early_rate, "early {early_rate} late {late_rate}");
    }

    #[test]
    fn norm_is_monotone_between_jumps() {
        let p = CptParams::reference();
        let mut h_eff = hamiltonian(&p, 0.3 * p.bias());
        h_eff[(2, 2)] += C::new(0.0, -p.gamma() / 2.0);
        let prop = rk4_propagator(&h_eff, 0.05 / p.gamma());
        let mut psi = PureState3::ground(0).0;
        let mut last = 1.0;
        for _ in 0..100_000 {
            psi = prop * psi;
            let n = psi.norm_squared();
            assert!(n <= last * (1.0 + 1e-12));
            last = n;
        }
    }

    #[test]
    fn jump_rate_tracks_steady_state_population() {
        let p = CptParams::reference();
        let b = BathParams::reference();
        let mut emitted = 0usize;
        let mut expected = 0.0;
        let mut exact = 0.0;
        let mut duration = 0.0;
        for r in 0..4 {
            let bath = ou_path(&b, 2.5e-3, 1e-7, &mut derive(21, r, Purpose::Bath)).unwrap();
            let traj = sse_trajectory(&p, &bath, 0.6e-9, &mut derive(21, r, Purpose::Sse), false).unwrap();
            emitted += traj.events.len();
            duration += bath.duration();
            let mean_rho = bath.samples.iter().map(|&x| rho_ee_analytic(&p, x)).sum::<f64>() / bath.len() as f64;
            expected += p.gamma() * mean_rho * bath.duration();
            let coarse = bath.resample(0.0, 1e-5, 250).unwrap();
            exact += p.gamma()
                * coarse.samples.iter().map(|&x| liouvillian_steady_state(&p, x).unwrap().excited_population()).sum::<f64>()
                / coarse.len() as f64
                * bath.duration();
        }
        let rate = emitted as f64 / duration;
        let ratio = emitted as f64 / expected;
        assert!((ratio - 1.0).abs() < 0.15, "rate {rate}, ratio {ratio}");
        assert!(rate <= p.gamma());
        assert!((emitted as f64 / exact - 1.0).abs() < 0.15);
    }

    #[test]
    fn trajectory_is_deterministic() {
        let p = CptParams::reference();
        let bath = ou_path(&BathParams::reference(), 50e-6, 1e-7, &mut derive(5, 0, Purpose::Bath)).unwrap();
        let a = sse_trajectory(&p, &bath, 0.6e-9, &mut derive(5, 0, Purpose::Sse), true).unwrap();
        let b = sse_trajectory(&p, &bath, 0.6e-9, &mut derive(5, 0, Purpose::Sse), true).unwrap();
        assert_eq!(a, b);
        assert!(a.dt_int <= 0.6e-9);
        assert_eq!(a.rho_ee_trace.as_ref().unwrap().len(), bath.len());
    }

    #[test]
    fn thinning_limits() {
        let ev = events_at(&[1.0, 2.0, 3.0]);
        let mut rng = derive(0, 0, Purpose::Thinning);
        assert_eq!(thin_detect(&ev, 1.0, &mut rng).unwrap(), ev);
        assert!(thin_detect(&[], 0.3, &mut rng).unwrap().is_empty());
        assert!(thin_detect(&ev, 0.0, &mut rng).is_err());
    }

    #[test]
    fn thinning_is_binomial() {
        let n = 1_000_000;
        let ev = vec![EmissionEvent { time: 0.0, channel: Channel::ToState1 }; n];
        let kept = thin_detect(&ev, 0.016, &mut derive(1, 0, Purpose::Thinning)).unwrap().len() as f64;
        let mean = n as f64 * 0.016;
        let sd = (mean * (1.0 - 0.016)).sqrt();
        assert!((kept - mean).abs() < 3.0 * sd, "{kept}");
    }

    #[test]
    fn binning_places_and_conserves() {
        let tau = 1e-5;
        let s = bin_events(&events_at(&[1.5 * tau]), tau, 0.0, 5.0 * tau).unwrap();
        assert_eq!(s.counts, vec![0, 1, 0, 0, 0]);

        let times = [0.2e-5, 0.2e-5, 3.9e-5, 4.99e-5, -1e-6, 5.0e-5, 7e-5];
        let s = bin_events(&events_at(&times), tau, 0.0, 5.0 * tau).unwrap();
        assert_eq!(s.total(), 4);
        assert_eq!(s.counts, vec![2, 0, 0, 1, 1]);
        assert!(bin_events(&[], 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn steady_counts_dark_when_pinned() {
        let p = CptParams::reference();
        let bath = constant_bath(p.bias(), 1e-3, 1e-5);
        let s = steady_emission_counts(&p, &bath, 1e-5, &mut derive(0, 0, Purpose::Counts)).unwrap();
        assert_eq!(s.len(), 100);
        assert_eq!(s.total(), 0);
    }

    #[test]
    fn steady_counts_reference_rate() {
        let p = CptParams::reference();
        let b = BathParams::reference();
        let mut total = 0u64;
        let mut bins = 0usize;
        for r in 0..100 {
            let bath = ou_path(&b, 10e-3, 1e-7, &mut derive(8, r, Purpose::Bath)).unwrap();
            let s = steady_emission_counts(&p, &bath, 1e-5, &mut derive(8, r, Purpose::Counts)).unwrap();
            assert_eq!(s.len(), 1000);
            total += s.total();
            bins += s.len();
        }
        let per_bin = total as f64 / bins as f64;
        let rate = per_bin / 1e-5;
        // Ensemble mean of the rate over the stationary bath.
        let expected = crate::quadrature::GaussHermite::new(64)
            .expect_normal(0.0, b.sigma(), |x| crate::cpt::detection_rate(&p, x));
        assert!((rate - expected).abs() < 0.1 * expected, "{rate} vs {expected}");
        assert!((rate - 1e4).abs() < 0.2e4, "{rate}");
    }

    #[test]
    fn steady_counts_reject_sub_step_bins() {
        let p = CptParams::reference();
        let bath = constant_bath(0.0, 1e-4, 1e-5);
        assert!(steady_emission_counts(&p, &bath, 1e-6, &mut derive(0, 0, Purpose::Counts)).is_err());
    }
}
