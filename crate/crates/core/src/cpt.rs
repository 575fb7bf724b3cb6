//! Λ-system excited-state population under two-field driving.
//!
//! Basis ordering is `(|0⟩, |1⟩, |e⟩)` throughout. The bath enters as a
//! fluctuation `x` of the ground-state splitting, so the effective Raman
//! detuning is `Δ = Δ0 − x` and the dark point sits at `x = Δ0`.

use nalgebra::{Matrix3, SMatrix, SVector};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::TAU;
use thiserror::Error;

type C = Complex64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CptError {
    #[error("invalid CPT parameters: {0}")]
    InvalidParams(String),
    #[error("Liouvillian null space has dimension {null_dim}, expected 1")]
    SingularLiouvillian { null_dim: usize },
}

/// Drive, decay and detection parameters. All frequencies are angular (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CptParams {
    rabi: f64,
    gamma: f64,
    kappa: f64,
    gamma_s: f64,
    bias: f64,
    eta: f64,
}

/// `Ω²/(2κγs)`, infinite when the spin coherence does not decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Cooperativity {
    Finite(f64),
    Infinite,
}

impl CptParams {
    /// Builds parameters with `κ = Γ/2` and `γs = 0`.
    pub fn new(rabi: f64, gamma: f64, bias: f64, eta: f64) -> Result<Self, CptError> {
        Self::with_dephasing(rabi, gamma, gamma / 2.0, 0.0, bias, eta)
    }

    pub fn with_dephasing(
        rabi: f64,
        gamma: f64,
        kappa: f64,
        gamma_s: f64,
        bias: f64,
        eta: f64,
    ) -> Result<Self, CptError> {
        let bad = |m: &str| Err(CptError::InvalidParams(m.to_string()));
        if !(rabi > 0.0 && rabi.is_finite()) {
            return bad("rabi frequency must be positive and finite");
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return bad("spontaneous emission rate must be positive and finite");
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return bad("optical coherence decay rate must be positive and finite");
        }
        if !(gamma_s >= 0.0 && gamma_s.is_finite()) {
            return bad("spin coherence decay rate must be non-negative and finite");
        }
        if !bias.is_finite() {
            return bad("bias must be finite");
        }
        if !(eta > 0.0 && eta <= 1.0) {
            return bad("detection efficiency must lie in (0, 1]");
        }
        Ok(Self { rabi, gamma, kappa, gamma_s, bias, eta })
    }

    /// Parameters used throughout the reference experiments:
    /// `(Ω, Γ, Δ0)/2π = (2.8, 13, 0.25)` MHz, `η = 0.016`.
    pub fn reference() -> Self {
        Self::new(TAU * 2.8e6, TAU * 13.0e6, TAU * 0.25e6, 0.016).expect("reference params are valid")
    }

    pub fn rabi(&self) -> f64 {
        self.rabi
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn gamma_s(&self) -> f64 {
        self.gamma_s
    }
    pub fn bias(&self) -> f64 {
        self.bias
    }
    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn with_rabi(self, rabi: f64) -> Result<Self, CptError> {
        Self::with_dephasing(rabi, self.gamma, self.kappa, self.gamma_s, self.bias, self.eta)
    }
    pub fn with_bias(self, bias: f64) -> Result<Self, CptError> {
        Self::with_dephasing(self.rabi, self.gamma, self.kappa, self.gamma_s, bias, self.eta)
    }
    pub fn with_eta(self, eta: f64) -> Result<Self, CptError> {
        Self::with_dephasing(self.rabi, self.gamma, self.kappa, self.gamma_s, self.bias, eta)
    }

    pub fn cooperativity(&self) -> Cooperativity {
        if self.gamma_s > 0.0 {
            Cooperativity::Finite(self.rabi * self.rabi / (2.0 * self.kappa * self.gamma_s))
        } else {
            Cooperativity::Infinite
        }
    }

    /// Power-broadened width `Ω²/2κ`.
    pub fn power_broadening(&self) -> f64 {
        self.rabi * self.rabi / (2.0 * self.kappa)
    }

    /// Off-resonant ceiling `Ω²/(2Γκ)` of the lineshape.
    pub fn max_population(&self) -> f64 {
        self.rabi * self.rabi / (2.0 * self.gamma * self.kappa)
    }

    /// True when `κ = Γ/2` and `γs = 0`, where the lineshape reduces to
    /// `A·Δ²/(Δ² + W²)` with `A = Ω²/Γ²`, `W = Ω²/Γ`.
    pub fn is_radiatively_limited(&self) -> bool {
        self.gamma_s == 0.0 && ((self.kappa - self.gamma / 2.0).abs() <= 1e-12 * self.gamma)
    }

    fn lineshape(&self) -> Lineshape {
        let p = self.power_broadening();
        Lineshape { b: self.max_population(), p, q: self.gamma_s + p, gamma_s: self.gamma_s }
    }
}

impl Default for CptParams {
    fn default() -> Self {
        Self::reference()
    }
}

/// `ρ = B(Δ² + Qγs)/(Δ² + Q²)`, algebraically identical to
/// `B[1 − P·Q/(Δ² + Q²)]` but free of cancellation near the dark point.
struct Lineshape {
    b: f64,
    p: f64,
    q: f64,
    gamma_s: f64,
}

impl Lineshape {
    fn rho(&self, delta: f64) -> f64 {
        let d2 = delta * delta;
        let r = self.b * (d2 + self.q * self.gamma_s) / (d2 + self.q * self.q);
        if r < 0.0 && r > -1e-15 {
            0.0
        } else {
            r
        }
    }

    /// dρ/dΔ
    fn drho_ddelta(&self, delta: f64) -> f64 {
        let den = delta * delta + self.q * self.q;
        2.0 * self.b * delta * self.q * self.p / (den * den)
    }
}

/// Steady-state excited population in the weak-excitation approximation.
pub fn rho_ee_analytic(p: &CptParams, x: f64) -> f64 {
    p.lineshape().rho(p.bias - x)
}

/// `∂ρ_ee/∂x` of [`rho_ee_analytic`].
pub fn rho_ee_derivative(p: &CptParams, x: f64) -> f64 {
    -p.lineshape().drho_ddelta(p.bias - x)
}

/// Detuning `Δ ≥ 0` at which the lineshape reaches `rho`, the inverse of
/// [`rho_ee_analytic`] on the branch `x ≤ Δ0`. Targets are clamped into the
/// lineshape's range.
pub fn detuning_at_population(p: &CptParams, rho: f64) -> f64 {
    let ls = p.lineshape();
    let floor = ls.rho(0.0);
    let target = rho.clamp(floor, ls.b * (1.0 - 1e-9));
    if target <= floor {
        return 0.0;
    }
    if p.is_radiatively_limited() {
        return ls.p * (target / (ls.b - target)).sqrt();
    }
    let mut hi = ls.q.max(f64::MIN_POSITIVE);
    while ls.rho(hi) < target {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ls.rho(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Detected photon rate `η·Γ·ρ_ee(x)` in counts per second.
pub fn detection_rate(p: &CptParams, x: f64) -> f64 {
    p.eta * p.gamma * rho_ee_analytic(p, x)
}

/// Per-photon Fisher information density `(∂ρ_ee/∂x)²/ρ_ee`.
///
/// At the dark point with `γs = 0` both numerator and denominator vanish
/// quadratically; the limit there is `4B/P²`.
pub fn fisher_density(p: &CptParams, x: f64) -> f64 {
    let rho = rho_ee_analytic(p, x);
    if rho > 0.0 {
        let d = rho_ee_derivative(p, x);
        d * d / rho
    } else {
        let ls = p.lineshape();
        4.0 * ls.b / (ls.p * ls.p)
    }
}

/// Rotating-frame Hamiltonian (ħ = 1) with the bath shifting `|1⟩`.
pub fn hamiltonian(p: &CptParams, x: f64) -> Matrix3<C> {
    let half_rabi = C::new(p.rabi / 2.0, 0.0);
    let mut h = Matrix3::zeros();
    for g in 0..2 {
        h[(2, g)] = half_rabi;
        h[(g, 2)] = half_rabi;
    }
    h[(1, 1)] = C::new(p.bias - x, 0.0);
    h
}

/// 3×3 density matrix over `(|0⟩, |1⟩, |e⟩)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix3(pub Matrix3<C>);

impl DensityMatrix3 {
    pub fn excited_population(&self) -> f64 {
        self.0[(2, 2)].re
    }

    pub fn populations(&self) -> [f64; 3] {
        [self.0[(0, 0)].re, self.0[(1, 1)].re, self.0[(2, 2)].re]
    }

    pub fn trace(&self) -> C {
        self.0.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (self.0 - self.0.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (self.0 + self.0.adjoint()) * C::new(0.5, 0.0);
        herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }
}

type Super = SMatrix<C, 9, 9>;

fn vec_index(i: usize, j: usize) -> usize {
    3 * i + j
}

/// Applies the Lindblad generator to a single matrix.
fn lindblad_action(h: &Matrix3<C>, jumps: &[(f64, Matrix3<C>)], rho: &Matrix3<C>) -> Matrix3<C> {
    let i = C::new(0.0, 1.0);
    let mut out = -(h * rho - rho * h) * i;
    for (rate, l) in jumps {
        let ld = l.adjoint();
        let ldl = ld * l;
        out += (l * rho * ld - (ldl * rho + rho * ldl) * C::new(0.5, 0.0)) * C::new(*rate, 0.0);
    }
    out
}

fn jump_operators(p: &CptParams) -> Result<Vec<(f64, Matrix3<C>)>, CptError> {
    let one = C::new(1.0, 0.0);
    let mut to0 = Matrix3::zeros();
    to0[(0, 2)] = one;
    let mut to1 = Matrix3::zeros();
    to1[(1, 2)] = one;
    let mut ops = vec![(p.gamma / 2.0, to0), (p.gamma / 2.0, to1)];

    // Radiative decay alone dephases the optical coherences at Γ/2; any
    // excess κ is pure dephasing of |e⟩.
    let excess = p.kappa - p.gamma / 2.0;
    if excess < -1e-12 * p.gamma {
        return Err(CptError::InvalidParams(
            "kappa below Γ/2 has no Lindblad representation".into(),
        ));
    }
    if excess > 1e-12 * p.gamma {
        let mut ee = Matrix3::zeros();
        ee[(2, 2)] = one;
        ops.push((2.0 * excess, ee));
    }
    if p.gamma_s > 0.0 {
        // (|0⟩⟨0| − |1⟩⟨1|) at rate γs/2 decays ρ01 at γs.
        let mut z = Matrix3::zeros();
        z[(0, 0)] = one;
        z[(1, 1)] = -one;
        ops.push((p.gamma_s / 2.0, z));
    }
    Ok(ops)
}

/// Row-major vectorized Liouvillian `L` with `vec(ρ̇) = L·vec(ρ)`.
pub fn liouvillian(p: &CptParams, x: f64) -> Result<Super, CptError> {
    let h = hamiltonian(p, x);
    let jumps = jump_operators(p)?;
    let mut l = Super::zeros();
    for a in 0..3 {
        for b in 0..3 {
            let mut basis = Matrix3::zeros();
            basis[(a, b)] = C::new(1.0, 0.0);
            let img = lindblad_action(&h, &jumps, &basis);
            for i in 0..3 {
                for j in 0..3 {
                    l[(vec_index(i, j), vec_index(a, b))] = img[(i, j)];
                }
            }
        }
    }
    Ok(l)
}

/// Exact steady state of the master equation by a dense null-space solve.
///
/// Radiative decay splits equally into both ground states. When `κ > Γ/2`
/// the excess is added as pure dephasing of `|e⟩`; `γs > 0` adds ground-spin
/// dephasing (which also dephases the optical coherences by `γs/4`).
pub fn liouvillian_steady_state(p: &CptParams, x: f64) -> Result<DensityMatrix3, CptError> {
    let l = liouvillian(p, x)?;

    let sv = l.singular_values();
    let smax = sv.max();
    let tol = 9.0 * f64::EPSILON * smax;
    let null_dim = sv.iter().filter(|s| **s <= tol).count();
    if null_dim != 1 {
        return Err(CptError::SingularLiouvillian { null_dim });
    }

    let mut a = l;
    let mut rhs = SVector::<C, 9>::zeros();
    for col in 0..9 {
        a[(0, col)] = C::new(0.0, 0.0);
    }
    for k in 0..3 {
        a[(0, vec_index(k, k))] = C::new(1.0, 0.0);
    }
    rhs[0] = C::new(1.0, 0.0);

    let sol = a.lu().solve(&rhs).ok_or(CptError::SingularLiouvillian { null_dim: 2 })?;
    let mut rho = Matrix3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            rho[(i, j)] = sol[vec_index(i, j)];
        }
    }
    // Symmetrize away rounding asymmetry.
    let rho = (rho + rho.adjoint()) * C::new(0.5, 0.0);
    Ok(DensityMatrix3(rho))
}
