//! Gauss–Hermite rules for expectations over a normal distribution.

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights for `∫ e^{−t²} f(t) dt`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Golub–Welsch initial nodes, polished by Newton on the orthonormal
    /// recurrence; weights from the Christoffel function.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "need at least one node");
        let mut jacobi = DMatrix::<f64>::zeros(n, n);
        for k in 1..n {
            let b = (k as f64 / 2.0).sqrt();
            jacobi[(k, k - 1)] = b;
            jacobi[(k - 1, k)] = b;
        }
        let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
        nodes.sort_by(|a, b| a.total_cmp(b));

        let mut weights = Vec::with_capacity(n);
        for t in nodes.iter_mut() {
            for _ in 0..3 {
                let (pn, dpn, _) = orthonormal_hermite(n, *t);
                if dpn != 0.0 {
                    *t -= pn / dpn;
                }
            }
            let (_, _, christoffel) = orthonormal_hermite(n, *t);
            weights.push(1.0 / christoffel);
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `E[f(X)]` for `X ~ N(mean, sd²)`.
    pub fn expect_normal(&self, mean: f64, sd: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let scale = std::f64::consts::SQRT_2 * sd;
        let s: f64 = self.nodes.iter().zip(&self.weights).map(|(t, w)| w * f(mean + scale * t)).sum();
        s / std::f64::consts::PI.sqrt()
    }
}

/// Returns `(p̃_n(t), p̃_n'(t), Σ_{k<n} p̃_k(t)²)` for the Hermite polynomials
/// orthonormal under `e^{−t²}`.
fn orthonormal_hermite(n: usize, t: f64) -> (f64, f64, f64) {
    let mut p_prev = 0.0;
    let mut p = std::f64::consts::PI.powf(-0.25);
    let mut sum_sq = 0.0;
    for k in 0..n {
        sum_sq += p * p;
        let next = t * (2.0 / (k as f64 + 1.0)).sqrt() * p - (k as f64 / (k as f64 + 1.0)).sqrt() * p_prev;
        p_prev = p;
        p = next;
    }
    // p̃_n' = √(2n) p̃_{n−1}
    (p, (2.0 * n as f64).sqrt() * p_prev, sum_sq)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_gaussian_moments() {
        for n in [8, 64, 128] {
            let gh = GaussHermite::new(n);
            let total: f64 = gh.weights.iter().sum();
            assert!((total - std::f64::consts::PI.sqrt()).abs() < 1e-13, "n={n}");
            assert!((gh.expect_normal(0.0, 2.0, |x| x * x) - 4.0).abs() < 1e-12);
            assert!((gh.expect_normal(1.0, 0.5, |x| x.powi(4)) - (1.0 + 6.0 * 0.25 + 3.0 * 0.0625)).abs() < 1e-12);
        }
    }

    #[test]
    fn nodes_symmetric_and_sorted() {
        let gh = GaussHermite::new(64);
        for i in 0..32 {
            assert!((gh.nodes[i] + gh.nodes[63 - i]).abs() < 1e-12);
            assert!((gh.weights[i] - gh.weights[63 - i]).abs() <= 1e-12 * gh.weights[i]);
        }
        assert!(gh.nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn smooth_expectation() {
        // E[cos X] = e^{−σ²/2}
        let gh = GaussHermite::new(64);
        let v = gh.expect_normal(0.0, 1.3, f64::cos);
        assert!((v - (-0.5f64 * 1.69).exp()).abs() < 1e-14);
    }
}
