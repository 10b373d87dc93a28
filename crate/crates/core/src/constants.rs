//! Scale constants of the multiscale procedure.
//!
//! Length scales double (`L_k = 2^(k-1)`, so `L_0 = 1/2`) while the resonance
//! windows shrink as `eps_k = eps^(L_k^psi)`. The windows underflow double
//! precision after a handful of scales, so they are also available in log form.

use serde::{Deserialize, Serialize};

/// Fractional-exponential decay exponent.
pub const PSI: f64 = 2.0 / 3.0;
/// Correlator decay exponent, `psi / 3`.
pub const CHI: f64 = PSI / 3.0;
/// Smallest window value handed out in linear form.
pub const EPS_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleConstants {
    pub psi: f64,
    pub phi: f64,
    pub chi: f64,
    /// Step-one window, `gamma^phi`.
    pub eps: f64,
}

impl ScaleConstants {
    pub fn new(gamma: f64, phi: f64) -> Self {
        Self { psi: PSI, phi, chi: CHI, eps: gamma.powf(phi) }
    }

    pub fn from_params(p: &crate::model::ModelParams) -> Self {
        Self::new(p.gamma(), p.phi())
    }

    pub fn length(&self, k: usize) -> f64 {
        if k == 0 {
            0.5
        } else {
            2f64.powi(k as i32 - 1)
        }
    }

    pub fn ln_eps_k(&self, k: usize) -> f64 {
        self.length(k).powf(self.psi) * self.eps.ln()
    }

    /// Window width at scale `k`, floored at [`EPS_FLOOR`].
    pub fn eps_k(&self, k: usize) -> f64 {
        self.ln_eps_k(k).exp().max(EPS_FLOOR)
    }

    /// `value <= eps_k`, compared in log space once the window underflows.
    pub fn within_eps_k(&self, value: f64, k: usize) -> bool {
        let ln_w = self.ln_eps_k(k);
        if ln_w > EPS_FLOOR.ln() {
            value <= ln_w.exp()
        } else {
            value <= 0.0 || value.ln() <= ln_w
        }
    }

    /// Isolation volume limit `L_k^(2 psi / 5)`.
    pub fn isolation_volume(&self, k: usize) -> f64 {
        self.length(k).powf(2.0 * self.psi / 5.0)
    }

    /// Autoresonance / stopping volume limit `L_k^(psi / 4)`.
    pub fn autoresonance_volume(&self, k: usize) -> f64 {
        self.length(k).powf(self.psi / 4.0)
    }

    /// Collar radius of the truncated block matrices used on scale `k` (`L_{k-2}`).
    pub fn truncation_radius(&self, k: usize) -> f64 {
        assert!(k >= 2, "truncation is defined from scale 2 on");
        self.length(k - 2)
    }

    /// Percolation exponents `q_1 = 1/5, q_2 = 1/6, q_3 = 1/7`,
    /// `q_k = q_{k-1} (1 - L_{k-2}^(-psi/20))`. The recursion drops sharply at
    /// `k = 4` (`q_4 ≈ 3.26e-3`) and keeps decreasing toward a tiny positive floor.
    pub fn q(&self, k: usize) -> f64 {
        match k {
            0 | 1 => 0.2,
            2 => 1.0 / 6.0,
            3 => 1.0 / 7.0,
            _ => self.q(k - 1) * (1.0 - self.length(k - 2).powf(-self.psi / 20.0)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lengths_and_windows() {
        let sc = ScaleConstants::new(1e-3, 0.25);
        assert_eq!(sc.length(0), 0.5);
        assert_eq!(sc.length(1), 1.0);
        assert_eq!(sc.length(5), 16.0);
        assert!((sc.eps - 1e-3f64.powf(0.25)).abs() < 1e-15);
        assert!((sc.eps_k(1) - sc.eps).abs() < 1e-15);
        for k in 1..12 {
            assert!(sc.eps_k(k + 1) < sc.eps_k(k) || sc.eps_k(k + 1) == EPS_FLOOR);
            assert!(sc.ln_eps_k(k + 1) < sc.ln_eps_k(k));
        }
        assert_eq!(sc.truncation_radius(2), 0.5);
        assert_eq!(sc.truncation_radius(4), 2.0);
    }

    #[test]
    fn log_space_threshold() {
        let sc = ScaleConstants::new(1e-3, 0.25);
        // L_14 = 8192 -> eps_14 = eps^(8192^(2/3)) far below f64 range.
        assert_eq!(sc.eps_k(14), EPS_FLOOR);
        assert!(!sc.within_eps_k(1e-300, 14));
        assert!(sc.within_eps_k(0.0, 14));
        let w = sc.eps_k(3);
        assert!(sc.within_eps_k(w, 3));
        assert!(!sc.within_eps_k(w * (1.0 + 1e-12), 3));
    }

    #[test]
    fn q_recursion() {
        let sc = ScaleConstants::new(1e-3, 0.25);
        assert_eq!(sc.q(1), 0.2);
        assert_eq!(sc.q(2), 1.0 / 6.0);
        assert_eq!(sc.q(3), 1.0 / 7.0);
        let q4 = (1.0 / 7.0) * (1.0 - 2f64.powf(-1.0 / 30.0));
        assert!((sc.q(4) - q4).abs() < 1e-15);
        assert!((sc.q(4) - 0.003_26).abs() < 1e-5);
        for k in 1..15 {
            assert!(sc.q(k + 1) < sc.q(k) && sc.q(k + 1) > 0.0);
        }
    }

    #[test]
    fn isolation_limits() {
        let sc = ScaleConstants::new(1e-3, 0.25);
        assert!((sc.isolation_volume(2) - 2f64.powf(4.0 / 15.0)).abs() < 1e-15);
        assert!((sc.isolation_volume(2) - 1.203).abs() < 1e-3);
        assert_eq!(sc.autoresonance_volume(1), 1.0);
    }
}
