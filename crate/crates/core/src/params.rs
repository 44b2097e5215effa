use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Physical constants of the collapsing dust ball together with the time partition at which
/// the noise is switched on.
///
/// `kappa = 8πGρ₀/3`, so that `t_star = π/(2√κ)` coincides with the Newtonian free-fall time
/// `√(3π/(32Gρ₀))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub g: f64,
    pub rho0: f64,
    pub kappa: f64,
    pub t_star: f64,
    pub t_eps: f64,
    pub eps: f64,
}

impl ModelParams {
    pub const DEFAULT_SWITCH_FRACTION: f64 = 0.99;

    /// Parameters with the switch-on time at the default fraction of `t_star`.
    pub fn new(g: f64, rho0: f64) -> Result<Self> {
        Self::with_switch_fraction(g, rho0, Self::DEFAULT_SWITCH_FRACTION)
    }

    pub fn with_switch_fraction(g: f64, rho0: f64, fraction: f64) -> Result<Self> {
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::Config(format!("G must be positive, got {g}")));
        }
        if !(rho0 > 0.0 && rho0.is_finite()) {
            return Err(Error::Config(format!("rho0 must be positive, got {rho0}")));
        }
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::Config(format!(
                "switch fraction must lie in (0, 1), got {fraction}"
            )));
        }
        let kappa = 8.0 * PI * g * rho0 / 3.0;
        let t_star = PI / (2.0 * kappa.sqrt());
        let t_eps = fraction * t_star;
        Ok(Self {
            g,
            rho0,
            kappa,
            t_star,
            t_eps,
            eps: t_star - t_eps,
        })
    }

    /// Parameters with an absolute switch-on time.
    pub fn with_switch_time(g: f64, rho0: f64, t_eps: f64) -> Result<Self> {
        let base = Self::new(g, rho0)?;
        if !(t_eps > 0.0) {
            return Err(Error::Config(format!("t_eps must be positive, got {t_eps}")));
        }
        if t_eps >= base.t_star {
            return Err(Error::Config(format!(
                "t_eps = {t_eps} must precede the collapse time t* = {}",
                base.t_star
            )));
        }
        Ok(Self {
            t_eps,
            eps: base.t_star - t_eps,
            ..base
        })
    }

    /// Parameters specified directly by the rate constant, with `G = 1`.
    pub fn from_kappa(kappa: f64) -> Result<Self> {
        Self::new(1.0, 3.0 * kappa / (8.0 * PI))
    }

    pub fn sqrt_kappa(&self) -> f64 {
        self.kappa.sqrt()
    }

    /// Noise coefficient ψ(u) = √κ u² √(u−1); zero at and below the natural boundary u = 1.
    pub fn psi(&self, u: f64) -> f64 {
        if u <= 1.0 {
            0.0
        } else {
            self.sqrt_kappa() * u * u * (u - 1.0).sqrt()
        }
    }

    /// ψ(u)² = κ u⁴ (u−1).
    pub fn psi_sq(&self, u: f64) -> f64 {
        if u <= 1.0 {
            0.0
        } else {
            self.kappa * u.powi(4) * (u - 1.0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g > 0.0 && self.rho0 > 0.0 && self.kappa > 0.0) {
            return Err(Error::Config("G, rho0 and kappa must be positive".into()));
        }
        if !(self.t_eps > 0.0 && self.t_eps < self.t_star && self.eps > 0.0) {
            return Err(Error::Config(format!(
                "partition requires 0 < t_eps < t* (t_eps = {}, t* = {})",
                self.t_eps, self.t_star
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_and_collapse_time_at_unit_constants() {
        let p = ModelParams::new(1.0, 1.0).unwrap();
        assert!((p.kappa - 8.0 * PI / 3.0).abs() < 1e-14);
        assert!((p.t_star - (3.0 * PI / 32.0).sqrt()).abs() < 1e-14);
        assert!((p.t_eps + p.eps - p.t_star).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_partition() {
        assert!(ModelParams::with_switch_fraction(1.0, 1.0, 1.0).is_err());
        assert!(ModelParams::with_switch_time(1.0, 1.0, 0.6).is_err());
        assert!(ModelParams::new(-1.0, 1.0).is_err());
    }

    #[test]
    fn psi_vanishes_on_boundary() {
        let p = ModelParams::new(1.0, 1.0).unwrap();
        assert_eq!(p.psi(1.0), 0.0);
        assert!((p.psi_sq(2.0) - 16.0 * p.kappa).abs() < 1e-12);
        assert!((p.psi(2.0).powi(2) - p.psi_sq(2.0)).abs() < 1e-10);
    }
}
