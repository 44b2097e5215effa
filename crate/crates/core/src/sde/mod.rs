//! Brownian drivers and path integrators for the hybrid system: the deterministic collapse
//! on `[0, t_ε]`, then `du = ψ(u) dB` (Itô) or `du = ψ(u) ∘ dB` (Stratonovich).

mod coeffs;
mod engine;
mod grid;

pub use coeffs::{ito_stratonovich_drift, DriftSpec, PsiSpec};
pub use engine::{
    exit_race, simulate, simulate_ito, simulate_path, simulate_stratonovich, EngineConfig,
    Ensemble, EnsembleSpec, EnsembleSummary, ExitCounts, InitialCondition, PathStatus,
    PathSummary, RecordStats, Records, SamplePath, Scheme, StratVariant, DEFAULT_SUBSTEP_ETA, EXP_BETAS,
};
pub use grid::TimeGrid;

use serde::{Deserialize, Serialize};

use crate::collapse::{implicit_g, solve_density_ode, DensityOdeOptions, DensityTrajectory, START_OFFSET};
use crate::error::Result;
use crate::params::ModelParams;

/// Level the driver must reach for the exact Stratonovich solution started at `u_eps` to blow
/// up: `(π/2 − F(u_eps))/√κ`.
pub fn hitting_level(params: &ModelParams, u_eps: f64) -> f64 {
    implicit_g(u_eps) / params.sqrt_kappa()
}

/// Doléans-Dade exponential `Y = Y_ε exp(Σψ(u_k)ΔB_k − ½Σψ(u_k)²Δt_k)` along a stored Itô path.
pub fn gbm_transform(path: &SamplePath, psi: &PsiSpec, y_eps: f64) -> SamplePath {
    let mut y = Vec::with_capacity(path.u.len());
    let mut log_y = 0.0;
    y.push(y_eps);
    for k in 0..path.u.len() - 1 {
        let h = path.t[k + 1] - path.t[k];
        let db = path.b[k + 1] - path.b[k];
        let u = path.u[k];
        log_y += psi.value(u) * db - 0.5 * psi.sq(u) * h;
        y.push(y_eps * log_y.exp());
    }
    SamplePath {
        scheme: Scheme::Gbm,
        u: y,
        ..path.clone()
    }
}

/// Running sum of squared increments.
pub fn quadratic_variation(values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in values.windows(2) {
        let d = w[1] - w[0];
        acc += d * d;
        out.push(acc);
    }
    out
}

/// Left-point Riemann sum of ψ(u)² along a stored path.
pub fn compensator(path: &SamplePath, psi: &PsiSpec) -> Vec<f64> {
    let mut out = Vec::with_capacity(path.u.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 0..path.u.len() - 1 {
        acc += psi.sq(path.u[k]) * (path.t[k + 1] - path.t[k]);
        out.push(acc);
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HybridPath {
    pub deterministic: DensityTrajectory,
    pub u_eps: f64,
    pub stochastic: SamplePath,
}

/// Deterministic collapse from `1 + δ` up to `t_ε`, then one stochastic path with the
/// configured scheme (path `index` of the configured seed).
pub fn hybrid_drive(params: &ModelParams, cfg: &EngineConfig, index: usize) -> Result<HybridPath> {
    params.validate()?;
    let det = solve_density_ode(params, 1.0 + START_OFFSET, params.t_eps, &DensityOdeOptions::default())?;
    let u_eps = det.last().u;
    let stochastic = simulate_path(params, u_eps, params.t_eps, cfg, index)?;
    Ok(HybridPath {
        deterministic: det,
        u_eps,
        stochastic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collapse::u_of_time;

    fn unit() -> ModelParams {
        ModelParams::new(1.0, 1.0).unwrap()
    }

    fn ito_cfg(p: &ModelParams, n: usize, span: f64, dt: f64) -> EngineConfig {
        EngineConfig::new(
            Scheme::ItoEuler,
            PsiSpec::collapse(p),
            n,
            TimeGrid::Uniform { dt },
            p.t_eps + span,
            1e3,
            7,
        )
    }

    #[test]
    fn hitting_level_at_two() {
        let l = hitting_level(&unit(), 2.0);
        assert!((l - 0.098604).abs() < 1e-6, "{l}");
    }

    #[test]
    fn hybrid_switch_value_matches_inversion() {
        let p = unit();
        let cfg = ito_cfg(&p, 1, 1e-3, 1e-5);
        let h = hybrid_drive(&p, &cfg, 0).unwrap();
        let oracle = u_of_time(&p, p.t_eps);
        assert!(((h.u_eps - oracle) / oracle).abs() < 1e-6, "{} vs {oracle}", h.u_eps);
        assert!((oracle - 12.372074).abs() < 1e-5, "{oracle}");
    }

    #[test]
    fn zero_amplitude_freezes_the_stochastic_leg() {
        let p = unit();
        let mut cfg = ito_cfg(&p, 1, 1e-3, 1e-5);
        cfg.noise_amplitude = 0.0;
        let h = hybrid_drive(&p, &cfg, 0).unwrap();
        assert!(h.stochastic.u.iter().all(|&u| u == h.u_eps));
        assert!(h.deterministic.oracle_residual(&p, 1.0, f64::INFINITY) < 1e-6);
    }

    #[test]
    fn same_seed_same_path() {
        let p = unit();
        let cfg = ito_cfg(&p, 1, 1e-3, 1e-5);
        let a = simulate_path(&p, 2.0, p.t_eps, &cfg, 3).unwrap();
        let b = simulate_path(&p, 2.0, p.t_eps, &cfg, 3).unwrap();
        assert_eq!(a, b);
        let c = simulate_path(&p, 2.0, p.t_eps, &cfg, 4).unwrap();
        assert_ne!(a.u, c.u);
    }

    #[test]
    fn constant_paths_without_noise() {
        let p = unit();
        let mut cfg = ito_cfg(&p, 50, 1e-3, 1e-5);
        cfg.psi = PsiSpec::Constant { sigma: 0.0 };
        let ens = simulate(&p, 2.0, p.t_eps, &cfg).unwrap();
        assert!(ens.paths.iter().all(|q| q.u_final == 2.0));
        let mut cfg = ito_cfg(&p, 1, 1e-3, 1e-5);
        cfg.scheme = Scheme::StratExact;
        cfg.noise_amplitude = 0.0;
        let path = simulate_path(&p, 2.0, p.t_eps, &cfg, 0).unwrap();
        assert!(path.u.iter().all(|&u| (u - 2.0).abs() < 1e-12));
    }

    #[test]
    fn exact_blows_up_when_driver_reaches_level() {
        let p = unit();
        let mut cfg = ito_cfg(&p, 1, 1.0, 1e-5);
        cfg.scheme = Scheme::StratExact;
        let l = hitting_level(&p, 2.0);
        for i in 0..20 {
            let path = simulate_path(&p, 2.0, p.t_eps, &cfg, i).unwrap();
            let reached = path.b.iter().any(|&b| b >= l);
            assert_eq!(matches!(path.status, PathStatus::BlownUp { .. }), reached);
        }
    }

    #[test]
    fn pure_brownian_quadratic_variation() {
        let p = unit();
        let mut cfg = ito_cfg(&p, 1, 1.0, 1e-5);
        cfg.psi = PsiSpec::Constant { sigma: 1.0 };
        cfg.cap = 1e12;
        let path = simulate_path(&p, 2.0, p.t_eps, &cfg, 0).unwrap();
        let qv = *quadratic_variation(&path.b).last().unwrap();
        assert!((qv - 1.0).abs() < 0.01, "{qv}");
        let det: Vec<f64> = (0..=1000).map(|i| (i as f64 * 1e-3).sin()).collect();
        assert!(*quadratic_variation(&det).last().unwrap() < 1e-3);
    }

    #[test]
    fn gbm_with_zero_driver_decreases() {
        let path = SamplePath {
            scheme: Scheme::ItoEuler,
            t: vec![0.0, 0.1, 0.2, 0.3],
            u: vec![2.0; 4],
            b: vec![0.0; 4],
            status: PathStatus::Alive,
            cap: 1e3,
            clamp_events: 0,
            u_eps: 2.0,
        };
        let y = gbm_transform(&path, &PsiSpec::Constant { sigma: 1.0 }, 1.0);
        assert!(y.u.windows(2).all(|w| w[1] < w[0]));
        assert!((y.u[3] - (-0.15f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn ito_and_heun_agree_for_constant_coefficient() {
        let p = unit();
        let mut cfg = ito_cfg(&p, 1, 0.01, 1e-5);
        cfg.psi = PsiSpec::Constant { sigma: 0.7 };
        let a = simulate_path(&p, 2.0, p.t_eps, &cfg, 0).unwrap();
        cfg.scheme = Scheme::StratHeun;
        let b = simulate_path(&p, 2.0, p.t_eps, &cfg, 0).unwrap();
        let gap = a
            .u
            .iter()
            .zip(&b.u)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(gap < 1e-10, "{gap}");
    }

    #[test]
    fn exit_race_rejects_outside_start() {
        let psi = PsiSpec::Constant { sigma: 1.0 };
        assert!(exit_race(&psi, &DriftSpec::Zero, 2.0, 6.0, 7.0, 10, 1e-3, 10, 1).is_err());
    }
}
