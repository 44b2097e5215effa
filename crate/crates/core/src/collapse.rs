//! Deterministic dust collapse.
//!
//! With `u = 1/R` the collapse obeys `u' = √κ u²√(u−1)`, solved implicitly by
//! `√κ t = F(u) = √(u−1)/u + arctan√(u−1)`. Near the singularity `F → π/2`, so the
//! complement `G = π/2 − F` is carried explicitly wherever precision matters.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::ode::{dopri5, rk4_step, AdaptiveOptions, Termination};
use crate::params::ModelParams;

/// Offset used instead of `u0 = 1`, where the right-hand side has a square-root branch.
pub const START_OFFSET: f64 = 1e-12;
/// Default blow-up detection threshold on `u`.
pub const U_DETECT: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseState {
    pub t: f64,
    /// Scale factor.
    pub r: f64,
    /// Density function `1/R`.
    pub u: f64,
    pub rho: f64,
}

impl CollapseState {
    fn from_u(params: &ModelParams, t: f64, u: f64, r: f64) -> Self {
        Self {
            t,
            r,
            u,
            rho: params.rho0 * u * u * u,
        }
    }
}

pub fn collapse_time(params: &ModelParams) -> f64 {
    params.t_star
}

/// Closed-form free-fall time `√(3π/(32Gρ₀))`.
pub fn freefall_time(g: f64, rho0: f64) -> f64 {
    (3.0 * PI / (32.0 * g * rho0)).sqrt()
}

/// Cycloid `R = ½(1+cos ζ)`, `t = (ζ + sin ζ)/(2√κ)`; `u` is infinite at `ζ = π`.
pub fn cycloid_eval(params: &ModelParams, zeta: f64) -> Result<CollapseState> {
    if !(0.0..=PI).contains(&zeta) {
        return Err(Error::Domain(format!("cycloid angle {zeta} outside [0, π]")));
    }
    let r = if zeta == PI { 0.0 } else { 0.5 * (1.0 + zeta.cos()) };
    let t = (zeta + zeta.sin()) / (2.0 * params.sqrt_kappa());
    let u = if r == 0.0 { f64::INFINITY } else { 1.0 / r };
    Ok(CollapseState::from_u(params, t, u, r))
}

/// Solve `(ζ + sin ζ)/(2√κ) = t` for ζ ∈ [0, π].
pub fn cycloid_angle(params: &ModelParams, t: f64) -> f64 {
    let target = 2.0 * params.sqrt_kappa() * t;
    if target <= 0.0 {
        return 0.0;
    }
    if target >= PI {
        return PI;
    }
    let (mut lo, mut hi) = (0.0_f64, PI);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid + mid.sin() < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    0.5 * (lo + hi)
}

// G(s) = arctan(1/s) − s/(1+s²) with s = √(u−1). For s ≥ 10 the alternating series
// Σ (−1)^{k+1} (2k/(2k+1)) x^{2k+1}, x = 1/s, avoids the cancellation.
fn g_of_s(s: f64) -> f64 {
    if s <= 1.0 {
        return FRAC_PI_2 - f_of_s(s);
    }
    let x = 1.0 / s;
    if x < 0.1 {
        let x2 = x * x;
        let mut term = x * x2;
        let mut sum = 0.0;
        for k in 1..=16 {
            let kf = k as f64;
            let c = 2.0 * kf / (2.0 * kf + 1.0);
            if k % 2 == 1 {
                sum += c * term;
            } else {
                sum -= c * term;
            }
            term *= x2;
        }
        sum
    } else {
        x.atan() - s / (1.0 + s * s)
    }
}

fn f_of_s(s: f64) -> f64 {
    if s > 1.0 {
        return FRAC_PI_2 - g_of_s(s);
    }
    s / (1.0 + s * s) + s.atan()
}

/// `F(u) = √(u−1)/u + arctan√(u−1)`, increasing from 0 at `u = 1` to π/2 at infinity.
pub fn implicit_f(u: f64) -> f64 {
    if u <= 1.0 {
        return 0.0;
    }
    if u.is_infinite() {
        return FRAC_PI_2;
    }
    f_of_s((u - 1.0).sqrt())
}

/// Complement `π/2 − F(u)`, accurate for large `u` (≈ 2/(3u^{3/2})).
pub fn implicit_g(u: f64) -> f64 {
    if u <= 1.0 {
        return FRAC_PI_2;
    }
    if u.is_infinite() {
        return 0.0;
    }
    g_of_s((u - 1.0).sqrt())
}

// dF/ds = 2/(1+s²)².
fn dfds(s: f64) -> f64 {
    let q = 1.0 + s * s;
    2.0 / (q * q)
}

/// Solve `target(s) = value` by safeguarded Newton on `s ∈ [lo, hi]`, where `h` is increasing.
fn solve_increasing<H: Fn(f64) -> f64>(h: H, mut lo: f64, mut hi: f64, mut s: f64) -> f64 {
    for _ in 0..200 {
        let r = h(s);
        if r == 0.0 {
            return s;
        }
        if r < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let mut next = s - r / dfds(s);
        if !(next > lo && next < hi) {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * s.max(1.0) };
        }
        if (next - s).abs() <= 4.0 * f64::EPSILON * s.abs() {
            return next;
        }
        s = next;
    }
    s
}

/// Inverse of [`implicit_f`]; values at or beyond π/2 map to infinity.
pub fn u_from_f(f: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    if f >= FRAC_PI_2 {
        return f64::INFINITY;
    }
    if f > FRAC_PI_2 - 0.25 {
        return u_from_g(FRAC_PI_2 - f);
    }
    let s = solve_increasing(|s| f_of_s(s) - f, 0.0, f64::INFINITY, 0.5 * f);
    1.0 + s * s
}

/// Inverse of [`implicit_g`]; non-positive values map to infinity.
pub fn u_from_g(g: f64) -> f64 {
    if g <= 0.0 {
        return f64::INFINITY;
    }
    if g >= FRAC_PI_2 {
        return 1.0;
    }
    if g > 0.25 {
        return u_from_f(FRAC_PI_2 - g);
    }
    // G is decreasing in s, so solve −G(s) + g = 0 which is increasing.
    let guess = (2.0 / (3.0 * g)).cbrt();
    let s = solve_increasing(|s| g - g_of_s(s), 0.0, f64::INFINITY, guess);
    1.0 + s * s
}

/// Proper time at which the collapsing star reaches density function `u`.
pub fn implicit_time_of_u(params: &ModelParams, u: f64) -> f64 {
    implicit_f(u) / params.sqrt_kappa()
}

/// Remaining time `t* − t(u)` before the singularity.
pub fn time_to_singularity(params: &ModelParams, u: f64) -> f64 {
    implicit_g(u) / params.sqrt_kappa()
}

/// Density function at time `t` on the collapsing solution.
pub fn u_of_time(params: &ModelParams, t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    u_from_g(params.sqrt_kappa() * (params.t_star - t))
}

/// Right-hand side `√κ u²√(u−1)`, identical to the noise coefficient ψ.
pub fn density_rhs(params: &ModelParams, u: f64) -> f64 {
    params.psi(u)
}

/// Kretschmann scalar `4κ²u⁴(u²−u+1)`.
pub fn kretschmann(params: &ModelParams, u: f64) -> f64 {
    let k = params.kappa;
    4.0 * k * k * u.powi(4) * (u * u - u + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CollapseWarning {
    /// `u0 = 1` was replaced by `1 + START_OFFSET`.
    StartAtSingularPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlowUpSignal {
    /// `u` exceeded the detection threshold.
    Threshold,
    /// The adaptive step collapsed to its floor.
    StepFloor,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DensityOdeOptions {
    pub rtol: f64,
    pub u_detect: f64,
    pub h_min: f64,
}

impl Default for DensityOdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            u_detect: U_DETECT,
            h_min: 1e-14,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityTrajectory {
    pub states: Vec<CollapseState>,
    pub blowup: Option<(f64, BlowUpSignal)>,
    pub warnings: Vec<CollapseWarning>,
    pub rejected_steps: usize,
}

impl DensityTrajectory {
    /// Largest `|F(u) − F(u0) − √κ(t − t0)|` over states with `u` in `[u_lo, u_hi]`.
    pub fn oracle_residual(&self, params: &ModelParams, u_lo: f64, u_hi: f64) -> f64 {
        let first = self.states[0];
        let sk = params.sqrt_kappa();
        let g0 = implicit_g(first.u);
        self.states
            .iter()
            .filter(|s| s.u >= u_lo && s.u <= u_hi)
            .map(|s| ((g0 - implicit_g(s.u)) - sk * (s.t - first.t)).abs())
            .fold(0.0, f64::max)
    }

    /// Largest `|u·R − 1|`.
    pub fn duality_residual(&self) -> f64 {
        self.states
            .iter()
            .map(|s| (s.u * s.r - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn last(&self) -> &CollapseState {
        self.states.last().expect("trajectory holds at least its initial state")
    }
}

/// Adaptive integration of the density ODE (in the variable `s = √(u−1)`) co-integrated with
/// the scale-factor ODE
/// `R' = −√κ √(1/R − 1)`. The run starts at the proper time `t(u0)` of the collapsing
/// solution and ends at `t_end` or at blow-up detection.
pub fn solve_density_ode(
    params: &ModelParams,
    u0: f64,
    t_end: f64,
    opts: &DensityOdeOptions,
) -> Result<DensityTrajectory> {
    if !(u0 >= 1.0) {
        return Err(Error::Domain(format!("u0 must be >= 1, got {u0}")));
    }
    let mut warnings = Vec::new();
    let u0 = if u0 == 1.0 {
        warnings.push(CollapseWarning::StartAtSingularPoint);
        1.0 + START_OFFSET
    } else {
        u0
    };
    let t0 = implicit_time_of_u(params, u0);
    let sk = params.sqrt_kappa();
    // Evolve s = √(u−1), for which ds/dt = √κ(1+s²)²/2 is regular at the rest point. The
    // scale factor is carried together with its complement c = 1 − R, so that both ends of the
    // collapse keep full relative precision: Ṙ = −ċ = −√κ √(c/R).
    let rhs = move |_t: f64, y: &[f64; 3]| {
        let q = 1.0 + y[0] * y[0];
        let v = sk * (y[1].max(0.0) / y[2].max(f64::MIN_POSITIVE)).sqrt();
        [0.5 * sk * q * q, v, -v]
    };
    let s_detect = (opts.u_detect - 1.0).sqrt();
    let ode_opts = AdaptiveOptions {
        rtol: opts.rtol,
        atol: 0.0,
        h_init: 1e-6_f64.min(0.5 * (t_end - t0).abs().max(1e-12)),
        h_min: opts.h_min,
        max_steps: 5_000_000,
        floor_stops: true,
    };
    let mut states = vec![CollapseState::from_u(params, t0, u0, 1.0 / u0)];
    if t_end <= t0 {
        return Ok(DensityTrajectory {
            states,
            blowup: None,
            warnings,
            rejected_steps: 0,
        });
    }
    let s0 = (u0 - 1.0).sqrt();
    let c0 = s0 * s0 / (1.0 + s0 * s0);
    let traj = dopri5(rhs, t0, [s0, c0, 1.0 / u0], t_end, ode_opts, |_, y| {
        y[0] > s_detect
    })?;
    states.extend(
        traj.t
            .iter()
            .zip(&traj.y)
            .skip(1)
            .map(|(&t, y)| CollapseState::from_u(params, t, 1.0 + y[0] * y[0], y[2])),
    );
    let blowup = match traj.termination {
        Termination::ReachedEnd => None,
        Termination::Stopped => Some((*traj.t.last().unwrap(), BlowUpSignal::Threshold)),
        Termination::StepFloor => Some((*traj.t.last().unwrap(), BlowUpSignal::StepFloor)),
    };
    Ok(DensityTrajectory {
        states,
        blowup,
        warnings,
        rejected_steps: traj.rejected,
    })
}

/// Fixed-step RK4 solution of the density ODE from `(t(u0), u0)` to `t_end`.
pub fn solve_density_rk4(params: &ModelParams, u0: f64, t_end: f64, steps: usize) -> f64 {
    let sk = params.sqrt_kappa();
    let f = |_t: f64, y: &[f64; 1]| {
        let u = y[0].max(1.0);
        [sk * u * u * (u - 1.0).sqrt()]
    };
    let t0 = implicit_time_of_u(params, u0);
    let h = (t_end - t0) / steps as f64;
    let mut y = [u0];
    for i in 0..steps {
        y = rk4_step(&f, t0 + i as f64 * h, &y, h);
    }
    y[0]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreefallReport {
    pub closed_form: f64,
    pub collapse_time: f64,
    /// Time at which the integrated radius reached the detection floor.
    pub integrated: f64,
    pub abs_error: f64,
    /// Largest residual of `ṙ = −√κ √(1/r − 1)` along the cycloid on ζ ∈ [0.01, π − 0.01].
    pub cycloid_residual: f64,
    pub initial_velocity: f64,
    pub agrees: bool,
}

/// Integrate the Newtonian free-fall `ṙ = −√κ √(1/r − 1)` from rest at `r = 1` and compare the
/// crunch time with the closed form.
pub fn newtonian_freefall_check(params: &ModelParams) -> Result<FreefallReport> {
    let sk = params.sqrt_kappa();
    // Leave the rest point along the cycloid, where the ODE has a non-unique branch.
    let start = cycloid_eval(params, 1e-4)?;
    let rhs = move |_t: f64, y: &[f64; 1]| [-sk * (1.0 / y[0].max(f64::MIN_POSITIVE) - 1.0).max(0.0).sqrt()];
    let opts = AdaptiveOptions {
        rtol: 1e-11,
        atol: 0.0,
        h_init: 1e-6,
        h_min: 1e-15,
        max_steps: 2_000_000,
        floor_stops: true,
    };
    let traj = dopri5(rhs, start.t, [start.r], 2.0 * params.t_star, opts, |_, y| y[0] < 1e-9)?;
    let integrated = *traj.t.last().unwrap();
    let mut cycloid_residual: f64 = 0.0;
    let n = 2000;
    for i in 0..=n {
        let zeta = 0.01 + (PI - 0.02) * i as f64 / n as f64;
        let r = 0.5 * (1.0 + zeta.cos());
        let rdot = -zeta.sin() * sk / (1.0 + zeta.cos());
        let ode = -sk * (1.0 / r - 1.0).sqrt();
        cycloid_residual = cycloid_residual.max((rdot - ode).abs());
    }
    let closed_form = freefall_time(params.g, params.rho0);
    let abs_error = (integrated - closed_form).abs();
    Ok(FreefallReport {
        closed_form,
        collapse_time: params.t_star,
        integrated,
        abs_error,
        cycloid_residual,
        initial_velocity: -sk * (1.0f64 / 1.0 - 1.0).sqrt(),
        agrees: abs_error < 1e-4 && (closed_form - params.t_star).abs() < 1e-12,
    })
}
