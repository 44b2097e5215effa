//! Static stellar equilibrium: the uniform-density interior Schwarzschild solution, the
//! Buchdahl compactness bound and Lane–Emden polytropes.
//!
//! Geometric units (`G = 1`) are the default; every entry point accepts `G` explicitly.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::ode::rk4_step;

/// Compactness 2GM/R at which the central pressure of a uniform star diverges.
pub const BUCHDAHL_COMPACTNESS: f64 = 8.0 / 9.0;

/// A uniform-density static star.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarConfig {
    pub mass: f64,
    pub radius: f64,
    pub g: f64,
    pub rho0: f64,
}

impl StarConfig {
    pub fn new(mass: f64, radius: f64) -> Result<Self> {
        Self::with_g(mass, radius, 1.0)
    }

    pub fn with_g(mass: f64, radius: f64, g: f64) -> Result<Self> {
        if !(mass > 0.0 && radius > 0.0 && g > 0.0) {
            return Err(Error::InvalidStar(format!(
                "mass, radius and G must be positive (M = {mass}, R = {radius}, G = {g})"
            )));
        }
        let compactness = 2.0 * g * mass / radius;
        if compactness >= 1.0 {
            return Err(Error::InvalidStar(format!(
                "compactness 2GM/R = {compactness} places the surface inside the horizon"
            )));
        }
        Ok(Self {
            mass,
            radius,
            g,
            rho0: 3.0 * mass / (4.0 * PI * radius.powi(3)),
        })
    }

    /// Star of unit radius with the requested compactness `2GM/R` (G = 1).
    pub fn from_compactness(compactness: f64) -> Result<Self> {
        Self::new(0.5 * compactness, 1.0)
    }

    pub fn compactness(&self) -> f64 {
        2.0 * self.g * self.mass / self.radius
    }
}

/// Pressure profile of the uniform-density interior Schwarzschild star,
/// `p(r) = ρ₀ [√(1−c r²/R²) − √(1−c)] / [3√(1−c) − √(1−c r²/R²)]` with `c = 2GM/R`.
pub fn interior_pressure(cfg: &StarConfig, r: f64) -> Result<f64> {
    let c = cfg.compactness();
    if c >= BUCHDAHL_COMPACTNESS {
        return Err(Error::Compactness { compactness: c });
    }
    if !(0.0..=cfg.radius).contains(&r) {
        return Err(Error::Domain(format!(
            "radius {r} outside the star [0, {}]",
            cfg.radius
        )));
    }
    let x = r / cfg.radius;
    let inner = (1.0 - c * x * x).sqrt();
    let surface = (1.0 - c).sqrt();
    Ok(cfg.rho0 * (inner - surface) / (3.0 * surface - inner))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuchdahlVerdict {
    pub compactness: f64,
    pub stable: bool,
    /// Central pressure in absolute units; `None` when unstable.
    pub central_pressure: Option<f64>,
    /// Central pressure divided by ρ₀.
    pub central_pressure_ratio: Option<f64>,
}

pub fn buchdahl_check(cfg: &StarConfig) -> BuchdahlVerdict {
    let c = cfg.compactness();
    let stable = c < BUCHDAHL_COMPACTNESS;
    let central_pressure = if stable {
        interior_pressure(cfg, 0.0).ok()
    } else {
        None
    };
    BuchdahlVerdict {
        compactness: c,
        stable,
        central_pressure,
        central_pressure_ratio: central_pressure.map(|p| p / cfg.rho0),
    }
}

/// Radius of a uniform star with density ρ₀ and central pressure `p_c`, from
/// `(ρ₀+p_c)/(ρ₀+3p_c) = √(1 − 8πGρ₀R²/3)`. Vanishes as `p_c → 0`.
pub fn radius_from_central_pressure(rho0: f64, p_c: f64, g: f64) -> f64 {
    let ratio = (rho0 + p_c) / (rho0 + 3.0 * p_c);
    (3.0 / (8.0 * PI * g * rho0) * (1.0 - ratio * ratio)).sqrt()
}

/// Series start used to step off the regular singular point ξ = 0.
pub const SERIES_START: f64 = 1e-3;
/// Integration budget in ξ before declaring the polytrope unbounded.
pub const XI_BUDGET: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    pub xi1: f64,
    pub dtheta: f64,
    pub mu1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneEmdenSolution {
    pub n: f64,
    pub step: f64,
    /// Samples (ξ, θ, θ'). The first sample is the centre, the second the series start,
    /// then a uniform grid of spacing `step`.
    pub samples: Vec<(f64, f64, f64)>,
    /// `None` when no zero was found within [`XI_BUDGET`].
    pub surface: Option<Surface>,
}

fn lane_emden_rhs(n: f64) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] {
    move |xi, y| {
        let th = y[0].max(0.0);
        let src = if n == 0.0 { 1.0 } else { th.powf(n) };
        [y[1], -src - 2.0 * y[1] / xi]
    }
}

/// Integrate the Lane–Emden equation to its first zero (or the ξ budget).
pub fn lane_emden_integrate(n: f64, step: f64) -> Result<LaneEmdenSolution> {
    if !(n >= 0.0 && n.is_finite()) {
        return Err(Error::Domain(format!("polytropic index must be >= 0, got {n}")));
    }
    if !(step > 0.0 && step < 1.0) {
        return Err(Error::Domain(format!("step must lie in (0, 1), got {step}")));
    }
    let f = lane_emden_rhs(n);
    let x0 = SERIES_START;
    let th0 = 1.0 - x0 * x0 / 6.0 + n * x0.powi(4) / 120.0;
    let dth0 = -x0 / 3.0 + n * x0.powi(3) / 30.0;
    let mut samples = vec![(0.0, 1.0, 0.0), (x0, th0, dth0)];
    let mut y = [th0, dth0];
    let mut k: u64 = 0;
    loop {
        let xi = x0 + k as f64 * step;
        if xi >= XI_BUDGET {
            return Ok(LaneEmdenSolution {
                n,
                step,
                samples,
                surface: None,
            });
        }
        let next = rk4_step(&f, xi, &y, step);
        if next[0] <= 0.0 {
            let surface = refine_zero(&f, xi, &y, step);
            return Ok(LaneEmdenSolution {
                n,
                step,
                samples,
                surface: Some(surface),
            });
        }
        k += 1;
        y = next;
        samples.push((x0 + k as f64 * step, y[0], y[1]));
    }
}

/// Strict variant: a missing surface is an error.
pub fn lane_emden_solve(n: f64, step: f64) -> Result<LaneEmdenSolution> {
    let sol = lane_emden_integrate(n, step)?;
    if sol.surface.is_none() {
        return Err(Error::NoSurface { n, xi_max: XI_BUDGET });
    }
    Ok(sol)
}

// Find h in (0, step] with θ(ξ + h) = 0 for a single RK4 step from the last positive state,
// by bisection safeguarded secant on h.
fn refine_zero<F: Fn(f64, &[f64; 2]) -> [f64; 2]>(
    f: &F,
    xi: f64,
    y: &[f64; 2],
    step: f64,
) -> Surface {
    let (mut lo, mut hi) = (0.0_f64, step);
    let (mut flo, mut fhi) = (y[0], rk4_step(f, xi, y, step)[0]);
    for _ in 0..200 {
        let mut h = lo - flo * (hi - lo) / (fhi - flo);
        if !(h > lo && h < hi) {
            h = 0.5 * (lo + hi);
        }
        let v = rk4_step(f, xi, y, h)[0];
        if v > 0.0 {
            lo = h;
            flo = v;
        } else {
            hi = h;
            fhi = v;
        }
        if hi - lo < 1e-15 || v.abs() < 1e-16 {
            break;
        }
    }
    let h = if flo.abs() < fhi.abs() { lo } else { hi };
    let end = rk4_step(f, xi, y, h);
    let xi1 = xi + h;
    Surface {
        xi1,
        dtheta: end[1],
        mu1: -xi1 * xi1 * end[1],
    }
}

/// Maximum of |θ'' + (2/ξ)θ' + θⁿ| over the uniform part of the grid, with θ'' taken from a
/// five-point central difference of the stored θ' samples.
pub fn lane_emden_residual(sol: &LaneEmdenSolution) -> f64 {
    let s = &sol.samples[1..];
    let h = sol.step;
    let mut worst: f64 = 0.0;
    for i in 2..s.len().saturating_sub(2) {
        let d2 = (-s[i + 2].2 + 8.0 * s[i + 1].2 - 8.0 * s[i - 1].2 + s[i - 2].2) / (12.0 * h);
        let (xi, th, dth) = s[i];
        let src = if sol.n == 0.0 { 1.0 } else { th.max(0.0).powf(sol.n) };
        worst = worst.max((d2 + 2.0 * dth / xi + src).abs());
    }
    worst
}

/// Composite Simpson estimate of ∫₀^{ξ1} θⁿ ξ² dξ over the stored grid plus the final
/// partial interval (integrated with a fine RK4-free Simpson on Hermite-interpolated θ).
pub fn mass_integral_quadrature(sol: &LaneEmdenSolution) -> Option<f64> {
    let surf = sol.surface?;
    let n = sol.n;
    let g = |th: f64, xi: f64| {
        let th = th.max(0.0);
        (if n == 0.0 { 1.0 } else { th.powf(n) }) * xi * xi
    };
    // [0, ξ0] via the series.
    let x0 = sol.samples[1].0;
    let series = |xi: f64| 1.0 - xi * xi / 6.0 + n * xi.powi(4) / 120.0;
    let mut total = simpson(|xi| g(series(xi), xi), 0.0, x0, 16);
    // uniform grid
    let s = &sol.samples[1..];
    let h = sol.step;
    let m = s.len() - 1;
    let pairs = m / 2;
    for j in 0..pairs {
        let (a, b, c) = (s[2 * j], s[2 * j + 1], s[2 * j + 2]);
        total += h / 3.0 * (g(a.1, a.0) + 4.0 * g(b.1, b.0) + g(c.1, c.0));
    }
    let mut last = s[2 * pairs];
    if m % 2 == 1 {
        // one leftover interval: cubic Hermite with Simpson
        let next = s[m];
        total += hermite_segment(&g, last, next, 32);
        last = next;
    }
    // final partial step to the surface
    let end = (surf.xi1, 0.0, surf.dtheta);
    total += hermite_segment(&g, last, end, 64);
    Some(total)
}

fn hermite_segment<G: Fn(f64, f64) -> f64>(
    g: &G,
    a: (f64, f64, f64),
    b: (f64, f64, f64),
    panels: usize,
) -> f64 {
    let len = b.0 - a.0;
    if len <= 0.0 {
        return 0.0;
    }
    let interp = |xi: f64| {
        let t = (xi - a.0) / len;
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * a.1
            + (t3 - 2.0 * t2 + t) * len * a.2
            + (-2.0 * t3 + 3.0 * t2) * b.1
            + (t3 - t2) * len * b.2
    };
    simpson(|xi| g(interp(xi), xi), a.0, b.0, panels)
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels + panels % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Polytrope {
    pub n: f64,
    /// Length scale α with r = αξ.
    pub alpha: f64,
    pub radius: f64,
    pub mass: f64,
}

/// Radius and mass of a polytrope `P = K ρ^{1+1/n}` with central density `rho_c`:
/// `R = α ξ1`, `M = 4π α³ ρ_c μ1` where `α² = (n+1) K ρ_c^{1/n−1} / (4πG)`, which equals
/// `M = 4π ρ_c^{(3γ−4)/2} |Kγ/(4πG(γ−1))|^{3/2} μ1` with `γ = 1 + 1/n`.
///
/// For the incompressible case `n = 0` the polytropic constant is meaningless; `kappa_eos`
/// is then read as the central pressure and `α² = p_c / (4πG ρ_c²)`.
pub fn polytrope_mass_radius(
    sol: &LaneEmdenSolution,
    kappa_eos: f64,
    rho_c: f64,
    g: f64,
) -> Result<Polytrope> {
    let surf = sol.surface.ok_or(Error::NoSurface {
        n: sol.n,
        xi_max: XI_BUDGET,
    })?;
    if !(kappa_eos > 0.0 && rho_c > 0.0 && g > 0.0) {
        return Err(Error::Domain("K, rho_c and G must be positive".into()));
    }
    let n = sol.n;
    let alpha2 = if n == 0.0 {
        kappa_eos / (4.0 * PI * g * rho_c * rho_c)
    } else {
        (n + 1.0) * kappa_eos * rho_c.powf(1.0 / n - 1.0) / (4.0 * PI * g)
    };
    let alpha = alpha2.sqrt();
    Ok(Polytrope {
        n,
        alpha,
        radius: alpha * surf.xi1,
        mass: 4.0 * PI * alpha.powi(3) * rho_c * surf.mu1,
    })
}
