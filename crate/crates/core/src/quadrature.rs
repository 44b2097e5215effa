//! Adaptive Gauss–Kronrod quadrature and divergence classification over cutoff ladders.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::linear_fit;

// 15-point Kronrod nodes on [-1, 1] (non-negative half) with Kronrod and embedded Gauss weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

/// Settings for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_depth: u32,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-14,
            rel_tol: 1e-12,
            max_depth: 60,
        }
    }
}

/// Adaptive Gauss–Kronrod on a finite interval, with the interval pre-split geometrically
/// towards both endpoints so that endpoint-singular and long-tailed integrands converge.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if b < a {
        return integrate(f, b, a, opts).map(|v| -v);
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature("infinite limits are not supported".into()));
    }
    let breaks = breakpoints(a, b);
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (coarse, err) = gk15(&f, w[0], w[1]);
        total += adapt(&f, w[0], w[1], coarse, err, opts, 0)?;
    }
    if !total.is_finite() {
        return Err(Error::Quadrature(format!("non-finite value on [{a}, {b}]")));
    }
    Ok(total)
}

fn breakpoints(a: f64, b: f64) -> Vec<f64> {
    // Geometric refinement towards a and b; for wide positive ranges also log-spaced interior.
    let mut pts = vec![a];
    let len = b - a;
    let mut scale = 1e-12;
    while scale < 0.5 {
        let p = a + scale * len;
        if p > *pts.last().unwrap() {
            pts.push(p);
        }
        scale *= 10.0;
    }
    if a > 0.0 && b / a > 100.0 {
        let (la, lb) = (a.ln(), b.ln());
        let n = ((lb - la) / std::f64::consts::LN_10).ceil() as usize * 2;
        for i in 1..n {
            let p = (la + (lb - la) * i as f64 / n as f64).exp();
            if p > *pts.last().unwrap() && p < b {
                pts.push(p);
            }
        }
    } else {
        pts.push(a + 0.5 * len);
    }
    let mut scale = 0.1;
    while scale > 1e-12 {
        let p = b - scale * len;
        if p > *pts.last().unwrap() {
            pts.push(p);
        }
        scale /= 10.0;
    }
    pts.push(b);
    pts.dedup();
    pts
}

fn adapt<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    whole: f64,
    err: f64,
    opts: QuadOptions,
    depth: u32,
) -> Result<f64> {
    if !whole.is_finite() || err.is_nan() {
        return Err(Error::Quadrature(format!("non-finite value on [{a}, {b}]")));
    }
    let tol = opts.abs_tol.max(opts.rel_tol * whole.abs());
    if err <= tol || (b - a) <= 1e-15 * a.abs().max(b.abs()) {
        return Ok(whole);
    }
    if depth >= opts.max_depth {
        return Err(Error::Quadrature(format!(
            "panel refinement did not converge on [{a}, {b}] (err {err:e})"
        )));
    }
    let m = 0.5 * (a + b);
    let (l, el) = gk15(f, a, m);
    let (r, er) = gk15(f, m, b);
    let half = QuadOptions {
        abs_tol: opts.abs_tol * 0.5,
        ..opts
    };
    Ok(adapt(f, a, m, l, el, half, depth + 1)? + adapt(f, m, b, r, er, half, depth + 1)?)
}

/// How a sequence of truncated integrals behaves as the cutoff is pushed to its limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DivergenceClass {
    Converges,
    DivergesLog,
    DivergesLinear,
    /// Faster than linear: an exponential fit wins or the integral overflows.
    DivergesFast,
    Inconclusive,
}

impl DivergenceClass {
    pub fn diverges(self) -> bool {
        matches!(self, Self::DivergesLog | Self::DivergesLinear | Self::DivergesFast)
    }
}

/// Truncated integral values along a cutoff ladder with their classification.
///
/// `cutoffs` are expressed as the growing variable: the upper limit `U` for tails at
/// infinity, or `1/δ` for an endpoint approached as `floor + δ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureReport {
    pub integrand: String,
    pub domain: (f64, f64),
    pub ladder: Vec<(f64, f64)>,
    pub classification: DivergenceClass,
    /// Growth coefficient of the winning divergent model, or the extrapolated limit when
    /// the ladder converges.
    pub fitted: f64,
    pub r2_log: f64,
    pub r2_linear: f64,
}

/// Relative increment below which the last rung counts as converged.
pub const CONVERGENCE_TOL: f64 = 1e-3;
/// Minimum coefficient of determination for a divergent model to be accepted.
pub const MIN_R2: f64 = 0.999;

/// Deterministic divergence classifier.
///
/// 1. Converges when the last increment is below `CONVERGENCE_TOL` relative to the value and
///    increments are shrinking (ratio ≤ 2/3 over the last two steps). The limit is
///    extrapolated with Aitken's Δ².
/// 2. Otherwise fit `v = a + b·ln c` and `v = a + b·c` by least squares; the model with
///    R² > `MIN_R2` and the larger R² wins. A tie to 1e-9 is inconclusive.
/// 3. If neither fits, `ln v = a + b·c` with R² > `MIN_R2` and at least one e-fold of growth
///    over the ladder is classified as fast divergence; otherwise inconclusive.
///
/// A non-finite value (overflow) on the ladder counts as fast divergence.
pub fn classify_ladder(ladder: &[(f64, f64)]) -> (DivergenceClass, f64, f64, f64) {
    assert!(ladder.len() >= 3, "ladder needs at least three rungs");
    assert!(
        ladder.windows(2).all(|w| w[1].0 > w[0].0),
        "cutoffs must increase strictly"
    );
    let n = ladder.len();
    let v: Vec<f64> = ladder.iter().map(|p| p.1).collect();
    if v.iter().any(|x| x.is_infinite() && *x > 0.0) {
        return (DivergenceClass::DivergesFast, f64::INFINITY, f64::NAN, f64::NAN);
    }
    let d1 = v[n - 1] - v[n - 2];
    let d0 = v[n - 2] - v[n - 3];
    let shrinking = d1.abs() <= (2.0 / 3.0) * d0.abs() || d1.abs() <= 1e-12 * v[n - 1].abs();
    let logx: Vec<f64> = ladder.iter().map(|p| p.0.ln()).collect();
    let linx: Vec<f64> = ladder.iter().map(|p| p.0).collect();
    let fl = linear_fit(&logx, &v);
    let fx = linear_fit(&linx, &v);
    if d1.abs() <= CONVERGENCE_TOL * v[n - 1].abs().max(1e-300) && shrinking {
        let denom = d1 - d0;
        let limit = if denom.abs() > 0.0 && d1 != 0.0 {
            v[n - 1] - d1 * d1 / denom
        } else {
            v[n - 1]
        };
        return (DivergenceClass::Converges, limit, fl.r2, fx.r2);
    }
    let log_ok = fl.r2 > MIN_R2 && fl.slope > 0.0;
    let lin_ok = fx.r2 > MIN_R2 && fx.slope > 0.0;
    let class = match (log_ok, lin_ok) {
        (true, true) if (fl.r2 - fx.r2).abs() < 1e-9 => DivergenceClass::Inconclusive,
        (true, true) if fl.r2 > fx.r2 => DivergenceClass::DivergesLog,
        (true, true) => DivergenceClass::DivergesLinear,
        (true, false) => DivergenceClass::DivergesLog,
        (false, true) => DivergenceClass::DivergesLinear,
        (false, false) => {
            if v.iter().all(|&x| x > 0.0) {
                let lv: Vec<f64> = v.iter().map(|x| x.ln()).collect();
                let fe = linear_fit(&linx, &lv);
                if fe.r2 > MIN_R2 && fe.slope * (linx[n - 1] - linx[0]) > 1.0 {
                    return (DivergenceClass::DivergesFast, fe.slope, fl.r2, fx.r2);
                }
            }
            DivergenceClass::Inconclusive
        }
    };
    let fitted = match class {
        DivergenceClass::DivergesLog => fl.slope,
        DivergenceClass::DivergesLinear => fx.slope,
        _ => f64::NAN,
    };
    (class, fitted, fl.r2, fx.r2)
}

impl QuadratureReport {
    pub fn from_ladder(integrand: impl Into<String>, domain: (f64, f64), ladder: Vec<(f64, f64)>) -> Self {
        let (classification, fitted, r2_log, r2_linear) = classify_ladder(&ladder);
        Self {
            integrand: integrand.into(),
            domain,
            ladder,
            classification,
            fitted,
            r2_log,
            r2_linear,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x| 3.0 * x * x, 0.0, 2.0, QuadOptions::default()).unwrap();
        assert!((v - 8.0).abs() < 1e-13);
    }

    #[test]
    fn endpoint_log_singularity() {
        // ∫_δ^1 dx/x = -ln δ
        let d = 1e-9;
        let v = integrate(|x| 1.0 / x, d, 1.0, QuadOptions::default()).unwrap();
        assert!((v + d.ln()).abs() < 1e-10);
    }

    #[test]
    fn long_tail() {
        let v = integrate(|x| 1.0 / (x * x), 1.0, 1e8, QuadOptions::default()).unwrap();
        assert!((v - (1.0 - 1e-8)).abs() < 1e-12);
    }

    #[test]
    fn classifier_on_model_sequences() {
        let cut: Vec<f64> = (0..6).map(|k| 10f64.powi(k + 2)).collect();
        let log: Vec<(f64, f64)> = cut.iter().map(|&c| (c, 1.0 + 2.0 * c.ln())).collect();
        assert_eq!(classify_ladder(&log).0, DivergenceClass::DivergesLog);
        let lin: Vec<(f64, f64)> = cut.iter().map(|&c| (c, 0.5 * c - 3.0)).collect();
        assert_eq!(classify_ladder(&lin).0, DivergenceClass::DivergesLinear);
        let conv: Vec<(f64, f64)> = cut.iter().map(|&c| (c, 2.0 - 1.0 / c)).collect();
        let (cls, lim, _, _) = classify_ladder(&conv);
        assert_eq!(cls, DivergenceClass::Converges);
        assert!((lim - 2.0).abs() < 1e-6);
    }
}
