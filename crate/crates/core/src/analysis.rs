//! Statistical and quadrature checks of the martingale, moment, explosion and first-passage
//! properties of the density diffusion.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::collapse::{implicit_f, kretschmann, u_of_time};
use crate::error::{Error, Result};
use crate::ode::{dopri5, AdaptiveOptions, Termination};
use crate::params::ModelParams;
use crate::quadrature::{integrate, DivergenceClass, QuadOptions, QuadratureReport};
use crate::sde::{
    hitting_level, simulate, DriftSpec, EngineConfig, Ensemble, InitialCondition, PsiSpec, Scheme,
    TimeGrid, EXP_BETAS,
};
use crate::special::{erfc, normal_pdf};
use crate::stats::{linear_fit, moments, quantile_sorted, Estimate, ks_distance_censored};

/// Minimum ensemble size for the martingale suite.
pub const MIN_MARTINGALE_PATHS: usize = 1000;
/// Pooled increment count at which the time-change normality tolerances apply.
pub const DDS_MIN_POOLED: usize = 100_000;
/// Median of the standard first-passage law in units of `L²`: `1/(2·erfc⁻¹(½)²)`.
pub const LEVY_MEDIAN_FACTOR: f64 = 2.198_109_338_317_732;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// Comparison between a measured statistic and the value it is tested against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Rule {
    /// `measured − k·stderr ≤ bound`.
    AtMost { k: f64 },
    /// `measured + k·stderr ≥ bound`.
    AtLeast { k: f64 },
    /// `|measured − bound| ≤ k·stderr`.
    Within { k: f64 },
    /// `|measured − bound| ≤ tol`.
    Tolerance { tol: f64 },
    /// `lo ≤ measured ≤ hi`.
    Interval { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    #[serde(with = "finite_or_tag")]
    pub measured: f64,
    #[serde(with = "finite_or_tag::option")]
    pub stderr: Option<f64>,
    #[serde(with = "finite_or_tag")]
    pub bound: f64,
    pub rule: Rule,
    pub verdict: Verdict,
}

/// JSON has no infinities or NaN; they travel as the strings "inf", "-inf" and "nan".
pub mod finite_or_tag {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Tag(String),
    }

    fn decode<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(x) => Ok(x),
            Repr::Tag(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(E::custom(format!("expected a number, got '{other}'"))),
            },
        }
    }

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        decode(Repr::deserialize(d).map_err(D::Error::custom)?)
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match x {
                Some(v) => super::serialize(v, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            Option::<Repr>::deserialize(d)?.map(decode).transpose()
        }
    }
}

// Relative slack for bounds that hold with equality at t = t_ε.
const ROUNDING: f64 = 1e-12;

impl Check {
    pub fn new(name: impl Into<String>, measured: f64, stderr: Option<f64>, bound: f64, rule: Rule) -> Self {
        let se = stderr.unwrap_or(0.0);
        let verdict = if measured.is_nan() || bound.is_nan() || se.is_nan() {
            Verdict::Inconclusive
        } else {
            let ok = match rule {
                Rule::AtMost { k } => measured - k * se <= bound + ROUNDING * bound.abs(),
                Rule::AtLeast { k } => measured + k * se >= bound - ROUNDING * bound.abs(),
                Rule::Within { k } => (measured - bound).abs() <= k * se,
                Rule::Tolerance { tol } => (measured - bound).abs() <= tol,
                Rule::Interval { lo, hi } => lo <= measured && measured <= hi,
            };
            if ok {
                Verdict::Pass
            } else {
                Verdict::Fail
            }
        };
        Self {
            name: name.into(),
            measured,
            stderr,
            bound,
            rule,
            verdict,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub suite: String,
    pub inputs_digest: String,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub verdict: Verdict,
}

impl AnalysisReport {
    pub fn new(suite: impl Into<String>, inputs_digest: impl Into<String>) -> Self {
        Self {
            suite: suite.into(),
            inputs_digest: inputs_digest.into(),
            checks: Vec::new(),
            notes: Vec::new(),
            verdict: Verdict::Inconclusive,
        }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
        self.verdict = self.aggregate();
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    fn aggregate(&self) -> Verdict {
        if self.checks.iter().any(|c| c.verdict == Verdict::Fail) {
            Verdict::Fail
        } else if self.checks.is_empty() || self.checks.iter().any(|c| c.verdict == Verdict::Inconclusive) {
            Verdict::Inconclusive
        } else {
            Verdict::Pass
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.verdict == Verdict::Fail)
    }
}

/// Hex SHA-256 of the JSON serialisation of `value`.
pub fn digest<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).unwrap_or_default();
    let hash = Sha256::digest(&bytes);
    hash.iter().map(|b| format!("{b:02x}")).collect()
}

fn ensemble_digest(ens: &Ensemble) -> String {
    digest(&ens.spec)
}

fn finite_column(ens: &Ensemble, j: usize) -> Result<Vec<f64>> {
    let u = ens.u_at(j);
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(
            "ensemble contains blown-up paths; moment statistics need capped paths".into(),
        ));
    }
    Ok(u)
}

fn offset_label(ens: &Ensemble, j: usize) -> String {
    format!("{:.3e}", ens.record_times[j] - ens.t_start())
}

/// A shortfall below this many cap hits is not resolvable by the ensemble.
pub const RARE_EVENT_COUNT: f64 = 3.0;

// Rule of three: a mean that falls short by less than three missing cap events of size
// `room` says nothing about the martingale property, only about tail sampling.
fn guard_shortfall(mut check: Check, n: usize, room: f64) -> Check {
    if check.verdict == Verdict::Fail
        && check.measured < check.bound
        && room.is_finite()
        && room > 0.0
        && (check.bound - check.measured) * n as f64 / room < RARE_EVENT_COUNT
    {
        check.verdict = Verdict::Inconclusive;
    }
    check
}

fn horizon_indices(ens: &Ensemble, horizons: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = horizons
        .iter()
        .map(|&h| ens.record_index(ens.t_start() + h))
        .collect();
    idx.dedup();
    idx
}

/// Martingale checks on a capped Itô ensemble at the given offsets from the start time:
/// constant mean, the tower property across decile groups of `u(s)`, and zero mean
/// increments between consecutive horizons.
pub fn martingale_suite(ens: &Ensemble, horizons: &[f64]) -> Result<AnalysisReport> {
    let n = ens.n();
    if n < MIN_MARTINGALE_PATHS {
        return Err(Error::InsufficientPaths {
            needed: MIN_MARTINGALE_PATHS,
            got: n,
        });
    }
    let mut rep = AnalysisReport::new("martingale", ensemble_digest(ens));
    let cap = ens.config().cap;
    let start: Vec<f64> = ens.paths.iter().map(|p| p.u_start).collect();
    let start_mean = start.iter().sum::<f64>() / n as f64;
    let idx = horizon_indices(ens, horizons);
    let mut columns = Vec::new();
    for &j in &idx {
        let u = finite_column(ens, j)?;
        let m = Estimate::from_samples(u.iter().copied());
        let d = Estimate::from_samples(u.iter().zip(&start).map(|(a, b)| a - b));
        rep.push(guard_shortfall(
            Check::new(
                format!("mean@{}", offset_label(ens, j)),
                m.value,
                Some(d.stderr),
                start_mean,
                Rule::Within { k: 4.0 },
            ),
            n,
            cap - start_mean,
        ));
        columns.push((j, u));
    }
    let positive: Vec<&(usize, Vec<f64>)> = columns
        .iter()
        .filter(|(j, _)| ens.record_times[*j] > ens.t_start())
        .collect();
    if positive.len() >= 2 {
        let (js, us) = positive[0];
        let (jt, ut) = positive[positive.len() - 1];
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| us[a].total_cmp(&us[b]).then(a.cmp(&b)));
        let groups = 10;
        for g in 0..groups {
            let lo = g * n / groups;
            let hi = (g + 1) * n / groups;
            let d = Estimate::from_samples(order[lo..hi].iter().map(|&i| ut[i] - us[i]));
            let level = order[lo..hi].iter().map(|&i| us[i]).sum::<f64>() / (hi - lo) as f64;
            rep.push(guard_shortfall(
                Check::new(
                    format!(
                        "tower[{g}]@{}|{}",
                        offset_label(ens, *js),
                        offset_label(ens, *jt)
                    ),
                    d.value,
                    Some(d.stderr),
                    0.0,
                    Rule::Within { k: 4.0 },
                ),
                hi - lo,
                cap - level,
            ));
        }
    } else {
        rep.note("tower property needs two positive horizons");
    }
    for w in columns.windows(2) {
        let (ja, ua) = &w[0];
        let (jb, ub) = &w[1];
        let d = Estimate::from_samples(ub.iter().zip(ua).map(|(b, a)| b - a));
        let level = ua.iter().sum::<f64>() / n as f64;
        rep.push(guard_shortfall(
            Check::new(
                format!("stopped-increment@{}..{}", offset_label(ens, *ja), offset_label(ens, *jb)),
                d.value,
                Some(d.stderr),
                0.0,
                Rule::Within { k: 4.0 },
            ),
            n,
            cap - level,
        ));
    }
    rep.note(format!(
        "capped paths: {} of {n}; boundary clamp rate {:.3e}",
        ens.capped(),
        ens.clamp_rate()
    ));
    let unresolved = rep.checks.iter().filter(|c| c.verdict == Verdict::Inconclusive).count();
    if unresolved > 0 {
        rep.note(format!(
            "{unresolved} shortfalls smaller than {RARE_EVENT_COUNT} cap hits of size cap − level are inconclusive"
        ));
    }
    Ok(rep)
}

/// Stochastic-exponential checks on the `Y = y_eps·exp(∫ψ dB − ½∫ψ² dt)` records of an
/// ensemble: mean `y_eps` at every horizon, and for a constant coefficient `sigma` the
/// lognormal moments `E Y^p = y_eps^p exp(½p(p−1)σ²t)` for each `p` in `p_list`.
pub fn gbm_suite(ens: &Ensemble, y_eps: f64, horizons: &[f64], sigma: Option<f64>, p_list: &[f64]) -> AnalysisReport {
    let mut rep = AnalysisReport::new("gbm", ensemble_digest(ens));
    for j in horizon_indices(ens, horizons) {
        let ly = ens.log_y_at(j);
        let dt = ens.record_times[j] - ens.t_start();
        let m = Estimate::from_samples(ly.iter().map(|l| y_eps * l.exp()));
        rep.push(Check::new(
            format!("mean@{}", offset_label(ens, j)),
            m.value,
            Some(m.stderr),
            y_eps,
            Rule::Within { k: 4.0 },
        ));
        if let Some(s) = sigma {
            for &p in p_list {
                let e = Estimate::from_samples(ly.iter().map(|l| (y_eps * l.exp()).powf(p)));
                let target = y_eps.powf(p) * (0.5 * p * (p - 1.0) * s * s * dt).exp();
                rep.push(Check::new(
                    format!("lognormal-moment[p={p}]@{}", offset_label(ens, j)),
                    e.value,
                    Some(e.stderr),
                    target,
                    Rule::Within { k: 3.0 },
                ));
            }
        }
    }
    rep
}

/// `max_{1≤u≤cap} a²ψ(u)²/u²`, the growth constant of the coefficient on the capped domain.
pub fn growth_constant(psi: &PsiSpec, amplitude: f64, cap: f64) -> f64 {
    let a2 = amplitude * amplitude;
    match psi {
        PsiSpec::Collapse { kappa } => a2 * kappa * cap * cap * (cap - 1.0),
        _ => {
            let n = 4000;
            let lc = cap.ln();
            (0..=n)
                .map(|k| {
                    let u = (lc * k as f64 / n as f64).exp();
                    a2 * psi.sq(u) / (u * u)
                })
                .fold(0.0, f64::max)
        }
    }
}

/// `ln(u_eps^p · exp(½p(p−1)·K·dt))`.
pub fn log_moment_bound(u_eps: f64, p: f64, k: f64, dt: f64) -> f64 {
    p * u_eps.ln() + 0.5 * p * (p - 1.0) * k * dt
}

fn moment_bound(u_eps: f64, p: f64, k: f64, dt: f64) -> f64 {
    u_eps.powf(p) * (0.5 * p * (p - 1.0) * k * dt).exp()
}

/// Interpolation weight θ with `1/α = θ/p + (1−θ)/β`.
pub fn interpolation_theta(p: f64, alpha: f64, beta: f64) -> f64 {
    (1.0 / alpha - 1.0 / beta) / (1.0 / p - 1.0 / beta)
}

/// Moment bounds, the isometry `E u² = E u_start² + E∫ψ²`, the `p = 1` martingale mean, and
/// log-norm interpolation between every ordered triple of `p_list`.
pub fn moment_suite(ens: &Ensemble, p_list: &[f64], horizons: &[f64]) -> Result<AnalysisReport> {
    if p_list.iter().any(|&p| !(1.0..=8.0).contains(&p)) {
        return Err(Error::Config("moment orders must lie in [1, 8]".into()));
    }
    let cfg = ens.config();
    let k = growth_constant(&cfg.psi, cfg.noise_amplitude, cfg.cap);
    let u_eps = ens.u_eps();
    let mut rep = AnalysisReport::new("moments", ensemble_digest(ens));
    rep.note(format!("cap-relative growth constant K = {k:.6e} at cap {}", cfg.cap));
    let start: Vec<f64> = ens.paths.iter().map(|p| p.u_start).collect();
    for j in horizon_indices(ens, horizons) {
        let u = finite_column(ens, j)?;
        let dt = ens.record_times[j] - ens.t_start();
        let label = offset_label(ens, j);
        let mut norms = Vec::new();
        for &p in p_list {
            let e = Estimate::from_samples(u.iter().map(|v| v.abs().powf(p)));
            let bound = moment_bound(u_eps, p, k, dt);
            rep.push(Check::new(
                format!("moment-bound[p={p}]@{label}"),
                e.value,
                Some(e.stderr),
                bound,
                Rule::AtMost { k: 0.0 },
            ));
            if p == 1.0 {
                rep.push(Check::new(
                    format!("first-moment@{label}"),
                    e.value,
                    Some(e.stderr),
                    u_eps,
                    Rule::Within { k: 4.0 },
                ));
            }
            norms.push((p, e.value.ln() / p));
        }
        let comp = ens.comp_at(j);
        let d = Estimate::from_samples(
            u.iter()
                .zip(&start)
                .zip(&comp)
                .map(|((v, s), c)| v * v - s * s - c),
        );
        rep.push(guard_shortfall(
            Check::new(
                format!("isometry@{label}"),
                d.value,
                Some(d.stderr),
                0.0,
                Rule::Within { k: 2.0 },
            ),
            ens.n(),
            cfg.cap * cfg.cap,
        ));
        norms.sort_by(|a, b| a.0.total_cmp(&b.0));
        for a in 0..norms.len() {
            for b in a + 1..norms.len() {
                for c in b + 1..norms.len() {
                    let (p, lp) = norms[a];
                    let (al, la) = norms[b];
                    let (be, lb) = norms[c];
                    let th = interpolation_theta(p, al, be);
                    rep.push(Check::new(
                        format!("interpolation[{p},{al},{be}]@{label}"),
                        la,
                        None,
                        th * lp + (1.0 - th) * lb,
                        Rule::AtMost { k: 0.0 },
                    ));
                }
            }
        }
    }
    Ok(rep)
}

/// Maximal inequality at each level `ζ`, the Bernstein bound on `sup(u − u_start)` given the
/// compensator, and exponential-martingale suprema for β ∈ [`EXP_BETAS`].
pub fn doob_maximal_suite(ens: &Ensemble, levels: &[f64]) -> Result<AnalysisReport> {
    let n = ens.n();
    let last = ens.record_times.len() - 1;
    let max = ens.max_at(last);
    let comp = ens.comp_at(last);
    let start: Vec<f64> = ens.paths.iter().map(|p| p.u_start).collect();
    let u_eps = ens.u_eps();
    let mut rep = AnalysisReport::new("doob", ensemble_digest(ens));
    for &z in levels {
        let hits = max.iter().filter(|&&m| m >= z).count();
        let e = Estimate::proportion(hits, n);
        rep.push(Check::new(
            format!("maximal[zeta={z}]"),
            e.value,
            Some(e.stderr),
            u_eps / z,
            Rule::AtMost { k: 3.0 },
        ));
    }
    let mut sorted = comp.clone();
    sorted.sort_by(f64::total_cmp);
    let lambdas = [
        (0.0, 1e-300),
        (0.1, quantile_sorted(&sorted, 0.1)),
        (0.5, quantile_sorted(&sorted, 0.5)),
        (0.9, quantile_sorted(&sorted, 0.9)),
    ];
    let sup: Vec<f64> = max.iter().zip(&start).map(|(m, s)| m - s).collect();
    for a in [0.25 * u_eps, 0.5 * u_eps, u_eps] {
        for &(q, lam) in &lambdas {
            let hits = sup
                .iter()
                .zip(&comp)
                .filter(|(s, c)| **s >= a && **c <= lam)
                .count();
            let e = Estimate::proportion(hits, n);
            let bound = (-a * a / (2.0 * lam)).exp();
            rep.push(Check::new(
                format!("bernstein[a={a:.4},q={q}]"),
                e.value,
                Some(e.stderr),
                bound,
                Rule::AtMost { k: 3.0 },
            ));
            rep.note(format!(
                "bernstein[a={a:.4},q={q}]: lambda {lam:.4e}, alternative exponent a²/(2λ²) gives {:.6e}",
                (-a * a / (2.0 * lam * lam)).exp()
            ));
        }
    }
    for (i, beta) in EXP_BETAS.iter().enumerate() {
        for c in [0.5, 1.0, 2.0] {
            let hits = ens.paths.iter().filter(|p| p.exp_sup[i] >= c).count();
            let e = Estimate::proportion(hits, n);
            rep.push(Check::new(
                format!("exponential[beta={beta},C={c}]"),
                e.value,
                Some(e.stderr),
                (-beta * c).exp(),
                Rule::AtMost { k: 3.0 },
            ));
        }
    }
    Ok(rep)
}

/// Expected upcrossing counts of each configured cell against
/// `(E|u(T)| + α)/(β − α)`.
pub fn upcrossing_suite(ens: &Ensemble) -> Result<AnalysisReport> {
    let cells = &ens.config().upcrossing_cells;
    if cells.is_empty() {
        return Err(Error::Config("ensemble was run without upcrossing cells".into()));
    }
    let last = ens.record_times.len() - 1;
    let u = finite_column(ens, last)?;
    let abs_mean = Estimate::from_samples(u.iter().map(|v| v.abs()));
    let mut rep = AnalysisReport::new("upcrossing", ensemble_digest(ens));
    for (i, &(a, b)) in cells.iter().enumerate() {
        let e = Estimate::from_samples(ens.paths.iter().map(|p| f64::from(p.upcrossings[i])));
        rep.push(Check::new(
            format!("upcrossings[{a},{b}]"),
            e.value,
            Some(e.stderr),
            (abs_mean.value + a) / (b - a),
            Rule::AtMost { k: 3.0 },
        ));
    }
    rep.note(format!(
        "E|u(T)| = {:.6} ± {:.2e}",
        abs_mean.value, abs_mean.stderr
    ));
    Ok(rep)
}

/// Cutoff ladders for the true-martingale integral `∫ x ψ(x)⁻² dx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsConfig {
    /// Lower end of the state space.
    pub floor: f64,
    /// Offsets δ of the lower ladder `[floor + δ, upper_fixed]`.
    pub deltas: Vec<f64>,
    pub upper_fixed: f64,
    /// Start of the upper ladder `[lower_fixed, U]`.
    pub lower_fixed: f64,
    pub uppers: Vec<f64>,
}

impl DsConfig {
    pub fn new(floor: f64, lower_fixed: f64, upper_fixed: f64) -> Self {
        Self {
            floor,
            deltas: (1..=8).map(|k| 10f64.powi(-k)).collect(),
            upper_fixed,
            lower_fixed,
            uppers: (1..=8).map(|k| lower_fixed * 4f64.powi(k)).collect(),
        }
    }

    /// Ladders for the collapse coefficient on `(1, ∞)`.
    pub fn collapse() -> Self {
        Self::new(1.0, 2.0, 1e6)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsReport {
    pub psi: String,
    pub lower: QuadratureReport,
    pub upper: QuadratureReport,
    pub true_martingale: bool,
    pub verdict: String,
}

/// `∫_a^b x ψ(x)⁻² dx`, or `+∞` when the integrand overflows.
pub fn ds_integral(psi: &PsiSpec, a: f64, b: f64) -> Result<f64> {
    let f = |x: f64| x / psi.sq(x);
    match integrate(f, a, b, QuadOptions::default()) {
        Ok(v) => Ok(v),
        Err(e) => {
            if !f(b).is_finite() || !f(a).is_finite() {
                Ok(f64::INFINITY)
            } else {
                Err(e)
            }
        }
    }
}

/// Antiderivative of `1/(x³(x−1))`: `ln(x−1) − ln x + 1/x + 1/(2x²)`.
pub fn collapse_ds_antiderivative(x: f64) -> f64 {
    (x - 1.0).ln() - x.ln() + 1.0 / x + 0.5 / (x * x)
}

/// Divergence of `∫ x ψ⁻²` at either end of the state space decides a true martingale.
pub fn delbaen_shirakawa_test(psi: &PsiSpec, cfg: &DsConfig) -> Result<DsReport> {
    let mut lower = Vec::new();
    let mut deltas = cfg.deltas.clone();
    deltas.sort_by(|a, b| b.total_cmp(a));
    for &d in &deltas {
        lower.push((1.0 / d, ds_integral(psi, cfg.floor + d, cfg.upper_fixed)?));
    }
    let mut upper = Vec::new();
    for &u in &cfg.uppers {
        upper.push((u, ds_integral(psi, cfg.lower_fixed, u)?));
    }
    let lower = QuadratureReport::from_ladder(
        format!("x/psi^2 near floor, psi = {}", psi.name()),
        (cfg.floor, cfg.upper_fixed),
        lower,
    );
    let upper = QuadratureReport::from_ladder(
        format!("x/psi^2 towards infinity, psi = {}", psi.name()),
        (cfg.lower_fixed, f64::INFINITY),
        upper,
    );
    let div = lower.classification.diverges() || upper.classification.diverges();
    let inconclusive = lower.classification == DivergenceClass::Inconclusive
        || upper.classification == DivergenceClass::Inconclusive;
    let verdict = if div {
        "true martingale"
    } else if inconclusive {
        "inconclusive"
    } else {
        "not true martingale"
    };
    Ok(DsReport {
        psi: psi.name(),
        lower,
        upper,
        true_martingale: div,
        verdict: verdict.into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalIntegral {
    pub point: f64,
    pub ladder: Vec<(f64, f64)>,
    /// Ratio of the last two ladder increments; below one the local integral converges.
    pub increment_ratio: f64,
    pub singular: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsReport {
    pub interval: (f64, f64),
    pub zeros: Vec<f64>,
    pub singular: Vec<f64>,
    pub local: Vec<LocalIntegral>,
    pub exists: bool,
}

const SNAP: f64 = 1e-9;

fn snap(x: f64) -> f64 {
    (x / SNAP).round() * SNAP
}

fn golden_min<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-13 * (1.0 + a.abs()) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Zero set and singular set of `ψ` on `[a, b]`.
///
/// Candidates are the local minima of `|ψ|` on a grid of `cells` cells, refined by golden
/// section and snapped to a 1e-9 lattice. A candidate is a zero when `ψ` vanishes at the
/// snapped point, and singular when `∫ψ⁻²` over a punctured neighbourhood grows along the
/// ladder of excluded radii 1e-2 … 1e-10 (increments not shrinking).
pub fn engelbert_schmidt_test<F: Fn(f64) -> f64>(psi: F, a: f64, b: f64, cells: usize) -> Result<EsReport> {
    if !(a < b) || cells < 3 {
        return Err(Error::Domain("interval must be non-empty with at least three cells".into()));
    }
    let log = a > 0.0 && b / a > 100.0;
    let xs: Vec<f64> = (0..=cells)
        .map(|k| {
            let s = k as f64 / cells as f64;
            if log {
                (a.ln() + s * (b / a).ln()).exp()
            } else {
                a + s * (b - a)
            }
        })
        .collect();
    let abs = |x: f64| psi(x).abs();
    let vals: Vec<f64> = xs.iter().map(|&x| abs(x)).collect();
    let mut candidates = Vec::new();
    for i in 1..cells {
        if vals[i] < vals[i - 1] && vals[i] <= vals[i + 1] {
            let x = snap(golden_min(&abs, xs[i - 1], xs[i + 1]));
            if !candidates.iter().any(|&c: &f64| (c - x).abs() <= SNAP) {
                candidates.push(x);
            }
        }
    }
    let mut zeros = Vec::new();
    let mut singular = Vec::new();
    let mut local = Vec::new();
    for &x in &candidates {
        if psi(x) == 0.0 {
            zeros.push(x);
        }
        let m = ((b - a) / cells as f64).min(x - a).min(b - x).max(1e-6);
        let inv = |y: f64| 1.0 / psi(y).powi(2);
        let mut ladder = Vec::new();
        for k in 2..=10 {
            let eta = 10f64.powi(-k);
            if eta >= m {
                continue;
            }
            let l = integrate(inv, x - m, x - eta, QuadOptions::default()).unwrap_or(f64::INFINITY);
            let r = integrate(inv, x + eta, x + m, QuadOptions::default()).unwrap_or(f64::INFINITY);
            ladder.push((1.0 / eta, l + r));
        }
        let n = ladder.len();
        let ratio = if n >= 3 {
            let d1 = ladder[n - 1].1 - ladder[n - 2].1;
            let d0 = ladder[n - 2].1 - ladder[n - 3].1;
            if d0 == 0.0 {
                if d1 == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                d1 / d0
            }
        } else {
            f64::NAN
        };
        let is_singular = !(ratio < 0.9) || !ladder.iter().all(|p| p.1.is_finite());
        if is_singular {
            singular.push(x);
        }
        local.push(LocalIntegral {
            point: x,
            ladder,
            increment_ratio: ratio,
            singular: is_singular,
        });
    }
    let exists = singular
        .iter()
        .all(|s| zeros.iter().any(|z| (z - s).abs() <= SNAP));
    Ok(EsReport {
        interval: (a, b),
        zeros,
        singular,
        local,
        exists,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FellerVerdict {
    NoExplosion,
    Explodes,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReduction {
    /// `(U, ∫_c^U b⁻¹)` on a doubling ladder.
    pub ladder: Vec<(f64, f64)>,
    /// Relative change of the integral over the last doubling.
    pub doubling_change: f64,
    pub converges: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FellerReport {
    pub u_start: f64,
    /// Zero drift: `FEL(c, U) = ∫_c^U ∫_c^u ψ⁻² dx du`. With drift: Feller's
    /// `v(U) = ∫_c^U s'(y) ∫_c^y 2/(s'ψ²) dx dy`.
    pub fel: QuadratureReport,
    /// `ΔFEL/ΔU` between consecutive cutoffs.
    pub increment_slopes: Vec<f64>,
    /// Largest relative change between consecutive increment slopes.
    pub slope_drift: f64,
    pub reduction: Option<DriftReduction>,
    pub verdict: FellerVerdict,
}

/// `FEL(c, U) = ∫_c^U (U − x) ψ(x)⁻² dx`.
pub fn fel_integral(psi: &PsiSpec, c: f64, u: f64) -> Result<f64> {
    integrate(|x| (u - x) / psi.sq(x), c, u, QuadOptions::default())
}

/// Feller's `v(U)` on the cutoffs, by cell-wise Gauss–Kronrod/Simpson accumulation of the
/// scale density `s'(x) = exp(−∫_c^x 2b/ψ²)` and speed density `2/(s'ψ²)` on a geometric
/// grid above `c`.
pub fn feller_scale_ladder(psi: &PsiSpec, drift: &DriftSpec, c: f64, cutoffs: &[f64]) -> Result<Vec<(f64, f64)>> {
    let top = cutoffs.iter().copied().fold(c, f64::max);
    let mut xs = vec![c];
    let mut h = 1e-3;
    while c + h < top {
        xs.push(c + h);
        h *= 10f64.powf(0.01);
    }
    xs.extend_from_slice(cutoffs);
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    let rate = |x: f64| 2.0 * drift.value(psi, x) / psi.sq(x);
    let speed = |x: f64, expo: f64| 2.0 * expo.exp() / psi.sq(x);
    let opts = QuadOptions::default();
    let mut expo = 0.0;
    let mut m_cum = 0.0;
    let mut v = 0.0;
    let mut out = Vec::new();
    for w in xs.windows(2) {
        let (x0, x4) = (w[0], w[1]);
        let dx = x4 - x0;
        let x: [f64; 5] = std::array::from_fn(|i| x0 + 0.25 * dx * i as f64);
        let mut l = [expo; 5];
        for i in 1..5 {
            l[i] = l[i - 1] + integrate(rate, x[i - 1], x[i], opts)?;
        }
        let m: [f64; 5] = std::array::from_fn(|i| speed(x[i], l[i]));
        let m_mid = m_cum + dx / 12.0 * (m[0] + 4.0 * m[1] + m[2]);
        let m_end = m_mid + dx / 12.0 * (m[2] + 4.0 * m[3] + m[4]);
        v += dx / 6.0 * ((-l[0]).exp() * m_cum + 4.0 * (-l[2]).exp() * m_mid + (-l[4]).exp() * m_end);
        expo = l[4];
        m_cum = m_end;
        if cutoffs.iter().any(|&u| (u - x4).abs() <= 1e-12 * u.abs().max(1.0)) {
            out.push((x4, v));
        }
    }
    Ok(out)
}

/// Feller's explosion test at `+∞` from `u_start`.
///
/// Without drift the double integral is evaluated directly; the process cannot explode, so
/// the verdict is "no explosion" whenever the ladder diverges and inconclusive otherwise.
/// With a drift that is positive above `u_start`, the reduction `∫ b⁻¹` on a doubling ladder
/// and the full scale-function integral must agree.
pub fn feller_test(psi: &PsiSpec, drift: &DriftSpec, u_start: f64, cutoffs: &[f64]) -> Result<FellerReport> {
    if cutoffs.len() < 3 || cutoffs.iter().any(|&u| u <= u_start) {
        return Err(Error::Config("Feller ladder needs three cutoffs above the start".into()));
    }
    let zero = drift.is_zero();
    let ladder: Vec<(f64, f64)> = if zero {
        cutoffs
            .iter()
            .map(|&u| fel_integral(psi, u_start, u).map(|v| (u, v)))
            .collect::<Result<_>>()?
    } else {
        feller_scale_ladder(psi, drift, u_start, cutoffs)?
    };
    let slopes: Vec<f64> = ladder
        .windows(2)
        .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
        .collect();
    let slope_drift = slopes
        .windows(2)
        .map(|w| (w[1] / w[0] - 1.0).abs())
        .fold(0.0, f64::max);
    let fel = QuadratureReport::from_ladder(
        if zero { "FEL" } else { "feller-v" },
        (u_start, f64::INFINITY),
        ladder,
    );
    let mut reduction = None;
    let verdict = if zero {
        if fel.classification.diverges() {
            FellerVerdict::NoExplosion
        } else {
            FellerVerdict::Inconclusive
        }
    } else {
        let positive = cutoffs
            .iter()
            .all(|&u| drift.value(psi, u) > 0.0 && drift.value(psi, 0.5 * (u + u_start)) > 0.0);
        let full = if fel.classification.diverges() {
            FellerVerdict::NoExplosion
        } else if fel.classification == DivergenceClass::Converges {
            FellerVerdict::Explodes
        } else {
            FellerVerdict::Inconclusive
        };
        if positive {
            let base = cutoffs[0];
            let mut lad = Vec::new();
            for k in 0..6 {
                let u = base * 2f64.powi(k);
                let v = integrate(|x| 1.0 / drift.value(psi, x), u_start, u, QuadOptions::default())?;
                lad.push((u, v));
            }
            let n = lad.len();
            let change = (lad[n - 1].1 - lad[n - 2].1).abs() / lad[n - 1].1.abs();
            let converges = change < 1e-3;
            reduction = Some(DriftReduction {
                ladder: lad,
                doubling_change: change,
                converges,
            });
            let red = if converges {
                FellerVerdict::Explodes
            } else {
                FellerVerdict::NoExplosion
            };
            if red == full {
                red
            } else {
                FellerVerdict::Inconclusive
            }
        } else {
            full
        }
    };
    Ok(FellerReport {
        u_start,
        fel,
        increment_slopes: slopes,
        slope_drift,
        reduction,
        verdict,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitProbabilities {
    pub low: f64,
    pub high: f64,
}

/// Probability of leaving `(alpha, beta)` through each end from `u0`, from the scale
/// function. Zero drift gives the linear law exactly.
pub fn scale_function_exits(psi: &PsiSpec, drift: &DriftSpec, alpha: f64, beta: f64, u0: f64) -> Result<ExitProbabilities> {
    if !(alpha < beta && alpha <= u0 && u0 <= beta) {
        return Err(Error::Domain(format!(
            "start {u0} must lie in [{alpha}, {beta}]"
        )));
    }
    let high = if drift.is_zero() {
        (u0 - alpha) / (beta - alpha)
    } else {
        let opts = QuadOptions::default();
        let lam = |x: f64| -> f64 {
            let e = integrate(|y| 2.0 * drift.value(psi, y) / psi.sq(y), alpha, x, opts).unwrap_or(f64::NAN);
            (-e).exp()
        };
        let num = integrate(lam, alpha, u0, opts)?;
        let den = integrate(lam, alpha, beta, opts)?;
        num / den
    };
    Ok(ExitProbabilities {
        low: 1.0 - high,
        high,
    })
}

/// `V(u) = ln(1 + u)`.
pub fn lyapunov_v(u: f64) -> f64 {
    (1.0 + u).ln()
}

/// Generator of `V = ln(1+u)`: `½ψ²V'' + bV'`.
pub fn lyapunov_generator(psi: &PsiSpec, drift: &DriftSpec, amplitude: f64, u: f64) -> f64 {
    let v1 = 1.0 / (1.0 + u);
    -0.5 * amplitude * amplitude * psi.sq(u) * v1 * v1 + drift.value(psi, u) * v1
}

/// Lyapunov function checks on `grid` and empirical moment exponents of the ensemble.
pub fn lyapunov_suite(ens: &Ensemble, grid: &[f64], p_list: &[f64]) -> Result<AnalysisReport> {
    let cfg = ens.config();
    let mut rep = AnalysisReport::new("lyapunov", ensemble_digest(ens));
    for &u in grid {
        rep.push(Check::new(
            format!("generator[u={u}]"),
            lyapunov_generator(&cfg.psi, &cfg.drift, cfg.noise_amplitude, u),
            None,
            0.0,
            Rule::AtMost { k: 0.0 },
        ));
        rep.push(Check::new(
            format!("V-nonnegative[u={u}]"),
            lyapunov_v(u),
            None,
            0.0,
            Rule::AtLeast { k: 0.0 },
        ));
    }
    if grid.len() >= 2 {
        let (lo, hi) = (grid[0], grid[grid.len() - 1]);
        rep.push(Check::new(
            "V-growth",
            lyapunov_v(hi),
            None,
            lyapunov_v(lo),
            Rule::AtLeast { k: 0.0 },
        ));
    }
    let k = growth_constant(&cfg.psi, cfg.noise_amplitude, cfg.cap);
    let last = ens.record_times.len() - 1;
    let t = ens.record_times[last] - ens.t_start();
    let u = finite_column(ens, last)?;
    let u_eps = ens.u_eps();
    for &p in p_list {
        let e = Estimate::from_samples(u.iter().map(|v| v.abs().powf(p)));
        let lam = (e.value / u_eps.powf(p)).ln() / t;
        let se = e.stderr / (e.value * t);
        if p == 1.0 {
            rep.push(Check::new("exponent[p=1]", lam, Some(se), 0.0, Rule::Within { k: 2.0 }));
        }
        rep.push(Check::new(
            format!("exponent-bound[p={p}]"),
            lam,
            Some(se),
            0.5 * k * p * (p - 1.0),
            Rule::AtMost { k: 3.0 },
        ));
    }
    Ok(rep)
}

/// Log-log slope of `|u(t₀+g) − u(t₀)|²` against `g` along the deterministic solution.
pub fn deterministic_increment_exponent(params: &ModelParams, t0: f64, gaps: &[f64]) -> f64 {
    let u0 = u_of_time(params, t0);
    let x: Vec<f64> = gaps.iter().map(|g| g.ln()).collect();
    let y: Vec<f64> = gaps
        .iter()
        .map(|&g| (u_of_time(params, t0 + g) - u0).powi(2).ln())
        .collect();
    linear_fit(&x, &y).slope
}

/// Mean-square increments `E|u(t_start + g) − u(t_start)|²` over the gap ladder: linear
/// scaling, halving under gap halving, zero at zero gap; and quadratic scaling on the
/// deterministic leg.
pub fn continuity_suite(ens: &Ensemble, gaps: &[f64]) -> Result<AnalysisReport> {
    let mut rep = AnalysisReport::new("continuity", ensemble_digest(ens));
    let j0 = ens.record_index(ens.t_start());
    let u0 = finite_column(ens, j0)?;
    rep.push(Check::new(
        "zero-gap",
        Estimate::from_samples(u0.iter().map(|v| (v - v).powi(2))).value,
        None,
        0.0,
        Rule::Tolerance { tol: 0.0 },
    ));
    let mut pts = Vec::new();
    for &g in gaps {
        let j = ens.record_index(ens.t_start() + g);
        let actual = ens.record_times[j] - ens.record_times[j0];
        if actual <= 0.0 {
            continue;
        }
        let u = finite_column(ens, j)?;
        let e = Estimate::from_samples(u.iter().zip(&u0).map(|(a, b)| (a - b).powi(2)));
        pts.push((actual, e));
    }
    if pts.len() < 2 {
        return Err(Error::InsufficientData("continuity needs two positive gaps".into()));
    }
    let x: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.value.ln()).collect();
    let fit = linear_fit(&x, &y);
    rep.push(Check::new(
        "increment-exponent",
        fit.slope,
        Some(fit.slope_stderr),
        1.0,
        Rule::Tolerance { tol: 0.1 },
    ));
    for w in pts.windows(2) {
        let r = w[1].0 / w[0].0;
        if (r - 2.0).abs() < 1e-6 {
            rep.push(Check::new(
                format!("halving[{:.3e}]", w[0].0),
                w[1].1.value / w[0].1.value,
                None,
                2.0,
                Rule::Interval { lo: 1.8, hi: 2.2 },
            ));
        }
    }
    let params = ens.params();
    let t_det = 0.5 * params.t_eps;
    let det = deterministic_increment_exponent(params, t_det, gaps);
    rep.push(Check::new(
        "deterministic-exponent",
        det,
        None,
        2.0,
        Rule::Tolerance { tol: 0.1 },
    ));
    Ok(rep)
}

/// `E[K(u(t))]` at every record against `4κ²(B₆ + B₄)`, where `B_p` is the moment bound.
pub fn kretschmann_expectation(ens: &Ensemble) -> Result<AnalysisReport> {
    let params = ens.params();
    let cfg = ens.config();
    let k = growth_constant(&cfg.psi, cfg.noise_amplitude, cfg.cap);
    let u_eps = ens.u_eps();
    let mut rep = AnalysisReport::new("kretschmann", ensemble_digest(ens));
    for j in 0..ens.record_times.len() {
        let u = finite_column(ens, j)?;
        let dt = ens.record_times[j] - ens.t_start();
        let e = Estimate::from_samples(u.iter().map(|&v| kretschmann(params, v)));
        let l6 = log_moment_bound(u_eps, 6.0, k, dt);
        let l4 = log_moment_bound(u_eps, 4.0, k, dt);
        let ln_bound = (4.0 * params.kappa * params.kappa).ln() + l6 + (l4 - l6).exp().ln_1p();
        let label = offset_label(ens, j);
        if dt == 0.0 {
            rep.push(Check::new(
                format!("initial@{label}"),
                e.value,
                None,
                kretschmann(params, u_eps),
                Rule::Tolerance {
                    tol: 1e-12 * kretschmann(params, u_eps),
                },
            ));
        }
        rep.push(Check::new(
            format!("finite@{label}"),
            if e.value.is_finite() { 1.0 } else { 0.0 },
            None,
            1.0,
            Rule::Tolerance { tol: 0.0 },
        ));
        rep.push(Check::new(
            format!("bound@{label}"),
            e.value,
            Some(e.stderr),
            ln_bound.exp(),
            Rule::AtMost { k: 0.0 },
        ));
        rep.note(format!("ln bound@{label} = {ln_bound:.6}"));
    }
    Ok(rep)
}

/// Normality of increments resampled at equal compensator spacing.
pub fn dds_time_change_check(ens: &Ensemble) -> Result<AnalysisReport> {
    let z: Vec<f64> = ens.paths.iter().flat_map(|p| p.dds.iter().copied()).collect();
    dds_normality(&z, ensemble_digest(ens))
}

/// Normality checks on pooled time-changed increments.
pub fn dds_normality(z: &[f64], inputs_digest: String) -> Result<AnalysisReport> {
    let n = z.len();
    if n < 2 {
        return Err(Error::InsufficientData(
            "no time-changed increments (quadratic variation never reached the spacing)".into(),
        ));
    }
    let (mean, var, kurt) = moments(z);
    let mut rep = AnalysisReport::new("dds", inputs_digest);
    let sn = (n as f64).sqrt();
    rep.push(Check::new("mean", mean, Some(1.0 / sn), 0.0, Rule::Within { k: 4.0 }));
    rep.push(Check::new("variance", var, None, 1.0, Rule::Interval { lo: 0.95, hi: 1.05 }));
    rep.push(Check::new(
        "excess-kurtosis",
        kurt,
        None,
        0.0,
        Rule::Interval { lo: -0.15, hi: 0.15 },
    ));
    rep.push(Check::new(
        "pooled-count",
        n as f64,
        None,
        DDS_MIN_POOLED as f64,
        Rule::AtLeast { k: 0.0 },
    ));
    Ok(rep)
}

/// `P(T ≤ t) = erfc(L/√(2t))` for the first passage of Brownian motion to level `L`.
pub fn first_passage_cdf(level: f64, t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        erfc(level / (2.0 * t).sqrt())
    }
}

/// Lévy density `L t^{−3/2} exp(−L²/(2t))/√(2π)`.
pub fn levy_density(level: f64, t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        level * t.powf(-1.5) * normal_pdf(level / t.sqrt())
    }
}

/// Largest gap between the five-point derivative of [`first_passage_cdf`] and
/// [`levy_density`] on a log grid over `[t_lo, t_hi]`.
pub fn levy_consistency(level: f64, t_lo: f64, t_hi: f64, points: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..points {
        let t = (t_lo.ln() + (t_hi / t_lo).ln() * k as f64 / (points - 1) as f64).exp();
        let h = 1e-3 * t;
        let f = |x: f64| first_passage_cdf(level, x);
        let d = (f(t - 2.0 * h) - 8.0 * f(t - h) + 8.0 * f(t + h) - f(t + 2.0 * h)) / (12.0 * h);
        worst = worst.max((d - levy_density(level, t)).abs());
    }
    worst
}

/// Hitting times of a Stratonovich ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstPassageSample {
    pub level: f64,
    /// Hitting time after the start, or `None` when censored at the horizon.
    pub times: Vec<Option<f64>>,
    pub horizon: f64,
}

impl FirstPassageSample {
    pub fn from_ensemble(ens: &Ensemble) -> Self {
        let t0 = ens.t_start();
        Self {
            level: ens_level(ens),
            times: ens.hit_times().into_iter().map(|t| t.map(|t| t - t0)).collect(),
            horizon: ens.config().horizon - t0,
        }
    }

    pub fn sorted_hits(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.times.iter().flatten().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }
}

fn ens_level(ens: &Ensemble) -> f64 {
    hitting_level(ens.params(), ens.u_eps()) / ens.config().noise_amplitude
}

/// First-passage checks on an exact Stratonovich ensemble: the level, censored KS distance,
/// hit fractions and a log-binned histogram against the closed-form law, the median, and the
/// growth exponent of the censored mean over `horizons`.
pub fn first_passage_suite(ens: &Ensemble, horizons: &[f64]) -> Result<AnalysisReport> {
    if ens.config().scheme != Scheme::StratExact {
        return Err(Error::Config("first-passage suite needs an exact Stratonovich ensemble".into()));
    }
    let params = ens.params();
    let fp = FirstPassageSample::from_ensemble(ens);
    let n = fp.times.len();
    let l = fp.level;
    let mut rep = AnalysisReport::new("hitting", ensemble_digest(ens));
    let direct = (std::f64::consts::FRAC_PI_2 - implicit_f(ens.u_eps())) / params.sqrt_kappa()
        / ens.config().noise_amplitude;
    rep.push(Check::new("level", l, None, direct, Rule::Tolerance { tol: 1e-12 }));
    let hits = fp.sorted_hits();
    rep.note(format!(
        "level L = {l:.9}; {} of {n} paths hit before the horizon {}",
        hits.len(),
        fp.horizon
    ));
    let ks = ks_distance_censored(&hits, n, |t| first_passage_cdf(l, t));
    rep.push(Check::new("ks-distance", ks, None, 0.02, Rule::AtMost { k: 0.0 }));
    for &h in horizons.iter().filter(|&&h| h <= fp.horizon * (1.0 + 1e-12)) {
        let c = hits.partition_point(|&t| t <= h);
        let p = first_passage_cdf(l, h);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        rep.push(Check::new(
            format!("hit-fraction@{h}"),
            c as f64 / n as f64,
            Some(se),
            p,
            Rule::Within { k: 3.0 },
        ));
    }
    let target_median = LEVY_MEDIAN_FACTOR * l * l;
    let pos = 0.5 * (n - 1) as f64;
    let i = pos.floor() as usize;
    if i + 1 < hits.len() {
        let frac = pos - i as f64;
        let med = hits[i] * (1.0 - frac) + hits[i + 1] * frac;
        let se = 0.5 / ((n as f64).sqrt() * levy_density(l, target_median));
        rep.push(Check::new("median", med, Some(se), target_median, Rule::Within { k: 3.0 }));
    }
    let mut cm = Vec::new();
    for &h in horizons.iter().filter(|&&h| h <= fp.horizon * (1.0 + 1e-12)) {
        let c = hits.partition_point(|&t| t <= h);
        if c > 0 {
            let m = hits[..c].iter().sum::<f64>() / c as f64;
            cm.push((h.ln(), m.ln()));
        }
    }
    if cm.len() >= 3 {
        let x: Vec<f64> = cm.iter().map(|p| p.0).collect();
        let y: Vec<f64> = cm.iter().map(|p| p.1).collect();
        let fit = linear_fit(&x, &y);
        rep.push(Check::new(
            "censored-mean-exponent",
            fit.slope,
            Some(fit.slope_stderr),
            0.5,
            Rule::Tolerance { tol: 0.1 },
        ));
    } else {
        rep.note("censored-mean exponent needs three horizons with hits");
    }
    if !hits.is_empty() {
        let lo = hits[0].max(1e-8);
        let hi = fp.horizon;
        let bins = 40;
        let edges: Vec<f64> = (0..=bins)
            .map(|k| (lo.ln() + (hi / lo).ln() * k as f64 / bins as f64).exp())
            .collect();
        let mut worst: f64 = 0.0;
        for w in edges.windows(2) {
            let expected = n as f64 * (first_passage_cdf(l, w[1]) - first_passage_cdf(l, w[0]));
            if expected < 20.0 {
                continue;
            }
            let obs = (hits.partition_point(|&t| t <= w[1]) - hits.partition_point(|&t| t <= w[0])) as f64;
            worst = worst.max((obs - expected).abs() / expected.sqrt());
        }
        rep.push(Check::new("histogram-max-z", worst, None, 4.5, Rule::AtMost { k: 0.0 }));
    }
    rep.push(Check::new(
        "cdf-density-consistency",
        levy_consistency(l, 1e-4, 10.0, 200),
        None,
        1e-6,
        Rule::AtMost { k: 0.0 },
    ));
    Ok(rep)
}

/// Largest relative gap between Heun and exact Stratonovich paths driven by the same
/// increments, while the exact path stays at or below `u_window`.
#[allow(clippy::too_many_arguments)]
pub fn heun_exact_gap(
    params: &ModelParams,
    u_eps: f64,
    t_start: f64,
    dt: f64,
    span: f64,
    n_paths: usize,
    seed: u64,
    u_window: f64,
) -> Result<f64> {
    let mut cfg = EngineConfig::new(
        Scheme::StratExact,
        PsiSpec::collapse(params),
        n_paths,
        TimeGrid::Uniform { dt },
        t_start + span,
        1e12,
        seed,
    );
    cfg.keep_full_paths = n_paths;
    cfg.initial = InitialCondition::Point;
    let exact = simulate(params, u_eps, t_start, &cfg)?;
    cfg.scheme = Scheme::StratHeun;
    cfg.substep_eta = 0.0;
    let heun = simulate(params, u_eps, t_start, &cfg)?;
    let mut worst: f64 = 0.0;
    for (e, h) in exact.full_paths().zip(heun.full_paths()) {
        for (ue, uh) in e.u.iter().zip(&h.u) {
            if !ue.is_finite() || *ue > u_window {
                break;
            }
            worst = worst.max((uh - ue).abs() / ue);
        }
    }
    Ok(worst)
}

/// Supremum norm of `ψ'` and the linear-growth constant `max ψ²/(1+u²)` on `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientConstants {
    pub lipschitz: f64,
    pub growth: f64,
}

pub fn coefficient_constants(psi: &PsiSpec, a: f64, b: f64) -> CoefficientConstants {
    let n = 4000;
    let mut lip: f64 = 0.0;
    let mut growth: f64 = 0.0;
    for k in 0..=n {
        let u = a + (b - a) * k as f64 / n as f64;
        lip = lip.max(psi.derivative(u).abs());
        growth = growth.max(psi.sq(u) / (1.0 + u * u));
    }
    CoefficientConstants {
        lipschitz: lip,
        growth,
    }
}

/// `(∫_a^b ψ², ∫_a^b ψ⁻²)` on a bounded box.
pub fn integrability_on_box(psi: &PsiSpec, a: f64, b: f64) -> Result<(f64, f64)> {
    let opts = QuadOptions::default();
    Ok((
        integrate(|x| psi.sq(x), a, b, opts)?,
        integrate(|x| 1.0 / psi.sq(x), a, b, opts)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxiliaryBlowup {
    pub y0: f64,
    /// Integration time to reach `y = 1e6`, plus the analytic tail beyond it.
    pub integrated: f64,
    /// `∫_{y0}^∞ dy/(κy⁴(y−1))`.
    pub quadrature: f64,
}

/// Blow-up time of `y' = κy⁴(y−1)` from `y0 > 1`.
pub fn auxiliary_blowup(params: &ModelParams, y0: f64) -> Result<AuxiliaryBlowup> {
    if !(y0 > 1.0) {
        return Err(Error::Domain("auxiliary ODE needs y0 > 1".into()));
    }
    let k = params.kappa;
    let y_stop = 1e6;
    let opts = AdaptiveOptions {
        rtol: 1e-11,
        atol: 1e-14,
        h_init: 1e-8,
        h_min: 1e-30,
        floor_stops: true,
        ..AdaptiveOptions::default()
    };
    let traj = dopri5(
        |_, y: &[f64; 1]| [k * y[0].powi(4) * (y[0] - 1.0)],
        0.0,
        [y0],
        1e6,
        opts,
        |_, y| y[0] >= y_stop,
    )?;
    if traj.termination != Termination::Stopped {
        return Err(Error::Integration("auxiliary ODE did not reach the blow-up threshold".into()));
    }
    let t = *traj.t.last().unwrap_or(&0.0);
    let y_end = traj.y.last().map(|y| y[0]).unwrap_or(y0);
    let tail = integrate(|y| 1.0 / (k * y.powi(4) * (y - 1.0)), y_end, 1e12, QuadOptions::default())?
        + 1.0 / (4.0 * k * 1e48);
    let direct = integrate(|y| 1.0 / (k * y.powi(4) * (y - 1.0)), y0, 1e12, QuadOptions::default())?
        + 1.0 / (4.0 * k * 1e48);
    Ok(AuxiliaryBlowup {
        y0,
        integrated: t + tail,
        quadrature: direct,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn unit() -> ModelParams {
        ModelParams::new(1.0, 1.0).unwrap()
    }

    #[test]
    fn non_finite_checks_round_trip() {
        for (m, se, b) in [(f64::NAN, None, f64::INFINITY), (1.5, Some(f64::INFINITY), f64::NEG_INFINITY)] {
            let c = Check::new("x", m, se, b, Rule::AtMost { k: 0.0 });
            let back: Check = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
            assert_eq!(back.measured.to_bits(), c.measured.to_bits());
            assert_eq!(back.stderr, c.stderr);
            assert_eq!(back.bound, c.bound);
        }
        assert!(serde_json::from_str::<Check>(
            r#"{"name":"x","measured":"big","stderr":null,"bound":1,"rule":{"kind":"at-most","k":0},"verdict":"pass"}"#
        )
        .is_err());
    }

    #[test]
    fn check_rules() {
        assert!(Check::new("a", 1.0, Some(0.1), 0.8, Rule::AtMost { k: 3.0 }).passed());
        assert!(!Check::new("a", 1.0, Some(0.01), 0.8, Rule::AtMost { k: 3.0 }).passed());
        assert!(Check::new("b", 1.0, Some(0.1), 1.35, Rule::Within { k: 4.0 }).passed());
        assert!(!Check::new("b", 1.0, Some(0.1), 1.45, Rule::Within { k: 4.0 }).passed());
        assert_eq!(
            Check::new("c", f64::NAN, None, 0.0, Rule::Tolerance { tol: 1.0 }).verdict,
            Verdict::Inconclusive
        );
        let mut r = AnalysisReport::new("s", "d");
        assert_eq!(r.verdict, Verdict::Inconclusive);
        r.push(Check::new("x", 0.0, None, 0.0, Rule::Tolerance { tol: 0.0 }));
        assert_eq!(r.verdict, Verdict::Pass);
        r.push(Check::new("y", 2.0, None, 0.0, Rule::Interval { lo: -1.0, hi: 1.0 }));
        assert_eq!(r.verdict, Verdict::Fail);
    }

    #[test]
    fn digest_is_stable_hex() {
        let a = digest(&[1.0, 2.0]);
        assert_eq!(a.len(), 64);
        assert_eq!(a, digest(&[1.0, 2.0]));
        assert_ne!(a, digest(&[1.0, 2.5]));
    }

    #[test]
    fn ds_collapse_matches_antiderivative() {
        let p = unit();
        let psi = PsiSpec::collapse(&p);
        for d in [1e-3, 1e-6] {
            let v = ds_integral(&psi, 1.0 + d, 1e6).unwrap() * p.kappa;
            let exact = collapse_ds_antiderivative(1e6) - collapse_ds_antiderivative(1.0 + d);
            assert!((v - exact).abs() < 1e-8, "{d}: {v} vs {exact}");
        }
        let v3 = collapse_ds_antiderivative(1e6) - collapse_ds_antiderivative(1.001);
        assert!((v3 - 5.4108).abs() < 1e-4, "{v3}");
        let r = delbaen_shirakawa_test(&psi, &DsConfig::collapse()).unwrap();
        assert_eq!(r.lower.classification, DivergenceClass::DivergesLog);
        assert_eq!(r.upper.classification, DivergenceClass::Converges);
        assert!(r.true_martingale);
        assert!((r.lower.fitted * p.kappa - 1.0).abs() < 0.05, "{}", r.lower.fitted * p.kappa);
    }

    #[test]
    fn ds_exponential_examples() {
        let down = PsiSpec::Exponential { rate: -1.0 };
        let r = delbaen_shirakawa_test(&down, &DsConfig::new(0.0, 1.0, 1.0)).unwrap();
        assert!(r.upper.classification.diverges(), "{:?}", r.upper);
        assert!(r.true_martingale);
        let up = PsiSpec::Exponential { rate: 1.0 };
        let r = delbaen_shirakawa_test(&up, &DsConfig::new(0.0, 1.0, 1.0)).unwrap();
        assert_eq!(r.lower.classification, DivergenceClass::Converges);
        assert_eq!(r.upper.classification, DivergenceClass::Converges);
        assert!(!r.true_martingale);
        assert_eq!(r.verdict, "not true martingale");
    }

    #[test]
    fn es_collapse_and_linear() {
        let p = unit();
        let psi = PsiSpec::collapse(&p);
        let r = engelbert_schmidt_test(|x| psi.value(x), 1.001, 1e6, 2000).unwrap();
        assert!(r.zeros.is_empty() && r.singular.is_empty() && r.exists);
        let r = engelbert_schmidt_test(|x| x - 5.0, 1.0, 10.0, 900).unwrap();
        assert_eq!(r.zeros, vec![5.0]);
        assert_eq!(r.singular, vec![5.0]);
        assert!(r.exists);
    }

    #[test]
    fn es_power_exponent_rule() {
        let r = engelbert_schmidt_test(|x: f64| (x - 5.0).abs().powf(0.1), 1.0, 10.0, 900).unwrap();
        assert_eq!(r.zeros, vec![5.0]);
        assert!(r.singular.is_empty(), "{:?}", r.local);
        assert!(r.exists);
        let forced = |x: f64| if x == 5.0 { 1.0 } else { (x - 5.0).abs().powf(0.6) };
        let r = engelbert_schmidt_test(forced, 1.0, 10.0, 900).unwrap();
        assert!(r.zeros.is_empty());
        assert_eq!(r.singular.len(), 1);
        assert!((r.singular[0] - 5.0).abs() < 1e-8);
        assert!(!r.exists);
    }

    #[test]
    fn feller_zero_drift_collapse() {
        let p = unit();
        let psi = PsiSpec::collapse(&p);
        let r = feller_test(&psi, &DriftSpec::Zero, 2.0, &[1e2, 1e3, 1e4]).unwrap();
        assert_eq!(r.fel.classification, DivergenceClass::DivergesLinear);
        assert_eq!(r.verdict, FellerVerdict::NoExplosion);
        assert!(r.slope_drift < 0.01, "{}", r.slope_drift);
        let inner = integrate(|x| 1.0 / psi.sq(x), 2.0, 1e8, QuadOptions::default()).unwrap();
        assert!((r.increment_slopes[1] - inner).abs() < 1e-6 * inner);
        // the scale-function route gives v = 2·FEL without drift
        let v = feller_scale_ladder(&psi, &DriftSpec::Zero, 2.0, &[1e2, 1e3]).unwrap();
        for (u, val) in v {
            let fel = fel_integral(&psi, 2.0, u).unwrap();
            assert!((val - 2.0 * fel).abs() < 1e-6 * fel, "{u}: {val} vs {fel}");
        }
    }

    #[test]
    fn feller_stratonovich_drift_explodes() {
        let p = unit();
        let psi = PsiSpec::collapse(&p);
        let r = feller_test(&psi, &DriftSpec::PsiPsiPrime, 2.0, &[1e2, 1e3, 1e4]).unwrap();
        let red = r.reduction.as_ref().unwrap();
        assert!(red.converges && red.doubling_change < 1e-3);
        assert_eq!(r.fel.classification, DivergenceClass::Converges);
        assert_eq!(r.verdict, FellerVerdict::Explodes);
        // v(∞) = 2∫_2^∞ (y−2)/ψ² dy for b = ψψ'
        let exact = 2.0 * integrate(|y| (y - 2.0) / psi.sq(y), 2.0, 1e8, QuadOptions::default()).unwrap();
        let last = r.fel.ladder.last().unwrap().1;
        assert!((last - exact).abs() < 1e-6 * exact, "{last} vs {exact}");
    }

    #[test]
    fn feller_riccati() {
        let psi = PsiSpec::Riccati { alpha: 1.0 };
        let r = feller_test(&psi, &DriftSpec::Zero, 0.0, &[1e2, 1e3, 1e4]).unwrap();
        assert_eq!(r.verdict, FellerVerdict::NoExplosion);
        let slope = *r.increment_slopes.last().unwrap();
        // ∫_0^∞ (1+u²)⁻² du = π/4
        assert!((slope - std::f64::consts::FRAC_PI_4).abs() < 1e-6, "{slope}");
    }

    #[test]
    fn exits_linear_and_drifted() {
        let p = unit();
        let psi = PsiSpec::collapse(&p);
        let e = scale_function_exits(&psi, &DriftSpec::Zero, 2.0, 6.0, 3.0).unwrap();
        assert_eq!(e.high, 0.25);
        assert_eq!(scale_function_exits(&psi, &DriftSpec::Zero, 2.0, 6.0, 2.0).unwrap().high, 0.0);
        let (b, s) = (0.3, 0.7);
        let e = scale_function_exits(&PsiSpec::Constant { sigma: s }, &DriftSpec::Constant { b }, 0.0, 2.0, 0.5).unwrap();
        let g = |x: f64| 1.0 - (-2.0 * b * x / (s * s)).exp();
        let exact = g(0.5) / g(2.0);
        assert!((e.high - exact).abs() < 1e-10, "{} vs {exact}", e.high);
    }

    #[test]
    fn lyapunov_generator_at_two() {
        let p = unit();
        let h = lyapunov_generator(&PsiSpec::collapse(&p), &DriftSpec::Zero, 1.0, 2.0);
        assert!((h + 8.0 * p.kappa / 9.0).abs() < 1e-12);
        assert!(lyapunov_v(1.0) > 0.0);
    }

    #[test]
    fn first_passage_closed_forms() {
        let p = unit();
        let l = hitting_level(&p, 2.0);
        let p10 = first_passage_cdf(l, 10.0);
        assert!((p10 - 0.9751).abs() < 1e-4, "{p10}");
        assert!((first_passage_cdf(l, LEVY_MEDIAN_FACTOR * l * l) - 0.5).abs() < 1e-12);
        assert!((LEVY_MEDIAN_FACTOR * l * l - 0.021372).abs() < 1e-5);
        assert!(levy_consistency(l, 1e-4, 10.0, 200) < 1e-6);
        let mass = integrate(|t| levy_density(l, t), 1e-9, 1e6, QuadOptions::default()).unwrap();
        assert!((mass - first_passage_cdf(l, 1e6)).abs() < 1e-9);
    }

    #[test]
    fn interpolation_weight() {
        let th = interpolation_theta(2.0, 3.0, 4.0);
        assert!((1.0 / 3.0 - (th / 2.0 + (1.0 - th) / 4.0)).abs() < 1e-15);
    }

    #[test]
    fn auxiliary_ode_blows_up() {
        let p = unit();
        let a = auxiliary_blowup(&p, 2.0).unwrap();
        assert!(a.quadrature.is_finite() && a.quadrature > 0.0);
        assert!((a.integrated - a.quadrature).abs() < 1e-8 * a.quadrature, "{a:?}");
    }

    #[test]
    fn dds_on_gaussian_and_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z: Vec<f64> = (0..200_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let r = dds_normality(&z, String::new()).unwrap();
        assert_eq!(r.verdict, Verdict::Pass, "{:?}", r.checks);
        assert!(matches!(dds_normality(&[], String::new()), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn coefficient_constants_on_box() {
        let p = unit();
        let psi = PsiSpec::collapse(&p);
        let c = coefficient_constants(&psi, 1.5, 3.0);
        assert!((c.lipschitz - psi.derivative(3.0)).abs() < 1e-12);
        let (a, b) = integrability_on_box(&psi, 1.5, 3.0).unwrap();
        assert!(a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0);
    }

    #[test]
    fn deterministic_leg_is_smooth() {
        let p = unit();
        let e = deterministic_increment_exponent(&p, 0.3, &[1e-5, 2e-5, 4e-5, 8e-5, 1.6e-4]);
        assert!((e - 2.0).abs() < 0.01, "{e}");
    }
}
