//! Batch orchestration: a versioned JSON run configuration, the collapse → simulate →
//! analyze → Fokker–Planck pipeline, artifact emission and regression against a baseline.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{self, digest, finite_or_tag, AnalysisReport, Check, Rule, Verdict};
use crate::collapse::{
    cycloid_eval, freefall_time, implicit_time_of_u, kretschmann, newtonian_freefall_check,
    solve_density_ode, u_of_time, DensityOdeOptions, START_OFFSET,
};
use crate::equilibrium::{buchdahl_check, lane_emden_solve, StarConfig};
use crate::error::{Error, Result};
use crate::fokker_planck::{self, KfpConfig, MomentDriver};
use crate::params::ModelParams;
use crate::sde::{
    exit_race, simulate, DriftSpec, EngineConfig, Ensemble, EnsembleSpec, InitialCondition,
    PsiSpec, Scheme, TimeGrid,
};
use crate::stats::Estimate;
use crate::sde::DEFAULT_SUBSTEP_ETA;
use crate::CODE_VERSION;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Collapse,
    Equilibrium,
    Martingale,
    Moments,
    Doob,
    Upcrossing,
    Lyapunov,
    Continuity,
    Kretschmann,
    Dds,
    Ds,
    Es,
    Feller,
    Exits,
    Hitting,
    Gbm,
    FokkerPlanck,
}

impl Suite {
    pub const ALL: [Suite; 17] = [
        Suite::Collapse,
        Suite::Equilibrium,
        Suite::Martingale,
        Suite::Moments,
        Suite::Doob,
        Suite::Upcrossing,
        Suite::Lyapunov,
        Suite::Continuity,
        Suite::Kretschmann,
        Suite::Dds,
        Suite::Ds,
        Suite::Es,
        Suite::Feller,
        Suite::Exits,
        Suite::Hitting,
        Suite::Gbm,
        Suite::FokkerPlanck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Collapse => "collapse",
            Suite::Equilibrium => "equilibrium",
            Suite::Martingale => "martingale",
            Suite::Moments => "moments",
            Suite::Doob => "doob",
            Suite::Upcrossing => "upcrossing",
            Suite::Lyapunov => "lyapunov",
            Suite::Continuity => "continuity",
            Suite::Kretschmann => "kretschmann",
            Suite::Dds => "dds",
            Suite::Ds => "ds",
            Suite::Es => "es",
            Suite::Feller => "feller",
            Suite::Exits => "exits",
            Suite::Hitting => "hitting",
            Suite::Gbm => "gbm",
            Suite::FokkerPlanck => "fokker-planck",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|x| x.name() == s || (s == "fp" && *x == Suite::FokkerPlanck))
            .ok_or_else(|| Error::Config(format!("unknown suite '{s}'")))
    }

    /// Suites that consume the main Itô ensemble.
    pub fn uses_ensemble(self) -> bool {
        matches!(
            self,
            Suite::Martingale
                | Suite::Moments
                | Suite::Doob
                | Suite::Upcrossing
                | Suite::Lyapunov
                | Suite::Continuity
                | Suite::Kretschmann
                | Suite::Dds
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(rename = "G")]
    pub g: f64,
    pub rho0: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self { g: 1.0, rho0: 1.0 }
    }
}

/// Switch-on time of the noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Partition {
    EpsFraction(f64),
    TEps(f64),
}

impl Default for Partition {
    fn default() -> Self {
        Partition::EpsFraction(ModelParams::DEFAULT_SWITCH_FRACTION)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSpec {
    pub scheme: Scheme,
    pub n_paths: usize,
    pub dt: f64,
    /// Length of the stochastic leg after `t_ε`.
    pub horizon: f64,
    pub cap: f64,
    pub seed: u64,
    #[serde(default = "default_eta")]
    pub substep_eta: f64,
}

fn default_eta() -> f64 {
    DEFAULT_SUBSTEP_ETA
}

impl Default for EngineSpec {
    fn default() -> Self {
        Self {
            scheme: Scheme::ItoEuler,
            n_paths: 10_000,
            dt: 1e-5,
            horizon: 0.01,
            cap: 1e3,
            seed: 20_241_016,
            substep_eta: DEFAULT_SUBSTEP_ETA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExitSettings {
    pub alpha: f64,
    pub u0: f64,
    pub beta: f64,
    pub dt: f64,
    pub max_steps: usize,
}

impl Default for ExitSettings {
    fn default() -> Self {
        Self {
            alpha: 2.0,
            u0: 3.0,
            beta: 6.0,
            dt: 1e-6,
            max_steps: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HittingSettings {
    pub horizon: f64,
    pub dt0: f64,
    pub ratio: f64,
    pub checkpoints: Vec<f64>,
}

impl Default for HittingSettings {
    fn default() -> Self {
        Self {
            horizon: 10.0,
            dt0: 1e-5,
            ratio: 1e-3,
            checkpoints: vec![0.1, 1.0, 10.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GbmSettings {
    pub sigma: f64,
    pub n_paths: usize,
    pub horizon: f64,
    pub dt: f64,
    pub orders: Vec<f64>,
    pub hermite_order: usize,
}

impl Default for GbmSettings {
    fn default() -> Self {
        Self {
            sigma: 0.5,
            n_paths: 100_000,
            horizon: 1.0,
            dt: 1e-2,
            orders: vec![1.0, 2.0],
            hermite_order: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FpSettings {
    pub u_max: f64,
    pub cells: usize,
    pub dt: f64,
    pub horizon: f64,
    pub bins: usize,
    pub width_cells: f64,
}

impl Default for FpSettings {
    fn default() -> Self {
        Self {
            u_max: 1e3,
            cells: 2000,
            dt: 1e-5,
            horizon: 0.01,
            bins: 40,
            width_cells: 5.0,
        }
    }
}

/// Knobs of the individual suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteSettings {
    /// Number of evenly spaced martingale horizons over the stochastic leg.
    pub horizons: usize,
    pub moment_orders: Vec<f64>,
    pub doob_levels: Vec<f64>,
    pub upcrossing_cells: Vec<(f64, f64)>,
    pub lyapunov_grid: Vec<f64>,
    pub continuity_gaps: Vec<f64>,
    pub dds_level: f64,
    pub feller_cutoffs: Vec<f64>,
    pub exits: ExitSettings,
    pub hitting: HittingSettings,
    pub gbm: GbmSettings,
    pub fp: FpSettings,
}

impl Default for SuiteSettings {
    fn default() -> Self {
        Self {
            horizons: 5,
            moment_orders: vec![2.0, 3.0, 4.0],
            doob_levels: vec![4.0, 8.0, 16.0],
            upcrossing_cells: vec![(2.0, 3.0), (2.5, 4.0), (3.0, 6.0)],
            lyapunov_grid: vec![1.5, 2.0, 5.0, 10.0, 100.0],
            continuity_gaps: vec![1e-5, 2e-5, 4e-5, 8e-5],
            dds_level: 0.1,
            feller_cutoffs: vec![1e2, 1e3, 1e4],
            exits: ExitSettings::default(),
            hitting: HittingSettings::default(),
            gbm: GbmSettings::default(),
            fp: FpSettings::default(),
        }
    }
}

/// A complete, schema-versioned run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub partition: Partition,
    /// Start density of the stochastic leg; `null` takes the deterministic value at `t_ε`.
    #[serde(default = "default_u_eps")]
    pub u_eps: Option<f64>,
    #[serde(default)]
    pub engine: EngineSpec,
    #[serde(default = "all_suites")]
    pub suites: Vec<Suite>,
    #[serde(default)]
    pub settings: SuiteSettings,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub baseline: Option<PathBuf>,
    /// Relative tolerance overrides for [`regress`], keyed by `suite/check` prefix.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

fn default_u_eps() -> Option<f64> {
    Some(2.0)
}

fn all_suites() -> Vec<Suite> {
    Suite::ALL.to_vec()
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            model: ModelSpec::default(),
            partition: Partition::default(),
            u_eps: default_u_eps(),
            engine: EngineSpec::default(),
            suites: all_suites(),
            settings: SuiteSettings::default(),
            out_dir: default_out(),
            baseline: None,
            tolerances: BTreeMap::new(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.params()?.validate()?;
        let e = &self.engine;
        if e.n_paths == 0 || !(e.dt > 0.0) || !(e.horizon > 0.0) {
            return Err(Error::Config("engine needs n_paths > 0, dt > 0 and horizon > 0".into()));
        }
        if let Some(u) = self.u_eps {
            if !(u > 1.0 && u < e.cap) {
                return Err(Error::Config(format!("u_eps {u} must lie in (1, cap)")));
            }
        }
        Ok(())
    }

    pub fn params(&self) -> Result<ModelParams> {
        match self.partition {
            Partition::EpsFraction(f) => ModelParams::with_switch_fraction(self.model.g, self.model.rho0, f),
            Partition::TEps(t) => ModelParams::with_switch_time(self.model.g, self.model.rho0, t),
        }
    }

    pub fn resolved_u_eps(&self) -> Result<f64> {
        let p = self.params()?;
        Ok(self.u_eps.unwrap_or_else(|| u_of_time(&p, p.t_eps)))
    }

    /// Definition of the main Itô ensemble shared by the ensemble suites.
    pub fn ensemble_spec(&self) -> Result<EnsembleSpec> {
        let params = self.params()?;
        let u_eps = self.resolved_u_eps()?;
        let e = &self.engine;
        let s = &self.settings;
        let mut cfg = EngineConfig::new(
            e.scheme,
            PsiSpec::collapse(&params),
            e.n_paths,
            TimeGrid::Uniform { dt: e.dt },
            params.t_eps + e.horizon,
            e.cap,
            e.seed,
        );
        cfg.substep_eta = e.substep_eta;
        let mut offsets: Vec<f64> = vec![0.0];
        offsets.extend(self.horizons());
        offsets.extend(s.continuity_gaps.iter().copied().filter(|&g| g < e.horizon));
        offsets.sort_by(f64::total_cmp);
        offsets.dedup();
        cfg.record_offsets = offsets;
        cfg.upcrossing_cells = s
            .upcrossing_cells
            .iter()
            .copied()
            .filter(|&(a, b)| a < b && b < e.cap)
            .collect();
        cfg.dds_level = Some(s.dds_level);
        Ok(EnsembleSpec {
            params,
            u_eps,
            t_start: params.t_eps,
            config: cfg,
        })
    }

    /// Digest of everything that affects results; output and baseline locations are left out.
    pub fn results_digest(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        c.baseline = None;
        digest(&c)
    }

    /// Martingale horizons as offsets from `t_ε`.
    pub fn horizons(&self) -> Vec<f64> {
        let k = self.settings.horizons.max(1);
        (1..=k)
            .map(|i| self.engine.horizon * i as f64 / k as f64)
            .collect()
    }
}

/// Outcome of one suite inside a pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteOutcome {
    pub suite: Suite,
    pub verdict: Verdict,
    pub report_digest: String,
    pub checks: usize,
    pub failed: usize,
    pub inconclusive: usize,
    /// Set when the suite could not run; the suite then counts as inconclusive.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub code_version: String,
    pub config_digest: String,
    pub suites: Vec<SuiteOutcome>,
    pub overall: Verdict,
    /// Wall-clock seconds per stage; written to `timings.json`, not to `summary.json`.
    #[serde(skip)]
    pub timings: BTreeMap<String, f64>,
}

impl PipelineResult {
    pub fn passed(&self) -> bool {
        self.overall == Verdict::Pass
    }
}

/// Pass iff no suite that reached a verdict failed.
pub fn overall_verdict(outcomes: &[SuiteOutcome]) -> Verdict {
    if outcomes.iter().any(|o| o.verdict == Verdict::Fail) {
        Verdict::Fail
    } else {
        Verdict::Pass
    }
}

#[derive(Serialize)]
struct Resolved<'a> {
    code_version: &'a str,
    config: &'a RunConfig,
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Write the resolved configuration and code version next to an artifact directory.
pub fn write_provenance(dir: &Path, cfg: &RunConfig) -> Result<()> {
    write_json(
        &dir.join("resolved_config.json"),
        &Resolved {
            code_version: CODE_VERSION,
            config: cfg,
        },
    )
}

fn fmt(x: f64) -> String {
    format!("{x:e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

pub fn checks_csv(reports: &[AnalysisReport]) -> String {
    let mut s = String::from("suite,check,measured,stderr,bound,verdict\n");
    for r in reports {
        for c in &r.checks {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.suite,
                c.name.replace(',', ";"),
                fmt(c.measured),
                opt(c.stderr),
                fmt(c.bound),
                serde_json::to_value(c.verdict).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
            );
        }
    }
    s
}

/// Collapse profile rows `(t, R, u, rho, K)` from `1 + δ` to `t_end`.
pub fn collapse_csv(params: &ModelParams, u0: f64, t_end: f64) -> Result<String> {
    let traj = solve_density_ode(params, u0, t_end, &DensityOdeOptions::default())?;
    let mut s = String::from("t,R,u,rho,K\n");
    for st in &traj.states {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            fmt(st.t),
            fmt(st.r),
            fmt(st.u),
            fmt(st.rho),
            fmt(kretschmann(params, st.u))
        );
    }
    Ok(s)
}

pub fn ensemble_records_csv(ens: &Ensemble) -> String {
    let mut s = String::from("t,mean,stderr,variance,mean_comp,mean_qv\n");
    for r in ens.summary().records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            fmt(r.t),
            fmt(r.mean.value),
            fmt(r.mean.stderr),
            fmt(r.variance),
            fmt(r.mean_comp),
            fmt(r.mean_qv)
        );
    }
    s
}

/// Rows `(t, u)` of the first `k` stored paths.
pub fn paths_csv(ens: &Ensemble) -> String {
    let mut s = String::from("path,t,u\n");
    for (i, p) in ens.full_paths().enumerate() {
        for (t, u) in p.t.iter().zip(&p.u) {
            let _ = writeln!(s, "{i},{},{}", fmt(*t), fmt(*u));
        }
    }
    s
}

pub fn density_csv(dg: &fokker_planck::DensityGrid) -> String {
    let mut s = String::from("t,u,P\n");
    for (t, u, p) in dg.rows() {
        let _ = writeln!(s, "{},{},{}", fmt(t), fmt(u), fmt(p));
    }
    s
}

/// Deterministic collapse checks: closed-form, cycloid and ODE collapse times, the implicit
/// oracle and the Newtonian free fall.
pub fn collapse_report(params: &ModelParams) -> Result<AnalysisReport> {
    let mut rep = AnalysisReport::new("collapse", digest(params));
    let closed = freefall_time(params.g, params.rho0);
    rep.push(Check::new("t-star", params.t_star, None, closed, Rule::Tolerance { tol: 1e-12 }));
    let cyc = cycloid_eval(params, std::f64::consts::PI)?;
    rep.push(Check::new("cycloid-root", cyc.t, None, closed, Rule::Tolerance { tol: 1e-6 }));
    let traj = solve_density_ode(
        params,
        1.0 + START_OFFSET,
        2.0 * params.t_star,
        &DensityOdeOptions::default(),
    )?;
    let t_blow = traj.blowup.map(|b| b.0).unwrap_or(f64::NAN);
    rep.push(Check::new("ode-blowup", t_blow, None, closed, Rule::Tolerance { tol: 1e-3 }));
    rep.push(Check::new(
        "implicit-oracle",
        traj.oracle_residual(params, 1.01, 1e6),
        None,
        1e-8,
        Rule::AtMost { k: 0.0 },
    ));
    let ff = newtonian_freefall_check(params)?;
    rep.push(Check::new("newtonian-freefall", ff.integrated, None, closed, Rule::Tolerance { tol: 1e-4 }));
    let det = solve_density_ode(params, 1.0 + START_OFFSET, params.t_eps, &DensityOdeOptions::default())?;
    let u_ode = det.last().u;
    let u_inv = u_of_time(params, params.t_eps);
    rep.push(Check::new(
        "u-eps-relative",
        ((u_ode - u_inv) / u_inv).abs(),
        None,
        1e-6,
        Rule::AtMost { k: 0.0 },
    ));
    rep.note(format!("t* = {closed:.9}; u(t_eps) = {u_inv:.10}; blow-up signal {:?}", traj.blowup.map(|b| b.1)));
    Ok(rep)
}

/// Lane–Emden analytic cases, the n = 3 surface and the Buchdahl central pressures.
pub fn equilibrium_report() -> Result<AnalysisReport> {
    let mut rep = AnalysisReport::new("equilibrium", digest(&"lane-emden/buchdahl"));
    let step = 1e-3;
    for (n, exact) in [
        (0.0, (|x: f64| 1.0 - x * x / 6.0) as fn(f64) -> f64),
        (1.0, |x: f64| x.sin() / x),
    ] {
        let sol = lane_emden_solve(n, step)?;
        let err = sol
            .samples
            .iter()
            .skip(1)
            .map(|&(xi, th, _)| (th - exact(xi)).abs())
            .fold(0.0, f64::max);
        rep.push(Check::new(format!("lane-emden[n={n}]"), err, None, 1e-8, Rule::AtMost { k: 0.0 }));
    }
    let sol = lane_emden_solve(3.0, step)?;
    let surf = sol.surface.expect("strict solve has a surface");
    rep.push(Check::new("xi1[n=3]", surf.xi1, None, 6.89685, Rule::Tolerance { tol: 5e-4 }));
    rep.push(Check::new("mu1[n=3]", surf.mu1, None, 2.01824, Rule::Tolerance { tol: 5e-4 }));
    let half = buchdahl_check(&StarConfig::from_compactness(0.5)?);
    rep.push(Check::new(
        "buchdahl-pc[c=0.5]",
        half.central_pressure_ratio.unwrap_or(f64::NAN),
        None,
        0.26121,
        Rule::Tolerance { tol: 1e-5 },
    ));
    let edge = buchdahl_check(&StarConfig::from_compactness(8.0 / 9.0 - 1e-6)?);
    rep.push(Check::new(
        "buchdahl-pc[c=8/9-1e-6]",
        edge.central_pressure_ratio.unwrap_or(f64::NAN),
        None,
        1e5,
        Rule::AtLeast { k: 0.0 },
    ));
    Ok(rep)
}

/// Delbaen–Shirakawa ladders for the collapse coefficient and for `e^{x}`.
pub fn ds_report(params: &ModelParams) -> Result<AnalysisReport> {
    let psi = PsiSpec::collapse(params);
    let mut rep = AnalysisReport::new("ds", digest(&psi));
    let cfg = analysis::DsConfig::collapse();
    let r = analysis::delbaen_shirakawa_test(&psi, &cfg)?;
    let k = params.kappa;
    for delta in [1e-3, 1e-6] {
        let v = k * analysis::ds_integral(&psi, 1.0 + delta, cfg.upper_fixed)?;
        let exact = analysis::collapse_ds_antiderivative(cfg.upper_fixed) - analysis::collapse_ds_antiderivative(1.0 + delta);
        rep.push(Check::new(format!("ladder[delta={delta:e}]"), v, None, exact, Rule::Tolerance { tol: 1e-3 }));
        rep.note(format!(
            "delta {delta:e}: kappa*I = {v:.6}, antiderivative {exact:.6}, asymptotic -1.5 - ln(delta) = {:.6}",
            -1.5 - delta.ln()
        ));
    }
    rep.push(Check::new(
        "collapse-true-martingale",
        f64::from(u8::from(r.true_martingale)),
        None,
        1.0,
        Rule::Tolerance { tol: 0.0 },
    ));
    let e = analysis::delbaen_shirakawa_test(&PsiSpec::Exponential { rate: 1.0 }, &analysis::DsConfig::new(0.0, 1.0, 1.0))?;
    rep.push(Check::new(
        "exp-not-true-martingale",
        f64::from(u8::from(!e.true_martingale)),
        None,
        1.0,
        Rule::Tolerance { tol: 0.0 },
    ));
    rep.note(format!(
        "collapse: lower {:?}, upper {:?}; exp: lower {:?}, upper {:?}",
        r.lower.classification, r.upper.classification, e.lower.classification, e.upper.classification
    ));
    Ok(rep)
}

/// Engelbert–Schmidt existence on the collapse coefficient and on `|x−5|^{0.1}`.
pub fn es_report(params: &ModelParams) -> Result<AnalysisReport> {
    let psi = PsiSpec::collapse(params);
    let mut rep = AnalysisReport::new("es", digest(&psi));
    let c = analysis::engelbert_schmidt_test(|u| psi.value(u), 1.001, 1e6, 2000)?;
    rep.push(Check::new(
        "collapse-interior-singular",
        (c.zeros.len() + c.singular.len()) as f64,
        None,
        0.0,
        Rule::Tolerance { tol: 0.0 },
    ));
    let l = analysis::engelbert_schmidt_test(|x| x - 5.0, 1.0, 10.0, 900)?;
    rep.push(Check::new("linear-singular-count", l.singular.len() as f64, None, 1.0, Rule::Tolerance { tol: 0.0 }));
    let p = analysis::engelbert_schmidt_test(|x| (x - 5.0).abs().powf(0.1), 1.0, 10.0, 900)?;
    rep.push(Check::new("power-zero-count", p.zeros.len() as f64, None, 1.0, Rule::Tolerance { tol: 0.0 }));
    rep.push(Check::new("power-singular-count", p.singular.len() as f64, None, 0.0, Rule::Tolerance { tol: 0.0 }));
    rep.note(format!(
        "collapse zeros {:?} singular {:?} exists {}; |x-5|^0.1 zeros {:?} singular {:?} exists {}",
        c.zeros, c.singular, c.exists, p.zeros, p.singular, p.exists
    ));
    Ok(rep)
}

fn verdict_value(v: analysis::FellerVerdict) -> f64 {
    match v {
        analysis::FellerVerdict::NoExplosion => 0.0,
        analysis::FellerVerdict::Explodes => 1.0,
        analysis::FellerVerdict::Inconclusive => f64::NAN,
    }
}

/// Feller explosion test: zero drift, the Stratonovich drift and the Riccati example.
pub fn feller_report(params: &ModelParams, u_start: f64, cutoffs: &[f64]) -> Result<AnalysisReport> {
    let psi = PsiSpec::collapse(params);
    let mut rep = AnalysisReport::new("feller", digest(&(psi, cutoffs)));
    let zero = analysis::feller_test(&psi, &DriftSpec::Zero, u_start, cutoffs)?;
    rep.push(Check::new("zero-drift-slope-drift", zero.slope_drift, None, 0.01, Rule::AtMost { k: 0.0 }));
    rep.push(Check::new(
        "zero-drift-no-explosion",
        verdict_value(zero.verdict),
        None,
        0.0,
        Rule::Tolerance { tol: 0.0 },
    ));
    let strat = analysis::feller_test(&psi, &DriftSpec::PsiPsiPrime, u_start, cutoffs)?;
    if let Some(red) = &strat.reduction {
        rep.push(Check::new("strat-doubling-change", red.doubling_change, None, 1e-3, Rule::AtMost { k: 0.0 }));
    }
    rep.push(Check::new("strat-explodes", verdict_value(strat.verdict), None, 1.0, Rule::Tolerance { tol: 0.0 }));
    let ric = PsiSpec::Riccati { alpha: 1.0 };
    let r = analysis::feller_test(&ric, &DriftSpec::Zero, 0.0, &[1e2, 1e3, 1e4])?;
    rep.push(Check::new("riccati-no-explosion", verdict_value(r.verdict), None, 0.0, Rule::Tolerance { tol: 0.0 }));
    rep.note(format!(
        "zero-drift increment slopes {:?}; Stratonovich v ladder {:?}",
        zero.increment_slopes, strat.fel.ladder
    ));
    Ok(rep)
}

/// Exit race from `(alpha, beta)` against the scale-function probability.
pub fn exits_report(params: &ModelParams, s: &ExitSettings, n: usize, seed: u64) -> Result<AnalysisReport> {
    let psi = PsiSpec::collapse(params);
    let mut rep = AnalysisReport::new("exits", digest(&(psi, s, n, seed)));
    let exact = analysis::scale_function_exits(&psi, &DriftSpec::Zero, s.alpha, s.beta, s.u0)?;
    rep.push(Check::new(
        "analytic-high",
        exact.high,
        None,
        (s.u0 - s.alpha) / (s.beta - s.alpha),
        Rule::Tolerance { tol: 1e-12 },
    ));
    let counts = exit_race(&psi, &DriftSpec::Zero, s.alpha, s.beta, s.u0, n, s.dt, s.max_steps, seed)?;
    let decided = counts.high + counts.low;
    let est = Estimate::proportion(counts.high, decided);
    let se = (exact.high * (1.0 - exact.high) / decided.max(1) as f64).sqrt();
    rep.push(Check::new("mc-high", est.value, Some(se), exact.high, Rule::Within { k: 3.0 }));
    rep.push(Check::new("undecided", counts.undecided as f64, None, 0.0, Rule::Tolerance { tol: 0.0 }));
    Ok(rep)
}

/// Exact Stratonovich ensemble for the first-passage suite.
pub fn hitting_spec(cfg: &RunConfig) -> Result<EnsembleSpec> {
    let params = cfg.params()?;
    let h = &cfg.settings.hitting;
    let mut ec = EngineConfig::new(
        Scheme::StratExact,
        PsiSpec::collapse(&params),
        cfg.engine.n_paths,
        TimeGrid::Graded {
            dt0: h.dt0,
            ratio: h.ratio,
        },
        params.t_eps + h.horizon,
        f64::INFINITY,
        cfg.engine.seed,
    );
    ec.record_offsets = vec![0.0];
    Ok(EnsembleSpec {
        params,
        u_eps: cfg.resolved_u_eps()?,
        t_start: params.t_eps,
        config: ec,
    })
}

/// Constant-σ ensemble whose stochastic exponential is a lognormal martingale.
pub fn gbm_spec(cfg: &RunConfig) -> Result<EnsembleSpec> {
    let params = cfg.params()?;
    let g = &cfg.settings.gbm;
    let mut ec = EngineConfig::new(
        Scheme::ItoEuler,
        PsiSpec::Constant { sigma: g.sigma },
        g.n_paths,
        TimeGrid::Uniform { dt: g.dt },
        params.t_eps + g.horizon,
        f64::INFINITY,
        cfg.engine.seed,
    );
    ec = ec.with_uniform_records(g.horizon, 4);
    Ok(EnsembleSpec {
        params,
        u_eps: 2.0,
        t_start: params.t_eps,
        config: ec,
    })
}

pub fn gbm_report(cfg: &RunConfig) -> Result<AnalysisReport> {
    let g = &cfg.settings.gbm;
    let ens = gbm_spec(cfg)?.run()?;
    let hz: Vec<f64> = (1..=4).map(|k| g.horizon * k as f64 / 4.0).collect();
    let mut rep = analysis::gbm_suite(&ens, 1.0, &hz, Some(g.sigma), &g.orders);
    for i in 0..5 {
        for j in 0..5 {
            let x = -1.0 + 0.5 * i as f64;
            let th = -0.4 + 0.2 * j as f64;
            let h = fokker_planck::hermite_expansion(x, th, g.hermite_order)?;
            rep.push(Check::new(
                format!("hermite[x={x},theta={th:.1}]"),
                h.error,
                None,
                1e-10,
                Rule::AtMost { k: 0.0 },
            ));
        }
    }
    Ok(rep)
}

/// Fokker–Planck solve, comparison with an Itô ensemble started from the same Gaussian,
/// stationary density and moment ODE.
pub fn fp_report(cfg: &RunConfig) -> Result<(AnalysisReport, fokker_planck::DensityGrid)> {
    let params = cfg.params()?;
    let psi = PsiSpec::collapse(&params);
    let s = &cfg.settings.fp;
    let u_eps = cfg.resolved_u_eps()?;
    let mut kc = KfpConfig::new(u_eps, s.u_max, s.cells, s.dt, s.horizon);
    kc.width_cells = s.width_cells;
    let dg = fokker_planck::kfp_solve(&psi, 1.0, &kc)?;
    let mut ec = EngineConfig::new(
        Scheme::ItoEuler,
        psi,
        cfg.engine.n_paths,
        TimeGrid::Uniform { dt: cfg.engine.dt },
        params.t_eps + s.horizon,
        s.u_max,
        cfg.engine.seed,
    );
    ec.initial = InitialCondition::Gaussian {
        width: dg.kernel_width,
        floor: kc.u_lo,
    };
    let ens = simulate(&params, u_eps, params.t_eps, &ec)?;
    let cmp = fokker_planck::fp_compare(&dg, &ens, s.bins)?;
    let mut rep = AnalysisReport::new("fokker-planck", digest(&(&kc, &ens.spec)));
    let k = dg.last();
    rep.push(Check::new("tv-distance", cmp.tv_distance, None, 0.05, Rule::AtMost { k: 0.0 }));
    rep.push(Check::new("leaked-mass", cmp.pde_leaked, None, 1e-3, Rule::AtMost { k: 0.0 }));
    rep.push(Check::new("mass-defect", dg.mass_defect, None, 1e-8, Rule::AtMost { k: 0.0 }));
    rep.push(Check::new("min-density", dg.min_density, None, 0.0, Rule::AtLeast { k: 0.0 }));
    rep.push(Check::new(
        "stopped-mean-relative",
        ((dg.stopped_mean(k) - u_eps) / u_eps).abs(),
        None,
        5e-3,
        Rule::AtMost { k: 0.0 },
    ));
    rep.push(Check::new(
        "m1-vs-mc",
        ((cmp.pde_mean - cmp.mc_mean) / cmp.mc_mean).abs(),
        None,
        0.05,
        Rule::AtMost { k: 0.0 },
    ));
    rep.push(Check::new(
        "m2-vs-mc",
        ((cmp.pde_second - cmp.mc_second) / cmp.mc_second).abs(),
        None,
        0.05,
        Rule::AtMost { k: 0.0 },
    ));
    let sd = fokker_planck::stationary_density(&psi, &DriftSpec::Zero, 1.1, 100.0)?;
    rep.push(Check::new("stationary-residual", sd.max_residual(200, 1e-2), None, 1e-10, Rule::AtMost { k: 0.0 }));
    let (closed, ode) = fokker_planck::kfp_moment_ode(&psi, 1.0, 2.0, 1.0, &MomentDriver::Frozen { u: u_eps }, s.horizon, 100)?;
    let worst = closed
        .values
        .iter()
        .zip(&ode.values)
        .map(|(a, b)| ((a - b) / a).abs())
        .fold(0.0, f64::max);
    rep.push(Check::new("moment-ode", worst, None, 1e-8, Rule::AtMost { k: 0.0 }));
    rep.note(format!(
        "interior mean {:.6} (MC {:.6}); stopped mean {:.6}; leaked PDE {:.3e} MC {:.3e}",
        cmp.pde_mean,
        cmp.mc_mean,
        dg.stopped_mean(k),
        cmp.pde_leaked,
        cmp.mc_leaked
    ));
    let om = fokker_planck::om_coefficients(&psi, u_eps);
    let actions: Vec<f64> = [1e2, 1e3, 1e4]
        .iter()
        .map(|&u| fokker_planck::profile_action(&params, u_eps, u, 800).map(|a| a.action))
        .collect::<Result<_>>()?;
    rep.note(format!(
        "Onsager-Machlup at u_eps: beta1 {:.6}, beta2 {:.6}, beta3 {:.6}, constant-path L {:.6}; profile actions to 1e2/1e3/1e4: {actions:?}",
        om.beta1,
        om.beta2,
        om.beta3,
        fokker_planck::om_lagrangian(&psi, u_eps, 0.0)
    ));
    Ok((rep, dg))
}

/// Compare the forward equation with a stored Itô ensemble. The grid runs to the ensemble
/// cap when it is finite, so capped paths and leaked mass measure the same thing.
pub fn fp_compare_ensemble(
    spec: &EnsembleSpec,
    s: &FpSettings,
) -> Result<(AnalysisReport, fokker_planck::DensityGrid)> {
    let ec = &spec.config;
    if ec.scheme != Scheme::ItoEuler {
        return Err(Error::Config("the forward equation has no drift; compare with an ito ensemble".into()));
    }
    let ens = spec.run()?;
    let horizon = ens.record_times[ens.record_times.len() - 1] - ens.t_start();
    let u_max = if ec.cap.is_finite() { ec.cap } else { s.u_max };
    let steps = (horizon / s.dt).ceil().max(1.0);
    let mut kc = KfpConfig::new(spec.u_eps, u_max, s.cells, horizon / steps, horizon);
    kc.width_cells = s.width_cells;
    let dg = match ec.initial {
        InitialCondition::Gaussian { width, .. } => {
            let grid = fokker_planck::CellGrid::geometric(kc.u_lo, kc.u_max, kc.cells, kc.first_cell)?;
            let p0 = fokker_planck::gaussian_cells(&grid, spec.u_eps, width);
            fokker_planck::kfp_evolve(&ec.psi, 1.0, grid, p0, &kc, width)?
        }
        InitialCondition::Point => fokker_planck::kfp_solve(&ec.psi, 1.0, &kc)?,
    };
    let cmp = fokker_planck::fp_compare(&dg, &ens, s.bins)?;
    let mut rep = AnalysisReport::new("fokker-planck", digest(&(&kc, spec)));
    let se = |p: f64| (p * (1.0 - p) / ens.n() as f64).sqrt();
    rep.push(Check::new("tv-distance", cmp.tv_distance, None, 0.05, Rule::AtMost { k: 0.0 }));
    rep.push(Check::new(
        "leaked-vs-capped",
        (cmp.pde_leaked - cmp.mc_leaked).abs(),
        Some(se(cmp.mc_leaked.max(1.0 / ens.n() as f64))),
        0.0,
        Rule::AtMost { k: 4.0 },
    ));
    rep.push(Check::new(
        "m1-vs-mc",
        ((cmp.pde_mean - cmp.mc_mean) / cmp.mc_mean).abs(),
        None,
        0.05,
        Rule::AtMost { k: 0.0 },
    ));
    rep.push(Check::new(
        "m2-vs-mc",
        ((cmp.pde_second - cmp.mc_second) / cmp.mc_second).abs(),
        None,
        0.05,
        Rule::AtMost { k: 0.0 },
    ));
    rep.note(format!(
        "horizon {horizon:.3e}, grid top {u_max:.3e}, kernel width {:.3e}",
        dg.kernel_width
    ));
    Ok((rep, dg))
}

/// Run one ensemble suite on an existing ensemble.
pub fn analyze_ensemble(suite: Suite, ens: &Ensemble, cfg: &RunConfig) -> Result<AnalysisReport> {
    let s = &cfg.settings;
    let hz = cfg.horizons();
    match suite {
        Suite::Martingale => analysis::martingale_suite(ens, &hz),
        Suite::Moments => analysis::moment_suite(ens, &s.moment_orders, &hz),
        Suite::Doob => analysis::doob_maximal_suite(ens, &s.doob_levels),
        Suite::Upcrossing => analysis::upcrossing_suite(ens),
        Suite::Lyapunov => analysis::lyapunov_suite(ens, &s.lyapunov_grid, &s.moment_orders),
        Suite::Continuity => analysis::continuity_suite(ens, &s.continuity_gaps),
        Suite::Kretschmann => analysis::kretschmann_expectation(ens),
        Suite::Dds => analysis::dds_time_change_check(ens),
        Suite::Hitting => analysis::first_passage_suite(ens, &s.hitting.checkpoints),
        other => Err(Error::Config(format!("suite '{}' does not take an ensemble", other.name()))),
    }
}

/// Run a suite that builds its own inputs.
pub fn run_standalone(suite: Suite, cfg: &RunConfig) -> Result<AnalysisReport> {
    let params = cfg.params()?;
    match suite {
        Suite::Collapse => collapse_report(&params),
        Suite::Equilibrium => equilibrium_report(),
        Suite::Ds => ds_report(&params),
        Suite::Es => es_report(&params),
        Suite::Feller => feller_report(&params, cfg.resolved_u_eps()?, &cfg.settings.feller_cutoffs),
        Suite::Exits => exits_report(&params, &cfg.settings.exits, cfg.engine.n_paths, cfg.engine.seed),
        Suite::Hitting => {
            let ens = hitting_spec(cfg)?.run()?;
            analysis::first_passage_suite(&ens, &cfg.settings.hitting.checkpoints)
        }
        Suite::Gbm => gbm_report(cfg),
        Suite::FokkerPlanck => fp_report(cfg).map(|r| r.0),
        other => {
            let ens = cfg.ensemble_spec()?.run()?;
            analyze_ensemble(other, &ens, cfg)
        }
    }
}

fn outcome(suite: Suite, res: Result<AnalysisReport>) -> (SuiteOutcome, Option<AnalysisReport>) {
    match res {
        Ok(rep) => (
            SuiteOutcome {
                suite,
                verdict: rep.verdict,
                report_digest: digest(&rep),
                checks: rep.checks.len(),
                failed: rep.checks.iter().filter(|c| c.verdict == Verdict::Fail).count(),
                inconclusive: rep.checks.iter().filter(|c| c.verdict == Verdict::Inconclusive).count(),
                error: None,
            },
            Some(rep),
        ),
        Err(e) => (
            SuiteOutcome {
                suite,
                verdict: Verdict::Inconclusive,
                report_digest: String::new(),
                checks: 0,
                failed: 0,
                inconclusive: 0,
                error: Some(e.to_string()),
            },
            None,
        ),
    }
}

/// Execute every configured suite and write the artifacts into `cfg.out_dir`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineResult> {
    cfg.validate()?;
    let params = cfg.params()?;
    let out = &cfg.out_dir;
    fs::create_dir_all(out.join("reports"))?;
    write_provenance(out, cfg)?;
    let mut timings = BTreeMap::new();
    let mut suites: Vec<Suite> = cfg.suites.clone();
    suites.sort();
    suites.dedup();
    let mut outcomes = Vec::new();
    let mut reports = Vec::new();

    if suites.contains(&Suite::Collapse) {
        let t = Instant::now();
        fs::write(out.join("collapse.csv"), collapse_csv(&params, 1.0 + START_OFFSET, params.t_star)?)?;
        timings.insert("collapse-csv".to_string(), t.elapsed().as_secs_f64());
    }
    let ensemble = if suites.iter().any(|s| s.uses_ensemble()) {
        let t = Instant::now();
        let spec = cfg.ensemble_spec()?;
        let ens = spec.run()?;
        write_json(&out.join("ensemble.json"), &spec)?;
        write_json(&out.join("ensemble_summary.json"), &ens.summary())?;
        fs::write(out.join("records.csv"), ensemble_records_csv(&ens))?;
        timings.insert("simulate".to_string(), t.elapsed().as_secs_f64());
        Some(ens)
    } else {
        None
    };
    for &suite in &suites {
        let t = Instant::now();
        let res = match (&ensemble, suite.uses_ensemble()) {
            (Some(ens), true) => analyze_ensemble(suite, ens, cfg),
            _ if suite == Suite::FokkerPlanck => fp_report(cfg).and_then(|(rep, dg)| {
                fs::write(out.join("fp_density.csv"), density_csv(&dg))?;
                Ok(rep)
            }),
            _ => run_standalone(suite, cfg),
        };
        timings.insert(suite.name().to_string(), t.elapsed().as_secs_f64());
        let (o, rep) = outcome(suite, res);
        if let Some(rep) = rep {
            write_json(&out.join("reports").join(format!("{}.json", suite.name())), &rep)?;
            reports.push(rep);
        }
        outcomes.push(o);
    }
    fs::write(out.join("checks.csv"), checks_csv(&reports))?;
    let result = PipelineResult {
        code_version: CODE_VERSION.to_string(),
        config_digest: cfg.results_digest(),
        overall: overall_verdict(&outcomes),
        suites: outcomes,
        timings,
    };
    write_json(&out.join("summary.json"), &result)?;
    write_json(&out.join("timings.json"), &result.timings)?;
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    Deterministic,
    Statistical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    pub field: String,
    pub kind: FieldKind,
    #[serde(with = "finite_or_tag")]
    pub baseline: f64,
    #[serde(with = "finite_or_tag")]
    pub current: f64,
    /// Infinite for sampled fields without a standard error: those only have to keep passing.
    #[serde(with = "finite_or_tag")]
    pub tolerance: f64,
    pub exceeded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffReport {
    pub compared: usize,
    /// Fields present on one side only.
    pub missing: Vec<String>,
    /// Every field whose value changed.
    pub drifts: Vec<Drift>,
}

impl DiffReport {
    pub fn violations(&self) -> impl Iterator<Item = &Drift> {
        self.drifts.iter().filter(|d| d.exceeded)
    }

    pub fn is_clean(&self) -> bool {
        self.violations().next().is_none() && self.missing.is_empty()
    }
}

const SEED_FREE_SUITES: [&str; 5] = ["collapse", "equilibrium", "ds", "es", "feller"];

const SEED_FREE_CHECKS: [&str; 10] = [
    "exits/analytic-high",
    "hitting/level",
    "hitting/cdf-density-consistency",
    "fokker-planck/leaked-mass",
    "fokker-planck/mass-defect",
    "fokker-planck/min-density",
    "fokker-planck/stopped-mean-relative",
    "fokker-planck/stationary-residual",
    "fokker-planck/moment-ode",
    "gbm/hermite",
];

/// Whether a `suite/check` field depends on the random seed.
pub fn field_kind(field: &str) -> FieldKind {
    let suite = field.split('/').next().unwrap_or_default();
    if SEED_FREE_SUITES.contains(&suite) || SEED_FREE_CHECKS.iter().any(|c| field.starts_with(c)) {
        FieldKind::Deterministic
    } else {
        FieldKind::Statistical
    }
}

/// Statistical fields may move by this many combined standard errors.
pub const REGRESS_SIGMAS: f64 = 5.0;
/// Relative tolerance of deterministic fields.
pub const REGRESS_DETERMINISTIC: f64 = 1e-9;

fn load_reports(dir: &Path) -> Result<BTreeMap<String, Check>> {
    let mut out = BTreeMap::new();
    let rdir = dir.join("reports");
    let mut entries: Vec<PathBuf> = fs::read_dir(&rdir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    entries.sort();
    for p in entries {
        let rep: AnalysisReport = serde_json::from_str(&fs::read_to_string(&p)?)?;
        for c in rep.checks {
            out.insert(format!("{}/{}", rep.suite, c.name), c);
        }
    }
    Ok(out)
}

/// Compare the check values of two output directories.
pub fn diff_dirs(current: &Path, baseline: &Path, overrides: &BTreeMap<String, f64>) -> Result<DiffReport> {
    let a = load_reports(current)?;
    let b = load_reports(baseline)?;
    let mut missing: Vec<String> = a.keys().filter(|k| !b.contains_key(*k)).cloned().collect();
    missing.extend(b.keys().filter(|k| !a.contains_key(*k)).cloned());
    missing.sort();
    let mut drifts = Vec::new();
    let mut compared = 0;
    for (field, cur) in &a {
        let Some(base) = b.get(field) else { continue };
        compared += 1;
        let same = cur.measured.to_bits() == base.measured.to_bits()
            || (cur.measured.is_nan() && base.measured.is_nan());
        if same {
            continue;
        }
        let over = overrides
            .iter()
            .filter(|(k, _)| field.starts_with(k.as_str()))
            .max_by_key(|(k, _)| k.len())
            .map(|(_, v)| *v);
        let scale = cur.measured.abs().max(base.measured.abs());
        let delta = (cur.measured - base.measured).abs();
        let kind = field_kind(field);
        let (tol, exceeded) = match (kind, over, cur.stderr, base.stderr) {
            (_, Some(r), _, _) => (r * scale, !(delta <= r * scale)),
            (FieldKind::Statistical, None, Some(x), Some(y)) => {
                let t = REGRESS_SIGMAS * x.hypot(y);
                (t, !(delta <= t))
            }
            (FieldKind::Statistical, None, _, _) => (
                f64::INFINITY,
                cur.verdict == Verdict::Fail && base.verdict != Verdict::Fail,
            ),
            (FieldKind::Deterministic, None, _, _) => {
                let t = REGRESS_DETERMINISTIC * scale;
                (t, !(delta <= t))
            }
        };
        drifts.push(Drift {
            field: field.clone(),
            kind,
            baseline: base.measured,
            current: cur.measured,
            tolerance: tol,
            exceeded,
        });
    }
    Ok(DiffReport {
        compared,
        missing,
        drifts,
    })
}

/// Run `cfg` and compare its checks with the output directory `baseline`.
pub fn regress(cfg: &RunConfig, baseline: &Path) -> Result<(PipelineResult, DiffReport)> {
    if !baseline.join("reports").is_dir() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("baseline {} has no reports directory", baseline.display()),
        )));
    }
    let result = run_pipeline(cfg)?;
    let diff = diff_dirs(&cfg.out_dir, baseline, &cfg.tolerances)?;
    write_json(&cfg.out_dir.join("regress.json"), &diff)?;
    Ok((result, diff))
}

/// Time at which the deterministic profile reaches `u`, for callers that start the noise at a
/// prescribed density rather than at `t_ε`.
pub fn start_time_for(params: &ModelParams, u: f64) -> f64 {
    implicit_time_of_u(params, u)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_json(r#"{"schema_version": 1, "enigne": {}}"#).unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("enigne")), "{err}");
        let err = RunConfig::from_json(r#"{"schema_version": 1, "settings": {"fp": {"umax": 3}}}"#).unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("umax")), "{err}");
    }

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::from_json(r#"{"schema_version": 1}"#).unwrap();
        assert_eq!(cfg, RunConfig::default());
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), cfg);
        assert!(RunConfig::from_json(r#"{"schema_version": 2}"#).is_err());
    }

    #[test]
    fn partition_forms() {
        let a = RunConfig::from_json(r#"{"schema_version": 1, "partition": {"t_eps": 0.5}}"#).unwrap();
        assert!((a.params().unwrap().t_eps - 0.5).abs() < 1e-15);
        let b = RunConfig::from_json(r#"{"schema_version": 1, "partition": {"eps_fraction": 0.9}, "u_eps": null}"#).unwrap();
        let p = b.params().unwrap();
        assert!((b.resolved_u_eps().unwrap() - u_of_time(&p, 0.9 * p.t_star)).abs() < 1e-9);
    }

    #[test]
    fn suite_names_parse() {
        for s in Suite::ALL {
            assert_eq!(Suite::parse(s.name()).unwrap(), s);
            let json = serde_json::to_string(&s).unwrap();
            assert_eq!(json, format!("\"{}\"", s.name()));
        }
        assert_eq!(Suite::parse("fp").unwrap(), Suite::FokkerPlanck);
        assert!(Suite::parse("nope").is_err());
    }

    #[test]
    fn overall_ignores_inconclusive() {
        let mk = |v| SuiteOutcome {
            suite: Suite::Ds,
            verdict: v,
            report_digest: String::new(),
            checks: 0,
            failed: 0,
            inconclusive: 0,
            error: None,
        };
        assert_eq!(overall_verdict(&[mk(Verdict::Pass), mk(Verdict::Inconclusive)]), Verdict::Pass);
        assert_eq!(overall_verdict(&[mk(Verdict::Pass), mk(Verdict::Fail)]), Verdict::Fail);
    }

    #[test]
    fn deterministic_reports_pass() {
        let p = ModelParams::new(1.0, 1.0).unwrap();
        for rep in [collapse_report(&p).unwrap(), equilibrium_report().unwrap(), ds_report(&p).unwrap(), es_report(&p).unwrap()] {
            assert_eq!(rep.verdict, Verdict::Pass, "{rep:#?}");
        }
        let f = feller_report(&p, 2.0, &[1e2, 1e3, 1e4]).unwrap();
        assert_eq!(f.verdict, Verdict::Pass, "{f:#?}");
    }
}
