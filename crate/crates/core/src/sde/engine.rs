use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::coeffs::{DriftSpec, PsiSpec};
use super::grid::TimeGrid;
use crate::collapse::{implicit_g, u_from_g};
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::rng::RngSpec;
use crate::stats::Estimate;

/// β values of the exponential-martingale suprema tracked on every path.
pub const EXP_BETAS: [f64; 3] = [0.5, 1.0, 2.0];

/// Default sub-stepping fraction for the collapse coefficient.
pub const DEFAULT_SUBSTEP_ETA: f64 = 0.25;
/// Smallest sub-step.
pub const MIN_SUBSTEP: f64 = 1e-16;
/// Distance below which a path of the driftless collapse equation is absorbed at `u = 1`.
pub const ABSORB_GAP: f64 = 1e-12;
pub const EXIT_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ItoEuler,
    StratHeun,
    StratExact,
    Gbm,
}

impl Scheme {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ito" | "ito-euler" => Ok(Self::ItoEuler),
            "strat-heun" | "heun" => Ok(Self::StratHeun),
            "strat-exact" | "exact" => Ok(Self::StratExact),
            other => Err(Error::Config(format!("unknown scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialCondition {
    #[default]
    Point,
    /// Gaussian of the given width around `u_eps`, redrawn until it exceeds `floor`.
    Gaussian { width: f64, floor: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    pub scheme: Scheme,
    pub n_paths: usize,
    pub grid: TimeGrid,
    /// Absolute end time of the stochastic leg.
    pub horizon: f64,
    pub cap: f64,
    pub seed: u64,
    pub psi: PsiSpec,
    #[serde(default)]
    pub drift: DriftSpec,
    #[serde(default = "one")]
    pub noise_amplitude: f64,
    /// Offsets from the start time at which every path is recorded; the horizon is always
    /// recorded.
    #[serde(default)]
    pub record_offsets: Vec<f64>,
    #[serde(default)]
    pub upcrossing_cells: Vec<(f64, f64)>,
    /// Quadratic-variation spacing of the time-changed increments, if wanted.
    #[serde(default)]
    pub dds_level: Option<f64>,
    /// Number of leading paths stored in full.
    #[serde(default)]
    pub keep_full_paths: usize,
    #[serde(default)]
    pub initial: InitialCondition,
    /// Sub-steps keep `ψ(u)√h ≤ η (u − 1)` for the collapse coefficient; 0 disables.
    #[serde(default = "default_eta")]
    pub substep_eta: f64,
}

fn default_eta() -> f64 {
    DEFAULT_SUBSTEP_ETA
}

fn one() -> f64 {
    1.0
}

impl EngineConfig {
    pub fn new(
        scheme: Scheme,
        psi: PsiSpec,
        n_paths: usize,
        grid: TimeGrid,
        horizon: f64,
        cap: f64,
        seed: u64,
    ) -> Self {
        Self {
            scheme,
            n_paths,
            grid,
            horizon,
            cap,
            seed,
            psi,
            drift: DriftSpec::Zero,
            noise_amplitude: 1.0,
            record_offsets: Vec::new(),
            upcrossing_cells: Vec::new(),
            dds_level: None,
            keep_full_paths: 0,
            initial: InitialCondition::Point,
            substep_eta: DEFAULT_SUBSTEP_ETA,
        }
    }

    /// `count` evenly spaced record offsets over `[0, span]`, zero included.
    pub fn with_uniform_records(mut self, span: f64, count: usize) -> Self {
        self.record_offsets = (0..=count).map(|k| span * k as f64 / count as f64).collect();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum PathStatus {
    Alive,
    /// Reached the cap and was frozen at its first value above it.
    Capped { t: f64 },
    BlownUp { t: f64 },
}

/// A fully stored trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    pub scheme: Scheme,
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    /// Brownian driver, `B(t_start) = 0`.
    pub b: Vec<f64>,
    pub status: PathStatus,
    pub cap: f64,
    pub clamp_events: u64,
    pub u_eps: f64,
}

/// Values of one path at the ensemble record times.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Records {
    pub u: Vec<f64>,
    /// Realised quadratic variation Σ(Δu)².
    pub qv: Vec<f64>,
    /// Compensator Σ ψ(u_k)² Δt.
    pub comp: Vec<f64>,
    /// Running maximum of u.
    pub max: Vec<f64>,
    /// Logarithm of the Doléans-Dade exponential of the path, started at 1.
    pub log_y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSummary {
    pub index: u64,
    pub u_start: f64,
    pub status: PathStatus,
    pub u_final: f64,
    pub steps: u64,
    pub clamp_events: u64,
    /// Σz and Σz² of the standardised driver increments.
    pub z_sum: f64,
    pub z_sq_sum: f64,
    /// `sup_s [(u_s − u_start) − (β/2)·comp_s]` for each β in [`EXP_BETAS`].
    pub exp_sup: [f64; 3],
    pub upcrossings: Vec<u32>,
    /// Increments `Δu/√Δcomp` over consecutive compensator windows.
    pub dds: Vec<f64>,
    pub records: Records,
    pub full: Option<SamplePath>,
}

/// Everything needed to regenerate an ensemble bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub params: ModelParams,
    pub u_eps: f64,
    pub t_start: f64,
    pub config: EngineConfig,
}

impl EnsembleSpec {
    pub fn run(&self) -> Result<Ensemble> {
        simulate(&self.params, self.u_eps, self.t_start, &self.config)
    }
}

#[derive(Debug, Clone)]
pub struct Ensemble {
    pub spec: EnsembleSpec,
    pub rng: RngSpec,
    pub record_times: Vec<f64>,
    pub grid_steps: usize,
    pub paths: Vec<PathSummary>,
}

struct Ctx<'a> {
    cfg: &'a EngineConfig,
    u_eps: f64,
    times: Vec<f64>,
    sqrt_dt: Vec<f64>,
    record_idx: Vec<usize>,
    rng: RngSpec,
    level: f64,
}

#[cfg(feature = "parallel")]
fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

fn build_ctx<'a>(
    _params: &'a ModelParams,
    u_eps: f64,
    t_start: f64,
    cfg: &'a EngineConfig,
) -> Result<Ctx<'a>> {
    if !(u_eps >= 1.0) {
        return Err(Error::Config(format!("u_eps must be >= 1, got {u_eps}")));
    }
    if !(cfg.cap > u_eps) {
        return Err(Error::Config(format!(
            "cap {} must exceed u_eps {u_eps}",
            cfg.cap
        )));
    }
    if cfg.n_paths == 0 {
        return Err(Error::Config("ensemble needs at least one path".into()));
    }
    if cfg.scheme == Scheme::StratExact && !matches!(cfg.psi, PsiSpec::Collapse { .. }) {
        return Err(Error::Config(
            "the exact Stratonovich map exists only for the collapse coefficient".into(),
        ));
    }
    if cfg.scheme == Scheme::Gbm {
        return Err(Error::Config(
            "gbm paths are produced by gbm_transform, not simulated".into(),
        ));
    }
    let times = cfg.grid.times(t_start, cfg.horizon)?;
    let sqrt_dt = times.windows(2).map(|w| (w[1] - w[0]).sqrt()).collect();
    let last = times.len() - 1;
    let mut record_idx: Vec<usize> = cfg
        .record_offsets
        .iter()
        .map(|&off| {
            let target = t_start + off;
            times
                .partition_point(|&t| t < target - 1e-12 * target.abs().max(1.0))
                .min(last)
        })
        .collect();
    record_idx.push(last);
    record_idx.sort_unstable();
    record_idx.dedup();
    let level = match cfg.psi {
        PsiSpec::Collapse { kappa } => {
            let a = cfg.noise_amplitude * kappa.sqrt();
            if a > 0.0 {
                implicit_g(u_eps) / a
            } else {
                f64::INFINITY
            }
        }
        _ => f64::INFINITY,
    };
    Ok(Ctx {
        cfg,
        u_eps,
        times,
        sqrt_dt,
        record_idx,
        rng: RngSpec::new(cfg.seed),
        level,
    })
}

fn run_path(ctx: &Ctx, index: usize, keep_full: bool) -> PathSummary {
    let cfg = ctx.cfg;
    let psi = &cfg.psi;
    let drift = &cfg.drift;
    let amp = cfg.noise_amplitude;
    let amp2 = amp * amp;
    let mut rng: ChaCha8Rng = ctx.rng.path_rng(index as u64);
    // bridge-crossing uniforms come from a second stream so the Gaussian driver is the
    // same for every scheme
    let mut bridge_rng = rng.clone();
    bridge_rng.set_stream(1);
    let u_start = match cfg.initial {
        InitialCondition::Point => ctx.u_eps,
        InitialCondition::Gaussian { width, floor } => loop {
            let z: f64 = rng.sample(StandardNormal);
            let v = ctx.u_eps + width * z;
            if v > floor {
                break v;
            }
        },
    };
    let exact = cfg.scheme == Scheme::StratExact;
    let g_start = if exact { implicit_g(u_start) } else { 0.0 };
    let a_sk = match psi {
        PsiSpec::Collapse { kappa } => amp * kappa.sqrt(),
        _ => 0.0,
    };
    let level = if exact && u_start != ctx.u_eps {
        if a_sk > 0.0 {
            g_start / a_sk
        } else {
            f64::INFINITY
        }
    } else {
        ctx.level
    };
    let exact_u = |b: f64| u_from_g(g_start - a_sk * b);

    let n_rec = ctx.record_idx.len();
    let mut rec = Records {
        u: Vec::with_capacity(n_rec),
        qv: Vec::with_capacity(n_rec),
        comp: Vec::with_capacity(n_rec),
        max: Vec::with_capacity(n_rec),
        log_y: Vec::with_capacity(n_rec),
    };
    let mut full = keep_full.then(|| SamplePath {
        scheme: cfg.scheme,
        t: vec![ctx.times[0]],
        u: vec![u_start],
        b: vec![0.0],
        status: PathStatus::Alive,
        cap: cfg.cap,
        clamp_events: 0,
        u_eps: ctx.u_eps,
    });

    let mut u = u_start;
    let mut b = 0.0;
    let mut qv = 0.0;
    let mut comp = 0.0;
    let mut max = u;
    let mut log_y = 0.0;
    let mut exp_sup = [0.0f64; 3];
    let cells = &cfg.upcrossing_cells;
    let mut upcrossings = vec![0u32; cells.len()];
    let mut below: Vec<bool> = cells.iter().map(|&(a, _)| u <= a).collect();
    let mut dds = Vec::new();
    let (mut dds_u, mut dds_c) = (u, 0.0);
    let mut status = PathStatus::Alive;
    let mut clamps = 0u64;
    let (mut z_sum, mut z_sq_sum) = (0.0, 0.0);
    let mut r = 0usize;
    let mut steps = 0u64;

    macro_rules! push_record {
        () => {
            rec.u.push(u);
            rec.qv.push(qv);
            rec.comp.push(comp);
            rec.max.push(max);
            rec.log_y.push(log_y);
        };
    }
    if ctx.record_idx[0] == 0 {
        push_record!();
        r = 1;
    }

    let n_steps = ctx.times.len() - 1;
    let collapse_psi = matches!(psi, PsiSpec::Collapse { .. });
    let eta = if collapse_psi { cfg.substep_eta } else { 0.0 };
    let absorbing = collapse_psi && drift.is_zero();
    for k in 0..n_steps {
        let t0 = ctx.times[k];
        let t1 = ctx.times[k + 1];
        if exact {
            let h = t1 - t0;
            let z: f64 = rng.sample(StandardNormal);
            z_sum += z;
            z_sq_sum += z * z;
            steps += 1;
            let db = ctx.sqrt_dt[k] * z;
            let b_prev = b;
            b += db;
            // a bridge between two points below the level still crosses it with
            // probability exp(−2(L − b₀)(L − b₁)/h)
            let gap = (level - b_prev) * (level - b);
            let bridge_hit = b < level && gap < 40.0 * h && {
                let v: f64 = bridge_rng.random();
                v < (-2.0 * gap / h).exp()
            };
            if b >= level || bridge_hit {
                let frac = if bridge_hit {
                    (level - b_prev) / ((level - b_prev) + (level - b))
                } else {
                    (level - b_prev) / db
                };
                let t_hit = t0 + h * frac.clamp(0.0, 1.0);
                status = PathStatus::BlownUp { t: t_hit };
                u = f64::INFINITY;
                if let Some(f) = full.as_mut() {
                    f.t.push(t_hit);
                    f.u.push(f64::INFINITY);
                    f.b.push(level);
                }
                break;
            }
            if keep_full || ctx.record_idx.get(r) == Some(&(k + 1)) {
                u = exact_u(b);
                if u > max {
                    max = u;
                }
            }
        } else if absorbing && u == 1.0 && full.is_none() {
            // ψ(1) = 0 and no drift: the path stays at the boundary.
            while rec.u.len() < n_rec {
                push_record!();
            }
            break;
        } else {
            let mut t = t0;
            while t < t1 {
                let ps = amp * psi.value(u);
                let ps2 = amp2 * psi.sq(u);
                // Keep |ψΔB| a fraction η of the distance to the boundary for a typical
                // increment, so that Euler steps rarely leave the state space.
                let mut h = t1 - t;
                let mut sq = if h == t1 - t0 { ctx.sqrt_dt[k] } else { h.sqrt() };
                if eta > 0.0 && ps > 0.0 {
                    let h_max = (eta * (u - 1.0) / ps).powi(2).max(MIN_SUBSTEP);
                    if h_max < h {
                        h = h_max;
                        sq = h.sqrt();
                    }
                }
                let t_next = if h == t1 - t { t1 } else { t + h };
                let z: f64 = rng.sample(StandardNormal);
                z_sum += z;
                z_sq_sum += z * z;
                steps += 1;
                let db = sq * z;
                b += db;
                let u_prev = u;
                let b0 = drift.value(psi, u);
                let mut un = match cfg.scheme {
                    Scheme::ItoEuler => u + b0 * h + ps * db,
                    _ => {
                        let pred = (u + b0 * h + ps * db).max(1.0);
                        let ps_p = amp * psi.value(pred);
                        u + 0.5 * (b0 + drift.value(psi, pred)) * h + 0.5 * (ps + ps_p) * db
                    }
                };
                if un < 1.0 {
                    clamps += 1;
                    un = 1.0;
                } else if absorbing && un - 1.0 < ABSORB_GAP {
                    un = 1.0;
                }
                comp += ps2 * h;
                log_y += ps * db - 0.5 * ps2 * h;
                u = un;
                t = t_next;

                let du = u - u_prev;
                qv += du * du;
                if u > max {
                    max = u;
                }
                let x = u - u_start;
                for (s, beta) in exp_sup.iter_mut().zip(EXP_BETAS) {
                    let v = x - 0.5 * beta * comp;
                    if v > *s {
                        *s = v;
                    }
                }
                for (i, &(a, bb)) in cells.iter().enumerate() {
                    if u <= a {
                        below[i] = true;
                    } else if below[i] && u >= bb {
                        upcrossings[i] += 1;
                        below[i] = false;
                    }
                }
                if let Some(q) = cfg.dds_level {
                    if comp - dds_c >= q {
                        dds.push((u - dds_u) / (comp - dds_c).sqrt());
                        dds_u = u;
                        dds_c = comp;
                    }
                }
                if u >= cfg.cap {
                    status = match cfg.scheme {
                        Scheme::ItoEuler => PathStatus::Capped { t },
                        _ => PathStatus::BlownUp { t },
                    };
                    break;
                }
                if absorbing && u == 1.0 {
                    break;
                }
            }
        }
        if let Some(f) = full.as_mut() {
            f.t.push(t1);
            f.u.push(u);
            f.b.push(b);
        }
        if ctx.record_idx.get(r) == Some(&(k + 1)) {
            push_record!();
            r += 1;
        }
        if status != PathStatus::Alive {
            break;
        }
    }
    while rec.u.len() < n_rec {
        push_record!();
    }
    if let Some(f) = full.as_mut() {
        f.status = status;
        f.clamp_events = clamps;
    }
    PathSummary {
        index: index as u64,
        u_start,
        status,
        u_final: u,
        steps,
        clamp_events: clamps,
        z_sum,
        z_sq_sum,
        exp_sup,
        upcrossings,
        dds,
        records: rec,
        full,
    }
}

/// Simulate an ensemble starting from `u_eps` at `t_start`.
pub fn simulate(
    params: &ModelParams,
    u_eps: f64,
    t_start: f64,
    cfg: &EngineConfig,
) -> Result<Ensemble> {
    let ctx = build_ctx(params, u_eps, t_start, cfg)?;
    let paths = map_indexed(cfg.n_paths, |i| run_path(&ctx, i, i < cfg.keep_full_paths));
    let record_times = ctx.record_idx.iter().map(|&i| ctx.times[i]).collect();
    Ok(Ensemble {
        spec: EnsembleSpec {
            params: *params,
            u_eps,
            t_start,
            config: cfg.clone(),
        },
        rng: ctx.rng,
        record_times,
        grid_steps: ctx.times.len() - 1,
        paths,
    })
}

/// Euler–Maruyama ensemble of `du = b dt + ψ dB`.
pub fn simulate_ito(
    params: &ModelParams,
    u_eps: f64,
    t_start: f64,
    cfg: &EngineConfig,
) -> Result<Ensemble> {
    let cfg = EngineConfig {
        scheme: Scheme::ItoEuler,
        ..cfg.clone()
    };
    simulate(params, u_eps, t_start, &cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StratVariant {
    Heun,
    Exact,
}

pub fn simulate_stratonovich(
    params: &ModelParams,
    u_eps: f64,
    t_start: f64,
    cfg: &EngineConfig,
    variant: StratVariant,
) -> Result<Ensemble> {
    let scheme = match variant {
        StratVariant::Heun => Scheme::StratHeun,
        StratVariant::Exact => Scheme::StratExact,
    };
    let cfg = EngineConfig {
        scheme,
        ..cfg.clone()
    };
    simulate(params, u_eps, t_start, &cfg)
}

/// A single fully stored path with index `index` of the configured stream.
pub fn simulate_path(
    params: &ModelParams,
    u_eps: f64,
    t_start: f64,
    cfg: &EngineConfig,
    index: usize,
) -> Result<SamplePath> {
    let ctx = build_ctx(params, u_eps, t_start, cfg)?;
    Ok(run_path(&ctx, index, true)
        .full
        .expect("full storage requested"))
}

/// Aggregate ensemble statistics at one record time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordStats {
    pub t: f64,
    pub mean: Estimate,
    pub variance: f64,
    pub mean_comp: f64,
    pub mean_qv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub scheme: Scheme,
    pub n_paths: usize,
    pub u_eps: f64,
    pub t_start: f64,
    pub horizon: f64,
    pub grid_steps: usize,
    pub rng_rule: String,
    pub master_seed: u64,
    pub capped: usize,
    pub blown_up: usize,
    pub clamp_rate: f64,
    pub hitting_level: Option<f64>,
    pub records: Vec<RecordStats>,
}

impl Ensemble {
    pub fn n(&self) -> usize {
        self.paths.len()
    }

    pub fn params(&self) -> &ModelParams {
        &self.spec.params
    }

    pub fn config(&self) -> &EngineConfig {
        &self.spec.config
    }

    pub fn u_eps(&self) -> f64 {
        self.spec.u_eps
    }

    pub fn t_start(&self) -> f64 {
        self.spec.t_start
    }

    fn column(&self, j: usize, pick: impl Fn(&Records) -> &Vec<f64>) -> Vec<f64> {
        self.paths.iter().map(|p| pick(&p.records)[j]).collect()
    }

    pub fn u_at(&self, j: usize) -> Vec<f64> {
        self.column(j, |r| &r.u)
    }

    pub fn comp_at(&self, j: usize) -> Vec<f64> {
        self.column(j, |r| &r.comp)
    }

    pub fn qv_at(&self, j: usize) -> Vec<f64> {
        self.column(j, |r| &r.qv)
    }

    pub fn max_at(&self, j: usize) -> Vec<f64> {
        self.column(j, |r| &r.max)
    }

    pub fn log_y_at(&self, j: usize) -> Vec<f64> {
        self.column(j, |r| &r.log_y)
    }

    /// Record index whose time is closest to `t`.
    pub fn record_index(&self, t: f64) -> usize {
        let mut best = 0;
        for (j, &rt) in self.record_times.iter().enumerate() {
            if (rt - t).abs() < (self.record_times[best] - t).abs() {
                best = j;
            }
        }
        best
    }

    pub fn hit_times(&self) -> Vec<Option<f64>> {
        self.paths
            .iter()
            .map(|p| match p.status {
                PathStatus::BlownUp { t } => Some(t),
                _ => None,
            })
            .collect()
    }

    pub fn capped(&self) -> usize {
        self.paths
            .iter()
            .filter(|p| matches!(p.status, PathStatus::Capped { .. }))
            .count()
    }

    pub fn blown_up(&self) -> usize {
        self.paths
            .iter()
            .filter(|p| matches!(p.status, PathStatus::BlownUp { .. }))
            .count()
    }

    pub fn total_steps(&self) -> u64 {
        self.paths.iter().map(|p| p.steps).sum()
    }

    pub fn clamp_rate(&self) -> f64 {
        let clamps: u64 = self.paths.iter().map(|p| p.clamp_events).sum();
        clamps as f64 / self.total_steps().max(1) as f64
    }

    /// Mean and variance of the standardised driver increments.
    pub fn driver_moments(&self) -> (f64, f64, u64) {
        let n = self.total_steps();
        let s: f64 = self.paths.iter().map(|p| p.z_sum).sum();
        let s2: f64 = self.paths.iter().map(|p| p.z_sq_sum).sum();
        let mean = s / n as f64;
        (mean, s2 / n as f64 - mean * mean, n)
    }

    pub fn full_paths(&self) -> impl Iterator<Item = &SamplePath> {
        self.paths.iter().filter_map(|p| p.full.as_ref())
    }

    pub fn summary(&self) -> EnsembleSummary {
        let records = (0..self.record_times.len())
            .map(|j| {
                let u = self.u_at(j);
                let mean = Estimate::from_samples(u.iter().copied().filter(|v| v.is_finite()));
                let finite: Vec<f64> = u.iter().copied().filter(|v| v.is_finite()).collect();
                let var = crate::stats::moments(&finite).1;
                let mc: Vec<f64> = self.comp_at(j);
                let mq: Vec<f64> = self.qv_at(j);
                RecordStats {
                    t: self.record_times[j],
                    mean,
                    variance: var,
                    mean_comp: mc.iter().sum::<f64>() / mc.len() as f64,
                    mean_qv: mq.iter().sum::<f64>() / mq.len() as f64,
                }
            })
            .collect();
        let cfg = self.config();
        EnsembleSummary {
            scheme: cfg.scheme,
            n_paths: self.n(),
            u_eps: self.u_eps(),
            t_start: self.t_start(),
            horizon: cfg.horizon,
            grid_steps: self.grid_steps,
            rng_rule: RngSpec::RULE.to_string(),
            master_seed: self.rng.master_seed,
            capped: self.capped(),
            blown_up: self.blown_up(),
            clamp_rate: self.clamp_rate(),
            hitting_level: (cfg.scheme == Scheme::StratExact).then(|| {
                let sk = self.params().sqrt_kappa() * cfg.noise_amplitude;
                implicit_g(self.u_eps()) / sk
            }),
            records,
        }
    }
}

/// Outcome counts of an exit race from the cell `(alpha, beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitCounts {
    pub high: usize,
    pub low: usize,
    pub undecided: usize,
}

/// Run `n` Euler–Maruyama paths of `du = b dt + ψ dB` from `u0` until they leave
/// `(alpha, beta)` or exhaust `max_steps`.
#[allow(clippy::too_many_arguments)]
/// Exit race from `(alpha, beta)`. Steps shrink near the barriers so that `√h·ψ(u)` stays below
/// a quarter of the distance to the nearer one; a path exits once within
/// [`EXIT_TOLERANCE`]`·(β − α)` of a barrier.
pub fn exit_race(
    psi: &PsiSpec,
    drift: &DriftSpec,
    alpha: f64,
    beta: f64,
    u0: f64,
    n: usize,
    dt: f64,
    max_steps: usize,
    seed: u64,
) -> Result<ExitCounts> {
    if !(alpha < u0 && u0 < beta) {
        return Err(Error::Domain(format!(
            "start {u0} must lie strictly inside ({alpha}, {beta})"
        )));
    }
    let spec = RngSpec::new(seed);
    let tol = EXIT_TOLERANCE * (beta - alpha);
    let outcomes = map_indexed(n, |i| {
        let mut rng = spec.path_rng(i as u64);
        let mut u = u0;
        for _ in 0..max_steps {
            let gap = (u - alpha).min(beta - u);
            let vol = psi.value(u).abs();
            let h = if vol > 0.0 {
                dt.min((DEFAULT_SUBSTEP_ETA * gap / vol).powi(2))
            } else {
                dt
            };
            let z: f64 = rng.sample(StandardNormal);
            u += drift.value(psi, u) * h + psi.value(u) * h.sqrt() * z;
            if u >= beta - tol {
                return 1u8;
            }
            if u <= alpha + tol {
                return 0u8;
            }
        }
        2u8
    });
    let mut c = ExitCounts {
        high: 0,
        low: 0,
        undecided: 0,
    };
    for o in outcomes {
        match o {
            1 => c.high += 1,
            0 => c.low += 1,
            _ => c.undecided += 1,
        }
    }
    Ok(c)
}
