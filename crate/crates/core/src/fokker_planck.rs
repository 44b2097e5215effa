//! Density-level description of the diffusion: finite-volume Fokker–Planck solver,
//! stationary densities, moment ODEs of the stochastic exponential, the Onsager–Machlup
//! action and the Hermite generating function.

use serde::{Deserialize, Serialize};

use crate::collapse::{implicit_time_of_u, u_of_time};
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::quadrature::{integrate, QuadOptions};
use crate::sde::{DriftSpec, Ensemble, PsiSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Stepping {
    #[default]
    Implicit,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RightBoundary {
    #[default]
    Absorbing,
    Reflecting,
}

/// Settings of [`kfp_solve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KfpConfig {
    pub u_lo: f64,
    pub u_max: f64,
    pub cells: usize,
    pub dt: f64,
    pub horizon: f64,
    pub u_eps: f64,
    /// Width of the initial Gaussian in cells at `u_eps`.
    #[serde(default = "five")]
    pub width_cells: f64,
    /// Smallest cell width, at `u_lo`.
    #[serde(default = "first_cell")]
    pub first_cell: f64,
    #[serde(default)]
    pub stepping: Stepping,
    #[serde(default)]
    pub right: RightBoundary,
    /// Number of stored snapshots after the initial one.
    #[serde(default = "ten")]
    pub snapshots: usize,
}

fn five() -> f64 {
    5.0
}

fn first_cell() -> f64 {
    1e-3
}

fn ten() -> usize {
    10
}

impl KfpConfig {
    pub fn new(u_eps: f64, u_max: f64, cells: usize, dt: f64, horizon: f64) -> Self {
        Self {
            u_lo: 1.0 + 1e-6,
            u_max,
            cells,
            dt,
            horizon,
            u_eps,
            width_cells: 5.0,
            first_cell: 1e-3,
            stepping: Stepping::Implicit,
            right: RightBoundary::Absorbing,
            snapshots: 10,
        }
    }
}

/// Cell edges `x_j = a + s(e^{λj} − 1)` with `x_N = b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellGrid {
    pub edges: Vec<f64>,
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
}

impl CellGrid {
    pub fn geometric(a: f64, b: f64, cells: usize, first: f64) -> Result<Self> {
        if !(a < b) || cells < 3 || !(first > 0.0) {
            return Err(Error::Config("grid needs a < b, three cells and a positive first cell".into()));
        }
        let ratio = (b - a) / first;
        // solve s(e^{λN} − 1) = b − a with s(e^{λ} − 1) ≈ first
        let mut lam = (ratio.ln() / cells as f64).max(1e-12);
        for _ in 0..200 {
            let s = first / lam.exp_m1();
            let f = s * (lam * cells as f64).exp_m1() - (b - a);
            let df = s * cells as f64 * (lam * cells as f64).exp()
                - first * lam.exp() / lam.exp_m1().powi(2) * (lam * cells as f64).exp_m1();
            let step = f / df;
            lam -= step;
            if step.abs() < 1e-15 * lam {
                break;
            }
        }
        let s = first / lam.exp_m1();
        let mut edges: Vec<f64> = (0..=cells)
            .map(|j| a + s * (lam * j as f64).exp_m1())
            .collect();
        edges[0] = a;
        edges[cells] = b;
        let centers = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let widths = edges.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(Self {
            edges,
            centers,
            widths,
        })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Index of the cell containing `u`.
    pub fn locate(&self, u: f64) -> Option<usize> {
        if u < self.edges[0] || u >= self.edges[self.edges.len() - 1] {
            return None;
        }
        Some(self.edges.partition_point(|&e| e <= u) - 1)
    }

    pub fn width_at(&self, u: f64) -> f64 {
        self.locate(u).map(|i| self.widths[i]).unwrap_or(f64::NAN)
    }
}

/// Density snapshots of a Fokker–Planck run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub grid: CellGrid,
    pub dt: f64,
    pub right: RightBoundary,
    pub times: Vec<f64>,
    /// Cell-average density per snapshot.
    pub p: Vec<Vec<f64>>,
    /// Mass absorbed at the right boundary by each snapshot.
    pub leaked: Vec<f64>,
    /// First moment of the absorbed mass, located at the boundary.
    pub leaked_moment: Vec<f64>,
    /// Largest `|interior + leaked − 1|` over all steps.
    pub mass_defect: f64,
    /// Smallest density value over all steps.
    pub min_density: f64,
    /// Width of the initial Gaussian in `u` units.
    pub kernel_width: f64,
}

impl DensityGrid {
    pub fn mass(&self, k: usize) -> f64 {
        self.p[k].iter().zip(&self.grid.widths).map(|(p, w)| p * w).sum()
    }

    /// `∫ u^q P du` over the interior.
    pub fn moment(&self, k: usize, q: f64) -> f64 {
        self.p[k]
            .iter()
            .zip(&self.grid.widths)
            .zip(&self.grid.centers)
            .map(|((p, w), x)| p * w * x.powf(q))
            .sum()
    }

    /// First moment of the stopped process: interior plus absorbed mass at the boundary.
    pub fn stopped_mean(&self, k: usize) -> f64 {
        self.moment(k, 1.0) + self.leaked_moment[k]
    }

    pub fn last(&self) -> usize {
        self.p.len() - 1
    }

    /// Rows `(t, u, P)` of every snapshot.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.times.iter().enumerate().flat_map(move |(k, &t)| {
            self.grid
                .centers
                .iter()
                .zip(&self.p[k])
                .map(move |(&u, &p)| (t, u, p))
        })
    }
}

struct Operator {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    // absorbed flux per unit of the last cell's density
    leak: f64,
}

// dP_i/dt = (1/w_i)[½(D_{i+1}P_{i+1} − D_iP_i)/h_{i+½} − ½(D_iP_i − D_{i−1}P_{i−1})/h_{i−½}]
fn operator(grid: &CellGrid, d: &[f64], right: RightBoundary) -> Operator {
    let n = grid.len();
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let x = &grid.centers;
    let w = &grid.widths;
    for i in 0..n {
        if i + 1 < n {
            let g = 0.5 / (x[i + 1] - x[i]);
            upper[i] = g * d[i + 1] / w[i];
            diag[i] -= g * d[i] / w[i];
        }
        if i > 0 {
            let g = 0.5 / (x[i] - x[i - 1]);
            lower[i] = g * d[i - 1] / w[i];
            diag[i] -= g * d[i] / w[i];
        }
    }
    let mut leak = 0.0;
    if right == RightBoundary::Absorbing {
        let g = 0.5 / (grid.edges[n] - x[n - 1]);
        leak = g * d[n - 1];
        diag[n - 1] -= leak / w[n - 1];
    }
    Operator {
        lower,
        diag,
        upper,
        leak,
    }
}

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut b = diag[0];
    c[0] = upper[0] / b;
    rhs[0] /= b;
    for i in 1..n {
        b = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / b;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / b;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

/// Largest explicit step that keeps every diagonal entry of `I + dt·A` non-negative.
pub fn explicit_step_bound(grid: &CellGrid, psi: &PsiSpec, amplitude: f64, right: RightBoundary) -> f64 {
    let d: Vec<f64> = grid.centers.iter().map(|&u| amplitude * amplitude * psi.sq(u)).collect();
    let op = operator(grid, &d, right);
    op.diag.iter().map(|a| 1.0 / a.abs()).fold(f64::INFINITY, f64::min)
}

/// Gaussian of `width` around `center`, as cell averages normalised to unit mass.
pub fn gaussian_cells(grid: &CellGrid, center: f64, width: f64) -> Vec<f64> {
    let mut p: Vec<f64> = grid
        .centers
        .iter()
        .map(|&x| (-0.5 * ((x - center) / width).powi(2)).exp())
        .collect();
    let m: f64 = p.iter().zip(&grid.widths).map(|(a, w)| a * w).sum();
    for v in &mut p {
        *v /= m;
    }
    p
}

/// Evolve `∂P/∂t = ½∂²(a²ψ²P)/∂u²` from a Gaussian of `width_cells` cells at `u_eps`.
pub fn kfp_solve(psi: &PsiSpec, amplitude: f64, cfg: &KfpConfig) -> Result<DensityGrid> {
    let grid = CellGrid::geometric(cfg.u_lo, cfg.u_max, cfg.cells, cfg.first_cell)?;
    if grid.locate(cfg.u_eps).is_none() {
        return Err(Error::Config(format!("u_eps {} lies outside the grid", cfg.u_eps)));
    }
    let width = cfg.width_cells * grid.width_at(cfg.u_eps);
    let p0 = gaussian_cells(&grid, cfg.u_eps, width);
    kfp_evolve(psi, amplitude, grid, p0, cfg, width)
}

/// Evolve a given initial cell-average density on `grid`.
pub fn kfp_evolve(
    psi: &PsiSpec,
    amplitude: f64,
    grid: CellGrid,
    p0: Vec<f64>,
    cfg: &KfpConfig,
    kernel_width: f64,
) -> Result<DensityGrid> {
    if p0.len() != grid.len() {
        return Err(Error::Config("initial density does not match the grid".into()));
    }
    if !(cfg.dt > 0.0) || !(cfg.horizon >= 0.0) {
        return Err(Error::Config("time step must be positive and horizon non-negative".into()));
    }
    let d: Vec<f64> = grid.centers.iter().map(|&u| amplitude * amplitude * psi.sq(u)).collect();
    let op = operator(&grid, &d, cfg.right);
    if cfg.stepping == Stepping::Explicit {
        let bound = op.diag.iter().map(|a| 1.0 / a.abs()).fold(f64::INFINITY, f64::min);
        if cfg.dt > bound {
            return Err(Error::Stability { dt: cfg.dt, bound });
        }
    }
    let n = grid.len();
    let steps = (cfg.horizon / cfg.dt).round() as usize;
    let every = (steps / cfg.snapshots.max(1)).max(1);
    let mut p = p0;
    let mut leaked = 0.0;
    let mut leaked_moment = 0.0;
    let b = grid.edges[n];
    let mut out = DensityGrid {
        times: vec![0.0],
        p: vec![p.clone()],
        leaked: vec![0.0],
        leaked_moment: vec![0.0],
        mass_defect: 0.0,
        min_density: p.iter().copied().fold(f64::INFINITY, f64::min),
        kernel_width,
        dt: cfg.dt,
        right: cfg.right,
        grid,
    };
    let w = out.grid.widths.clone();
    let lower_m: Vec<f64> = op.lower.iter().map(|v| -cfg.dt * v).collect();
    let diag_m: Vec<f64> = op.diag.iter().map(|v| 1.0 - cfg.dt * v).collect();
    let upper_m: Vec<f64> = op.upper.iter().map(|v| -cfg.dt * v).collect();
    let mass0: f64 = p.iter().zip(&w).map(|(a, b)| a * b).sum();
    for k in 1..=steps {
        match cfg.stepping {
            Stepping::Implicit => {
                thomas(&lower_m, &diag_m, &upper_m, &mut p);
                let flux = op.leak * p[n - 1] * cfg.dt;
                leaked += flux;
                leaked_moment += flux * b;
            }
            Stepping::Explicit => {
                let flux = op.leak * p[n - 1] * cfg.dt;
                let mut next = vec![0.0; n];
                for i in 0..n {
                    let mut r = op.diag[i] * p[i];
                    if i > 0 {
                        r += op.lower[i] * p[i - 1];
                    }
                    if i + 1 < n {
                        r += op.upper[i] * p[i + 1];
                    }
                    next[i] = p[i] + cfg.dt * r;
                }
                p = next;
                leaked += flux;
                leaked_moment += flux * b;
            }
        }
        let mass: f64 = p.iter().zip(&w).map(|(a, b)| a * b).sum();
        out.mass_defect = out.mass_defect.max((mass + leaked - mass0).abs());
        out.min_density = out.min_density.min(p.iter().copied().fold(f64::INFINITY, f64::min));
        if k % every == 0 || k == steps {
            if out.times.last() != Some(&(k as f64 * cfg.dt)) {
                out.times.push(k as f64 * cfg.dt);
                out.p.push(p.clone());
                out.leaked.push(leaked);
                out.leaked_moment.push(leaked_moment);
            }
        }
    }
    Ok(out)
}

/// Agreement between the final density and the terminal values of an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpComparison {
    pub bins: usize,
    /// Total-variation distance over the bins plus the absorbed-mass bin.
    pub tv_distance: f64,
    pub pde_leaked: f64,
    pub mc_leaked: f64,
    pub pde_mean: f64,
    pub mc_mean: f64,
    pub pde_second: f64,
    pub mc_second: f64,
    /// Binned masses `(lower edge, upper edge, pde, mc)`.
    pub table: Vec<(f64, f64, f64, f64)>,
}

/// Compare the last snapshot with the final record of `ens`, grouping cells into `bins`
/// bins of equal cell count. Paths at or beyond the upper grid edge count as absorbed.
pub fn fp_compare(dg: &DensityGrid, ens: &Ensemble, bins: usize) -> Result<FpComparison> {
    let k = dg.last();
    let n = dg.grid.len();
    if bins == 0 || bins > n {
        return Err(Error::Config("bin count must lie in 1..=cells".into()));
    }
    let last = ens.record_times.len() - 1;
    let u = ens.u_at(last);
    let total = u.len() as f64;
    let top = dg.grid.edges[n];
    let mut table = Vec::with_capacity(bins);
    let mut tv = 0.0;
    for b in 0..bins {
        let lo = b * n / bins;
        let hi = (b + 1) * n / bins;
        let (e0, e1) = (dg.grid.edges[lo], dg.grid.edges[hi]);
        let pde: f64 = (lo..hi).map(|i| dg.p[k][i] * dg.grid.widths[i]).sum();
        let cnt = u
            .iter()
            .filter(|&&v| {
                let v = v.max(dg.grid.edges[0]);
                v >= e0 && (v < e1 || (b == 0 && v < e1))
            })
            .count();
        let mc = cnt as f64 / total;
        tv += (pde - mc).abs();
        table.push((e0, e1, pde, mc));
    }
    let mc_leaked = u.iter().filter(|&&v| v >= top).count() as f64 / total;
    let pde_leaked = dg.leaked[k];
    tv += (pde_leaked - mc_leaked).abs();
    let inside: Vec<f64> = u.iter().copied().filter(|&v| v < top).collect();
    Ok(FpComparison {
        bins,
        tv_distance: 0.5 * tv,
        pde_leaked,
        mc_leaked,
        pde_mean: dg.moment(k, 1.0),
        mc_mean: inside.iter().sum::<f64>() / total,
        pde_second: dg.moment(k, 2.0),
        mc_second: inside.iter().map(|v| v * v).sum::<f64>() / total,
        table,
    })
}

/// Normalised zero-flux stationary density `C·exp(∫2b/ψ²)/ψ²` on `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDensity {
    pub psi: PsiSpec,
    pub drift: DriftSpec,
    pub interval: (f64, f64),
    pub norm: f64,
}

fn drift_exponent(psi: &PsiSpec, drift: &DriftSpec, a: f64, u: f64) -> f64 {
    if drift.is_zero() {
        0.0
    } else {
        integrate(|x| 2.0 * drift.value(psi, x) / psi.sq(x), a, u, QuadOptions::default()).unwrap_or(f64::NAN)
    }
}

pub fn stationary_density(psi: &PsiSpec, drift: &DriftSpec, a: f64, b: f64) -> Result<StationaryDensity> {
    if !(a < b) {
        return Err(Error::Domain("empty interval".into()));
    }
    if psi.sq(a) <= 0.0 || psi.sq(b) <= 0.0 {
        return Err(Error::Normalization(format!(
            "ψ vanishes at an endpoint of [{a}, {b}]"
        )));
    }
    let unnorm = |u: f64| drift_exponent(psi, drift, a, u).exp() / psi.sq(u);
    let z = integrate(unnorm, a, b, QuadOptions::default())
        .map_err(|e| Error::Normalization(e.to_string()))?;
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::Normalization(format!("∫ψ⁻² = {z} on [{a}, {b}]")));
    }
    Ok(StationaryDensity {
        psi: *psi,
        drift: *drift,
        interval: (a, b),
        norm: 1.0 / z,
    })
}

impl StationaryDensity {
    pub fn eval(&self, u: f64) -> f64 {
        if u < self.interval.0 || u > self.interval.1 {
            return 0.0;
        }
        self.norm * drift_exponent(&self.psi, &self.drift, self.interval.0, u).exp() / self.psi.sq(u)
    }

    /// `½(ψ²P)'' − (bP)'` by central differences of step `h`.
    pub fn residual(&self, u: f64, h: f64) -> f64 {
        let g = |x: f64| self.psi.sq(x) * self.eval(x);
        let f = |x: f64| self.drift.value(&self.psi, x) * self.eval(x);
        0.5 * (g(u + h) - 2.0 * g(u) + g(u - h)) / (h * h) - (f(u + h) - f(u - h)) / (2.0 * h)
    }

    /// Largest `|residual|` over `points` interior points with step `h`.
    pub fn max_residual(&self, points: usize, h: f64) -> f64 {
        let (a, b) = self.interval;
        (0..points)
            .map(|k| {
                let u = a + h + (b - a - 2.0 * h) * (k as f64 + 0.5) / points as f64;
                self.residual(u, h).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Cell averages on `grid` by quadrature.
    pub fn cells(&self, grid: &CellGrid) -> Vec<f64> {
        grid.edges
            .windows(2)
            .zip(&grid.widths)
            .map(|(e, w)| integrate(|x| self.eval(x), e[0], e[1], QuadOptions::default()).unwrap_or(f64::NAN) / w)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentSource {
    Pde,
    Mc,
    Ode,
    ClosedForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSeries {
    pub order: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub source: MomentSource,
}

/// Driving path of the moment ODE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MomentDriver {
    Frozen { u: f64 },
    /// Piecewise-linear path through `(t, u)` samples.
    Path { t: Vec<f64>, u: Vec<f64> },
}

impl MomentDriver {
    fn at(&self, t: f64) -> f64 {
        match self {
            Self::Frozen { u } => *u,
            Self::Path { t: ts, u } => {
                let j = ts.partition_point(|&x| x <= t).clamp(1, ts.len() - 1);
                let (t0, t1) = (ts[j - 1], ts[j]);
                let s = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
                u[j - 1] + s * (u[j] - u[j - 1])
            }
        }
    }

    fn breaks(&self, horizon: f64) -> Vec<f64> {
        match self {
            Self::Frozen { .. } => vec![0.0, horizon],
            Self::Path { t, .. } => {
                let mut b: Vec<f64> = t.iter().copied().filter(|&x| x > 0.0 && x < horizon).collect();
                b.insert(0, 0.0);
                b.push(horizon);
                b
            }
        }
    }
}

/// `dM_p/dt = ½p(p−1)a²ψ(u(t))²M_p` of the stochastic exponential, as a closed form and by
/// RK4 with `steps` steps; the path's times start at zero.
pub fn kfp_moment_ode(
    psi: &PsiSpec,
    amplitude: f64,
    p: f64,
    m0: f64,
    driver: &MomentDriver,
    horizon: f64,
    steps: usize,
) -> Result<(MomentSeries, MomentSeries)> {
    if p < 1.0 {
        return Err(Error::Config("moment order must be at least 1".into()));
    }
    let c = 0.5 * p * (p - 1.0) * amplitude * amplitude;
    let rate = |t: f64| c * psi.sq(driver.at(t));
    let times: Vec<f64> = (0..=steps).map(|k| horizon * k as f64 / steps as f64).collect();
    let breaks = driver.breaks(horizon);
    let mut closed = vec![m0];
    let mut acc = 0.0;
    for w in times.windows(2) {
        let mut a = w[0];
        for &b in breaks.iter().filter(|&&b| b > w[0] && b < w[1]).chain(std::iter::once(&w[1])) {
            acc += integrate(rate, a, b, QuadOptions::default())?;
            a = b;
        }
        closed.push(m0 * acc.exp());
    }
    let mut ode = vec![m0];
    let mut m = m0;
    for w in times.windows(2) {
        let (t, h) = (w[0], w[1] - w[0]);
        let k1 = rate(t) * m;
        let k2 = rate(t + 0.5 * h) * (m + 0.5 * h * k1);
        let k3 = rate(t + 0.5 * h) * (m + 0.5 * h * k2);
        let k4 = rate(t + h) * (m + h * k3);
        m += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        ode.push(m);
    }
    Ok((
        MomentSeries {
            order: p,
            times: times.clone(),
            values: closed,
            source: MomentSource::ClosedForm,
        },
        MomentSeries {
            order: p,
            times,
            values: ode,
            source: MomentSource::Ode,
        },
    ))
}

fn psi_second_derivative(psi: &PsiSpec, u: f64) -> f64 {
    match *psi {
        PsiSpec::Collapse { kappa } => {
            let s = (u - 1.0).sqrt();
            kappa.sqrt() * (2.0 * s + 2.0 * u / s - u * u / (4.0 * s * s * s))
        }
        PsiSpec::Constant { .. } | PsiSpec::Linear { .. } => 0.0,
        PsiSpec::Exponential { rate } => rate * rate * (rate * u).exp(),
        PsiSpec::Riccati { .. } => 2.0,
        PsiSpec::AbsPower {
            center, exponent, ..
        } => exponent * (exponent - 1.0) * (u - center).abs().powf(exponent - 2.0),
    }
}

/// Onsager–Machlup coefficients `β₁ = ψ²`, `β₂ = −¼(ψ²)' = −½ψψ'`,
/// `β₃ = ½ψ·(β₂/ψ)' = −¼ψψ''`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmCoefficients {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
}

pub fn om_coefficients(psi: &PsiSpec, u: f64) -> OmCoefficients {
    let v = psi.value(u);
    OmCoefficients {
        beta1: psi.sq(u),
        beta2: -0.5 * v * psi.derivative(u),
        beta3: -0.25 * v * psi_second_derivative(psi, u),
    }
}

/// `L = (|u̇| − β₂)²/(2β₁) + β₃`.
pub fn om_lagrangian(psi: &PsiSpec, u: f64, udot: f64) -> f64 {
    let c = om_coefficients(psi, u);
    (udot.abs() - c.beta2).powi(2) / (2.0 * c.beta1) + c.beta3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmAction {
    pub action: f64,
    /// Midpoint Lagrangian of each step.
    pub lagrangian: Vec<f64>,
}

/// Action `Σ L(u_mid, Δu/Δt)·Δt` along a discretised path.
pub fn om_action(psi: &PsiSpec, t: &[f64], u: &[f64]) -> Result<OmAction> {
    if t.len() != u.len() || t.len() < 2 {
        return Err(Error::Config("path needs matching times and values".into()));
    }
    if u.iter().any(|&x| !(x > 1.0) || !x.is_finite()) {
        return Err(Error::Domain("path must stay strictly inside (1, ∞)".into()));
    }
    let mut lag = Vec::with_capacity(t.len() - 1);
    let mut action = 0.0;
    for k in 0..t.len() - 1 {
        let h = t[k + 1] - t[k];
        let l = om_lagrangian(psi, 0.5 * (u[k] + u[k + 1]), (u[k + 1] - u[k]) / h);
        lag.push(l);
        action += l * h;
    }
    Ok(OmAction {
        action,
        lagrangian: lag,
    })
}

/// Action of the deterministic collapse profile from `u0` to `u_end`, sampled at `steps`
/// equal steps of `ln u`.
pub fn profile_action(params: &ModelParams, u0: f64, u_end: f64, steps: usize) -> Result<OmAction> {
    let (l0, l1) = (u0.ln(), u_end.ln());
    let u: Vec<f64> = (0..=steps)
        .map(|k| (l0 + (l1 - l0) * k as f64 / steps as f64).exp())
        .collect();
    let t: Vec<f64> = u.iter().map(|&x| implicit_time_of_u(params, x)).collect();
    if t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("profile times are not increasing".into()));
    }
    let u: Vec<f64> = t.iter().map(|&x| u_of_time(params, x)).collect();
    om_action(&PsiSpec::collapse(params), &t, &u)
}

/// Physicists' Hermite polynomial `H_n(x)`.
pub fn hermite(n: usize, x: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, 2.0 * x);
    if n == 0 {
        return h0;
    }
    for k in 1..n {
        let h2 = 2.0 * x * h1 - 2.0 * k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HermiteSum {
    pub sum: f64,
    pub exact: f64,
    pub error: f64,
}

/// Largest order accepted by [`hermite_expansion`].
pub const HERMITE_MAX_ORDER: usize = 60;

/// `Σ_{n≤N} H_n(x)θⁿ/n!` against `exp(2xθ − θ²)`.
pub fn hermite_expansion(x: f64, theta: f64, order: usize) -> Result<HermiteSum> {
    if order > HERMITE_MAX_ORDER {
        return Err(Error::Config(format!(
            "order {order} exceeds {HERMITE_MAX_ORDER}"
        )));
    }
    // a_n = H_n θⁿ/n!, a_{n+1} = (2xθ a_n − 2θ² a_{n−1})/(n+1)
    let mut a_prev = 1.0;
    let mut sum = 1.0;
    if order >= 1 {
        let mut a = 2.0 * x * theta;
        sum += a;
        for n in 1..order {
            let next = (2.0 * x * theta * a - 2.0 * theta * theta * a_prev) / (n + 1) as f64;
            a_prev = a;
            a = next;
            sum += a;
        }
    }
    let exact = (2.0 * x * theta - theta * theta).exp();
    Ok(HermiteSum {
        sum,
        exact,
        error: (sum - exact).abs(),
    })
}
