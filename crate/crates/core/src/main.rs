use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use collapse_lab::analysis::{AnalysisReport, Verdict};
use collapse_lab::collapse::{u_of_time, START_OFFSET};
use collapse_lab::equilibrium::{buchdahl_check, lane_emden_integrate, StarConfig};
use collapse_lab::error::{Error, Result};
use collapse_lab::fokker_planck::{kfp_solve, KfpConfig};
use collapse_lab::pipeline::{self, Partition, RunConfig, Suite};
use collapse_lab::sde::{EnsembleSpec, PsiSpec, Scheme};

#[derive(Parser)]
#[command(name = "collapse-lab", version, about = "Dust collapse, stochastic ensembles and their diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.engine.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Deterministic collapse profile.
    Collapse {
        #[command(subcommand)]
        action: CollapseCmd,
    },
    /// Static stars: Lane–Emden polytropes and the Buchdahl bound.
    Equilibrium {
        #[command(subcommand)]
        action: EquilibriumCmd,
    },
    /// Simulate the configured ensemble and write its definition and summary.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Overrides the configured scheme (ito, strat-heun, strat-exact).
        #[arg(long)]
        scheme: Option<String>,
        #[arg(long, alias = "n-paths")]
        paths: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        /// Switch-on time as a fraction of t*.
        #[arg(long)]
        t_eps_frac: Option<f64>,
        /// Length of the stochastic leg after t_eps.
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        cap: Option<f64>,
        /// Number of full paths written to paths.csv.
        #[arg(long, default_value_t = 0)]
        keep: usize,
    },
    /// Re-simulate the ensemble stored in a `simulate` directory and run suites on it.
    Analyze {
        dir: PathBuf,
        /// Suites to run; repeatable. Defaults to every ensemble suite.
        #[arg(long = "suite")]
        suites: Vec<String>,
    },
    /// Fokker–Planck density.
    Fp {
        #[command(subcommand)]
        action: FpCmd,
    },
    /// Full batch run.
    Pipeline {
        #[command(flatten)]
        common: Common,
        /// Restricts the run to these suites; repeatable.
        #[arg(long = "suite")]
        suites: Vec<String>,
    },
    /// Run the pipeline and compare with a baseline output directory.
    Regress {
        #[command(flatten)]
        common: Common,
        /// Baseline directory; overrides `baseline` in the configuration.
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long = "suite")]
        suites: Vec<String>,
    },
}

#[derive(Subcommand)]
enum CollapseCmd {
    /// Integrate from u = 1 + δ and write collapse.csv.
    Run {
        #[command(flatten)]
        common: Common,
        /// End time as a fraction of t*.
        #[arg(long, default_value_t = 0.999)]
        until: f64,
    },
}

#[derive(Subcommand)]
enum EquilibriumCmd {
    LaneEmden {
        #[arg(long)]
        n: f64,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
    },
    Buchdahl {
        /// Compactness 2GM/R.
        #[arg(long, conflicts_with_all = ["mass", "radius"])]
        compactness: Option<f64>,
        #[arg(long, requires = "radius")]
        mass: Option<f64>,
        #[arg(long, requires = "mass")]
        radius: Option<f64>,
    },
}

#[derive(Subcommand)]
enum FpCmd {
    /// Solve the forward equation and write fp_density.csv.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        u_eps: Option<f64>,
        #[arg(long)]
        umax: Option<f64>,
        #[arg(long)]
        cells: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Solve and compare with a Monte Carlo ensemble, either a fresh one or the one stored
    /// in a `simulate` directory.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ensemble: Option<PathBuf>,
    },
}

fn parse_suites(names: &[String]) -> Result<Vec<Suite>> {
    names.iter().map(|s| Suite::parse(s)).collect()
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn print_report(rep: &AnalysisReport) {
    println!("{}: {:?}", rep.suite, rep.verdict);
    for c in &rep.checks {
        let se = c.stderr.map(|s| format!(" ± {s:.3e}")).unwrap_or_default();
        println!("  {:<40} {:>14.6e}{se}  bound {:.6e}  {:?}", c.name, c.measured, c.bound, c.verdict);
    }
    for n in &rep.notes {
        println!("  note: {n}");
    }
}

fn verdict_code(failed: bool) -> ExitCode {
    if failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}

fn prepare(dir: &Path, cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(dir)?;
    pipeline::write_provenance(dir, cfg)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Collapse {
            action: CollapseCmd::Run { common, until },
        } => {
            let cfg = common.load()?;
            let p = cfg.params()?;
            prepare(&cfg.out_dir, &cfg)?;
            let csv = pipeline::collapse_csv(&p, 1.0 + START_OFFSET, until * p.t_star)?;
            fs::write(cfg.out_dir.join("collapse.csv"), csv)?;
            let rep = pipeline::collapse_report(&p)?;
            pipeline::write_json(&cfg.out_dir.join("collapse.json"), &rep)?;
            print_report(&rep);
            println!("u(t_eps) = {:.10}", u_of_time(&p, p.t_eps));
            Ok(verdict_code(rep.verdict == Verdict::Fail))
        }
        Command::Equilibrium { action } => {
            match action {
                EquilibriumCmd::LaneEmden { n, step } => print_json(&lane_emden_integrate(n, step)?.surface)?,
                EquilibriumCmd::Buchdahl {
                    compactness,
                    mass,
                    radius,
                } => {
                    let star = match (compactness, mass, radius) {
                        (Some(c), _, _) => StarConfig::from_compactness(c)?,
                        (None, Some(m), Some(r)) => StarConfig::new(m, r)?,
                        _ => return Err(Error::Config("give --compactness or --mass with --radius".into())),
                    };
                    let b = buchdahl_check(&star);
                    print_json(&b)?;
                    return Ok(verdict_code(!b.stable));
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate {
            common,
            scheme,
            paths,
            dt,
            t_eps_frac,
            horizon,
            cap,
            keep,
        } => {
            let mut cfg = common.load()?;
            if let Some(s) = scheme {
                cfg.engine.scheme = Scheme::parse(&s)?;
            }
            if let Some(f) = t_eps_frac {
                cfg.partition = Partition::EpsFraction(f);
            }
            let e = &mut cfg.engine;
            e.n_paths = paths.unwrap_or(e.n_paths);
            e.dt = dt.unwrap_or(e.dt);
            e.horizon = horizon.unwrap_or(e.horizon);
            e.cap = cap.unwrap_or(e.cap);
            cfg.validate()?;
            let mut spec = cfg.ensemble_spec()?;
            spec.config.keep_full_paths = keep;
            prepare(&cfg.out_dir, &cfg)?;
            let ens = spec.run()?;
            pipeline::write_json(&cfg.out_dir.join("ensemble.json"), &spec)?;
            let summary = ens.summary();
            pipeline::write_json(&cfg.out_dir.join("summary.json"), &summary)?;
            fs::write(cfg.out_dir.join("records.csv"), pipeline::ensemble_records_csv(&ens))?;
            if keep > 0 {
                fs::write(cfg.out_dir.join("paths.csv"), pipeline::paths_csv(&ens))?;
            }
            println!("wrote {} paths to {}", cfg.engine.n_paths, cfg.out_dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Analyze { dir, suites } => {
            let resolved = dir.join("resolved_config.json");
            let cfg = if resolved.exists() {
                let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&resolved)?)?;
                RunConfig::from_json(&v["config"].to_string())?
            } else {
                RunConfig::default()
            };
            let spec: EnsembleSpec = serde_json::from_str(&fs::read_to_string(dir.join("ensemble.json"))?)?;
            let ens = spec.run()?;
            let suites = if suites.is_empty() {
                Suite::ALL.into_iter().filter(|s| s.uses_ensemble()).collect()
            } else {
                parse_suites(&suites)?
            };
            fs::create_dir_all(dir.join("reports"))?;
            let mut failed = false;
            for s in suites {
                let rep = pipeline::analyze_ensemble(s, &ens, &cfg)?;
                pipeline::write_json(&dir.join("reports").join(format!("{}.json", s.name())), &rep)?;
                print_report(&rep);
                failed |= rep.verdict == Verdict::Fail;
            }
            Ok(verdict_code(failed))
        }
        Command::Fp {
            action:
                FpCmd::Solve {
                    common,
                    u_eps,
                    umax,
                    cells,
                    dt,
                    horizon,
                },
        } => {
            let mut cfg = common.load()?;
            if u_eps.is_some() {
                cfg.u_eps = u_eps;
            }
            let s = &mut cfg.settings.fp;
            s.u_max = umax.unwrap_or(s.u_max);
            s.cells = cells.unwrap_or(s.cells);
            s.dt = dt.unwrap_or(s.dt);
            s.horizon = horizon.unwrap_or(s.horizon);
            cfg.validate()?;
            let p = cfg.params()?;
            let s = &cfg.settings.fp;
            let mut kc = KfpConfig::new(cfg.resolved_u_eps()?, s.u_max, s.cells, s.dt, s.horizon);
            kc.width_cells = s.width_cells;
            prepare(&cfg.out_dir, &cfg)?;
            let dg = kfp_solve(&PsiSpec::collapse(&p), 1.0, &kc)?;
            fs::write(cfg.out_dir.join("fp_density.csv"), pipeline::density_csv(&dg))?;
            let k = dg.last();
            println!(
                "mass {:.12} leaked {:.4e} mean {:.6} stopped mean {:.6}",
                dg.mass(k),
                dg.leaked[k],
                dg.moment(k, 1.0) / dg.mass(k),
                dg.stopped_mean(k)
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Fp {
            action: FpCmd::Compare { common, ensemble },
        } => {
            let cfg = common.load()?;
            prepare(&cfg.out_dir, &cfg)?;
            let (rep, dg) = match ensemble {
                Some(dir) => {
                    let spec: EnsembleSpec = serde_json::from_str(&fs::read_to_string(dir.join("ensemble.json"))?)?;
                    pipeline::fp_compare_ensemble(&spec, &cfg.settings.fp)?
                }
                None => pipeline::fp_report(&cfg)?,
            };
            fs::write(cfg.out_dir.join("fp_density.csv"), pipeline::density_csv(&dg))?;
            pipeline::write_json(&cfg.out_dir.join("fokker-planck.json"), &rep)?;
            print_report(&rep);
            Ok(verdict_code(rep.verdict == Verdict::Fail))
        }
        Command::Pipeline { common, suites } => {
            let mut cfg = common.load()?;
            if !suites.is_empty() {
                cfg.suites = parse_suites(&suites)?;
            }
            let res = pipeline::run_pipeline(&cfg)?;
            for s in &res.suites {
                let err = s.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default();
                println!("{:<14} {:?}{err}", s.suite.name(), s.verdict);
            }
            println!("overall: {:?}", res.overall);
            Ok(verdict_code(!res.passed()))
        }
        Command::Regress {
            common,
            baseline,
            suites,
        } => {
            let mut cfg = common.load()?;
            if !suites.is_empty() {
                cfg.suites = parse_suites(&suites)?;
            }
            let base = baseline
                .or_else(|| cfg.baseline.clone())
                .ok_or_else(|| Error::Config("no baseline directory given".into()))?;
            let (res, diff) = pipeline::regress(&cfg, &base)?;
            for d in diff.violations() {
                println!(
                    "drift {} ({:?}): {:.6e} -> {:.6e}, tolerance {:.3e}",
                    d.field, d.kind, d.baseline, d.current, d.tolerance
                );
            }
            for m in &diff.missing {
                println!("missing {m}");
            }
            println!(
                "compared {} fields, {} changed, {} beyond tolerance; run {:?}",
                diff.compared,
                diff.drifts.len(),
                diff.violations().count(),
                res.overall
            );
            Ok(verdict_code(!res.passed() || !diff.is_clean()))
        }
    }
}

fn main() -> ExitCode {
    if let Ok(n) = std::env::var("COLLAPSE_LAB_THREADS") {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("ignoring COLLAPSE_LAB_THREADS={n}"),
        }
    }
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
