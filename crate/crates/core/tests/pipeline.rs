use std::fs;
use std::path::Path;
use std::process::Command;

use collapse_lab::error::Error;
use collapse_lab::pipeline::{diff_dirs, regress, run_pipeline, FieldKind, RunConfig, Suite};

const BIN: &str = env!("CARGO_BIN_EXE_collapse-lab");

fn small(out: &Path, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.engine.n_paths = 2000;
    cfg.engine.seed = seed;
    cfg.suites = vec![
        Suite::Collapse,
        Suite::Ds,
        Suite::Feller,
        Suite::Martingale,
        Suite::Moments,
        Suite::Continuity,
    ];
    cfg.out_dir = out.to_path_buf();
    cfg
}

#[test]
fn same_config_gives_identical_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let a = run_pipeline(&small(&tmp.path().join("a"), 3)).unwrap();
    let b = run_pipeline(&small(&tmp.path().join("b"), 3)).unwrap();
    assert_eq!(a.config_digest, b.config_digest);
    for f in ["summary.json", "checks.csv", "reports/martingale.json", "reports/collapse.json"] {
        let x = fs::read(tmp.path().join("a").join(f)).unwrap();
        let y = fs::read(tmp.path().join("b").join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
    assert!(tmp.path().join("a/timings.json").exists());
    assert!(tmp.path().join("a/resolved_config.json").exists());
}

#[test]
fn unknown_key_is_named() {
    let err = RunConfig::from_json(r#"{"schema_version": 1, "engine": {"n_pathz": 10}}"#).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
    assert!(err.to_string().contains("n_pathz"), "{err}");
    let err = RunConfig::from_json(r#"{"schema_version": 99}"#).unwrap_err();
    assert!(err.to_string().contains("schema_version"), "{err}");
}

#[test]
fn doubling_g_scales_collapse_time() {
    let base = RunConfig::default().params().unwrap();
    let mut cfg = RunConfig::default();
    cfg.model.g = 2.0;
    let p = cfg.params().unwrap();
    assert!((p.t_star / base.t_star - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-14);
    assert!((p.t_eps / base.t_eps - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-14);
}

#[test]
fn regress_against_itself_and_another_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let base = tmp.path().join("base");
    run_pipeline(&small(&base, 3)).unwrap();

    let (_, same) = regress(&small(&tmp.path().join("same"), 3), &base).unwrap();
    assert!(same.compared > 0);
    assert!(same.drifts.is_empty(), "{:#?}", same.drifts);
    assert!(same.is_clean());

    let (_, other) = regress(&small(&tmp.path().join("other"), 4), &base).unwrap();
    assert!(other.missing.is_empty(), "{:?}", other.missing);
    assert!(other.is_clean(), "{:#?}", other.violations().collect::<Vec<_>>());
    assert!(other.drifts.iter().all(|d| d.kind != FieldKind::Deterministic), "{:#?}", other.drifts);
    assert!(other.drifts.iter().any(|d| d.kind == FieldKind::Statistical));
    assert!(tmp.path().join("other/regress.json").exists());

    let diff = diff_dirs(&tmp.path().join("other"), &tmp.path().join("same"), &Default::default()).unwrap();
    assert_eq!(diff.drifts.len(), other.drifts.len());
}

#[test]
fn perturbed_collapse_output_is_caught() {
    let tmp = tempfile::tempdir().unwrap();
    let base = tmp.path().join("base");
    let mut cfg = small(&base, 3);
    cfg.suites = vec![Suite::Collapse];
    run_pipeline(&cfg).unwrap();
    let path = base.join("reports/collapse.json");
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    let m = v["checks"][0]["measured"].as_f64().unwrap();
    v["checks"][0]["measured"] = serde_json::json!(m * (1.0 + 1e-6) + 1e-12);
    fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
    let mut cur = cfg.clone();
    cur.out_dir = tmp.path().join("cur");
    let (_, diff) = regress(&cur, &base).unwrap();
    assert!(!diff.is_clean());
    assert_eq!(diff.violations().count(), 1);
}

#[test]
fn missing_baseline_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let err = regress(&small(&tmp.path().join("cur"), 3), &tmp.path().join("nowhere")).unwrap_err();
    assert!(matches!(err, Error::Io(_)), "{err}");
}

fn run_cli(args: &[&str]) -> (i32, String) {
    let out = Command::new(BIN).args(args).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap(), text)
}

#[test]
fn cli_exit_codes_and_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = |s: &str| tmp.path().join(s).to_string_lossy().into_owned();

    let (code, text) = run_cli(&["collapse", "run", "--out", &dir("collapse")]);
    assert_eq!(code, 0, "{text}");
    let csv = fs::read_to_string(tmp.path().join("collapse/collapse.csv")).unwrap();
    assert!(csv.lines().count() > 10);

    let (code, text) = run_cli(&["equilibrium", "buchdahl", "--compactness", "0.95"]);
    assert_eq!(code, 1, "{text}");
    assert!(text.contains("\"stable\": false"), "{text}");
    let (code, text) = run_cli(&["equilibrium", "buchdahl", "--compactness", "1.2"]);
    assert_eq!(code, 2, "{text}");
    let (code, _) = run_cli(&["equilibrium", "lane-emden", "--n", "1"]);
    assert_eq!(code, 0);

    let (code, text) = run_cli(&[
        "simulate", "--out", &dir("sim"), "--paths", "500", "--horizon", "0.002", "--keep", "2",
    ]);
    assert_eq!(code, 0, "{text}");
    for f in ["ensemble.json", "summary.json", "records.csv", "paths.csv", "resolved_config.json"] {
        assert!(tmp.path().join("sim").join(f).exists(), "{f}");
    }
    let (code, text) = run_cli(&["analyze", &dir("sim"), "--suite", "continuity"]);
    assert_ne!(code, 2, "{text}");
    assert!(tmp.path().join("sim/reports/continuity.json").exists());

    let (code, text) = run_cli(&["fp", "compare", "--ensemble", &dir("sim"), "--out", &dir("fpc")]);
    assert_eq!(code, 0, "{text}");
    let (code, text) = run_cli(&[
        "fp", "solve", "--u-eps", "3", "--umax", "200", "--cells", "400", "--horizon", "1e-3", "--out", &dir("fps"),
    ]);
    assert_eq!(code, 0, "{text}");
    assert!(tmp.path().join("fps/fp_density.csv").exists());

    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"schema_version": 1, "modle": {}}"#).unwrap();
    let (code, text) = run_cli(&["pipeline", "--config", &bad.to_string_lossy(), "--out", &dir("bad")]);
    assert_eq!(code, 2);
    assert!(text.contains("modle"), "{text}");

    let (code, text) = run_cli(&["pipeline", "--suite", "collapse", "--suite", "ds", "--out", &dir("pipe")]);
    assert_eq!(code, 0, "{text}");
    let (code, text) = run_cli(&[
        "regress", "--suite", "collapse", "--suite", "ds", "--out", &dir("reg"), "--baseline", &dir("pipe"),
    ]);
    assert_eq!(code, 0, "{text}");
    let (code, _) = run_cli(&["regress", "--out", &dir("reg2"), "--baseline", &dir("absent")]);
    assert_eq!(code, 2);
    let (code, _) = run_cli(&["pipeline", "--suite", "nonsense"]);
    assert_eq!(code, 2);
}
