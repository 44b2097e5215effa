use collapse_lab::analysis::{self, heun_exact_gap, scale_function_exits, AnalysisReport, Verdict};
use collapse_lab::params::ModelParams;
use collapse_lab::sde::{exit_race, DriftSpec, EngineConfig, Ensemble, EnsembleSpec, PsiSpec, Scheme, TimeGrid};
use collapse_lab::stats::Estimate;

fn unit() -> ModelParams {
    ModelParams::new(1.0, 1.0).unwrap()
}

fn ito(n: usize, span: f64, cap: f64, seed: u64) -> Ensemble {
    let p = unit();
    let mut cfg = EngineConfig::new(
        Scheme::ItoEuler,
        PsiSpec::collapse(&p),
        n,
        TimeGrid::Uniform { dt: 1e-5 },
        p.t_eps + span,
        cap,
        seed,
    )
    .with_uniform_records(span, 5);
    cfg.upcrossing_cells = vec![(2.0, 3.0), (2.5, 4.0)];
    for g in [1e-5, 2e-5, 4e-5, 8e-5] {
        cfg.record_offsets.push(g);
    }
    cfg.record_offsets.sort_by(f64::total_cmp);
    cfg.dds_level = Some(0.1);
    EnsembleSpec {
        params: p,
        u_eps: 2.0,
        t_start: p.t_eps,
        config: cfg,
    }
    .run()
    .unwrap()
}

fn assert_pass(rep: &AnalysisReport) {
    let bad: Vec<_> = rep.checks.iter().filter(|c| c.verdict != Verdict::Pass).collect();
    assert!(bad.is_empty(), "{}: {bad:#?}\n{:?}", rep.suite, rep.notes);
}

#[test]
fn martingale_suite_passes_below_a_low_cap() {
    for seed in 1..=3 {
        let ens = ito(10_000, 0.05, 20.0, seed);
        assert_pass(&analysis::martingale_suite(&ens, &[0.01, 0.02, 0.03, 0.04, 0.05]).unwrap());
    }
}

#[test]
fn high_cap_never_fails_martingale_suite() {
    let ens = ito(10_000, 0.01, 1e3, 11);
    let rep = analysis::martingale_suite(&ens, &[0.002, 0.004, 0.006, 0.008, 0.01]).unwrap();
    assert_ne!(rep.verdict, Verdict::Fail, "{rep:#?}");
}

#[test]
fn ensemble_suites_pass() {
    let ens = ito(10_000, 0.01, 1e3, 5);
    let hz = [0.002, 0.004, 0.006, 0.008, 0.01];
    assert_pass(&analysis::moment_suite(&ens, &[2.0, 3.0, 4.0], &hz).unwrap());
    assert_pass(&analysis::doob_maximal_suite(&ens, &[4.0, 8.0, 16.0]).unwrap());
    assert_pass(&analysis::upcrossing_suite(&ens).unwrap());
    assert_pass(&analysis::lyapunov_suite(&ens, &[1.5, 2.0, 5.0, 10.0, 100.0], &[2.0, 3.0]).unwrap());
    assert_pass(&analysis::continuity_suite(&ens, &[1e-5, 2e-5, 4e-5, 8e-5]).unwrap());
    assert_pass(&analysis::kretschmann_expectation(&ens).unwrap());
    assert_pass(&analysis::dds_time_change_check(&ens).unwrap());
    assert_eq!(ens.blown_up(), 0);
}

#[test]
fn driver_and_quadratic_variation() {
    let ens = ito(4000, 1e-3, 1e3, 8);
    let (mean, var, n) = ens.driver_moments();
    assert!(mean.abs() < 5.0 / (n as f64).sqrt(), "{mean}");
    assert!((var - 1.0).abs() < 0.01, "{var}");
    let j = ens.record_index(ens.t_start() + 1e-3);
    let qv = Estimate::from_samples(ens.qv_at(j)).value;
    let comp = Estimate::from_samples(ens.comp_at(j)).value;
    assert!(((qv - comp) / comp).abs() < 0.02, "{qv} vs {comp}");
}

#[test]
fn heun_tracks_exact_before_blow_up() {
    let p = unit();
    let gap = heun_exact_gap(&p, 2.0, p.t_eps, 1e-6, 2e-3, 200, 3, 3.0).unwrap();
    assert!(gap < 1e-3, "{gap}");
    let coarse = heun_exact_gap(&p, 2.0, p.t_eps, 1e-6, 2e-3, 50, 3, 10.0).unwrap();
    let fine = heun_exact_gap(&p, 2.0, p.t_eps, 1e-7, 2e-3, 50, 3, 10.0).unwrap();
    assert!(fine < coarse / 3.0, "{coarse} -> {fine}");
}

#[test]
fn stratonovich_blows_up_and_ito_does_not() {
    let p = unit();
    let cfg = EngineConfig::new(
        Scheme::StratExact,
        PsiSpec::collapse(&p),
        2000,
        TimeGrid::Uniform { dt: 1e-4 },
        p.t_eps + 1.0,
        f64::INFINITY,
        4,
    );
    let ens = EnsembleSpec {
        params: p,
        u_eps: 2.0,
        t_start: p.t_eps,
        config: cfg,
    }
    .run()
    .unwrap();
    let hits = ens.hit_times().iter().filter(|h| h.is_some()).count();
    assert_eq!(hits, ens.blown_up());
    let expected = analysis::first_passage_cdf(0.098_604, 1.0);
    let se = (expected * (1.0 - expected) / 2000.0).sqrt();
    assert!((hits as f64 / 2000.0 - expected).abs() < 4.0 * se);
}

#[test]
fn exit_race_matches_scale_function() {
    let p = unit();
    let psi = PsiSpec::collapse(&p);
    for drift in [DriftSpec::Zero, DriftSpec::HalfPsiPsiPrime] {
        let exact = scale_function_exits(&psi, &drift, 2.0, 6.0, 3.0).unwrap().high;
        let c = exit_race(&psi, &drift, 2.0, 6.0, 3.0, 20_000, 1e-6, 10_000_000, 9).unwrap();
        assert_eq!(c.undecided, 0);
        let n = (c.high + c.low) as f64;
        let se = (exact * (1.0 - exact) / n).sqrt();
        assert!((c.high as f64 / n - exact).abs() < 3.0 * se, "{drift:?}: {} vs {exact}", c.high as f64 / n);
    }
}

#[test]
fn hitting_suite_passes() {
    let p = unit();
    let mut cfg = EngineConfig::new(
        Scheme::StratExact,
        PsiSpec::collapse(&p),
        10_000,
        TimeGrid::Graded { dt0: 1e-5, ratio: 1e-3 },
        p.t_eps + 10.0,
        f64::INFINITY,
        21,
    );
    cfg.record_offsets = vec![0.0];
    let ens = EnsembleSpec {
        params: p,
        u_eps: 2.0,
        t_start: p.t_eps,
        config: cfg,
    }
    .run()
    .unwrap();
    assert_pass(&analysis::first_passage_suite(&ens, &[0.1, 1.0, 10.0]).unwrap());
}

#[test]
fn constant_sigma_exponential_is_lognormal() {
    let p = unit();
    let cfg = EngineConfig::new(
        Scheme::ItoEuler,
        PsiSpec::Constant { sigma: 0.5 },
        20_000,
        TimeGrid::Uniform { dt: 1e-2 },
        p.t_eps + 1.0,
        f64::INFINITY,
        2,
    )
    .with_uniform_records(1.0, 4);
    let ens = EnsembleSpec {
        params: p,
        u_eps: 2.0,
        t_start: p.t_eps,
        config: cfg,
    }
    .run()
    .unwrap();
    let rep = analysis::gbm_suite(&ens, 1.0, &[0.25, 0.5, 0.75, 1.0], Some(0.5), &[1.0, 2.0]);
    assert_pass(&rep);
}
