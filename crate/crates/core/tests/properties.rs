use proptest::prelude::*;

use collapse_lab::analysis::{collapse_ds_antiderivative, Check, Rule, Verdict};
use collapse_lab::collapse::{implicit_f, implicit_g, implicit_time_of_u, u_from_f, u_from_g, u_of_time};
use collapse_lab::fokker_planck::{
    gaussian_cells, hermite_expansion, kfp_evolve, CellGrid, KfpConfig, RightBoundary,
};
use collapse_lab::params::ModelParams;
use collapse_lab::pipeline::{RunConfig, Suite};
use collapse_lab::rng::RngSpec;
use collapse_lab::sde::{EngineConfig, EnsembleSpec, PsiSpec, Scheme, TimeGrid};
use rand::Rng;

fn unit() -> ModelParams {
    ModelParams::new(1.0, 1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn implicit_time_inverts(log_s in -6.0f64..6.0) {
        let p = unit();
        let u = 1.0 + 10f64.powf(log_s);
        prop_assert!(((u_from_g(implicit_g(u)) - u) / u).abs() < 1e-12);
        let t = implicit_time_of_u(&p, u);
        let back = u_of_time(&p, t);
        // t carries an absolute rounding error of a few ulps; du/dt = ψ(u) amplifies it
        let cond = 4.0 * f64::EPSILON * t * PsiSpec::collapse(&p).value(u);
        prop_assert!((back - u).abs() < 1e-12 * u + cond, "{u} -> {t} -> {back}");
        prop_assert!((implicit_f(u) + implicit_g(u) - std::f64::consts::FRAC_PI_2).abs() < 1e-14);
    }

    #[test]
    fn profile_is_monotone(a in 0.0f64..0.5, b in 0.0f64..0.5) {
        let p = unit();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-9);
        prop_assert!(u_of_time(&p, lo) <= u_of_time(&p, hi));
        prop_assert!(u_from_f(implicit_f(2.0)) - 2.0 < 1e-12);
    }

    #[test]
    fn psi_square_matches(log_s in -4.0f64..4.0, g in 0.1f64..10.0, rho in 0.1f64..10.0) {
        let p = ModelParams::new(g, rho).unwrap();
        let psi = PsiSpec::collapse(&p);
        let u = 1.0 + 10f64.powf(log_s);
        let expected = p.kappa * u.powi(4) * (u - 1.0);
        prop_assert!(((psi.sq(u) - expected) / expected).abs() < 1e-12);
        prop_assert!((psi.value(u).powi(2) - psi.sq(u)).abs() <= 1e-12 * expected);
    }

    #[test]
    fn ds_antiderivative_differentiates(x in 1.01f64..30.0) {
        let p = unit();
        let psi = PsiSpec::collapse(&p);
        let h = 1e-6 * x;
        let d = (collapse_ds_antiderivative(x + h) - collapse_ds_antiderivative(x - h)) / (2.0 * h);
        let f = p.kappa * x / psi.sq(x);
        prop_assert!(((d - f) / f).abs() < 1e-5, "{d} vs {f}");
    }

    #[test]
    fn at_most_is_monotone(m in -10.0f64..10.0, d in 0.0f64..5.0, se in 0.0f64..1.0, bound in -10.0f64..10.0) {
        let hi = Check::new("x", m, Some(se), bound, Rule::AtMost { k: 3.0 });
        let lo = Check::new("x", m - d, Some(se), bound, Rule::AtMost { k: 3.0 });
        if hi.verdict == Verdict::Pass {
            prop_assert_eq!(lo.verdict, Verdict::Pass);
        }
    }

    #[test]
    fn check_json_round_trip(m in proptest::num::f64::ANY, b in proptest::num::f64::ANY) {
        let c = Check::new("x", m, None, b, Rule::AtLeast { k: 0.0 });
        let back: Check = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        prop_assert_eq!(back.measured.to_bits() == c.measured.to_bits() || (m.is_nan() && back.measured.is_nan()), true);
        prop_assert_eq!(back.bound.to_bits() == c.bound.to_bits() || (b.is_nan() && back.bound.is_nan()), true);
        prop_assert_eq!(back.verdict, c.verdict);
    }

    #[test]
    fn path_streams_are_reproducible(seed in any::<u64>(), i in 0u64..1_000_000) {
        let spec = RngSpec::new(seed);
        let a: Vec<u64> = (0..4).map({ let mut r = spec.path_rng(i); move |_| r.random() }).collect();
        let b: Vec<u64> = (0..4).map({ let mut r = spec.path_rng(i); move |_| r.random() }).collect();
        let c: Vec<u64> = (0..4).map({ let mut r = spec.path_rng(i + 1); move |_| r.random() }).collect();
        prop_assert_eq!(&a, &b);
        prop_assert_ne!(&a, &c);
    }

    #[test]
    fn geometric_grid_tiles(cells in 10usize..400, log_first in -5.0f64..-1.0, span in 2.0f64..1e3) {
        let first = 10f64.powf(log_first);
        prop_assume!(first * cells as f64 <= span);
        let g = CellGrid::geometric(1.0, 1.0 + span, cells, first).unwrap();
        prop_assert_eq!(g.len(), cells);
        prop_assert!(g.edges.windows(2).all(|w| w[1] > w[0]));
        prop_assert!(((g.widths.iter().sum::<f64>() - span) / span).abs() < 1e-10);
        prop_assert!(((g.widths[0] - first) / first).abs() < 1e-6);
        prop_assert!(g.widths.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12)));
    }

    #[test]
    fn reflecting_solve_keeps_mass_and_sign(center in 1.5f64..20.0, width in 0.05f64..2.0, dt_exp in -7.0f64..-4.0) {
        let psi = PsiSpec::collapse(&unit());
        let mut cfg = KfpConfig::new(center, 50.0, 200, 10f64.powf(dt_exp), 50.0 * 10f64.powf(dt_exp));
        cfg.right = RightBoundary::Reflecting;
        let grid = CellGrid::geometric(cfg.u_lo, cfg.u_max, cfg.cells, 1e-2).unwrap();
        let p0 = gaussian_cells(&grid, center, width);
        let dg = kfp_evolve(&psi, 1.0, grid, p0, &cfg, width).unwrap();
        let k = dg.last();
        prop_assert!((dg.mass(k) - 1.0).abs() < 1e-10, "mass {}", dg.mass(k));
        prop_assert!(dg.min_density >= 0.0);
        prop_assert_eq!(dg.leaked[k], 0.0);
    }

    #[test]
    fn hermite_sum_converges(x in -1.0f64..1.0, theta in -0.4f64..0.4) {
        let h = hermite_expansion(x, theta, 40).unwrap();
        prop_assert!(h.error < 1e-12, "{x} {theta}: {}", h.error);
        prop_assert!((h.exact - (2.0 * x * theta - theta * theta).exp()).abs() < 1e-15 * h.exact.max(1.0));
    }

    #[test]
    fn run_config_round_trips(seed in any::<u64>(), n in 1usize..100_000, frac in 0.5f64..0.999, picks in proptest::collection::vec(0usize..17, 0..6)) {
        let mut cfg = RunConfig::default();
        cfg.engine.seed = seed;
        cfg.engine.n_paths = n;
        cfg.partition = collapse_lab::pipeline::Partition::EpsFraction(frac);
        cfg.suites = picks.into_iter().map(|i| Suite::ALL[i]).collect();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        prop_assert_eq!(RunConfig::from_json(&text).unwrap(), cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn ito_paths_stay_in_domain(seed in any::<u64>(), u_eps in 1.2f64..10.0) {
        let p = unit();
        let cfg = EngineConfig::new(
            Scheme::ItoEuler,
            PsiSpec::collapse(&p),
            200,
            TimeGrid::Uniform { dt: 1e-5 },
            p.t_eps + 2e-3,
            50.0,
            seed,
        )
        .with_uniform_records(2e-3, 4);
        let ens = EnsembleSpec { params: p, u_eps, t_start: p.t_eps, config: cfg }.run().unwrap();
        for j in 0..ens.record_times.len() {
            for u in ens.u_at(j) {
                prop_assert!(u >= 1.0, "u = {u}");
            }
            for m in ens.max_at(j) {
                prop_assert!(m >= u_eps);
            }
        }
        prop_assert!(ens.clamp_rate() < 1e-4);
    }
}
