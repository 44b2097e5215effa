//! Browser bindings for three views of the collapse: the deterministic profile, the
//! blow-up time distribution of the Stratonovich model, and a handful of sample paths.

use wasm_bindgen::prelude::*;

use collapse_lab::analysis::first_passage_cdf;
use collapse_lab::collapse::u_of_time;
use collapse_lab::params::ModelParams;
use collapse_lab::sde::{hitting_level, EngineConfig, EnsembleSpec, PsiSpec, Scheme, TimeGrid};

fn params(g: f64, rho0: f64) -> Result<ModelParams, JsError> {
    ModelParams::new(g, rho0).map_err(|e| JsError::new(&e.to_string()))
}

/// `[t_star, t_eps]` for the given constants.
#[wasm_bindgen]
pub fn collapse_times(g: f64, rho0: f64) -> Result<Vec<f64>, JsError> {
    let p = params(g, rho0)?;
    Ok(vec![p.t_star, p.t_eps])
}

/// Interleaved `(t, u)` pairs on `points` times from 0 to `until · t*`.
#[wasm_bindgen]
pub fn collapse_curve(g: f64, rho0: f64, until: f64, points: usize) -> Result<Vec<f64>, JsError> {
    let p = params(g, rho0)?;
    if !(until > 0.0 && until < 1.0) || points < 2 {
        return Err(JsError::new("need 0 < until < 1 and at least two points"));
    }
    let mut out = Vec::with_capacity(2 * points);
    for k in 0..points {
        let t = until * p.t_star * k as f64 / (points - 1) as f64;
        out.push(t);
        out.push(u_of_time(&p, t));
    }
    Ok(out)
}

/// Empirical blow-up CDF of `n_paths` exact Stratonovich paths started at `u_eps`, against
/// the Brownian first-passage law. Returns the level followed by `(t, empirical, exact)`
/// triples on `points` times up to `t_max`.
#[wasm_bindgen]
pub fn blow_up_cdf(
    g: f64,
    rho0: f64,
    u_eps: f64,
    n_paths: usize,
    t_max: f64,
    points: usize,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    let p = params(g, rho0)?;
    if points < 2 || !(t_max > 0.0) {
        return Err(JsError::new("need t_max > 0 and at least two points"));
    }
    let mut cfg = EngineConfig::new(
        Scheme::StratExact,
        PsiSpec::collapse(&p),
        n_paths,
        TimeGrid::Uniform { dt: t_max / 2000.0 },
        p.t_eps + t_max,
        f64::INFINITY,
        seed,
    );
    cfg.record_offsets = vec![0.0];
    let ens = EnsembleSpec {
        params: p,
        u_eps,
        t_start: p.t_eps,
        config: cfg,
    }
    .run()
    .map_err(|e| JsError::new(&e.to_string()))?;
    let mut hits: Vec<f64> = ens.hit_times().into_iter().flatten().map(|t| t - p.t_eps).collect();
    hits.sort_by(f64::total_cmp);
    let level = hitting_level(&p, u_eps);
    let n = ens.n() as f64;
    let mut out = vec![level];
    for k in 1..=points {
        let t = t_max * k as f64 / points as f64;
        let below = hits.partition_point(|&h| h <= t);
        out.extend([t, below as f64 / n, first_passage_cdf(level, t)]);
    }
    Ok(out)
}

/// `n_paths` sample paths of the chosen scheme, flattened as
/// `[len, t_0 … t_{len−1}, u_0 … u_{len−1}]` per path.
#[wasm_bindgen]
pub fn sample_paths(
    g: f64,
    rho0: f64,
    scheme: &str,
    u_eps: f64,
    n_paths: usize,
    horizon: f64,
    dt: f64,
    cap: f64,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    let p = params(g, rho0)?;
    let scheme = Scheme::parse(scheme).map_err(|e| JsError::new(&e.to_string()))?;
    let mut cfg = EngineConfig::new(
        scheme,
        PsiSpec::collapse(&p),
        n_paths,
        TimeGrid::Uniform { dt },
        p.t_eps + horizon,
        cap,
        seed,
    );
    cfg.record_offsets = vec![0.0];
    cfg.keep_full_paths = n_paths;
    let ens = EnsembleSpec {
        params: p,
        u_eps,
        t_start: p.t_eps,
        config: cfg,
    }
    .run()
    .map_err(|e| JsError::new(&e.to_string()))?;
    let mut out = Vec::new();
    for path in ens.full_paths() {
        out.push(path.t.len() as f64);
        out.extend(path.t.iter().map(|t| t - p.t_eps));
        out.extend(&path.u);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_starts_at_one_and_grows() {
        let c = collapse_curve(1.0, 1.0, 0.99, 50).unwrap();
        assert_eq!(c.len(), 100);
        assert!((c[1] - 1.0).abs() < 1e-9);
        assert!(c.chunks(2).zip(c.chunks(2).skip(1)).all(|(a, b)| b[1] >= a[1]));
    }

    #[test]
    fn blow_up_cdf_tracks_first_passage() {
        let out = blow_up_cdf(1.0, 1.0, 2.0, 4000, 1.0, 4, 3).unwrap();
        let last = &out[out.len() - 3..];
        let se = (last[2] * (1.0 - last[2]) / 4000.0).sqrt();
        assert!((last[1] - last[2]).abs() < 4.0 * se, "{last:?}");
    }

    #[test]
    fn sample_paths_are_framed() {
        let out = sample_paths(1.0, 1.0, "ito", 2.0, 3, 1e-3, 1e-5, 1e3, 1).unwrap();
        let mut i = 0;
        let mut count = 0;
        while i < out.len() {
            let len = out[i] as usize;
            assert!(len > 1);
            assert_eq!(out[i + 1], 0.0);
            assert!((out[i + 1 + len] - 2.0).abs() < 1e-12);
            i += 1 + 2 * len;
            count += 1;
        }
        assert_eq!(count, 3);
    }
}
