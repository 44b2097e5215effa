use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Time discretisation of the stochastic leg.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TimeGrid {
    Uniform { dt: f64 },
    /// Step `max(dt0, ratio·(t − t0))`: fine near the start, geometric later.
    Graded { dt0: f64, ratio: f64 },
}

impl TimeGrid {
    pub fn base_dt(&self) -> f64 {
        match *self {
            Self::Uniform { dt } => dt,
            Self::Graded { dt0, .. } => dt0,
        }
    }

    /// Grid points from `t0` to `t1`, both included.
    pub fn times(&self, t0: f64, t1: f64) -> Result<Vec<f64>> {
        if !(t1 > t0) {
            return Err(Error::Config(format!("horizon {t1} must exceed start {t0}")));
        }
        match *self {
            Self::Uniform { dt } => {
                if !(dt > 0.0) {
                    return Err(Error::Config(format!("dt must be positive, got {dt}")));
                }
                let n = ((t1 - t0) / dt - 1e-9).ceil().max(1.0) as usize;
                let mut out: Vec<f64> = (0..n).map(|k| t0 + k as f64 * dt).collect();
                out.push(t1);
                Ok(out)
            }
            Self::Graded { dt0, ratio } => {
                if !(dt0 > 0.0 && ratio >= 0.0) {
                    return Err(Error::Config("graded grid needs dt0 > 0, ratio >= 0".into()));
                }
                let mut out = vec![t0];
                let mut k = 0usize;
                loop {
                    let t = t0 + k as f64 * dt0;
                    if t >= t1 || ratio * (t - t0) > dt0 {
                        break;
                    }
                    k += 1;
                    out.push((t0 + k as f64 * dt0).min(t1));
                }
                let mut t = *out.last().unwrap();
                while t < t1 {
                    let h = dt0.max(ratio * (t - t0));
                    t = (t + h).min(t1);
                    out.push(t);
                }
                Ok(out)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_ends_exactly() {
        let g = TimeGrid::Uniform { dt: 0.1 }.times(1.0, 2.0).unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(*g.last().unwrap(), 2.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn graded_grid_grows() {
        let g = TimeGrid::Graded { dt0: 1e-4, ratio: 1e-2 }.times(0.0, 10.0).unwrap();
        assert_eq!(*g.last().unwrap(), 10.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        let last = g[g.len() - 2];
        assert!((10.0 - last) <= 0.1 + 1e-12);
        assert!(g.len() < 2000);
    }
}
