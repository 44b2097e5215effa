//! Explicit Runge–Kutta integrators: fixed-step RK4 and an adaptive Dormand–Prince 5(4) pair
//! with a stop condition for blow-up detection.

use crate::error::{Error, Result};

pub type State<const N: usize> = [f64; N];

fn axpy<const N: usize>(y: &State<N>, h: f64, terms: &[(f64, &State<N>)]) -> State<N> {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// One classical RK4 step.
pub fn rk4_step<const N: usize, F>(f: &F, t: f64, y: &State<N>, h: f64) -> State<N>
where
    F: Fn(f64, &State<N>) -> State<N>,
{
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &axpy(y, h, &[(0.5, &k1)]));
    let k3 = f(t + 0.5 * h, &axpy(y, h, &[(0.5, &k2)]));
    let k4 = f(t + h, &axpy(y, h, &[(1.0, &k3)]));
    axpy(y, h, &[(1.0 / 6.0, &k1), (2.0 / 6.0, &k2), (2.0 / 6.0, &k3), (1.0 / 6.0, &k4)])
}

/// Settings for [`dopri5`].
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    /// Integration fails if the accepted step would fall below this floor.
    pub h_min: f64,
    pub max_steps: usize,
    /// End the run with [`Termination::StepFloor`] instead of an error when the step floor
    /// is reached. Useful when the floor itself signals a singularity.
    pub floor_stops: bool,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-14,
            h_init: 1e-6,
            h_min: 1e-14,
            max_steps: 2_000_000,
            floor_stops: false,
        }
    }
}

/// Why an adaptive run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    ReachedEnd,
    /// The user stop predicate fired on an accepted state.
    Stopped,
    /// The step size fell below the floor with `floor_stops` set.
    StepFloor,
}

#[derive(Debug, Clone)]
pub struct Trajectory<const N: usize> {
    pub t: Vec<f64>,
    pub y: Vec<State<N>>,
    pub termination: Termination,
    pub rejected: usize,
}

// Dormand–Prince coefficients.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Adaptive Dormand–Prince 5(4) from `t0` to `t_end`, stopping early when `stop(t, y)` holds
/// for an accepted state. Every accepted state is recorded.
pub fn dopri5<const N: usize, F, S>(
    f: F,
    t0: f64,
    y0: State<N>,
    t_end: f64,
    opts: AdaptiveOptions,
    stop: S,
) -> Result<Trajectory<N>>
where
    F: Fn(f64, &State<N>) -> State<N>,
    S: Fn(f64, &State<N>) -> bool,
{
    let mut t = t0;
    let mut y = y0;
    let mut h = opts.h_init.min(t_end - t0);
    let mut traj = Trajectory {
        t: vec![t0],
        y: vec![y0],
        termination: Termination::ReachedEnd,
        rejected: 0,
    };
    let mut k1 = f(t, &y);
    let mut steps = 0usize;
    while t < t_end {
        if steps >= opts.max_steps {
            return Err(Error::Integration(format!(
                "step budget {} exhausted at t = {t}",
                opts.max_steps
            )));
        }
        steps += 1;
        if t + h > t_end {
            h = t_end - t;
        }
        let k2 = f(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]));
        let k3 = f(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(t + C4 * h, &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(
            t + C5 * h,
            &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            t + h,
            &axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let y_new = axpy(&y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let k7 = f(t + h, &y_new);
        let mut err: f64 = 0.0;
        for i in 0..N {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            err = err.max((e / sc).abs());
        }
        if !err.is_finite() {
            h *= 0.25;
            traj.rejected += 1;
            if h < opts.h_min {
                if opts.floor_stops {
                    traj.termination = Termination::StepFloor;
                    return Ok(traj);
                }
                return Err(Error::Integration(format!("non-finite state near t = {t}")));
            }
            continue;
        }
        if err <= 1.0 {
            t += h;
            y = y_new;
            k1 = k7;
            traj.t.push(t);
            traj.y.push(y);
            if stop(t, &y) {
                traj.termination = Termination::Stopped;
                return Ok(traj);
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= fac;
        } else {
            traj.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
        }
        if h < opts.h_min && t < t_end {
            if opts.floor_stops {
                traj.termination = Termination::StepFloor;
                return Ok(traj);
            }
            return Err(Error::Integration(format!(
                "step size {h:e} fell below floor {:e} at t = {t}",
                opts.h_min
            )));
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let traj = dopri5(
            |_, y: &[f64; 1]| [-y[0]],
            0.0,
            [1.0],
            2.0,
            AdaptiveOptions::default(),
            |_, _| false,
        )
        .unwrap();
        let last = traj.y.last().unwrap()[0];
        assert!((last - (-2.0f64).exp()).abs() < 1e-10);
        assert_eq!(traj.termination, Termination::ReachedEnd);
    }

    #[test]
    fn rk4_fourth_order() {
        // y' = y: error ratio between h and h/2 is ~16.
        let f = |_: f64, y: &[f64; 1]| [y[0]];
        let run = |n: usize| {
            let h = 1.0 / n as f64;
            let mut y = [1.0];
            for i in 0..n {
                y = rk4_step(&f, i as f64 * h, &y, h);
            }
            (y[0] - 1f64.exp()).abs()
        };
        let ratio = run(20) / run(40);
        assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
    }

    #[test]
    fn stop_predicate_fires() {
        // y' = y², y(0)=1 blows up at t = 1.
        let traj = dopri5(
            |_, y: &[f64; 1]| [y[0] * y[0]],
            0.0,
            [1.0],
            2.0,
            AdaptiveOptions::default(),
            |_, y| y[0] > 1e8,
        )
        .unwrap();
        assert_eq!(traj.termination, Termination::Stopped);
        assert!((traj.t.last().unwrap() - 1.0).abs() < 1e-7);
    }
}
