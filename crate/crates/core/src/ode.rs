//! Adaptive classical RK4 for small dense ODE systems.
//!
//! The local error is estimated by step doubling (one step of `dt` against two
//! of `dt/2`), and the step size follows a PI controller. Callers can veto a
//! candidate step through an acceptance hook, which is how structural guards
//! (positivity, energy monotonicity) are enforced without silently clamping.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct AdaptiveControls {
    pub rtol: f64,
    pub atol: f64,
    pub dt_initial: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub max_steps: usize,
}

/// Verdict of the acceptance hook on an error-controlled candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Candidate {
    Accept,
    /// Retry with half the step size.
    Retry,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AdaptiveStats {
    pub accepted: usize,
    pub rejected_error: usize,
    pub rejected_hook: usize,
}

/// One classical RK4 step.
pub fn rk4_step<F>(rhs: &mut F, t: f64, y: &[f64], dt: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let stage = |y: &[f64], k: &[f64], c: f64| -> Vec<f64> {
        y.iter().zip(k).map(|(yi, ki)| yi + c * ki).collect()
    };
    let k1 = rhs(t, y)?;
    let k2 = rhs(t + 0.5 * dt, &stage(y, &k1, 0.5 * dt))?;
    let k3 = rhs(t + 0.5 * dt, &stage(y, &k2, 0.5 * dt))?;
    let k4 = rhs(t + dt, &stage(y, &k3, dt))?;
    Ok(y.iter()
        .enumerate()
        .map(|(i, yi)| yi + dt / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]))
        .collect())
}

/// Integrates `y' = rhs(t, y)` from `t0` to `t_end`.
///
/// `hook(t_new, y_old, y_new)` inspects each error-accepted candidate;
/// `observe(t, y)` sees every accepted state (including the initial one).
pub fn integrate<F, H, O>(
    y0: Vec<f64>,
    t0: f64,
    t_end: f64,
    controls: &AdaptiveControls,
    mut rhs: F,
    mut hook: H,
    mut observe: O,
) -> Result<(Vec<f64>, AdaptiveStats)>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
    H: FnMut(f64, &[f64], &[f64]) -> Result<Candidate>,
    O: FnMut(f64, &[f64]),
{
    const SAFETY: f64 = 0.9;
    // PI gains for a method whose error estimate is O(dt^5)
    const ALPHA: f64 = 0.7 / 5.0;
    const BETA: f64 = 0.4 / 5.0;

    let mut stats = AdaptiveStats::default();
    let mut t = t0;
    let mut y = y0;
    let mut dt = controls.dt_initial.min(controls.dt_max);
    let mut err_prev: f64 = 1.0;
    observe(t, &y);

    while t < t_end {
        if stats.accepted + stats.rejected_error + stats.rejected_hook >= controls.max_steps {
            return Err(Error::StepSizeUnderflow {
                t,
                dt,
                dt_min: controls.dt_min,
            });
        }
        let remaining = t_end - t;
        let last = dt >= remaining;
        let h = if last { remaining } else { dt };
        if h < controls.dt_min && !last {
            return Err(Error::StepSizeUnderflow {
                t,
                dt: h,
                dt_min: controls.dt_min,
            });
        }

        let full = rk4_step(&mut rhs, t, &y, h)?;
        let half = rk4_step(&mut rhs, t, &y, 0.5 * h)?;
        let two_halves = rk4_step(&mut rhs, t + 0.5 * h, &half, 0.5 * h)?;

        let mut err: f64 = 0.0;
        for i in 0..y.len() {
            let scale = controls.atol + controls.rtol * y[i].abs().max(two_halves[i].abs());
            err = err.max((two_halves[i] - full[i]).abs() / (15.0 * scale));
        }
        if !err.is_finite() {
            stats.rejected_error += 1;
            dt = 0.25 * h;
            continue;
        }
        if err > 1.0 {
            stats.rejected_error += 1;
            dt = h * (SAFETY * err.powf(-0.2)).clamp(0.2, 1.0);
            continue;
        }
        let t_new = if last { t_end } else { t + h };
        match hook(t_new, &y, &two_halves)? {
            Candidate::Retry => {
                stats.rejected_hook += 1;
                dt = 0.5 * h;
                continue;
            }
            Candidate::Accept => {}
        }
        stats.accepted += 1;
        t = t_new;
        y = two_halves;
        observe(t, &y);

        let err_c = err.max(1e-10);
        let factor = SAFETY * err_c.powf(-ALPHA) * err_prev.powf(BETA);
        err_prev = err_c;
        // after a clipped final step keep the controller's proposal, not the clipped size
        let base = if last { dt.max(h) } else { h };
        dt = (base * factor.clamp(0.2, 5.0)).min(controls.dt_max);
    }
    Ok((y, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn controls() -> AdaptiveControls {
        AdaptiveControls {
            rtol: 1e-10,
            atol: 1e-12,
            dt_initial: 1e-3,
            dt_min: 1e-12,
            dt_max: 1.0,
            max_steps: 100_000,
        }
    }

    #[test]
    fn exponential_decay() {
        let (y, stats) = integrate(
            vec![1.0, 2.0],
            0.0,
            2.0,
            &controls(),
            |_, y| Ok(y.iter().map(|v| -v).collect()),
            |_, _, _| Ok(Candidate::Accept),
            |_, _| {},
        )
        .unwrap();
        assert!((y[0] - (-2.0_f64).exp()).abs() < 1e-9);
        assert!((y[1] - 2.0 * (-2.0_f64).exp()).abs() < 2e-9);
        assert!(stats.accepted > 0);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let mut rhs = |_: f64, y: &[f64]| Ok(vec![y[1], -y[0]]);
        let mut err = |n: usize| {
            let dt = 1.0 / n as f64;
            let mut y = vec![1.0, 0.0];
            for k in 0..n {
                y = rk4_step(&mut rhs, k as f64 * dt, &y, dt).unwrap();
            }
            (y[0] - 1.0_f64.cos()).abs()
        };
        let ratio = err(20) / err(40);
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }

    #[test]
    fn hook_can_force_smaller_steps() {
        let mut calls = 0;
        let (_, stats) = integrate(
            vec![1.0],
            0.0,
            1.0,
            &controls(),
            |_, y| Ok(vec![-y[0]]),
            |_, _, _| {
                calls += 1;
                Ok(if calls == 1 {
                    Candidate::Retry
                } else {
                    Candidate::Accept
                })
            },
            |_, _| {},
        )
        .unwrap();
        assert_eq!(stats.rejected_hook, 1);
    }

    #[test]
    fn underflow_is_reported() {
        let mut c = controls();
        c.dt_min = 0.5;
        c.dt_initial = 0.1;
        let r = integrate(
            vec![1.0],
            0.0,
            1.0,
            &c,
            |_, y| Ok(vec![-y[0]]),
            |_, _, _| Ok(Candidate::Accept),
            |_, _| {},
        );
        assert!(matches!(r, Err(Error::StepSizeUnderflow { .. })));
    }
}
