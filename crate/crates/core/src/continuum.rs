//! Time integration of the regularized slope equation
//!
//! ```text
//! u_t = -u⁴/(ε+u²) (u³)_hhhh,      u(0) = u0 + ε^{1/3}
//! ```
//!
//! on the unit height period, including the degenerate case `ε = 0`
//! (`u_t = -u² (u³)_hhhh`, no shift of the datum).
//!
//! Two steppers are provided. [`explicit_step`] is classical RK4 in `u` under a
//! fourth-order CFL restriction. [`semi_implicit_step`] works in `w = u³`,
//! where the equation reads `w_t = -3 m(u) w_hhhh` with mobility
//! `m = u⁶/(ε+u²)`, and solves
//!
//! ```text
//! (I + 3 dt diag(m_old) D4) w_new = w_old
//! ```
//!
//! with a direct cyclic pentadiagonal solve. Because `D4 = D2 D2` is symmetric
//! positive semi-definite and `m >= 0`, this step never increases the discrete
//! `E = (1/6) |D2 w|²`, whatever the step size.

use serde::{Deserialize, Serialize};

use crate::energetics::{energy_report, EnergyReport};
use crate::error::{Error, Result};
use crate::grid::{diff4, PeriodicField};
use crate::pentadiag::{CyclicPentadiagonal, Solution};

/// Relative residual required of every linear solve, measured against `|w_old|_inf`.
pub const SOLVE_TOL: f64 = 1e-12;

/// Relative slack on report-to-report monotonicity of `E`.
pub const ENERGY_MONOTONE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ExplicitRk4,
    #[default]
    SemiImplicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub scheme: Scheme,
    /// Fraction of the explicit stability limit actually used.
    pub cfl_safety: f64,
    pub dt_min: f64,
    /// Largest explicit step; the fixed step of the semi-implicit scheme.
    pub dt_max: f64,
    /// Lower clamp applied when `ε = 0` (values below it are raised and counted).
    pub positivity_floor: f64,
    pub report_every: f64,
}

impl SolverOptions {
    /// Defaults sized for a run of length `t_end`: 1000 semi-implicit steps,
    /// 100 reports.
    pub fn for_horizon(t_end: f64) -> Self {
        Self {
            scheme: Scheme::SemiImplicit,
            cfl_safety: 0.4,
            dt_min: 1e-16,
            dt_max: t_end / 1000.0,
            positivity_floor: 0.0,
            report_every: t_end / 100.0,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt_max = dt;
        self
    }

    pub fn with_report_every(mut self, every: f64) -> Self {
        self.report_every = every;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "cfl_safety must lie in (0, 1], got {}",
                self.cfl_safety
            )));
        }
        if !(self.dt_min > 0.0 && self.dt_min < self.dt_max && self.dt_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < dt_min < dt_max, got dt_min = {}, dt_max = {}",
                self.dt_min, self.dt_max
            )));
        }
        if !(self.positivity_floor >= 0.0 && self.positivity_floor.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "positivity_floor must be non-negative, got {}",
                self.positivity_floor
            )));
        }
        if !(self.report_every > 0.0 && self.report_every.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "report_every must be positive, got {}",
                self.report_every
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolverState {
    pub t: f64,
    pub u: PeriodicField,
    pub epsilon: f64,
    /// Size of the step that produced this state (0 for the initial state).
    pub dt: f64,
    pub floor_events: usize,
    pub report: EnergyReport,
}

impl SolverState {
    /// Wraps `u` as-is (no regularizing shift); see [`regularize_initial`].
    pub fn new(u: PeriodicField, epsilon: f64, t: f64) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be non-negative, got {epsilon}"
            )));
        }
        if epsilon > 0.0 {
            check_positive(&u)?;
        }
        let report = energy_report(&u, epsilon, t, 0.0);
        Ok(Self {
            t,
            u,
            epsilon,
            dt: 0.0,
            floor_events: 0,
            report,
        })
    }

    fn advanced(&self, u: PeriodicField, dt: f64, floor_events: usize, t: f64) -> Self {
        let report = energy_report(&u, self.epsilon, t, dt);
        Self {
            t,
            u,
            epsilon: self.epsilon,
            dt,
            floor_events: self.floor_events + floor_events,
            report,
        }
    }
}

/// `u0 + ε^{1/3}` pointwise.
pub fn regularize_initial(u0: &PeriodicField, epsilon: f64) -> Result<PeriodicField> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    check_non_negative(u0)?;
    let shift = epsilon.cbrt();
    Ok(u0.map(|v| v + shift))
}

#[inline]
fn mobility(u: f64, epsilon: f64) -> f64 {
    let u2 = u * u;
    if epsilon == 0.0 {
        u2
    } else {
        u2 * u2 / (epsilon + u2)
    }
}

/// `-u⁴/(ε+u²) diff4(u³)`; at `ε = 0` the mobility is `u²`.
pub fn pde_rhs(u: &PeriodicField, epsilon: f64) -> PeriodicField {
    let w4 = diff4(&u.cubed());
    u.zip_map(&w4, |ui, q| -mobility(ui, epsilon) * q)
}

/// Explicit stability limit `cfl_safety Δ⁴ / (8 κ_max)` with
/// `κ_max = max 3u⁶/(ε+u²)`; infinite for `κ_max = 0`.
pub fn explicit_dt_limit(u: &PeriodicField, epsilon: f64, cfl_safety: f64) -> f64 {
    let kappa = u
        .values()
        .iter()
        .map(|&v| 3.0 * v * v * mobility(v, epsilon))
        .fold(0.0, f64::max);
    if kappa == 0.0 {
        return f64::INFINITY;
    }
    cfl_safety * u.grid().spacing().powi(4) / (8.0 * kappa)
}

/// One RK4 step of size `min(CFL limit, dt_max)`.
pub fn explicit_step(s: &SolverState, opts: &SolverOptions) -> Result<SolverState> {
    explicit_step_capped(s, opts, opts.dt_max)
}

fn explicit_step_capped(s: &SolverState, opts: &SolverOptions, cap: f64) -> Result<SolverState> {
    let limit = explicit_dt_limit(&s.u, s.epsilon, opts.cfl_safety);
    if limit < opts.dt_min {
        return Err(Error::StepSizeUnderflow {
            t: s.t,
            dt: limit,
            dt_min: opts.dt_min,
        });
    }
    let dt = limit.min(opts.dt_max).min(cap);
    let eps = s.epsilon;
    let stage =
        |base: &PeriodicField, k: &PeriodicField, c: f64| base.zip_map(k, |b, ki| b + c * ki);
    let k1 = pde_rhs(&s.u, eps);
    let k2 = pde_rhs(&stage(&s.u, &k1, 0.5 * dt), eps);
    let k3 = pde_rhs(&stage(&s.u, &k2, 0.5 * dt), eps);
    let k4 = pde_rhs(&stage(&s.u, &k3, dt), eps);
    let mut values: Vec<f64> = (0..s.u.len())
        .map(|i| {
            s.u.values()[i]
                + dt / 6.0
                    * (k1.values()[i] + 2.0 * (k2.values()[i] + k3.values()[i]) + k4.values()[i])
        })
        .collect();
    check_finite(&values)?;
    let events = apply_floor(&mut values, eps, opts.positivity_floor)?;
    let u = PeriodicField::new(*s.u.grid(), values)?;
    Ok(s.advanced(u, dt, events, s.t + dt))
}

/// The matrix `I + 3 dt diag(m) D4` for the mobility frozen at `u`.
pub fn semi_implicit_matrix(u: &PeriodicField, epsilon: f64, dt: f64) -> CyclicPentadiagonal {
    let h4 = u.grid().spacing().powi(4);
    let c: Vec<f64> = u
        .values()
        .iter()
        .map(|&v| 3.0 * dt * v * v * mobility(v, epsilon) / h4)
        .collect();
    CyclicPentadiagonal {
        lower2: c.clone(),
        lower1: c.iter().map(|ci| -4.0 * ci).collect(),
        diag: c.iter().map(|ci| 1.0 + 6.0 * ci).collect(),
        upper1: c.iter().map(|ci| -4.0 * ci).collect(),
        upper2: c,
    }
}

/// Solves for `w_new` given the state `u` (so `w_old = u³`).
///
/// Works in increment form `A δ = -3 dt m D4 w_old`, so a constant state
/// yields `δ = 0` exactly. The returned residual is `|A δ - rhs|_inf`, which equals
/// that of `A w_new = w_old` in exact arithmetic but avoids the cancellation of
/// evaluating `A w_old - w_old` in floating point.
pub fn semi_implicit_solve(u: &PeriodicField, epsilon: f64, dt: f64) -> Result<Solution> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    let w_old = u.cubed();
    let a = semi_implicit_matrix(u, epsilon, dt);
    let w4 = diff4(&w_old);
    let rhs: Vec<f64> = u
        .values()
        .iter()
        .zip(w4.values())
        .map(|(&v, &q)| -3.0 * dt * v * v * mobility(v, epsilon) * q)
        .collect();
    let w_scale = w_old.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut sol = a.solve(&rhs, SOLVE_TOL, w_scale)?;
    for (x, w) in sol.x.iter_mut().zip(w_old.values()) {
        *x += w;
    }
    Ok(sol)
}

/// One linearly implicit step of size `dt` in `w = u³`.
pub fn semi_implicit_step(s: &SolverState, dt: f64, opts: &SolverOptions) -> Result<SolverState> {
    let sol = semi_implicit_solve(&s.u, s.epsilon, dt)?;
    let mut values: Vec<f64> = sol.x.iter().map(|w| w.cbrt()).collect();
    check_finite(&values)?;
    let events = apply_floor(&mut values, s.epsilon, opts.positivity_floor)?;
    let u = PeriodicField::new(*s.u.grid(), values)?;
    Ok(s.advanced(u, dt, events, s.t + dt))
}

/// Result of [`evolve`]: states and reports at every report time.
#[derive(Debug, Clone)]
pub struct Evolution {
    pub states: Vec<SolverState>,
    pub reports: Vec<EnergyReport>,
    /// `energy_monotone[k]`: `E(t_k) <= E(t_{k-1}) + 1e-8 (1 + E(t_{k-1}))`; always true at `k = 0`.
    pub energy_monotone: Vec<bool>,
    pub steps: usize,
}

impl Evolution {
    pub fn last(&self) -> &SolverState {
        self.states
            .last()
            .expect("evolution has at least the initial state")
    }

    pub fn floor_events(&self) -> usize {
        self.last().floor_events
    }

    pub fn min_u(&self) -> f64 {
        self.reports
            .iter()
            .map(|r| r.u_min)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Evolves `u0` to `t_end`, regularizing the datum first when `ε > 0`.
pub fn evolve(
    u0: &PeriodicField,
    epsilon: f64,
    t_end: f64,
    opts: &SolverOptions,
) -> Result<Evolution> {
    evolve_until(u0, epsilon, t_end, opts, |_| false)
}

/// Like [`evolve`], but stops at the first report time where `stop(state)` holds.
pub fn evolve_until(
    u0: &PeriodicField,
    epsilon: f64,
    t_end: f64,
    opts: &SolverOptions,
    mut stop: impl FnMut(&SolverState) -> bool,
) -> Result<Evolution> {
    opts.validate()?;
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "t_end must be positive, got {t_end}"
        )));
    }
    check_non_negative(u0)?;
    let start = if epsilon > 0.0 {
        regularize_initial(u0, epsilon)?
    } else {
        u0.clone()
    };
    let mut state = SolverState::new(start, epsilon, 0.0)?;
    let mut out = Evolution {
        reports: vec![state.report],
        states: vec![state.clone()],
        energy_monotone: vec![true],
        steps: 0,
    };
    let mut k = 1usize;
    loop {
        if stop(&state) {
            break;
        }
        let target = (k as f64 * opts.report_every).min(t_end);
        while state.t < target {
            let remaining = target - state.t;
            let mut next = match opts.scheme {
                Scheme::ExplicitRk4 => explicit_step_capped(&state, opts, remaining),
                Scheme::SemiImplicit => {
                    semi_implicit_step(&state, opts.dt_max.min(remaining), opts)
                }
            }
            .map_err(|e| e.at(state.t))?;
            out.steps += 1;
            // land exactly on the report time despite rounding in t + dt
            if target - next.t <= 1e-12 * target {
                next.t = target;
                next.report.t = target;
            }
            state = next;
        }
        let prev = out.reports.last().expect("initial report").e;
        out.energy_monotone
            .push(state.report.e <= prev + ENERGY_MONOTONE_TOL * (1.0 + prev));
        out.reports.push(state.report);
        out.states.push(state.clone());
        if target >= t_end {
            break;
        }
        k += 1;
    }
    Ok(out)
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { what: "u", index }),
        None => Ok(()),
    }
}

fn check_non_negative(u: &PeriodicField) -> Result<()> {
    match u.values().iter().enumerate().find(|(_, v)| **v < 0.0) {
        Some((index, &value)) => Err(Error::Negative { index, value }),
        None => Ok(()),
    }
}

fn check_positive(u: &PeriodicField) -> Result<()> {
    match u.values().iter().enumerate().find(|(_, v)| **v <= 0.0) {
        Some((index, &value)) => Err(Error::NonPositive {
            what: "regularized slope",
            index,
            value,
        }),
        None => Ok(()),
    }
}

/// Degenerate runs clamp to the floor and count; regularized runs must stay positive.
fn apply_floor(values: &mut [f64], epsilon: f64, floor: f64) -> Result<usize> {
    if epsilon > 0.0 {
        return match values.iter().position(|v| *v <= 0.0) {
            Some(index) => Err(Error::PositivityLost {
                index,
                value: values[index],
            }),
            None => Ok(0),
        };
    }
    let mut events = 0;
    for v in values.iter_mut() {
        if *v < floor {
            *v = floor;
            events += 1;
        }
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::grid::PeriodicGrid;

    fn sine_cubed(n: usize, amp: f64) -> PeriodicField {
        PeriodicField::from_fn(PeriodicGrid::unit(n).unwrap(), |h| {
            (1.0 + amp * (2.0 * PI * h).sin()).cbrt()
        })
        .unwrap()
    }

    #[test]
    fn regularization_shift() {
        let g = PeriodicGrid::unit(16).unwrap();
        let z = PeriodicField::constant(g, 0.0).unwrap();
        let r = regularize_initial(&z, 1e-3).unwrap();
        assert!(r.values().iter().all(|v| (v - 0.1).abs() < 1e-15));
        let one = PeriodicField::constant(g, 1.0).unwrap();
        let r = regularize_initial(&one, 0.008).unwrap();
        assert!(r.values().iter().all(|v| (v - 1.2).abs() < 1e-15));
        let neg = PeriodicField::from_fn(g, |h| h - 0.5).unwrap();
        assert!(matches!(
            regularize_initial(&neg, 1e-3),
            Err(Error::Negative { .. })
        ));
    }

    #[test]
    fn rhs_values() {
        let g = PeriodicGrid::unit(32).unwrap();
        let c = PeriodicField::constant(g, 1.7).unwrap();
        assert!(pde_rhs(&c, 1e-3).values().iter().all(|&v| v == 0.0));

        let u = sine_cubed(256, 0.1);
        let r = pde_rhs(&u, 0.0);
        // node 64 sits at h = 0.25
        let expected = -(1.1f64).powf(2.0 / 3.0) * 0.1 * (2.0 * PI).powi(4);
        assert!((r.values()[64] - expected).abs() / expected.abs() < 1e-3);

        let w4 = diff4(&u.cubed());
        for i in 0..256 {
            let v = u.values()[i];
            assert_eq!(r.values()[i], -(v * v) * w4.values()[i]);
        }
    }

    #[test]
    fn cfl_formula() {
        let g = PeriodicGrid::unit(64).unwrap();
        // κ = 3u⁶/(ε+u²) = 3 at u = 1, ε = 0
        let u = PeriodicField::constant(g, 1.0).unwrap();
        let dt = explicit_dt_limit(&u, 0.0, 0.4);
        assert!((dt - 0.4 / (8.0 * 3.0 * 64f64.powi(4))).abs() < 1e-24);
        assert!((dt - 9.934e-10).abs() < 1e-13);
    }

    #[test]
    fn constants_are_fixed_points() {
        let g = PeriodicGrid::unit(32).unwrap();
        let opts = SolverOptions::for_horizon(1.0);
        let u = PeriodicField::constant(g, 1.3).unwrap();
        let s = SolverState::new(u.clone(), 1e-3, 0.0).unwrap();
        let e = explicit_step(&s, &opts).unwrap();
        assert_eq!(e.u, u);
        assert!(e.t > 0.0);
        let i = semi_implicit_step(&s, 0.1, &opts).unwrap();
        assert_eq!(i.u.max_abs_diff(&u), 0.0);
    }

    #[test]
    fn explicit_step_is_fourth_order() {
        // a high mode, so the truncation error stands above roundoff at the CFL step
        let u = PeriodicField::from_fn(PeriodicGrid::unit(32).unwrap(), |h| {
            (1.0 + 0.1 * (16.0 * PI * h).sin()).cbrt()
        })
        .unwrap();
        let s = SolverState::new(u, 0.0, 0.0).unwrap();
        let dt = explicit_dt_limit(&s.u, 0.0, 0.4);
        let step = |h: f64, k: usize| {
            let opts = SolverOptions {
                dt_max: h,
                ..SolverOptions::for_horizon(1.0)
            };
            let mut st = s.clone();
            for _ in 0..k {
                st = explicit_step(&st, &opts).unwrap();
            }
            st.u
        };
        let e1 = step(dt, 1).max_abs_diff(&step(dt / 2.0, 2));
        let e2 = step(dt / 2.0, 2).max_abs_diff(&step(dt / 4.0, 4));
        let ratio = e1 / e2;
        assert!(ratio > 10.0, "ratio {ratio} {e1:e} {e2:e}");
    }

    #[test]
    fn semi_implicit_solve_contract() {
        let u = sine_cubed(64, 0.3);
        let w = u.cubed();
        let dt = 1e-4;
        let sol = semi_implicit_solve(&u, 1e-3, dt).unwrap();
        assert!(sol.residual <= 1e-12 * w.max(), "residual {}", sol.residual);
        let a = semi_implicit_matrix(&u, 1e-3, dt);
        let norm_a = a.diag.iter().map(|d| 2.0 * d - 2.0).fold(0.0, f64::max);
        let res = a
            .apply(&sol.x)
            .iter()
            .zip(w.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(res <= 1e-14 * norm_a * w.max(), "residual {res}");
        let s = SolverState::new(u, 1e-3, 0.0).unwrap();
        let next = semi_implicit_step(&s, dt, &SolverOptions::for_horizon(1.0)).unwrap();
        assert!(next.report.e <= s.report.e);
    }

    #[test]
    fn schemes_agree_at_small_dt() {
        let u = sine_cubed(32, 0.1);
        let s = SolverState::new(u, 1e-3, 0.0).unwrap();
        let opts = SolverOptions::for_horizon(1.0);
        let dt = explicit_dt_limit(&s.u, 1e-3, 0.4);
        let ex = explicit_step(
            &SolverState { ..s.clone() },
            &SolverOptions { dt_max: dt, ..opts },
        )
        .unwrap();
        let diff = |h: f64| {
            let a = explicit_step(&s, &SolverOptions { dt_max: h, ..opts }).unwrap();
            let b = semi_implicit_step(&s, h, &opts).unwrap();
            a.u.max_abs_diff(&b.u)
        };
        assert!(ex.t > 0.0);
        let ratio = diff(dt) / diff(dt / 2.0);
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn evolve_constant_one() {
        let g = PeriodicGrid::unit(16).unwrap();
        let u = PeriodicField::constant(g, 1.0).unwrap();
        let ev = evolve(&u, 0.0, 1e-3, &SolverOptions::for_horizon(1e-3)).unwrap();
        assert_eq!(ev.reports.len(), 101);
        for r in &ev.reports {
            assert_eq!(r.e, 0.0);
            assert_eq!(r.f, 0.5);
        }
        assert_eq!(ev.last().t, 1e-3);
    }

    #[test]
    fn evolve_decreases_energy_and_conserves() {
        let u = sine_cubed(64, 0.1);
        let opts = SolverOptions::for_horizon(1e-3).with_dt(1e-7);
        let ev = evolve(&u, 1e-4, 1e-3, &opts).unwrap();
        assert!(ev.reports.windows(2).all(|w| w[1].e < w[0].e));
        assert!(ev.energy_monotone.iter().all(|&b| b));
        let m0 = ev.reports[0].m_reg;
        let drift = ev
            .reports
            .iter()
            .map(|r| ((r.m_reg - m0) / m0).abs())
            .fold(0.0, f64::max);
        assert!(drift < 1e-6, "drift {drift}");
        assert_eq!(ev.floor_events(), 0);
    }

    #[test]
    fn underflow_reports_its_time() {
        let u = sine_cubed(32, 0.1);
        let opts = SolverOptions {
            scheme: Scheme::ExplicitRk4,
            dt_min: 1e-3,
            dt_max: 1e-2,
            ..SolverOptions::for_horizon(1.0)
        };
        let err = evolve(&u, 0.0, 1.0, &opts).unwrap_err();
        assert!(matches!(err, Error::StepSizeUnderflow { t, .. } if t == 0.0));
        assert!(err.is_numerical());
    }

    #[test]
    fn invalid_options_rejected() {
        let mut o = SolverOptions::for_horizon(1.0);
        o.cfl_safety = 1.5;
        assert!(o.validate().is_err());
        let mut o = SolverOptions::for_horizon(1.0);
        o.dt_min = 1.0;
        assert!(o.validate().is_err());
    }
}
