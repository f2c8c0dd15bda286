//! Discrete step dynamics for one period of a monotone step train.
//!
//! `N` steps of height `a = 1/N` sit at positions `x_1 < ... < x_N` in a period
//! of length `L`, with `x_{i+N} = x_i + L`. Terrace `i` lies between step `i`
//! and step `i+1`; the wrap-around terrace is the last one. The interaction
//! energy is `F_N = 1/2 sum a^3 / w_i^2` and the chemical potential is its first
//! variation scaled by `1/a`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{self, AdaptiveControls, Candidate};

/// Collision floor as a fraction of the period length.
pub const COLLISION_FLOOR: f64 = 1e-8;

/// Relative tolerance on per-step energy increase, `tol = ENERGY_TOL * (1 + |F_N|)`.
pub const ENERGY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepConfiguration {
    period: f64,
    positions: Vec<f64>,
}

impl StepConfiguration {
    pub fn new(period: f64, positions: Vec<f64>) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidSteps(format!(
                "period {period} must be positive"
            )));
        }
        if positions.len() < 2 {
            return Err(Error::InvalidSteps("need at least two steps".into()));
        }
        if let Some(index) = positions.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                what: "step positions",
                index,
            });
        }
        let c = Self { period, positions };
        if let Some((i, w)) = c
            .terrace_widths()
            .into_iter()
            .enumerate()
            .find(|(_, w)| *w <= 0.0)
        {
            return Err(Error::InvalidSteps(format!(
                "steps out of order: terrace {i} has width {w}"
            )));
        }
        Ok(c)
    }

    /// Equally spaced train `x_i = x0 + i L / N`.
    pub fn uniform(n: usize, period: f64, x0: f64) -> Result<Self> {
        let w = period / n as f64;
        Self::new(period, (0..n).map(|i| x0 + i as f64 * w).collect())
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn step_height(&self) -> f64 {
        1.0 / self.len() as f64
    }

    /// Widths `x_{i+1} - x_i`, the last one wrapping to `x_1 + L - x_N`.
    pub fn terrace_widths(&self) -> Vec<f64> {
        terrace_widths_of(&self.positions, self.period)
    }

    /// Shifts every step by `dx` without re-wrapping.
    pub fn translated(&self, dx: f64) -> Self {
        Self {
            period: self.period,
            positions: self.positions.iter().map(|x| x + dx).collect(),
        }
    }

    /// Maps positions into `[0, L)` and relabels so they stay increasing.
    pub fn canonical(&self) -> Self {
        let l = self.period;
        let mut wrapped: Vec<f64> = self.positions.iter().map(|x| x.rem_euclid(l)).collect();
        let start = (0..wrapped.len())
            .min_by(|&i, &j| wrapped[i].total_cmp(&wrapped[j]))
            .unwrap_or(0);
        wrapped.rotate_left(start);
        Self {
            period: l,
            positions: wrapped,
        }
    }

    pub fn position_sum(&self) -> f64 {
        self.positions.iter().sum()
    }
}

fn terrace_widths_of(x: &[f64], period: f64) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            if i + 1 < n {
                x[i + 1] - x[i]
            } else {
                x[0] + period - x[n - 1]
            }
        })
        .collect()
}

pub fn terrace_widths(c: &StepConfiguration) -> Vec<f64> {
    c.terrace_widths()
}

pub fn step_energy(c: &StepConfiguration) -> f64 {
    energy_from_widths(&c.terrace_widths(), c.step_height())
}

fn energy_from_widths(widths: &[f64], a: f64) -> f64 {
    let a3 = a * a * a;
    0.5 * widths.iter().map(|w| a3 / (w * w)).sum::<f64>()
}

/// `mu_i = a^2 / w_i^3 - a^2 / w_{i-1}^3` with periodic indexing.
pub fn chemical_potential(c: &StepConfiguration) -> Vec<f64> {
    potential_from_widths(&c.terrace_widths(), c.step_height())
}

fn potential_from_widths(w: &[f64], a: f64) -> Vec<f64> {
    let n = w.len();
    let a2 = a * a;
    (0..n)
        .map(|i| {
            let prev = w[(i + n - 1) % n];
            a2 / (w[i] * w[i] * w[i]) - a2 / (prev * prev * prev)
        })
        .collect()
}

/// Step velocity law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityLaw {
    /// Attachment-detachment limited: `x_i' = (mu_{i+1} - 2 mu_i + mu_{i-1}) / a^2`.
    Adl,
    /// Diffusion limited with unit `D/k`: potential differences weighted by `1/w`.
    Dl,
    /// General law with `D/k = dk`; tends to ADL as `dk -> inf`.
    Bcf { dk: f64 },
}

pub fn velocities(c: &StepConfiguration, law: VelocityLaw) -> Vec<f64> {
    velocities_from(c.positions(), c.period(), law)
}

fn velocities_from(x: &[f64], period: f64, law: VelocityLaw) -> Vec<f64> {
    let n = x.len();
    let a = 1.0 / n as f64;
    let w = terrace_widths_of(x, period);
    let mu = potential_from_widths(&w, a);
    // flux across terrace i, from step i+1 to step i
    let flux: Vec<f64> = (0..n)
        .map(|i| {
            let dmu = mu[(i + 1) % n] - mu[i];
            match law {
                VelocityLaw::Adl => dmu / (a * a),
                VelocityLaw::Dl => dmu / (w[i] * a * a),
                VelocityLaw::Bcf { dk } => dk / (a * a) * dmu / (w[i] + dk),
            }
        })
        .collect();
    (0..n).map(|i| flux[i] - flux[(i + n - 1) % n]).collect()
}

/// Step slopes `u_i = a / w_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeVector {
    values: Vec<f64>,
}

impl SlopeVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidSteps("need at least two slopes".into()));
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::NonPositive {
                what: "slope",
                index,
                value,
            });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn step_height(&self) -> f64 {
        1.0 / self.values.len() as f64
    }

    /// Period length implied by the slopes, `sum a / u_i`.
    pub fn period(&self) -> f64 {
        let a = self.step_height();
        self.values.iter().map(|u| a / u).sum()
    }
}

pub fn to_slopes(c: &StepConfiguration) -> SlopeVector {
    let a = c.step_height();
    SlopeVector {
        values: c.terrace_widths().iter().map(|w| a / w).collect(),
    }
}

pub fn from_slopes(s: &SlopeVector, x1: f64) -> Result<StepConfiguration> {
    let a = s.step_height();
    let n = s.values.len();
    let mut positions = Vec::with_capacity(n);
    let mut x = x1;
    for u in &s.values[..n - 1] {
        positions.push(x);
        x += a / u;
    }
    positions.push(x);
    StepConfiguration::new(s.period(), positions)
}

/// Right-hand side of the slope ODE,
/// `u_i' = -(1/a^4) u_i^2 (u^3_{i+2} - 4 u^3_{i+1} + 6 u^3_i - 4 u^3_{i-1} + u^3_{i-2})`.
pub fn slope_rhs(s: &SlopeVector) -> Vec<f64> {
    slope_rhs_raw(&s.values)
}

fn slope_rhs_raw(u: &[f64]) -> Vec<f64> {
    let n = u.len();
    let a = 1.0 / n as f64;
    let inv_a4 = 1.0 / (a * a * a * a);
    let w: Vec<f64> = u.iter().map(|v| v * v * v).collect();
    let at = |i: isize| w[i.rem_euclid(n as isize) as usize];
    (0..n as isize)
        .map(|i| {
            let c = at(i);
            let outer = (at(i - 2) - c) + (at(i + 2) - c);
            let inner = (at(i - 1) - c) + (at(i + 1) - c);
            let ui = u[i as usize];
            -inv_a4 * ui * ui * (outer - 4.0 * inner)
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct StepControls {
    pub rtol: f64,
    pub atol: f64,
    /// Defaults to `1e-12 * a^4`.
    pub dt_min: Option<f64>,
    pub dt_max: Option<f64>,
    pub max_steps: usize,
    /// Record a state only when at least this much time has passed since the last record.
    /// `None` records every accepted step.
    pub record_interval: Option<f64>,
}

impl Default for StepControls {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-13,
            dt_min: None,
            dt_max: None,
            max_steps: 5_000_000,
            record_interval: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<StepConfiguration>,
    pub energy_series: Vec<f64>,
    /// Candidates rejected because the energy rose above tolerance.
    pub energy_rejections: usize,
    pub accepted_steps: usize,
}

impl StepTrajectory {
    pub fn last(&self) -> &StepConfiguration {
        self.states
            .last()
            .expect("trajectory holds the initial state")
    }

    /// Largest per-step increase of `F_N` relative to `1 + |F_N|` over recorded states.
    pub fn max_energy_increase(&self) -> f64 {
        self.energy_series
            .windows(2)
            .map(|w| (w[1] - w[0]) / (1.0 + w[0].abs()))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Adaptive RK4 integration of the step positions.
pub fn integrate_steps(
    c0: &StepConfiguration,
    law: VelocityLaw,
    t_end: f64,
    controls: &StepControls,
) -> Result<StepTrajectory> {
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "t_end {t_end} must be positive"
        )));
    }
    if let VelocityLaw::Bcf { dk } = law {
        if !(dk.is_finite() && dk > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "D/k = {dk} must be positive"
            )));
        }
    }
    let period = c0.period();
    let a = c0.step_height();
    let a4 = a * a * a * a;
    let mu_max = chemical_potential(c0)
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    let floor = COLLISION_FLOOR * period;
    let ode_controls = AdaptiveControls {
        rtol: controls.rtol,
        atol: controls.atol * period,
        dt_initial: 0.1 * a4 / mu_max.max(1.0),
        dt_min: controls.dt_min.unwrap_or(1e-12 * a4),
        dt_max: controls.dt_max.unwrap_or(f64::INFINITY),
        max_steps: controls.max_steps,
    };

    let mut traj = StepTrajectory {
        times: Vec::new(),
        states: Vec::new(),
        energy_series: Vec::new(),
        energy_rejections: 0,
        accepted_steps: 0,
    };
    let mut energy_rejections = 0;
    let mut last_recorded = f64::NEG_INFINITY;

    let result = ode::integrate(
        c0.positions().to_vec(),
        0.0,
        t_end,
        &ode_controls,
        |_, x| Ok(velocities_from(x, period, law)),
        |t, x_old, x_new| {
            if let Some(index) = x_new.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    what: "step positions",
                    index,
                });
            }
            let w_new = terrace_widths_of(x_new, period);
            let min_w = w_new.iter().copied().fold(f64::INFINITY, f64::min);
            if min_w < floor {
                return Err(Error::CollisionDetected {
                    t,
                    min_width: min_w,
                    floor,
                });
            }
            let f_old = energy_from_widths(&terrace_widths_of(x_old, period), a);
            let f_new = energy_from_widths(&w_new, a);
            if f_new - f_old > ENERGY_TOL * (1.0 + f_old.abs()) {
                energy_rejections += 1;
                return Ok(Candidate::Retry);
            }
            Ok(Candidate::Accept)
        },
        |t, x| {
            let is_end = t >= t_end;
            let due = controls
                .record_interval
                .is_none_or(|dt| t - last_recorded >= dt);
            if due || is_end || traj.times.is_empty() {
                last_recorded = t;
                traj.times.push(t);
                traj.energy_series
                    .push(energy_from_widths(&terrace_widths_of(x, period), a));
                traj.states.push(StepConfiguration {
                    period,
                    positions: x.to_vec(),
                });
            }
        },
    );
    let (_, stats) = result?;
    traj.accepted_steps = stats.accepted;
    traj.energy_rejections = energy_rejections;
    Ok(traj)
}

/// Adaptive RK4 integration of the slope ODE; returns the slopes at `t_end`.
pub fn evolve_slopes(s0: &SlopeVector, t_end: f64, controls: &StepControls) -> Result<SlopeVector> {
    let a = s0.step_height();
    let a4 = a * a * a * a;
    let u_max = s0.values.iter().copied().fold(0.0_f64, f64::max);
    // stiffness of the linearised operator is about 48 u^4 / a^4
    let lambda = 48.0 * u_max.powi(4) / a4;
    let ode_controls = AdaptiveControls {
        rtol: controls.rtol,
        atol: controls.atol,
        dt_initial: 1.0 / lambda,
        dt_min: controls.dt_min.unwrap_or(1e-12 * a4),
        dt_max: controls.dt_max.unwrap_or(f64::INFINITY),
        max_steps: controls.max_steps,
    };
    let (u, _) = ode::integrate(
        s0.values.clone(),
        0.0,
        t_end,
        &ode_controls,
        |_, u| Ok(slope_rhs_raw(u)),
        |_, _, u_new| {
            Ok(if u_new.iter().all(|v| v.is_finite() && *v > 0.0) {
                Candidate::Accept
            } else {
                Candidate::Retry
            })
        },
        |_, _| {},
    )?;
    SlopeVector::new(u)
}
