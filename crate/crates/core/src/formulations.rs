//! Four equivalent descriptions of a monotone surface and their evolution laws.
//!
//! For a surface of period `L` in position and period `1` in height:
//!
//! * `u(α)` slope as a function of height (the continuum variable),
//! * `φ(α)` position of the level `α`, with `φ(α+1) = φ(α) + L`,
//! * `h(x)` height at position `x`, with `h(x+L) = h(x) + 1`,
//! * `ρ(x) = h_x(x)` slope as a function of position,
//!
//! related by `α = h(φ(α))` and `u(α) = ρ(φ(α)) = h_x(φ(α)) = 1/φ_α(α)`.
//!
//! Evolution laws (integration constants fixed to zero):
//!
//! ```text
//! h_t = -3/2 ((h_x²)_xx / h_x)_x
//! ρ_t = -3/2 ((ρ²)_xx / ρ)_xx
//! φ_t = (1/φ_α³)_ααα
//! ```

use crate::continuum::{pde_rhs, SolverOptions};
use crate::error::{Error, Result};
use crate::grid::{
    diff1, diff2, integrate, interpolate_linear, PeriodicField, PeriodicGrid, WindingField,
};
use crate::ode::rk4_step;

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceBundle {
    pub u: PeriodicField,
    pub phi: WindingField,
    pub h: WindingField,
    pub rho: PeriodicField,
}

impl SurfaceBundle {
    /// Position period `L = ∫ 1/u`.
    pub fn period(&self) -> f64 {
        self.phi.winding()
    }
}

/// Builds all four profiles from `u`, with `φ(0) = x_anchor`.
///
/// `φ` is the cumulative trapezoid integral of `1/u`; `h` is obtained by
/// monotone cubic (Fritsch-Carlson) inversion of `φ` onto a position grid
/// with the same number of nodes, and `ρ(x) = u(h(x))`.
pub fn slope_to_bundle(u: &PeriodicField, x_anchor: f64) -> Result<SurfaceBundle> {
    if let Some((index, &value)) = u.values().iter().enumerate().find(|(_, v)| **v <= 0.0) {
        return Err(Error::NonPositive {
            what: "slope",
            index,
            value,
        });
    }
    let g = *u.grid();
    let n = g.n();
    let da = g.spacing();
    let inv: Vec<f64> = u.values().iter().map(|v| 1.0 / v).collect();
    let big_l = integrate(&u.map(|v| 1.0 / v));

    let mut phi_vals = Vec::with_capacity(n);
    let mut acc = x_anchor;
    for i in 0..n {
        phi_vals.push(acc);
        acc += 0.5 * da * (inv[i] + inv[(i + 1) % n]);
    }
    let phi = WindingField::from_values(g, &phi_vals, big_l)?;

    // α as a monotone function of x, over a few periods around the base period
    const PAD: isize = 3;
    let (xs, alphas): (Vec<f64>, Vec<f64>) = (-PAD..n as isize + PAD)
        .map(|i| (phi.at(i), i as f64 * da))
        .unzip();
    let inverse = Pchip::new(xs, alphas)?;

    let xg = PeriodicGrid::new(n, big_l)?;
    let h_vals: Vec<f64> = xg
        .nodes()
        .map(|x| {
            let k = ((x - x_anchor) / big_l).floor();
            inverse.eval(x - k * big_l) + k
        })
        .collect();
    let h = WindingField::from_values(xg, &h_vals, 1.0)?;
    let rho = PeriodicField::new(
        xg,
        h_vals.iter().map(|&a| interpolate_linear(u, a)).collect(),
    )?;
    Ok(SurfaceBundle {
        u: u.clone(),
        phi,
        h,
        rho,
    })
}

/// `u = 1/φ_α` by central differencing of the winding field.
pub fn bundle_to_slope(b: &SurfaceBundle) -> PeriodicField {
    b.phi.diff1().map(|d| 1.0 / d)
}

/// Input of [`formulation_rhs`].
#[derive(Debug, Clone, PartialEq)]
pub enum FormulationField {
    Height(WindingField),
    Rho(PeriodicField),
    Phi(WindingField),
}

impl FormulationField {
    pub fn name(&self) -> &'static str {
        match self {
            FormulationField::Height(_) => "height",
            FormulationField::Rho(_) => "rho",
            FormulationField::Phi(_) => "phi",
        }
    }
}

/// Time derivative of the field (of its periodic part, for winding fields).
pub fn formulation_rhs(field: &FormulationField) -> Result<PeriodicField> {
    match field {
        FormulationField::Height(h) => {
            let hx = positive(h.diff1(), "h_x")?;
            let q = diff2(&hx.map(|v| v * v));
            Ok(diff1(&q.zip_map(&hx, |a, b| a / b)).map(|v| -1.5 * v))
        }
        FormulationField::Rho(rho) => {
            let rho = positive(rho.clone(), "rho")?;
            let q = diff2(&rho.map(|v| v * v));
            Ok(diff2(&q.zip_map(&rho, |a, b| a / b)).map(|v| -1.5 * v))
        }
        FormulationField::Phi(phi) => {
            let pa = positive(phi.diff1(), "phi_alpha")?;
            Ok(diff1(&diff2(&pa.map(|v| 1.0 / (v * v * v)))))
        }
    }
}

fn positive(f: PeriodicField, what: &'static str) -> Result<PeriodicField> {
    match f.values().iter().enumerate().find(|(_, v)| v.is_nan() || **v <= 0.0) {
        Some((index, &value)) => Err(Error::NonPositive { what, index, value }),
        None => Ok(f),
    }
}

/// Pairwise discrepancies and conserved-mean drifts of a side-by-side run.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CrossCheckReport {
    pub n: usize,
    pub t_end: f64,
    pub dt: f64,
    pub steps: usize,
    /// `|u_u(T) - 1/φ_α(T)|_inf` between the slope and position-of-height runs.
    pub u_phi_discrepancy: f64,
    /// `|h_x(T) - ρ(T)|_inf` between the height and slope-of-position runs.
    pub h_rho_discrepancy: f64,
    pub phi_mean_drift: f64,
    pub h_mean_drift: f64,
    pub rho_mean_drift: f64,
}

/// Shared explicit step: `cfl_safety * 2 / λ_max` over the four discrete operators.
pub fn shared_dt(b: &SurfaceBundle, cfl_safety: f64) -> f64 {
    let da4 = b.u.grid().spacing().powi(4);
    let dx4 = b.rho.grid().spacing().powi(4);
    let umax4 = b.u.max().powi(4);
    // symbol maxima: D4 -> 16, D1 D2 D1 -> 64/27
    let lam_u = 3.0 * umax4 * 16.0 / da4;
    let lam_phi = 3.0 * umax4 * (64.0 / 27.0) / da4;
    // the h- and ρ-equations linearize to -3 ∂⁴ whatever the background slope
    let lam_h = 3.0 * (64.0 / 27.0) / dx4;
    let lam_rho = 3.0 * 16.0 / dx4;
    let lam = lam_u.max(lam_phi).max(lam_h).max(lam_rho);
    cfl_safety * 2.0 / lam
}

/// Evolves the slope equation (`ε = 0`) and the φ-, h- and ρ-equations from a
/// consistent bundle with classical RK4 at a shared fixed step, then compares.
/// Only `opts.cfl_safety` is used.
pub fn cross_check_evolution(
    u0: &PeriodicField,
    t_end: f64,
    opts: &SolverOptions,
) -> Result<CrossCheckReport> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "t_end must be positive, got {t_end}"
        )));
    }
    let b = slope_to_bundle(u0, 0.0)?;
    let dt_cfl = shared_dt(&b, opts.cfl_safety);
    let steps = (t_end / dt_cfl).ceil().max(1.0) as usize;
    let dt = t_end / steps as f64;

    let tag = |formulation: &'static str| {
        move |e: Error| Error::Formulation {
            formulation,
            source: Box::new(e),
        }
    };

    let ag = *b.u.grid();
    let xg = *b.rho.grid();
    let big_l = b.period();

    let u_t = run_fixed(b.u.values().to_vec(), dt, steps, |y| {
        let u = PeriodicField::new(ag, y.to_vec())?;
        Ok(pde_rhs(&u, 0.0).into_values())
    })
    .map_err(tag("slope"))?;
    let phi_t = run_fixed(b.phi.periodic_part().to_vec(), dt, steps, |y| {
        let phi = WindingField::from_periodic(ag, y.to_vec(), big_l)?;
        Ok(formulation_rhs(&FormulationField::Phi(phi))?.into_values())
    })
    .map_err(tag("phi"))?;
    let h_t = run_fixed(b.h.periodic_part().to_vec(), dt, steps, |y| {
        let h = WindingField::from_periodic(xg, y.to_vec(), 1.0)?;
        Ok(formulation_rhs(&FormulationField::Height(h))?.into_values())
    })
    .map_err(tag("height"))?;
    let rho_t = run_fixed(b.rho.values().to_vec(), dt, steps, |y| {
        let rho = PeriodicField::new(xg, y.to_vec())?;
        Ok(formulation_rhs(&FormulationField::Rho(rho))?.into_values())
    })
    .map_err(tag("rho"))?;

    let u_end = PeriodicField::new(ag, u_t)?;
    let phi_end = WindingField::from_periodic(ag, phi_t, big_l)?;
    let h_end = WindingField::from_periodic(xg, h_t, 1.0)?;
    let rho_end = PeriodicField::new(xg, rho_t)?;

    let u_from_phi = phi_end.diff1().map(|d| 1.0 / d);
    let drift = |a: f64, b: f64, scale: f64| (b - a).abs() / a.abs().max(scale);
    Ok(CrossCheckReport {
        n: ag.n(),
        t_end,
        dt,
        steps,
        u_phi_discrepancy: u_end.max_abs_diff(&u_from_phi),
        h_rho_discrepancy: h_end.diff1().max_abs_diff(&rho_end),
        phi_mean_drift: drift(b.phi.integrate(), phi_end.integrate(), big_l),
        h_mean_drift: drift(b.h.integrate(), h_end.integrate(), 1.0),
        rho_mean_drift: drift(integrate(&b.rho), integrate(&rho_end), 1.0),
    })
}

fn run_fixed(
    y0: Vec<f64>,
    dt: f64,
    steps: usize,
    mut rhs: impl FnMut(&[f64]) -> Result<Vec<f64>>,
) -> Result<Vec<f64>> {
    let mut f = |_: f64, y: &[f64]| rhs(y);
    let mut y = y0;
    for k in 0..steps {
        y = rk4_step(&mut f, k as f64 * dt, &y, dt)?;
        if let Some(index) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "state",
                index,
            }
            .at(k as f64 * dt));
        }
    }
    Ok(y)
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes).
#[derive(Debug, Clone)]
pub struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
}

impl Pchip {
    /// `xs` strictly increasing, at least two points.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return Err(Error::InsufficientData {
                needed: 2,
                got: n.min(ys.len()),
            });
        }
        if xs.windows(2).any(|w| w[1].is_nan() || w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "interpolation nodes must increase strictly".into(),
            ));
        }
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
        let mut ds = vec![0.0; n];
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] > 0.0 {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                ds[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        ds[0] = end_slope(
            h[0],
            h.get(1).copied().unwrap_or(h[0]),
            delta[0],
            *delta.get(1).unwrap_or(&delta[0]),
        );
        ds[n - 1] = end_slope(
            h[n - 2],
            if n > 2 { h[n - 3] } else { h[n - 2] },
            delta[n - 2],
            if n > 2 { delta[n - 3] } else { delta[n - 2] },
        );
        Ok(Self { xs, ys, ds })
    }

    /// Value at `x`; clamps to the end intervals outside the node range.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let i = match self.xs.partition_point(|&xi| xi <= x) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i] + h10 * h * self.ds[i] + h01 * self.ys[i + 1] + h11 * h * self.ds[i + 1]
    }
}

/// Shape-preserving three-point end slope.
fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}
