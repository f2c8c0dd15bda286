//! Energies, dissipation rates and the analytical bounds of the slope
//! equation, evaluated as diagnostics on discrete fields.
//!
//! With `w = u^3` on the unit height period:
//!
//! ```text
//! F     = 1/2 ∫ u²                      (step free energy)
//! E     = 1/6 ∫ (w_hh)²                 (dissipation-rate energy)
//! D     = ∫ (u² w_hhhh)²                (dissipation of E at ε = 0)
//! D_ε   = ∫ u⁶/(ε+u²) (w_hhhh)²         (dissipation of E for the regularized flow)
//! F_ε   = ∫ ε ln|u| + F
//! m     = ∫ 1/u
//! m_reg = ∫ ε/(3u³) + 1/u
//! ```
//!
//! All integrals use the periodic rectangle rule and all derivatives the
//! central periodic stencils of [`crate::grid`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{diff2, diff4, integrate, PeriodicField};

/// Absolute slack of a [`BoundVerdict`], scaled by `1 + |rhs|`.
pub const VERDICT_SLACK: f64 = 1e-12;

/// One time-stamped row of diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub t: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "F_eps")]
    pub f_eps: f64,
    pub m: f64,
    pub m_reg: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub dt: f64,
    /// Regularized dissipation `D_ε`; not part of the series file columns.
    #[serde(skip)]
    pub d_eps: f64,
}

/// Outcome of comparing a measured quantity against an analytical bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundVerdict {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
    pub margin: f64,
}

impl BoundVerdict {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        let satisfied = lhs <= rhs + VERDICT_SLACK * (1.0 + rhs.abs());
        Self {
            name: name.into(),
            lhs,
            rhs,
            satisfied,
            margin: rhs - lhs,
        }
    }
}

/// `E = (1/6) ∫ (w_hh)²` with `w = u³`.
pub fn dissipation_energy(u: &PeriodicField) -> f64 {
    let w2 = diff2(&u.cubed());
    integrate(&w2.map(|v| v * v)) / 6.0
}

/// `F = (1/2) ∫ u²`.
pub fn free_energy(u: &PeriodicField) -> f64 {
    0.5 * integrate(&u.map(|v| v * v))
}

pub fn energy_report(u: &PeriodicField, epsilon: f64, t: f64, dt: f64) -> EnergyReport {
    let w = u.cubed();
    let w2 = diff2(&w);
    let w4 = diff4(&w);
    let f = free_energy(u);
    let e = integrate(&w2.map(|v| v * v)) / 6.0;
    let d = integrate(&u.zip_map(&w4, |ui, q| {
        let r = ui * ui * q;
        r * r
    }));
    let d_eps = integrate(&u.zip_map(&w4, |ui, q| {
        let u2 = ui * ui;
        let mob = if u2 == 0.0 {
            0.0
        } else {
            u2 * u2 * u2 / (epsilon + u2)
        };
        mob * q * q
    }));
    let positive = u.min() > 0.0;
    let (f_eps, m, m_reg) = if positive {
        (
            epsilon * integrate(&u.map(f64::ln)) + f,
            integrate(&u.map(|v| 1.0 / v)),
            integrate(&u.map(|v| epsilon / (3.0 * v * v * v) + 1.0 / v)),
        )
    } else {
        (f64::INFINITY, f64::INFINITY, f64::INFINITY)
    };
    EnergyReport {
        t,
        f,
        e,
        d,
        f_eps,
        m,
        m_reg,
        u_min: u.min(),
        u_max: u.max(),
        dt,
        d_eps,
    }
}

/// Pointwise lower bound `ε / (18^{1/3} E0^{1/3} C_m0)` for the regularized flow,
/// with `C_m0 = ∫ 1/u0 + 1`.
pub fn positivity_lower_bound(e0: f64, c_m0: f64, epsilon: f64) -> Result<f64> {
    for (name, v) in [("E0", e0), ("C_m0", c_m0), ("epsilon", epsilon)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "{name} = {v} must be positive"
            )));
        }
    }
    Ok(epsilon / ((18.0 * e0).cbrt() * c_m0))
}

/// Algebraic decay `E(u(T)) <= F(u(0)) / (6T)`; `report.t` is taken as `T`.
pub fn decay_bound_check(report: &EnergyReport, f0: f64) -> BoundVerdict {
    let rhs = if report.t > 0.0 {
        f0 / (6.0 * report.t)
    } else {
        f64::INFINITY
    };
    BoundVerdict::new("algebraic_decay", report.e, rhs)
}

/// Signed residuals of the two energy-dissipation identities,
/// `r1 = E(T) + ∫ D_ε dt - E(0)` and `r2 = F_ε(T) + 6 ∫ E dt - F_ε(0)`,
/// with trapezoid time integrals over the report times.
pub fn dissipation_residuals(reports: &[EnergyReport], epsilon: f64) -> Result<(f64, f64)> {
    if reports.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: reports.len(),
        });
    }
    let dissipation = |r: &EnergyReport| if epsilon > 0.0 { r.d_eps } else { r.d };
    let mut int_d = 0.0;
    let mut int_e = 0.0;
    for w in reports.windows(2) {
        let h = w[1].t - w[0].t;
        int_d += 0.5 * h * (dissipation(&w[0]) + dissipation(&w[1]));
        int_e += 0.5 * h * (w[0].e + w[1].e);
    }
    let first = &reports[0];
    let last = &reports[reports.len() - 1];
    let r1 = last.e + int_d - first.e;
    let r2 = last.f_eps + 6.0 * int_e - first.f_eps;
    Ok((r1, r2))
}

/// A time-stamped sample of `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub u: PeriodicField,
}

/// Space-time measure of `{u < δ}` against `C_m0 T δ`.
///
/// Each snapshot carries the time weight of its dual interval (half the gap to
/// each neighbour), so the measure integrates over the report spacing.
pub fn small_set_measure(snapshots: &[Snapshot], delta: f64, c_m0: f64) -> Result<BoundVerdict> {
    if snapshots.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let k = snapshots.len();
    let t_span = snapshots[k - 1].t - snapshots[0].t;
    let mut measure = 0.0;
    for (i, s) in snapshots.iter().enumerate() {
        let left = if i > 0 { s.t - snapshots[i - 1].t } else { 0.0 };
        let right = if i + 1 < k {
            snapshots[i + 1].t - s.t
        } else {
            0.0
        };
        let dt = 0.5 * (left + right);
        let count = s.u.values().iter().filter(|&&v| v < delta).count();
        measure += dt * count as f64 * s.u.grid().spacing();
    }
    Ok(BoundVerdict::new(
        format!("small_set_measure(delta={delta})"),
        measure,
        c_m0 * t_span * delta,
    ))
}

/// Checks `u(h) - u_min <= (2/3) |u_hh|_{L2} |h - h*|^{3/2}`, with `h*` the first
/// grid minimiser and the right side relaxed by `(1 + Δ^{1/2})`.
pub fn min_deviation_check(u: &PeriodicField) -> BoundVerdict {
    let g = *u.grid();
    let i_star = u.argmin();
    let u_min = u.values()[i_star];
    let h_star = g.node(i_star);
    let lhs = u
        .values()
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != i_star)
        .map(|(i, &v)| {
            let d = g.periodic_distance(g.node(i), h_star);
            (v - u_min) / d.powf(1.5)
        })
        .fold(0.0, f64::max);
    let uhh = diff2(u);
    let norm = integrate(&uhh.map(|v| v * v)).sqrt();
    let rhs = 2.0 / 3.0 * norm * (1.0 + g.spacing().sqrt());
    BoundVerdict::new("min_deviation", lhs, rhs)
}

/// Empirical Hölder constant `sup |w(t2,h) - w(t1,h)| / |t2 - t1|^{1/4}` over
/// all snapshot pairs and grid nodes, `w = u³`.
pub fn holder_modulus(snapshots: &[Snapshot]) -> Result<f64> {
    if snapshots.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: snapshots.len(),
        });
    }
    let cubes: Vec<Vec<f64>> = snapshots
        .iter()
        .map(|s| s.u.values().iter().map(|v| v * v * v).collect())
        .collect();
    let mut sup: f64 = 0.0;
    for i in 0..snapshots.len() {
        for j in i + 1..snapshots.len() {
            let dt = (snapshots[j].t - snapshots[i].t).abs();
            if dt == 0.0 {
                continue;
            }
            let diff = cubes[i]
                .iter()
                .zip(&cubes[j])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            sup = sup.max(diff / dt.powf(0.25));
        }
    }
    Ok(sup)
}

/// Long-time constant `u* = 1 / ∫ 1/u0`.
pub fn steady_state_prediction(u0: &PeriodicField) -> Result<f64> {
    if let Some((index, &value)) = u0.values().iter().enumerate().find(|(_, v)| **v <= 0.0) {
        return Err(Error::NonPositive {
            what: "initial slope",
            index,
            value,
        });
    }
    Ok(1.0 / integrate(&u0.map(|v| 1.0 / v)))
}

/// `m0 = ∫ 1/u0(h) dh` over one period for an analytically given 1-periodic datum.
///
/// The period is taken as `[-1/2, 1/2]` and each half is mapped through
/// `h = ±s³`, which makes algebraic zeros of `u0` at `h = 0` (such as
/// `u0 = sin^{2/3}(πh)`) integrable by double-exponential quadrature to
/// near machine precision. `u0` must be accurate for negative arguments.
pub fn reciprocal_integral(u0: impl Fn(f64) -> f64, tol: f64) -> Result<f64> {
    let c = 0.5_f64.cbrt();
    let half = |sign: f64| {
        quadrature::double_exponential::integrate(
            |s| {
                let s2 = s * s;
                let v = 3.0 * s2 / u0(sign * s2 * s);
                // s³ underflows at the extreme nodes, whose weights are negligible
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            },
            0.0,
            c,
            tol,
        )
        .integral
    };
    let m0 = half(1.0) + half(-1.0);
    if m0.is_finite() && m0 > 0.0 {
        Ok(m0)
    } else {
        Err(Error::InvalidArgument(format!(
            "1/u0 is not integrable (quadrature returned {m0})"
        )))
    }
}

/// `|∫ (w_hh)² - 9 ∫ u⁴ (u_hh)²|`, which vanishes for exact derivatives.
pub fn biharmonic_identity_residual(u: &PeriodicField) -> f64 {
    let lhs = integrate(&diff2(&u.cubed()).map(|v| v * v));
    let uhh = diff2(u);
    let rhs = 9.0 * integrate(&u.zip_map(&uhh, |ui, q| ui.powi(4) * q * q));
    (lhs - rhs).abs()
}

/// Signed version of [`biharmonic_identity_residual`].
pub fn biharmonic_identity_defect(u: &PeriodicField) -> f64 {
    let lhs = integrate(&diff2(&u.cubed()).map(|v| v * v));
    let uhh = diff2(u);
    lhs - 9.0 * integrate(&u.zip_map(&uhh, |ui, q| ui.powi(4) * q * q))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::grid::PeriodicGrid;

    fn sine_cubed(n: usize) -> PeriodicField {
        PeriodicField::from_fn(PeriodicGrid::unit(n).unwrap(), |h| {
            (1.0 + 0.1 * (2.0 * PI * h).sin()).cbrt()
        })
        .unwrap()
    }

    #[test]
    fn constant_report() {
        let u = PeriodicField::constant(PeriodicGrid::unit(32).unwrap(), 2.0).unwrap();
        let r = energy_report(&u, 0.0, 0.0, 0.0);
        assert_eq!(r.f, 2.0);
        assert_eq!(r.e, 0.0);
        assert_eq!(r.d, 0.0);
        assert_eq!(r.m, 0.5);
        let c: f64 = 1.7;
        let u = PeriodicField::constant(PeriodicGrid::unit(32).unwrap(), c).unwrap();
        let r = energy_report(&u, 1e-3, 0.0, 0.0);
        assert!((r.f_eps - (1e-3 * c.ln() + c * c / 2.0)).abs() < 1e-14);
    }

    #[test]
    fn sine_energy_matches_analytic_value() {
        let e = energy_report(&sine_cubed(256), 0.0, 0.0, 0.0).e;
        let exact = (2.0 * PI).powi(4) / 1200.0;
        assert!((e - exact).abs() / exact < 1e-3, "{e} vs {exact}");
    }

    #[test]
    fn degenerate_fields_use_sentinels() {
        let u = PeriodicField::from_fn(PeriodicGrid::unit(16).unwrap(), |h| {
            (PI * h).sin().powi(2).cbrt()
        })
        .unwrap();
        let r = energy_report(&u, 1e-3, 0.0, 0.0);
        assert!(r.m.is_infinite() && r.f_eps.is_infinite() && r.m_reg.is_infinite());
        assert!(r.e.is_finite());
    }

    #[test]
    fn lower_bound_formula() {
        assert!((positivity_lower_bound(1.0 / 18.0, 1.0, 1e-3).unwrap() - 1e-3).abs() < 1e-15);
        assert!((positivity_lower_bound(1.0 / 18.0, 2.0, 1e-3).unwrap() - 5e-4).abs() < 1e-15);
        let b = |e0, c, eps| positivity_lower_bound(e0, c, eps).unwrap();
        assert!(b(2.0, 1.5, 1e-3) < b(1.0, 1.5, 1e-3));
        assert!(b(1.0, 3.0, 1e-3) < b(1.0, 1.5, 1e-3));
        assert!((b(1.0, 1.5, 2e-3) - 2.0 * b(1.0, 1.5, 1e-3)).abs() < 1e-16);
        assert!(positivity_lower_bound(0.0, 1.0, 1e-3).is_err());
    }

    #[test]
    fn decay_verdicts() {
        let mut r = energy_report(&sine_cubed(64), 0.0, 0.0, 0.0);
        assert!(decay_bound_check(&r, 0.5).satisfied);
        assert!(decay_bound_check(&r, 0.5).rhs.is_infinite());
        r.t = 1.0;
        r.e = 0.0;
        assert!(decay_bound_check(&r, 0.5).satisfied);
        r.e = 1.0;
        assert!(!decay_bound_check(&r, 0.5).satisfied);
    }

    #[test]
    fn residuals_need_two_reports() {
        let r = energy_report(&sine_cubed(16), 0.0, 0.0, 0.0);
        assert!(matches!(
            dissipation_residuals(&[r], 0.0),
            Err(Error::InsufficientData { needed: 2, got: 1 })
        ));
        let u = PeriodicField::constant(PeriodicGrid::unit(16).unwrap(), 1.3).unwrap();
        let c0 = energy_report(&u, 1e-3, 0.0, 0.0);
        let mut c1 = c0;
        c1.t = 0.5;
        let (r1, r2) = dissipation_residuals(&[c0, c1], 1e-3).unwrap();
        assert_eq!((r1, r2), (0.0, 0.0));
    }

    #[test]
    fn small_set_measure_counts() {
        let g = PeriodicGrid::unit(10).unwrap();
        let mut v = vec![1.0; 10];
        v[0] = 0.01;
        let snaps: Vec<Snapshot> = (0..3)
            .map(|k| Snapshot {
                t: k as f64 * 0.5,
                u: PeriodicField::new(g, v.clone()).unwrap(),
            })
            .collect();
        let verdict = small_set_measure(&snaps, 0.05, 1.0).unwrap();
        // one cell of width 0.1 for the whole unit time span
        assert!((verdict.lhs - 0.1).abs() < 1e-15);
        assert!((verdict.rhs - 0.05).abs() < 1e-15);
        assert!(!verdict.satisfied);
        let high = small_set_measure(&snaps, 0.005, 1.0).unwrap();
        assert_eq!(high.lhs, 0.0);
        let doubled = small_set_measure(&snaps, 0.1, 1.0).unwrap();
        assert!((doubled.rhs - 2.0 * verdict.rhs).abs() < 1e-15);
    }

    #[test]
    fn min_deviation_cases() {
        let g = PeriodicGrid::unit(256).unwrap();
        let c = PeriodicField::constant(g, 3.0).unwrap();
        let v = min_deviation_check(&c);
        assert_eq!(v.lhs, 0.0);
        assert!(v.satisfied);
        let u = PeriodicField::from_fn(g, |h| 1.1 + (2.0 * PI * h).cos()).unwrap();
        assert!(min_deviation_check(&u).satisfied);
        assert!(min_deviation_check(&u.cubed()).satisfied);
    }

    #[test]
    fn holder_cases() {
        let g = PeriodicGrid::unit(16).unwrap();
        let c = PeriodicField::constant(g, 1.0).unwrap();
        let snaps: Vec<Snapshot> = (0..4)
            .map(|k| Snapshot {
                t: k as f64,
                u: c.clone(),
            })
            .collect();
        assert_eq!(holder_modulus(&snaps).unwrap(), 0.0);
        assert!(holder_modulus(&snaps[..2]).is_err());
    }

    #[test]
    fn steady_state_values() {
        let g = PeriodicGrid::unit(64).unwrap();
        let two = PeriodicField::constant(g, 2.0).unwrap();
        assert_eq!(steady_state_prediction(&two).unwrap(), 2.0);
        let c = PeriodicField::constant(g, 0.37).unwrap();
        assert!((steady_state_prediction(&c).unwrap() - 0.37).abs() < 1e-15);
        let mut v = vec![1.0; 64];
        v[5] = 0.0;
        assert!(steady_state_prediction(&PeriodicField::new(g, v).unwrap()).is_err());
    }

    #[test]
    fn reciprocal_integral_of_degenerate_datum() {
        // Γ(1/6)Γ(1/2) / (π Γ(2/3)), evaluated with 30-digit arithmetic
        let m0 = reciprocal_integral(|h| (PI * h).sin().powi(2).cbrt(), 1e-12).unwrap();
        assert!((m0 - 2.319_190_533_927_857).abs() < 1e-12, "{m0}");
        assert!((1.0 / m0 - 0.431_184_926_538_298_4).abs() < 1e-12);
        let smooth =
            reciprocal_integral(|h| (1.0 + 0.1 * (2.0 * PI * h).sin()).cbrt(), 1e-12).unwrap();
        assert!((smooth - 1.001_116_547_273_876_1).abs() < 1e-13, "{smooth}");
    }

    #[test]
    fn biharmonic_identity() {
        let g = PeriodicGrid::unit(32).unwrap();
        let c = PeriodicField::constant(g, 1.4).unwrap();
        assert_eq!(biharmonic_identity_residual(&c), 0.0);
        let base = |n| {
            PeriodicField::from_fn(PeriodicGrid::unit(n).unwrap(), |h| {
                1.1 + (2.0 * PI * h).cos()
            })
            .unwrap()
        };
        let r128 = biharmonic_identity_residual(&base(128));
        let r256 = biharmonic_identity_residual(&base(256));
        let ratio = r128 / r256;
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
        // homogeneous of degree 6
        let s: f64 = 1.3;
        let scaled = base(64).map(|v| s * v);
        let d1 = biharmonic_identity_defect(&base(64));
        let d2 = biharmonic_identity_defect(&scaled);
        assert!((d2 - s.powi(6) * d1).abs() < 1e-9 * d2.abs().max(1.0));
    }
}
