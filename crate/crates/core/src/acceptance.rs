//! The acceptance suite: fifteen property and oracle criteria, each reduced
//! to a list of [`BoundVerdict`]s.
//!
//! Criteria run concurrently. Criterion 5 (the decay envelope) is assembled
//! from the decay checks of every continuum run performed by the others.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_xorshift::XorShiftRng;
use rayon::prelude::*;
use serde::Serialize;

use crate::continuum::{
    evolve, explicit_step, semi_implicit_step, Evolution, Scheme, SolverOptions, SolverState,
};
use crate::energetics::{
    biharmonic_identity_residual, decay_bound_check, dissipation_energy, dissipation_residuals,
    holder_modulus, min_deviation_check, small_set_measure, BoundVerdict, Snapshot,
};
use crate::error::Result;
use crate::formulations::cross_check_evolution;
use crate::grid::{PeriodicField, PeriodicGrid};
use crate::harness::{longtime, perturbed_steps, positivity_bound, step_vs_pde, InitialCondition};
use crate::step_chain::{
    evolve_slopes, integrate_steps, step_energy, SlopeVector, StepConfiguration, StepControls,
    VelocityLaw, COLLISION_FLOOR, ENERGY_TOL,
};

/// `1/m0` for `u0³ = 1 + 0.1 sin(2πh)`, from 30-digit quadrature.
pub const SINE_CUBED_LIMIT: f64 = 1.0 / 1.001_116_547_273_876_1;

/// `(2π)⁴/1200`, the dissipation energy of `u0³ = 1 + 0.1 sin(2πh)`.
pub const SINE_CUBED_ENERGY: f64 = 1.298_787_880_453_365_829_819_204_435_85;

#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub id: u32,
    pub title: &'static str,
    pub passed: bool,
    pub checks: Vec<BoundVerdict>,
    /// Set when the criterion could not be evaluated.
    pub error: Option<String>,
    pub seconds: f64,
}

impl CriterionOutcome {
    fn new(id: u32, title: &'static str, result: Result<Vec<BoundVerdict>>, seconds: f64) -> Self {
        match result {
            Ok(mut checks) => {
                for c in &mut checks {
                    c.name = format!("C{id}: {}", c.name);
                }
                Self {
                    id,
                    title,
                    passed: !checks.is_empty() && checks.iter().all(|c| c.satisfied),
                    checks,
                    error: None,
                    seconds,
                }
            }
            Err(e) => Self {
                id,
                title,
                passed: false,
                checks: vec![BoundVerdict::new(format!("C{id}: evaluation"), 1.0, 0.0)],
                error: Some(e.to_string()),
                seconds,
            },
        }
    }

    /// One line: id, PASS/FAIL, title and the tightest check.
    pub fn summary_line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        let detail = match &self.error {
            Some(e) => format!("error: {e}"),
            None => {
                let tight = self
                    .checks
                    .iter()
                    .filter(|c| self.passed || !c.satisfied)
                    .min_by(|a, b| relative_margin(a).total_cmp(&relative_margin(b)));
                match tight {
                    Some(c) => format!(
                        "{} checks; tightest {}: {:.6e} <= {:.6e}",
                        self.checks.len(),
                        c.name.split_once(": ").map_or(c.name.as_str(), |(_, n)| n),
                        c.lhs,
                        c.rhs
                    ),
                    None => "no checks".to_string(),
                }
            }
        };
        format!(
            "criterion {:>2} {status} {} ({:.1}s) {detail}",
            self.id, self.title, self.seconds
        )
    }
}

fn relative_margin(v: &BoundVerdict) -> f64 {
    v.margin / (v.lhs.abs() + v.rhs.abs()).max(f64::MIN_POSITIVE)
}

type Criterion = (u32, &'static str, fn() -> Result<Run>);

/// Verdicts of one criterion plus the decay checks of its continuum runs.
struct Run {
    checks: Vec<BoundVerdict>,
    decay: Vec<BoundVerdict>,
}

impl Run {
    fn checks(checks: Vec<BoundVerdict>) -> Self {
        Self {
            checks,
            decay: Vec::new(),
        }
    }

    fn witness(&mut self, label: &str, ev: &Evolution) {
        let f0 = ev.reports[0].f;
        self.decay.extend(ev.reports.iter().skip(1).map(|r| {
            let mut v = decay_bound_check(r, f0);
            v.name = format!("{label} t={:.3e}", r.t);
            v
        }));
    }
}

const CRITERIA: [Criterion; 14] = [
    (1, "equilibrium exactness", c01_equilibrium),
    (2, "discrete step energy dissipation", c02_step_dissipation),
    (3, "first dissipation equality", c03_first_dissipation),
    (4, "second dissipation equality", c04_second_dissipation),
    (6, "positivity lower bound", c06_positivity),
    (7, "small-set measure bound", c07_small_set),
    (
        8,
        "conservation of the reciprocal integrals",
        c08_conservation,
    ),
    (9, "long-time limit", c09_longtime),
    (10, "biharmonic identity convergence", c10_biharmonic),
    (11, "minimum-deviation bound", c11_min_deviation),
    (12, "Hoelder modulus stability", c12_holder),
    (13, "cross-formulation equivalence", c13_crosscheck),
    (14, "discrete-to-continuum convergence", c14_step_vs_pde),
    (15, "oracle spot values", c15_oracles),
];

const QUICK: [u32; 5] = [1, 2, 10, 11, 15];

/// Runs every criterion (or the cheap subset) and returns outcomes ordered by id.
pub fn run_suite(quick: bool) -> Vec<CriterionOutcome> {
    let selected: Vec<&Criterion> = CRITERIA
        .iter()
        .filter(|(id, _, _)| !quick || QUICK.contains(id))
        .collect();
    let results: Vec<(CriterionOutcome, Vec<BoundVerdict>)> = selected
        .par_iter()
        .map(|&&(id, title, f)| {
            let start = Instant::now();
            let run = f();
            let secs = start.elapsed().as_secs_f64();
            match run {
                Ok(r) => (
                    CriterionOutcome::new(id, title, Ok(r.checks), secs),
                    r.decay,
                ),
                Err(e) => (CriterionOutcome::new(id, title, Err(e), secs), Vec::new()),
            }
        })
        .collect();
    let mut decay = Vec::new();
    let mut outcomes = Vec::new();
    for (o, d) in results {
        decay.extend(d);
        outcomes.push(o);
    }
    let c5 = if decay.is_empty() {
        // the quick subset has no non-trivial continuum run; use the sine datum directly
        Ok(vec![decay_for_quick()])
    } else {
        Ok(decay)
    };
    outcomes.push(CriterionOutcome::new(
        5,
        "algebraic decay envelope",
        c5,
        0.0,
    ));
    outcomes.sort_by_key(|o| o.id);
    outcomes
}

fn decay_for_quick() -> BoundVerdict {
    let u0 = sine_cubed(64, 0.1);
    let t = 1e-5;
    let opts = SolverOptions::for_horizon(t);
    match evolve(&u0, 0.0, t, &opts) {
        Ok(ev) => decay_bound_check(&ev.last().report, ev.reports[0].f),
        Err(_) => BoundVerdict::new("quick decay run", 1.0, 0.0),
    }
}

fn sine_cubed(n: usize, amplitude: f64) -> PeriodicField {
    InitialCondition::SineCubed {
        amplitude,
        mean: 1.0,
    }
    .sample(n)
    .expect("valid grid")
}

fn c01_equilibrium() -> Result<Run> {
    let g = PeriodicGrid::unit(64)?;
    let c = PeriodicField::constant(g, 1.3)?;
    let mut checks = Vec::new();
    for (label, eps) in [("eps=0", 0.0), ("eps=1e-3", 1e-3)] {
        let opts = SolverOptions::for_horizon(1.0);
        let mut ex = SolverState::new(c.clone(), eps, 0.0)?;
        let mut im = ex.clone();
        for _ in 0..1000 {
            ex = explicit_step(&ex, &opts)?;
            im = semi_implicit_step(&im, 1e-3, &opts)?;
        }
        checks.push(BoundVerdict::new(
            format!("explicit drift {label}"),
            ex.u.max_abs_diff(&c),
            1e-12,
        ));
        checks.push(BoundVerdict::new(
            format!("semi-implicit drift {label}"),
            im.u.max_abs_diff(&c),
            1e-12,
        ));
    }

    let train = StepConfiguration::uniform(32, 1.0, 0.0)?;
    let a4 = (1.0f64 / 32.0).powi(4);
    let t_end = 1000.0 * a4;
    let controls = StepControls {
        dt_max: Some(a4),
        ..StepControls::default()
    };
    let traj = integrate_steps(&train, VelocityLaw::Adl, t_end, &controls)?;
    let drift = traj
        .states
        .iter()
        .flat_map(|s| {
            s.positions()
                .iter()
                .zip(train.positions())
                .map(|(a, b)| (a - b).abs())
        })
        .fold(0.0, f64::max);
    checks.push(BoundVerdict::new(
        format!(
            "uniform step train drift over {} steps",
            traj.accepted_steps
        ),
        drift,
        1e-12,
    ));
    checks.push(BoundVerdict::new(
        "uniform train step count",
        1000.0,
        traj.accepted_steps as f64,
    ));

    let s0 = SlopeVector::new(vec![1.0; 32])?;
    let s = evolve_slopes(&s0, t_end, &controls)?;
    let drift = s
        .values()
        .iter()
        .map(|v| (v - 1.0).abs())
        .fold(0.0, f64::max);
    checks.push(BoundVerdict::new(
        "constant slope vector drift",
        drift,
        1e-12,
    ));

    let x = cross_check_evolution(
        &PeriodicField::constant(PeriodicGrid::unit(16)?, 1.0)?,
        1e-6,
        &SolverOptions::for_horizon(1.0),
    )?;
    checks.push(BoundVerdict::new(
        format!("formulation drift over {} steps", x.steps),
        x.u_phi_discrepancy.max(x.h_rho_discrepancy),
        1e-12,
    ));
    Ok(Run::checks(checks))
}

fn c02_step_dissipation() -> Result<Run> {
    let big_n = 32;
    let c0 = perturbed_steps(big_n, 1.0, 0.5, 2024)?;
    let a4 = (1.0 / big_n as f64).powi(4);
    let traj = integrate_steps(&c0, VelocityLaw::Adl, 10.0 * a4, &StepControls::default())?;
    let min_w = traj
        .states
        .iter()
        .flat_map(|s| s.terrace_widths())
        .fold(f64::INFINITY, f64::min);
    Ok(Run::checks(vec![
        BoundVerdict::new(
            format!(
                "max per-step F_N increase over {} steps",
                traj.accepted_steps
            ),
            traj.max_energy_increase(),
            ENERGY_TOL,
        ),
        BoundVerdict::new(
            "energy-guard rejections",
            traj.energy_rejections as f64,
            0.0,
        ),
        BoundVerdict::new("collision floor vs min width", COLLISION_FLOOR, min_w),
        BoundVerdict::new(
            "F_N decreased overall",
            *traj.energy_series.last().expect("recorded"),
            traj.energy_series[0],
        ),
    ]))
}

struct DissipationRuns {
    e0: f64,
    r: [(f64, f64); 2],
    evs: [Evolution; 2],
}

fn dissipation_runs() -> Result<DissipationRuns> {
    let eps = 1e-3;
    let t_end = 1e-4;
    let u0 = sine_cubed(128, 0.1);
    let run = |dt: f64| {
        let opts = SolverOptions::for_horizon(t_end)
            .with_dt(dt)
            .with_report_every(dt);
        evolve(&u0, eps, t_end, &opts)
    };
    let (a, b) = rayon::join(|| run(2e-8), || run(1e-8));
    let (a, b) = (a?, b?);
    let ra = dissipation_residuals(&a.reports, eps)?;
    let rb = dissipation_residuals(&b.reports, eps)?;
    Ok(DissipationRuns {
        e0: a.reports[0].e,
        r: [ra, rb],
        evs: [a, b],
    })
}

fn c03_first_dissipation() -> Result<Run> {
    let d = dissipation_runs()?;
    let (c, f) = (d.r[0].0, d.r[1].0);
    let mut run = Run::checks(vec![
        BoundVerdict::new(
            "r1 refinement factor (dt 2e-8 -> 1e-8)",
            1.5,
            c.abs() / f.abs(),
        ),
        BoundVerdict::new("|r1| at finest dt vs 1e-4 E(0)", f.abs(), 1e-4 * d.e0),
    ]);
    run.witness("sine eps=1e-3 dt=2e-8", &d.evs[0]);
    run.witness("sine eps=1e-3 dt=1e-8", &d.evs[1]);
    Ok(run)
}

fn c04_second_dissipation() -> Result<Run> {
    let d = dissipation_runs()?;
    let (c, f) = (d.r[0].1, d.r[1].1);
    Ok(Run::checks(vec![BoundVerdict::new(
        "r2 refinement factor (dt 2e-8 -> 1e-8)",
        1.5,
        c.abs() / f.abs(),
    )]))
}

const SWEEP: [f64; 3] = [1e-2, 1e-3, 1e-4];

fn degenerate_runs() -> Result<Vec<(f64, Evolution)>> {
    let u0 = InitialCondition::DegenerateSine.sample(128)?;
    let t_end = 1e-3;
    let opts = SolverOptions::for_horizon(t_end)
        .with_dt(1e-6)
        .with_report_every(1e-5);
    SWEEP
        .par_iter()
        .map(|&eps| Ok((eps, evolve(&u0, eps, t_end, &opts)?)))
        .collect()
}

fn c06_positivity() -> Result<Run> {
    let ic = InitialCondition::DegenerateSine;
    let u0 = ic.sample(128)?;
    let mut run = Run::checks(Vec::new());
    for (eps, ev) in degenerate_runs()? {
        let bound = positivity_bound(&u0, Some(&ic), eps)?;
        run.checks.push(BoundVerdict::new(
            format!("bound <= min u (eps={eps:e})"),
            bound,
            ev.min_u(),
        ));
        run.witness(&format!("degenerate eps={eps:e}"), &ev);
    }
    Ok(run)
}

fn c07_small_set() -> Result<Run> {
    let ic = InitialCondition::DegenerateSine;
    let c_m0 = ic.reciprocal_mass()? + 1.0;
    let mut checks = Vec::new();
    for (eps, ev) in degenerate_runs()? {
        let snaps: Vec<Snapshot> = ev
            .states
            .iter()
            .map(|s| Snapshot {
                t: s.t,
                u: s.u.clone(),
            })
            .collect();
        for delta in [0.02, 0.05, 0.1] {
            let mut v = small_set_measure(&snaps, delta, c_m0)?;
            v.name = format!("{} eps={eps:e}", v.name);
            checks.push(v);
        }
    }
    Ok(Run::checks(checks))
}

fn c08_conservation() -> Result<Run> {
    let u0 = sine_cubed(64, 0.1);
    let t_end = 1e-4;
    let opts = SolverOptions::for_horizon(t_end).with_scheme(Scheme::ExplicitRk4);
    let (reg, deg) = rayon::join(
        || evolve(&u0, 1e-3, t_end, &opts),
        || evolve(&u0, 0.0, t_end, &opts),
    );
    let (reg, deg) = (reg?, deg?);
    let drift = |ev: &Evolution, pick: fn(&crate::energetics::EnergyReport) -> f64| {
        let m0 = pick(&ev.reports[0]);
        ev.reports
            .iter()
            .map(|r| ((pick(r) - m0) / m0).abs())
            .fold(0.0, f64::max)
    };
    let mut run = Run::checks(vec![
        BoundVerdict::new(
            "m_reg relative drift per unit time (eps=1e-3, explicit RK4)",
            drift(&reg, |r| r.m_reg) / t_end,
            1e-6,
        ),
        BoundVerdict::new(
            "m relative drift (eps=0, explicit RK4)",
            drift(&deg, |r| r.m),
            1e-5,
        ),
    ]);
    run.witness("explicit eps=1e-3", &reg);
    run.witness("explicit eps=0", &deg);
    Ok(run)
}

fn c09_longtime() -> Result<Run> {
    let ic = InitialCondition::SineCubed {
        amplitude: 0.1,
        mean: 1.0,
    };
    let t_cap = 1e-2;
    let opts = SolverOptions::for_horizon(t_cap)
        .with_dt(1e-6)
        .with_report_every(1e-5);
    let (o, ev) = longtime(&ic, 128, 0.0, t_cap, &opts)?;
    let mut run = Run::checks(vec![
        BoundVerdict::new(
            format!("stopping criterion reached (t={:.4e})", o.stopped_at),
            if o.converged { 0.0 } else { 1.0 },
            0.0,
        ),
        BoundVerdict::new(
            "|limit - 1/m0| (oracle m0)",
            (o.limit - SINE_CUBED_LIMIT).abs(),
            1e-4,
        ),
        BoundVerdict::new(
            "|predicted - oracle|",
            (o.predicted - SINE_CUBED_LIMIT).abs(),
            1e-12,
        ),
    ]);
    run.witness("longtime eps=0", &ev);
    Ok(run)
}

fn c10_biharmonic() -> Result<Run> {
    let field = |n| {
        PeriodicField::from_fn(PeriodicGrid::unit(n).expect("n >= 8"), |h| {
            1.1 + (2.0 * PI * h).cos()
        })
    };
    let ratio =
        biharmonic_identity_residual(&field(128)?) / biharmonic_identity_residual(&field(256)?);
    Ok(Run::checks(vec![
        BoundVerdict::new("residual ratio 128/256 >= 3", 3.0, ratio),
        BoundVerdict::new("residual ratio 128/256 <= 5", ratio, 5.0),
    ]))
}

/// `1.5 + Σ_{k=1}^{3} c_k/k² cos(2πkh + θ_k)` with `c_k ∈ [0, 0.3)`, `θ_k ∈ [0, 2π)`.
pub fn random_phase_field(rng: &mut XorShiftRng, n: usize) -> Result<PeriodicField> {
    let modes: Vec<(f64, f64)> = (1..=3)
        .map(|_| (0.3 * rng.random::<f64>(), 2.0 * PI * rng.random::<f64>()))
        .collect();
    PeriodicField::from_fn(PeriodicGrid::unit(n)?, |h| {
        1.5 + modes
            .iter()
            .enumerate()
            .map(|(k, (c, th))| {
                let k = (k + 1) as f64;
                c / (k * k) * (2.0 * PI * k * h + th).cos()
            })
            .sum::<f64>()
    })
}

fn c11_min_deviation() -> Result<Run> {
    let mut rng = XorShiftRng::seed_from_u64(11);
    let checks = (0..20)
        .map(|k| {
            let mut v = min_deviation_check(&random_phase_field(&mut rng, 256)?);
            v.name = format!("{} member {k}", v.name);
            Ok(v)
        })
        .collect::<Result<_>>()?;
    Ok(Run::checks(checks))
}

fn c12_holder() -> Result<Run> {
    let t_end = 1e-4;
    let levels = [(128, 1e-7), (128, 5e-8), (256, 1e-7)];
    let evs: Vec<Evolution> = levels
        .par_iter()
        .map(|&(n, dt)| {
            let opts = SolverOptions::for_horizon(t_end)
                .with_dt(dt)
                .with_report_every(t_end / 9.0);
            evolve(&sine_cubed(n, 0.1), 1e-3, t_end, &opts)
        })
        .collect::<Result<_>>()?;
    let moduli: Vec<f64> = evs
        .iter()
        .map(|ev| {
            let snaps: Vec<Snapshot> = ev
                .states
                .iter()
                .map(|s| Snapshot {
                    t: s.t,
                    u: s.u.clone(),
                })
                .collect();
            holder_modulus(&snaps)
        })
        .collect::<Result<_>>()?;
    let ratio = |a: f64, b: f64| a.max(b) / a.min(b);
    let mut run = Run::checks(vec![
        BoundVerdict::new(
            "modulus change under dt halving",
            ratio(moduli[0], moduli[1]),
            2.0,
        ),
        BoundVerdict::new(
            "modulus change under n doubling",
            ratio(moduli[0], moduli[2]),
            2.0,
        ),
        BoundVerdict::new("modulus finite", moduli[0], f64::MAX),
    ]);
    for (ev, (n, dt)) in evs.iter().zip(levels) {
        run.witness(&format!("holder n={n} dt={dt:e}"), ev);
    }
    Ok(run)
}

fn c13_crosscheck() -> Result<Run> {
    let t_end = 1e-7;
    let opts = SolverOptions::for_horizon(t_end);
    let (a, b) = rayon::join(
        || cross_check_evolution(&sine_cubed(128, 0.05), t_end, &opts),
        || cross_check_evolution(&sine_cubed(256, 0.05), t_end, &opts),
    );
    let (a, b) = (a?, b?);
    let mut checks = vec![BoundVerdict::new(
        "u/phi discrepancy reduction 128 -> 256",
        3.0,
        a.u_phi_discrepancy / b.u_phi_discrepancy,
    )];
    for r in [&a, &b] {
        for (name, d) in [
            ("phi", r.phi_mean_drift),
            ("h", r.h_mean_drift),
            ("rho", r.rho_mean_drift),
        ] {
            checks.push(BoundVerdict::new(
                format!("{name} mean drift n={}", r.n),
                d,
                1e-8,
            ));
        }
    }
    Ok(Run::checks(checks))
}

fn c14_step_vs_pde() -> Result<Run> {
    let ic = InitialCondition::SineCubed {
        amplitude: 0.1,
        mean: 1.0,
    };
    let errors = step_vs_pde(&ic, &[32, 64, 128], 5e-5, 1e-8)?;
    let checks = errors
        .windows(2)
        .map(|w| {
            // strict decrease
            BoundVerdict::new(
                format!("error N={} < error N={}", w[1].0, w[0].0),
                w[1].1,
                w[0].1 * (1.0 - 1e-9),
            )
        })
        .collect();
    Ok(Run::checks(checks))
}

fn c15_oracles() -> Result<Run> {
    let e = dissipation_energy(&sine_cubed(256, 0.1));
    let two = StepConfiguration::new(1.0, vec![0.0, 0.25])?;
    let uniform = StepConfiguration::uniform(16, 1.0, 0.0)?;
    Ok(Run::checks(vec![
        BoundVerdict::new(
            "E(sine datum) relative error vs (2π)⁴/1200",
            ((e - SINE_CUBED_ENERGY) / SINE_CUBED_ENERGY).abs(),
            0.01,
        ),
        BoundVerdict::new(
            "two-step F_N vs 10/9",
            (step_energy(&two) - 10.0 / 9.0).abs(),
            1e-12,
        ),
        BoundVerdict::new(
            "uniform F_N vs 1/2",
            (step_energy(&uniform) - 0.5).abs(),
            1e-12,
        ),
    ]))
}
