//! Relaxation of a perturbed train of 32 steps under the three velocity laws.
//!
//! Prints the step energy `F_N` at a few times and checks that every law
//! drives the train toward equal terraces without collisions.

use vicinal::harness::perturbed_steps;
use vicinal::step_chain::{integrate_steps, step_energy, StepControls, VelocityLaw};

fn main() -> vicinal::Result<()> {
    let n = 32;
    let c0 = perturbed_steps(n, 1.0, 0.6, 7)?;
    let a = c0.step_height();
    let t_end = 20.0 * a.powi(4);
    let controls = StepControls {
        record_interval: Some(t_end / 5.0),
        ..StepControls::default()
    };

    println!(
        "F_N(0) = {:.10}  (uniform train: {:.10})",
        step_energy(&c0),
        0.5
    );
    for law in [
        VelocityLaw::Adl,
        VelocityLaw::Dl,
        VelocityLaw::Bcf { dk: 10.0 },
    ] {
        let traj = integrate_steps(&c0, law, t_end, &controls)?;
        let widths = traj.last().terrace_widths();
        let spread = widths.iter().cloned().fold(f64::MIN, f64::max)
            - widths.iter().cloned().fold(f64::MAX, f64::min);
        println!(
            "\n{law:?}: {} accepted steps, {} energy rejections",
            traj.accepted_steps, traj.energy_rejections
        );
        for (t, f) in traj.times.iter().zip(&traj.energy_series) {
            println!("  t/a^4 = {:7.3}  F_N = {:.10}", t / a.powi(4), f);
        }
        println!(
            "  final terrace spread {spread:.3e} (initial width {:.4e})",
            1.0 / n as f64
        );
        assert!(traj.max_energy_increase() <= vicinal::step_chain::ENERGY_TOL);
    }
    Ok(())
}
