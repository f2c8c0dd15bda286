//! The four equivalent descriptions of the surface (slope, step position as a
//! function of height, height, step density) evolved side by side.

use vicinal::continuum::SolverOptions;
use vicinal::formulations::{bundle_to_slope, cross_check_evolution, slope_to_bundle};
use vicinal::harness::InitialCondition;

fn main() -> vicinal::Result<()> {
    let ic = InitialCondition::SineCubed {
        amplitude: 0.05,
        mean: 1.0,
    };

    let u = ic.sample(64)?;
    let b = slope_to_bundle(&u, 0.0)?;
    println!(
        "period L = {:.12}, round-trip slope error {:.2e}",
        b.period(),
        bundle_to_slope(&b).max_abs_diff(&u)
    );

    let t_end = 1e-7;
    for n in [64, 128, 256] {
        let r = cross_check_evolution(&ic.sample(n)?, t_end, &SolverOptions::for_horizon(t_end))?;
        println!(
            "n = {n:>3}: {:>5} steps, |u - 1/phi_a| = {:.3e}, |h_x - rho| = {:.3e}, mean drifts {:.1e} {:.1e} {:.1e}",
            r.steps, r.u_phi_discrepancy, r.h_rho_discrepancy, r.phi_mean_drift, r.h_mean_drift, r.rho_mean_drift
        );
    }
    Ok(())
}
