//! Closed-form values reproduced by the discrete functionals.

use std::f64::consts::PI;

use vicinal::energetics::{
    biharmonic_identity_residual, dissipation_energy, min_deviation_check, reciprocal_integral,
};
use vicinal::grid::{PeriodicField, PeriodicGrid};
use vicinal::harness::InitialCondition;
use vicinal::step_chain::{step_energy, StepConfiguration};

fn main() -> vicinal::Result<()> {
    let sine = InitialCondition::SineCubed {
        amplitude: 0.1,
        mean: 1.0,
    };
    for n in [64, 128, 256, 512] {
        let e = dissipation_energy(&sine.sample(n)?);
        println!(
            "n = {n:>3}: E = {e:.12}  exact (2 pi)^4/1200 = {:.12}",
            (2.0 * PI).powi(4) / 1200.0
        );
    }

    let m0 = reciprocal_integral(|h| (1.0 + (2.0 * PI * h).sin()).cbrt(), 1e-14)?;
    println!("\nintegral of 1/u0 for the degenerate datum: {m0:.15}");

    let two = StepConfiguration::new(1.0, vec![0.0, 0.25])?;
    println!("two-step F_N = {:.15} (10/9)", step_energy(&two));

    for n in [64, 128, 256] {
        let u = PeriodicField::from_fn(PeriodicGrid::unit(n)?, |h| 1.1 + (2.0 * PI * h).cos())?;
        let v = min_deviation_check(&u);
        println!(
            "n = {n:>3}: biharmonic identity residual {:.3e}, min-deviation {:.4} <= {:.4}",
            biharmonic_identity_residual(&u),
            v.lhs,
            v.rhs
        );
    }
    Ok(())
}
