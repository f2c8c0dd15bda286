//! Run to equilibrium and compare the flat limit with `1 / integral(1/u0)`.

use vicinal::continuum::SolverOptions;
use vicinal::harness::{longtime, InitialCondition};

fn main() -> vicinal::Result<()> {
    let ic = InitialCondition::SineCubed {
        amplitude: 0.1,
        mean: 1.0,
    };
    let t_cap = 1e-2;
    let opts = SolverOptions::for_horizon(t_cap)
        .with_dt(1e-6)
        .with_report_every(1e-5);
    let (o, ev) = longtime(&ic, 128, 0.0, t_cap, &opts)?;
    println!(
        "stopped at t = {:.4e} after {} steps (converged: {})",
        o.stopped_at, ev.steps, o.converged
    );
    println!("observed limit  {:.12}", o.limit);
    println!("predicted limit {:.12}", o.predicted);
    println!("difference      {:.3e}", (o.limit - o.predicted).abs());
    Ok(())
}
