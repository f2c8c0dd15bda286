//! Step trains of increasing size sampled from the same slope profile,
//! compared with a fine continuum solution at a common time.

use vicinal::harness::{step_vs_pde, InitialCondition};

fn main() -> vicinal::Result<()> {
    let ic = InitialCondition::SineCubed {
        amplitude: 0.1,
        mean: 1.0,
    };
    let errors = step_vs_pde(&ic, &[16, 32, 64, 128], 5e-5, 1e-8)?;
    let mut prev: Option<f64> = None;
    println!("{:>6} {:>14} {:>8}", "N", "sup error", "order");
    for (n, e) in errors {
        let order = prev.map_or(String::from("-"), |p| format!("{:.2}", (p / e).log2()));
        println!("{n:>6} {e:>14.6e} {order:>8}");
        prev = Some(e);
    }
    Ok(())
}
