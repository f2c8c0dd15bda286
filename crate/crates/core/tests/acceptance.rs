//! One line per criterion; exits non-zero if any criterion fails.
//!
//! Set `VICINAL_QUICK=1` to run only the inexpensive criteria.

use std::process::ExitCode;

use vicinal::acceptance::run_suite;

fn main() -> ExitCode {
    let quick = std::env::var("VICINAL_QUICK").is_ok_and(|v| v == "1");
    let outcomes = run_suite(quick);
    for o in &outcomes {
        println!("{}", o.summary_line());
        if !o.passed {
            for c in o.checks.iter().filter(|c| !c.satisfied) {
                println!("    violated {}: {:e} > {:e}", c.name, c.lhs, c.rhs);
            }
        }
    }
    let passed = outcomes.iter().filter(|o| o.passed).count();
    println!("acceptance: {passed}/{} criteria passed", outcomes.len());
    if passed == outcomes.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
