//! The inexpensive part of the acceptance suite; `vicinal check` runs all of it.

fn main() {
    let outcomes = vicinal::acceptance::run_suite(true);
    for o in &outcomes {
        println!("{}", o.summary_line());
    }
    std::process::exit(if outcomes.iter().all(|o| o.passed) {
        0
    } else {
        1
    });
}
