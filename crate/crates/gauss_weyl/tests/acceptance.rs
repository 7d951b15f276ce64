//! Acceptance suite: one line per criterion, nonzero exit when any criterion fails.

use gauss_weyl::checks::{negative_controls, run_checks, CheckOutcome, Scale};

fn main() {
    let mut outcomes: Vec<CheckOutcome> = run_checks(None, Scale::Full);
    for o in &outcomes {
        println!("{}", o.line());
    }
    // Criterion 11 is one line summarizing every mutation fixture.
    let controls = negative_controls(Scale::Full);
    for c in &controls {
        println!("    {}", c.line());
    }
    let all_fail = controls.iter().all(|c| c.passed);
    let summary = CheckOutcome {
        id: "negative_controls",
        criterion: 11,
        measured: controls.iter().filter(|c| c.passed).count() as f64,
        tolerance: controls.len() as f64,
        passed: all_fail,
        detail: format!("{}/{} mutated checks fail", controls.iter().filter(|c| c.passed).count(), controls.len()),
        seconds: controls.iter().map(|c| c.seconds).sum(),
    };
    println!("{}", summary.line());
    outcomes.push(summary);
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("acceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
