//! Runs every acceptance criterion and prints one PASS/FAIL line each.
//!
//! Uses a plain `main` (no libtest harness) so the lines are always shown,
//! not captured. Exits non-zero if any criterion fails.

use std::process::ExitCode;

use filt3r::acceptance::{run_criterion, CRITERIA};

fn main() -> ExitCode {
    let mut failed = Vec::new();
    for &(id, _, _) in CRITERIA {
        let result = run_criterion(id).expect("registered criterion");
        println!("{result}");
        if !result.passed {
            failed.push(result.id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: {} of {} criteria passed", CRITERIA.len(), CRITERIA.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
