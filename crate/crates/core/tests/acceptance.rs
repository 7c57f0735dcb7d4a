//! Acceptance criteria, one line each. Criteria 1 to 9 run in-process on the
//! full suite (`LANDAU_LAB_ACCEPTANCE_SUITE=quick` selects the small grids);
//! criterion 10 drives the built binary twice.

use std::path::Path;
use std::process::ExitCode;

use landau_lab::cli::verify::{self, Suite, CRITERIA};

fn main() -> ExitCode {
    let suite: Suite = std::env::var("LANDAU_LAB_ACCEPTANCE_SUITE")
        .unwrap_or_else(|_| "full".into())
        .parse()
        .expect("suite name");
    println!("acceptance ({suite} suite, seed 0)");
    let mut outcomes = verify::run_suite(suite, 0, |o| {
        println!("{}  ({:.1} s)", o.line(), o.elapsed.as_secs_f64());
    });
    let work = tempfile::tempdir().expect("scratch directory");
    let o = verify::reproducibility(Path::new(env!("CARGO_BIN_EXE_landau-lab")), work.path());
    println!("{}  ({:.1} s)", o.line(), o.elapsed.as_secs_f64());
    outcomes.push(o);
    let passed = outcomes.iter().filter(|o| o.passed).count();
    println!("{passed} of {CRITERIA} criteria passed");
    if passed == CRITERIA {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
