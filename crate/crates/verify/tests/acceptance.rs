//! Acceptance criteria, one pass/fail line per criterion.

use std::process::ExitCode;
use translab::verify::{run, ALL};

fn main() -> ExitCode {
    let mut failed = Vec::new();
    for id in ALL {
        let r = run(id);
        println!("{}", r.line());
        if !r.passed {
            failed.push(id);
        }
    }
    println!("{} of {} criteria passed", ALL.len() - failed.len(), ALL.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
