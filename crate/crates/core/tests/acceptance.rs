//! Runs every acceptance criterion and prints one line per criterion.
//! Fails on any check that is not a documented known failure, and also if a
//! documented failure starts passing.

use std::process::ExitCode;

use coulomb2d::acceptance::{run_criterion, AcceptanceOptions, KNOWN_FAILURES};

fn main() -> ExitCode {
    let opts = AcceptanceOptions::default();
    let mut ok = true;
    for id in 1..=13 {
        let r = match run_criterion(id, &opts) {
            Ok(r) => r,
            Err(e) => {
                println!("criterion {id:>2} ERROR {e}");
                ok = false;
                continue;
            }
        };
        println!("{}", r.summary_line());
        for c in r.unexpected_failures() {
            println!("    unexpected: {} = {:.4e} (limit {:.4e})", c.name, c.value, c.limit);
            ok = false;
        }
        for (kid, name, why) in KNOWN_FAILURES.iter().filter(|k| k.0 == id) {
            match r.checks.iter().find(|c| c.name == *name) {
                Some(c) if !c.passed => println!("    known failure {kid}/{name}: {why}"),
                Some(_) => {
                    println!("    known failure {name} now passes; update the list");
                    ok = false;
                }
                None => {
                    println!("    known failure {name} was not evaluated");
                    ok = false;
                }
            }
        }
    }
    if ok {
        println!("acceptance: no unexpected failures");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected failures");
        ExitCode::FAILURE
    }
}
