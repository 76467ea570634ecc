//! Prints one line per acceptance criterion and exits non-zero on failure.

use fracwave::harness::validation::{run_criterion, Tolerances};

fn main() {
    let tol = Tolerances::default();
    let mut failed = 0;
    for id in 1..=15 {
        let r = run_criterion(id, &tol);
        println!("{}", r.line());
        if !r.passed {
            failed += 1;
        }
    }
    println!("acceptance: {} of 15 criteria passed", 15 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
