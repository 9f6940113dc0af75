//! Run the executable verification suite for the structural properties of
//! reliance-scaled recalibration and print its report.
//!
//! ```bash
//! cargo run --example theory_report
//! ```

use varcal::evaluation::theory::run_theory_suite;

fn main() {
    let report = run_theory_suite(0);
    print!("{}", report.render());
    std::process::exit(if report.passed() { 0 } else { 1 });
}
