//! Run the analytic identity suite that backs `roughimg verify` and print
//! the residual table.
//!
//!     cargo run --release --example verify_identities

use roughimg::cli::{verify_checks, Level};

fn main() -> roughimg::Result<()> {
    let checks = verify_checks(Level::Fast)?;
    println!("{:<34} {:>12} {:>12}", "check", "residual", "tolerance");
    for c in &checks {
        let mark = if c.passed() { "pass" } else { "FAIL" };
        println!("{:<34} {:>12.3e} {:>12.3e}   {mark}", c.name, c.residual, c.tolerance);
    }
    assert!(checks.iter().all(|c| c.passed()), "identity suite must be green");
    Ok(())
}
