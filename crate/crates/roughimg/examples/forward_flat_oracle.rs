//! Solve the sound-soft flat plane and compare the simulated Cauchy data
//! against the exact mirror-image solution.
//!
//!     cargo run --release --example forward_flat_oracle

use roughimg::cli::flat_oracle_residual;
use roughimg::forward::{
    cauchy_data, oracle_cauchy_data, BoundaryCondition, MeasurementLine, TruncationConfig,
};
use roughimg::surfaces::catalog;

fn main() -> roughimg::Result<()> {
    let k = 10.0;
    let line = MeasurementLine::new(1.5, 6.0, 15)?;
    let surface = catalog("flat:0.8")?;

    let solved =
        cauchy_data(&BoundaryCondition::Dirichlet, &surface, k, &line, &TruncationConfig::default())?;
    let oracle = oracle_cauchy_data(0.8, k, &line)?;

    println!(
        "flat plane x2 = 0.8, k = {k}, {} sources on the line x2 = {}",
        line.count(),
        line.height()
    );
    let mid = line.count() / 2;
    for j in [0, mid] {
        let a = solved.us.get(mid, j);
        let b = oracle.us.get(mid, j);
        println!(
            "  us[{mid}][{j}]: solver {:+.8} {:+.8} i   oracle {:+.8} {:+.8} i",
            a.re, a.im, b.re, b.im
        );
    }
    println!(
        "relative L2 mismatch over the central receivers: {:.3e}",
        flat_oracle_residual(&solved, &oracle)
    );
    Ok(())
}
