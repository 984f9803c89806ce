//! Reconstruction of the penetrable bump gamma5 under increasing measurement
//! noise.  One transmission solve feeds every noise level, so this stays
//! under a minute.
//!
//!     cargo run --release --example noise_robustness

use roughimg::experiment::add_noise;
use roughimg::forward::{cauchy_data, BoundaryCondition, MeasurementLine, TruncationConfig};
use roughimg::imaging::{error_metrics, sweep, ImagingGrid};
use roughimg::surfaces::catalog;

fn main() -> roughimg::Result<()> {
    let surface = catalog("gamma5")?;
    let line = MeasurementLine::new(1.5, 5.0, 40)?;
    let bc = BoundaryCondition::Transmission { k_minus: 8.0 };
    let clean = cauchy_data(&bc, &surface, 20.0, &line, &TruncationConfig::default())?;
    let grid = ImagingGrid::parse("-4:4:81,0.5:1.1:61")?;

    println!("gamma5, transmission k+ = 20 / k- = 8, mean |error| on |x1| <= 3:");
    for delta in [0.0, 0.2, 0.4] {
        let noisy = add_noise(&clean, delta, 11)?;
        let result = sweep(&grid, &noisy, 256)?;
        let (mean, max) = error_metrics(&result.extracted, &surface, (-3.0, 3.0))?;
        println!("  delta = {delta:>3}: mean {mean:.4}   worst column {max:.4}");
    }
    Ok(())
}
