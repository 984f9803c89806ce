//! How measurement geometry moves reconstruction quality: the impedance
//! profile gamma3 imaged from a narrow and a wide source line, and from a
//! close and a distant one.
//!
//!     cargo run --release --example aperture_study

use roughimg::expr::Expr;
use roughimg::forward::{cauchy_data, BoundaryCondition, MeasurementLine, TruncationConfig};
use roughimg::imaging::{error_metrics, sweep, ImagingGrid};
use roughimg::surfaces::catalog;

fn mean_error(bc: &BoundaryCondition, height: f64, half_width: f64, n_half: usize) -> f64 {
    let surface = catalog("gamma3").unwrap();
    let line = MeasurementLine::new(height, half_width, n_half).unwrap();
    let data = cauchy_data(bc, &surface, 15.0, &line, &TruncationConfig::default()).unwrap();
    let grid = ImagingGrid::parse("-4:4:81,0.5:1.1:61").unwrap();
    let result = sweep(&grid, &data, 256).unwrap();
    error_metrics(&result.extracted, &surface, (-3.0, 3.0)).unwrap().0
}

fn main() -> roughimg::Result<()> {
    let rho = Expr::parse("5+exp(2*pi*x1*i)")?;
    let bc = BoundaryCondition::impedance(move |p| rho.eval(p.x1, p.x2));

    println!("gamma3, impedance rho(x) = 5 + exp(2 pi i x1), k = 15, mean |error| on |x1| <= 3:");
    println!("  aperture  4, height 1.5: {:.4}", mean_error(&bc, 1.5, 4.0, 25));
    println!("  aperture 10, height 1.5: {:.4}", mean_error(&bc, 1.5, 10.0, 50));
    println!("  aperture 10, height 3.0: {:.4}", mean_error(&bc, 3.0, 10.0, 50));
    println!("wider apertures see more of the surface; closer lines keep more detail.");
    Ok(())
}
