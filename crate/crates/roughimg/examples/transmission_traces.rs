//! Field continuity across a penetrable surface: solve the transmission
//! problem for one point source and compare the total field just above the
//! interface with the transmitted field just below it.
//!
//!     cargo run --release --example transmission_traces

use roughimg::forward::{
    assemble, scattered_field, solve_density, transmitted_field, BoundaryCondition,
    TruncationConfig,
};
use roughimg::specfun::{fundamental_solution, Point2};
use roughimg::surfaces::catalog;

fn main() -> roughimg::Result<()> {
    let (k_plus, k_minus) = (10.0, 4.0);
    let surface = catalog("gamma5")?;
    let trunc = TruncationConfig::default();
    let nodes = trunc.surface_nodes(&surface, k_plus, 4.0)?;
    let system =
        assemble(&BoundaryCondition::Transmission { k_minus }, &surface, k_plus, nodes)?;
    let source = Point2::new(0.3, 2.0);
    let density = solve_density(&system, source)?;

    println!("gamma5, k+ = {k_plus}, k- = {k_minus}, source at ({}, {}):", source.x1, source.x2);
    println!("  x1      u_i + u_s (above)          u_t (below)               gap");
    let offset = 1e-3;
    for x1 in [-1.5, -0.5, 0.0, 0.6, 1.4] {
        let f = surface.f(x1);
        let above = Point2::new(x1, f + offset);
        let below = Point2::new(x1, f - offset);
        let total = scattered_field(
            &density,
            &BoundaryCondition::Transmission { k_minus },
            k_plus,
            &[above],
        )?[0] + fundamental_solution(k_plus, above, source)?;
        let transmitted = transmitted_field(&density, k_minus, &[below])?[0];
        println!(
            "  {x1:>4}   {:+.6} {:+.6} i   {:+.6} {:+.6} i   {:.2e}",
            total.re,
            total.im,
            transmitted.re,
            transmitted.im,
            (total - transmitted).norm()
        );
    }
    println!("the two traces agree up to the {offset} offset and quadrature error.");
    Ok(())
}
