//! Evaluate the special-function layer: Hankel values across the
//! series/asymptotic switch, the free-space kernel, and the half-circle
//! plane-wave quadrature against its closed form.
//!
//!     cargo run --release --example special_functions

use num_complex::Complex64;
use roughimg::specfun::{
    bessel_j, fundamental_solution, half_circle_integral, hankel1, Hemisphere, Point2,
};

fn main() -> roughimg::Result<()> {
    println!("H0^(1)(t) across the argument range:");
    for t in [0.5, 1.0, 5.0, 12.0, 100.0] {
        let h = hankel1(0, t)?;
        println!("  t = {t:>5}: {:+.12e} {:+.12e} i  |H0| = {:.6e}", h.re, h.im, h.norm());
    }

    let k = 10.0;
    let x = Point2::new(0.0, 1.5);
    let y = Point2::new(0.4, 0.8);
    println!("\nfree-space kernel at k = {k}, |x - y| = {:.4}:", x.distance(y));
    println!("  phi(x, y) = {:.10}", fundamental_solution(k, x, y)?);

    // Lower plus upper half circle closes to the full circle, whose
    // plane-wave average is (i/2) J0(k |w|).
    let w = (0.3f64, -0.2f64);
    let kw = k * (w.0 * w.0 + w.1 * w.1).sqrt();
    let whole = half_circle_integral(k, w, 512, Hemisphere::Lower)
        + half_circle_integral(k, w, 512, Hemisphere::Upper);
    let expected = Complex64::new(0.0, 0.5) * bessel_j(0, kw);
    println!("\nhalf-circle quadrature closure at k|w| = {kw:.4}:");
    println!("  lower + upper = {whole:.12}");
    println!("  (i/2) J0      = {expected:.12}");
    println!("  gap           = {:.3e}", (whole - expected).norm());
    Ok(())
}
