//! Rough-surface profiles and their discretization.
//!
//! A surface is the graph `x2 = f(x1)` of a bounded smooth height function.
//! The catalog ships six named profiles (`gamma1` .. `gamma6`) plus flat
//! planes `flat:<height>`; every derivative is hard-coded analytically since
//! the boundary-kernel accuracy depends on it.  [`quadrature_nodes`] cuts the
//! unbounded surface to a window `[-A_f, A_f]`, places uniform trapezoid
//! nodes on it and rolls the quadrature weight smoothly to zero over a taper
//! band at each end so the truncation does not radiate artifacts back into
//! the imaging region.

use std::sync::Arc;

use crate::specfun::Point2;
use crate::{Error, Result};

type HeightFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Height profile `x2 = f(x1)` with its derivative and band bounds.
///
/// The band bounds express the admissibility class: `f >= c1 > 0` keeps the
/// surface strictly above the ground line, and `|f| + |df| <= c2` bounds the
/// profile and its slope.  [`band_check`] samples both on a window.
#[derive(Clone)]
pub struct SurfaceProfile {
    label: String,
    f: HeightFn,
    df: HeightFn,
    c1: f64,
    c2: f64,
}

impl std::fmt::Debug for SurfaceProfile {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fm.debug_struct("SurfaceProfile")
            .field("label", &self.label)
            .field("c1", &self.c1)
            .field("c2", &self.c2)
            .finish()
    }
}

impl SurfaceProfile {
    pub fn new(
        label: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
        c1: f64,
        c2: f64,
    ) -> Self {
        SurfaceProfile { label: label.into(), f: Arc::new(f), df: Arc::new(df), c1, c2 }
    }

    /// Same profile with replacement band bounds.
    pub fn with_band(mut self, c1: f64, c2: f64) -> Self {
        self.c1 = c1;
        self.c2 = c2;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn band(&self) -> (f64, f64) {
        (self.c1, self.c2)
    }

    /// Height at parameter `s`.
    pub fn f(&self, s: f64) -> f64 {
        (self.f)(s)
    }

    /// Slope at parameter `s`.
    pub fn df(&self, s: f64) -> f64 {
        (self.df)(s)
    }

    /// Arc-length element `sqrt(1 + f'(s)^2)`.
    pub fn jacobian(&self, s: f64) -> f64 {
        1.0f64.hypot(self.df(s))
    }

    /// Point on the surface at parameter `s`.
    pub fn point_at(&self, s: f64) -> Point2 {
        Point2::new(s, self.f(s))
    }

    /// Unit normal `(f'(s), -1)/sqrt(1 + f'(s)^2)`, pointing downward out of
    /// the upper medium.
    pub fn normal_at(&self, s: f64) -> Point2 {
        let d = self.df(s);
        let j = 1.0f64.hypot(d);
        Point2::new(d / j, -1.0 / j)
    }
}

/// Look up a surface by name: `gamma1` .. `gamma6` or `flat:<height>`.
pub fn catalog(name: &str) -> Result<SurfaceProfile> {
    use core::f64::consts::PI;
    match name {
        "gamma1" => Ok(SurfaceProfile::new(
            name,
            |x| 0.8 + 0.1 * (2.0 * PI * x).sin() + 0.1 * (PI * x).sin(),
            |x| 0.2 * PI * (2.0 * PI * x).cos() + 0.1 * PI * (PI * x).cos(),
            0.3,
            3.0,
        )),
        "gamma2" => Ok(SurfaceProfile::new(
            name,
            |x| 0.8 + 0.025 * (5.0 * PI * (x - 1.0)).sin() + 0.1 * (0.5 * PI * (x - 1.0)).sin(),
            |x| {
                0.125 * PI * (5.0 * PI * (x - 1.0)).cos() + 0.05 * PI * (0.5 * PI * (x - 1.0)).cos()
            },
            0.3,
            3.0,
        )),
        "gamma3" => Ok(SurfaceProfile::new(
            name,
            |x| 0.8 + 0.16 * (PI * x).sin(),
            |x| 0.16 * PI * (PI * x).cos(),
            0.3,
            3.0,
        )),
        "gamma4" => Ok(SurfaceProfile::new(
            name,
            |x| {
                0.8 + 0.1 * (-25.0 * (0.3 * x - 0.5).powi(2)).exp()
                    + 0.2 * (-49.0 * (0.3 * x + 0.6).powi(2)).exp()
                    - 0.25 * (-8.0 * x * x).exp()
            },
            |x| {
                -1.5 * (0.3 * x - 0.5) * (-25.0 * (0.3 * x - 0.5).powi(2)).exp()
                    - 5.88 * (0.3 * x + 0.6) * (-49.0 * (0.3 * x + 0.6).powi(2)).exp()
                    + 4.0 * x * (-8.0 * x * x).exp()
            },
            0.3,
            3.0,
        )),
        "gamma5" => Ok(SurfaceProfile::new(
            name,
            |x| 0.8 + 0.3 * (0.7 * PI * x).sin() * (-0.4 * x * x).exp(),
            |x| {
                (-0.4 * x * x).exp()
                    * (0.21 * PI * (0.7 * PI * x).cos() - 0.24 * x * (0.7 * PI * x).sin())
            },
            0.3,
            3.0,
        )),
        // The slope of gamma6 grows linearly with |x1| (the chirp sin(1.2 x^2)
        // oscillates faster and faster), so its slope bound is wider.
        "gamma6" => Ok(SurfaceProfile::new(
            name,
            |x| 0.8 + 0.1 * (0.4 * PI * x).sin() * (-(1.2 * x * x).sin()).exp(),
            |x| {
                0.1 * (-(1.2 * x * x).sin()).exp()
                    * (0.4 * PI * (0.4 * PI * x).cos()
                        - 2.4 * x * (1.2 * x * x).cos() * (0.4 * PI * x).sin())
            },
            0.3,
            8.0,
        )),
        _ => {
            if let Some(height) = name.strip_prefix("flat:") {
                let h: f64 = height
                    .parse()
                    .map_err(|_| Error::UnknownSurface(name.to_string()))?;
                if !(h > 0.0) || !h.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "flat surface height must be positive, got {h}"
                    )));
                }
                Ok(SurfaceProfile::new(name, move |_| h, |_| 0.0, 0.5 * h, h + 1.0))
            } else {
                Err(Error::UnknownSurface(name.to_string()))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Quadrature on a truncated window
// ---------------------------------------------------------------------------

/// One quadrature node of the truncated surface.
#[derive(Clone, Copy, Debug)]
pub struct SurfaceNode {
    /// Parameter value (horizontal coordinate).
    pub s: f64,
    /// Point `(s, f(s))` on the surface.
    pub point: Point2,
    /// Downward unit normal at the point.
    pub normal: Point2,
    /// Arc-length element `sqrt(1 + f'(s)^2)`.
    pub jacobian: f64,
    /// Trapezoid weight times jacobian times taper factor.
    pub weight: f64,
}

/// Quintic smoothstep ramp: 0 at `v = 0`, 1 at `v = 1`, with two vanishing
/// derivatives at both ends.
fn smoothstep5(v: f64) -> f64 {
    let v = v.clamp(0.0, 1.0);
    v * v * v * (v * (6.0 * v - 15.0) + 10.0)
}

/// Taper factor: 1 on the core window, rolling to 0 over `width` at `|s|
/// near `a_f`.
fn taper(s: f64, a_f: f64, width: f64) -> f64 {
    if width == 0.0 {
        return 1.0;
    }
    let edge = a_f - s.abs();
    if edge >= width {
        1.0
    } else {
        smoothstep5(edge / width)
    }
}

/// Uniform trapezoid nodes on `[-A_f, A_f]` with tapered weights.
///
/// The `n + 1` nodes sit at spacing `2 A_f / n`; each weight is the trapezoid
/// weight (half at the two window ends) times the arc-length jacobian times
/// the taper factor, so integrals over the truncated surface become plain
/// weighted sums over the nodes.
pub fn quadrature_nodes(
    profile: &SurfaceProfile,
    a_f: f64,
    n: usize,
    taper_width: f64,
) -> Result<Vec<SurfaceNode>> {
    if !(a_f > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "truncation half-width must be positive, got {a_f}"
        )));
    }
    if n < 4 || n % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "node count must be even and at least 4, got {n}"
        )));
    }
    if !(0.0..a_f).contains(&taper_width) {
        return Err(Error::InvalidParameter(format!(
            "taper width must satisfy 0 <= width < A_f (got {taper_width} vs {a_f})"
        )));
    }
    let step = 2.0 * a_f / n as f64;
    Ok((0..=n)
        .map(|m| {
            let s = -a_f + m as f64 * step;
            let jacobian = profile.jacobian(s);
            let trapezoid = if m == 0 || m == n { 0.5 * step } else { step };
            SurfaceNode {
                s,
                point: profile.point_at(s),
                normal: profile.normal_at(s),
                jacobian,
                weight: trapezoid * jacobian * taper(s, a_f, taper_width),
            }
        })
        .collect())
}

/// Sample both band-bound invariants of the profile on `grid + 1` uniform
/// points across `[-A_f, A_f]`.
pub fn band_check(profile: &SurfaceProfile, a_f: f64, grid: usize) -> bool {
    assert!(grid >= 100, "band check needs at least 100 sample points");
    let step = 2.0 * a_f / grid as f64;
    (0..=grid).all(|m| {
        let s = -a_f + m as f64 * step;
        let (f, df) = (profile.f(s), profile.df(s));
        f >= profile.c1 && profile.c1 > 0.0 && f.abs() + df.abs() <= profile.c2
    })
}
