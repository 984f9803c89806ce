//! Acoustic rough-surface scattering and near-field imaging.
//!
//! The crate simulates time-harmonic point-source scattering by an unbounded
//! rough surface in two dimensions and reconstructs the surface from the
//! resulting near-field Cauchy data.  The forward solver discretizes boundary
//! integral equations of the second kind on a truncated, tapered section of
//! the surface (Nystrom method with trapezoid quadrature and analytic
//! handling of the logarithmic kernel singularity) for three boundary
//! conditions: sound-soft (Dirichlet), impedance, and penetrable
//! (transmission).  The imaging side evaluates a direct sampling indicator
//! built from a reciprocity-gap integral of the measured data against the
//! free-space kernel, corrected by a half-circle plane-wave term; the
//! indicator peaks on the unknown surface and needs no forward solves.
//!
//! Modules mirror the processing chain:
//!
//! * [`specfun`] - Bessel/Hankel evaluation, the free-space Helmholtz kernel
//!   and its gradient, half-circle plane-wave quadrature, and a
//!   Helmholtz-Kirchhoff identity checker.
//! * [`surfaces`] - surface profile catalog, normals, and tapered
//!   quadrature nodes on a truncated window.
//! * [`forward`] - boundary-integral assembly, dense LU solve, field
//!   evaluation, Cauchy data generation, and the flat-plane image oracle.
//! * [`imaging`] - the sampling indicator, grid sweeps, profile extraction,
//!   and reconstruction error metrics.
//! * [`experiment`] - experiment configuration, measurement noise, and
//!   dataset serialization.
//! * [`cli`] - the `forward` / `image` / `pipeline` / `verify` commands used
//!   by the thin `roughimg` binary.
//!
//! # Example
//!
//! Generate synthetic Cauchy data for a flat sound-soft surface with the
//! closed-form image oracle and locate the surface with the indicator:
//!
//! ```
//! use roughimg::forward::{oracle_cauchy_data, MeasurementLine};
//! use roughimg::imaging::indicator;
//! use roughimg::specfun::Point2;
//!
//! let line = MeasurementLine::new(1.5, 10.0, 12).unwrap();
//! let data = oracle_cauchy_data(0.8, 10.0, &line).unwrap();
//! let on = indicator(Point2::new(0.0, 0.8), &data, 64).unwrap();
//! let off = indicator(Point2::new(0.0, 1.25), &data, 64).unwrap();
//! assert!(on > off);
//! ```

pub mod cli;
pub mod experiment;
pub mod expr;
pub mod forward;
pub mod imaging;
pub mod linalg;
pub mod specfun;
pub mod surfaces;

/// Errors surfaced by every fallible operation in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A numeric argument is outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// A parameter violates a documented bound.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// Surface name not present in the catalog.
    #[error("unknown surface '{0}' (expected gamma1..gamma6 or flat:<height>)")]
    UnknownSurface(String),
    /// Points placed on the wrong side of the surface or measurement line.
    #[error("geometry error: {0}")]
    Geometry(String),
    /// Boundary condition inconsistent with the requested operation.
    #[error("boundary condition error: {0}")]
    BoundaryCondition(String),
    /// The assembled system matrix is numerically singular.
    #[error("singular system matrix (condition estimate {cond:.3e})")]
    SingularMatrix { cond: f64 },
    /// Configuration text failed to parse or validate.
    #[error("config error: {0}")]
    Config(String),
    /// Dataset file malformed or of an unsupported version.
    #[error("dataset format error: {0}")]
    Format(String),
    /// A verification suite reported at least one failed check.
    #[error("verification failed: {0}")]
    VerificationFailed(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: usage and configuration problems exit
    /// with 2, numerical failures with 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::InvalidParameter(_)
            | Error::UnknownSurface(_)
            | Error::Io(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
