//! Truncated boundary-integral forward solver.
//!
//! Each scattering problem is reduced to a second-kind integral equation on
//! the truncated surface window and discretized by collocation at the
//! quadrature nodes (Nystrom).  The three systems share one shape:
//!
//! * sound-soft:   `(-1/2 I + K) phi = -u^i` with the scattered field as a
//!   double layer,
//! * impedance:    `(1/2 I + K' - i k rho S) phi = -(d/dnu - i k rho) u^i`
//!   with a single layer,
//! * transmission: a 2x2 block system in the wavenumber differences
//!   `K+ - K-`, `S+ - S-`, `T+ - T-`, `K'+ - K'-` whose hypersingular parts
//!   cancel, with combined double+single layers above and below.
//!
//! The weakly singular diagonal is handled by splitting off the logarithmic
//! part of the kernel and integrating it in closed form over the local
//! panel.  Field evaluation close to the surface switches from the plain
//! node sum to an adaptive integral of the interpolated density, so traces
//! can be compared right across the boundary.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use num_complex::Complex64;

use crate::linalg::{lu_factor, CMatrix, LuFactors};
use crate::specfun::{
    fundamental_solution_unchecked, fundamental_solution_gradient_unchecked, hankel01_unchecked,
    hankel1_unchecked, Point2,
};
use crate::surfaces::{quadrature_nodes, SurfaceNode, SurfaceProfile};
use crate::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const FRAC_1_2PI: f64 = 1.0 / (2.0 * core::f64::consts::PI);

type ImpedanceFn = Arc<dyn Fn(Point2) -> Complex64 + Send + Sync>;

/// Boundary condition on the surface.
#[derive(Clone)]
pub enum BoundaryCondition {
    /// Sound-soft: total field vanishes on the surface.
    Dirichlet,
    /// `du/dnu - i k rho u = 0` with a (possibly complex) impedance
    /// coefficient evaluated at surface points.
    Impedance(ImpedanceFn),
    /// Penetrable surface; the lower medium carries this wavenumber.
    Transmission { k_minus: f64 },
}

impl BoundaryCondition {
    pub fn impedance(rho: impl Fn(Point2) -> Complex64 + Send + Sync + 'static) -> Self {
        BoundaryCondition::Impedance(Arc::new(rho))
    }

    pub fn label(&self) -> String {
        match self {
            BoundaryCondition::Dirichlet => "dirichlet".into(),
            BoundaryCondition::Impedance(_) => "impedance".into(),
            BoundaryCondition::Transmission { k_minus } => format!("transmission:{k_minus}"),
        }
    }
}

impl std::fmt::Debug for BoundaryCondition {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundaryCondition::Dirichlet => fm.write_str("Dirichlet"),
            BoundaryCondition::Impedance(_) => fm.write_str("Impedance(..)"),
            BoundaryCondition::Transmission { k_minus } => {
                write!(fm, "Transmission {{ k_minus: {k_minus} }}")
            }
        }
    }
}

/// Horizontal measurement line `x2 = H` carrying `2N + 1` uniformly spaced
/// source/receiver points `(-A + i h, H)`, `h = A/N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasurementLine {
    height: f64,
    half_width: f64,
    n_half: usize,
}

impl MeasurementLine {
    pub fn new(height: f64, half_width: f64, n_half: usize) -> Result<Self> {
        if !(height > 0.0) || !(half_width > 0.0) || n_half == 0 {
            return Err(Error::InvalidParameter(format!(
                "measurement line needs H > 0, A > 0, N >= 1 (got H={height}, A={half_width}, N={n_half})"
            )));
        }
        Ok(MeasurementLine { height, half_width, n_half })
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n_half(&self) -> usize {
        self.n_half
    }

    /// Grid spacing `h = A/N`.
    pub fn spacing(&self) -> f64 {
        self.half_width / self.n_half as f64
    }

    /// Number of points, `2N + 1`.
    pub fn count(&self) -> usize {
        2 * self.n_half + 1
    }

    pub fn point(&self, i: usize) -> Point2 {
        Point2::new(-self.half_width + i as f64 * self.spacing(), self.height)
    }

    pub fn points(&self) -> Vec<Point2> {
        (0..self.count()).map(|i| self.point(i)).collect()
    }
}

/// Discretization parameters for cutting the unbounded surface to a window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationConfig {
    /// Surface nodes per wavelength `2 pi / k_plus`.
    pub nodes_per_wavelength: f64,
    /// Extra window half-width beyond the measurement half-width, in
    /// wavelengths.
    pub margin_wavelengths: f64,
    /// Taper band width at each window end, in wavelengths.
    pub taper_wavelengths: f64,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        TruncationConfig {
            nodes_per_wavelength: 40.0,
            margin_wavelengths: 4.0,
            taper_wavelengths: 2.0,
        }
    }
}

impl TruncationConfig {
    /// Surface window half-width for a measurement half-width `a`.
    pub fn window(&self, k: f64, a: f64) -> f64 {
        a + self.margin_wavelengths * 2.0 * core::f64::consts::PI / k
    }

    /// Even subinterval count covering `[-a_f, a_f]` at the configured node
    /// density.
    pub fn node_count(&self, k: f64, a_f: f64) -> usize {
        let lambda = 2.0 * core::f64::consts::PI / k;
        let raw = (self.nodes_per_wavelength * 2.0 * a_f / lambda).ceil() as usize;
        (raw + raw % 2).max(4)
    }

    pub fn taper_width(&self, k: f64) -> f64 {
        self.taper_wavelengths * 2.0 * core::f64::consts::PI / k
    }

    /// Quadrature nodes for this configuration.
    pub fn surface_nodes(
        &self,
        profile: &SurfaceProfile,
        k: f64,
        a: f64,
    ) -> Result<Vec<SurfaceNode>> {
        let a_f = self.window(k, a);
        quadrature_nodes(profile, a_f, self.node_count(k, a_f), self.taper_width(k))
    }
}

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

/// Double-layer kernel `dPhi/dnu(y) = (i k/4) H1(k r) (nu(y).(x-y))/r`.
#[inline]
fn kernel_double(k: f64, x: Point2, y: Point2, nu_y: Point2) -> Complex64 {
    let r = x.distance(y);
    let b = nu_y.x1 * (x.x1 - y.x1) + nu_y.x2 * (x.x2 - y.x2);
    Complex64::new(0.0, 0.25 * k * b / r) * hankel1_unchecked(1, k * r)
}

/// Adjoint double-layer kernel `dPhi/dnu(x) = -(i k/4) H1(k r)
/// (nu(x).(x-y))/r`.
#[inline]
fn kernel_double_adjoint(k: f64, x: Point2, y: Point2, nu_x: Point2) -> Complex64 {
    let r = x.distance(y);
    let a = nu_x.x1 * (x.x1 - y.x1) + nu_x.x2 * (x.x2 - y.x2);
    Complex64::new(0.0, -0.25 * k * a / r) * hankel1_unchecked(1, k * r)
}

/// Gradient in `x` of the double-layer kernel.
#[inline]
fn kernel_double_gradient(k: f64, x: Point2, y: Point2, nu_y: Point2) -> [Complex64; 2] {
    let (dx1, dx2) = (x.x1 - y.x1, x.x2 - y.x2);
    let r = dx1.hypot(dx2);
    let b = nu_y.x1 * dx1 + nu_y.x2 * dx2;
    let (h0, h1) = hankel01_unchecked(k * r);
    // (i k/4) [ k b H0 (x-y)/r^2 - 2 b H1 (x-y)/r^3 + H1 nu(y)/r ]
    let radial = Complex64::new(0.0, 0.25 * k) * (k * b / (r * r) * h0 - 2.0 * b / (r * r * r) * h1);
    let along_nu = Complex64::new(0.0, 0.25 * k / r) * h1;
    [radial * dx1 + along_nu * nu_y.x1, radial * dx2 + along_nu * nu_y.x2]
}

/// Diagonal limit of both double-layer kernels: `-f''/(4 pi J^3)`, with the
/// second derivative taken by central differences of the stored slope.
fn double_layer_diagonal(profile: &SurfaceProfile, s: f64) -> f64 {
    let h = 1e-5;
    let fpp = (profile.df(s + h) - profile.df(s - h)) / (2.0 * h);
    let j = profile.jacobian(s);
    -fpp / (4.0 * core::f64::consts::PI * j * j * j)
}

/// Smooth part of the single-layer kernel at zero distance:
/// `Phi + (1/2pi) ln r -> i/4 - (ln(k/2) + gamma)/(2 pi)`.
fn single_layer_smooth_at_zero(k: f64) -> Complex64 {
    Complex64::new(-((0.5 * k).ln() + EULER_GAMMA) * FRAC_1_2PI, 0.25)
}

/// Closed-form integral of the log split over the local panel of width
/// `width` around the node: `int ln(j |t|) dt = width (ln(j width/2) - 1)`,
/// divided by `width` so it can be scaled by the node weight.
fn log_panel_mean(jacobian: f64, width: f64) -> f64 {
    (jacobian * 0.5 * width).ln() - 1.0
}

/// Difference `T_{k+} - T_{k-}` of the hypersingular kernels; the
/// `1/(2 pi r^2)` and `a b/(pi r^4)` parts carry no wavenumber and cancel
/// inside the Hankel differences `g0`, `g1` before the geometry factors blow
/// them up.
#[inline]
fn kernel_t_difference(
    k_plus: f64,
    k_minus: f64,
    x: Point2,
    y: Point2,
    nu_x: Point2,
    nu_y: Point2,
) -> Complex64 {
    let (dx1, dx2) = (x.x1 - y.x1, x.x2 - y.x2);
    let r = dx1.hypot(dx2);
    let a = nu_x.x1 * dx1 + nu_x.x2 * dx2;
    let b = nu_y.x1 * dx1 + nu_y.x2 * dx2;
    let nn = nu_x.x1 * nu_y.x1 + nu_x.x2 * nu_y.x2;
    let (h0p, h1p) = hankel01_unchecked(k_plus * r);
    let (h0m, h1m) = hankel01_unchecked(k_minus * r);
    let g0 = k_plus * k_plus * h0p - k_minus * k_minus * h0m;
    let g1 = k_plus * h1p - k_minus * h1m;
    let r2 = r * r;
    Complex64::new(0.0, 0.25 * a * b / r2) * g0
        + Complex64::new(0.0, nn / (4.0 * r) - a * b / (2.0 * r2 * r)) * g1
}

/// Log-split constants of the `T` difference kernel: coefficient of `ln r`
/// and the remaining diagonal value.
fn t_difference_diagonal(k_plus: f64, k_minus: f64) -> (f64, Complex64) {
    let d2 = k_plus * k_plus - k_minus * k_minus;
    let lam = k_plus * k_plus * (0.5 * k_plus).ln() - k_minus * k_minus * (0.5 * k_minus).ln();
    let c_log = -d2 / (4.0 * core::f64::consts::PI);
    let rest = Complex64::new(
        d2 / (8.0 * core::f64::consts::PI) - (lam + EULER_GAMMA * d2) / (4.0 * core::f64::consts::PI),
        d2 / 8.0,
    );
    (c_log, rest)
}

// ---------------------------------------------------------------------------
// Assembly and solves
// ---------------------------------------------------------------------------

static FACTORIZATIONS: AtomicU64 = AtomicU64::new(0);

/// Number of LU factorizations performed by this process so far; lets tests
/// and run manifests confirm the factorize-once contract.
pub fn factorization_count() -> u64 {
    FACTORIZATIONS.load(Ordering::Relaxed)
}

/// An assembled, LU-factorized boundary system, reusable for any number of
/// sources.
pub struct AssembledSystem {
    bc: BoundaryCondition,
    k_plus: f64,
    nodes: Arc<Vec<SurfaceNode>>,
    step: f64,
    lu: LuFactors,
    factorization_id: u64,
}

/// One solved density (pair of densities for the transmission problem),
/// carrying everything field evaluation needs.
pub struct DensitySolution {
    pub nodes: Arc<Vec<SurfaceNode>>,
    pub step: f64,
    pub values: DensityValues,
    pub factorization_id: u64,
}

#[derive(Clone, Debug)]
pub enum DensityValues {
    One(Vec<Complex64>),
    Pair(Vec<Complex64>, Vec<Complex64>),
}

/// Assembles and factorizes the boundary system for the given condition.
pub fn assemble(
    bc: &BoundaryCondition,
    surface: &SurfaceProfile,
    k_plus: f64,
    nodes: Vec<SurfaceNode>,
) -> Result<AssembledSystem> {
    if let BoundaryCondition::Transmission { k_minus } = bc {
        if !(*k_minus > 0.0) {
            return Err(Error::BoundaryCondition(format!(
                "transmission wavenumber must be positive, got {k_minus}"
            )));
        }
        if *k_minus == k_plus {
            return Err(Error::BoundaryCondition(
                "transmission requires k_minus distinct from k_plus".into(),
            ));
        }
    }
    assemble_raw(bc, surface, k_plus, nodes)
}

/// Assembly without the `k_minus != k_plus` guard, so tests can exercise the
/// equal-wavenumber degeneracy of the transmission blocks.
pub(crate) fn assemble_raw(
    bc: &BoundaryCondition,
    surface: &SurfaceProfile,
    k_plus: f64,
    nodes: Vec<SurfaceNode>,
) -> Result<AssembledSystem> {
    if nodes.len() < 2 {
        return Err(Error::InvalidParameter("need at least two surface nodes".into()));
    }
    if !(k_plus > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "wavenumber must be positive, got {k_plus}"
        )));
    }
    let step = nodes[1].s - nodes[0].s;
    let matrix = match bc {
        BoundaryCondition::Dirichlet => assemble_dirichlet(surface, k_plus, &nodes, step),
        BoundaryCondition::Impedance(rho) => assemble_impedance(surface, k_plus, rho, &nodes, step),
        BoundaryCondition::Transmission { k_minus } => {
            assemble_transmission(k_plus, *k_minus, &nodes, step)
        }
    };
    let lu = lu_factor(matrix)?;
    let factorization_id = FACTORIZATIONS.fetch_add(1, Ordering::Relaxed) + 1;
    Ok(AssembledSystem {
        bc: bc.clone(),
        k_plus,
        nodes: Arc::new(nodes),
        step,
        lu,
        factorization_id,
    })
}

fn assemble_dirichlet(
    surface: &SurfaceProfile,
    k: f64,
    nodes: &[SurfaceNode],
    _step: f64,
) -> CMatrix {
    let n = nodes.len();
    let mut a = CMatrix::zeros(n, n);
    for m in 0..n {
        let xm = nodes[m].point;
        let row = a.row_mut(m);
        for (q, node) in nodes.iter().enumerate() {
            row[q] = if q == m {
                Complex64::new(-0.5 + node.weight * double_layer_diagonal(surface, node.s), 0.0)
            } else {
                node.weight * kernel_double(k, xm, node.point, node.normal)
            };
        }
    }
    a
}

fn assemble_impedance(
    surface: &SurfaceProfile,
    k: f64,
    rho: &ImpedanceFn,
    nodes: &[SurfaceNode],
    step: f64,
) -> CMatrix {
    let n = nodes.len();
    let mut a = CMatrix::zeros(n, n);
    for m in 0..n {
        let xm = nodes[m].point;
        let nu_m = nodes[m].normal;
        let ik_rho = Complex64::new(0.0, k) * rho(xm);
        let row = a.row_mut(m);
        for (q, node) in nodes.iter().enumerate() {
            row[q] = if q == m {
                let single = Complex64::new(-FRAC_1_2PI * log_panel_mean(node.jacobian, step), 0.0)
                    + single_layer_smooth_at_zero(k);
                Complex64::new(0.5 + node.weight * double_layer_diagonal(surface, node.s), 0.0)
                    - ik_rho * node.weight * single
            } else {
                node.weight
                    * (kernel_double_adjoint(k, xm, node.point, nu_m)
                        - ik_rho * fundamental_solution_unchecked(k, xm, node.point))
            };
        }
    }
    a
}

fn assemble_transmission(k_plus: f64, k_minus: f64, nodes: &[SurfaceNode], step: f64) -> CMatrix {
    let n = nodes.len();
    let (c_log, t_rest) = t_difference_diagonal(k_plus, k_minus);
    let s_diag = -FRAC_1_2PI * (k_plus / k_minus).ln();
    let mut a = CMatrix::zeros(2 * n, 2 * n);
    for m in 0..n {
        let xm = nodes[m].point;
        let nu_m = nodes[m].normal;
        for (q, node) in nodes.iter().enumerate() {
            let (b11, b12, b21, b22);
            if q == m {
                b11 = Complex64::new(-1.0, 0.0);
                b12 = Complex64::new(node.weight * s_diag, 0.0);
                b21 = node.weight * (c_log * log_panel_mean(node.jacobian, step) + t_rest);
                b22 = Complex64::new(1.0, 0.0);
            } else {
                let y = node.point;
                let nu_q = node.normal;
                let w = node.weight;
                b11 = w
                    * (kernel_double(k_plus, xm, y, nu_q) - kernel_double(k_minus, xm, y, nu_q));
                b12 = w
                    * (fundamental_solution_unchecked(k_plus, xm, y)
                        - fundamental_solution_unchecked(k_minus, xm, y));
                b21 = w * kernel_t_difference(k_plus, k_minus, xm, y, nu_m, nu_q);
                b22 = w
                    * (kernel_double_adjoint(k_plus, xm, y, nu_m)
                        - kernel_double_adjoint(k_minus, xm, y, nu_m));
            }
            a.set(m, q, b11);
            a.set(m, n + q, b12);
            a.set(n + m, q, b21);
            a.set(n + m, n + q, b22);
        }
    }
    a
}

impl AssembledSystem {
    pub fn size(&self) -> usize {
        self.lu.size()
    }

    pub fn condition_estimate(&self) -> f64 {
        self.lu.condition_estimate()
    }

    pub fn factorization_id(&self) -> u64 {
        self.factorization_id
    }

    pub fn nodes(&self) -> &[SurfaceNode] {
        &self.nodes
    }

    pub fn boundary_condition(&self) -> &BoundaryCondition {
        &self.bc
    }

    pub fn k_plus(&self) -> f64 {
        self.k_plus
    }

    fn check_source(&self, source: Point2) -> Result<()> {
        // The surface height at the source abscissa, interpolated from the
        // nodes when inside the window.
        let f_below = self
            .nodes
            .iter()
            .min_by(|p, q| {
                (p.s - source.x1).abs().partial_cmp(&(q.s - source.x1).abs()).unwrap()
            })
            .map(|node| node.point.x2)
            .unwrap();
        if source.x2 <= f_below {
            return Err(Error::Geometry(format!(
                "source ({}, {}) is not strictly above the surface (height {f_below})",
                source.x1, source.x2
            )));
        }
        Ok(())
    }

    fn right_hand_side(&self, source: Point2) -> Vec<Complex64> {
        let n = self.nodes.len();
        match &self.bc {
            BoundaryCondition::Dirichlet => self
                .nodes
                .iter()
                .map(|node| -fundamental_solution_unchecked(self.k_plus, node.point, source))
                .collect(),
            BoundaryCondition::Impedance(rho) => self
                .nodes
                .iter()
                .map(|node| {
                    let grad =
                        fundamental_solution_gradient_unchecked(self.k_plus, node.point, source);
                    let dn = grad[0] * node.normal.x1 + grad[1] * node.normal.x2;
                    let phi = fundamental_solution_unchecked(self.k_plus, node.point, source);
                    -(dn - Complex64::new(0.0, self.k_plus) * rho(node.point) * phi)
                })
                .collect(),
            BoundaryCondition::Transmission { .. } => {
                let mut rhs = Vec::with_capacity(2 * n);
                for node in self.nodes.iter() {
                    rhs.push(-fundamental_solution_unchecked(self.k_plus, node.point, source));
                }
                for node in self.nodes.iter() {
                    let grad =
                        fundamental_solution_gradient_unchecked(self.k_plus, node.point, source);
                    rhs.push(-(grad[0] * node.normal.x1 + grad[1] * node.normal.x2));
                }
                rhs
            }
        }
    }

    fn density_from(&self, solved: Vec<Complex64>) -> DensitySolution {
        let n = self.nodes.len();
        let values = if matches!(self.bc, BoundaryCondition::Transmission { .. }) {
            let (phi1, phi2) = solved.split_at(n);
            DensityValues::Pair(phi1.to_vec(), phi2.to_vec())
        } else {
            DensityValues::One(solved)
        };
        DensitySolution {
            nodes: Arc::clone(&self.nodes),
            step: self.step,
            values,
            factorization_id: self.factorization_id,
        }
    }
}

/// Solves the cached system for one point source above the surface.
pub fn solve_density(system: &AssembledSystem, source: Point2) -> Result<DensitySolution> {
    system.check_source(source)?;
    let mut rhs = system.right_hand_side(source);
    system.lu.solve_in_place(&mut rhs);
    Ok(system.density_from(rhs))
}

/// Solves one back-substitution per source against the shared factorization.
pub fn solve_densities(
    system: &AssembledSystem,
    sources: &[Point2],
) -> Result<Vec<DensitySolution>> {
    for &s in sources {
        system.check_source(s)?;
    }
    let mut columns: Vec<Vec<Complex64>> =
        sources.iter().map(|&s| system.right_hand_side(s)).collect();
    system.lu.solve_columns(&mut columns);
    Ok(columns.into_iter().map(|col| system.density_from(col)).collect())
}

// ---------------------------------------------------------------------------
// Field evaluation
// ---------------------------------------------------------------------------

/// Which layer combination a field sum runs over.
#[derive(Clone, Copy)]
struct LayerMix<'a> {
    k: f64,
    /// Density against the double-layer kernel, if any.
    double: Option<&'a [Complex64]>,
    /// Density against the single-layer kernel, if any.
    single: Option<&'a [Complex64]>,
}

/// Distance from an evaluation point to the node polyline, and the height of
/// the (interpolated) surface under the point.
fn surface_clearance(nodes: &[SurfaceNode], step: f64, x: Point2) -> (f64, f64) {
    let n = nodes.len();
    let idx = ((x.x1 - nodes[0].s) / step).round().clamp(0.0, (n - 1) as f64) as usize;
    let lo = idx.saturating_sub(2);
    let hi = (idx + 2).min(n - 1);
    let mut dmin = f64::INFINITY;
    for node in &nodes[lo..=hi] {
        dmin = dmin.min(x.distance(node.point));
    }
    let f_under = if n >= 6 && x.x1 >= nodes[0].s && x.x1 <= nodes[n - 1].s {
        interpolate_height(nodes, step, x.x1)
    } else {
        nodes[idx].point.x2
    };
    (dmin.min((x.x2 - f_under).abs()), f_under)
}

fn stencil_range(nodes: &[SurfaceNode], step: f64, sigma: f64) -> std::ops::Range<usize> {
    let n = nodes.len();
    let j = ((sigma - nodes[0].s) / step).floor() as isize;
    let start = (j - 2).clamp(0, n as isize - 6) as usize;
    start..start + 6
}

fn lagrange_weights(nodes: &[SurfaceNode], range: &std::ops::Range<usize>, sigma: f64) -> [f64; 6] {
    let mut w = [0.0; 6];
    for i in 0..6 {
        let si = nodes[range.start + i].s;
        let mut acc = 1.0;
        for l in 0..6 {
            if l != i {
                let sl = nodes[range.start + l].s;
                acc *= (sigma - sl) / (si - sl);
            }
        }
        w[i] = acc;
    }
    w
}

fn interpolate_height(nodes: &[SurfaceNode], step: f64, sigma: f64) -> f64 {
    let range = stencil_range(nodes, step, sigma);
    let w = lagrange_weights(nodes, &range, sigma);
    (0..6).map(|i| w[i] * nodes[range.start + i].point.x2).sum()
}

/// Geometry and density data interpolated at an off-node surface parameter.
struct InterpPoint {
    point: Point2,
    normal: Point2,
    /// Quadrature weight per unit parameter (jacobian times taper).
    weight_density: f64,
    double: Complex64,
    single: Complex64,
}

fn interpolate(
    nodes: &[SurfaceNode],
    step: f64,
    mix: &LayerMix,
    sigma: f64,
) -> InterpPoint {
    let range = stencil_range(nodes, step, sigma);
    let w = lagrange_weights(nodes, &range, sigma);
    let last = nodes.len() - 1;
    let mut x2 = 0.0;
    let mut nu = (0.0, 0.0);
    let mut wd = 0.0;
    let mut dens_d = Complex64::ZERO;
    let mut dens_s = Complex64::ZERO;
    for i in 0..6 {
        let q = range.start + i;
        let node = &nodes[q];
        let trapezoid = if q == 0 || q == last { 0.5 * step } else { step };
        x2 += w[i] * node.point.x2;
        nu.0 += w[i] * node.normal.x1;
        nu.1 += w[i] * node.normal.x2;
        wd += w[i] * node.weight / trapezoid;
        if let Some(d) = mix.double {
            dens_d += w[i] * d[q];
        }
        if let Some(s) = mix.single {
            dens_s += w[i] * s[q];
        }
    }
    let len = nu.0.hypot(nu.1);
    InterpPoint {
        point: Point2::new(sigma, x2),
        normal: Point2::new(nu.0 / len, nu.1 / len),
        weight_density: wd,
        double: dens_d,
        single: dens_s,
    }
}

/// Value and gradient of the layer-mix integrand at one interpolated point.
fn integrand_at(mix: &LayerMix, nodes: &[SurfaceNode], step: f64, x: Point2, sigma: f64) -> [Complex64; 3] {
    let ip = interpolate(nodes, step, mix, sigma);
    let mut out = [Complex64::ZERO; 3];
    if mix.double.is_some() {
        let v = kernel_double(mix.k, x, ip.point, ip.normal);
        let g = kernel_double_gradient(mix.k, x, ip.point, ip.normal);
        let c = ip.weight_density * ip.double;
        out[0] += v * c;
        out[1] += g[0] * c;
        out[2] += g[1] * c;
    }
    if mix.single.is_some() {
        let v = fundamental_solution_unchecked(mix.k, x, ip.point);
        let g = fundamental_solution_gradient_unchecked(mix.k, x, ip.point);
        let c = ip.weight_density * ip.single;
        out[0] += v * c;
        out[1] += g[0] * c;
        out[2] += g[1] * c;
    }
    out
}

fn add3(a: [Complex64; 3], b: [Complex64; 3]) -> [Complex64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn norm3(a: &[Complex64; 3]) -> f64 {
    a[0].norm() + a[1].norm() + a[2].norm()
}

/// Adaptive Simpson integration of the interpolated layer integrand; used
/// only inside the near-surface refinement window.
#[allow(clippy::too_many_arguments)]
fn adaptive_panel(
    mix: &LayerMix,
    nodes: &[SurfaceNode],
    step: f64,
    x: Point2,
    a: f64,
    b: f64,
    fa: [Complex64; 3],
    fm: [Complex64; 3],
    fb: [Complex64; 3],
    tol: f64,
    depth: u32,
) -> [Complex64; 3] {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let flm = integrand_at(mix, nodes, step, x, lm);
    let frm = integrand_at(mix, nodes, step, x, rm);
    let h6 = (b - a) / 6.0;
    let whole: [Complex64; 3] = core::array::from_fn(|i| h6 * (fa[i] + 4.0 * fm[i] + fb[i]));
    let left: [Complex64; 3] = core::array::from_fn(|i| 0.5 * h6 * (fa[i] + 4.0 * flm[i] + fm[i]));
    let right: [Complex64; 3] = core::array::from_fn(|i| 0.5 * h6 * (fm[i] + 4.0 * frm[i] + fb[i]));
    let split = add3(left, right);
    let err: [Complex64; 3] = core::array::from_fn(|i| split[i] - whole[i]);
    if depth == 0 || norm3(&err) < 15.0 * tol {
        core::array::from_fn(|i| split[i] + (split[i] - whole[i]) / 15.0)
    } else {
        let l = adaptive_panel(mix, nodes, step, x, a, m, fa, flm, fm, 0.5 * tol, depth - 1);
        let r = adaptive_panel(mix, nodes, step, x, m, b, fm, frm, fb, 0.5 * tol, depth - 1);
        add3(l, r)
    }
}

/// Distance (in node spacings) below which the plain node sum is replaced by
/// the refined local integral.
const REFINE_TRIGGER: f64 = 4.0;
/// Half-width of the refined window, in node spacings.
const REFINE_WINDOW: f64 = 12.0;

/// Field value and gradient of the layer mix at one evaluation point.
fn field_at(mix: &LayerMix, nodes: &[SurfaceNode], step: f64, x: Point2) -> Result<[Complex64; 3]> {
    let (clearance, _) = surface_clearance(nodes, step, x);
    if clearance < 1e-9 {
        return Err(Error::Geometry(format!(
            "evaluation point ({}, {}) lies on the surface",
            x.x1, x.x2
        )));
    }

    let mut acc = [Complex64::ZERO; 3];
    for (q, node) in nodes.iter().enumerate() {
        if node.weight == 0.0 {
            continue;
        }
        let mut term = [Complex64::ZERO; 3];
        if let Some(d) = mix.double {
            let v = kernel_double(mix.k, x, node.point, node.normal);
            let g = kernel_double_gradient(mix.k, x, node.point, node.normal);
            term[0] += v * d[q];
            term[1] += g[0] * d[q];
            term[2] += g[1] * d[q];
        }
        if let Some(sd) = mix.single {
            let v = fundamental_solution_unchecked(mix.k, x, node.point);
            let g = fundamental_solution_gradient_unchecked(mix.k, x, node.point);
            term[0] += v * sd[q];
            term[1] += g[0] * sd[q];
            term[2] += g[1] * sd[q];
        }
        for (slot, t) in acc.iter_mut().zip(term) {
            *slot += node.weight * t;
        }
    }

    if clearance < REFINE_TRIGGER * step && nodes.len() >= 6 {
        // Remove the coarse contributions of the window nodes and integrate
        // the interpolated density there instead.
        let n = nodes.len();
        let center = ((x.x1 - nodes[0].s) / step).round().clamp(0.0, (n - 1) as f64) as usize;
        let half = REFINE_WINDOW as usize;
        let lo = center.saturating_sub(half);
        let hi = (center + half).min(n - 1);
        for (q, node) in nodes.iter().enumerate().take(hi + 1).skip(lo) {
            if node.weight == 0.0 {
                continue;
            }
            // Window-edge nodes keep half their trapezoid weight in the tail
            // sum, so only the inner half is replaced by the integral.
            let edge = if (q == lo && lo > 0) || (q == hi && hi < n - 1) { 0.5 } else { 1.0 };
            let mut term = [Complex64::ZERO; 3];
            if let Some(d) = mix.double {
                let v = kernel_double(mix.k, x, node.point, node.normal);
                let g = kernel_double_gradient(mix.k, x, node.point, node.normal);
                term[0] += v * d[q];
                term[1] += g[0] * d[q];
                term[2] += g[1] * d[q];
            }
            if let Some(sd) = mix.single {
                let v = fundamental_solution_unchecked(mix.k, x, node.point);
                let g = fundamental_solution_gradient_unchecked(mix.k, x, node.point);
                term[0] += v * sd[q];
                term[1] += g[0] * sd[q];
                term[2] += g[1] * sd[q];
            }
            for (slot, t) in acc.iter_mut().zip(term) {
                *slot -= edge * node.weight * t;
            }
        }
        let (a, b) = (nodes[lo].s, nodes[hi].s);
        let fa = integrand_at(mix, nodes, step, x, a);
        let fb = integrand_at(mix, nodes, step, x, b);
        let fm = integrand_at(mix, nodes, step, x, 0.5 * (a + b));
        let tol = 1e-9 * (norm3(&acc) + 1.0);
        let fine = adaptive_panel(mix, nodes, step, x, a, b, fa, fm, fb, tol, 30);
        acc = add3(acc, fine);
    }
    Ok(acc)
}

fn mix_above<'a>(
    density: &'a DensitySolution,
    bc: &BoundaryCondition,
    k_plus: f64,
) -> Result<LayerMix<'a>> {
    match (&density.values, bc) {
        (DensityValues::One(phi), BoundaryCondition::Dirichlet) => {
            Ok(LayerMix { k: k_plus, double: Some(phi), single: None })
        }
        (DensityValues::One(phi), BoundaryCondition::Impedance(_)) => {
            Ok(LayerMix { k: k_plus, double: None, single: Some(phi) })
        }
        (DensityValues::Pair(phi1, phi2), BoundaryCondition::Transmission { .. }) => {
            Ok(LayerMix { k: k_plus, double: Some(phi1), single: Some(phi2) })
        }
        _ => Err(Error::BoundaryCondition(
            "density solution does not match the boundary condition".into(),
        )),
    }
}

/// Scattered field above the surface at each evaluation point.
pub fn scattered_field(
    density: &DensitySolution,
    bc: &BoundaryCondition,
    k_plus: f64,
    eval_points: &[Point2],
) -> Result<Vec<Complex64>> {
    Ok(scattered_field_with_gradient(density, bc, k_plus, eval_points)?
        .into_iter()
        .map(|(v, _)| v)
        .collect())
}

/// Scattered field and its gradient above the surface.
pub fn scattered_field_with_gradient(
    density: &DensitySolution,
    bc: &BoundaryCondition,
    k_plus: f64,
    eval_points: &[Point2],
) -> Result<Vec<(Complex64, [Complex64; 2])>> {
    let mix = mix_above(density, bc, k_plus)?;
    let nodes = &density.nodes;
    eval_points
        .iter()
        .map(|&x| {
            let (_, f_under) = surface_clearance(nodes, density.step, x);
            if x.x2 <= f_under {
                return Err(Error::Geometry(format!(
                    "evaluation point ({}, {}) is not above the surface",
                    x.x1, x.x2
                )));
            }
            let v = field_at(&mix, nodes, density.step, x)?;
            Ok((v[0], [v[1], v[2]]))
        })
        .collect()
}

/// Transmitted field below a penetrable surface.
pub fn transmitted_field(
    density: &DensitySolution,
    k_minus: f64,
    eval_points: &[Point2],
) -> Result<Vec<Complex64>> {
    Ok(transmitted_field_with_gradient(density, k_minus, eval_points)?
        .into_iter()
        .map(|(v, _)| v)
        .collect())
}

/// Transmitted field and gradient below a penetrable surface.
pub fn transmitted_field_with_gradient(
    density: &DensitySolution,
    k_minus: f64,
    eval_points: &[Point2],
) -> Result<Vec<(Complex64, [Complex64; 2])>> {
    let DensityValues::Pair(phi1, phi2) = &density.values else {
        return Err(Error::BoundaryCondition(
            "transmitted field requires a transmission density pair".into(),
        ));
    };
    if !(k_minus > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "wavenumber must be positive, got {k_minus}"
        )));
    }
    let mix = LayerMix { k: k_minus, double: Some(phi1), single: Some(phi2) };
    let nodes = &density.nodes;
    eval_points
        .iter()
        .map(|&x| {
            let (_, f_under) = surface_clearance(nodes, density.step, x);
            if x.x2 >= f_under {
                return Err(Error::Geometry(format!(
                    "evaluation point ({}, {}) is not below the surface",
                    x.x1, x.x2
                )));
            }
            let v = field_at(&mix, nodes, density.step, x)?;
            Ok((v[0], [v[1], v[2]]))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Cauchy data
// ---------------------------------------------------------------------------

/// Near-field Cauchy data of one experiment: scattered field and its upward
/// normal derivative on the measurement line, for every source on the same
/// line.  Entry `[i][j]` belongs to receiver `i` and source `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct CauchyDataSet {
    pub line: MeasurementLine,
    pub k_plus: f64,
    pub bc_label: String,
    pub surface_label: String,
    pub us: CMatrix,
    pub dnus: CMatrix,
    pub noise_delta: f64,
    pub seed: u64,
}

/// Solver bookkeeping from one Cauchy-data run, for logs and manifests.
#[derive(Clone, Copy, Debug)]
pub struct ForwardDetails {
    /// Quadrature nodes on the truncated surface window.
    pub node_count: usize,
    /// Reciprocal-pivot condition estimate of the factored system.
    pub condition_estimate: f64,
    /// Identity of the single LU factorization shared by all sources.
    pub factorization_id: u64,
}

/// Simulates the full source sweep: one assembly, `2N + 1` solves, and field
/// plus vertical-derivative evaluation at all receivers.
pub fn cauchy_data(
    bc: &BoundaryCondition,
    surface: &SurfaceProfile,
    k_plus: f64,
    line: &MeasurementLine,
    trunc: &TruncationConfig,
) -> Result<CauchyDataSet> {
    Ok(cauchy_data_with_details(bc, surface, k_plus, line, trunc)?.0)
}

/// [`cauchy_data`] plus the solver bookkeeping that the data set itself does
/// not carry.
pub fn cauchy_data_with_details(
    bc: &BoundaryCondition,
    surface: &SurfaceProfile,
    k_plus: f64,
    line: &MeasurementLine,
    trunc: &TruncationConfig,
) -> Result<(CauchyDataSet, ForwardDetails)> {
    let nodes = trunc.surface_nodes(surface, k_plus, line.half_width())?;
    let lambda = 2.0 * core::f64::consts::PI / k_plus;
    let f_max = nodes.iter().map(|nd| nd.point.x2).fold(f64::NEG_INFINITY, f64::max);
    if line.height() <= f_max + 0.1 * lambda {
        return Err(Error::Geometry(format!(
            "measurement height {} must clear the surface maximum {f_max} by 0.1 wavelengths",
            line.height()
        )));
    }

    let system = assemble(bc, surface, k_plus, nodes)?;
    let sources = line.points();
    let mut columns: Vec<Vec<Complex64>> =
        sources.iter().map(|&s| system.right_hand_side(s)).collect();
    system.lu.solve_columns(&mut columns);

    // Receiver kernel rows (weighted), shared across sources.
    let n = system.nodes.len();
    let count = line.count();
    let mut us = CMatrix::zeros(count, count);
    let mut dnus = CMatrix::zeros(count, count);
    let tsp = matches!(system.bc, BoundaryCondition::Transmission { .. });
    let single_only = matches!(system.bc, BoundaryCondition::Impedance(_));

    let mut row_val = vec![Complex64::ZERO; 2 * n];
    let mut row_der = vec![Complex64::ZERO; 2 * n];
    for i in 0..count {
        let xi = line.point(i);
        for (q, node) in system.nodes.iter().enumerate() {
            let w = node.weight;
            if tsp {
                let vd = kernel_double(k_plus, xi, node.point, node.normal);
                let gd = kernel_double_gradient(k_plus, xi, node.point, node.normal);
                let vs = fundamental_solution_unchecked(k_plus, xi, node.point);
                let gs = fundamental_solution_gradient_unchecked(k_plus, xi, node.point);
                row_val[q] = w * vd;
                row_val[n + q] = w * vs;
                row_der[q] = w * gd[1];
                row_der[n + q] = w * gs[1];
            } else if single_only {
                let vs = fundamental_solution_unchecked(k_plus, xi, node.point);
                let gs = fundamental_solution_gradient_unchecked(k_plus, xi, node.point);
                row_val[q] = w * vs;
                row_der[q] = w * gs[1];
            } else {
                let vd = kernel_double(k_plus, xi, node.point, node.normal);
                let gd = kernel_double_gradient(k_plus, xi, node.point, node.normal);
                row_val[q] = w * vd;
                row_der[q] = w * gd[1];
            }
        }
        let width = if tsp { 2 * n } else { n };
        for (j, col) in columns.iter().enumerate() {
            let mut v = Complex64::ZERO;
            let mut d = Complex64::ZERO;
            for q in 0..width {
                v += row_val[q] * col[q];
                d += row_der[q] * col[q];
            }
            us.set(i, j, v);
            dnus.set(i, j, d);
        }
    }

    let details = ForwardDetails {
        node_count: n,
        condition_estimate: system.condition_estimate(),
        factorization_id: system.factorization_id(),
    };
    Ok((
        CauchyDataSet {
            line: *line,
            k_plus,
            bc_label: system.bc.label(),
            surface_label: surface.label().to_string(),
            us,
            dnus,
            noise_delta: 0.0,
            seed: 0,
        },
        details,
    ))
}

// ---------------------------------------------------------------------------
// Flat-plane oracle
// ---------------------------------------------------------------------------

/// Exact scattered field of a sound-soft flat plane `x2 = c` under a point
/// source at `y`, by reflection: `u^s(x) = -Phi(x, y*)` with
/// `y* = (y1, 2c - y2)`, together with its `x2` derivative.
pub fn flat_plane_oracle(c: f64, k: f64, x: Point2, y: Point2) -> Result<(Complex64, Complex64)> {
    if x.x2 <= c || y.x2 <= c {
        return Err(Error::Geometry(format!(
            "flat-plane oracle needs both points above x2 = {c} (got {} and {})",
            x.x2, y.x2
        )));
    }
    if !(k > 0.0) {
        return Err(Error::InvalidParameter(format!("wavenumber must be positive, got {k}")));
    }
    let image = Point2::new(y.x1, 2.0 * c - y.x2);
    let value = -fundamental_solution_unchecked(k, x, image);
    let grad = fundamental_solution_gradient_unchecked(k, x, image);
    Ok((value, -grad[1]))
}

/// Closed-form Cauchy dataset for a flat sound-soft plane at the given
/// height; the reference input for imaging tests that bypass the solver.
pub fn oracle_cauchy_data(height: f64, k: f64, line: &MeasurementLine) -> Result<CauchyDataSet> {
    if line.height() <= height {
        return Err(Error::Geometry(format!(
            "measurement height {} must exceed the plane height {height}",
            line.height()
        )));
    }
    let count = line.count();
    let mut us = CMatrix::zeros(count, count);
    let mut dnus = CMatrix::zeros(count, count);
    for i in 0..count {
        let xi = line.point(i);
        for j in 0..count {
            let (v, d) = flat_plane_oracle(height, k, xi, line.point(j))?;
            us.set(i, j, v);
            dnus.set(i, j, d);
        }
    }
    Ok(CauchyDataSet {
        line: *line,
        k_plus: k,
        bc_label: "dirichlet".into(),
        surface_label: format!("flat:{height}"),
        us,
        dnus,
        noise_delta: 0.0,
        seed: 0,
    })
}
