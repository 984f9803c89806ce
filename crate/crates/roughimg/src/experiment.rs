//! Experiment plumbing: run configuration, measurement noise, and dataset
//! persistence.
//!
//! A run is described by a small TOML config (`[surface]`, `[physics]`,
//! `[measurement]`, `[imaging]`, `[noise]` sections).  Synthetic Cauchy data
//! can be perturbed with multiplicative complex Gaussian noise and saved to a
//! self-describing binary file or exported as CSV.

use std::io::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::forward::{BoundaryCondition, CauchyDataSet, MeasurementLine};
use crate::imaging::ImagingGrid;
use crate::linalg::CMatrix;
use crate::surfaces::{catalog, SurfaceProfile};
use crate::{expr::Expr, Error, Result};

// --- run configuration ------------------------------------------------------

/// Full description of one experiment.  Parsed from TOML text; every field
/// not listed in the file takes the documented default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Output directory for generated artifacts (top-level `output = "dir"`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub surface: SurfaceSection,
    pub physics: PhysicsSection,
    #[serde(default)]
    pub measurement: MeasurementSection,
    #[serde(default)]
    pub imaging: ImagingSection,
    #[serde(default)]
    pub noise: NoiseSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSection {
    /// Catalog name: `gamma1` .. `gamma6` or `flat:<height>`.
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    /// `dirichlet`, `impedance`, or `transmission`.
    pub bc: String,
    pub k_plus: f64,
    /// Impedance coefficient expression in `x1`, `x2` (impedance runs only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<String>,
    /// Wavenumber of the lower medium (transmission runs only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_minus: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasurementSection {
    /// Height H of the measurement line.
    pub height: f64,
    /// Half-width A of the source/receiver aperture.
    pub half_width: f64,
    /// N; the line carries 2N + 1 points.
    pub n_half: usize,
}

impl Default for MeasurementSection {
    fn default() -> Self {
        MeasurementSection { height: 1.5, half_width: 10.0, n_half: 100 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImagingSection {
    /// Angular panel count M of the half-circle quadrature.
    pub m: usize,
    /// Sampling grid, `x1min:x1max:nx1,x2min:x2max:nx2`.
    pub grid: String,
}

impl Default for ImagingSection {
    fn default() -> Self {
        ImagingSection { m: 256, grid: "-5:5:201,0.3:1.3:101".into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    /// Relative noise ratio delta; 0 disables the perturbation.
    pub delta: f64,
    pub seed: u64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection { delta: 0.0, seed: 0 }
    }
}

/// Parses and validates TOML config text.  Syntax errors keep the parser's
/// line/column diagnostics; semantic problems are collected into one message
/// listing every violated bound.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig =
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().into()))?;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    /// Canonical TOML echo of the config; `parse_config(cfg.to_text())`
    /// reproduces `cfg` exactly.
    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every documented bound and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        fn check(faults: &mut Vec<String>, ok: bool, msg: &str) {
            if !ok {
                faults.push(msg.to_string());
            }
        }
        let mut faults: Vec<String> = Vec::new();

        if let Err(e) = catalog(&self.surface.name) {
            faults.push(format!("surface.name: {e}"));
        }

        match self.physics.bc.as_str() {
            "dirichlet" => {
                check(
                    &mut faults,
                    self.physics.rho.is_none(),
                    "physics.rho: only meaningful for bc = \"impedance\"",
                );
                check(
                    &mut faults,
                    self.physics.k_minus.is_none(),
                    "physics.k_minus: only meaningful for bc = \"transmission\"",
                );
            }
            "impedance" => {
                match &self.physics.rho {
                    None => faults.push("physics.rho: required for bc = \"impedance\"".into()),
                    Some(src) => {
                        if let Err(e) = Expr::parse(src) {
                            faults.push(format!("physics.rho: {e}"));
                        }
                    }
                }
                check(
                    &mut faults,
                    self.physics.k_minus.is_none(),
                    "physics.k_minus: only meaningful for bc = \"transmission\"",
                );
            }
            "transmission" => {
                match self.physics.k_minus {
                    None => faults.push("physics.k_minus: required for bc = \"transmission\"".into()),
                    Some(km) => {
                        check(
                            &mut faults,
                            km > 0.0 && km.is_finite(),
                            "physics.k_minus: must be positive and finite",
                        );
                        check(
                            &mut faults,
                            km != self.physics.k_plus,
                            "physics.k_minus: must differ from k_plus",
                        );
                    }
                }
                check(
                    &mut faults,
                    self.physics.rho.is_none(),
                    "physics.rho: only meaningful for bc = \"impedance\"",
                );
            }
            other => faults.push(format!(
                "physics.bc: '{other}' is not one of dirichlet, impedance, transmission"
            )),
        }

        check(
            &mut faults,
            self.physics.k_plus > 0.0 && self.physics.k_plus.is_finite(),
            "physics.k_plus: must be positive and finite",
        );
        check(
            &mut faults,
            self.measurement.height > 0.0 && self.measurement.height.is_finite(),
            "measurement.height: must be positive and finite",
        );
        check(
            &mut faults,
            self.measurement.half_width > 0.0 && self.measurement.half_width.is_finite(),
            "measurement.half_width: must be positive and finite",
        );
        check(&mut faults, self.measurement.n_half >= 1, "measurement.n_half: must be at least 1");
        check(&mut faults, self.imaging.m >= 2, "imaging.m: must be at least 2");
        if let Err(e) = ImagingGrid::parse(&self.imaging.grid) {
            faults.push(format!("imaging.grid: {e}"));
        }
        check(
            &mut faults,
            self.noise.delta >= 0.0 && self.noise.delta.is_finite(),
            "noise.delta: must be nonnegative and finite",
        );

        if faults.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid config: {}", faults.join("; "))))
        }
    }

    pub fn surface(&self) -> Result<SurfaceProfile> {
        catalog(&self.surface.name)
    }

    /// Builds the runtime boundary condition, compiling the impedance
    /// expression if one is configured.
    pub fn boundary_condition(&self) -> Result<BoundaryCondition> {
        match self.physics.bc.as_str() {
            "dirichlet" => Ok(BoundaryCondition::Dirichlet),
            "impedance" => {
                let src = self.physics.rho.as_deref().ok_or_else(|| {
                    Error::Config("physics.rho: required for bc = \"impedance\"".into())
                })?;
                let rho = Expr::parse(src)?;
                Ok(BoundaryCondition::impedance(move |p| rho.eval(p.x1, p.x2)))
            }
            "transmission" => {
                let k_minus = self.physics.k_minus.ok_or_else(|| {
                    Error::Config("physics.k_minus: required for bc = \"transmission\"".into())
                })?;
                Ok(BoundaryCondition::Transmission { k_minus })
            }
            other => Err(Error::Config(format!(
                "physics.bc: '{other}' is not one of dirichlet, impedance, transmission"
            ))),
        }
    }

    /// Label stored in dataset files.  Unlike [`BoundaryCondition::label`]
    /// this keeps the impedance expression text, so a dataset records the
    /// coefficient that produced it.
    pub fn bc_label(&self) -> String {
        match self.physics.bc.as_str() {
            "impedance" => format!("impedance:{}", self.physics.rho.as_deref().unwrap_or("")),
            "transmission" => match self.physics.k_minus {
                Some(km) => format!("transmission:{km}"),
                None => "transmission".into(),
            },
            other => other.into(),
        }
    }

    pub fn measurement_line(&self) -> Result<MeasurementLine> {
        MeasurementLine::new(
            self.measurement.height,
            self.measurement.half_width,
            self.measurement.n_half,
        )
    }

    pub fn grid(&self) -> Result<ImagingGrid> {
        ImagingGrid::parse(&self.imaging.grid)
    }
}

// --- measurement noise ------------------------------------------------------

/// Adds multiplicative complex Gaussian noise: every entry of `us` gains
/// `delta * (z1 + i z2) * max|us|` with fresh standard-normal draws `z1`,
/// `z2` per entry, then `dnus` is perturbed the same way against its own
/// maximum.  The generator is ChaCha12 seeded with `seed`, so a (delta, seed)
/// pair reproduces the same dataset on any platform.  `delta = 0` returns the
/// data unchanged (no generator is consumed).
pub fn add_noise(data: &CauchyDataSet, delta: f64, seed: u64) -> Result<CauchyDataSet> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise ratio delta must be nonnegative and finite, got {delta}"
        )));
    }
    let mut out = data.clone();
    out.noise_delta = delta;
    out.seed = seed;
    if delta == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    perturb(&mut out.us, delta, &mut rng);
    perturb(&mut out.dnus, delta, &mut rng);
    Ok(out)
}

fn perturb(matrix: &mut CMatrix, delta: f64, rng: &mut impl Rng) {
    let scale = delta * matrix.max_abs();
    for i in 0..matrix.rows() {
        for j in 0..matrix.cols() {
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            let bump = scale * Complex64::new(z1, z2);
            matrix.set(i, j, matrix.get(i, j) + bump);
        }
    }
}

// --- dataset files ----------------------------------------------------------

const MAGIC: &[u8; 8] = b"RGHIMGDS";
const FORMAT_VERSION: u32 = 1;
const MAX_LABEL_BYTES: u32 = 1 << 16;

/// Writes a dataset to `path`.
///
/// Layout (all integers and floats little-endian): the 8-byte magic
/// `RGHIMGDS`, format version (u32), N (u32), H (f64), A (f64), k_plus
/// (f64), boundary-condition label and surface label (u32 byte length +
/// UTF-8 each), noise delta (f64), seed (u64), then the `us` and `dnus`
/// matrices row-major as (re, im) f64 pairs, `(2N + 1)^2` entries each.
pub fn save_dataset(data: &CauchyDataSet, path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(data.line.n_half() as u32).to_le_bytes())?;
    out.write_all(&data.line.height().to_le_bytes())?;
    out.write_all(&data.line.half_width().to_le_bytes())?;
    out.write_all(&data.k_plus.to_le_bytes())?;
    write_label(&mut out, &data.bc_label)?;
    write_label(&mut out, &data.surface_label)?;
    out.write_all(&data.noise_delta.to_le_bytes())?;
    out.write_all(&data.seed.to_le_bytes())?;
    write_matrix(&mut out, &data.us)?;
    write_matrix(&mut out, &data.dnus)?;
    out.flush()?;
    Ok(())
}

fn write_label(out: &mut impl std::io::Write, label: &str) -> Result<()> {
    let bytes = label.as_bytes();
    if bytes.len() as u64 > MAX_LABEL_BYTES as u64 {
        return Err(Error::Format(format!("label of {} bytes exceeds the format limit", bytes.len())));
    }
    out.write_all(&(bytes.len() as u32).to_le_bytes())?;
    out.write_all(bytes)?;
    Ok(())
}

fn write_matrix(out: &mut impl std::io::Write, matrix: &CMatrix) -> Result<()> {
    for z in matrix.data() {
        out.write_all(&z.re.to_le_bytes())?;
        out.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a dataset written by [`save_dataset`].  A wrong magic, unsupported
/// version, or a file too short for the matrix sizes announced in its header
/// yields [`Error::Format`].
pub fn load_dataset(path: impl AsRef<Path>) -> Result<CauchyDataSet> {
    let bytes = std::fs::read(&path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("dataset '{}': {e}", path.as_ref().display()),
        ))
    })?;
    let mut cur = Reader { bytes: &bytes, pos: 0 };

    let magic = cur.take(8)?;
    if magic != MAGIC {
        return Err(Error::Format("bad magic; not a roughimg dataset file".into()));
    }
    let version = cur.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported dataset format version {version} (this build reads version {FORMAT_VERSION})"
        )));
    }
    let n_half = cur.u32()? as usize;
    let height = cur.f64()?;
    let half_width = cur.f64()?;
    let k_plus = cur.f64()?;
    let bc_label = cur.label()?;
    let surface_label = cur.label()?;
    let noise_delta = cur.f64()?;
    let seed = cur.u64()?;

    let line = MeasurementLine::new(height, half_width, n_half)
        .map_err(|e| Error::Format(format!("invalid measurement line in header: {e}")))?;
    let count = line.count();
    let us = cur.matrix(count)?;
    let dnus = cur.matrix(count)?;
    if cur.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after the dnus matrix",
            bytes.len() - cur.pos
        )));
    }

    Ok(CauchyDataSet { line, k_plus, bc_label, surface_label, us, dnus, noise_delta, seed })
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format(format!(
                "file truncated: needed {n} more bytes at offset {}",
                self.pos
            )));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn label(&mut self) -> Result<String> {
        let len = self.u32()?;
        if len > MAX_LABEL_BYTES {
            return Err(Error::Format(format!("label length {len} exceeds the format limit")));
        }
        let raw = self.take(len as usize)?;
        String::from_utf8(raw.to_vec()).map_err(|_| Error::Format("label is not valid UTF-8".into()))
    }

    fn matrix(&mut self, side: usize) -> Result<CMatrix> {
        let mut m = CMatrix::zeros(side, side);
        for i in 0..side {
            for j in 0..side {
                let re = self.f64()?;
                let im = self.f64()?;
                m.set(i, j, Complex64::new(re, im));
            }
        }
        Ok(m)
    }
}

/// Exports a dataset as CSV with columns `i, j, re_us, im_us, re_dnus,
/// im_dnus` (receiver index, source index, the two complex matrices).
pub fn export_csv(data: &CauchyDataSet, path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "i,j,re_us,im_us,re_dnus,im_dnus")?;
    for i in 0..data.line.count() {
        for j in 0..data.line.count() {
            let u = data.us.get(i, j);
            let dn = data.dnus.get(i, j);
            writeln!(out, "{i},{j},{},{},{},{}", u.re, u.im, dn.re, dn.im)?;
        }
    }
    out.flush()?;
    Ok(())
}

// --- tests ------------------------------------------------------------------
