use std::f64::consts::PI;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::states::{dist2, Point};
use crate::SCHEMA_VERSION;

/// Smallest number of cells allowed across the diameter of a unit-area disk.
pub const MIN_CELLS_PER_UNIT_DIAMETER: f64 = 16.0;

/// Point charges of a Thomas-Fermi problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point>", into = "Vec<Point>")]
pub struct NucleiSet {
    positions: Vec<Point>,
}

impl NucleiSet {
    pub fn new(positions: Vec<Point>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidParameter("at least one nucleus is required".into()));
        }
        for (i, p) in positions.iter().enumerate() {
            if !p[0].is_finite() || !p[1].is_finite() {
                return Err(Error::InvalidParameter(format!("nucleus {i} is not finite")));
            }
            for (j, q) in positions[..i].iter().enumerate() {
                if p == q {
                    return Err(Error::InvalidParameter(format!(
                        "nuclei {j} and {i} coincide"
                    )));
                }
            }
        }
        Ok(NucleiSet { positions })
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Total charge, which is also the mass of the screening density.
    pub fn charge(&self) -> f64 {
        self.positions.len() as f64
    }

    /// Padding `2 sqrt(K / pi)` that keeps the screening region inside the grid.
    pub fn padding(&self) -> f64 {
        2.0 * (self.charge() / PI).sqrt()
    }

    pub fn translated(&self, t: Point) -> NucleiSet {
        NucleiSet {
            positions: self.positions.iter().map(|p| [p[0] + t[0], p[1] + t[1]]).collect(),
        }
    }

    fn bounding_box(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.positions {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }
}

impl TryFrom<Vec<Point>> for NucleiSet {
    type Error = Error;
    fn try_from(v: Vec<Point>) -> Result<Self> {
        NucleiSet::new(v)
    }
}

impl From<NucleiSet> for Vec<Point> {
    fn from(n: NucleiSet) -> Self {
        n.positions
    }
}

/// Uniform cell-centred grid. Cell `(ix, iy)` is centred at
/// `origin + h * (ix, iy)`; storage is row-major with `ix` fastest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: Point,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(origin: Point, h: f64, nx: usize, ny: usize) -> Result<Self> {
        let spec = GridSpec { origin, h, nx, ny };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidGrid(format!("cell size {} must be positive", self.h)));
        }
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::InvalidGrid("grid needs at least 2x2 cells".into()));
        }
        if !self.origin[0].is_finite() || !self.origin[1].is_finite() {
            return Err(Error::InvalidGrid("origin is not finite".into()));
        }
        Ok(())
    }

    /// Grid centred on the nuclei's bounding box, padded by `2 sqrt(K / pi)`
    /// on every side, with `n` cells along the longer side.
    pub fn padded(nuclei: &NucleiSet, n: usize) -> Result<Self> {
        GridSpec::padded_by_cells(nuclei, nuclei.padding(), n)
    }

    /// Grid padded by `pad` with `n` cells along the longer side.
    pub fn padded_by_cells(nuclei: &NucleiSet, pad: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGrid("grid needs at least 2 cells per side".into()));
        }
        let (lo, hi) = nuclei.bounding_box();
        let side = (hi[0] - lo[0]).max(hi[1] - lo[1]) + 2.0 * pad;
        GridSpec::padded_by(nuclei, pad, side / n as f64)
    }

    /// Padded grid with a prescribed cell size.
    pub fn padded_with_cell(nuclei: &NucleiSet, h: f64) -> Result<Self> {
        GridSpec::padded_by(nuclei, nuclei.padding(), h)
    }

    /// Grid covering the nuclei's bounding box plus `pad` on every side.
    pub fn padded_by(nuclei: &NucleiSet, pad: f64, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidGrid(format!("cell size {h} must be positive")));
        }
        if !(pad >= 0.0 && pad.is_finite()) {
            return Err(Error::InvalidGrid(format!("padding {pad} must be non-negative")));
        }
        let (lo, hi) = nuclei.bounding_box();
        let cells = |extent: f64| ((((extent + 2.0 * pad) / h) * (1.0 - 1e-12)).ceil() as usize).max(2);
        let nx = cells(hi[0] - lo[0]);
        let ny = cells(hi[1] - lo[1]);
        let center = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
        GridSpec::new(
            [
                center[0] - 0.5 * (nx as f64 - 1.0) * h,
                center[1] - 0.5 * (ny as f64 - 1.0) * h,
            ],
            h,
            nx,
            ny,
        )
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        self.h * self.h
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    #[inline]
    pub fn coords(&self, i: usize) -> (usize, usize) {
        (i % self.nx, i / self.nx)
    }

    #[inline]
    pub fn cell_center(&self, i: usize) -> Point {
        let (ix, iy) = self.coords(i);
        [
            self.origin[0] + ix as f64 * self.h,
            self.origin[1] + iy as f64 * self.h,
        ]
    }

    /// Lower-left and upper-right corners of the covered rectangle.
    pub fn bounds(&self) -> (Point, Point) {
        let half = 0.5 * self.h;
        (
            [self.origin[0] - half, self.origin[1] - half],
            [
                self.origin[0] + (self.nx as f64 - 0.5) * self.h,
                self.origin[1] + (self.ny as f64 - 0.5) * self.h,
            ],
        )
    }

    /// Cell containing `p`, if any.
    pub fn locate(&self, p: Point) -> Option<usize> {
        let fx = ((p[0] - self.origin[0]) / self.h + 0.5).floor();
        let fy = ((p[1] - self.origin[1]) / self.h + 0.5).floor();
        if fx < 0.0 || fy < 0.0 || fx >= self.nx as f64 || fy >= self.ny as f64 {
            return None;
        }
        Some(self.index(fx as usize, fy as usize))
    }

    /// Radius of the disk with the area of one cell.
    pub fn equal_area_radius(&self) -> f64 {
        self.h / PI.sqrt()
    }

    /// Checks the solver preconditions: every nucleus padded by `2 sqrt(K/pi)`
    /// inside the domain, and enough cells across a unit-area disk.
    pub fn check_for(&self, nuclei: &NucleiSet) -> Result<()> {
        self.validate()?;
        let (lo, hi) = self.bounds();
        let pad = nuclei.padding();
        // Tolerate round-off in grids built by `padded`.
        let slack = 1e-9 * (1.0 + pad);
        for (index, p) in nuclei.positions().iter().enumerate() {
            let inside = p[0] >= lo[0] && p[0] <= hi[0] && p[1] >= lo[1] && p[1] <= hi[1];
            if !inside {
                return Err(Error::NucleusOutsideDomain { index, x: p[0], y: p[1] });
            }
            let margin = (p[0] - lo[0])
                .min(hi[0] - p[0])
                .min(p[1] - lo[1])
                .min(hi[1] - p[1]);
            if margin + slack < pad {
                return Err(Error::InvalidGrid(format!(
                    "nucleus {index} is {margin:.4} from the domain edge, padding {pad:.4} required"
                )));
            }
        }
        let across = 2.0 / PI.sqrt() / self.h;
        if across < MIN_CELLS_PER_UNIT_DIAMETER {
            return Err(Error::InvalidGrid(format!(
                "cell size {} gives {across:.1} cells across a unit-area disk, need {}",
                self.h, MIN_CELLS_PER_UNIT_DIAMETER
            )));
        }
        Ok(())
    }
}

/// What a [`GridField`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldRole {
    /// A screening density.
    Sigma,
    /// The total Thomas-Fermi potential.
    Phi,
    /// Any other potential (nuclear potential, log-convolution).
    Potential,
}

/// Values on the cells of a [`GridSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridFieldDocument", into = "GridFieldDocument")]
pub struct GridField {
    pub spec: GridSpec,
    pub role: FieldRole,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn new(spec: GridSpec, role: FieldRole, values: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if values.len() != spec.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for a {}x{} grid",
                values.len(),
                spec.nx,
                spec.ny
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("value at cell {i} is not finite")));
        }
        Ok(GridField { spec, role, values })
    }

    pub fn zeros(spec: GridSpec, role: FieldRole) -> Self {
        GridField {
            spec,
            role,
            values: vec![0.0; spec.len()],
        }
    }

    /// `h^2` times the sum of the values.
    pub fn integral(&self) -> f64 {
        self.spec.cell_area() * self.values.iter().sum::<f64>()
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[self.spec.index(ix, iy)]
    }

    /// Value of the cell containing `p`.
    pub fn sample(&self, p: Point) -> Option<f64> {
        self.spec.locate(p).map(|i| self.values[i])
    }

    /// Central-difference gradient at cell `i`, one-sided on the border.
    pub fn gradient(&self, i: usize) -> Point {
        let s = self.spec;
        let (ix, iy) = s.coords(i);
        let d = |a: usize, b: usize, span: f64| (self.values[a] - self.values[b]) / (span * s.h);
        let gx = match (ix > 0, ix + 1 < s.nx) {
            (true, true) => d(s.index(ix + 1, iy), s.index(ix - 1, iy), 2.0),
            (false, _) => d(s.index(ix + 1, iy), i, 1.0),
            (_, false) => d(i, s.index(ix - 1, iy), 1.0),
        };
        let gy = match (iy > 0, iy + 1 < s.ny) {
            (true, true) => d(s.index(ix, iy + 1), s.index(ix, iy - 1), 2.0),
            (false, _) => d(s.index(ix, iy + 1), i, 1.0),
            (_, false) => d(i, s.index(ix, iy - 1), 1.0),
        };
        [gx, gy]
    }
}

/// On-disk form of a [`GridField`]: header plus base64 little-endian `f64`
/// payload, row-major with `x` fastest.
#[derive(Serialize, Deserialize)]
struct GridFieldDocument {
    schema_version: u32,
    role: FieldRole,
    origin: Point,
    h: f64,
    nx: usize,
    ny: usize,
    encoding: String,
    values: String,
}

const ENCODING: &str = "base64-f64-le";

impl From<GridField> for GridFieldDocument {
    fn from(f: GridField) -> Self {
        let mut bytes = Vec::with_capacity(8 * f.values.len());
        for v in &f.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        GridFieldDocument {
            schema_version: SCHEMA_VERSION,
            role: f.role,
            origin: f.spec.origin,
            h: f.spec.h,
            nx: f.spec.nx,
            ny: f.spec.ny,
            encoding: ENCODING.into(),
            values: BASE64.encode(bytes),
        }
    }
}

impl TryFrom<GridFieldDocument> for GridField {
    type Error = Error;
    fn try_from(doc: GridFieldDocument) -> Result<Self> {
        if doc.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidGrid(format!(
                "unsupported schema version {}",
                doc.schema_version
            )));
        }
        if doc.encoding != ENCODING {
            return Err(Error::InvalidGrid(format!("unknown encoding {}", doc.encoding)));
        }
        let bytes = BASE64
            .decode(doc.values.as_bytes())
            .map_err(|e| Error::InvalidGrid(format!("bad payload: {e}")))?;
        if bytes.len() % 8 != 0 {
            return Err(Error::InvalidGrid("payload length is not a multiple of 8".into()));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        let spec = GridSpec::new(doc.origin, doc.h, doc.nx, doc.ny)?;
        GridField::new(spec, doc.role, values)
    }
}

/// `-log r` for the charge spread over a disk of radius `a`, evaluated at
/// distance `r` from its centre (exact log-potential of a uniform disk of
/// unit mass).
#[inline]
pub(crate) fn smeared_neg_log(r2: f64, a: f64) -> f64 {
    let a2 = a * a;
    if r2 >= a2 {
        -0.5 * r2.ln()
    } else {
        -(a.ln() - 0.5 * (1.0 - r2 / a2))
    }
}

/// `V(x) = -sum_i log|x - x_i|` at cell centres. A nucleus closer to a cell
/// centre than the cell's equal-area radius is smeared over that disk, which
/// gives the regularized self-value `-(log a - 1/2)` at the centre.
pub fn nuclear_potential(nuclei: &NucleiSet, spec: GridSpec) -> GridField {
    let a = spec.equal_area_radius();
    let values = (0..spec.len())
        .map(|i| {
            let c = spec.cell_center(i);
            nuclei
                .positions()
                .iter()
                .map(|&p| smeared_neg_log(dist2(c, p), a))
                .sum()
        })
        .collect();
    GridField {
        spec,
        role: FieldRole::Potential,
        values,
    }
}
