//! Density estimators built from Metropolis samples.
//!
//! All estimators keep one array per chain; error bars come from the spread
//! between chains.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::states::{PlasmaParams, Point, Prefactor};

/// Number of cells across the Laughlin droplet diameter by default.
pub const CELLS_PER_DROPLET_DIAMETER: f64 = 128.0;

/// Square grid centered on `center` with `n x n` cells of side `cell`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramGeometry {
    pub center: Point,
    pub cell: f64,
    pub n: usize,
}

impl HistogramGeometry {
    pub fn new(center: Point, half_extent: f64, cell: f64) -> Result<Self> {
        if !(cell > 0.0 && half_extent > 0.0) {
            return Err(Error::InvalidParameter(
                "histogram cell and extent must be positive".into(),
            ));
        }
        let n = (2.0 * half_extent / cell).ceil() as usize;
        Ok(HistogramGeometry { center, cell, n })
    }

    /// Grid large enough to hold the droplet of `pf` with a margin for the
    /// Gibbs tail, at the default resolution.
    pub fn for_plasma(params: PlasmaParams, pf: &Prefactor) -> Self {
        let cell = 2.0 * params.droplet_radius_scaled() / CELLS_PER_DROPLET_DIAMETER;
        Self::new([0.0, 0.0], droplet_extent_estimate(params, pf), cell)
            .expect("positive extent")
    }

    pub fn half_extent(&self) -> f64 {
        0.5 * self.n as f64 * self.cell
    }

    pub fn n_cells(&self) -> usize {
        self.n * self.n
    }

    pub fn cell_area(&self) -> f64 {
        self.cell * self.cell
    }

    fn lower(&self) -> Point {
        let h = self.half_extent();
        [self.center[0] - h, self.center[1] - h]
    }

    /// Row-major index of the cell containing `p`.
    #[inline]
    pub fn cell_index(&self, p: Point) -> Option<usize> {
        let lo = self.lower();
        let fx = (p[0] - lo[0]) / self.cell;
        let fy = (p[1] - lo[1]) / self.cell;
        if fx >= 0.0 && fy >= 0.0 {
            let (ix, iy) = (fx as usize, fy as usize);
            if ix < self.n && iy < self.n {
                return Some(iy * self.n + ix);
            }
        }
        None
    }

    pub fn cell_center(&self, index: usize) -> Point {
        self.cell_center_signed((index % self.n) as i64, (index / self.n) as i64)
    }

    /// Center of cell `(ix, iy)`, also for indices outside the grid.
    pub fn cell_center_signed(&self, ix: i64, iy: i64) -> Point {
        let lo = self.lower();
        [
            lo[0] + (ix as f64 + 0.5) * self.cell,
            lo[1] + (iy as f64 + 0.5) * self.cell,
        ]
    }

    fn index_of(&self, ix: i64, iy: i64) -> Option<usize> {
        if ix >= 0 && iy >= 0 && (ix as usize) < self.n && (iy as usize) < self.n {
            Some(iy as usize * self.n + ix as usize)
        } else {
            None
        }
    }

    fn signed_cell_of(&self, p: Point) -> (i64, i64) {
        let lo = self.lower();
        (
            ((p[0] - lo[0]) / self.cell).floor() as i64,
            ((p[1] - lo[1]) / self.cell).floor() as i64,
        )
    }
}

/// Rough outer radius of the droplet in Gibbs-scaled units, including a
/// margin for the Gibbs tail. Quasi-holes add area, a quadratic exponential
/// stretches the droplet into an ellipse.
pub fn droplet_extent_estimate(params: PlasmaParams, pf: &Prefactor) -> f64 {
    let n = params.n_particles() as f64;
    let base = params.droplet_radius_scaled();
    let area_factor = 1.0 + pf.total_multiplicity() as f64 / n;
    let stretch = match pf {
        Prefactor::QuadraticExponential { coefficient } => {
            let c = coefficient.norm();
            ((1.0 + 2.0 * c) / (1.0 - 2.0 * c)).powf(0.25)
        }
        _ => 1.0,
    };
    let hole_reach = match pf {
        Prefactor::QuasiHoleProduct { holes } => holes
            .iter()
            .map(|h| h.location[0].hypot(h.location[1]) / params.gibbs_to_physical())
            .fold(0.0, f64::max)
            .min(base),
        _ => 0.0,
    };
    base * area_factor.sqrt() * stretch + 0.5 * hole_reach + 0.25 * base + 5.0 / n.sqrt()
}

/// Estimate of the scaled one-particle density, one grid per chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityHistogram {
    pub geometry: HistogramGeometry,
    /// Per chain, row-major density values (counts / (samples * cell area)).
    pub chain_density: Vec<Vec<f64>>,
    /// Per chain, number of recorded particle positions, clipped ones included.
    pub chain_samples: Vec<u64>,
    /// Per chain, recorded positions that fell outside the grid.
    pub chain_clipped: Vec<u64>,
}

impl DensityHistogram {
    /// Histogram from raw counts of each chain.
    pub fn from_counts(
        geometry: HistogramGeometry,
        counts: Vec<Vec<u64>>,
        clipped: Vec<u64>,
    ) -> Self {
        let area = geometry.cell_area();
        let mut chain_samples = Vec::with_capacity(counts.len());
        let chain_density = counts
            .iter()
            .zip(&clipped)
            .map(|(c, &clip)| {
                let total = c.iter().sum::<u64>() + clip;
                chain_samples.push(total);
                let norm = if total > 0 { 1.0 / (total as f64 * area) } else { 0.0 };
                c.iter().map(|&k| k as f64 * norm).collect()
            })
            .collect();
        DensityHistogram {
            geometry,
            chain_density,
            chain_samples,
            chain_clipped: clipped,
        }
    }

    /// A noiseless single-chain histogram holding the given density values.
    pub fn from_density(geometry: HistogramGeometry, density: Vec<f64>) -> Result<Self> {
        if density.len() != geometry.n_cells() {
            return Err(Error::InvalidParameter(format!(
                "density has {} cells, geometry {}",
                density.len(),
                geometry.n_cells()
            )));
        }
        Ok(DensityHistogram {
            geometry,
            chain_density: vec![density],
            chain_samples: vec![0],
            chain_clipped: vec![0],
        })
    }

    pub fn n_chains(&self) -> usize {
        self.chain_density.len()
    }

    pub fn total_samples(&self) -> u64 {
        self.chain_samples.iter().sum()
    }

    /// Fraction of recorded positions that fell outside the grid.
    pub fn clipped_fraction(&self) -> f64 {
        let total = self.total_samples();
        if total == 0 {
            0.0
        } else {
            self.chain_clipped.iter().sum::<u64>() as f64 / total as f64
        }
    }

    /// Pooled density over all chains, weighted by sample counts.
    pub fn density(&self) -> Vec<f64> {
        let total = self.total_samples();
        let weights: Vec<f64> = if total == 0 {
            vec![1.0 / self.n_chains() as f64; self.n_chains()]
        } else {
            self.chain_samples.iter().map(|&s| s as f64 / total as f64).collect()
        };
        let mut out = vec![0.0; self.geometry.n_cells()];
        for (d, w) in self.chain_density.iter().zip(weights) {
            for (o, v) in out.iter_mut().zip(d) {
                *o += w * v;
            }
        }
        out
    }

    /// Per-cell standard error from the inter-chain spread; zero with a
    /// single chain.
    pub fn stderr(&self) -> Vec<f64> {
        (0..self.geometry.n_cells())
            .map(|i| {
                let vals: Vec<f64> = self.chain_density.iter().map(|d| d[i]).collect();
                mean_and_stderr(&vals).1
            })
            .collect()
    }

    /// Integral of the estimate over the grid; `1 - clipped_fraction` up to
    /// round-off.
    pub fn integral(&self) -> f64 {
        self.density().iter().sum::<f64>() * self.geometry.cell_area()
    }

    /// Integral plus the clipped mass; 1 for a histogram built from samples.
    pub fn normalization(&self) -> f64 {
        self.integral() + self.clipped_fraction()
    }

    /// `sum_cells w(center) * density * area` per chain, then mean and
    /// standard error over chains.
    pub fn functional(&self, w: impl Fn(Point) -> f64) -> (f64, f64) {
        let area = self.geometry.cell_area();
        let weights: Vec<f64> = (0..self.geometry.n_cells())
            .map(|i| w(self.geometry.cell_center(i)))
            .collect();
        let per_chain: Vec<f64> = self
            .chain_density
            .iter()
            .map(|d| d.iter().zip(&weights).map(|(v, w)| v * w).sum::<f64>() * area)
            .collect();
        mean_and_stderr(&per_chain)
    }
}

/// Mean and standard error of the mean of independent estimates.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Local density average over one disk, compared with `(1 + tolerance)/(pi ell)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskAverage {
    pub center: Point,
    pub radius: f64,
    pub mean: f64,
    pub stderr: f64,
    /// `1/(pi ell)`.
    pub bound: f64,
    pub tolerance: f64,
    /// `mean - 2 stderr > (1 + tolerance) * bound`.
    pub exceeds: bool,
}

/// Average the density over disks of physical radius `N^alpha` tiling the
/// droplet on a half-radius lattice.
///
/// Cells whose centers fall inside a disk are averaged; cells outside the
/// histogram grid count with zero density.
pub fn disk_averages(
    hist: &DensityHistogram,
    params: PlasmaParams,
    alpha: f64,
    tolerance: f64,
) -> Result<Vec<DiskAverage>> {
    let n = params.n_particles() as f64;
    let radius = n.powf(alpha - 0.5);
    let g = hist.geometry;
    if radius < 2.0 * g.cell {
        return Err(Error::ResolutionTooCoarse {
            radius,
            cell: g.cell,
        });
    }
    let bound = params.density_bound();
    let reach = params.droplet_radius_scaled() + 2.0 * radius;
    let spacing = 0.5 * radius;
    let steps = (reach / spacing).floor() as i64;
    let mut out = Vec::new();
    for jy in -steps..=steps {
        for jx in -steps..=steps {
            let center = [jx as f64 * spacing, jy as f64 * spacing];
            if center[0].hypot(center[1]) > reach {
                continue;
            }
            let (mean, stderr) = disk_mean(hist, center, radius);
            out.push(DiskAverage {
                center,
                radius,
                mean,
                stderr,
                bound,
                tolerance,
                exceeds: mean - 2.0 * stderr > (1.0 + tolerance) * bound,
            });
        }
    }
    Ok(out)
}

fn disk_mean(hist: &DensityHistogram, center: Point, radius: f64) -> (f64, f64) {
    let g = hist.geometry;
    let (cx, cy) = g.signed_cell_of(center);
    let span = (radius / g.cell).ceil() as i64 + 1;
    let r2 = radius * radius;
    let mut inside = Vec::new();
    let mut count = 0usize;
    for iy in (cy - span)..=(cy + span) {
        for ix in (cx - span)..=(cx + span) {
            let c = g.cell_center_signed(ix, iy);
            let dx = c[0] - center[0];
            let dy = c[1] - center[1];
            if dx * dx + dy * dy <= r2 {
                count += 1;
                if let Some(i) = g.index_of(ix, iy) {
                    inside.push(i);
                }
            }
        }
    }
    let per_chain: Vec<f64> = hist
        .chain_density
        .iter()
        .map(|d| inside.iter().map(|&i| d[i]).sum::<f64>() / count.max(1) as f64)
        .collect();
    mean_and_stderr(&per_chain)
}

/// Radially binned density, one profile per chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub bin_width: f64,
    pub chain_density: Vec<Vec<f64>>,
}

/// One row of the radial profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialRow {
    pub radius: f64,
    pub density: f64,
    pub stderr: f64,
}

impl RadialProfile {
    pub fn from_counts(bin_width: f64, counts: &[Vec<u64>], samples: &[u64]) -> Self {
        let chain_density = counts
            .iter()
            .zip(samples)
            .map(|(c, &s)| {
                c.iter()
                    .enumerate()
                    .map(|(k, &m)| {
                        let r0 = k as f64 * bin_width;
                        let r1 = r0 + bin_width;
                        let area = PI * (r1 * r1 - r0 * r0);
                        if s == 0 {
                            0.0
                        } else {
                            m as f64 / (s as f64 * area)
                        }
                    })
                    .collect()
            })
            .collect();
        RadialProfile {
            bin_width,
            chain_density,
        }
    }

    pub fn rows(&self) -> Vec<RadialRow> {
        let bins = self.chain_density.first().map_or(0, |d| d.len());
        (0..bins)
            .map(|k| {
                let vals: Vec<f64> = self.chain_density.iter().map(|d| d[k]).collect();
                let (density, stderr) = mean_and_stderr(&vals);
                RadialRow {
                    radius: (k as f64 + 0.5) * self.bin_width,
                    density,
                    stderr,
                }
            })
            .collect()
    }

    /// Mean density over the annulus `r0 <= r < r1` (area weighted), with
    /// inter-chain error.
    pub fn annulus_mean(&self, r0: f64, r1: f64) -> (f64, f64) {
        let per_chain: Vec<f64> = self
            .chain_density
            .iter()
            .map(|d| {
                let mut mass = 0.0;
                let mut area = 0.0;
                for (k, v) in d.iter().enumerate() {
                    let a = k as f64 * self.bin_width;
                    let b = a + self.bin_width;
                    if a >= r0 && b <= r1 + 1e-12 {
                        let ar = PI * (b * b - a * a);
                        mass += v * ar;
                        area += ar;
                    }
                }
                mass / area
            })
            .collect();
        mean_and_stderr(&per_chain)
    }
}

/// Angular Fourier amplitude `sum rho(z) e^{i m theta} dz` over `|z| <= r_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularMode {
    pub m: u32,
    pub re: f64,
    pub im: f64,
    pub re_stderr: f64,
    pub im_stderr: f64,
}

impl AngularMode {
    pub fn amplitude(&self) -> f64 {
        self.re.hypot(self.im)
    }

    pub fn amplitude_stderr(&self) -> f64 {
        self.re_stderr.hypot(self.im_stderr)
    }
}

pub fn angular_modes(hist: &DensityHistogram, m_max: u32, r_max: f64) -> Vec<AngularMode> {
    (1..=m_max)
        .map(|m| {
            let mf = m as f64;
            let (re, re_stderr) = hist.functional(|c| {
                if c[0].hypot(c[1]) <= r_max {
                    (mf * c[1].atan2(c[0])).cos()
                } else {
                    0.0
                }
            });
            let (im, im_stderr) = hist.functional(|c| {
                if c[0].hypot(c[1]) <= r_max {
                    (mf * c[1].atan2(c[0])).sin()
                } else {
                    0.0
                }
            });
            AngularMode {
                m,
                re,
                im,
                re_stderr,
                im_stderr,
            }
        })
        .collect()
}
