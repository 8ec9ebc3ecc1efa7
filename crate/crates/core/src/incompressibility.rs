//! Physics-level verdicts built on sampler output: local density bounds,
//! bathtub energies of radial traps, trap-energy comparisons between
//! prefactors and the angular-momentum scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::{disk_averages, DensityHistogram, DiskAverage, SamplerOutput};
use crate::states::{norm2, PlasmaParams, Point, Prefactor};
use num_complex::Complex64;

/// Histogram mass allowed outside the grid before energies are refused.
pub const MAX_CLIPPED_FRACTION: f64 = 1e-3;

/// Radial power-law trap `V(x) = |x|^s` in physical coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapPotential {
    pub exponent: f64,
}

impl TrapPotential {
    pub fn new(exponent: f64) -> Result<Self> {
        let t = TrapPotential { exponent };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.exponent > 0.0 && self.exponent.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "trap exponent must be positive, got {}",
                self.exponent
            )));
        }
        Ok(())
    }

    pub fn value(&self, physical: Point) -> f64 {
        norm2(physical).powf(0.5 * self.exponent)
    }
}

/// Smallest potential energy of a density bounded by `1/(pi ell)` with mass
/// `N`: the disk of radius `sqrt(ell N)` filled at the bound.
pub fn bathtub_energy(params: PlasmaParams, trap: TrapPotential) -> f64 {
    let s = trap.exponent;
    let ell = params.ell() as f64;
    let ln = ell * params.n_particles() as f64;
    2.0 * ln.powf(0.5 * (s + 2.0)) / (ell * (s + 2.0))
}

/// `int V rho` for a physical-coordinate potential, estimated from the
/// scaled one-particle density: `N sum_cells V(sqrt(N) z) mu(z) h^2`.
/// Returns the mean over chains and its standard error.
pub fn potential_energy_mc(
    params: PlasmaParams,
    hist: &DensityHistogram,
    v: impl Fn(Point) -> f64,
) -> Result<(f64, f64)> {
    let clipped = hist.clipped_fraction();
    if clipped > MAX_CLIPPED_FRACTION {
        return Err(Error::SupportClipped { fraction: clipped });
    }
    let n = params.n_particles() as f64;
    let to_physical = params.gibbs_to_physical();
    let (mean, stderr) = hist.functional(|z| v([to_physical * z[0], to_physical * z[1]]));
    Ok((n * mean, n * stderr))
}

pub fn trap_energy_mc(
    params: PlasmaParams,
    trap: TrapPotential,
    hist: &DensityHistogram,
) -> Result<(f64, f64)> {
    trap.validate()?;
    potential_energy_mc(params, hist, |x| trap.value(x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub params: PlasmaParams,
    pub prefactor: Prefactor,
    pub trap: TrapPotential,
    pub mc_energy: f64,
    pub mc_stderr: f64,
    pub bathtub_energy: f64,
    pub ratio: f64,
    pub ratio_stderr: f64,
    /// `ratio >= 1 - 3 ratio_stderr`.
    pub above_bathtub: bool,
}

pub fn energy_report(output: &SamplerOutput, trap: TrapPotential) -> Result<EnergyReport> {
    let (mc_energy, mc_stderr) = trap_energy_mc(output.params, trap, &output.histogram)?;
    let bathtub = bathtub_energy(output.params, trap);
    let ratio = mc_energy / bathtub;
    let ratio_stderr = mc_stderr / bathtub;
    Ok(EnergyReport {
        params: output.params,
        prefactor: output.prefactor.clone(),
        trap,
        mc_energy,
        mc_stderr,
        bathtub_energy: bathtub,
        ratio,
        ratio_stderr,
        above_bathtub: ratio >= 1.0 - 3.0 * ratio_stderr,
    })
}

/// Reference energy against one other prefactor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyComparison {
    pub prefactor: Prefactor,
    pub mc_energy: f64,
    /// `other - reference`.
    pub difference: f64,
    pub combined_stderr: f64,
    /// `reference <= other + 3 combined_stderr`.
    pub reference_not_higher: bool,
    /// `other - reference > 3 combined_stderr`.
    pub reference_significantly_lower: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorollaryVerdict {
    pub reference: EnergyReport,
    pub comparisons: Vec<EnergyComparison>,
    /// Allowed `|ratio - 1|` of the reference at this particle number.
    pub band: f64,
    pub ratio_within_band: bool,
    pub passed: bool,
}

/// Checks that the reference state, normally the Laughlin state, has trap
/// energy no higher than any other prefactor within three combined standard
/// errors, and that its ratio to the bathtub energy lies within `band`.
pub fn corollary_check(
    reference: &EnergyReport,
    others: &[EnergyReport],
    band: f64,
) -> Result<CorollaryVerdict> {
    if !(band >= 0.0) {
        return Err(Error::InvalidParameter("band must be non-negative".into()));
    }
    let mut comparisons = Vec::with_capacity(others.len());
    for o in others {
        if o.params != reference.params || o.trap != reference.trap {
            return Err(Error::Precondition(
                "energy reports differ in particle number, exponent or trap".into(),
            ));
        }
        let difference = o.mc_energy - reference.mc_energy;
        let combined = reference.mc_stderr.hypot(o.mc_stderr);
        comparisons.push(EnergyComparison {
            prefactor: o.prefactor.clone(),
            mc_energy: o.mc_energy,
            difference,
            combined_stderr: combined,
            reference_not_higher: difference >= -3.0 * combined,
            reference_significantly_lower: difference > 3.0 * combined,
        });
    }
    let ratio_within_band = (reference.ratio - 1.0).abs() <= band;
    let passed = ratio_within_band && comparisons.iter().all(|c| c.reference_not_higher);
    Ok(CorollaryVerdict {
        reference: reference.clone(),
        comparisons,
        band,
        ratio_within_band,
        passed,
    })
}

/// Total angular momentum from the per-sweep second moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularMomentumEstimate {
    pub params: PlasmaParams,
    pub prefactor: Prefactor,
    /// `<L> = N <sum_j |z_j|^2> - N`, `z` the Gibbs-scaled positions.
    pub mean: f64,
    pub stderr: f64,
    /// `<L> / N^2`.
    pub per_n_squared: f64,
    /// `2 ell`.
    pub bound: f64,
    pub within_bound: bool,
}

pub fn angular_momentum_estimate(output: &SamplerOutput) -> AngularMomentumEstimate {
    let n = output.params.n_particles() as f64;
    let (sum_sq, err) = output.sum_sq_estimate();
    let mean = n * sum_sq - n;
    let per_n_squared = mean / (n * n);
    let bound = 2.0 * output.params.ell() as f64;
    AngularMomentumEstimate {
        params: output.params,
        prefactor: output.prefactor.clone(),
        mean,
        stderr: n * err,
        per_n_squared,
        bound,
        within_bound: per_n_squared <= bound,
    }
}

/// `ell N (N - 1) / 2`, the angular momentum of the Laughlin state.
pub fn laughlin_angular_momentum(params: PlasmaParams) -> f64 {
    let n = params.n_particles() as f64;
    params.ell() as f64 * n * (n - 1.0) / 2.0
}

/// Disk averages of one state at one disk scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiskBoundCheck {
    pub label: String,
    pub prefactor: Prefactor,
    pub alpha: f64,
    pub disks: usize,
    pub exceedances: usize,
    /// Largest `mean - 2 stderr - (1 + tolerance) bound` over the disks.
    pub worst_excess: f64,
    pub worst_disk: Option<DiskAverage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityBoundVerdict {
    pub tolerance: f64,
    pub checks: Vec<DiskBoundCheck>,
    pub passed: bool,
}

/// Local density bound over a set of states: no disk average at any of the
/// scales `N^alpha` exceeds the bound, for any state.
pub fn density_bound_verdict(
    runs: &[(String, &SamplerOutput)],
    alphas: &[f64],
    tolerance: f64,
) -> Result<DensityBoundVerdict> {
    let mut checks = Vec::new();
    for (label, out) in runs {
        for &alpha in alphas {
            let disks = disk_averages(&out.histogram, out.params, alpha, tolerance)?;
            let mut worst_excess = f64::NEG_INFINITY;
            let mut worst_disk = None;
            for d in &disks {
                let excess = d.mean - 2.0 * d.stderr - (1.0 + d.tolerance) * d.bound;
                if excess > worst_excess {
                    worst_excess = excess;
                    worst_disk = Some(*d);
                }
            }
            checks.push(DiskBoundCheck {
                label: label.clone(),
                prefactor: out.prefactor.clone(),
                alpha,
                disks: disks.len(),
                exceedances: disks.iter().filter(|d| d.exceeds).count(),
                worst_excess,
                worst_disk,
            });
        }
    }
    let passed = checks.iter().all(|c| c.exceedances == 0);
    Ok(DensityBoundVerdict {
        tolerance,
        checks,
        passed,
    })
}

/// Perturbations of the Laughlin state used across the density and energy
/// checks, with short labels. Locations are physical; "off" holes sit at half
/// the droplet radius and the ring of four holes at a quarter of it.
pub fn prefactor_matrix(params: PlasmaParams) -> Result<Vec<(String, Prefactor)>> {
    let radius = params.gibbs_to_physical() * params.droplet_radius_scaled();
    let off = [0.5 * radius, 0.0];
    Ok(vec![
        ("identity".into(), Prefactor::Identity),
        ("hole-m1-center".into(), Prefactor::single_hole([0.0, 0.0], 1)?),
        ("hole-m2-center".into(), Prefactor::single_hole([0.0, 0.0], 2)?),
        ("hole-m1-off".into(), Prefactor::single_hole(off, 1)?),
        ("hole-m2-off".into(), Prefactor::single_hole(off, 2)?),
        ("ring-4".into(), Prefactor::hole_ring([0.0, 0.0], 0.25 * radius, 4)?),
        ("quadratic-0.1".into(), Prefactor::quadratic_exponential(Complex64::new(0.1, 0.0))?),
        ("quadratic-0.2".into(), Prefactor::quadratic_exponential(Complex64::new(0.2, 0.0))?),
    ])
}

/// One CSV row per energy report:
/// `prefactor,ell,n,s,mc_energy,mc_stderr,bathtub_energy,ratio,ratio_stderr`.
pub fn energy_summary_csv(reports: &[EnergyReport]) -> String {
    let mut out =
        String::from("prefactor,ell,n,s,mc_energy,mc_stderr,bathtub_energy,ratio,ratio_stderr\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            prefactor_label(&r.prefactor),
            r.params.ell(),
            r.params.n_particles(),
            r.trap.exponent,
            r.mc_energy,
            r.mc_stderr,
            r.bathtub_energy,
            r.ratio,
            r.ratio_stderr
        ));
    }
    out
}

/// Short comma-free description of a prefactor.
pub fn prefactor_label(pf: &Prefactor) -> String {
    match pf {
        Prefactor::Identity => "identity".into(),
        Prefactor::QuasiHoleProduct { holes } => {
            let parts: Vec<String> = holes
                .iter()
                .map(|h| format!("{}@({} {})", h.multiplicity, h.location[0], h.location[1]))
                .collect();
            format!("holes[{}]", parts.join(" "))
        }
        Prefactor::QuadraticExponential { coefficient } => {
            format!("quadratic({} {})", coefficient.re, coefficient.im)
        }
    }
}
