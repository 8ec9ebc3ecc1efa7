//! Wavefunction family and the two classical energies derived from it.
//!
//! Three coordinate frames are in play:
//!
//! * physical: the plane of the wavefunction, magnetic length `1/sqrt(2)`;
//! * Gibbs-scaled `z`: physical divided by `sqrt(N)`, where the Laughlin
//!   droplet has radius `sqrt(ell)` and the sampler lives;
//! * ground-state `x`: the frame of the rescaled Hamiltonian with unit
//!   background density, related by `z = sqrt(pi * ell / N) * x`.
//!
//! Physical coordinates only appear inside prefactor evaluation.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the plane.
pub type Point = [f64; 2];

/// Largest modulus allowed for the coefficient of the quadratic exponential
/// prefactor. Square integrability needs `|c| < 1/2`.
pub const MAX_QUADRATIC_COEFFICIENT: f64 = 0.4;

#[inline]
pub(crate) fn dist2(a: Point, b: Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

#[inline]
pub(crate) fn norm2(a: Point) -> f64 {
    a[0] * a[0] + a[1] * a[1]
}

#[inline]
pub(crate) fn scale(a: Point, s: f64) -> Point {
    [a[0] * s, a[1] * s]
}

/// Particle number and Jastrow exponent of a Laughlin plasma.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawPlasmaParams", into = "RawPlasmaParams")]
pub struct PlasmaParams {
    n_particles: usize,
    ell: u32,
}

#[derive(Serialize, Deserialize)]
struct RawPlasmaParams {
    n_particles: usize,
    ell: u32,
}

impl TryFrom<RawPlasmaParams> for PlasmaParams {
    type Error = Error;
    fn try_from(raw: RawPlasmaParams) -> Result<Self> {
        PlasmaParams::new(raw.n_particles, raw.ell)
    }
}

impl From<PlasmaParams> for RawPlasmaParams {
    fn from(p: PlasmaParams) -> Self {
        RawPlasmaParams {
            n_particles: p.n_particles,
            ell: p.ell,
        }
    }
}

impl PlasmaParams {
    pub fn new(n_particles: usize, ell: u32) -> Result<Self> {
        if n_particles == 0 {
            return Err(Error::InvalidParameter("n_particles must be positive".into()));
        }
        if ell == 0 {
            return Err(Error::InvalidParameter("ell must be at least 1".into()));
        }
        Ok(PlasmaParams { n_particles, ell })
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    /// Effective plasma temperature `1/N`.
    pub fn temperature(&self) -> f64 {
        1.0 / self.n_particles as f64
    }

    pub fn inverse_temperature(&self) -> f64 {
        self.n_particles as f64
    }

    /// Radius `sqrt(ell)` of the Laughlin droplet in Gibbs-scaled units.
    pub fn droplet_radius_scaled(&self) -> f64 {
        (self.ell as f64).sqrt()
    }

    /// Plateau value `1/(pi ell)` of the scaled one-particle density.
    pub fn density_bound(&self) -> f64 {
        1.0 / (PI * self.ell as f64)
    }

    /// Odd `ell` is the fermionic case, even `ell` bosonic. Metadata only.
    pub fn is_fermionic(&self) -> bool {
        self.ell % 2 == 1
    }

    /// Factor taking Gibbs-scaled points to physical ones.
    pub fn gibbs_to_physical(&self) -> f64 {
        (self.n_particles as f64).sqrt()
    }

    /// Factor taking ground-state points `x` to Gibbs-scaled points `z`.
    pub fn ground_to_gibbs(&self) -> f64 {
        (PI * self.ell as f64 / self.n_particles as f64).sqrt()
    }

    /// Factor taking ground-state points `x` straight to physical ones.
    pub fn ground_to_physical(&self) -> f64 {
        (PI * self.ell as f64).sqrt()
    }
}

/// A zero of the single-particle factor `f(z) = prod_k (z - a_k)^{m_k}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiHole {
    /// Location in physical coordinates.
    pub location: Point,
    pub multiplicity: u32,
}

/// The analytic factor `F` multiplying the Laughlin function.
///
/// Every variant is a product over particles of one single-variable factor,
/// which is what keeps Metropolis updates O(N).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Prefactor {
    Identity,
    /// `prod_j prod_k (z_j - a_k)^{m_k}`.
    QuasiHoleProduct { holes: Vec<QuasiHole> },
    /// `exp(c sum_j z_j^2)`.
    QuadraticExponential { coefficient: Complex64 },
}

impl Default for Prefactor {
    fn default() -> Self {
        Prefactor::Identity
    }
}

impl Prefactor {
    pub fn quasi_holes(holes: Vec<QuasiHole>) -> Result<Self> {
        let pf = Prefactor::QuasiHoleProduct { holes };
        pf.validate()?;
        Ok(pf)
    }

    /// A single hole of multiplicity `m` at a physical location.
    pub fn single_hole(location: Point, multiplicity: u32) -> Result<Self> {
        Self::quasi_holes(vec![QuasiHole {
            location,
            multiplicity,
        }])
    }

    /// `count` unit holes evenly spaced on a physical circle.
    pub fn hole_ring(center: Point, radius: f64, count: usize) -> Result<Self> {
        let holes = (0..count)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / count as f64;
                QuasiHole {
                    location: [center[0] + radius * t.cos(), center[1] + radius * t.sin()],
                    multiplicity: 1,
                }
            })
            .collect();
        Self::quasi_holes(holes)
    }

    pub fn quadratic_exponential(coefficient: Complex64) -> Result<Self> {
        let pf = Prefactor::QuadraticExponential { coefficient };
        pf.validate()?;
        Ok(pf)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Prefactor::Identity => Ok(()),
            Prefactor::QuasiHoleProduct { holes } => {
                for (k, h) in holes.iter().enumerate() {
                    if h.multiplicity == 0 {
                        return Err(Error::InvalidParameter(format!(
                            "hole {k} has multiplicity zero"
                        )));
                    }
                    if !h.location.iter().all(|v| v.is_finite()) {
                        return Err(Error::InvalidParameter(format!(
                            "hole {k} has a non-finite location"
                        )));
                    }
                }
                Ok(())
            }
            Prefactor::QuadraticExponential { coefficient } => {
                if !(coefficient.norm() <= MAX_QUADRATIC_COEFFICIENT) {
                    return Err(Error::InvalidParameter(format!(
                        "|c| = {} exceeds {MAX_QUADRATIC_COEFFICIENT}",
                        coefficient.norm()
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Prefactor::Identity)
            || matches!(self, Prefactor::QuasiHoleProduct { holes } if holes.is_empty())
    }

    /// Sum of hole multiplicities; zero for the hole-free variants.
    pub fn total_multiplicity(&self) -> u32 {
        match self {
            Prefactor::QuasiHoleProduct { holes } => holes.iter().map(|h| h.multiplicity).sum(),
            _ => 0,
        }
    }

    /// `log|f(p)|` for one particle at physical position `p`.
    #[inline]
    pub fn single_log_modulus(&self, p: Point) -> Result<f64> {
        match self {
            Prefactor::Identity => Ok(0.0),
            Prefactor::QuasiHoleProduct { holes } => {
                let mut acc = 0.0;
                for h in holes {
                    let d2 = dist2(p, h.location);
                    if d2 == 0.0 {
                        return Err(Error::SingularConfiguration(format!(
                            "particle at quasi-hole ({}, {})",
                            h.location[0], h.location[1]
                        )));
                    }
                    acc += 0.5 * h.multiplicity as f64 * d2.ln();
                }
                Ok(acc)
            }
            Prefactor::QuadraticExponential { coefficient } => {
                let z = Complex64::new(p[0], p[1]);
                Ok((coefficient * z * z).re)
            }
        }
    }

    /// Gradient of `log|f|` with respect to the physical position.
    pub fn single_log_modulus_gradient(&self, p: Point) -> Result<Point> {
        match self {
            Prefactor::Identity => Ok([0.0, 0.0]),
            Prefactor::QuasiHoleProduct { holes } => {
                let mut g = [0.0, 0.0];
                for h in holes {
                    let d = [p[0] - h.location[0], p[1] - h.location[1]];
                    let d2 = norm2(d);
                    if d2 == 0.0 {
                        return Err(Error::SingularConfiguration(
                            "particle at quasi-hole".into(),
                        ));
                    }
                    let w = h.multiplicity as f64 / d2;
                    g[0] += w * d[0];
                    g[1] += w * d[1];
                }
                Ok(g)
            }
            Prefactor::QuadraticExponential { coefficient } => {
                // grad Re(g) = conj(g') for analytic g
                let dz = 2.0 * coefficient * Complex64::new(p[0], p[1]);
                Ok([dz.re, -dz.im])
            }
        }
    }
}

/// `log|F|` at a list of physical points. Identity gives 0.
pub fn prefactor_log_modulus(pf: &Prefactor, physical_points: &[Point]) -> Result<f64> {
    physical_points
        .iter()
        .try_fold(0.0, |acc, &p| Ok(acc + pf.single_log_modulus(p)?))
}

/// N planar points together with the parameters of the plasma they belong to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    points: Vec<Point>,
    params: PlasmaParams,
}

impl Configuration {
    pub fn new(points: Vec<Point>, params: PlasmaParams) -> Result<Self> {
        if points.len() != params.n_particles() {
            return Err(Error::InvalidParameter(format!(
                "configuration has {} points, expected {}",
                points.len(),
                params.n_particles()
            )));
        }
        if let Some(i) = points.iter().position(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err(Error::InvalidParameter(format!("point {i} is not finite")));
        }
        Ok(Configuration { points, params })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn params(&self) -> PlasmaParams {
        self.params
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }

    /// Same parameters, different points.
    pub fn with_points(&self, points: Vec<Point>) -> Result<Self> {
        Configuration::new(points, self.params)
    }
}

/// Points sorted lexicographically, so that sums over them do not depend
/// on particle labels.
fn canonical_order(points: &[Point]) -> Vec<Point> {
    let mut v = points.to_vec();
    v.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    v
}

fn pair_log_sum(points: &[Point]) -> Result<f64> {
    let mut acc = 0.0;
    for (i, &a) in points.iter().enumerate() {
        for &b in &points[i + 1..] {
            let d2 = dist2(a, b);
            if d2 == 0.0 {
                return Err(Error::SingularConfiguration(format!(
                    "two points coincide at ({}, {})",
                    a[0], a[1]
                )));
            }
            acc += 0.5 * d2.ln();
        }
    }
    Ok(acc)
}

/// Additive pieces of the unnormalized log Gibbs weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogWeightParts {
    /// `-N sum_j |z_j|^2`
    pub confinement: f64,
    /// `2 ell sum_{i<j} log|z_i - z_j|`
    pub interaction: f64,
    /// `2 log|F(sqrt(N) Z)|`
    pub prefactor: f64,
}

impl LogWeightParts {
    pub fn total(&self) -> f64 {
        self.confinement + self.interaction + self.prefactor
    }
}

/// Decomposed log weight of a Gibbs-scaled configuration. Sums run in a
/// canonical point order, so relabeling particles gives identical bits.
pub fn log_gibbs_weight_parts(config: &Configuration, pf: &Prefactor) -> Result<LogWeightParts> {
    let params = config.params();
    let n = params.n_particles() as f64;
    let ell = params.ell() as f64;
    let sorted = canonical_order(config.points());
    let pts = &sorted[..];
    let confinement = -n * pts.iter().map(|&p| norm2(p)).sum::<f64>();
    let interaction = 2.0 * ell * pair_log_sum(pts)?;
    let s = params.gibbs_to_physical();
    let mut prefactor = 0.0;
    for &p in pts {
        prefactor += 2.0 * pf.single_log_modulus(scale(p, s))?;
    }
    Ok(LogWeightParts {
        confinement,
        interaction,
        prefactor,
    })
}

/// Log of the unnormalized scaled N-particle density, i.e. `-N H_N(Z)` up to
/// an additive constant.
pub fn log_gibbs_weight(config: &Configuration, pf: &Prefactor) -> Result<f64> {
    log_gibbs_weight_parts(config, pf).map(|p| p.total())
}

/// External term of the rescaled Hamiltonian generated by `pf`:
/// `W(X) = -(1/ell) log|F(sqrt(pi ell) X)|`.
pub fn scaled_external(config: &Configuration, pf: &Prefactor) -> Result<f64> {
    let params = config.params();
    let s = params.ground_to_physical();
    let inv_ell = 1.0 / params.ell() as f64;
    let mut acc = 0.0;
    for &x in config.points() {
        acc -= inv_ell * pf.single_log_modulus(scale(x, s))?;
    }
    Ok(acc)
}

/// Single-particle part of the external term, for a point in the
/// ground-state frame.
#[inline]
pub(crate) fn scaled_external_single(params: PlasmaParams, pf: &Prefactor, x: Point) -> Result<f64> {
    let s = params.ground_to_physical();
    Ok(-pf.single_log_modulus(scale(x, s))? / params.ell() as f64)
}

/// Rescaled Hamiltonian with unit-density background:
/// `(pi/2) sum |x_i|^2 - sum_{i<j} log|x_i - x_j| + W(X)`.
pub fn scaled_hamiltonian(config: &Configuration, pf: &Prefactor) -> Result<f64> {
    let pts = config.points();
    let confinement = 0.5 * PI * pts.iter().map(|&p| norm2(p)).sum::<f64>();
    let interaction = -pair_log_sum(pts)?;
    Ok(confinement + interaction + scaled_external(config, pf)?)
}

/// Analytic gradient of [`scaled_hamiltonian`].
pub fn scaled_gradient(config: &Configuration, pf: &Prefactor) -> Result<Vec<Point>> {
    let mut grad = vec![[0.0; 2]; config.len()];
    scaled_gradient_into(config.params(), config.points(), pf, &mut grad)?;
    Ok(grad)
}

pub(crate) fn scaled_gradient_into(
    params: PlasmaParams,
    pts: &[Point],
    pf: &Prefactor,
    grad: &mut [Point],
) -> Result<()> {
    let s = params.ground_to_physical();
    let inv_ell = 1.0 / params.ell() as f64;
    for (g, &x) in grad.iter_mut().zip(pts) {
        let w = pf.single_log_modulus_gradient(scale(x, s))?;
        *g = [PI * x[0] - inv_ell * s * w[0], PI * x[1] - inv_ell * s * w[1]];
    }
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            let d = [pts[i][0] - pts[j][0], pts[i][1] - pts[j][1]];
            let d2 = norm2(d);
            if d2 == 0.0 {
                return Err(Error::SingularConfiguration(format!(
                    "points {i} and {j} coincide"
                )));
            }
            let f = [d[0] / d2, d[1] / d2];
            grad[i][0] -= f[0];
            grad[i][1] -= f[1];
            grad[j][0] += f[0];
            grad[j][1] += f[1];
        }
    }
    Ok(())
}
