use serde::{Deserialize, Serialize};

use super::conv::LogConvolver;
use super::grid::{nuclear_potential, smeared_neg_log, FieldRole, GridField, GridSpec, NucleiSet};
use super::region::{ScreeningRegion, OCCUPIED_LEVEL};
use crate::error::{Error, Result};
use crate::states::{dist2, Point};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TfSettings {
    pub max_iterations: usize,
    /// Stop once the certified distance to the optimal energy, the
    /// Frank-Wolfe gap, is at most `relative_tolerance * |E|`.
    pub relative_tolerance: f64,
    /// Recompute the potential from scratch every this many iterations
    /// instead of updating it.
    pub refresh_interval: usize,
}

impl Default for TfSettings {
    fn default() -> Self {
        TfSettings {
            max_iterations: 5000,
            relative_tolerance: 1e-9,
            refresh_interval: 25,
        }
    }
}

impl TfSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || self.refresh_interval == 0 {
            return Err(Error::InvalidParameter(
                "max_iterations and refresh_interval must be positive".into(),
            ));
        }
        if !(self.relative_tolerance > 0.0) {
            return Err(Error::InvalidParameter("relative_tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Converged screening density with its potential and screening region.
#[derive(Debug, Clone)]
pub struct TfSolution {
    pub nuclei: NucleiSet,
    pub sigma: GridField,
    pub phi: GridField,
    pub region: ScreeningRegion,
    pub energy: f64,
    /// Constant `mu` in the optimality conditions `phi = mu` on partially
    /// filled cells, read off the converged fields.
    pub multiplier: f64,
    pub epsilon_grid: f64,
    pub iterations: usize,
    pub relative_gap: f64,
    /// Energy after each iteration, starting with the initial guess.
    pub energy_history: Vec<f64>,
    occupied: Vec<(Point, f64)>,
}

/// Scalar diagnostics of a solve, for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfSummary {
    pub nuclei: NucleiSet,
    pub grid: GridSpec,
    pub energy: f64,
    pub mass: f64,
    pub multiplier: f64,
    pub epsilon_grid: f64,
    pub multiplier_within_tolerance: bool,
    pub iterations: usize,
    pub relative_gap: f64,
    pub area: f64,
}

impl TfSolution {
    pub fn summary(&self) -> TfSummary {
        TfSummary {
            nuclei: self.nuclei.clone(),
            grid: self.sigma.spec,
            energy: self.energy,
            mass: self.sigma.integral(),
            multiplier: self.multiplier,
            epsilon_grid: self.epsilon_grid,
            multiplier_within_tolerance: self.multiplier.abs() <= self.epsilon_grid,
            iterations: self.iterations,
            relative_gap: self.relative_gap,
            area: self.region.area,
        }
    }

    /// Total potential at an arbitrary point: the nuclear term is exact and
    /// each occupied cell contributes as a uniform equal-area disk.
    pub fn phi_at(&self, x: Point) -> f64 {
        let spec = self.sigma.spec;
        let a = spec.equal_area_radius();
        let h2 = spec.cell_area();
        let nuclear: f64 = self
            .nuclei
            .positions()
            .iter()
            .map(|&p| -0.5 * dist2(x, p).ln())
            .sum();
        let screening: f64 = self
            .occupied
            .iter()
            .map(|&(c, s)| -s * smeared_neg_log(dist2(x, c), a))
            .sum();
        nuclear + h2 * screening
    }
}

/// Minimizes `E[sigma] = -int V sigma + D(sigma, sigma)` over
/// `0 <= sigma <= 1`, `int sigma = K` by spectral projected gradient with an
/// exact line search along each projected direction. The energy is
/// non-increasing along the iterates.
pub fn tf_solve(nuclei: &NucleiSet, spec: GridSpec, settings: &TfSettings) -> Result<TfSolution> {
    settings.validate()?;
    spec.check_for(nuclei)?;
    let k = nuclei.charge();
    let h2 = spec.cell_area();
    if (spec.len() as f64) * h2 < k {
        return Err(Error::InvalidGrid("grid area is smaller than the total charge".into()));
    }
    let conv = LogConvolver::new(spec);
    let v = nuclear_potential(nuclei, spec).values;
    let n = spec.len();

    let (mut sigma, mut lambda) = project(&v, h2, k, 0.0);
    let mut l_sigma = conv.apply(&sigma);
    let energy_of = |sigma: &[f64], l_sigma: &[f64]| -> f64 {
        let s: f64 = sigma
            .iter()
            .zip(&v)
            .zip(l_sigma)
            .map(|((&s, &vv), &ls)| s * (-vv - 0.5 * ls))
            .sum();
        h2 * s
    };
    let mut energy = energy_of(&sigma, &l_sigma);
    let mut history = vec![energy];
    let mut tau = 1.0;
    let mut relative_gap = f64::INFINITY;
    let mut scratch = Vec::with_capacity(n);
    let mut iterations = 0;
    let mut trial = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut converged = false;

    while iterations < settings.max_iterations {
        iterations += 1;
        for i in 0..n {
            trial[i] = sigma[i] + tau * (v[i] + l_sigma[i]);
        }
        let (projected, shift) = project(&trial, h2, k, lambda);
        lambda = shift;
        let mut phi_d = 0.0;
        let mut dd = 0.0;
        for i in 0..n {
            d[i] = projected[i] - sigma[i];
            phi_d += (v[i] + l_sigma[i]) * d[i];
            dd += d[i] * d[i];
        }
        if dd == 0.0 || phi_d <= 0.0 {
            // The projected step is stationary: optimality holds on the grid.
            relative_gap = 0.0;
            converged = true;
            break;
        }
        let l_d = conv.apply(&d);
        let curvature: f64 = -d.iter().zip(&l_d).map(|(a, b)| a * b).sum::<f64>();
        let alpha = if curvature > 0.0 {
            (phi_d / curvature).min(1.0)
        } else {
            1.0
        };
        for i in 0..n {
            sigma[i] = (sigma[i] + alpha * d[i]).clamp(0.0, 1.0);
        }
        if iterations % settings.refresh_interval == 0 {
            l_sigma = conv.apply(&sigma);
        } else {
            for i in 0..n {
                l_sigma[i] += alpha * l_d[i];
            }
        }
        energy = energy_of(&sigma, &l_sigma);
        history.push(energy);
        let gap = frank_wolfe_gap(&v, &l_sigma, &sigma, h2, k, &mut scratch);
        relative_gap = gap / energy.abs().max(f64::MIN_POSITIVE);
        if curvature > 0.0 {
            tau = (dd / curvature).clamp(1e-8, 1e8);
        } else {
            tau = (2.0 * tau).min(1e8);
        }
        if relative_gap <= settings.relative_tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::TfNonConvergence {
            iterations,
            relative_gap,
            energy,
        });
    }

    // Final potential from a fresh convolution.
    let l_sigma = conv.apply(&sigma);
    let phi_values: Vec<f64> = v.iter().zip(&l_sigma).map(|(a, b)| a + b).collect();
    let energy = energy_of(&sigma, &l_sigma);
    let sigma = GridField::new(spec, FieldRole::Sigma, sigma)?;
    let phi = GridField::new(spec, FieldRole::Phi, phi_values)?;
    let epsilon_grid = grid_tolerance(&sigma, &phi);
    let region = ScreeningRegion::from_potential(&phi, epsilon_grid);
    let multiplier = multiplier(&sigma, &phi);
    let occupied = sigma
        .values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > 0.0)
        .map(|(i, &s)| (spec.cell_center(i), s))
        .collect();
    Ok(TfSolution {
        nuclei: nuclei.clone(),
        sigma,
        phi,
        region,
        energy,
        multiplier,
        epsilon_grid,
        iterations,
        relative_gap,
        energy_history: history,
        occupied,
    })
}

/// `max over feasible s of int phi (s - sigma)`, an upper bound on
/// `E[sigma] - min E` by convexity. The maximizer fills the cells of largest
/// potential.
fn frank_wolfe_gap(
    v: &[f64],
    l_sigma: &[f64],
    sigma: &[f64],
    h2: f64,
    mass: f64,
    scratch: &mut Vec<f64>,
) -> f64 {
    scratch.clear();
    scratch.extend(v.iter().zip(l_sigma).map(|(a, b)| a + b));
    let current: f64 = scratch.iter().zip(sigma).map(|(p, s)| p * s).sum();
    let cells = mass / h2;
    let full = (cells.floor() as usize).min(scratch.len());
    let mut best = 0.0;
    if full < scratch.len() {
        scratch.select_nth_unstable_by(full, |a, b| b.total_cmp(a));
        best += (cells - full as f64) * scratch[full];
    }
    best += scratch[..full].iter().sum::<f64>();
    (h2 * (best - current)).max(0.0)
}

/// Euclidean projection of `y` onto `{0 <= s <= 1, h2 * sum s = mass}`:
/// `s = clip(y - lambda, 0, 1)` with the shift found by bracketed Newton
/// steps on the piecewise-linear mass, falling back to bisection.
fn project(y: &[f64], h2: f64, mass: f64, guess: f64) -> (Vec<f64>, f64) {
    let (mut lo, mut hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    lo -= 1.0;
    let eval = |lambda: f64| -> (f64, usize) {
        let mut m = 0.0;
        let mut free = 0;
        for &v in y {
            let t = v - lambda;
            if t >= 1.0 {
                m += 1.0;
            } else if t > 0.0 {
                m += t;
                free += 1;
            }
        }
        (h2 * m - mass, free)
    };
    let mut lambda = guess.clamp(lo, hi);
    for _ in 0..200 {
        let (excess, free) = eval(lambda);
        if excess.abs() <= 1e-13 * mass {
            break;
        }
        if excess > 0.0 {
            lo = lambda;
        } else {
            hi = lambda;
        }
        let newton = if free > 0 {
            lambda + excess / (h2 * free as f64)
        } else {
            f64::NAN
        };
        lambda = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    (y.iter().map(|&v| (v - lambda).clamp(0.0, 1.0)).collect(), lambda)
}

/// Grid tolerance on the potential over the unoccupied cells, where the
/// continuum potential vanishes identically: the largest `|phi| + h |grad phi|`
/// there, with the gradient taken from differences between unoccupied
/// neighbours only.
fn grid_tolerance(sigma: &GridField, phi: &GridField) -> f64 {
    let spec = sigma.spec;
    let empty = |ix: usize, iy: usize| sigma.values[spec.index(ix, iy)] <= OCCUPIED_LEVEL;
    let value = |ix: usize, iy: usize| phi.values[spec.index(ix, iy)];
    let slope = |lo: Option<usize>, hi: Option<usize>, at: &dyn Fn(usize) -> f64, c: usize| -> f64 {
        match (lo, hi) {
            (Some(a), Some(b)) => (at(b) - at(a)) / (2.0 * spec.h),
            (Some(a), None) => (at(c) - at(a)) / spec.h,
            (None, Some(b)) => (at(b) - at(c)) / spec.h,
            (None, None) => 0.0,
        }
    };
    let mut eps: f64 = 0.0;
    for iy in 0..spec.ny {
        for ix in 0..spec.nx {
            if !empty(ix, iy) {
                continue;
            }
            let left = (ix > 0 && empty(ix - 1, iy)).then(|| ix - 1);
            let right = (ix + 1 < spec.nx && empty(ix + 1, iy)).then_some(ix + 1);
            let down = (iy > 0 && empty(ix, iy - 1)).then(|| iy - 1);
            let up = (iy + 1 < spec.ny && empty(ix, iy + 1)).then_some(iy + 1);
            let gx = slope(left, right, &|x| value(x, iy), ix);
            let gy = slope(down, up, &|y| value(ix, y), iy);
            eps = eps.max(value(ix, iy).abs() + spec.h * gx.hypot(gy));
        }
    }
    eps
}

/// Reads the multiplier off the optimality conditions: the mean potential
/// over partially filled cells, or the midpoint of the gap between the
/// largest empty-cell and smallest full-cell potentials.
fn multiplier(sigma: &GridField, phi: &GridField) -> f64 {
    let mut partial = (0.0, 0usize);
    let mut empty_max = f64::NEG_INFINITY;
    let mut full_min = f64::INFINITY;
    for (&s, &p) in sigma.values.iter().zip(&phi.values) {
        if s <= 0.0 {
            empty_max = empty_max.max(p);
        } else if s >= 1.0 {
            full_min = full_min.min(p);
        } else {
            partial.0 += p;
            partial.1 += 1;
        }
    }
    if partial.1 > 0 {
        partial.0 / partial.1 as f64
    } else if empty_max.is_finite() && full_min.is_finite() {
        0.5 * (empty_max + full_min)
    } else if full_min.is_finite() {
        full_min
    } else {
        empty_max
    }
}
