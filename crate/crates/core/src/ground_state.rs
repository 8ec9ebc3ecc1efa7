//! Minimizing configurations of the rescaled Hamiltonian and the geometric
//! checks they are expected to pass: the minimal-distance bound, density
//! counts in centred disks, exclusion from Thomas-Fermi screening regions and
//! boundary descent of the single-particle energy.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::states::{
    dist2, norm2, scaled_external_single, scaled_gradient_into, scaled_hamiltonian, Configuration,
    PlasmaParams, Point, Prefactor,
};
use crate::tf::{tf_solve, GridSpec, NucleiSet, TfSettings};

/// Radius of the screening disk of a single unit charge.
pub fn unit_disk_radius() -> f64 {
    1.0 / PI.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizeSettings {
    pub restarts: usize,
    pub max_iterations: usize,
    /// Convergence when the largest per-particle gradient norm is at most this.
    pub gradient_tolerance: f64,
    /// Sufficient-decrease constant of the Armijo test.
    pub armijo: f64,
    /// Step reduction factor while backtracking.
    pub backtrack: f64,
    pub seed: u64,
}

impl Default for MinimizeSettings {
    fn default() -> Self {
        MinimizeSettings {
            restarts: 8,
            max_iterations: 200_000,
            gradient_tolerance: 1e-8,
            armijo: 1e-4,
            backtrack: 0.5,
            seed: 0,
        }
    }
}

impl MinimizeSettings {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.max_iterations == 0 {
            return Err(Error::InvalidParameter(
                "restarts and max_iterations must be positive".into(),
            ));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(Error::InvalidParameter("gradient_tolerance must be positive".into()));
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return Err(Error::InvalidParameter("armijo must lie in (0, 1)".into()));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidParameter("backtrack must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Outcome of one descent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub index: usize,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub max_gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizerResult {
    pub params: PlasmaParams,
    pub prefactor: Prefactor,
    pub points: Vec<Point>,
    pub energy: f64,
    pub max_gradient_norm: f64,
    pub best_restart: usize,
    pub converged: bool,
    pub restarts: Vec<RestartSummary>,
}

impl MinimizerResult {
    pub fn configuration(&self) -> Result<Configuration> {
        Configuration::new(self.points.clone(), self.params)
    }
}

/// Energy and gradient in one pass; coincident points are an error.
fn energy_and_gradient(
    params: PlasmaParams,
    pf: &Prefactor,
    pts: &[Point],
    grad: &mut [Point],
) -> Result<f64> {
    scaled_gradient_into(params, pts, pf, grad)?;
    let mut energy = 0.5 * PI * pts.iter().map(|&p| norm2(p)).sum::<f64>();
    for (i, &p) in pts.iter().enumerate() {
        energy += scaled_external_single(params, pf, p)?;
        for &q in &pts[i + 1..] {
            energy -= 0.5 * dist2(p, q).ln();
        }
    }
    Ok(energy)
}

fn max_norm(grad: &[Point]) -> f64 {
    grad.iter().map(|g| g[0].hypot(g[1])).fold(0.0, f64::max)
}

/// Gradient descent with Armijo backtracking from a given start. The first
/// trial step of each iteration is the Barzilai-Borwein step. Near
/// convergence the energy decrease drops below round-off; a step is then
/// also accepted if the energy is unchanged to round-off and the largest
/// gradient norm decreases.
pub fn descend(
    params: PlasmaParams,
    pf: &Prefactor,
    start: Vec<Point>,
    settings: &MinimizeSettings,
) -> Result<(Vec<Point>, RestartSummary)> {
    settings.validate()?;
    if start.len() != params.n_particles() {
        return Err(Error::InvalidParameter(format!(
            "{} points for N = {}",
            start.len(),
            params.n_particles()
        )));
    }
    let n = start.len();
    let mut x = start;
    let mut g = vec![[0.0; 2]; n];
    let mut energy = energy_and_gradient(params, pf, &x, &mut g)?;
    let initial_energy = energy;
    let mut gmax = max_norm(&g);
    let mut step = 1e-2;
    let mut trial = vec![[0.0; 2]; n];
    let mut g_trial = vec![[0.0; 2]; n];
    let mut iterations = 0;
    let mut converged = gmax <= settings.gradient_tolerance;
    while !converged && iterations < settings.max_iterations {
        iterations += 1;
        let g2: f64 = g.iter().map(|v| norm2(*v)).sum();
        let slack = 1e-12 * (1.0 + energy.abs());
        let mut t = step;
        let accepted = loop {
            for i in 0..n {
                trial[i] = [x[i][0] - t * g[i][0], x[i][1] - t * g[i][1]];
            }
            if let Ok(e) = energy_and_gradient(params, pf, &trial, &mut g_trial) {
                if e <= energy - settings.armijo * t * g2
                    || (e <= energy + slack && max_norm(&g_trial) < gmax)
                {
                    break Some(e);
                }
            }
            t *= settings.backtrack;
            if t < 1e-18 {
                break None;
            }
        };
        let Some(e) = accepted else { break };
        let mut ss = 0.0;
        let mut sy = 0.0;
        for i in 0..n {
            for k in 0..2 {
                let s = trial[i][k] - x[i][k];
                ss += s * s;
                sy += s * (g_trial[i][k] - g[i][k]);
            }
        }
        step = if sy > 0.0 { (ss / sy).clamp(1e-12, 1e3) } else { (2.0 * t).min(1e3) };
        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut g, &mut g_trial);
        energy = e;
        gmax = max_norm(&g);
        converged = gmax <= settings.gradient_tolerance;
    }
    Ok((
        x,
        RestartSummary {
            index: 0,
            initial_energy,
            final_energy: energy,
            max_gradient_norm: gmax,
            iterations,
            converged,
        },
    ))
}

/// Gaussian start with the second moment of the unit-density droplet of
/// radius `sqrt(N / pi)`.
fn gaussian_start(n: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
    let radius = (n as f64 / PI).sqrt();
    let normal = Normal::new(0.0, 0.5 * radius).expect("positive scale");
    (0..n).map(|_| [normal.sample(rng), normal.sample(rng)]).collect()
}

/// Best of `settings.restarts` independent descents from random starts.
/// Restarts run in parallel; restart `r` draws from stream `r` of the seed,
/// so results do not depend on the thread count.
pub fn minimize(
    params: PlasmaParams,
    pf: &Prefactor,
    settings: &MinimizeSettings,
) -> Result<MinimizerResult> {
    settings.validate()?;
    pf.validate()?;
    let n = params.n_particles();
    let runs: Vec<Result<(Vec<Point>, RestartSummary)>> = (0..settings.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
            rng.set_stream(r as u64);
            // Redraw the rare start that lands on a hole or another point.
            let mut last = None;
            for _ in 0..16 {
                let start = gaussian_start(n, &mut rng);
                match descend(params, pf, start, settings) {
                    Ok((pts, mut summary)) => {
                        summary.index = r;
                        return Ok((pts, summary));
                    }
                    Err(e @ Error::SingularConfiguration(_)) => last = Some(e),
                    Err(e) => return Err(e),
                }
            }
            Err(last.expect("at least one attempt"))
        })
        .collect();
    let runs: Vec<(Vec<Point>, RestartSummary)> = runs.into_iter().collect::<Result<_>>()?;
    let better = |a: &RestartSummary, b: &RestartSummary| {
        (a.converged, -a.final_energy) > (b.converged, -b.final_energy)
    };
    let mut best = 0;
    for (i, (_, s)) in runs.iter().enumerate() {
        if better(s, &runs[best].1) {
            best = i;
        }
    }
    let (points, summary) = runs[best].clone();
    Ok(MinimizerResult {
        params,
        prefactor: pf.clone(),
        points,
        energy: summary.final_energy,
        max_gradient_norm: summary.max_gradient_norm,
        best_restart: best,
        converged: summary.converged,
        restarts: runs.into_iter().map(|(_, s)| s).collect(),
    })
}

/// Smallest distance between two points; 0 if two coincide, infinite for
/// fewer than two points.
pub fn min_pairwise_distance(points: &[Point]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, &p) in points.iter().enumerate() {
        for &q in &points[i + 1..] {
            best = best.min(dist2(p, q));
        }
    }
    best.sqrt()
}

/// Number of points in a centred disk against its area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityCount {
    pub radius: f64,
    pub count: usize,
    /// `count / (pi R^2)`.
    pub ratio: f64,
    /// Finite-radius allowance `1 + 3 / sqrt(pi R^2)`.
    pub allowance: f64,
    pub within: bool,
}

pub fn density_counts(points: &[Point], radii: &[f64]) -> Vec<DensityCount> {
    radii
        .iter()
        .map(|&radius| {
            let r2 = radius * radius;
            let count = points.iter().filter(|&&p| norm2(p) <= r2).count();
            let area = PI * r2;
            let ratio = count as f64 / area;
            let allowance = 1.0 + 3.0 / area.sqrt();
            DensityCount {
                radius,
                count,
                ratio,
                allowance,
                within: ratio <= allowance,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExclusionSettings {
    /// Relative geometric slack applied to the single-charge disk.
    pub slack: f64,
    /// Thomas-Fermi grid resolution for clusters, in cells across the
    /// diameter of a unit-area disk.
    pub cells_per_unit_diameter: f64,
    pub tf: TfSettings,
}

impl Default for ExclusionSettings {
    fn default() -> Self {
        ExclusionSettings {
            slack: 0.02,
            cells_per_unit_diameter: 64.0,
            tf: TfSettings::default(),
        }
    }
}

impl ExclusionSettings {
    pub fn cell_size(&self) -> f64 {
        2.0 * unit_disk_radius() / self.cells_per_unit_diameter
    }
}

/// A configuration point found inside a screening region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionViolation {
    /// Points generating the region.
    pub cluster: Vec<usize>,
    pub point: usize,
    /// Depth of the intrusion (positive).
    pub margin: f64,
}

/// One screening region and the closest outside point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterCheck {
    pub cluster: Vec<usize>,
    pub area: f64,
    /// Signed distance from the nearest other point to the region boundary,
    /// positive outside.
    pub clearance: f64,
    pub nearest_point: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionReport {
    pub k_max: usize,
    pub slack: f64,
    /// Smallest nearest-neighbour distance minus `pi^{-1/2}`.
    pub single_clearance: f64,
    pub clusters: Vec<ClusterCheck>,
    pub violations: Vec<ExclusionViolation>,
}

impl ExclusionReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `k` points grown greedily from `seed`, each time adding the point
/// closest to the current cluster.
pub fn nearest_cluster(points: &[Point], seed: usize, k: usize) -> Vec<usize> {
    let mut members = vec![seed];
    let mut reach: Vec<f64> = points.iter().map(|&p| dist2(p, points[seed])).collect();
    while members.len() < k.min(points.len()) {
        let next = (0..points.len())
            .filter(|i| !members.contains(i))
            .min_by(|&a, &b| reach[a].total_cmp(&reach[b]))
            .expect("points remain");
        members.push(next);
        for (i, r) in reach.iter_mut().enumerate() {
            *r = r.min(dist2(points[i], points[next]));
        }
    }
    members
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = norm2(ab);
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    dist2(p, [a[0] + t * ab[0], a[1] + t * ab[1]]).sqrt()
}

fn check_cluster(
    points: &[Point],
    members: Vec<usize>,
    h: f64,
    tf: &TfSettings,
) -> Result<(ClusterCheck, Vec<ExclusionViolation>)> {
    let nuclei = NucleiSet::new(members.iter().map(|&m| points[m]).collect())?;
    let spec = GridSpec::padded_with_cell(&nuclei, h)?;
    let sol = tf_solve(&nuclei, spec, tf)?;
    let eroded = sol.region.eroded();
    let mut check = ClusterCheck {
        cluster: members.clone(),
        area: sol.region.area,
        clearance: f64::INFINITY,
        nearest_point: None,
    };
    let mut violations = Vec::new();
    for (j, &p) in points.iter().enumerate() {
        if members.contains(&j) {
            continue;
        }
        let Some(cell) = spec.locate(p) else { continue };
        let to_boundary = sol
            .region
            .boundary
            .iter()
            .flat_map(|l| l.windows(2))
            .map(|w| segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min);
        let signed = if sol.region.inside[cell] { -to_boundary } else { to_boundary };
        if signed < check.clearance {
            check.clearance = signed;
            check.nearest_point = Some(j);
        }
        if eroded[cell] {
            violations.push(ExclusionViolation {
                cluster: members.clone(),
                point: j,
                margin: to_boundary,
            });
        }
    }
    Ok((check, violations))
}

/// Exclusion rule for a point configuration: no point lies in the screening
/// region of other points. `K = 1` compares every nearest-neighbour
/// distance with `(1 - slack) pi^{-1/2}`; for `2 <= K <= k_max`, clusters of
/// `K` mutually close points grown from every point are screened with the
/// Thomas-Fermi solver and no other point may fall in the region eroded by
/// one grid cell.
pub fn exclusion_check(
    points: &[Point],
    k_max: usize,
    settings: &ExclusionSettings,
) -> Result<ExclusionReport> {
    if k_max == 0 {
        return Err(Error::InvalidParameter("k_max must be at least 1".into()));
    }
    let r1 = unit_disk_radius();
    let mut violations = Vec::new();
    let mut single_clearance = f64::INFINITY;
    for (i, &p) in points.iter().enumerate() {
        let (j, d) = points
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(j, &q)| (j, dist2(p, q).sqrt()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((i, f64::INFINITY));
        single_clearance = single_clearance.min(d - r1);
        if d < (1.0 - settings.slack) * r1 {
            violations.push(ExclusionViolation {
                cluster: vec![j],
                point: i,
                margin: r1 - d,
            });
        }
    }

    let h = settings.cell_size();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for k in 2..=k_max.min(points.len().saturating_sub(1)) {
        for seed in 0..points.len() {
            let mut members = nearest_cluster(points, seed, k);
            members.sort_unstable();
            if !groups.contains(&members) {
                groups.push(members);
            }
        }
    }
    let checked: Vec<(ClusterCheck, Vec<ExclusionViolation>)> = groups
        .into_par_iter()
        .map(|members| check_cluster(points, members, h, &settings.tf))
        .collect::<Result<_>>()?;
    let mut clusters = Vec::with_capacity(checked.len());
    for (check, found) in checked {
        clusters.push(check);
        violations.extend(found);
    }
    Ok(ExclusionReport {
        k_max,
        slack: settings.slack,
        single_clearance,
        clusters,
        violations,
    })
}

/// Energy of the moved particle against its screening potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDescentReport {
    pub subset: Vec<usize>,
    pub probe_index: usize,
    pub probe: Point,
    pub boundary_points: usize,
    /// `G` at the probe.
    pub g_probe: f64,
    /// Smallest `G` on the region boundary.
    pub g_boundary_min: f64,
    /// `g_probe - g_boundary_min`; positive when the boundary is lower.
    pub descent_margin: f64,
    pub phi_probe: f64,
    pub phi_boundary_max_abs: f64,
    /// `G - phi` at the probe and its smallest value on the boundary.
    pub r_probe: f64,
    pub r_boundary_min: f64,
    pub passed: bool,
}

/// Compares `G(x)`, the rescaled energy with particle `probe_index` moved
/// to `x`, at `probe` and on the boundary of the screening region of the
/// `subset` points, together with the split `G = phi + R`.
pub fn verify_boundary_descent(
    config: &Configuration,
    pf: &Prefactor,
    subset: &[usize],
    probe_index: usize,
    probe: Point,
    settings: &ExclusionSettings,
) -> Result<BoundaryDescentReport> {
    let pts = config.points();
    if probe_index >= pts.len() {
        return Err(Error::InvalidParameter(format!("probe index {probe_index} out of range")));
    }
    if subset.is_empty() || subset.iter().any(|&i| i >= pts.len()) {
        return Err(Error::InvalidParameter("subset must be non-empty and in range".into()));
    }
    if subset.contains(&probe_index) {
        return Err(Error::Precondition("subset contains the probe particle".into()));
    }
    let nuclei = NucleiSet::new(subset.iter().map(|&i| pts[i]).collect())?;
    let spec = GridSpec::padded_with_cell(&nuclei, settings.cell_size())?;
    let sol = tf_solve(&nuclei, spec, &settings.tf)?;
    if !sol.region.contains(probe) {
        return Err(Error::Precondition(format!(
            "probe ({}, {}) is not inside the screening region",
            probe[0], probe[1]
        )));
    }
    let g_at = |x: Point| -> Result<f64> {
        let mut moved = pts.to_vec();
        moved[probe_index] = x;
        scaled_hamiltonian(&config.with_points(moved)?, pf)
    };
    let boundary = sol.region.boundary_points(64);
    let g_probe = g_at(probe)?;
    let phi_probe = sol.phi_at(probe);
    let mut g_boundary_min = f64::INFINITY;
    let mut r_boundary_min = f64::INFINITY;
    let mut phi_boundary_max_abs: f64 = 0.0;
    for &b in &boundary {
        let g = g_at(b)?;
        let phi = sol.phi_at(b);
        g_boundary_min = g_boundary_min.min(g);
        r_boundary_min = r_boundary_min.min(g - phi);
        phi_boundary_max_abs = phi_boundary_max_abs.max(phi.abs());
    }
    let descent_margin = g_probe - g_boundary_min;
    Ok(BoundaryDescentReport {
        subset: subset.to_vec(),
        probe_index,
        probe,
        boundary_points: boundary.len(),
        g_probe,
        g_boundary_min,
        descent_margin,
        phi_probe,
        phi_boundary_max_abs,
        r_probe: g_probe - phi_probe,
        r_boundary_min,
        passed: descent_margin > 0.0 && phi_probe > 0.0,
    })
}

/// Boundary-descent checks at `count` random probes: each draws a point
/// `a`, takes its nearest neighbour as the moved particle and places the
/// probe uniformly in the disk of radius `0.9 / sqrt(pi)` around `a`,
/// redrawing probes that fall outside the screening region of `a`.
pub fn random_boundary_descent(
    config: &Configuration,
    pf: &Prefactor,
    count: usize,
    seed: u64,
    settings: &ExclusionSettings,
) -> Result<Vec<BoundaryDescentReport>> {
    let pts = config.points();
    if pts.len() < 2 {
        return Err(Error::InvalidParameter("boundary descent needs two points".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reports = Vec::with_capacity(count);
    let mut attempts = 0;
    while reports.len() < count {
        attempts += 1;
        if attempts > 20 * count.max(1) {
            return Err(Error::Precondition("no interior probe found".into()));
        }
        let a = rng.random_range(0..pts.len());
        let b = (0..pts.len())
            .filter(|&j| j != a)
            .min_by(|&i, &j| dist2(pts[i], pts[a]).total_cmp(&dist2(pts[j], pts[a])))
            .expect("two points");
        let r = 0.9 * unit_disk_radius() * rng.random::<f64>().sqrt();
        let t = 2.0 * PI * rng.random::<f64>();
        let probe = [pts[a][0] + r * t.cos(), pts[a][1] + r * t.sin()];
        match verify_boundary_descent(config, pf, &[a], b, probe, settings) {
            Ok(rep) => reports.push(rep),
            Err(Error::Precondition(_)) | Err(Error::SingularConfiguration(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(reports)
}
