//! Metropolis sampling of the scaled Gibbs measure
//! `exp(2 ell sum log|z_i - z_j| - N sum |z_j|^2 + 2 log|F(sqrt(N) Z)|)`.
//!
//! Moves displace one particle by a Gaussian step. The step size is tuned
//! during burn-in only; afterwards the kernel is fixed and exactly
//! stationary. Chains are independent and run in parallel.

mod autocorr;
pub mod histogram;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::states::{dist2, norm2, scale, Configuration, PlasmaParams, Point, Prefactor};

pub use autocorr::{autocorrelation, integrated_autocorrelation, MIN_SERIES_LEN};
pub use histogram::{
    angular_modes, disk_averages, mean_and_stderr, AngularMode, DensityHistogram, DiskAverage,
    HistogramGeometry, RadialProfile, RadialRow,
};

/// Acceptance rates outside this window after burn-in are reported.
pub const ACCEPTANCE_WINDOW: (f64, f64) = (0.05, 0.9);

/// Sweeps between two step-size updates during burn-in.
const ADAPT_INTERVAL: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSettings {
    /// Total sweeps per chain, burn-in included. One sweep is N moves.
    pub sweeps: usize,
    pub burn_in: usize,
    /// Initial standard deviation of the Gaussian proposal, Gibbs-scaled units.
    pub proposal_sigma: f64,
    pub seed: u64,
    #[serde(default = "default_target_acceptance")]
    pub target_acceptance: f64,
    pub n_chains: usize,
    /// Histogram cell size; defaults to droplet diameter / 128.
    #[serde(default)]
    pub cell_size: Option<f64>,
}

fn default_target_acceptance() -> f64 {
    0.35
}

impl ChainSettings {
    pub fn new(sweeps: usize, burn_in: usize, n_chains: usize, seed: u64) -> Self {
        ChainSettings {
            sweeps,
            burn_in,
            proposal_sigma: 0.05,
            seed,
            target_acceptance: default_target_acceptance(),
            n_chains,
            cell_size: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.sweeps == 0 || self.burn_in == 0 {
            return bad("sweeps and burn_in must be positive");
        }
        if self.burn_in >= self.sweeps {
            return bad("burn_in must be smaller than sweeps");
        }
        if !(self.proposal_sigma > 0.0 && self.proposal_sigma.is_finite()) {
            return bad("proposal_sigma must be positive");
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return bad("target_acceptance must lie in (0, 1)");
        }
        if self.n_chains == 0 {
            return bad("n_chains must be positive");
        }
        if let Some(c) = self.cell_size {
            if !(c > 0.0) {
                return bad("cell_size must be positive");
            }
        }
        Ok(())
    }

    pub fn geometry(&self, params: PlasmaParams, pf: &Prefactor) -> Result<HistogramGeometry> {
        let auto = HistogramGeometry::for_plasma(params, pf);
        match self.cell_size {
            None => Ok(auto),
            Some(c) => HistogramGeometry::new(auto.center, auto.half_extent(), c),
        }
    }
}

/// Log of the Metropolis acceptance probability for a move changing the log
/// weight by `delta`.
#[inline]
pub fn acceptance_log_probability(delta: f64) -> f64 {
    delta.min(0.0)
}

/// `sum_{j != i} log(|new - z_j|^2 / |old - z_j|^2)`, multiplying ratios in
/// blocks to save logarithms.
fn pair_log_ratio(points: &[Point], i: usize, old: Point, new: Point) -> Result<f64> {
    const BLOCK: usize = 8;
    let mut acc = 0.0;
    for (b, chunk) in points.chunks(BLOCK).enumerate() {
        let base = b * BLOCK;
        let mut num = 1.0;
        let mut den = 1.0;
        for (k, &p) in chunk.iter().enumerate() {
            if base + k != i {
                num *= dist2(new, p);
                den *= dist2(old, p);
            }
        }
        if num.is_normal() && den.is_normal() {
            acc += (num / den).ln();
        } else {
            for (k, &p) in chunk.iter().enumerate() {
                if base + k == i {
                    continue;
                }
                let dn = dist2(new, p);
                if dn == 0.0 {
                    return Err(Error::SingularConfiguration(format!(
                        "move of particle {i} lands on particle {}",
                        base + k
                    )));
                }
                acc += dn.ln() - dist2(old, p).ln();
            }
        }
    }
    Ok(acc)
}

fn delta_log_weight_raw(
    params: PlasmaParams,
    pf: &Prefactor,
    points: &[Point],
    i: usize,
    new: Point,
) -> Result<f64> {
    let old = points[i];
    if old == new {
        return Ok(0.0);
    }
    let n = params.n_particles() as f64;
    let ell = params.ell() as f64;
    let confinement = -n * (norm2(new) - norm2(old));
    let interaction = ell * pair_log_ratio(points, i, old, new)?;
    let prefactor = if pf.is_identity() {
        0.0
    } else {
        let s = params.gibbs_to_physical();
        2.0 * (pf.single_log_modulus(scale(new, s))? - pf.single_log_modulus(scale(old, s))?)
    };
    Ok(confinement + interaction + prefactor)
}

/// Change of the log Gibbs weight when particle `i` moves to `new`; O(N).
pub fn delta_log_weight(
    config: &Configuration,
    pf: &Prefactor,
    particle_index: usize,
    new_position: Point,
) -> Result<f64> {
    if particle_index >= config.len() {
        return Err(Error::InvalidParameter(format!(
            "particle index {particle_index} out of range"
        )));
    }
    delta_log_weight_raw(config.params(), pf, config.points(), particle_index, new_position)
}

/// State of one Metropolis chain.
pub struct MetropolisChain<'a> {
    params: PlasmaParams,
    pf: &'a Prefactor,
    points: Vec<Point>,
    sigma: f64,
    rng: ChaCha8Rng,
    accepted: u64,
    proposed: u64,
}

impl<'a> MetropolisChain<'a> {
    /// Chain `stream` of the family seeded by `seed`.
    pub fn new(
        config: Configuration,
        pf: &'a Prefactor,
        sigma: f64,
        seed: u64,
        stream: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        MetropolisChain {
            params: config.params(),
            pf,
            points: config.into_points(),
            sigma,
            rng,
            accepted: 0,
            proposed: 0,
        }
    }

    /// Chain started from uniform points in a disk of the expected droplet
    /// size.
    pub fn from_seed(
        params: PlasmaParams,
        pf: &'a Prefactor,
        sigma: f64,
        seed: u64,
        stream: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let r = params.droplet_radius_scaled()
            * (1.0 + pf.total_multiplicity() as f64 / params.n_particles() as f64).sqrt();
        let points = (0..params.n_particles())
            .map(|_| {
                let rad = r * rng.random::<f64>().sqrt();
                let t = 2.0 * std::f64::consts::PI * rng.random::<f64>();
                [rad * t.cos(), rad * t.sin()]
            })
            .collect();
        MetropolisChain {
            params,
            pf,
            points,
            sigma,
            rng,
            accepted: 0,
            proposed: 0,
        }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn set_sigma(&mut self, sigma: f64) {
        self.sigma = sigma;
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn reset_counters(&mut self) {
        self.accepted = 0;
        self.proposed = 0;
    }

    /// Propose and accept or reject one move of particle `i`. Returns the
    /// change of the log weight when accepted.
    pub fn step(&mut self, i: usize) -> Option<f64> {
        let old = self.points[i];
        let ex: f64 = StandardNormal.sample(&mut self.rng);
        let ey: f64 = StandardNormal.sample(&mut self.rng);
        let new = [old[0] + self.sigma * ex, old[1] + self.sigma * ey];
        let u: f64 = self.rng.random();
        self.proposed += 1;
        // a singular target has zero weight: reject
        let delta = delta_log_weight_raw(self.params, self.pf, &self.points, i, new).ok()?;
        if u.ln() < acceptance_log_probability(delta) {
            self.points[i] = new;
            self.accepted += 1;
            Some(delta)
        } else {
            None
        }
    }

    /// One move per particle, in label order. Returns the summed change of
    /// the log weight.
    pub fn sweep(&mut self) -> f64 {
        let mut total = 0.0;
        for i in 0..self.points.len() {
            if let Some(d) = self.step(i) {
                total += d;
            }
        }
        total
    }
}

/// Diagnostics of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub index: usize,
    /// Acceptance rate over the recorded (post burn-in) sweeps.
    pub acceptance_rate: f64,
    pub final_sigma: f64,
    /// Integrated autocorrelation time of `sum_j |z_j|^2`, in sweeps.
    pub tau_sum_sq: Option<f64>,
    /// `sum_j |z_j|^2` after every recorded sweep.
    #[serde(skip)]
    pub sum_sq_series: Vec<f64>,
    pub warning: Option<String>,
}

impl ChainSummary {
    pub fn mean_sum_sq(&self) -> f64 {
        self.sum_sq_series.iter().sum::<f64>() / self.sum_sq_series.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerOutput {
    pub params: PlasmaParams,
    pub prefactor: Prefactor,
    pub histogram: DensityHistogram,
    pub radial: RadialProfile,
    pub chains: Vec<ChainSummary>,
    pub warnings: Vec<String>,
}

impl SamplerOutput {
    /// `<sum_j |z_j|^2>` over chains, with a standard error taking the larger
    /// of the inter-chain spread and the autocorrelation-corrected pooled
    /// estimate.
    pub fn sum_sq_estimate(&self) -> (f64, f64) {
        let means: Vec<f64> = self.chains.iter().map(|c| c.mean_sum_sq()).collect();
        let (mean, inter) = mean_and_stderr(&means);
        let mut var_sum = 0.0;
        for c in &self.chains {
            let n = c.sum_sq_series.len() as f64;
            let m = c.mean_sum_sq();
            let var = c.sum_sq_series.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
            let tau = c.tau_sum_sq.unwrap_or(n);
            var_sum += var * tau / n;
        }
        let pooled = var_sum.sqrt() / self.chains.len() as f64;
        (mean, inter.max(pooled))
    }
}

struct ChainRun {
    counts: Vec<u64>,
    clipped: u64,
    radial: Vec<u64>,
    summary: ChainSummary,
}

fn run_one_chain(
    params: PlasmaParams,
    pf: &Prefactor,
    settings: &ChainSettings,
    geometry: HistogramGeometry,
    radial_bins: usize,
    index: usize,
) -> ChainRun {
    let mut chain =
        MetropolisChain::from_seed(params, pf, settings.proposal_sigma, settings.seed, index as u64);
    for s in 0..settings.burn_in {
        chain.sweep();
        if (s + 1) % ADAPT_INTERVAL == 0 {
            let rate = chain.acceptance_rate();
            let sigma = chain.sigma() * (rate - settings.target_acceptance).exp();
            chain.set_sigma(sigma.clamp(1e-6, 10.0));
            chain.reset_counters();
        }
    }
    chain.reset_counters();

    let mut counts = vec![0u64; geometry.n_cells()];
    let mut radial = vec![0u64; radial_bins];
    let mut clipped = 0u64;
    let recorded = settings.sweeps - settings.burn_in;
    let mut series = Vec::with_capacity(recorded);
    for _ in 0..recorded {
        chain.sweep();
        let mut sum_sq = 0.0;
        for &p in chain.points() {
            let r2 = norm2(p);
            sum_sq += r2;
            match geometry.cell_index(p) {
                Some(c) => counts[c] += 1,
                None => clipped += 1,
            }
            let k = (r2.sqrt() / geometry.cell) as usize;
            if k < radial_bins {
                radial[k] += 1;
            }
        }
        series.push(sum_sq);
    }
    let rate = chain.acceptance_rate();
    let warning = if rate < ACCEPTANCE_WINDOW.0 || rate > ACCEPTANCE_WINDOW.1 {
        Some(format!(
            "mixing failure: chain {index} acceptance rate {rate:.3} outside [{}, {}]",
            ACCEPTANCE_WINDOW.0, ACCEPTANCE_WINDOW.1
        ))
    } else {
        None
    };
    let tau = integrated_autocorrelation(&series).ok();
    ChainRun {
        counts,
        clipped,
        radial,
        summary: ChainSummary {
            index,
            acceptance_rate: rate,
            final_sigma: chain.sigma(),
            tau_sum_sq: tau,
            sum_sq_series: series,
            warning,
        },
    }
}

/// Run `settings.n_chains` independent chains and merge their estimates.
/// Output is a deterministic function of the inputs.
pub fn run_chains(
    params: PlasmaParams,
    pf: &Prefactor,
    settings: &ChainSettings,
) -> Result<SamplerOutput> {
    settings.validate()?;
    pf.validate()?;
    let geometry = settings.geometry(params, pf)?;
    let radial_bins = (geometry.half_extent() / geometry.cell).ceil() as usize;
    let runs: Vec<ChainRun> = (0..settings.n_chains)
        .into_par_iter()
        .map(|c| run_one_chain(params, pf, settings, geometry, radial_bins, c))
        .collect();

    let mut counts = Vec::with_capacity(runs.len());
    let mut clipped = Vec::with_capacity(runs.len());
    let mut radial = Vec::with_capacity(runs.len());
    let mut chains = Vec::with_capacity(runs.len());
    for r in runs {
        counts.push(r.counts);
        clipped.push(r.clipped);
        radial.push(r.radial);
        chains.push(r.summary);
    }
    let histogram = DensityHistogram::from_counts(geometry, counts, clipped);
    let radial = RadialProfile::from_counts(geometry.cell, &radial, &histogram.chain_samples);
    let warnings = chains.iter().filter_map(|c| c.warning.clone()).collect();
    Ok(SamplerOutput {
        params,
        prefactor: pf.clone(),
        histogram,
        radial,
        chains,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::log_gibbs_weight;
    use num_complex::Complex64;

    fn cfg(points: Vec<Point>, ell: u32) -> Configuration {
        let n = points.len();
        Configuration::new(points, PlasmaParams::new(n, ell).unwrap()).unwrap()
    }

    #[test]
    fn zero_move_has_zero_delta() {
        let c = cfg(vec![[0.1, 0.2], [0.5, -0.3], [-0.4, 0.0]], 3);
        let pf = Prefactor::single_hole([0.0, 0.0], 2).unwrap();
        assert_eq!(delta_log_weight(&c, &pf, 1, [0.5, -0.3]).unwrap(), 0.0);
    }

    #[test]
    fn two_particle_delta_matches_full_evaluation() {
        let pfs = [
            Prefactor::Identity,
            Prefactor::single_hole([0.3, 0.1], 1).unwrap(),
            Prefactor::quadratic_exponential(Complex64::new(0.2, 0.1)).unwrap(),
        ];
        for pf in &pfs {
            let c = cfg(vec![[0.1, 0.2], [-0.7, 0.4]], 2);
            let new = [0.45, -0.15];
            let d = delta_log_weight(&c, pf, 0, new).unwrap();
            let after = c.with_points(vec![new, [-0.7, 0.4]]).unwrap();
            let full = log_gibbs_weight(&after, pf).unwrap() - log_gibbs_weight(&c, pf).unwrap();
            assert!((d - full).abs() < 1e-12, "{d} vs {full}");
        }
    }

    #[test]
    fn move_onto_particle_is_singular() {
        let c = cfg(vec![[0.1, 0.2], [-0.7, 0.4]], 2);
        assert!(matches!(
            delta_log_weight(&c, &Prefactor::Identity, 0, [-0.7, 0.4]),
            Err(Error::SingularConfiguration(_))
        ));
    }

    #[test]
    fn cumulative_delta_does_not_drift() {
        let params = PlasmaParams::new(20, 2).unwrap();
        let pf = Prefactor::single_hole([0.5, 0.0], 1).unwrap();
        let mut chain = MetropolisChain::from_seed(params, &pf, 0.08, 42, 0);
        let start = cfg(chain.points().to_vec(), 2);
        let mut running = log_gibbs_weight(&start, &pf).unwrap();
        for m in 0..10_000 {
            if let Some(d) = chain.step(m % 20) {
                running += d;
            }
        }
        let fresh = log_gibbs_weight(&cfg(chain.points().to_vec(), 2), &pf).unwrap();
        assert!((running - fresh).abs() < 1e-8, "drift {}", running - fresh);
    }

    #[test]
    fn acceptance_rule_satisfies_detailed_balance() {
        let pairs = [(-3.0, 1.5), (0.0, 0.0), (10.0, -20.0), (-1e3, -1e3 + 1e-9), (2.5, 2.4)];
        for (la, lb) in pairs {
            let forward = la + acceptance_log_probability(lb - la);
            let backward = lb + acceptance_log_probability(la - lb);
            assert!((forward - backward).abs() <= 1e-12 * forward.abs().max(1.0));
        }
    }

    #[test]
    fn settings_validation() {
        assert!(ChainSettings::new(100, 100, 4, 1).validate().is_err());
        assert!(ChainSettings::new(100, 0, 4, 1).validate().is_err());
        let mut s = ChainSettings::new(100, 10, 4, 1);
        assert!(s.validate().is_ok());
        s.proposal_sigma = 0.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn single_particle_gaussian_moment() {
        // N = 1: target exp(-|z|^2), so <|z|^2> = 1
        let params = PlasmaParams::new(1, 3).unwrap();
        let mut settings = ChainSettings::new(60_000, 2_000, 4, 17);
        settings.proposal_sigma = 0.5;
        let out = run_chains(params, &Prefactor::Identity, &settings).unwrap();
        let (m, se) = out.sum_sq_estimate();
        assert!((m - 1.0).abs() < 3.0 * se, "{m} +- {se}");
        assert!(se < 0.02);
        assert!((out.histogram.normalization() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn seeded_runs_are_bit_identical() {
        let params = PlasmaParams::new(8, 2).unwrap();
        let settings = ChainSettings::new(400, 100, 2, 99);
        let pf = Prefactor::single_hole([0.0, 0.0], 1).unwrap();
        let a = run_chains(params, &pf, &settings).unwrap();
        let b = run_chains(params, &pf, &settings).unwrap();
        assert_eq!(a.histogram, b.histogram);
        assert_eq!(a.radial, b.radial);
        assert_eq!(
            serde_json::to_string(&a.histogram).unwrap(),
            serde_json::to_string(&b.histogram).unwrap()
        );
    }
}
