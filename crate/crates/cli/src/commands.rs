//! The subcommand pipelines.
//!
//! Each pipeline resolves its config, validates all parameters before any
//! compute starts, then writes its artifacts together with `config.json`,
//! `status.json` (headline numbers for `report`) and `metadata.json` (the only
//! file holding timestamps).

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use laughlin_core::ground_state::{
    density_counts, exclusion_check, min_pairwise_distance, minimize, random_boundary_descent,
    unit_disk_radius, ExclusionSettings, MinimizeSettings,
};
use laughlin_core::incompressibility::{
    angular_momentum_estimate, corollary_check, density_bound_verdict, energy_report,
    energy_summary_csv, laughlin_angular_momentum, TrapPotential,
};
use laughlin_core::sampler::histogram::disk_averages;
use laughlin_core::sampler::{run_chains, ChainSettings, SamplerOutput};
use laughlin_core::tf::{
    complementarity_residual, region_properties, tf_binary_check, tf_solve, GridSpec, NucleiSet,
    TfSettings,
};
use laughlin_core::{Error, PlasmaParams, Point, SCHEMA_VERSION};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{
    config_hash, load_config_file, resolve, Cli, Command, EnergyConfig, MinimizeConfig,
    ReportConfig, SampleConfig, TfConfig, VerifyConfig,
};
use crate::output::ArtifactWriter;
use crate::prefactor::{parse_prefactor, parse_prefactor_list};
use crate::{output_dir, CliError, Outcome, Status, SummaryRow};

/// Runs the parsed command line and returns the JSON status line.
pub fn execute(cli: &Cli) -> Result<Value, CliError> {
    let threads = configure_threads(cli.threads)?;
    let file = match &cli.config {
        Some(p) => Some(section(load_config_file(p)?, cli.command.name())),
        None => None,
    };
    let name = cli.command.name();
    match &cli.command {
        Command::Sample(a) => {
            let c: SampleConfig = resolve(file, a)?;
            let job = SampleJob::prepare(c)?;
            finish(cli, name, &job.config, threads, |w| job.run(w))
        }
        Command::Minimize(a) => {
            let c: MinimizeConfig = resolve(file, a)?;
            let job = MinimizeJob::prepare(c)?;
            finish(cli, name, &job.config, threads, |w| job.run(w))
        }
        Command::Tf(a) => {
            let c: TfConfig = resolve(file, a)?;
            let job = TfJob::prepare(c)?;
            finish(cli, name, &job.config, threads, |w| job.run(w))
        }
        Command::Verify(a) => {
            let c: VerifyConfig = resolve(file, a)?;
            let job = VerifyJob::prepare(c)?;
            finish(cli, name, &job.config, threads, |w| job.run(w))
        }
        Command::Energy(a) => {
            let c: EnergyConfig = resolve(file, a)?;
            let job = EnergyJob::prepare(c)?;
            finish(cli, name, &job.config, threads, |w| job.run(w))
        }
        Command::Report(a) => {
            let c: ReportConfig = resolve(file, a)?;
            let runs = c.runs.clone();
            if !runs.is_dir() {
                return Err(usage(format!("runs directory {} does not exist", runs.display())));
            }
            finish(cli, name, &c, threads, |w| report(&runs, w))
        }
    }
}

/// A config file may hold the keys at top level or under `[<command>]`.
fn section(file: Value, command: &str) -> Value {
    match file.get(command) {
        Some(v @ Value::Object(_)) => v.clone(),
        _ => file,
    }
}

fn configure_threads(threads: Option<usize>) -> Result<usize, CliError> {
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        // A pool built earlier in the same process (tests) is kept.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    Ok(rayon::current_num_threads())
}

fn unix_seconds() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn finish<C: Serialize>(
    cli: &Cli,
    command: &str,
    config: &C,
    threads: usize,
    body: impl FnOnce(&mut ArtifactWriter) -> Result<Outcome, CliError>,
) -> Result<Value, CliError> {
    let hash = config_hash(command, config);
    let dir = output_dir(cli.out.as_ref(), command, &hash);
    let started = unix_seconds();
    let clock = Instant::now();
    let mut w = ArtifactWriter::create(&dir, &hash)?;
    w.write_json("config.json", "config", &json!({ "command": command, "config": config }))?;
    let outcome = body(&mut w)?;
    let exit_code = outcome.status.exit_code();
    w.write_json(
        "status.json",
        "status",
        &json!({
            "command": command,
            "status": outcome.status,
            "exit_code": exit_code,
            "rows": outcome.rows,
        }),
    )?;
    w.write_json(
        "metadata.json",
        "metadata",
        &json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "threads": threads,
            "started_unix": started,
            "finished_unix": unix_seconds(),
            "elapsed_seconds": clock.elapsed().as_secs_f64(),
        }),
    )?;
    Ok(json!({
        "status": outcome.status,
        "command": command,
        "exit_code": exit_code,
        "config_hash": hash,
        "out": w.dir(),
        "artifacts": w.written(),
        "schema_version": SCHEMA_VERSION,
    }))
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

// ---------------------------------------------------------------- sample

struct SampleJob {
    config: SampleConfig,
    params: PlasmaParams,
    prefactor: laughlin_core::Prefactor,
    chain: ChainSettings,
}

impl SampleJob {
    fn prepare(config: SampleConfig) -> Result<Self, CliError> {
        let params = PlasmaParams::new(config.n, config.ell)?;
        let prefactor = parse_prefactor(&config.prefactor, params)?;
        let chain = ChainSettings {
            proposal_sigma: config.proposal_sigma,
            target_acceptance: config.target_acceptance,
            cell_size: config.cell_size,
            ..ChainSettings::new(config.sweeps, config.burn, config.chains, config.seed)
        };
        chain.validate()?;
        if config.alphas.iter().any(|a| !(*a > 0.0 && *a <= 0.5)) {
            return Err(usage("alphas must lie in (0, 1/2]"));
        }
        if !(config.tolerance >= 0.0) {
            return Err(usage("tolerance must be non-negative"));
        }
        // Disk radii against the histogram resolution, before sampling.
        let geometry = chain.geometry(params, &prefactor)?;
        for &a in &config.alphas {
            let radius = (params.n_particles() as f64).powf(a - 0.5);
            if radius < 2.0 * geometry.cell {
                return Err(Error::ResolutionTooCoarse {
                    radius,
                    cell: geometry.cell,
                }
                .into());
            }
        }
        Ok(SampleJob {
            config,
            params,
            prefactor,
            chain,
        })
    }

    fn run(&self, w: &mut ArtifactWriter) -> Result<Outcome, CliError> {
        let out = run_chains(self.params, &self.prefactor, &self.chain)?;
        write_density(w, &out)?;
        let mut csv = String::from("radius,density,stderr\n");
        for r in out.radial.rows() {
            csv.push_str(&format!("{},{},{}\n", r.radius, r.density, r.stderr));
        }
        w.write_csv("radial.csv", &csv)?;

        let label = self.config.prefactor.clone();
        let verdict = density_bound_verdict(&[(label.clone(), &out)], &self.config.alphas, self.config.tolerance)?;
        let mut disks = Vec::new();
        for &alpha in &self.config.alphas {
            let records = disk_averages(&out.histogram, self.params, alpha, self.config.tolerance)?;
            disks.push(json!({ "alpha": alpha, "radius": records.first().map(|d| d.radius), "disks": records }));
        }
        w.write_json("disk_averages.json", "disk_averages", &json!({ "verdict": verdict, "scales": disks }))?;

        let l = angular_momentum_estimate(&out);
        w.write_json(
            "angular_momentum.json",
            "angular_momentum",
            &json!({ "estimate": l, "laughlin": laughlin_angular_momentum(self.params) }),
        )?;

        let mut rows = Vec::new();
        for c in &verdict.checks {
            rows.push(
                SummaryRow::new("disk_worst_excess", format!("{} alpha={}", c.label, c.alpha), c.worst_excess)
                    .passed(c.exceedances == 0),
            );
        }
        rows.push(
            SummaryRow::new("angular_momentum_per_n2", label, l.per_n_squared)
                .stderr(l.stderr / (self.params.n_particles() as f64).powi(2))
                .passed(l.within_bound),
        );
        let status = if verdict.passed { Status::Ok } else { Status::Violation };
        Ok(Outcome { status, rows })
    }
}

fn write_density(w: &mut ArtifactWriter, out: &SamplerOutput) -> Result<(), CliError> {
    let h = &out.histogram;
    w.write_json(
        "density.json",
        "density",
        &json!({
            "params": out.params,
            "prefactor": out.prefactor,
            "geometry": h.geometry,
            "n_chains": h.n_chains(),
            "total_samples": h.total_samples(),
            "clipped_fraction": h.clipped_fraction(),
            "normalization": h.normalization(),
            "density": h.density(),
            "stderr": h.stderr(),
            "chains": out.chains,
            "warnings": out.warnings,
        }),
    )
}

// -------------------------------------------------------------- minimize

struct MinimizeJob {
    config: MinimizeConfig,
    params: PlasmaParams,
    prefactor: laughlin_core::Prefactor,
    settings: MinimizeSettings,
}

impl MinimizeJob {
    fn prepare(config: MinimizeConfig) -> Result<Self, CliError> {
        let params = PlasmaParams::new(config.n, config.ell)?;
        let prefactor = parse_prefactor(&config.prefactor, params)?;
        let settings = MinimizeSettings {
            restarts: config.restarts,
            seed: config.seed,
            max_iterations: config.max_iterations,
            gradient_tolerance: config.gradient_tolerance,
            ..MinimizeSettings::default()
        };
        settings.validate()?;
        Ok(MinimizeJob {
            config,
            params,
            prefactor,
            settings,
        })
    }

    fn run(&self, w: &mut ArtifactWriter) -> Result<Outcome, CliError> {
        let r = minimize(self.params, &self.prefactor, &self.settings)?;
        w.write_json("minimizer.json", "minimizer", &r)?;
        let rows = vec![
            SummaryRow::new("minimum_energy", self.config.prefactor.clone(), r.energy).passed(r.converged),
            SummaryRow::new("min_pairwise_distance", self.config.prefactor.clone(), min_pairwise_distance(&r.points)),
        ];
        let status = if r.converged { Status::Ok } else { Status::NonConvergence };
        Ok(Outcome { status, rows })
    }
}

// -------------------------------------------------------------------- tf

struct TfJob {
    config: TfConfig,
    nuclei: NucleiSet,
    spec: GridSpec,
    settings: TfSettings,
}

impl TfJob {
    fn prepare(config: TfConfig) -> Result<Self, CliError> {
        let text = config
            .nuclei
            .as_deref()
            .ok_or_else(|| usage("tf needs --nuclei, e.g. '[[0,0]]'"))?;
        let points: Vec<Point> =
            serde_json::from_str(text).map_err(|e| usage(format!("--nuclei: {e}")))?;
        let nuclei = NucleiSet::new(points)?;
        let pad = match config.pad.trim() {
            "auto" => nuclei.padding(),
            s => s
                .parse::<f64>()
                .map_err(|_| usage(format!("--pad: expected \"auto\" or a number, got '{s}'")))?,
        };
        let spec = match config.cell {
            Some(h) => GridSpec::padded_by(&nuclei, pad, h)?,
            None => GridSpec::padded_by_cells(&nuclei, pad, config.grid)?,
        };
        spec.check_for(&nuclei)?;
        let settings = TfSettings {
            max_iterations: config.max_iterations,
            relative_tolerance: config.tolerance,
            ..TfSettings::default()
        };
        settings.validate()?;
        Ok(TfJob {
            config,
            nuclei,
            spec,
            settings,
        })
    }

    fn run(&self, w: &mut ArtifactWriter) -> Result<Outcome, CliError> {
        let sol = tf_solve(&self.nuclei, self.spec, &self.settings)?;
        w.write_json("sigma.json", "tf_sigma", &sol.sigma)?;
        w.write_json("phi.json", "tf_phi", &sol.phi)?;
        w.write_csv("region.csv", &sol.region.to_csv())?;

        let k = self.nuclei.charge();
        let summary = sol.summary();
        let region = region_properties(&sol.region, &self.nuclei, None);
        let binary = tf_binary_check(&sol.sigma);
        let residual = complementarity_residual(&sol.sigma, &sol.phi, &sol.region);
        let residual_bound = sol.epsilon_grid * k;
        let phi_outside = sol
            .phi
            .values
            .iter()
            .zip(&sol.region.inside)
            .filter(|(_, &inside)| !inside)
            .map(|(p, _)| p.abs())
            .fold(0.0, f64::max);
        // Single nucleus: the region is the disk of radius pi^{-1/2}.
        let circle = (self.nuclei.len() == 1).then(|| {
            let c = self.nuclei.positions()[0];
            let r0 = unit_disk_radius();
            let dev = sol
                .region
                .boundary
                .iter()
                .flatten()
                .map(|p| ((p[0] - c[0]).hypot(p[1] - c[1]) - r0).abs())
                .fold(0.0, f64::max);
            json!({
                "radius": r0,
                "max_radial_deviation": dev,
                "max_radial_deviation_cells": dev / self.spec.h,
                "passed": dev <= 2.0 * self.spec.h,
            })
        });
        let area_ok = region.area_error.abs() <= 0.02 * k;
        let residual_ok = residual <= residual_bound;
        let phi_ok = phi_outside <= sol.epsilon_grid;
        let circle_ok = circle.as_ref().map_or(true, |c| c["passed"] == true);
        let passed = area_ok && residual_ok && phi_ok && binary.passed && circle_ok;
        w.write_json(
            "tf_summary.json",
            "tf_summary",
            &json!({
                "summary": summary,
                "region": region,
                "area_within_2_percent": area_ok,
                "binary": binary,
                "complementarity_residual": residual,
                "complementarity_bound": residual_bound,
                "complementarity_passed": residual_ok,
                "phi_outside_max_abs": phi_outside,
                "phi_outside_passed": phi_ok,
                "circle": circle,
                "passed": passed,
            }),
        )?;
        let label = format!("K={}", self.nuclei.len());
        let rows = vec![
            SummaryRow::new("tf_area", label.clone(), region.area).passed(area_ok),
            SummaryRow::new("tf_complementarity_residual", label.clone(), residual).passed(residual_ok),
            SummaryRow::new("tf_intermediate_fraction", label, binary.intermediate_fraction).passed(binary.passed),
        ];
        let status = if passed { Status::Ok } else { Status::Violation };
        Ok(Outcome { status, rows })
    }
}

// ---------------------------------------------------------------- verify

struct VerifyJob {
    config: VerifyConfig,
    params: PlasmaParams,
    prefactor: laughlin_core::Prefactor,
    minimize: MinimizeSettings,
    exclusion: ExclusionSettings,
    radii: Vec<f64>,
}

impl VerifyJob {
    fn prepare(config: VerifyConfig) -> Result<Self, CliError> {
        let params = PlasmaParams::new(config.minimize_n, config.ell)?;
        let prefactor = parse_prefactor(&config.prefactor, params)?;
        let minimize = MinimizeSettings {
            restarts: config.restarts,
            seed: config.seed,
            ..MinimizeSettings::default()
        };
        minimize.validate()?;
        if config.k_max == 0 {
            return Err(usage("k_max must be positive"));
        }
        if !(config.slack >= 0.0 && config.slack < 1.0) {
            return Err(usage("slack must lie in [0, 1)"));
        }
        if !(config.cells_per_unit_diameter >= 4.0) {
            return Err(usage("cells_per_unit_diameter must be at least 4"));
        }
        let exclusion = ExclusionSettings {
            slack: config.slack,
            cells_per_unit_diameter: config.cells_per_unit_diameter,
            ..ExclusionSettings::default()
        };
        let droplet = (params.n_particles() as f64 / PI).sqrt();
        let radii = config.radii.clone().unwrap_or_else(|| vec![2.0, 4.0, 0.5 * droplet]);
        if radii.iter().any(|r| !(*r > 0.0)) {
            return Err(usage("radii must be positive"));
        }
        Ok(VerifyJob {
            config,
            params,
            prefactor,
            minimize,
            exclusion,
            radii,
        })
    }

    fn run(&self, w: &mut ArtifactWriter) -> Result<Outcome, CliError> {
        let r = minimize(self.params, &self.prefactor, &self.minimize)?;
        w.write_json("minimizer.json", "minimizer", &r)?;

        let min_distance = min_pairwise_distance(&r.points);
        let distance_bound = (1.0 - self.config.slack) * unit_disk_radius();
        let distance_ok = min_distance >= distance_bound;
        let counts = density_counts(&r.points, &self.radii);
        let counts_ok = counts.iter().all(|c| c.within);
        let exclusion = exclusion_check(&r.points, self.config.k_max, &self.exclusion)?;
        let probes = if self.config.probes > 0 {
            let config = r.configuration()?;
            random_boundary_descent(&config, &self.prefactor, self.config.probes, self.config.seed, &self.exclusion)?
        } else {
            Vec::new()
        };
        let probes_ok = probes.iter().all(|p| p.passed);
        let violation = !(distance_ok && counts_ok && exclusion.passed() && probes_ok);

        w.write_json(
            "exclusion_report.json",
            "exclusion_report",
            &json!({
                "converged": r.converged,
                "energy": r.energy,
                "distance": {
                    "min_pairwise": min_distance,
                    "bound": distance_bound,
                    "violation": !distance_ok,
                },
                "density_counts": counts,
                "density_violation": !counts_ok,
                "exclusion": exclusion,
                "exclusion_violation": !exclusion.passed(),
                "boundary_descent": probes,
                "boundary_descent_violation": !probes_ok,
                "violation": violation,
            }),
        )?;

        let label = format!("N={} {}", self.params.n_particles(), self.config.prefactor);
        let mut rows = vec![
            SummaryRow::new("min_pairwise_distance", label.clone(), min_distance).passed(distance_ok),
            SummaryRow::new("exclusion_violations", label.clone(), exclusion.violations.len() as f64)
                .passed(exclusion.passed()),
        ];
        for c in &counts {
            rows.push(
                SummaryRow::new("density_count_ratio", format!("{label} R={}", c.radius), c.ratio).passed(c.within),
            );
        }
        if !probes.is_empty() {
            let ok = probes.iter().filter(|p| p.passed).count();
            rows.push(SummaryRow::new("boundary_descent_passed", label, ok as f64).passed(probes_ok));
        }
        let status = if violation {
            Status::Violation
        } else if !r.converged {
            Status::NonConvergence
        } else {
            Status::Ok
        };
        Ok(Outcome { status, rows })
    }
}

// ---------------------------------------------------------------- energy

struct EnergyJob {
    config: EnergyConfig,
    params: PlasmaParams,
    trap: TrapPotential,
    prefactors: Vec<(String, laughlin_core::Prefactor)>,
    chain: ChainSettings,
}

impl EnergyJob {
    fn prepare(config: EnergyConfig) -> Result<Self, CliError> {
        let params = PlasmaParams::new(config.n, config.ell)?;
        let trap = TrapPotential::new(config.s)?;
        let prefactors = parse_prefactor_list(&config.prefactors, params)?;
        let chain = ChainSettings::new(config.sweeps, config.burn, config.chains, config.seed);
        chain.validate()?;
        if !(config.band >= 0.0) {
            return Err(usage("band must be non-negative"));
        }
        Ok(EnergyJob {
            config,
            params,
            trap,
            prefactors,
            chain,
        })
    }

    fn run(&self, w: &mut ArtifactWriter) -> Result<Outcome, CliError> {
        let mut reports = Vec::new();
        let mut momenta = Vec::new();
        for (k, (label, pf)) in self.prefactors.iter().enumerate() {
            let settings = ChainSettings {
                seed: self.config.seed.wrapping_add(1000 * k as u64),
                ..self.chain.clone()
            };
            let out = run_chains(self.params, pf, &settings)?;
            reports.push((label.clone(), energy_report(&out, self.trap)?));
            momenta.push((label.clone(), angular_momentum_estimate(&out)));
        }
        let (reference, others) = reports.split_first().expect("at least one prefactor");
        let other_reports: Vec<_> = others.iter().map(|(_, r)| r.clone()).collect();
        let verdict = corollary_check(&reference.1, &other_reports, self.config.band)?;

        w.write_json(
            "energy_reports.json",
            "energy_reports",
            &reports.iter().map(|(l, r)| json!({ "label": l, "report": r })).collect::<Vec<_>>(),
        )?;
        w.write_json("corollary.json", "corollary", &json!({ "reference": reference.0, "verdict": verdict }))?;
        w.write_json(
            "angular_momentum.json",
            "angular_momentum",
            &json!({
                "laughlin": laughlin_angular_momentum(self.params),
                "estimates": momenta.iter().map(|(l, e)| json!({ "label": l, "estimate": e })).collect::<Vec<_>>(),
            }),
        )?;
        let plain: Vec<_> = reports.iter().map(|(_, r)| r.clone()).collect();
        w.write_csv("energy_summary.csv", &energy_summary_csv(&plain))?;

        let mut rows = Vec::new();
        for (label, r) in &reports {
            rows.push(
                SummaryRow::new("trap_energy_ratio", label.clone(), r.ratio)
                    .stderr(r.ratio_stderr)
                    .passed(r.above_bathtub),
            );
        }
        for (label, e) in &momenta {
            rows.push(
                SummaryRow::new("angular_momentum_per_n2", label.clone(), e.per_n_squared)
                    .stderr(e.stderr / (self.params.n_particles() as f64).powi(2))
                    .passed(e.within_bound),
            );
        }
        rows.push(SummaryRow::new("corollary", reference.0.clone(), verdict.reference.ratio).passed(verdict.passed));
        let momenta_ok = momenta.iter().all(|(_, e)| e.within_bound);
        let status = if verdict.passed && momenta_ok { Status::Ok } else { Status::Violation };
        Ok(Outcome { status, rows })
    }
}

// ---------------------------------------------------------------- report

fn collect_runs(dir: &Path, found: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    for p in paths {
        if p.is_dir() {
            if p.join("status.json").is_file() {
                found.push(p.clone());
            }
            collect_runs(&p, found)?;
        }
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn report(root: &Path, w: &mut ArtifactWriter) -> Result<Outcome, CliError> {
    let mut dirs = Vec::new();
    collect_runs(root, &mut dirs)?;
    let mut runs = Vec::new();
    let mut csv = String::from("run,command,config_hash,exit_code,quantity,label,value,stderr,passed\n");
    let mut all_passed = true;
    for d in dirs {
        let text = std::fs::read_to_string(d.join("status.json"))
            .map_err(|e| CliError::Io(format!("{}: {e}", d.display())))?;
        let doc: Value = serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", d.display())))?;
        let hash = doc["config_hash"].as_str().unwrap_or("").to_string();
        let data = &doc["data"];
        let command = data["command"].as_str().unwrap_or("").to_string();
        if command == "report" {
            continue;
        }
        let exit_code = data["exit_code"].as_i64().unwrap_or(-1);
        all_passed &= exit_code == 0;
        let rel = d.strip_prefix(root).unwrap_or(&d).display().to_string();
        let rows: Vec<SummaryRow> = serde_json::from_value(data["rows"].clone()).unwrap_or_default();
        for r in &rows {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                csv_field(&rel),
                command,
                hash,
                exit_code,
                r.quantity,
                csv_field(&r.label),
                r.value,
                r.stderr.map(|e| e.to_string()).unwrap_or_default(),
                r.passed.map(|p| p.to_string()).unwrap_or_default(),
            ));
        }
        runs.push(json!({
            "run": rel,
            "command": command,
            "config_hash": hash,
            "exit_code": exit_code,
            "rows": rows,
        }));
    }
    w.write_csv("summary.csv", &csv)?;
    w.write_json("report.json", "report", &json!({ "runs": runs, "all_passed": all_passed }))?;
    let rows = vec![SummaryRow::new("runs", root.display().to_string(), runs.len() as f64).passed(all_passed)];
    Ok(Outcome { status: Status::Ok, rows })
}
