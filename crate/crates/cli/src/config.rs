//! Command-line flags, config files and their merge into resolved configs.
//!
//! Every subcommand has a flag struct whose fields are all optional and a
//! resolved config with defaults. A TOML config file supplies the same keys
//! (snake_case); flags given on the command line take precedence.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "LAUGHLIN_OUT";

#[derive(Debug, Parser)]
#[command(name = "laughlin", version, about = "Plasma-analogy experiments for Laughlin states")]
pub struct Cli {
    /// Worker threads for chains, restarts and solves (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// TOML file with the subcommand's parameters; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory. Defaults to `$LAUGHLIN_OUT/<command>-<hash>`, or
    /// `runs/<command>-<hash>` when the variable is unset.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Metropolis sampling of the one-particle density.
    Sample(SampleArgs),
    /// Minimizing configurations of the rescaled Hamiltonian.
    Minimize(MinimizeArgs),
    /// Thomas-Fermi screening problem for a set of nuclei.
    Tf(TfArgs),
    /// Minimize, then check distances, density counts, exclusion and
    /// boundary descent.
    Verify(VerifyArgs),
    /// Trap energies of a set of prefactors against the bathtub energy.
    Energy(EnergyArgs),
    /// Summary table of a directory of runs.
    Report(ReportArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Sample(_) => "sample",
            Command::Minimize(_) => "minimize",
            Command::Tf(_) => "tf",
            Command::Verify(_) => "verify",
            Command::Energy(_) => "energy",
            Command::Report(_) => "report",
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct SampleArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ell: Option<u32>,
    /// identity | hole:X,Y[,M] | holes:X,Y,M;... | ring:R,COUNT[,CX,CY] |
    /// quadratic:RE[,IM] | a matrix label such as hole-m1-center
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prefactor: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweeps: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chains: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub proposal_sigma: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_acceptance: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cell_size: Option<f64>,
    /// Disk radii are N^alpha in physical units.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    /// Relative tolerance on the density bound.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub n: usize,
    pub ell: u32,
    pub prefactor: String,
    pub sweeps: usize,
    pub burn: usize,
    pub chains: usize,
    pub seed: u64,
    pub proposal_sigma: f64,
    pub target_acceptance: f64,
    pub cell_size: Option<f64>,
    pub alphas: Vec<f64>,
    pub tolerance: f64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            n: 50,
            ell: 2,
            prefactor: "identity".into(),
            sweeps: 100_000,
            burn: 10_000,
            chains: 4,
            seed: 0,
            proposal_sigma: 0.05,
            target_acceptance: 0.35,
            cell_size: None,
            alphas: vec![0.3, 0.4, 0.5],
            tolerance: 0.10,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct MinimizeArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ell: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prefactor: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gradient_tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimizeConfig {
    pub n: usize,
    pub ell: u32,
    pub prefactor: String,
    pub restarts: usize,
    pub seed: u64,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
}

impl Default for MinimizeConfig {
    fn default() -> Self {
        let m = laughlin_core::ground_state::MinimizeSettings::default();
        MinimizeConfig {
            n: 50,
            ell: 2,
            prefactor: "identity".into(),
            restarts: m.restarts,
            seed: m.seed,
            max_iterations: m.max_iterations,
            gradient_tolerance: m.gradient_tolerance,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct TfArgs {
    /// Nuclei as a JSON array of points, e.g. '[[0,0],[1,0]]'.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nuclei: Option<String>,
    /// Cells along the longer side of the domain.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    /// Cell size; overrides --grid.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cell: Option<f64>,
    /// Padding around the nuclei: "auto" (2 sqrt(K/pi)) or a larger number.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pad: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    /// Relative optimality gap at which the solver stops.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TfConfig {
    pub nuclei: Option<String>,
    pub grid: usize,
    pub cell: Option<f64>,
    pub pad: String,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for TfConfig {
    fn default() -> Self {
        let t = laughlin_core::tf::TfSettings::default();
        TfConfig {
            nuclei: None,
            grid: 256,
            cell: None,
            pad: "auto".into(),
            max_iterations: t.max_iterations,
            tolerance: t.relative_tolerance,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub minimize_n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ell: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prefactor: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Relative slack on the single-charge distance.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slack: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells_per_unit_diameter: Option<f64>,
    /// Disk radii for density counts (default 2, 4 and half the droplet).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    /// Number of random boundary-descent probes.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub minimize_n: usize,
    pub ell: u32,
    pub prefactor: String,
    pub k_max: usize,
    pub restarts: usize,
    pub seed: u64,
    pub slack: f64,
    pub cells_per_unit_diameter: f64,
    pub radii: Option<Vec<f64>>,
    pub probes: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        let e = laughlin_core::ground_state::ExclusionSettings::default();
        VerifyConfig {
            minimize_n: 50,
            ell: 2,
            prefactor: "identity".into(),
            k_max: 2,
            restarts: 8,
            seed: 0,
            slack: e.slack,
            cells_per_unit_diameter: e.cells_per_unit_diameter,
            radii: None,
            probes: 0,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct EnergyArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ell: Option<u32>,
    /// Trap exponent s in V(x) = |x|^s.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    /// Prefactors to compare; the first is the reference. "matrix" expands
    /// to the standard set.
    #[arg(long, num_args = 1..)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prefactors: Option<Vec<String>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweeps: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chains: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Allowed |E / E_bathtub - 1| for the reference.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyConfig {
    pub n: usize,
    pub ell: u32,
    pub s: f64,
    pub prefactors: Vec<String>,
    pub sweeps: usize,
    pub burn: usize,
    pub chains: usize,
    pub seed: u64,
    pub band: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        EnergyConfig {
            n: 100,
            ell: 2,
            s: 2.0,
            prefactors: vec!["matrix".into()],
            sweeps: 200_000,
            burn: 20_000,
            chains: 4,
            seed: 0,
            band: 0.1,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct ReportArgs {
    /// Directory searched recursively for run artifacts.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runs: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub runs: PathBuf,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            runs: PathBuf::from("runs"),
        }
    }
}

/// Reads a TOML config file into a JSON object.
pub fn load_config_file(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let table: toml::Table = toml::from_str(&text)
        .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
    serde_json::to_value(table).map_err(|e| CliError::Usage(e.to_string()))
}

/// Config file values overlaid with the explicitly given flags, then
/// completed with defaults.
pub fn resolve<A: Serialize, C: DeserializeOwned>(file: Option<Value>, flags: &A) -> Result<C, CliError> {
    let mut merged = match file {
        Some(Value::Object(m)) => m,
        Some(_) => return Err(CliError::Usage("config file must be a table".into())),
        None => serde_json::Map::new(),
    };
    if let Value::Object(given) = serde_json::to_value(flags).map_err(|e| CliError::Usage(e.to_string()))? {
        merged.extend(given);
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Usage(format!("config: {e}")))
}

/// SHA-256 of the canonical JSON of the resolved config, tagged with the
/// command name.
pub fn config_hash<C: Serialize>(command: &str, config: &C) -> String {
    let body = serde_json::to_string(&(command, config)).expect("configs serialize");
    format!("{:x}", Sha256::digest(body.as_bytes()))
}
