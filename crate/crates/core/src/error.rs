use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Two particles (or a particle and a quasi-hole) occupy the same point.
    #[error("singular configuration: {0}")]
    SingularConfiguration(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("resolution too coarse: disk radius {radius} is below two histogram cells ({cell})")]
    ResolutionTooCoarse { radius: f64, cell: f64 },

    #[error("series too short: {len} samples, need at least {min}")]
    SeriesTooShort { len: usize, min: usize },

    #[error("degenerate series: zero variance")]
    DegenerateSeries,

    #[error("histogram support clipped: {fraction:.3e} of the mass fell outside the grid")]
    SupportClipped { fraction: f64 },

    #[error("nucleus {index} at ({x}, {y}) lies outside the grid domain")]
    NucleusOutsideDomain { index: usize, x: f64, y: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error(
        "Thomas-Fermi solve did not converge after {iterations} iterations \
         (relative optimality gap {relative_gap:.3e}, energy {energy})"
    )]
    TfNonConvergence {
        iterations: usize,
        relative_gap: f64,
        energy: f64,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),
}
