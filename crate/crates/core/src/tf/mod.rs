//! Two-dimensional logarithmic Thomas-Fermi model: the screening density of
//! a set of unit point charges under the constraint `0 <= sigma <= 1`, its
//! total potential `phi`, and the screening region `{phi > 0}`.

mod conv;
mod grid;
mod region;
mod solve;

pub use conv::{log_convolution, LogConvolver};
pub use grid::{
    nuclear_potential, FieldRole, GridField, GridSpec, NucleiSet, MIN_CELLS_PER_UNIT_DIAMETER,
};
pub use region::{
    complementarity_residual, containment, marching_squares, region_properties, tf_binary_check,
    BinaryReport, ContainmentReport, RegionReport, ScreeningRegion, FILLED_LEVEL, OCCUPIED_LEVEL,
};
pub use solve::{tf_solve, TfSettings, TfSolution, TfSummary};
