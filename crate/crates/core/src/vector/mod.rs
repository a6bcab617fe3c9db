//! Vector equilibrium problem with Nikishin coupling on alternating half-lines.

mod balayage;
mod setup;
mod solve;
mod verify;

pub use balayage::{balayage_halfline, point_mass_balayage_density, BalayageOperator, Swept};
pub use setup::{
    decay_alpha, default_grids, nikishin_setup, pilot_support_end, tail_radius, NikishinSetup, VectorGridSpec,
    VectorGrids,
};
pub use solve::{direct_minimize_vector, solve_vector, EquilibriumSolution, SweepRecord, VectorOptions};
pub use verify::{verify_variational, ComponentDefect, VariationalSummary};
