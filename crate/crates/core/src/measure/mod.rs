//! Grids, discrete measures, potentials and energy functionals.

mod discrete;
pub mod energy;
mod family;
mod field;
mod grid;
mod halfline;
mod interaction;
pub mod kernel;
pub mod potential;

pub use discrete::{pushforward_power, sup_cdf_distance, sup_cdf_distance_to, DiscreteMeasure, PowerDirection};
pub use energy::{
    energy, mutual_energy, power_energy, scalar_functional, spherical_mutual_energy, spherical_vector_functional,
    vector_functional, ScalarForm,
};
pub use family::{nikishin_masses, VectorFamily};
pub use field::{ExternalField, FieldKind};
pub use grid::{Cell, Clustering, Grid, MapKind};
pub use halfline::HalfLine;
pub use interaction::InteractionMatrix;
pub use potential::{cauchy_transform, log_potential, log_potential_at, log_potential_flagged, spherical_potential};
