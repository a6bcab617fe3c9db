//! Closed-form families generated by point masses through the sheeted function `Psi`.

mod family;
mod psi;
mod report;

pub use family::{oracle_grids, point_mass_family, superpose, AnalyticFamily, OracleQuadrature};
pub use psi::{psi_eval, u_mu1_closed_form, SheetedPsi, Side};
pub use report::{analytic_check, closed_form_points, energy_identity_check, tail_exponent, AnalyticReport};
