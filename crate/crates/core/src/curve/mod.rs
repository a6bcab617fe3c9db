//! Algebraic relation satisfied by the Cauchy transform when `theta = 1/r`.

mod fit;
mod rational;
mod sheets;

pub use fit::{
    curve_residual, default_shapes, elementary_symmetric, fit_curve, fit_curve_unchecked, polynomial_residual,
    spectral_curve, CurveFit, SymmetricFit,
};
pub use rational::{fit_rational, poly_eval, FitShape, Rational, RationalFit};
pub use sheets::{curve_components, curve_samples, sheet_values, sheet_values_of};
