use num_complex::Complex64;

use super::grid::Grid;
use super::kernel::{avg_cauchy, avg_half_log1p_sq, avg_log_abs, avg_log_complex, sphere_averages};
use super::DiscreteMeasure;

/// Logarithmic potential `sum_k m_k avg log(1/|z - y|)` of a measure at `z`.
///
/// Points inside a cell see the exact cell average, so the value stays finite;
/// an atom sitting exactly at `z` is skipped (see [`log_potential_flagged`]).
pub fn log_potential(m: &DiscreteMeasure, z: Complex64) -> f64 {
    log_potential_flagged(m, z).0
}

/// As [`log_potential`], also reporting whether a singular cell or atom was desingularized.
pub fn log_potential_flagged(m: &DiscreteMeasure, z: Complex64) -> (f64, bool) {
    let mut acc = 0.0;
    let mut flagged = false;
    for (c, &w) in m.grid().cells().iter().zip(m.masses()) {
        if w == 0.0 {
            continue;
        }
        if z.im == 0.0 && z.re >= c.lo && z.re <= c.hi {
            flagged = true;
            if c.is_atom() {
                continue;
            }
        }
        acc -= w * avg_log_complex(z, *c);
    }
    (acc, flagged)
}

pub fn log_potential_at(m: &DiscreteMeasure, x: f64) -> f64 {
    log_potential(m, Complex64::new(x, 0.0))
}

/// Spherical potential: log kernel plus `log sqrt(1+|z|^2)` and `log sqrt(1+y^2)` terms.
pub fn spherical_potential(m: &DiscreteMeasure, z: Complex64) -> f64 {
    let (u, _) = log_potential_flagged(m, z);
    let sz = 0.5 * z.norm_sqr().ln_1p();
    let inner: f64 = m
        .grid()
        .cells()
        .iter()
        .zip(m.masses())
        .map(|(c, w)| w * avg_half_log1p_sq(*c))
        .sum();
    u + m.total() * sz + inner
}

/// Cauchy transform `sum_k m_k avg 1/(z - y)`.
pub fn cauchy_transform(m: &DiscreteMeasure, z: Complex64) -> Complex64 {
    m.grid()
        .cells()
        .iter()
        .zip(m.masses())
        .filter(|(_, &w)| w != 0.0)
        .map(|(c, &w)| avg_cauchy(z, *c) * w)
        .sum()
}

/// Potential of `m` averaged over each cell of `target` (Galerkin form).
pub fn cell_potentials(m: &DiscreteMeasure, target: &Grid) -> Vec<f64> {
    target
        .cells()
        .iter()
        .map(|t| {
            m.grid()
                .cells()
                .iter()
                .zip(m.masses())
                .filter(|(_, &w)| w != 0.0)
                .map(|(c, &w)| -w * avg_log_abs(*t, *c))
                .sum()
        })
        .collect()
}

/// Spherical potential of `m` averaged over each cell of `target`.
pub fn cell_spherical_potentials(m: &DiscreteMeasure, target: &Grid) -> Vec<f64> {
    let inner: f64 = m
        .masses()
        .iter()
        .zip(sphere_averages(m.grid()))
        .map(|(w, s)| w * s)
        .sum();
    cell_potentials(m, target)
        .into_iter()
        .zip(sphere_averages(target))
        .map(|(u, s)| u + m.total() * s + inner)
        .collect()
}
