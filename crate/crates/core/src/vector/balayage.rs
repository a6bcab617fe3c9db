use std::sync::Arc;

use log::warn;
use nalgebra::{DMatrix, DVector, LU};

use crate::error::{invalid, Error, Result};
use crate::measure::kernel::log_kernel_matrix;
use crate::measure::potential::cell_potentials;
use crate::measure::{DiscreteMeasure, Grid, HalfLine};

/// Factored potential-matching system on one target grid.
///
/// Solves `G beta - c = u`, `sum beta = mass`, where `G` holds the cell-averaged
/// log kernel of the target; `c` absorbs the constant left by truncation.
pub struct BalayageOperator {
    target: Arc<Grid>,
    gram: DMatrix<f64>,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    pub regularized: bool,
}

/// Output of one potential-matching solve.
#[derive(Clone, Debug)]
pub struct Swept {
    pub measure: DiscreteMeasure,
    /// Constant `c` with `U^beta = u + c` on the target.
    pub constant: f64,
    /// Cells whose raw solution was negative before clamping.
    pub clamped: usize,
    /// Largest `|G beta - c - u|` after clamping and renormalizing.
    pub residual: f64,
}

impl BalayageOperator {
    pub fn new(target: Arc<Grid>) -> Result<Self> {
        let n = target.len();
        let gram = log_kernel_matrix(&target, &target);
        let build = |ridge: f64| {
            let mut a = DMatrix::zeros(n + 1, n + 1);
            a.view_mut((0, 0), (n, n)).copy_from(&gram);
            for i in 0..n {
                a[(i, i)] += ridge;
                a[(i, n)] = -1.0;
                a[(n, i)] = 1.0;
            }
            a
        };
        let lu = build(0.0).lu();
        if lu.is_invertible() && lu.u().diagonal().iter().all(|d| d.is_finite()) {
            return Ok(Self { target, gram, lu, regularized: false });
        }
        warn!("balayage system is singular; adding a ridge");
        let scale = gram.diagonal().abs().max();
        let lu = build(1e-12 * scale.max(1.0)).lu();
        if !lu.is_invertible() {
            return Err(Error::Numerical("balayage system is singular even after regularization".into()));
        }
        Ok(Self { target, gram, lu, regularized: true })
    }

    pub fn target(&self) -> &Arc<Grid> {
        &self.target
    }

    /// Measure of the given mass whose cell potentials equal `u` plus a constant.
    pub fn solve(&self, u: &[f64], mass: f64) -> Result<Swept> {
        let n = self.target.len();
        if u.len() != n {
            return invalid("potential vector does not match the target grid");
        }
        if mass == 0.0 {
            return Ok(Swept {
                measure: DiscreteMeasure::zero(self.target.clone()),
                constant: 0.0,
                clamped: 0,
                residual: 0.0,
            });
        }
        let mut rhs = DVector::zeros(n + 1);
        rhs.rows_mut(0, n).copy_from_slice(u);
        rhs[n] = mass;
        let sol = self
            .lu
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("balayage solve failed".into()))?;
        let mut beta: Vec<f64> = sol.iter().take(n).copied().collect();
        let clamped = beta.iter().filter(|&&b| b < 0.0).count();
        if clamped > 0 {
            for b in beta.iter_mut() {
                *b = b.max(0.0);
            }
            let s: f64 = beta.iter().sum();
            if s > 0.0 {
                for b in beta.iter_mut() {
                    *b *= mass / s;
                }
            }
        }
        let constant = sol[n];
        let bv = DVector::from_column_slice(&beta);
        let res = &self.gram * &bv;
        let residual = (0..n).map(|i| (res[i] - constant - u[i]).abs()).fold(0.0, f64::max);
        let measure = DiscreteMeasure::new(self.target.clone(), beta)?;
        Ok(Swept { measure, constant, clamped, residual })
    }

    /// Balayage of the sum of `sources` onto the target.
    pub fn sweep(&self, sources: &[&DiscreteMeasure]) -> Result<Swept> {
        let n = self.target.len();
        let mut u = vec![0.0; n];
        let mut mass = 0.0;
        for s in sources {
            for (acc, v) in u.iter_mut().zip(cell_potentials(s, &self.target)) {
                *acc += v;
            }
            mass += s.total();
        }
        self.solve(&u, mass)
    }
}

/// Balayage of `sigma` onto the (truncated) half-line `target` discretized by `grid`.
pub fn balayage_halfline(sigma: &DiscreteMeasure, target: HalfLine, grid: Arc<Grid>) -> Result<DiscreteMeasure> {
    if grid.half_line() != target {
        return invalid("grid does not lie on the target half-line");
    }
    // a measure spread over the target is its own balayage; atoms there cannot be represented
    let atom_inside = sigma
        .grid()
        .cells()
        .iter()
        .zip(sigma.masses())
        .any(|(c, &m)| m > 0.0 && c.is_atom() && target.contains_interior(c.lo));
    if atom_inside {
        return invalid("sigma has a point mass inside the target");
    }
    let op = BalayageOperator::new(grid)?;
    let out = op.sweep(&[sigma])?;
    if out.clamped > 0 {
        warn!("balayage produced {} negative cells; clamped", out.clamped);
    }
    Ok(out.measure)
}

/// Exact balayage density of a unit point mass at `a > 0` onto `(-inf, 0]`.
pub fn point_mass_balayage_density(a: f64, x: f64) -> f64 {
    if x >= 0.0 {
        return 0.0;
    }
    a.sqrt() / (std::f64::consts::PI * (-x).sqrt() * (-x + a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{log_potential_at, Clustering};
    use crate::quad::de_integrate;

    fn atom(a: f64) -> DiscreteMeasure {
        DiscreteMeasure::new(Arc::new(Grid::atoms(HalfLine::Positive, &[a]).unwrap()), vec![1.0]).unwrap()
    }

    fn target() -> Arc<Grid> {
        Arc::new(Grid::log_graded(HalfLine::Negative, 1e-8, 1e16, 12.0, &[(1e-3, 1e3, 40.0)]).unwrap())
    }

    #[test]
    fn closed_form_density_is_a_probability() {
        // x = -t^2 turns the density into 2/(pi (t^2 + a))
        let a = 2.0;
        let m = de_integrate(&|t: f64| 2.0 * t * point_mass_balayage_density(a, -t * t), 0.0, 1e4, 1e-13);
        assert!((m - 1.0 + 2.0 / (std::f64::consts::PI * 1e4 / a.sqrt())).abs() < 1e-7);
    }

    #[test]
    fn point_mass_onto_negative_axis() {
        let b = balayage_halfline(&atom(1.0), HalfLine::Negative, target()).unwrap();
        assert!((b.total() - 1.0).abs() < 1e-10);
        assert!(b.masses().iter().all(|&m| m > 0.0));
        let want = 1.0 / (2.0 * std::f64::consts::PI);
        assert!((b.density_at(-1.0) - want).abs() < 1e-3, "{}", b.density_at(-1.0));
        for x in [-0.1, -1.0, -7.0, -40.0] {
            let d = log_potential_at(&b, x) - log_potential_at(&atom(1.0), x);
            assert!(d.abs() < 1e-4, "x = {x}: {d}");
        }
    }

    #[test]
    fn supported_measure_is_fixed() {
        let g = Arc::new(Grid::clustered(HalfLine::Negative, 5.0, 40, Clustering::Cosine).unwrap());
        let s = DiscreteMeasure::from_density(g.clone(), |x| (-x).sqrt() + 0.2).unwrap();
        let op = BalayageOperator::new(g).unwrap();
        let out = op.sweep(&[&s]).unwrap();
        assert!(out.constant.abs() < 1e-9);
        for (a, b) in out.measure.masses().iter().zip(s.masses()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn idempotent() {
        let g = target();
        let op = BalayageOperator::new(g.clone()).unwrap();
        let once = op.sweep(&[&atom(3.0)]).unwrap().measure;
        let twice = op.sweep(&[&once]).unwrap().measure;
        let diff = once.masses().iter().zip(twice.masses()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-10);
    }

    #[test]
    fn rejects_sources_inside_target() {
        let g = Arc::new(Grid::uniform(HalfLine::Positive, 1.0, 4).unwrap());
        let bad = DiscreteMeasure::uniform(Arc::new(Grid::uniform(HalfLine::Negative, 1.0, 3).unwrap()), 1.0);
        assert!(balayage_halfline(&bad, HalfLine::Positive, g.clone()).is_ok());
        assert!(balayage_halfline(&atom(0.5), HalfLine::Positive, g).is_err());
    }
}
