use std::sync::Arc;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::measure::{nikishin_masses, Clustering, ExternalField, Grid, HalfLine, InteractionMatrix};
use crate::scalar::{solve_transformed, ScalarOptions};

/// Coupling matrix, prescribed masses and half-line of every component.
#[derive(Clone, Debug)]
pub struct NikishinSetup {
    pub q: u32,
    pub r: u32,
    pub matrix: InteractionMatrix,
    pub masses: Vec<(i32, Ratio<i64>)>,
    pub supports: Vec<(i32, HalfLine)>,
}

impl NikishinSetup {
    pub fn indices(&self) -> std::ops::RangeInclusive<i32> {
        self.matrix.indices()
    }

    pub fn mass(&self, j: i32) -> f64 {
        self.masses
            .iter()
            .find(|p| p.0 == j)
            .map(|p| *p.1.numer() as f64 / *p.1.denom() as f64)
            .unwrap_or(0.0)
    }

    /// `sum_j c_ij m_j` for every row, in exact arithmetic.
    pub fn row_sums(&self) -> Vec<(i32, Ratio<i64>)> {
        self.indices()
            .map(|i| {
                let s = self
                    .masses
                    .iter()
                    .fold(Ratio::from_integer(0), |acc, (j, m)| acc + self.matrix.entry_ratio(i, *j) * m);
                (i, s)
            })
            .collect()
    }
}

/// Builds the problem data for `theta = q/r`; `(q, r)` is used as given, not reduced.
pub fn nikishin_setup(q: u32, r: u32) -> Result<NikishinSetup> {
    if q == 0 || r == 0 {
        return invalid("q and r must be at least 1");
    }
    let matrix = InteractionMatrix::nikishin(q, r);
    let masses = nikishin_masses(q, r);
    let supports = matrix.indices().map(|j| (j, HalfLine::of_index(j))).collect();
    Ok(NikishinSetup { q, r, matrix, masses, supports })
}

/// Radius beyond which a density `~ c |x|^(-1-alpha)` keeps less than `eps` mass.
pub fn tail_radius(alpha: f64, eps: f64, c: f64) -> f64 {
    (c / (alpha * eps)).powf(1.0 / alpha)
}

/// Decay exponent `alpha` of the component `j` density `~ |x|^(-1-alpha)`.
pub fn decay_alpha(q: u32, r: u32, j: i32) -> f64 {
    if j >= 1 {
        1.0 / r as f64
    } else {
        1.0 / q as f64
    }
}

/// Resolution of the default grids.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct VectorGridSpec {
    /// Cells of the center component.
    pub center_cells: usize,
    /// Truncation of the center component; taken from a pilot solve when absent.
    pub center_radius: Option<f64>,
    /// Cells per decade on the off-center components.
    pub per_decade: f64,
    /// Cells per decade within three decades of the center scale.
    pub band_per_decade: f64,
    /// First cell `[0, inner]` of the off-center components, relative to the center scale.
    pub inner: f64,
    /// Tail mass left beyond the nominal radius.
    pub eps_tail: f64,
    /// Extra factor between the nominal radius and the truncation point.
    pub guard: f64,
}

impl Default for VectorGridSpec {
    fn default() -> Self {
        Self {
            center_cells: 240,
            center_radius: None,
            per_decade: 12.0,
            band_per_decade: 40.0,
            inner: 1e-10,
            eps_tail: 1e-6,
            guard: 1e3,
        }
    }
}

/// One grid per component, indexed from `first`.
#[derive(Clone, Debug)]
pub struct VectorGrids {
    pub first: i32,
    pub grids: Vec<Arc<Grid>>,
    /// Radius up to which the tail estimate keeps the neglected mass below `eps_tail`.
    pub nominal_radii: Vec<f64>,
}

impl VectorGrids {
    pub fn get(&self, j: i32) -> Option<&Arc<Grid>> {
        if j < self.first {
            return None;
        }
        self.grids.get((j - self.first) as usize)
    }
    pub fn nominal_radius(&self, j: i32) -> f64 {
        self.nominal_radii[(j - self.first) as usize]
    }
}

/// Right end of the support of the transformed scalar problem, from a coarse solve.
pub fn pilot_support_end(q: u32, r: u32, vhat: &ExternalField) -> Result<f64> {
    let mut radius = 16.0;
    for _ in 0..12 {
        let grid = Arc::new(Grid::clustered(HalfLine::Positive, radius, 120, Clustering::Cosine)?);
        let sol = solve_transformed(q, r, vhat, grid, &ScalarOptions::default())?;
        if !sol.truncation_warning {
            let end = sol.support.last().map(|s| s.1).unwrap_or(radius);
            return Ok(end);
        }
        radius *= 4.0;
    }
    Err(crate::Error::Numerical("pilot support keeps growing; field too weak".into()))
}

/// Default grids: cosine cells in `s^(1/q)` on `[0, R0]` for the center, log-graded truncated half-lines elsewhere.
pub fn default_grids(q: u32, r: u32, vhat: &ExternalField, spec: &VectorGridSpec) -> Result<VectorGrids> {
    let setup = nikishin_setup(q, r)?;
    let r0 = match spec.center_radius {
        Some(x) => x,
        None => 1.5 * pilot_support_end(q, r, vhat)?,
    };
    let mut grids = Vec::new();
    let mut nominal = Vec::new();
    for j in setup.indices() {
        if j == 0 {
            // cosine cells in x = s^(1/q), so the hard edge at 0 is resolved as in the original variable
            let base = Grid::clustered(HalfLine::Positive, r0.powf(1.0 / q as f64), spec.center_cells, Clustering::Cosine)?;
            grids.push(Arc::new(if q == 1 { base } else { base.mapped(HalfLine::Positive, |x| x.powi(q as i32))? }));
            nominal.push(r0);
            continue;
        }
        let alpha = decay_alpha(q, r, j);
        let nominal_r = tail_radius(alpha, spec.eps_tail, 1.0).max(1e3 * r0);
        let radius = nominal_r * spec.guard;
        let bands = [(1e-3 * r0, 1e3 * r0, spec.band_per_decade)];
        grids.push(Arc::new(Grid::log_graded(
            HalfLine::of_index(j),
            spec.inner * r0,
            radius,
            spec.per_decade,
            &bands,
        )?));
        nominal.push(nominal_r);
    }
    Ok(VectorGrids { first: setup.matrix.first(), grids, nominal_radii: nominal })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_three() {
        let s = nikishin_setup(2, 3).unwrap();
        assert_eq!(s.matrix.dim(), 4);
        let m: Vec<f64> = s.indices().map(|j| s.mass(j)).collect();
        assert_eq!(m, vec![0.5, 1.0, 2.0 / 3.0, 1.0 / 3.0]);
        for (i, v) in s.row_sums() {
            let want = if i == 0 { Ratio::new(5, 12) } else { Ratio::from_integer(0) };
            assert_eq!(v, want);
        }
        assert_eq!(s.supports[0], (-1, HalfLine::Negative));
    }

    #[test]
    fn degenerate_one_one() {
        let s = nikishin_setup(1, 1).unwrap();
        assert_eq!(s.matrix.dim(), 1);
        assert_eq!(s.row_sums(), vec![(0, Ratio::from_integer(1))]);
    }

    #[test]
    fn tail_radius_leaves_eps() {
        let (alpha, eps) = (0.5, 1e-6);
        let r = tail_radius(alpha, eps, 1.0);
        // int_R^inf x^(-1-alpha) dx = R^(-alpha)/alpha
        assert!((r.powf(-alpha) / alpha - eps).abs() < 1e-12);
    }
}
