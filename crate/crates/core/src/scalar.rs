//! Scalar equilibrium problem with the extra `x^theta` interaction.

use std::sync::Arc;

use log::warn;
use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::measure::kernel::{avg_log_abs, avg_log_power_ratio, log_kernel_matrix, power_correction_matrix};
use crate::measure::{Clustering, DiscreteMeasure, ExternalField, Grid, HalfLine};
use crate::qp::{simplex_qp, QpOptions};
use crate::theta::Theta;

#[derive(Clone, Debug)]
pub struct ScalarOptions {
    pub qp: QpOptions,
    /// Starting weights; uniform when absent.
    pub initial: Option<Vec<f64>>,
}

impl Default for ScalarOptions {
    fn default() -> Self {
        Self { qp: QpOptions::default(), initial: None }
    }
}

/// Which pair of power kernels defines the energy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum KernelPair {
    /// `1/2 I + 1/2 I_theta`
    Direct { theta: f64 },
    /// `1/2 I_{1/q} + 1/2 I_{1/r}`
    Transformed { q: u32, r: u32 },
}

impl KernelPair {
    fn powers(&self) -> (f64, f64) {
        match *self {
            KernelPair::Direct { theta } => (1.0, theta),
            KernelPair::Transformed { q, r } => (1.0 / q as f64, 1.0 / r as f64),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ScalarSolution {
    pub measure: DiscreteMeasure,
    pub ell: f64,
    pub residual_on_support: f64,
    /// Most negative value of `effective potential - ell` off the support.
    pub residual_off_support: f64,
    pub support: Vec<(f64, f64)>,
    /// `U + U_theta + V` per cell as seen by the optimizer.
    pub effective_potential: Vec<f64>,
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub truncation_warning: bool,
    pub kernels: KernelPair,
    pub weight_floor: f64,
}

/// Hessian of the quadratic form `1/2 I_p1 + 1/2 I_p2` on a grid.
pub fn scalar_hessian(grid: &Grid, kernels: KernelPair) -> DMatrix<f64> {
    let (p1, p2) = kernels.powers();
    let mut h = log_kernel_matrix(grid, grid) * 2.0;
    for p in [p1, p2] {
        if p != 1.0 {
            h += power_correction_matrix(grid, p);
        }
    }
    h
}

fn check_grid(grid: &Grid) -> Result<()> {
    if grid.half_line() != HalfLine::Positive {
        return invalid("scalar problems live on [0, inf)");
    }
    Ok(())
}

fn solve_with(kernels: KernelPair, v: &ExternalField, grid: Arc<Grid>, opts: &ScalarOptions) -> Result<ScalarSolution> {
    check_grid(&grid)?;
    let h = scalar_hessian(&grid, kernels);
    let b = v.cell_averages(&grid);
    if b.iter().any(|x| !x.is_finite()) {
        return invalid("external field is not finite on the grid");
    }
    let qp = simplex_qp(&h, &b, 1.0, opts.initial.as_deref(), &opts.qp);
    let floor = opts.qp.weight_floor;
    let measure = DiscreteMeasure::new(grid.clone(), qp.x.clone())?;
    let (on, off) = defects(&qp.x, &qp.gradient, qp.ell, floor);
    let support = measure.support_intervals(floor);
    let outer = grid.len() - 1;
    let truncation_warning = qp.x[outer] > floor;
    if truncation_warning {
        warn!("support reaches the truncation radius {}", grid.truncation());
    }
    if !qp.converged {
        warn!("scalar solve stopped before the KKT test passed");
    }
    Ok(ScalarSolution {
        measure,
        ell: qp.ell,
        residual_on_support: on,
        residual_off_support: off,
        support,
        effective_potential: qp.gradient,
        history: qp.history,
        iterations: qp.iterations,
        converged: qp.converged,
        truncation_warning,
        kernels,
        weight_floor: floor,
    })
}

fn defects(x: &[f64], g: &[f64], ell: f64, floor: f64) -> (f64, f64) {
    let total: f64 = x.iter().sum();
    let mut on: f64 = 0.0;
    let mut off = f64::INFINITY;
    for (xi, gi) in x.iter().zip(g) {
        if *xi > floor * total {
            on = on.max((gi - ell).abs());
        } else {
            off = off.min(gi - ell);
        }
    }
    (on, if off.is_finite() { off } else { 0.0 })
}

/// Minimizes `1/2 I(mu) + 1/2 I_theta(mu) + int V dmu` over probability weights on `grid`.
pub fn solve_scalar(theta: Theta, v: &ExternalField, grid: Arc<Grid>, opts: &ScalarOptions) -> Result<ScalarSolution> {
    solve_with(KernelPair::Direct { theta: theta.value() }, v, grid, opts)
}

/// Right end of the support from a coarse solve on a growing radius.
pub fn scalar_support_end(theta: Theta, v: &ExternalField) -> Result<f64> {
    let mut radius = 8.0;
    for _ in 0..12 {
        let grid = Arc::new(Grid::clustered(HalfLine::Positive, radius, 120, Clustering::Cosine)?);
        let pilot = solve_scalar(theta, v, grid, &ScalarOptions::default())?;
        if !pilot.truncation_warning {
            return Ok(pilot.support.last().map(|s| s.1).unwrap_or(radius));
        }
        radius *= 4.0;
    }
    Err(crate::Error::Numerical("pilot support keeps growing; field too weak".into()))
}

/// [`solve_scalar`] on `cells` cosine cells over `[0, 1.5 b]`, `b` from [`scalar_support_end`].
pub fn solve_scalar_auto(theta: Theta, v: &ExternalField, cells: usize, opts: &ScalarOptions) -> Result<ScalarSolution> {
    let end = scalar_support_end(theta, v)?;
    let grid = Arc::new(Grid::clustered(HalfLine::Positive, 1.5 * end, cells, Clustering::Cosine)?);
    solve_scalar(theta, v, grid, opts)
}

/// Minimizes `1/2 I_{1/q}(nu) + 1/2 I_{1/r}(nu) + int V-hat dnu` in the variable `X = x^q`.
///
/// Pushing the result forward under `X -> X^(1/q)` recovers the direct minimizer for `theta = q/r`.
pub fn solve_transformed(q: u32, r: u32, vhat: &ExternalField, grid: Arc<Grid>, opts: &ScalarOptions) -> Result<ScalarSolution> {
    if q == 0 || r == 0 {
        return invalid("q and r must be positive");
    }
    solve_with(KernelPair::Transformed { q, r }, vhat, grid, opts)
}

/// Per-cell variational table recomputed from the measure alone.
#[derive(Clone, Debug, Serialize)]
pub struct VariationalReport {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub effective_potential: Vec<f64>,
    pub defect: Vec<f64>,
    pub ell: f64,
    pub max_equality_defect: f64,
    pub min_inequality_defect: f64,
}

/// Effective potential `U + U_theta + V` of a solution, cell by cell, and its defects.
pub fn scalar_variational_report(sol: &ScalarSolution, v: &ExternalField) -> VariationalReport {
    let m = &sol.measure;
    let cells = m.grid().cells();
    let (p1, p2) = sol.kernels.powers();
    let vavg = v.cell_averages(m.grid());
    let eff: Vec<f64> = cells
        .iter()
        .enumerate()
        .map(|(i, ci)| {
            let mut u = 0.0;
            for (cj, &w) in cells.iter().zip(m.masses()) {
                if w == 0.0 {
                    continue;
                }
                let base = avg_log_abs(*ci, *cj);
                let mut k = 0.0;
                for p in [p1, p2] {
                    k -= base + avg_log_power_ratio(*ci, *cj, p);
                }
                u += w * k;
            }
            u + vavg[i]
        })
        .collect();
    let floor = sol.weight_floor * m.total();
    let active: Vec<usize> = (0..cells.len()).filter(|&i| m.masses()[i] > floor).collect();
    let wsum: f64 = active.iter().map(|&i| m.masses()[i]).sum();
    let ell = active.iter().map(|&i| m.masses()[i] * eff[i]).sum::<f64>() / wsum;
    let defect: Vec<f64> = eff.iter().map(|e| e - ell).collect();
    let max_eq = active.iter().map(|&i| defect[i].abs()).fold(0.0, f64::max);
    let min_ineq = (0..cells.len())
        .filter(|i| !active.contains(i))
        .map(|i| defect[i])
        .fold(f64::INFINITY, f64::min);
    VariationalReport {
        nodes: m.grid().nodes().to_vec(),
        weights: m.masses().to_vec(),
        effective_potential: eff,
        defect,
        ell,
        max_equality_defect: max_eq,
        min_inequality_defect: if min_ineq.is_finite() { min_ineq } else { 0.0 },
    }
}

/// Density `(1/2pi) sqrt((4-x)/x)` on `[0, 4]`.
pub fn marchenko_pastur_density(x: f64) -> f64 {
    if x <= 0.0 || x >= 4.0 {
        0.0
    } else {
        ((4.0 - x) / x).sqrt() / (2.0 * std::f64::consts::PI)
    }
}

/// Distribution function of [`marchenko_pastur_density`].
pub fn marchenko_pastur_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 4.0 {
        1.0
    } else {
        let phi = (x / 4.0).sqrt().asin();
        (2.0 / std::f64::consts::PI) * (phi + phi.sin() * phi.cos())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{sup_cdf_distance, sup_cdf_distance_to};
    use crate::quad::de_integrate;

    fn grid(n: usize, r: f64) -> Arc<Grid> {
        Arc::new(Grid::clustered(HalfLine::Positive, r, n, Clustering::Cosine).unwrap())
    }

    #[test]
    fn mp_cdf_oracle() {
        // independent check of the closed-form CDF; x = t^2 removes the edge singularity
        for x in [0.1f64, 1.0, 2.5, 3.9] {
            let q = de_integrate(&|t: f64| 2.0 * t * marchenko_pastur_density(t * t), 0.0, x.sqrt(), 1e-13);
            assert!((q - marchenko_pastur_cdf(x)).abs() < 1e-10);
        }
        assert!((marchenko_pastur_cdf(4.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn linear_field_gives_mp() {
        let sol = solve_scalar(Theta::one(), &ExternalField::linear(), grid(200, 6.0), &ScalarOptions::default()).unwrap();
        assert!(sol.converged);
        assert!((sol.measure.total() - 1.0).abs() < 1e-12);
        let d = sup_cdf_distance_to(&sol.measure, marchenko_pastur_cdf);
        assert!(d < 1e-2, "cdf distance {d}");
        assert_eq!(sol.support.len(), 1);
        assert!(sol.support[0].1 < 4.2);
        assert!(!sol.truncation_warning);
        assert!(sol.history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let rep = scalar_variational_report(&sol, &ExternalField::linear());
        assert!(rep.max_equality_defect < 1e-6, "{}", rep.max_equality_defect);
        assert!(rep.min_inequality_defect > -1e-6);
    }

    #[test]
    fn unweighted_segment_has_flat_potential() {
        let sol = solve_scalar(Theta::one(), &ExternalField::zero(), grid(80, 1.0), &ScalarOptions::default()).unwrap();
        let rep = scalar_variational_report(&sol, &ExternalField::zero());
        assert!(rep.max_equality_defect < 1e-8);
        assert_eq!(sol.support.len(), 1);
        assert!(sol.truncation_warning);
    }

    #[test]
    fn stronger_field_shrinks_support() {
        let g = grid(150, 6.0);
        let a = solve_scalar(Theta::one(), &ExternalField::linear(), g.clone(), &ScalarOptions::default()).unwrap();
        let b = solve_scalar(Theta::one(), &ExternalField::monomial(2.0, 1.0), g, &ScalarOptions::default()).unwrap();
        assert!(b.support[0].1 < a.support[0].1);
    }

    #[test]
    fn initialization_does_not_matter() {
        let g = grid(120, 6.0);
        let a = solve_scalar(Theta::new(2, 1).unwrap(), &ExternalField::linear(), g.clone(), &ScalarOptions::default()).unwrap();
        let mut init = vec![0.0; g.len()];
        init[3] = 1.0;
        let opts = ScalarOptions { initial: Some(init), ..Default::default() };
        let b = solve_scalar(Theta::new(2, 1).unwrap(), &ExternalField::linear(), g, &opts).unwrap();
        assert!(sup_cdf_distance(&a.measure, &b.measure) < 1e-8);
    }

    #[test]
    fn transformed_with_q_one_matches_direct() {
        let g = grid(100, 8.0);
        let v = ExternalField::linear();
        let a = solve_scalar(Theta::new(1, 2).unwrap(), &v, g.clone(), &ScalarOptions::default()).unwrap();
        let b = solve_transformed(1, 2, &v, g, &ScalarOptions::default()).unwrap();
        assert!(sup_cdf_distance(&a.measure, &b.measure) < 1e-10);
    }
}
