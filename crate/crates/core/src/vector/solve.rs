use std::sync::Arc;

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::balayage::BalayageOperator;
use super::setup::{nikishin_setup, NikishinSetup, VectorGrids};
use super::verify::{verify_variational, VariationalSummary};
use crate::error::{invalid, Error, Result};
use crate::measure::kernel::{log_kernel_matrix, spherical_kernel_matrix};
use crate::measure::{DiscreteMeasure, ExternalField, Grid, HalfLine, VectorFamily};
use crate::qp::{simplex_qp, QpOptions};

#[derive(Clone, Debug)]
pub struct VectorOptions {
    /// Sup-norm CDF change per sweep below which iteration stops.
    pub tol_fixed: f64,
    /// Variational defect accepted at convergence, in potential units.
    pub tol_var: f64,
    pub max_sweeps: usize,
    pub qp: QpOptions,
}

impl Default for VectorOptions {
    fn default() -> Self {
        Self { tol_fixed: 1e-8, tol_var: 1e-3, max_sweeps: 400, qp: QpOptions::default() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRecord {
    pub sweep: usize,
    pub max_cdf_change: f64,
}

#[derive(Clone, Debug)]
pub struct EquilibriumSolution {
    pub q: u32,
    pub r: u32,
    pub family: VectorFamily,
    /// Constants `l_j` of the logarithmic variational conditions.
    pub ell: Vec<(i32, f64)>,
    pub report: VariationalSummary,
    pub sweeps: usize,
    pub converged: bool,
    pub history: Vec<SweepRecord>,
    pub truncation: Vec<(i32, f64)>,
    pub nominal_radii: Vec<(i32, f64)>,
    pub advisories: Vec<String>,
}

impl EquilibriumSolution {
    pub fn component(&self, j: i32) -> Option<&DiscreteMeasure> {
        self.family.get(j)
    }
    pub fn ell_of(&self, j: i32) -> f64 {
        self.ell.iter().find(|p| p.0 == j).map(|p| p.1).unwrap_or(0.0)
    }
}

fn check_grids(setup: &NikishinSetup, grids: &VectorGrids) -> Result<()> {
    if grids.first != setup.matrix.first() || grids.grids.len() != setup.matrix.dim() {
        return invalid(format!(
            "grids cover {}..{} but the problem needs {:?}",
            grids.first,
            grids.first + grids.grids.len() as i32 - 1,
            setup.indices()
        ));
    }
    for j in setup.indices() {
        if grids.get(j).unwrap().half_line() != HalfLine::of_index(j) {
            return invalid(format!("grid {j} is on the wrong half-line"));
        }
    }
    Ok(())
}

fn cdf_change(a: &[f64], b: &[f64]) -> f64 {
    let (mut ca, mut cb, mut best) = (0.0, 0.0, 0.0f64);
    for (x, y) in a.iter().zip(b) {
        ca += x;
        cb += y;
        best = best.max((ca - cb).abs());
    }
    best
}

/// Off-center indices in update order: outward from the center on each side.
fn sweep_order(setup: &NikishinSetup) -> Vec<i32> {
    let mut v: Vec<i32> = (1..=setup.matrix.last()).collect();
    v.extend((setup.matrix.first()..=-1).rev());
    v
}

struct Shared {
    setup: NikishinSetup,
    grids: Vec<Arc<Grid>>,
    /// `kernel[a][b]` maps masses of component `b` to cell potentials on grid `a`, for `|a - b| = 1`.
    cross: Vec<Vec<Option<DMatrix<f64>>>>,
}

impl Shared {
    fn new(setup: NikishinSetup, grids: &VectorGrids, spherical: bool) -> Self {
        let d = setup.matrix.dim();
        let gs: Vec<Arc<Grid>> = grids.grids.clone();
        let mut cross = vec![vec![None; d]; d];
        for a in 0..d {
            for b in 0..d {
                if a.abs_diff(b) == 1 {
                    cross[a][b] = Some(if spherical {
                        spherical_kernel_matrix(&gs[a], &gs[b])
                    } else {
                        log_kernel_matrix(&gs[a], &gs[b])
                    });
                }
            }
        }
        Self { setup, grids: gs, cross }
    }

    fn pos(&self, j: i32) -> usize {
        (j - self.setup.matrix.first()) as usize
    }

    /// Sum of neighbour potentials on the cells of component `j`.
    fn neighbour_potential(&self, j: i32, masses: &[Vec<f64>]) -> DVector<f64> {
        let a = self.pos(j);
        let mut u = DVector::zeros(self.grids[a].len());
        for k in [j - 1, j + 1] {
            if self.setup.matrix.contains(k) {
                let b = self.pos(k);
                u += self.cross[a][b].as_ref().unwrap() * DVector::from_column_slice(&masses[b]);
            }
        }
        u
    }

    fn family(&self, masses: &[Vec<f64>]) -> Result<VectorFamily> {
        let ms = self
            .grids
            .iter()
            .zip(masses)
            .map(|(g, m)| DiscreteMeasure::new(g.clone(), m.clone()))
            .collect::<Result<Vec<_>>>()?;
        VectorFamily::new(self.setup.matrix.first(), ms)
    }
}

fn finish(
    shared: &Shared,
    masses: Vec<Vec<f64>>,
    vhat: &ExternalField,
    grids: &VectorGrids,
    opts: &VectorOptions,
    sweeps: usize,
    history: Vec<SweepRecord>,
    settled: bool,
    mut advisories: Vec<String>,
) -> Result<EquilibriumSolution> {
    let family = shared.family(&masses)?;
    let report = verify_variational(&family, Some(vhat), opts.qp.weight_floor, opts.tol_var);
    let ell = report.components.iter().map(|c| (c.index, c.ell)).collect();
    let worst = report.worst_defect();
    let converged = settled && worst < opts.tol_var;
    if settled && !converged {
        warn!("iteration settled but the variational defect is {worst:e}");
    }
    let g0 = &shared.grids[shared.pos(0)];
    let last = *masses[shared.pos(0)].last().unwrap();
    if last > opts.qp.weight_floor {
        let msg = format!("center component reaches the truncation radius {}; enlarge it", g0.truncation());
        warn!("{msg}");
        advisories.push(msg);
    }
    let idx = shared.setup.indices();
    Ok(EquilibriumSolution {
        q: shared.setup.q,
        r: shared.setup.r,
        family,
        ell,
        report,
        sweeps,
        converged,
        history,
        truncation: idx.clone().map(|j| (j, shared.grids[shared.pos(j)].truncation())).collect(),
        nominal_radii: idx.map(|j| (j, grids.nominal_radius(j))).collect(),
        advisories,
    })
}

/// Gauss-Seidel on the variational conditions: a scalar solve for the center component,
/// then `nu_j = 1/2 Bal(nu_{j-1} + nu_{j+1})` on each off-center half-line.
pub fn solve_vector(
    q: u32,
    r: u32,
    vhat: &ExternalField,
    grids: &VectorGrids,
    opts: &VectorOptions,
) -> Result<EquilibriumSolution> {
    let setup = nikishin_setup(q, r)?;
    check_grids(&setup, grids)?;
    let shared = Shared::new(setup.clone(), grids, false);
    let p0 = shared.pos(0);
    let g0 = shared.grids[p0].clone();
    let h0 = log_kernel_matrix(&g0, &g0) * 2.0;
    let v0 = DVector::from_vec(vhat.cell_averages(&g0));
    if v0.iter().any(|x| !x.is_finite()) {
        return invalid("external field is not finite on the center grid");
    }
    let order = sweep_order(&setup);
    let mut ops: Vec<Option<BalayageOperator>> = Vec::new();
    for j in setup.indices() {
        ops.push(if j == 0 { None } else { Some(BalayageOperator::new(shared.grids[shared.pos(j)].clone())?) });
    }
    let mut masses: Vec<Vec<f64>> = shared.grids.iter().map(|g| vec![0.0; g.len()]).collect();
    let mut history = Vec::new();
    let mut settled = false;
    let mut sweeps = 0;
    let mut advisories = Vec::new();
    let mut clamped_total = 0usize;
    for s in 0..opts.max_sweeps {
        sweeps = s + 1;
        let old = masses.clone();
        let b = &v0 - shared.neighbour_potential(0, &masses);
        let init = if s == 0 { None } else { Some(masses[p0].as_slice()) };
        let qp = simplex_qp(&h0, b.as_slice(), 1.0, init, &opts.qp);
        masses[p0] = qp.x;
        for &j in &order {
            let u = shared.neighbour_potential(j, &masses) * 0.5;
            let out = ops[shared.pos(j)].as_ref().unwrap().solve(u.as_slice(), setup.mass(j))?;
            clamped_total += out.clamped;
            masses[shared.pos(j)] = out.measure.masses().to_vec();
        }
        let change = old.iter().zip(&masses).map(|(a, b)| cdf_change(a, b)).fold(0.0, f64::max);
        debug!("sweep {sweeps}: cdf change {change:e}");
        history.push(SweepRecord { sweep: sweeps, max_cdf_change: change });
        if !change.is_finite() {
            return Err(Error::Numerical("iteration diverged".into()));
        }
        if change < opts.tol_fixed {
            settled = true;
            break;
        }
    }
    if clamped_total > 0 {
        advisories.push(format!("{clamped_total} negative off-center cells were clamped over the run"));
    }
    if !settled {
        warn!("fixed-point iteration stopped after {sweeps} sweeps");
    }
    finish(&shared, masses, vhat, grids, opts, sweeps, history, settled, advisories)
}

/// Exact minimizer of one block: the all-free KKT system first, the simplex QP if signs fail.
struct Block {
    h: DMatrix<f64>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl Block {
    fn new(h: DMatrix<f64>) -> Self {
        let n = h.nrows();
        let mut a = DMatrix::zeros(n + 1, n + 1);
        a.view_mut((0, 0), (n, n)).copy_from(&h);
        for i in 0..n {
            a[(i, n)] = 1.0;
            a[(n, i)] = 1.0;
        }
        Self { h, lu: a.lu() }
    }

    fn minimize(&self, b: &DVector<f64>, mass: f64, x0: &[f64], opts: &QpOptions) -> Vec<f64> {
        let n = b.len();
        let mut rhs = DVector::zeros(n + 1);
        for i in 0..n {
            rhs[i] = -b[i];
        }
        rhs[n] = mass;
        if let Some(sol) = self.lu.solve(&rhs) {
            let x: Vec<f64> = sol.iter().take(n).copied().collect();
            if x.iter().all(|&v| v > 0.0) {
                return x;
            }
        }
        simplex_qp(&self.h, b.as_slice(), mass, Some(x0), opts).x
    }
}

/// Block-coordinate minimization of the spherical functional, one component at a time.
///
/// Independent of [`solve_vector`]: it never forms a balayage and works with the
/// spherical kernel and the shifted fields throughout.
pub fn direct_minimize_vector(
    q: u32,
    r: u32,
    vhat: &ExternalField,
    grids: &VectorGrids,
    opts: &VectorOptions,
) -> Result<EquilibriumSolution> {
    let setup = nikishin_setup(q, r)?;
    check_grids(&setup, grids)?;
    let shared = Shared::new(setup.clone(), grids, true);
    let row_sums = setup.row_sums();
    let mut blocks = Vec::new();
    let mut fields = Vec::new();
    for j in setup.indices() {
        let g = &shared.grids[shared.pos(j)];
        let s = spherical_kernel_matrix(g, g) * 2.0;
        blocks.push(if j == 0 { None } else { Some(Block::new(s.clone())) });
        let shift = row_sums.iter().find(|p| p.0 == j).map(|p| *p.1.numer() as f64 / *p.1.denom() as f64).unwrap();
        let base = if j == 0 { vhat.clone() } else { ExternalField::zero() };
        fields.push((s, DVector::from_vec(base.spherically_shifted(shift).cell_averages(g))));
    }
    if fields[shared.pos(0)].1.iter().any(|x| !x.is_finite()) {
        return invalid("external field is not finite on the center grid");
    }
    let mut masses: Vec<Vec<f64>> = setup
        .indices()
        .map(|j| DiscreteMeasure::uniform(shared.grids[shared.pos(j)].clone(), setup.mass(j)).masses().to_vec())
        .collect();
    let mut order = vec![0];
    order.extend(sweep_order(&setup));
    let mut history = Vec::new();
    let mut settled = false;
    let mut sweeps = 0;
    for s in 0..opts.max_sweeps {
        sweeps = s + 1;
        let old = masses.clone();
        for &j in &order {
            let p = shared.pos(j);
            // gradient of sum_ik c_ik I(nu_i, nu_k) in block j: 2 S_jj nu_j - S_j,j-1 nu_j-1 - S_j,j+1 nu_j+1
            let b = &fields[p].1 - shared.neighbour_potential(j, &masses);
            masses[p] = match &blocks[p] {
                Some(block) => block.minimize(&b, setup.mass(j), &masses[p], &opts.qp),
                None => simplex_qp(&fields[p].0, b.as_slice(), setup.mass(j), Some(&masses[p]), &opts.qp).x,
            };
        }
        let change = old.iter().zip(&masses).map(|(a, b)| cdf_change(a, b)).fold(0.0, f64::max);
        debug!("block sweep {sweeps}: cdf change {change:e}");
        history.push(SweepRecord { sweep: sweeps, max_cdf_change: change });
        if !change.is_finite() {
            return Err(Error::Numerical("block iteration diverged".into()));
        }
        if change < opts.tol_fixed {
            settled = true;
            break;
        }
    }
    finish(&shared, masses, vhat, grids, opts, sweeps, history, settled, Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::sup_cdf_distance;
    use crate::scalar::{solve_scalar, solve_transformed, ScalarOptions};
    use crate::theta::Theta;
    use crate::vector::{default_grids, VectorGridSpec};

    fn coarse() -> VectorGridSpec {
        VectorGridSpec { center_cells: 120, per_decade: 8.0, band_per_decade: 20.0, ..Default::default() }
    }

    #[test]
    fn one_one_is_the_scalar_problem() {
        let v = ExternalField::linear();
        let spec = VectorGridSpec { center_radius: Some(6.0), ..coarse() };
        let grids = default_grids(1, 1, &v, &spec).unwrap();
        assert_eq!(grids.grids.len(), 1);
        let sol = solve_vector(1, 1, &v, &grids, &VectorOptions::default()).unwrap();
        assert!(sol.converged);
        let s = solve_scalar(Theta::one(), &v, grids.get(0).unwrap().clone(), &ScalarOptions::default()).unwrap();
        assert!(sup_cdf_distance(&s.measure, sol.component(0).unwrap()) < 1e-6);
    }

    #[test]
    fn one_two_matches_transformed_and_direct() {
        let v = ExternalField::linear();
        let grids = default_grids(1, 2, &v, &coarse()).unwrap();
        let opts = VectorOptions::default();
        let sol = solve_vector(1, 2, &v, &grids, &opts).unwrap();
        assert!(sol.converged, "{:?}", sol.history.last());
        assert!(sol.advisories.is_empty(), "{:?}", sol.advisories);
        let c1 = sol.report.get(1).unwrap();
        assert!(c1.ell.abs() < 1e-3);
        assert_eq!(c1.charged_cells, c1.cells);
        let st = solve_transformed(1, 2, &v, grids.get(0).unwrap().clone(), &ScalarOptions::default()).unwrap();
        assert!(sup_cdf_distance(&st.measure, sol.component(0).unwrap()) < 2e-2);
        let d = direct_minimize_vector(1, 2, &v, &grids, &opts).unwrap();
        for j in 0..=1 {
            assert!(sup_cdf_distance(d.component(j).unwrap(), sol.component(j).unwrap()) < 5.0 * opts.tol_var);
            assert!((d.component(j).unwrap().total() - sol.component(j).unwrap().total()).abs() < 1e-12);
        }
    }

    #[test]
    fn masses_balance_across_neighbours() {
        let v = ExternalField::linear().transformed(2);
        let grids = default_grids(2, 3, &v, &coarse()).unwrap();
        let sol = solve_vector(2, 3, &v, &grids, &VectorOptions::default()).unwrap();
        assert!(sol.converged);
        let m = |j: i32| sol.component(j).map(|m| m.total()).unwrap_or(0.0);
        for j in [-1, 1, 2] {
            assert!((2.0 * m(j) - m(j - 1) - m(j + 1)).abs() < 1e-12, "j = {j}");
        }
        for j in [-1, 1, 2] {
            assert!(sol.ell_of(j).abs() < 1e-3);
        }
    }

    #[test]
    fn zero_family_has_no_defect() {
        let g = Arc::new(Grid::uniform(HalfLine::Positive, 1.0, 5).unwrap());
        let h = Arc::new(Grid::uniform(HalfLine::Negative, 1.0, 5).unwrap());
        let fam = VectorFamily::new(0, vec![DiscreteMeasure::zero(g), DiscreteMeasure::zero(h)]).unwrap();
        let rep = verify_variational(&fam, Some(&ExternalField::zero()), 1e-10, 1e-3);
        assert_eq!(rep.worst_defect(), 0.0);
        assert!(rep.certified);
    }

    #[test]
    fn rejects_mismatched_grids() {
        let v = ExternalField::linear();
        let grids = default_grids(1, 2, &v, &coarse()).unwrap();
        assert!(solve_vector(1, 3, &v, &grids, &VectorOptions::default()).is_err());
    }
}
