use serde::Serialize;

use crate::measure::potential::{cell_potentials, cell_spherical_potentials};
use crate::measure::{DiscreteMeasure, ExternalField, InteractionMatrix, VectorFamily};

/// Variational defects of one component in logarithmic and spherical form.
#[derive(Clone, Debug, Serialize)]
pub struct ComponentDefect {
    pub index: i32,
    pub ell: f64,
    /// `max |E - ell|` over charged cells, `E` the effective potential.
    pub max_equality_defect: f64,
    /// `min (E - ell)` over uncharged cells; 0 when every cell is charged.
    pub min_inequality_defect: f64,
    /// `max |E|` over charged cells: the defect when `ell` is forced to 0.
    pub max_abs_effective: f64,
    pub spherical_ell: f64,
    pub spherical_max_equality_defect: f64,
    pub spherical_min_inequality_defect: f64,
    pub charged_cells: usize,
    pub cells: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct VariationalSummary {
    pub components: Vec<ComponentDefect>,
    /// Every condition holds within the tolerance.
    pub certified: bool,
}

impl VariationalSummary {
    /// Largest equality defect or inequality violation over all components.
    pub fn worst_defect(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.max_equality_defect.max(-c.min_inequality_defect))
            .fold(0.0, f64::max)
    }

    pub fn get(&self, j: i32) -> Option<&ComponentDefect> {
        self.components.iter().find(|c| c.index == j)
    }

    /// Worst defect over off-center components only.
    pub fn worst_off_center(&self) -> f64 {
        self.components
            .iter()
            .filter(|c| c.index != 0)
            .map(|c| c.max_equality_defect.max(-c.min_inequality_defect))
            .fold(0.0, f64::max)
    }
}

struct Stats {
    ell: f64,
    eq: f64,
    ineq: f64,
    abs: f64,
    charged: usize,
}

fn stats(m: &DiscreteMeasure, eff: &[f64], floor: f64) -> Stats {
    let thr = floor * m.total();
    let charged: Vec<usize> = (0..eff.len()).filter(|&i| m.masses()[i] > thr && m.total() > 0.0).collect();
    let w: f64 = charged.iter().map(|&i| m.masses()[i]).sum();
    let ell = if w > 0.0 { charged.iter().map(|&i| m.masses()[i] * eff[i]).sum::<f64>() / w } else { 0.0 };
    let eq = charged.iter().map(|&i| (eff[i] - ell).abs()).fold(0.0, f64::max);
    let abs = charged.iter().map(|&i| eff[i].abs()).fold(0.0, f64::max);
    let ineq = (0..eff.len())
        .filter(|i| !charged.contains(i))
        .map(|i| eff[i] - ell)
        .fold(f64::INFINITY, f64::min);
    Stats { ell, eq, abs, ineq: if ineq.is_finite() { ineq.min(0.0) } else { 0.0 }, charged: charged.len() }
}

/// Evaluates the variational conditions of a Nikishin family in both kernel forms.
///
/// The field acts on component 0 only. A component on an atomic grid (a point
/// mass used as a fixed source) is not tested.
pub fn verify_variational(fam: &VectorFamily, vhat: Option<&ExternalField>, floor: f64, tol: f64) -> VariationalSummary {
    let c = InteractionMatrix::new(fam.first(), fam.len());
    let mut comps = Vec::new();
    for j in fam.indices() {
        let m = fam.get(j).unwrap();
        if m.grid().is_atomic() {
            continue;
        }
        let g = m.grid();
        let mut eff: Vec<f64> = cell_potentials(m, g).into_iter().map(|u| 2.0 * u).collect();
        let mut sph: Vec<f64> = cell_spherical_potentials(m, g).into_iter().map(|u| 2.0 * u).collect();
        for k in [j - 1, j + 1] {
            if let Some(n) = fam.get(k) {
                for (e, u) in eff.iter_mut().zip(cell_potentials(n, g)) {
                    *e -= u;
                }
                for (e, u) in sph.iter_mut().zip(cell_spherical_potentials(n, g)) {
                    *e -= u;
                }
            }
        }
        let shift: f64 = fam.indices().map(|k| c.entry(j, k) * fam.get(k).unwrap().total()).sum();
        let base = match (j, vhat) {
            (0, Some(v)) => v.clone(),
            _ => ExternalField::zero(),
        };
        for (e, v) in eff.iter_mut().zip(base.cell_averages(g)) {
            *e += v;
        }
        for (e, v) in sph.iter_mut().zip(base.spherically_shifted(shift).cell_averages(g)) {
            *e += v;
        }
        let a = stats(m, &eff, floor);
        let b = stats(m, &sph, floor);
        comps.push(ComponentDefect {
            index: j,
            ell: a.ell,
            max_equality_defect: a.eq,
            min_inequality_defect: a.ineq,
            max_abs_effective: a.abs,
            spherical_ell: b.ell,
            spherical_max_equality_defect: b.eq,
            spherical_min_inequality_defect: b.ineq,
            charged_cells: a.charged,
            cells: g.len(),
        });
    }
    let mut out = VariationalSummary { components: comps, certified: false };
    out.certified = out.worst_defect() < tol;
    out
}
