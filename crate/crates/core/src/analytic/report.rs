use num_complex::Complex64;
use serde::Serialize;

use super::family::AnalyticFamily;
use super::psi::{SheetedPsi, Side};
use crate::error::Result;
use crate::measure::HalfLine;

/// Identity checks for the point-mass family of `(r, a)`.
#[derive(Clone, Debug, Serialize)]
pub struct AnalyticReport {
    pub r: u32,
    pub a: f64,
    /// `(j, quadrature mass, 1 - j/r)`.
    pub masses: Vec<(u32, f64, f64)>,
    pub max_mass_defect: f64,
    pub balayage_points: usize,
    pub max_balayage_defect: f64,
    pub closed_form_points: usize,
    pub max_closed_form_defect: f64,
    pub boundary_points: usize,
    pub max_boundary_defect: f64,
    pub min_density: f64,
    pub energy_lhs: f64,
    pub energy_rhs: f64,
    pub energy_rhs_closed: f64,
    pub energy_defect: f64,
    pub residue_defect: f64,
    pub tail_exponent: f64,
    pub tail_exponent_expected: f64,
}

/// Sample points `a 10^e` on `Delta_j` for `e` stepping through `[-4, 4]`.
fn support_points(j: u32, a: f64) -> Vec<f64> {
    let sg = HalfLine::of_index(j as i32).sign();
    (0..=16).map(|k| sg * a * 10f64.powf(-4.0 + 0.5 * k as f64 + 0.013)).collect()
}

/// Off-support points for `mu_1`: positive reals and points in the upper half-plane.
pub fn closed_form_points(a: f64, n: usize) -> Vec<Complex64> {
    let half = n / 2;
    let mut pts: Vec<Complex64> = (0..half)
        .map(|k| Complex64::new(a * 10f64.powf(-3.0 + 6.0 * k as f64 / (half - 1).max(1) as f64 + 0.017), 0.0))
        .collect();
    let rest = n - half;
    pts.extend((0..rest).map(|k| {
        let rad = a * 10f64.powf(-2.0 + 4.0 * k as f64 / (rest - 1).max(1) as f64);
        Complex64::from_polar(rad, std::f64::consts::PI * (k as f64 + 0.5) / rest as f64)
    }));
    pts
}

/// `sum I(mu_j) - sum I(mu_j, mu_{j+1})` and `1/2 int log(1/|x-a|) dmu_1`, with their difference.
pub fn energy_identity_check(r: u32, a: f64) -> Result<(f64, f64, f64)> {
    let f = AnalyticFamily::point_mass(r, a)?;
    Ok(energy_sides(&f))
}

fn energy_sides(f: &AnalyticFamily) -> (f64, f64, f64) {
    let r = f.r();
    let lhs = (1..r).map(|j| f.energy(j)).sum::<f64>() - (1..r - 1).map(|j| f.mutual_energy(j, j + 1)).sum::<f64>();
    let rhs = 0.5 * f.mutual_energy(0, 1);
    (lhs, rhs, (lhs - rhs).abs())
}

/// Least-squares slope of `log|Psi_1(z) - 1/(r z)|` against `log z` for `z` in `[1e3, 1e6]`.
pub fn tail_exponent(p: &SheetedPsi) -> f64 {
    let r = p.r() as f64;
    let pts: Vec<(f64, f64)> = (0..=30)
        .map(|k| {
            let z = 10f64.powf(3.0 + 0.1 * k as f64);
            let d = p.eval(1, Complex64::new(z, 0.0), None).unwrap() - 1.0 / (r * z);
            (z.ln(), d.norm().ln())
        })
        .collect();
    slope(&pts)
}

pub(crate) fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Runs every point-mass identity for `(r, a)`.
pub fn analytic_check(r: u32, a: f64) -> Result<AnalyticReport> {
    let psi = SheetedPsi::new(r, a)?;
    let f = AnalyticFamily::point_mass(r, a)?;
    let rf = r as f64;
    let masses: Vec<(u32, f64, f64)> = (1..r).map(|j| (j, f.mass(j), 1.0 - j as f64 / rf)).collect();
    let max_mass_defect = masses.iter().map(|m| (m.1 - m.2).abs()).fold(0.0, f64::max);
    let (mut nb, mut bal, mut nbd, mut bd, mut min_density) = (0, 0.0f64, 0, 0.0f64, f64::INFINITY);
    for j in 1..r {
        for x in support_points(j, a) {
            nb += 1;
            bal = bal.max(f.balayage_defect(j, x).abs());
            min_density = min_density.min(f.density(j, x));
            let z = Complex64::new(x, 0.0);
            let p = f.cauchy(j, z, Some(Side::Upper))?;
            let m = f.cauchy(j, z, Some(Side::Lower))?;
            let rhs = f.cauchy(j - 1, z, None)? + f.cauchy(j + 1, z, None)?;
            nbd += 1;
            bd = bd.max((p + m - rhs).norm());
        }
    }
    let pts = closed_form_points(a, 50);
    let cf = pts
        .iter()
        .map(|&z| (f.potential(1, z) - f.u_mu1_closed_form(z)).abs())
        .fold(0.0, f64::max);
    let (lhs, rhs, defect) = energy_sides(&f);
    Ok(AnalyticReport {
        r,
        a,
        masses,
        max_mass_defect,
        balayage_points: nb,
        max_balayage_defect: bal,
        closed_form_points: pts.len(),
        max_closed_form_defect: cf,
        boundary_points: nbd,
        max_boundary_defect: bd,
        min_density,
        energy_lhs: lhs,
        energy_rhs: rhs,
        energy_rhs_closed: 0.5 * f.u_mu1_closed_form(Complex64::new(a, 0.0)),
        energy_defect: defect,
        residue_defect: (psi.residue_at_a(1e-3, 32) - 1.0).norm(),
        tail_exponent: tail_exponent(&psi),
        tail_exponent_expected: -1.0 - 1.0 / rf,
    })
}
