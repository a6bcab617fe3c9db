use super::field::ExternalField;
use super::kernel::{avg_log_abs, avg_log_power_ratio, sphere_averages};
use super::{DiscreteMeasure, InteractionMatrix, VectorFamily};
use crate::error::{Error, Result};
use crate::theta::Theta;

/// Mutual logarithmic energy with cell-exact kernel averages.
pub fn mutual_energy(a: &DiscreteMeasure, b: &DiscreteMeasure) -> f64 {
    let mut acc = 0.0;
    for (ca, &wa) in a.grid().cells().iter().zip(a.masses()) {
        if wa == 0.0 {
            continue;
        }
        let mut row = 0.0;
        for (cb, &wb) in b.grid().cells().iter().zip(b.masses()) {
            if wb != 0.0 {
                row -= wb * avg_log_abs(*ca, *cb);
            }
        }
        acc += wa * row;
    }
    acc
}

pub fn energy(m: &DiscreteMeasure) -> f64 {
    mutual_energy(m, m)
}

fn sphere_moment(m: &DiscreteMeasure) -> f64 {
    m.masses().iter().zip(sphere_averages(m.grid())).map(|(w, s)| w * s).sum()
}

/// Mutual energy for the kernel `log(sqrt(1+x^2) sqrt(1+y^2)/|x-y|)`.
pub fn spherical_mutual_energy(a: &DiscreteMeasure, b: &DiscreteMeasure) -> f64 {
    mutual_energy(a, b) + b.total() * sphere_moment(a) + a.total() * sphere_moment(b)
}

/// Energy for the kernel `log(1/|x^p - y^p|)` on `[0, inf)`.
pub fn power_energy(m: &DiscreteMeasure, p: f64) -> f64 {
    let cells = m.grid().cells();
    let w = m.masses();
    let mut acc = 0.0;
    for i in 0..cells.len() {
        if w[i] == 0.0 {
            continue;
        }
        for j in 0..cells.len() {
            if w[j] != 0.0 {
                acc -= w[i] * w[j] * (avg_log_abs(cells[i], cells[j]) + avg_log_power_ratio(cells[i], cells[j], p));
            }
        }
    }
    acc
}

fn field_integral(m: &DiscreteMeasure, v: &ExternalField) -> f64 {
    m.masses().iter().zip(v.cell_averages(m.grid())).map(|(w, f)| w * f).sum()
}

/// Which scalar functional to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalarForm {
    /// `1/2 I + 1/2 I_theta + int V`
    Direct,
    /// `1/2 I_{1/q} + 1/2 I_{1/r} + int V-hat` in the variable `x^q`
    Transformed,
}

pub fn scalar_functional(m: &DiscreteMeasure, theta: Theta, v: &ExternalField, form: ScalarForm) -> Result<f64> {
    if m.grid().cells().iter().any(|c| c.lo < 0.0) {
        return Err(Error::Contract("scalar functional needs a measure on [0, inf)".into()));
    }
    let e = match form {
        ScalarForm::Direct => 0.5 * energy(m) + 0.5 * power_energy(m, theta.value()),
        ScalarForm::Transformed => {
            0.5 * power_energy(m, 1.0 / theta.q as f64) + 0.5 * power_energy(m, 1.0 / theta.r as f64)
        }
    };
    Ok(e + field_integral(m, v))
}

fn check_range(fam: &VectorFamily, c: &InteractionMatrix) -> Result<()> {
    if fam.first() != c.first() || fam.len() != c.dim() {
        return Err(Error::Contract(format!(
            "family indices {:?} do not match interaction indices {:?}",
            fam.indices(),
            c.indices()
        )));
    }
    Ok(())
}

/// `sum_ij c_ij I(mu_i, mu_j) + sum_i int V_i dmu_i`; indices without a field get `V_i = 0`.
pub fn vector_functional(fam: &VectorFamily, c: &InteractionMatrix, fields: &[(i32, ExternalField)]) -> Result<f64> {
    check_range(fam, c)?;
    let mut acc = 0.0;
    for i in fam.indices() {
        for j in fam.indices() {
            let cij = c.entry(i, j);
            if cij != 0.0 {
                acc += cij * mutual_energy(fam.get(i).unwrap(), fam.get(j).unwrap());
            }
        }
    }
    for (j, v) in fields {
        let m = fam.get(*j).ok_or_else(|| Error::Contract(format!("no component {j}")))?;
        acc += field_integral(m, v);
    }
    Ok(acc)
}

/// Spherical-kernel functional with shifted fields; `+inf` if a self energy is not finite.
pub fn spherical_vector_functional(
    fam: &VectorFamily,
    c: &InteractionMatrix,
    fields: &[(i32, ExternalField)],
) -> Result<f64> {
    check_range(fam, c)?;
    let mut acc = 0.0;
    for i in fam.indices() {
        let mi = fam.get(i).unwrap();
        let self_e = spherical_mutual_energy(mi, mi);
        if !self_e.is_finite() {
            return Ok(f64::INFINITY);
        }
        for j in fam.indices() {
            let cij = c.entry(i, j);
            if cij != 0.0 {
                let e = if i == j { self_e } else { spherical_mutual_energy(mi, fam.get(j).unwrap()) };
                acc += cij * e;
            }
        }
    }
    for i in fam.indices() {
        let shift: f64 = fam.indices().map(|j| c.entry(i, j) * fam.get(j).unwrap().total()).sum();
        let base = fields.iter().find(|(j, _)| *j == i).map(|(_, v)| v.clone()).unwrap_or_else(ExternalField::zero);
        acc += field_integral(fam.get(i).unwrap(), &base.spherically_shifted(shift));
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{Clustering, Grid, HalfLine};
    use std::sync::Arc;

    fn uniform01(n: usize) -> DiscreteMeasure {
        DiscreteMeasure::uniform(Arc::new(Grid::uniform(HalfLine::Positive, 1.0, n).unwrap()), 1.0)
    }

    fn tiny_cell(x: f64) -> DiscreteMeasure {
        DiscreteMeasure::new(Arc::new(Grid::point(x, 1e-9).unwrap()), vec![1.0]).unwrap()
    }

    fn atom(x: f64) -> DiscreteMeasure {
        DiscreteMeasure::new(Arc::new(Grid::atoms(HalfLine::Positive, &[x]).unwrap()), vec![1.0]).unwrap()
    }

    #[test]
    fn uniform_energy_is_three_halves() {
        for n in [1, 7, 200] {
            assert!((energy(&uniform01(n)) - 1.5).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn point_like_masses() {
        assert!(mutual_energy(&tiny_cell(0.0), &tiny_cell(1.0)).abs() < 1e-9);
        assert!((spherical_mutual_energy(&atom(0.0), &atom(1.0)) - 2f64.sqrt().ln()).abs() < 1e-15);
        assert!(energy(&atom(1.0)).is_infinite());
    }

    #[test]
    fn spherical_identity_and_symmetry() {
        let a = DiscreteMeasure::from_density(
            Arc::new(Grid::clustered(HalfLine::Positive, 3.0, 40, Clustering::Cosine).unwrap()),
            |x| x * (3.0 - x),
        )
        .unwrap();
        let b = DiscreteMeasure::from_density(Arc::new(Grid::uniform(HalfLine::Negative, 5.0, 33).unwrap()), |x| {
            (-x).sqrt()
        })
        .unwrap();
        let lhs = spherical_mutual_energy(&a, &b);
        let rhs = mutual_energy(&a, &b) + b.total() * sphere_moment(&a) + a.total() * sphere_moment(&b);
        assert!((lhs - rhs).abs() < 1e-10);
        assert!((mutual_energy(&a, &b) - mutual_energy(&b, &a)).abs() < 1e-12 * (1.0 + lhs.abs()));
        assert!((spherical_mutual_energy(&a, &b) - spherical_mutual_energy(&b, &a)).abs() < 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn refinement_order_on_smooth_density() {
        // I of the density 2x on [0, 1]; error should fall like h^2 under halving
        let f = |n: usize| {
            let g = Arc::new(Grid::uniform(HalfLine::Positive, 1.0, n).unwrap());
            energy(&DiscreteMeasure::from_density(g, |x| 2.0 * x).unwrap())
        };
        let (a, b, c) = (f(20), f(40), f(80));
        let ratio = (a - b) / (b - c);
        assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
    }

    #[test]
    fn theta_one_reduces_to_usual_energy() {
        let g = Arc::new(Grid::clustered(HalfLine::Positive, 4.0, 60, Clustering::Cosine).unwrap());
        let m = DiscreteMeasure::from_density(g, |x| (4.0 - x).max(0.0).sqrt()).unwrap();
        let m = m.scaled(1.0 / m.total()).unwrap();
        let v = ExternalField::linear();
        let f = scalar_functional(&m, Theta::one(), &v, ScalarForm::Direct).unwrap();
        let want = energy(&m) + m.masses().iter().zip(m.grid().nodes()).map(|(w, x)| w * x).sum::<f64>();
        assert!((f - want).abs() < 1e-12);
    }

    #[test]
    fn vector_functional_degenerate_cases() {
        let g = Arc::new(Grid::uniform(HalfLine::Positive, 2.0, 10).unwrap());
        let m = DiscreteMeasure::from_density(g.clone(), |x| 1.0 + x).unwrap();
        let fam = VectorFamily::new(0, vec![m.clone()]).unwrap();
        let c = InteractionMatrix::new(0, 1);
        let v = ExternalField::linear();
        let j = vector_functional(&fam, &c, &[(0, v.clone())]).unwrap();
        let want = energy(&m) + m.masses().iter().zip(v.cell_averages(m.grid())).map(|(a, b)| a * b).sum::<f64>();
        assert!((j - want).abs() < 1e-12);
        let zero = VectorFamily::new(0, vec![DiscreteMeasure::zero(g)]).unwrap();
        assert_eq!(vector_functional(&zero, &c, &[]).unwrap(), 0.0);
        assert!(vector_functional(&fam, &InteractionMatrix::new(0, 2), &[]).is_err());
    }

    #[test]
    fn extension_property_on_compact_family() {
        let g0 = Arc::new(Grid::uniform(HalfLine::Positive, 2.0, 30).unwrap());
        let g1 = Arc::new(Grid::uniform(HalfLine::Negative, 3.0, 30).unwrap());
        let m0 = DiscreteMeasure::from_density(g0, |x| 0.5 + 0.1 * x).unwrap();
        let m0 = m0.scaled(1.0 / m0.total()).unwrap();
        let m1 = DiscreteMeasure::from_density(g1, |x| 1.0 - x).unwrap();
        let m1 = m1.scaled(0.5 / m1.total()).unwrap();
        let fam = VectorFamily::new(0, vec![m0, m1]).unwrap();
        let c = InteractionMatrix::nikishin(1, 2);
        let fields = [(0, ExternalField::linear())];
        let j = vector_functional(&fam, &c, &fields).unwrap();
        let jt = spherical_vector_functional(&fam, &c, &fields).unwrap();
        assert!((j - jt).abs() < 1e-8, "{j} {jt}");
    }
}
