use num_complex::Complex64;

use super::rational::Rational;
use crate::error::{invalid, Error, Result};
use crate::measure::{cauchy_transform, DiscreteMeasure};
use crate::scalar::ScalarSolution;
use crate::vector::EquilibriumSolution;

// cells below this fraction of the total mass do not count as support
const SUPPORT_FLOOR: f64 = 1e-14;

fn distance_to(z: Complex64, iv: (f64, f64)) -> f64 {
    let x = z.re.clamp(iv.0, iv.1);
    (z - x).norm()
}

/// Sheet values `(V' - F_0, F_0 - F_1, ..., F_{r-1} - F_r)` with `F_r = 0`.
///
/// `components` holds `mu_0, ..., mu_{r-1}`. Points closer than `delta` to any
/// support are rejected.
pub fn sheet_values_of(components: &[&DiscreteMeasure], vprime: &Rational, z: Complex64, delta: f64) -> Result<Vec<Complex64>> {
    if components.is_empty() {
        return invalid("no components");
    }
    for (j, m) in components.iter().enumerate() {
        for iv in m.support_intervals(SUPPORT_FLOOR) {
            if distance_to(z, iv) < delta {
                return invalid(format!("z = {z} is within {delta} of the support of component {j}"));
            }
        }
    }
    let f: Vec<Complex64> = components.iter().map(|m| cauchy_transform(m, z)).collect();
    let mut out = Vec::with_capacity(f.len() + 1);
    out.push(vprime.eval(z)? - f[0]);
    for j in 0..f.len() {
        let next = f.get(j + 1).copied().unwrap_or_default();
        out.push(f[j] - next);
    }
    Ok(out)
}

/// Components `mu_0 = mu*` from the scalar solution and `mu_1..mu_{r-1}` from the vector one.
pub fn curve_components<'a>(scalar: &'a ScalarSolution, vector: Option<&'a EquilibriumSolution>) -> Result<Vec<&'a DiscreteMeasure>> {
    let mut out = vec![&scalar.measure];
    if let Some(v) = vector {
        if v.q != 1 {
            return invalid("the curve needs theta = 1/r");
        }
        for j in 1..v.r as i32 {
            out.push(v.component(j).ok_or_else(|| Error::Contract(format!("component {j} missing")))?);
        }
    }
    Ok(out)
}

/// [`sheet_values_of`] for a scalar solution and (for `r >= 2`) the matching vector solution.
pub fn sheet_values(
    scalar: &ScalarSolution,
    vector: Option<&EquilibriumSolution>,
    vprime: &Rational,
    z: Complex64,
    delta: f64,
) -> Result<Vec<Complex64>> {
    sheet_values_of(&curve_components(scalar, vector)?, vprime, z, delta)
}

/// Points for fitting and for holdout, on circles around the support and on a
/// vertical line, keeping `|Im z| >= delta`. Conjugates are included.
pub fn curve_samples(b: f64, delta: f64) -> (Vec<Complex64>, Vec<Complex64>) {
    let c = 0.5 * b;
    let ring = |radii: &[f64], n: usize, phase: f64| {
        let mut v = Vec::new();
        for &rho in radii {
            for k in 0..n {
                let t = std::f64::consts::PI * (k as f64 + phase) / n as f64;
                let z = Complex64::new(c, 0.0) + Complex64::from_polar(rho * b, t);
                if z.im >= delta {
                    v.push(z);
                    v.push(z.conj());
                }
            }
        }
        v
    };
    let fit = ring(&[0.8, 1.5, 3.0], 12, 0.5);
    let mut hold = ring(&[1.1, 2.2], 7, 0.3);
    for h in [0.3, 0.7, 1.6] {
        let z = Complex64::new(c, (h * b).max(delta));
        hold.push(z);
        hold.push(z.conj());
    }
    (fit, hold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{Grid, HalfLine};
    use std::sync::Arc;

    fn blob(h: HalfLine, m: f64) -> DiscreteMeasure {
        DiscreteMeasure::uniform(Arc::new(Grid::uniform(h, 2.0, 40).unwrap()), m)
    }

    #[test]
    fn values_telescope_and_conjugate() {
        let (a, b) = (blob(HalfLine::Positive, 1.0), blob(HalfLine::Negative, 0.5));
        let vp = Rational::polynomial(vec![0.5, 1.0]);
        let z = Complex64::new(0.7, 1.3);
        let v = sheet_values_of(&[&a, &b], &vp, z, 0.1).unwrap();
        assert_eq!(v.len(), 3);
        let s: Complex64 = v.iter().sum();
        assert!((s - vp.eval(z).unwrap()).norm() < 1e-14);
        let w = sheet_values_of(&[&a, &b], &vp, z.conj(), 0.1).unwrap();
        for (x, y) in v.iter().zip(&w) {
            assert!((x.conj() - y).norm() < 1e-14);
        }
    }

    #[test]
    fn near_support_is_rejected() {
        let a = blob(HalfLine::Positive, 1.0);
        let vp = Rational::polynomial(vec![1.0]);
        assert!(sheet_values_of(&[&a], &vp, Complex64::new(1.0, 0.01), 0.05).is_err());
        assert!(sheet_values_of(&[&a], &vp, Complex64::new(2.2, 0.0), 0.05).is_ok());
    }

    #[test]
    fn samples_keep_their_distance() {
        let (f, h) = curve_samples(4.0, 0.2);
        assert!(f.iter().chain(&h).all(|z| z.im.abs() >= 0.2));
        assert!(f.len() > 40 && h.len() > 20);
    }
}
