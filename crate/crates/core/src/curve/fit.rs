use num_complex::Complex64;
use serde::Serialize;

use super::rational::{fit_rational, FitShape, Rational, RationalFit};
use super::sheets::{curve_components, curve_samples, sheet_values_of};
use crate::error::{invalid, Error, Result};
use crate::measure::cauchy_transform;
use crate::scalar::ScalarSolution;
use crate::vector::EquilibriumSolution;

/// `e_0, ..., e_m` of the values.
pub fn elementary_symmetric(values: &[Complex64]) -> Vec<Complex64> {
    let mut e = vec![Complex64::new(0.0, 0.0); values.len() + 1];
    e[0] = Complex64::new(1.0, 0.0);
    for (n, &v) in values.iter().enumerate() {
        for k in (1..=n + 1).rev() {
            let prev = e[k - 1];
            e[k] += v * prev;
        }
    }
    e
}

/// `|sum c_j x^j|` over the largest coefficient modulus.
pub fn polynomial_residual(c: &[Complex64], x: Complex64) -> f64 {
    let v = c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &a| acc * x + a);
    let scale = c.iter().map(|a| a.norm()).fold(0.0, f64::max);
    v.norm() / scale.max(f64::MIN_POSITIVE)
}

/// Default shapes for the `r + 1` symmetric functions of the sheet values.
///
/// With `V' = A/B`, `e_k` has at most a pole of order `k - 1` at 0 (the sheet values
/// blow up slower than `1/z` there), the poles of `B`, and grows like `z^(deg A - deg B)`
/// at infinity at most, because only the zeroth value grows and the others decay like `1/z`.
/// `slack` widens every numerator.
pub fn default_shapes(r: u32, vprime: &Rational, slack: u32) -> Vec<FitShape> {
    let db = vprime.den_degree() as i64;
    let p = match vprime.num_degree() {
        Some(d) => (d as i64 - db).max(-1),
        None => -1,
    };
    let n = (p + db).max(0) as u32 + slack;
    (1..=r + 1)
        .map(|k| FitShape {
            pole_order: k - 1,
            numerator_degree: n,
            fixed_denominator: vprime.den.clone(),
            free_denominator_degree: 0,
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct SymmetricFit {
    pub k: usize,
    pub fit: RationalFit,
    /// Largest `|e_k - fit| / max(1, |e_k|)` over the fitting samples.
    pub fit_residual: f64,
    pub holdout_residual: f64,
}

/// Monic relation of degree `m` whose roots are the sheet values.
#[derive(Clone, Debug, Serialize)]
pub struct CurveFit {
    pub degree: usize,
    pub symmetric: Vec<SymmetricFit>,
    pub samples: Vec<[f64; 2]>,
    pub holdout: Vec<[f64; 2]>,
    pub fit_residual: f64,
    pub holdout_residual: f64,
    /// Largest relative value of the fitted polynomial at any holdout sheet value.
    pub root_residual: f64,
    /// Relation in `F = F_0` checked at the holdout points; `None` when not evaluated.
    pub f_residual: Option<f64>,
    pub supports: Vec<(f64, f64)>,
    /// Supports with more than one interval are fitted but not trusted.
    pub experimental: bool,
}

impl CurveFit {
    pub fn e(&self, k: usize, z: Complex64) -> Complex64 {
        if k == 0 {
            return Complex64::new(1.0, 0.0);
        }
        self.symmetric[k - 1].fit.eval(z)
    }

    /// Coefficients, ascending, of `prod (X - value)` at `z`.
    pub fn sheet_polynomial(&self, z: Complex64) -> Vec<Complex64> {
        let m = self.degree;
        (0..=m)
            .map(|j| {
                let s = if (m - j) % 2 == 0 { 1.0 } else { -1.0 };
                self.e(m - j, z) * s
            })
            .collect()
    }

    /// Coefficients `c_0, ..., c_{m-1}, 1` of the monic relation satisfied by `F_0 = V' - value_0`.
    pub fn f_polynomial(&self, z: Complex64, vprime: &Rational) -> Result<Vec<Complex64>> {
        let a = self.sheet_polynomial(z);
        let v = vprime.eval(z)?;
        let m = self.degree;
        let mut c = vec![Complex64::new(0.0, 0.0); m + 1];
        // prod (X - (v - xi)) = (-1)^m P(v - X)
        for (j, &aj) in a.iter().enumerate() {
            let mut binom = 1.0;
            for i in 0..=j {
                let sign = if (i + m) % 2 == 0 { 1.0 } else { -1.0 };
                c[i] += aj * binom * v.powu((j - i) as u32) * sign;
                binom *= (j - i) as f64 / (i + 1) as f64;
            }
        }
        Ok(c)
    }
}

type Samples = [(Complex64, Vec<Complex64>)];

fn residuals(fit: &RationalFit, k: usize, s: &Samples) -> f64 {
    s.iter()
        .map(|(z, v)| {
            let e = elementary_symmetric(v)[k];
            (e - fit.eval(*z)).norm() / e.norm().max(1.0)
        })
        .fold(0.0, f64::max)
}

fn pairs(z: &[Complex64]) -> Vec<[f64; 2]> {
    z.iter().map(|p| [p.re, p.im]).collect()
}

/// Fits each symmetric function of the sheet values; no acceptance threshold.
pub fn fit_curve_unchecked(samples: &Samples, holdout: &Samples, shapes: &[FitShape]) -> Result<CurveFit> {
    let m = samples.first().map(|s| s.1.len()).unwrap_or(0);
    if m == 0 || samples.iter().chain(holdout).any(|s| s.1.len() != m) {
        return invalid("every sample needs the same nonzero number of sheet values");
    }
    if shapes.len() != m {
        return invalid(format!("{} shapes for {m} symmetric functions", shapes.len()));
    }
    let z: Vec<Complex64> = samples.iter().map(|s| s.0).collect();
    let mut symmetric = Vec::with_capacity(m);
    for (k, shape) in (1..=m).zip(shapes) {
        let f: Vec<Complex64> = samples.iter().map(|s| elementary_symmetric(&s.1)[k]).collect();
        let fit = fit_rational(&z, &f, shape)?;
        let fit_residual = residuals(&fit, k, samples);
        let holdout_residual = residuals(&fit, k, holdout);
        symmetric.push(SymmetricFit { k, fit, fit_residual, holdout_residual });
    }
    let mut out = CurveFit {
        degree: m,
        fit_residual: symmetric.iter().map(|s| s.fit_residual).fold(0.0, f64::max),
        holdout_residual: symmetric.iter().map(|s| s.holdout_residual).fold(0.0, f64::max),
        symmetric,
        samples: pairs(&z),
        holdout: pairs(&holdout.iter().map(|s| s.0).collect::<Vec<_>>()),
        root_residual: 0.0,
        f_residual: None,
        supports: Vec::new(),
        experimental: false,
    };
    out.root_residual = holdout
        .iter()
        .flat_map(|(z, v)| {
            let c = out.sheet_polynomial(*z);
            v.iter().map(move |&x| polynomial_residual(&c, x)).collect::<Vec<_>>()
        })
        .fold(0.0, f64::max);
    Ok(out)
}

/// As [`fit_curve_unchecked`], rejecting the fit when the holdout residual exceeds `threshold`.
pub fn fit_curve(samples: &Samples, holdout: &Samples, shapes: &[FitShape], threshold: f64) -> Result<CurveFit> {
    let fit = fit_curve_unchecked(samples, holdout, shapes)?;
    if fit.holdout_residual > threshold || fit.root_residual > threshold {
        let per_k: Vec<String> = fit
            .symmetric
            .iter()
            .map(|s| format!("e{}: fit {:.2e} holdout {:.2e}", s.k, s.fit_residual, s.holdout_residual))
            .collect();
        return Err(Error::Numerical(format!(
            "curve fit rejected (threshold {threshold:.1e}, roots {:.2e}): {}",
            fit.root_residual,
            per_k.join(", ")
        )));
    }
    Ok(fit)
}

/// Largest relative value of the fitted relation at `(z, F_0(z))` pairs.
pub fn curve_residual(fit: &CurveFit, vprime: &Rational, f0: &[(Complex64, Complex64)]) -> Result<f64> {
    let mut worst = 0.0f64;
    for (z, f) in f0 {
        worst = worst.max(polynomial_residual(&fit.f_polynomial(*z, vprime)?, *f));
    }
    Ok(worst)
}

/// Sheet values at the default sample and holdout points, then the fit.
///
/// `delta` defaults to a twentieth of the right end of the support of `mu*`.
pub fn spectral_curve(
    scalar: &ScalarSolution,
    vector: Option<&EquilibriumSolution>,
    vprime: &Rational,
    delta: Option<f64>,
    shapes: Option<Vec<FitShape>>,
) -> Result<CurveFit> {
    let comps = curve_components(scalar, vector)?;
    let r = comps.len() as u32;
    if vector.map(|v| v.r).unwrap_or(1) != r {
        return invalid("vector solution does not match the number of components");
    }
    let supports = scalar.measure.support_intervals(1e-14);
    let b = supports.last().map(|s| s.1).ok_or_else(|| Error::Contract("empty support".into()))?;
    let delta = delta.unwrap_or(0.05 * b);
    let (zf, zh) = curve_samples(b, delta);
    let eval = |zs: &[Complex64]| -> Result<Vec<(Complex64, Vec<Complex64>)>> {
        zs.iter().map(|&z| Ok((z, sheet_values_of(&comps, vprime, z, delta)?))).collect()
    };
    let (sf, sh) = (eval(&zf)?, eval(&zh)?);
    let shapes = shapes.unwrap_or_else(|| default_shapes(r, vprime, 0));
    let mut fit = fit_curve_unchecked(&sf, &sh, &shapes)?;
    let f0: Vec<(Complex64, Complex64)> = zh.iter().map(|&z| (z, cauchy_transform(comps[0], z))).collect();
    fit.f_residual = Some(curve_residual(&fit, vprime, &f0)?);
    fit.experimental = supports.len() > 1;
    fit.supports = supports;
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::SheetedPsi;

    #[test]
    fn symmetric_functions() {
        let v = [Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0), Complex64::new(3.0, 0.0)];
        let e = elementary_symmetric(&v);
        let want = [1.0, 6.0, 11.0, 6.0];
        for (a, b) in e.iter().zip(want) {
            assert!((a.re - b).abs() < 1e-14 && a.im == 0.0);
        }
    }

    fn psi_samples(p: &SheetedPsi, zs: &[Complex64]) -> Vec<(Complex64, Vec<Complex64>)> {
        zs.iter().map(|&z| (z, (1..=p.r()).map(|j| p.eval(j, z, None).unwrap()).collect())).collect()
    }

    #[test]
    fn point_mass_product_is_rational() {
        for (r, a) in [(2u32, 1.0), (3, 2.0), (4, 0.5)] {
            let p = SheetedPsi::new(r, a).unwrap();
            let (zf, zh) = curve_samples(a, 0.05 * a);
            let (sf, sh) = (psi_samples(&p, &zf), psi_samples(&p, &zh));
            // prod Psi_j = 1/(r^r z^(r-1) (z - a)); the lower e_k get generous shapes
            let mut shapes: Vec<FitShape> = (1..r)
                .map(|_| FitShape { pole_order: r - 1, numerator_degree: r, fixed_denominator: vec![-a, 1.0], free_denominator_degree: 0 })
                .collect();
            shapes.push(FitShape { pole_order: r - 1, numerator_degree: 0, fixed_denominator: vec![-a, 1.0], free_denominator_degree: 0 });
            let fit = fit_curve(&sf, &sh, &shapes, 1e-6).unwrap();
            let top = &fit.symmetric[r as usize - 1].fit;
            let want = 1.0 / (r as f64).powi(r as i32);
            assert!((top.numerator[0] - want).abs() < 1e-6 * want, "r {r}: {:?}", top.numerator);
            for z in zh {
                let prod = 1.0 / (z.powu(r - 1) * (z - a) * (r as f64).powi(r as i32));
                assert!((top.eval(z) - prod).norm() < 1e-6 * prod.norm().max(1.0));
            }
        }
    }

    #[test]
    fn free_denominator_finds_the_atom() {
        let (r, a) = (3u32, 2.0);
        let p = SheetedPsi::new(r, a).unwrap();
        let (zf, zh) = curve_samples(a, 0.1);
        let (sf, sh) = (psi_samples(&p, &zf), psi_samples(&p, &zh));
        let shape = |n| FitShape { pole_order: r - 1, numerator_degree: n, fixed_denominator: vec![1.0], free_denominator_degree: 1 };
        let fit = fit_curve(&sf, &sh, &[shape(r), shape(r), shape(0)], 1e-6).unwrap();
        let q = &fit.symmetric[2].fit.free_denominator;
        assert!((q[1] + 1.0 / a).abs() < 1e-8, "{q:?}");
    }

    #[test]
    fn rejects_poor_fits() {
        let p = SheetedPsi::new(2, 1.0).unwrap();
        let (zf, zh) = curve_samples(1.0, 0.05);
        let (sf, sh) = (psi_samples(&p, &zf), psi_samples(&p, &zh));
        let bad = FitShape { pole_order: 0, numerator_degree: 0, fixed_denominator: vec![1.0], free_denominator_degree: 0 };
        let err = fit_curve(&sf, &sh, &[bad.clone(), bad], 1e-6).unwrap_err();
        assert!(err.to_string().contains("e2"));
    }

    #[test]
    fn f_polynomial_shifts_the_roots() {
        // sheet values 1 - F and F for a made-up F: the F relation must vanish at F
        let f = Complex64::new(0.3, 0.0);
        let v = vec![Complex64::new(1.0, 0.0) - f, f];
        let z = Complex64::new(1.0, 1.0);
        let shape = FitShape { pole_order: 0, numerator_degree: 0, fixed_denominator: vec![1.0], free_denominator_degree: 0 };
        let samples = vec![(z, v.clone()); 2];
        let fit = fit_curve_unchecked(&samples, &samples, &[shape.clone(), shape]).unwrap();
        let c = fit.f_polynomial(z, &Rational::polynomial(vec![1.0])).unwrap();
        assert!(polynomial_residual(&c, f) < 1e-14);
        assert!((c[2] - 1.0).norm() < 1e-15);
    }
}
