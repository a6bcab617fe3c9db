use std::sync::Arc;

use mbeq::curve::{sheet_values, spectral_curve, CurveFit, Rational};
use mbeq::measure::{Clustering, ExternalField, Grid, HalfLine};
use mbeq::scalar::{solve_scalar, ScalarOptions, ScalarSolution};
use mbeq::vector::{default_grids, pilot_support_end, solve_vector, EquilibriumSolution, VectorGridSpec, VectorOptions};
use mbeq::Theta;
use num_complex::Complex64;

// For V(x) = x the sheet values satisfy Y^(r+1) = (Y - 1/(r z))^r, so
// e_k = C(r, k-1) r^(1-k) z^(1-k): only one Laurent coefficient per e_k.
fn linear_field_coefficient(r: u32, k: u32) -> f64 {
    let mut c = 1.0;
    for i in 0..k - 1 {
        c *= (r - i) as f64 / (i + 1) as f64 / r as f64;
    }
    c
}

fn solve(r: u32) -> (ScalarSolution, Option<EquilibriumSolution>) {
    let v = ExternalField::linear();
    let end = if r == 1 { 6.0 } else { 1.5 * pilot_support_end(1, r, &v).unwrap() };
    let g = Arc::new(Grid::clustered(HalfLine::Positive, end, 400, Clustering::Cosine).unwrap());
    let s = solve_scalar(Theta::new(1, r).unwrap(), &v, g, &ScalarOptions::default()).unwrap();
    if r == 1 {
        return (s, None);
    }
    let grids = default_grids(1, r, &v, &VectorGridSpec::default()).unwrap();
    let vs = solve_vector(1, r, &v, &grids, &VectorOptions::default()).unwrap();
    (s, Some(vs))
}

fn coefficient_error(fit: &CurveFit, r: u32) -> f64 {
    fit.symmetric
        .iter()
        .map(|s| {
            let want = linear_field_coefficient(r, s.k as u32);
            (s.fit.numerator[0] - want).abs() / want
        })
        .fold(0.0, f64::max)
}

#[test]
fn mp_quadratic() {
    let (s, _) = solve(1);
    let fit = spectral_curve(&s, None, &Rational::polynomial(vec![1.0]), None, None).unwrap();
    assert_eq!(fit.degree, 2);
    // F^2 - F + 1/z = 0
    assert!(coefficient_error(&fit, 1) < 1e-3, "{:?}", fit.symmetric);
    let z = Complex64::new(2.0, 3.0);
    let c = fit.f_polynomial(z, &Rational::polynomial(vec![1.0])).unwrap();
    assert!((c[1] + 1.0).norm() < 1e-3 && (c[0] - 1.0 / z).norm() < 1e-3);
    assert!(fit.f_residual.unwrap() < 1e-3);
    assert!(!fit.experimental);
}

#[test]
fn half_theta_cubic() {
    let (s, vs) = solve(2);
    let vp = Rational::polynomial(vec![1.0]);
    let fit = spectral_curve(&s, vs.as_ref(), &vp, None, None).unwrap();
    assert_eq!(fit.degree, 3);
    assert!(fit.holdout_residual < 1e-2 && fit.root_residual < 1e-2);
    assert!(fit.f_residual.unwrap() < 1e-2);
    assert!(coefficient_error(&fit, 2) < 1e-3, "{:?}", fit.symmetric);
    // no overfitting: the fit samples are not much better than the holdout
    assert!(fit.fit_residual <= fit.holdout_residual + 1e-2);

    // real symmetric functions to the right of every support
    let b = s.support.last().unwrap().1;
    let x = Complex64::new(b + 2.0, 0.0);
    let v = sheet_values(&s, vs.as_ref(), &vp, x, 0.1).unwrap();
    let e2 = v[0] * v[1] + v[0] * v[2] + v[1] * v[2];
    assert!(e2.im.abs() < 1e-12);
    let sum: Complex64 = v.iter().sum();
    assert!((sum - 1.0).norm() < 1e-13);
    assert!(sheet_values(&s, vs.as_ref(), &vp, Complex64::new(-1.0, 0.01), 0.1).is_err());
}

#[test]
fn oracle_coefficients() {
    // r = 1 is the MP quadratic; r = 2 at z = 1 gives Y^3 - Y^2 + Y - 1/4
    assert_eq!((1..=2).map(|k| linear_field_coefficient(1, k)).collect::<Vec<_>>(), vec![1.0, 1.0]);
    assert_eq!((1..=3).map(|k| linear_field_coefficient(2, k)).collect::<Vec<_>>(), vec![1.0, 1.0, 0.25]);
}
