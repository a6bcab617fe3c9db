use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Real polynomial evaluated at a complex point; coefficients ascending.
pub fn poly_eval(c: &[f64], z: Complex64) -> Complex64 {
    c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &a| acc * z + a)
}

/// Rational function `num/den` with real coefficients, ascending powers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rational {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

impl Rational {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        if den.iter().all(|&d| d == 0.0) {
            return invalid("denominator is identically zero");
        }
        if num.iter().chain(&den).any(|c| !c.is_finite()) {
            return invalid("non-finite coefficient");
        }
        Ok(Self { num, den })
    }

    pub fn polynomial(c: Vec<f64>) -> Self {
        Self { num: c, den: vec![1.0] }
    }

    /// `V'` for `V(x) = c x^p` with integer `p >= 1`.
    pub fn monomial_derivative(c: f64, p: u32) -> Result<Self> {
        if p == 0 {
            return Ok(Self::polynomial(vec![0.0]));
        }
        let mut num = vec![0.0; p as usize];
        num[p as usize - 1] = c * p as f64;
        Ok(Self::polynomial(num))
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        let d = poly_eval(&self.den, z);
        if d.norm() == 0.0 {
            return Err(Error::Pole(format!("{z} is a pole of the rational function")));
        }
        Ok(poly_eval(&self.num, z) / d)
    }

    fn degree(c: &[f64]) -> Option<usize> {
        c.iter().rposition(|&a| a != 0.0)
    }

    pub fn num_degree(&self) -> Option<usize> {
        Self::degree(&self.num)
    }

    pub fn den_degree(&self) -> usize {
        Self::degree(&self.den).unwrap_or(0)
    }
}

/// Shape of one rational fit: `N(z) / (z^pole_order D(z) Q(z))`, `D` fixed, `Q = 1 + ...` free.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitShape {
    pub pole_order: u32,
    pub numerator_degree: u32,
    pub fixed_denominator: Vec<f64>,
    pub free_denominator_degree: u32,
}

/// Fitted coefficients for a [`FitShape`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RationalFit {
    pub shape: FitShape,
    pub numerator: Vec<f64>,
    /// Free factor `Q`, constant term 1.
    pub free_denominator: Vec<f64>,
    pub iterations: usize,
}

impl RationalFit {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let d = z.powu(self.shape.pole_order)
            * poly_eval(&self.shape.fixed_denominator, z)
            * poly_eval(&self.free_denominator, z);
        poly_eval(&self.numerator, z) / d
    }
}

const SK_ITERS: usize = 30;

/// Least-squares rational fit of complex data with real coefficients.
///
/// The equation is linearized by multiplying through by the denominator; with a free
/// factor the rows are reweighted by the previous denominator until it settles.
pub fn fit_rational(z: &[Complex64], f: &[Complex64], shape: &FitShape) -> Result<RationalFit> {
    let nn = shape.numerator_degree as usize + 1;
    let nq = shape.free_denominator_degree as usize;
    if z.len() != f.len() {
        return invalid("sample and value counts differ");
    }
    if 2 * z.len() < nn + nq {
        return invalid("too few samples for the requested degrees");
    }
    // powers are taken of z / scale to keep the columns comparable
    let scale = z.iter().map(|p| p.norm()).fold(0.0, f64::max).max(1e-300);
    let g: Vec<Complex64> = z
        .iter()
        .zip(f)
        .map(|(&p, &v)| v * p.powu(shape.pole_order) * poly_eval(&shape.fixed_denominator, p))
        .collect();
    let mut q = vec![0.0; nq];
    let mut iterations = 0;
    let mut coef = vec![0.0; nn];
    for it in 0..(if nq == 0 { 1 } else { SK_ITERS }) {
        iterations = it + 1;
        let mut a = DMatrix::zeros(2 * z.len(), nn + nq);
        let mut b = DVector::zeros(2 * z.len());
        for (i, (&p, &gi)) in z.iter().zip(&g).enumerate() {
            let t = p / scale;
            let qprev = Complex64::new(1.0, 0.0) + q.iter().enumerate().map(|(m, &c)| c * t.powu(m as u32 + 1)).sum::<Complex64>();
            let w = 1.0 / (qprev.norm() * gi.norm().max(1.0));
            for m in 0..nn {
                let v = t.powu(m as u32) * w;
                a[(2 * i, m)] = v.re;
                a[(2 * i + 1, m)] = v.im;
            }
            for m in 0..nq {
                let v = -gi * t.powu(m as u32 + 1) * w;
                a[(2 * i, nn + m)] = v.re;
                a[(2 * i + 1, nn + m)] = v.im;
            }
            b[2 * i] = gi.re * w;
            b[2 * i + 1] = gi.im * w;
        }
        let x = a
            .svd(true, true)
            .solve(&b, 1e-14)
            .map_err(|e| Error::Numerical(format!("least squares failed: {e}")))?;
        coef = x.iter().take(nn).copied().collect();
        let qn: Vec<f64> = x.iter().skip(nn).copied().collect();
        let change = qn.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        q = qn;
        if it > 0 && change < 1e-13 {
            break;
        }
    }
    let numerator = coef.iter().enumerate().map(|(m, c)| c / scale.powi(m as i32)).collect();
    let mut free_denominator = vec![1.0];
    free_denominator.extend(q.iter().enumerate().map(|(m, c)| c / scale.powi(m as i32 + 1)));
    Ok(RationalFit { shape: shape.clone(), numerator, free_denominator, iterations })
}
