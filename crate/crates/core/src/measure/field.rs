use std::fmt;
use std::sync::Arc;

use super::grid::Grid;
use crate::error::{invalid, Result};
use crate::quad::gl_integrate;

/// Which functional a field belongs to.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FieldKind {
    Raw,
    /// `V(x^(1/q))`
    Transformed { q: u32 },
    /// `V - c log(1 + x^2)`
    Spherical { coef: f64 },
}

/// External field `V`, `V-hat` or `V-tilde` as a shared evaluator.
#[derive(Clone)]
pub struct ExternalField {
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    kind: FieldKind,
    label: String,
}

impl fmt::Debug for ExternalField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExternalField").field("label", &self.label).field("kind", &self.kind).finish()
    }
}

impl ExternalField {
    pub fn new(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { eval: Arc::new(f), kind: FieldKind::Raw, label: label.into() }
    }

    pub fn zero() -> Self {
        Self::new("zero", |_| 0.0)
    }

    /// `V(x) = x`
    pub fn linear() -> Self {
        Self::new("linear", |x| x)
    }

    /// `V(x) = c x^p` on `[0, inf)`
    pub fn monomial(c: f64, p: f64) -> Self {
        Self::new(format!("{c}*x^{p}"), move |x: f64| c * x.abs().powf(p))
    }

    /// Piecewise-linear interpolation of `(x, V)` pairs, extended linearly past the ends.
    pub fn tabulated(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return invalid("a tabulated field needs at least two points");
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return invalid("tabulated abscissae must increase");
        }
        let pts = points.to_vec();
        Ok(Self::new("tabulated", move |x| {
            let k = pts.partition_point(|p| p.0 <= x).clamp(1, pts.len() - 1);
            let (a, b) = (pts[k - 1], pts[k]);
            a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
        }))
    }

    /// `V-hat(x) = V(x^(1/q))` on `[0, inf)`.
    pub fn transformed(&self, q: u32) -> Self {
        let f = self.eval.clone();
        let e = 1.0 / q as f64;
        Self {
            eval: Arc::new(move |x: f64| f(x.max(0.0).powf(e))),
            kind: FieldKind::Transformed { q },
            label: format!("{}(x^(1/{q}))", self.label),
        }
    }

    /// `V(x) - coef log(1 + x^2)`.
    pub fn spherically_shifted(&self, coef: f64) -> Self {
        let f = self.eval.clone();
        Self {
            eval: Arc::new(move |x: f64| f(x) - coef * (x * x).ln_1p()),
            kind: FieldKind::Spherical { coef },
            label: format!("{}-{coef}log(1+x^2)", self.label),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Smallest increment of `V(x) - log(1+x^2)` over log-spaced samples of `[x_star, x_max]`.
    ///
    /// Positive means the growth surrogate holds on the sampled range.
    pub fn growth_margin(&self, x_star: f64, x_max: f64) -> f64 {
        let g = |x: f64| self.eval(x) - (x * x).ln_1p();
        let n = 200;
        let (a, b) = (x_star.max(1e-12).ln(), x_max.ln());
        let xs: Vec<f64> = (0..=n).map(|k| (a + (b - a) * k as f64 / n as f64).exp()).collect();
        xs.windows(2).map(|w| g(w[1]) - g(w[0])).fold(f64::INFINITY, f64::min)
    }

    /// Cell averages on a grid (point values on atoms).
    pub fn cell_averages(&self, grid: &Grid) -> Vec<f64> {
        grid.cells()
            .iter()
            .map(|c| {
                if c.is_atom() {
                    self.eval(c.lo)
                } else {
                    let n = if c.lo == 0.0 || c.hi == 0.0 { 16 } else { 6 };
                    gl_integrate(|x| self.eval(x), c.lo, c.hi, n) / c.width()
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transforms() {
        let v = ExternalField::linear();
        let vh = v.transformed(2);
        assert!((vh.eval(9.0) - 3.0).abs() < 1e-15);
        assert_eq!(vh.kind(), FieldKind::Transformed { q: 2 });
        let vt = v.spherically_shifted(0.5);
        assert!((vt.eval(1.0) - (1.0 - 0.5 * 2f64.ln())).abs() < 1e-15);
        let t = ExternalField::tabulated(&[(0.0, 0.0), (1.0, 2.0), (3.0, 3.0)]).unwrap();
        assert_eq!(t.eval(0.5), 1.0);
        assert_eq!(t.eval(5.0), 4.0);
        assert!((ExternalField::monomial(2.0, 1.5).eval(4.0) - 16.0).abs() < 1e-12);
    }

    #[test]
    fn growth_surrogate() {
        assert!(ExternalField::linear().growth_margin(2.0, 1e6) > 0.0);
        assert!(ExternalField::zero().growth_margin(2.0, 1e6) < 0.0);
        // x^(1/2) beats log(1+x^2) only eventually
        assert!(ExternalField::linear().transformed(2).growth_margin(1e3, 1e8) > 0.0);
    }
}
