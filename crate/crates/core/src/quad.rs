//! Quadrature helpers shared by the oracle and the measure substrate.

use std::ops::{Add, AddAssign, Mul};
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;

/// Gauss-Legendre rule on [-1, 1] as (node, weight) pairs, cached per order.
pub fn gauss_legendre(n: usize) -> &'static [(f64, f64)] {
    static RULES: OnceLock<Vec<Vec<(f64, f64)>>> = OnceLock::new();
    let rules = RULES.get_or_init(|| {
        (0..=64)
            .map(|k| {
                if k < 2 {
                    vec![(0.0, 2.0)]
                } else {
                    let rule = GaussLegendre::new(std::num::NonZeroUsize::new(k).unwrap());
                    let mut pairs: Vec<(f64, f64)> = rule.into_node_weight_pairs().into_vec();
                    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                    pairs
                }
            })
            .collect()
    });
    &rules[n.clamp(1, 64)]
}

/// Gauss-Legendre integral of `f` over [a, b] with `n` points.
pub fn gl_integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, n: usize) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    gauss_legendre(n)
        .iter()
        .map(|&(t, w)| w * f(mid + half * t))
        .sum::<f64>()
        * half
}

/// Uniform trapezoid rule over [a, b] with step close to `h`.
///
/// Exponentially accurate for integrands analytic in a strip that decay at both ends.
pub fn trapezoid<T, F>(mut f: F, a: f64, b: f64, h: f64) -> T
where
    T: Copy + Default + Add<Output = T> + AddAssign + Mul<f64, Output = T>,
    F: FnMut(f64) -> T,
{
    let n = ((b - a) / h).ceil().max(1.0) as usize;
    let step = (b - a) / n as f64;
    let mut acc = (f(a) + f(b)) * 0.5;
    for k in 1..n {
        acc += f(a + step * k as f64);
    }
    acc * step
}

/// Adaptive double-exponential integral of `f` over [a, b].
///
/// Bisects until each piece reports an error estimate below its share of `tol`.
pub fn de_integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    de_rec(f, a, b, tol, 0)
}

fn de_rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    let out = quadrature::double_exponential::integrate(f, a, b, tol);
    if out.error_estimate <= tol || depth >= 18 || !out.integral.is_finite() {
        return out.integral;
    }
    let mid = 0.5 * (a + b);
    de_rec(f, a, mid, 0.5 * tol, depth + 1) + de_rec(f, mid, b, 0.5 * tol, depth + 1)
}

/// Adaptive integral over consecutive breakpoints.
pub fn de_integrate_breaks<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], tol: f64) -> f64 {
    let pieces = breaks.len().saturating_sub(1).max(1) as f64;
    breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| de_integrate(f, w[0], w[1], tol / pieces))
        .sum()
}

/// Breakpoints covering [a, b] with pieces at most `width` long, plus extra interior points.
pub fn breakpoints(a: f64, b: f64, width: f64, extra: &[f64]) -> Vec<f64> {
    let n = ((b - a) / width).ceil().max(1.0) as usize;
    let mut pts: Vec<f64> = (0..=n).map(|k| a + (b - a) * k as f64 / n as f64).collect();
    pts.extend(extra.iter().copied().filter(|&x| x > a && x < b));
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|x, y| (*x - *y).abs() < 1e-12 * (1.0 + y.abs()));
    pts
}
