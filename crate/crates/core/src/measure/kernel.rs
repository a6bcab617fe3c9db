//! Exact cell averages of the logarithmic kernel and its companions.
//!
//! Every measure is piecewise constant on its cells (or atomic), so kernels are
//! integrated cell against cell in closed form; far pairs switch to moment series.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::grid::{Cell, Grid};
use crate::quad::gauss_legendre;

const FAR: f64 = 0.05;

fn g2(t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        0.5 * t * t * t.abs().ln() - 0.75 * t * t
    }
}

fn h1(t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t * t.abs().ln() - t
    }
}

/// Average of `log|x - y|` over `x` in `a`, `y` in `b`; `-inf` for coincident atoms.
pub fn avg_log_abs(a: Cell, b: Cell) -> f64 {
    let (ha, hb) = (a.width(), b.width());
    let d = a.mid() - b.mid();
    let hmax = ha.max(hb);
    if hmax == 0.0 {
        return d.abs().ln();
    }
    if hmax < FAR * d.abs() {
        let d2 = d * d;
        let (a2, b2) = (ha * ha, hb * hb);
        let m4 = a2 * a2 / 80.0 + a2 * b2 / 24.0 + b2 * b2 / 80.0;
        let m6 = (a2 * a2 * a2 + b2 * b2 * b2) / 448.0 + 15.0 * a2 * b2 * (a2 + b2) / 960.0;
        return d.abs().ln() - (a2 + b2) / (24.0 * d2) - m4 / (4.0 * d2 * d2) - m6 / (6.0 * d2 * d2 * d2);
    }
    if ha == 0.0 {
        return avg_log_point(a.lo, b);
    }
    if hb == 0.0 {
        return avg_log_point(b.lo, a);
    }
    // average over the narrow cell first so that very different widths do not cancel
    let (narrow, wide) = if ha <= hb { (a, b) } else { (b, a) };
    (avg_h1(narrow, wide.lo) - avg_h1(narrow, wide.hi)) / wide.width()
}

/// Average of `h1(y - c)` over `y` in `s`, where `h1(t) = t log|t| - t`.
fn avg_h1(s: Cell, c: f64) -> f64 {
    let h = s.width();
    let t = s.mid() - c;
    if h < FAR * t.abs() {
        let (h2, t2) = (h * h, t * t);
        return h1(t) + h2 / (24.0 * t) + h2 * h2 / (960.0 * t * t2) + h2 * h2 * h2 / (13440.0 * t * t2 * t2);
    }
    (g2(s.hi - c) - g2(s.lo - c)) / h
}

/// Average of `log|p - y|` over `y` in `c`.
pub fn avg_log_point(p: f64, c: Cell) -> f64 {
    let h = c.width();
    let d = p - c.mid();
    if h == 0.0 {
        return d.abs().ln();
    }
    if h < FAR * d.abs() {
        let r = h * h / (d * d);
        return d.abs().ln() - r / 24.0 - r * r / 320.0 - r * r * r / 2688.0;
    }
    (h1(p - c.lo) - h1(p - c.hi)) / h
}

fn cxlogx(w: Complex64) -> Complex64 {
    if w == Complex64::new(0.0, 0.0) {
        w
    } else {
        w * w.ln() - w
    }
}

/// Average of `log|z - y|` over `y` in `c` for complex `z`.
pub fn avg_log_complex(z: Complex64, c: Cell) -> f64 {
    if z.im == 0.0 {
        return avg_log_point(z.re, c);
    }
    let h = c.width();
    let w = z - c.mid();
    if h == 0.0 {
        return w.norm().ln();
    }
    if h < FAR * w.norm() {
        let r = (h * h) / (w * w);
        return (w.ln() - r / 24.0 - r * r / 320.0 - r * r * r / 2688.0).re;
    }
    ((cxlogx(z - c.lo) - cxlogx(z - c.hi)) / h).re
}

/// Average of `1/(z - y)` over `y` in `c`.
pub fn avg_cauchy(z: Complex64, c: Cell) -> Complex64 {
    let h = c.width();
    let w = z - c.mid();
    if h == 0.0 || h < FAR * w.norm() {
        let r = (h * h) / (w * w);
        return (1.0 + r / 12.0 + r * r / 80.0 + r * r * r / 448.0) / w;
    }
    ((z - c.lo) / (z - c.hi)).ln() / h
}

/// Average of `log sqrt(1 + x^2)` over the cell.
pub fn avg_half_log1p_sq(c: Cell) -> f64 {
    let f = |x: f64| 0.5 * (x * x).ln_1p();
    let h = c.width();
    if h == 0.0 {
        return f(c.lo);
    }
    let m = c.mid();
    if h < 0.2 * (1.0 + m * m).sqrt() {
        let half = 0.5 * h;
        return 0.5
            * gauss_legendre(8)
                .iter()
                .map(|&(t, w)| w * f(m + half * t))
                .sum::<f64>();
    }
    let anti = |x: f64| x * (x * x).ln_1p() - 2.0 * x + 2.0 * x.atan();
    0.5 * (anti(c.hi) - anti(c.lo)) / h
}

fn ln_expm1(t: f64) -> f64 {
    if t > 30.0 {
        t + (-(-t).exp()).ln_1p()
    } else {
        t.exp_m1().ln()
    }
}

/// `log((x^p - y^p)/(x - y))` for `x, y >= 0`, stable near `x = y`.
pub fn log_power_ratio(x: f64, y: f64, p: f64) -> f64 {
    let (lo, hi) = if x < y { (x, y) } else { (y, x) };
    if hi == 0.0 {
        return if p < 1.0 { f64::INFINITY } else if p > 1.0 { f64::NEG_INFINITY } else { 0.0 };
    }
    if lo == 0.0 {
        return (p - 1.0) * hi.ln();
    }
    let t = (hi / lo).ln();
    if t == 0.0 {
        return p.ln() + (p - 1.0) * lo.ln();
    }
    (p - 1.0) * lo.ln() + ln_expm1(p * t) - ln_expm1(t)
}

/// Average of `log((x^p - y^p)/(x - y))` over a pair of cells on `[0, inf)`.
pub fn avg_log_power_ratio(a: Cell, b: Cell, p: f64) -> f64 {
    if p == 1.0 {
        return 0.0;
    }
    let touches_zero = a.lo == 0.0 || b.lo == 0.0;
    let gap = (a.mid() - b.mid()).abs();
    let m = if a.is_atom() && b.is_atom() {
        1
    } else if touches_zero {
        16
    } else if gap > 4.0 * a.width().max(b.width()) {
        3
    } else {
        6
    };
    let rule = gauss_legendre(m);
    let pts = |c: Cell| -> Vec<(f64, f64)> {
        if c.is_atom() {
            vec![(c.lo, 1.0)]
        } else {
            rule.iter().map(|&(t, w)| (c.mid() + 0.5 * c.width() * t, 0.5 * w)).collect()
        }
    };
    let (pa, pb) = (pts(a), pts(b));
    let mut s = 0.0;
    for &(x, wx) in &pa {
        for &(y, wy) in &pb {
            s += wx * wy * log_power_ratio(x, y, p);
        }
    }
    s
}

/// Cell-averaged logarithmic kernel `-avg log|x - y|` between two grids.
pub fn log_kernel_matrix(rows: &Grid, cols: &Grid) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| -avg_log_abs(rows.cell(i), cols.cell(j)))
}

/// Symmetric correction turning the log kernel into `-log|x^p - y^p|`.
pub fn power_correction_matrix(grid: &Grid, p: f64) -> DMatrix<f64> {
    let n = grid.len();
    let mut m = DMatrix::zeros(n, n);
    if p == 1.0 {
        return m;
    }
    for i in 0..n {
        for j in 0..=i {
            let v = -avg_log_power_ratio(grid.cell(i), grid.cell(j), p);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Per-cell averages of `log sqrt(1 + x^2)`.
pub fn sphere_averages(grid: &Grid) -> Vec<f64> {
    grid.cells().iter().map(|&c| avg_half_log1p_sq(c)).collect()
}

/// Cell-averaged spherical kernel between two grids.
pub fn spherical_kernel_matrix(rows: &Grid, cols: &Grid) -> DMatrix<f64> {
    let (sr, sc) = (sphere_averages(rows), sphere_averages(cols));
    let mut m = log_kernel_matrix(rows, cols);
    for i in 0..rows.len() {
        for j in 0..cols.len() {
            m[(i, j)] += sr[i] + sc[j];
        }
    }
    m
}
