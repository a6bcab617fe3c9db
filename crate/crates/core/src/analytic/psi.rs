use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::measure::HalfLine;

/// Side from which a boundary value on a cut is taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Upper,
    Lower,
}

// angular nudge used only to decide which sheet a boundary root belongs to
const TILT: f64 = 1e-9;

/// `Psi(w) = 1/(r w^(r-1) (w - a^(1/r)))` on the `r`-sheeted surface of `z = w^r`.
///
/// Sheet `j` holds the roots with argument `|phi|` in `((j-1) pi/r, j pi/r)`; sheet 1 is
/// the principal branch, and sheets `j`, `j+1` are glued crosswise along `Delta_j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SheetedPsi {
    r: u32,
    a: f64,
    b: f64,
}

impl SheetedPsi {
    pub fn new(r: u32, a: f64) -> Result<Self> {
        if r < 2 {
            return invalid("the sheeted function needs r >= 2");
        }
        if !(a > 0.0 && a.is_finite()) {
            return invalid("a must be positive and finite");
        }
        Ok(Self { r, a, b: a.powf(1.0 / r as f64) })
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// Sheet of the root `|w| e^(i phi)`, `phi` in `(-pi, pi]`.
    pub fn sheet_of_angle(&self, phi: f64) -> u32 {
        ((phi.abs() * self.r as f64 / PI).ceil() as u32).clamp(1, self.r)
    }

    /// The rational function itself, as a function of `w`.
    pub fn of_w(&self, w: Complex64) -> Complex64 {
        let r = self.r as f64;
        1.0 / (w.powu(self.r - 1) * (w - self.b) * r)
    }

    /// Whether the real point `s` lies on a cut of sheet `j`.
    pub fn on_cut(&self, j: u32, s: f64) -> bool {
        let on = |k: u32| HalfLine::of_index(k as i32).contains(s);
        (j >= 2 && on(j - 1)) || (j < self.r && on(j))
    }

    /// All `r` roots of `w^r = z`, principal first.
    pub fn roots(&self, z: Complex64) -> Vec<Complex64> {
        let rho = z.norm().powf(1.0 / self.r as f64);
        let t = z.arg();
        (0..self.r)
            .map(|k| Complex64::from_polar(rho, (t + 2.0 * PI * k as f64) / self.r as f64))
            .collect()
    }

    /// Root of `w^r = z` lying on sheet `j`; on a cut the side picks the limit.
    pub fn root(&self, j: u32, z: Complex64, side: Option<Side>) -> Result<Complex64> {
        if j == 0 || j > self.r {
            return invalid(format!("sheet {j} outside 1..={}", self.r));
        }
        if z == Complex64::new(0.0, 0.0) {
            return Err(Error::Pole(format!("z = 0 is a pole of order {}", self.r - 1)));
        }
        let (theta, tilted) = if z.im != 0.0 {
            (z.arg(), z.arg())
        } else {
            if side.is_none() && self.on_cut(j, z.re) {
                return invalid(format!("z = {} is on a cut of sheet {j}; give a side", z.re));
            }
            let up = side.unwrap_or(Side::Upper) == Side::Upper;
            if z.re < 0.0 {
                let t = if up { PI } else { -PI };
                (t, t - t.signum() * TILT)
            } else {
                (0.0, if up { TILT } else { -TILT })
            }
        };
        let r = self.r as f64;
        let rho = z.norm().powf(1.0 / r);
        for k in 0..self.r {
            let mut pc = (tilted + 2.0 * PI * k as f64) / r;
            let mut p = (theta + 2.0 * PI * k as f64) / r;
            if pc > PI {
                pc -= 2.0 * PI;
                p -= 2.0 * PI;
            }
            if self.sheet_of_angle(pc) == j {
                return Ok(Complex64::from_polar(rho, p));
            }
        }
        Err(Error::Numerical("no root found on the requested sheet".into()))
    }

    /// `Psi_j(z)`, with boundary values on cuts taken from `side`.
    pub fn eval(&self, j: u32, z: Complex64, side: Option<Side>) -> Result<Complex64> {
        if j == 1 && (z - self.a).norm() <= 1e-14 * self.a {
            return Err(Error::Pole("z = a is a simple pole on sheet 1".into()));
        }
        let w = self.root(j, z, side)?;
        Ok(self.of_w(w))
    }

    /// Density `(Psi_{j,+} - Psi_{j,-})/(2 pi i) = Im Psi_{j,+}/pi` of component `j` at `s` in `Delta_j`.
    pub fn density(&self, j: u32, s: f64) -> f64 {
        if j == 0 || j >= self.r || !HalfLine::of_index(j as i32).contains_interior(s) {
            return 0.0;
        }
        let w = self.root(j, Complex64::new(s, 0.0), Some(Side::Upper)).unwrap();
        self.of_w(w).im / PI
    }

    /// Residue of `Psi_1` at `z = a`, as the mean of `(z - a) Psi_1(z)` over a small circle.
    pub fn residue_at_a(&self, radius: f64, n: usize) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..n {
            let e = Complex64::from_polar(radius * self.a, 2.0 * PI * (k as f64 + 0.5) / n as f64);
            acc += e * self.eval(1, self.a + e, None).unwrap();
        }
        acc / n as f64
    }
}

/// Sheet-`j` value `Psi_j(z)` of the function with parameters `p`.
pub fn psi_eval(p: &SheetedPsi, j: u32, z: Complex64, side: Option<Side>) -> Result<Complex64> {
    p.eval(j, z, side)
}

/// `log |(z^(1/r) - a^(1/r))/(z - a)|` with principal roots; the finite limit at `z = a`.
pub fn u_mu1_closed_form(r: u32, a: f64, z: Complex64) -> f64 {
    if r <= 1 {
        return 0.0;
    }
    let rf = r as f64;
    if (z - a).norm() <= 1e-12 * a {
        return -(rf * a.powf(1.0 - 1.0 / rf)).ln();
    }
    (z.powf(1.0 / rf) - a.powf(1.0 / rf)).norm().ln() - (z - a).norm().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn principal_value_at_four() {
        let p = SheetedPsi::new(2, 1.0).unwrap();
        let v = p.eval(1, c(4.0, 0.0), None).unwrap();
        assert!((v - 0.25).norm() < 1e-15);
    }

    #[test]
    fn density_r2_at_minus_one() {
        let p = SheetedPsi::new(2, 1.0).unwrap();
        assert!((p.density(1, -1.0) - 1.0 / (4.0 * PI)).abs() < 1e-15);
        // half the balayage of the point mass
        for s in [-0.01f64, -0.5, -3.0, -70.0] {
            let want = 1.0 / (2.0 * PI * (-s).sqrt() * (1.0 - s));
            assert!((p.density(1, s) - want).abs() < 1e-14 * want.max(1.0));
        }
    }

    #[test]
    fn poles_rejected() {
        let p = SheetedPsi::new(3, 2.0).unwrap();
        assert!(matches!(p.eval(1, c(0.0, 0.0), None), Err(Error::Pole(_))));
        assert!(matches!(p.eval(1, c(2.0, 0.0), None), Err(Error::Pole(_))));
        assert!(p.eval(2, c(2.0, 0.0), Some(Side::Upper)).is_ok());
        assert!(p.eval(2, c(2.0, 0.0), None).is_err());
    }

    #[test]
    fn residue_is_one() {
        for (r, a) in [(3, 2.0), (2, 0.5), (5, 3.0)] {
            let p = SheetedPsi::new(r, a).unwrap();
            assert!((p.residue_at_a(1e-3, 32) - 1.0).norm() < 1e-8);
        }
    }

    #[test]
    fn crosswise_gluing() {
        for r in 2..=5 {
            let p = SheetedPsi::new(r, 1.3).unwrap();
            for j in 1..r {
                let s = if j % 2 == 1 { -0.7 } else { 2.2 };
                let up = p.eval(j, c(s, 0.0), Some(Side::Upper)).unwrap();
                let down = p.eval(j + 1, c(s, 0.0), Some(Side::Lower)).unwrap();
                assert!((up - down).norm() < 1e-13, "r {r} j {j}");
                // the limit from a nearby point agrees
                let near = p.eval(j, c(s, 1e-9), None).unwrap();
                assert!((near - up).norm() < 1e-7);
            }
        }
    }

    #[test]
    fn sheets_biject_onto_roots() {
        let p = SheetedPsi::new(4, 0.5).unwrap();
        let z = c(-0.3, 1.7);
        let mut by_sheet: Vec<Complex64> = (1..=4).map(|j| p.eval(j, z, None).unwrap()).collect();
        let mut by_root: Vec<Complex64> = p.roots(z).into_iter().map(|w| p.of_w(w)).collect();
        let key = |v: &Complex64| (v.re, v.im);
        by_sheet.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
        by_root.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
        for (x, y) in by_sheet.iter().zip(&by_root) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn conjugation() {
        let p = SheetedPsi::new(3, 1.0).unwrap();
        let z = c(0.4, -2.0);
        for j in 1..=3 {
            let v = p.eval(j, z, None).unwrap();
            let w = p.eval(j, z.conj(), None).unwrap();
            assert!((v.conj() - w).norm() < 1e-14);
        }
    }

    #[test]
    fn sum_over_sheets_is_the_point_pole() {
        let p = SheetedPsi::new(3, 1.0).unwrap();
        let z = c(1.5, 0.8);
        let s: Complex64 = (1..=3).map(|j| p.eval(j, z, None).unwrap()).sum();
        assert!((s - 1.0 / (z - 1.0)).norm() < 1e-13);
    }

    #[test]
    fn closed_form_potential() {
        assert!((u_mu1_closed_form(2, 1.0, c(4.0, 0.0)) - (1.0f64 / 3.0).ln()).abs() < 1e-15);
        assert_eq!(u_mu1_closed_form(1, 2.0, c(-3.0, 1.0)), 0.0);
        let lim = u_mu1_closed_form(3, 2.0, c(2.0, 0.0));
        let near = u_mu1_closed_form(3, 2.0, c(2.0 + 1e-6, 0.0));
        assert!((lim - near).abs() < 1e-6);
    }

    #[test]
    fn positive_density_on_every_sheet() {
        for r in 2..=5 {
            let p = SheetedPsi::new(r, 1.0).unwrap();
            for j in 1..r {
                let sg = HalfLine::of_index(j as i32).sign();
                for k in -20..=20 {
                    let s = sg * 10f64.powf(k as f64 * 0.3);
                    assert!(p.density(j, s) > 0.0, "r {r} j {j} s {s}");
                }
            }
        }
    }
}
