use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use super::psi::{u_mu1_closed_form, SheetedPsi, Side};
use crate::error::{invalid, Result};
use crate::measure::{DiscreteMeasure, Grid, HalfLine, VectorFamily};
use crate::quad::{breakpoints, de_integrate, de_integrate_breaks, gl_integrate};

/// Step and reach of the quadratures in `u = log|s|`.
#[derive(Clone, Copy, Debug)]
pub struct OracleQuadrature {
    /// Trapezoid step in `u`.
    pub step: f64,
    /// Half-width of the `u` range, in units of `r`.
    pub reach_per_r: f64,
    pub de_tol: f64,
    /// Angular distance to a support ray below which the adaptive rule replaces the trapezoid.
    pub near_angle: f64,
}

impl Default for OracleQuadrature {
    fn default() -> Self {
        Self { step: 0.1, reach_per_r: 40.0, de_tol: 1e-12, near_angle: 1.0 }
    }
}

/// Closed-form family built from point masses: `mu_0 = sum w_k delta_{a_k}` and the
/// components `mu_1, ..., mu_{r-1}` with densities from the jumps of `Psi`.
#[derive(Clone, Debug)]
pub struct AnalyticFamily {
    r: u32,
    atoms: Vec<(SheetedPsi, f64)>,
    quad: OracleQuadrature,
    u_lo: f64,
    u_hi: f64,
    /// `density(s) |s|` at `u = log|s|` on the uniform grid `u_lo + k step`, per component `1..r-1`.
    tables: Vec<Vec<f64>>,
}

impl AnalyticFamily {
    pub fn point_mass(r: u32, a: f64) -> Result<Self> {
        Self::mixture(r, &[(a, 1.0)], OracleQuadrature::default())
    }

    /// Family of `sum_k w_k delta_{a_k}`; linear in the weights.
    pub fn mixture(r: u32, atoms: &[(f64, f64)], quad: OracleQuadrature) -> Result<Self> {
        if atoms.is_empty() {
            return invalid("mixture needs at least one atom");
        }
        if atoms.iter().any(|&(_, w)| !(w >= 0.0 && w.is_finite())) {
            return invalid("mixture weights must be nonnegative");
        }
        let psis = atoms
            .iter()
            .map(|&(a, w)| SheetedPsi::new(r, a).map(|p| (p, w)))
            .collect::<Result<Vec<_>>>()?;
        let lmin = atoms.iter().map(|p| p.0.ln()).fold(f64::INFINITY, f64::min);
        let lmax = atoms.iter().map(|p| p.0.ln()).fold(f64::NEG_INFINITY, f64::max);
        let reach = quad.reach_per_r * r as f64;
        let mut fam = Self { r, atoms: psis, quad, u_lo: lmin - reach, u_hi: lmax + reach, tables: Vec::new() };
        let n = ((fam.u_hi - fam.u_lo) / quad.step).ceil() as usize;
        let h = (fam.u_hi - fam.u_lo) / n as f64;
        fam.quad.step = h;
        for j in 1..r {
            let sg = HalfLine::of_index(j as i32).sign();
            let g = (0..=n)
                .map(|k| {
                    let s = sg * (fam.u_lo + h * k as f64).exp();
                    fam.density(j, s) * s.abs()
                })
                .collect();
            fam.tables.push(g);
        }
        Ok(fam)
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    /// `(a_k, w_k)` of the base measure.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        self.atoms.iter().map(|(p, w)| (p.a(), *w)).collect()
    }

    fn table(&self, j: u32) -> &[f64] {
        &self.tables[(j - 1) as usize]
    }

    /// Trapezoid nodes `(s, weight)` of component `j`.
    fn nodes(&self, j: u32) -> impl Iterator<Item = (f64, f64)> + '_ {
        let (sg, h) = (Self::sign(j), self.quad.step);
        self.table(j).iter().enumerate().map(move |(k, &g)| (sg * (self.u_lo + h * k as f64).exp(), h * g))
    }

    fn sign(j: u32) -> f64 {
        HalfLine::of_index(j as i32).sign()
    }

    /// Closed-form density of component `j` at `s`; zero off `Delta_j`.
    pub fn density(&self, j: u32, s: f64) -> f64 {
        self.atoms.iter().map(|(p, w)| w * p.density(j, s)).sum()
    }

    /// Total mass of component `j` by quadrature (`j = 0` is the base measure).
    pub fn mass(&self, j: u32) -> f64 {
        match j {
            0 => self.atoms.iter().map(|p| p.1).sum(),
            j if j >= self.r => 0.0,
            j => self.table(j).iter().sum::<f64>() * self.quad.step,
        }
    }

    /// Angular distance from `z` to the ray `Delta_j`, in `[0, pi]`.
    fn angle_to_ray(j: u32, z: Complex64) -> f64 {
        let t = z.arg().abs();
        if Self::sign(j) > 0.0 {
            t
        } else {
            PI - t
        }
    }

    fn near_ray(&self, j: u32, z: Complex64) -> bool {
        Self::angle_to_ray(j, z) < self.quad.near_angle && z.norm() > 0.0
    }

    fn adaptive<F: Fn(f64) -> f64>(&self, f: &F, centre: Option<f64>) -> f64 {
        let extra: Vec<f64> = centre.into_iter().collect();
        de_integrate_breaks(f, &breakpoints(self.u_lo, self.u_hi, 8.0, &extra), self.quad.de_tol)
    }

    /// Logarithmic potential of component `j` at `z`.
    pub fn potential(&self, j: u32, z: Complex64) -> f64 {
        if j == 0 {
            return self.atoms.iter().map(|(p, w)| -w * (z - p.a()).norm().ln()).sum();
        }
        if j >= self.r {
            return 0.0;
        }
        if z.im == 0.0 && HalfLine::of_index(j as i32).contains_interior(z.re) {
            return self.potential_on_support(j, z.re);
        }
        if self.near_ray(j, z) {
            let sg = Self::sign(j);
            let f = |u: f64| {
                let s = sg * u.exp();
                let d = (z - s).norm();
                if d == 0.0 {
                    0.0
                } else {
                    -d.ln() * self.density(j, s) * s.abs()
                }
            };
            return self.adaptive(&f, Some(z.norm().ln()));
        }
        self.nodes(j).map(|(s, wt)| -wt * (z - s).norm().ln()).sum()
    }

    /// Potential at `x` inside `Delta_j` from a grid in `log|s|` passing through `log|x|`.
    fn potential_on_support(&self, j: u32, x: f64) -> f64 {
        let (sg, h) = (Self::sign(j), self.quad.step);
        let u0 = x.abs().ln();
        let below = ((u0 - self.u_lo) / h).ceil().max(0.0) as usize + 1;
        let above = ((self.u_hi - u0) / h).ceil().max(0.0) as usize + 1;
        let g: Vec<f64> = (0..below + above + 1)
            .map(|k| {
                let s = sg * (u0 + h * (k as f64 - below as f64)).exp();
                self.density(j, s) * s.abs()
            })
            .collect();
        let mass = g.iter().sum::<f64>() * h;
        -u0 * mass - log_singular_sum(&g, below, h)
    }

    pub fn potential_at(&self, j: u32, x: f64) -> f64 {
        self.potential(j, Complex64::new(x, 0.0))
    }

    /// Cauchy transform `int dmu_j(s)/(z - s)` by quadrature; on `Delta_j` the side selects
    /// the boundary value `PV -+ i pi density`.
    pub fn cauchy(&self, j: u32, z: Complex64, side: Option<Side>) -> Result<Complex64> {
        if j == 0 {
            return Ok(self.atoms.iter().map(|(p, w)| *w / (z - p.a())).sum());
        }
        if j >= self.r {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let sg = Self::sign(j);
        if z.im == 0.0 && HalfLine::of_index(j as i32).contains_interior(z.re) {
            let Some(side) = side else {
                return invalid("boundary value on the support needs a side");
            };
            let pv = self.principal_value(j, z.re);
            let jump = PI * self.density(j, z.re);
            return Ok(match side {
                Side::Upper => Complex64::new(pv, -jump),
                Side::Lower => Complex64::new(pv, jump),
            });
        }
        if self.near_ray(j, z) {
            let c = z.norm().ln();
            let part = |re: bool| {
                let f = |u: f64| {
                    let s = sg * u.exp();
                    let v = self.density(j, s) * s.abs() / (z - s);
                    if re {
                        v.re
                    } else {
                        v.im
                    }
                };
                self.adaptive(&f, Some(c))
            };
            return Ok(Complex64::new(part(true), part(false)));
        }
        Ok(self.nodes(j).map(|(s, wt)| wt / (z - s)).sum())
    }

    /// `PV int density(s)/(x - s) ds` for `x` inside `Delta_j`.
    ///
    /// With `t = log|s| - log|x|` the kernel is `sign(x) e^t/(1 - e^t)`; a trapezoid whose nodes sit
    /// half a step off `t = 0` pairs the simple pole symmetrically.
    pub fn principal_value(&self, j: u32, x: f64) -> f64 {
        let sg = Self::sign(j);
        let u0 = x.abs().ln();
        let h = self.quad.step * 0.5;
        let kmin = ((self.u_lo - u0) / h).floor() as i64 - 1;
        let kmax = ((self.u_hi - u0) / h).ceil() as i64 + 1;
        let mut acc = 0.0;
        for k in kmin..=kmax {
            let t = (k as f64 + 0.5) * h;
            let s = sg * (u0 + t).exp();
            acc += self.density(j, s) / ((-t).exp() - 1.0);
        }
        sg * acc * h
    }

    /// Telescoped closed form `F_0 = sum w/(z - a)`, `F_j = F_{j-1} - Psi_j`.
    pub fn cauchy_closed_form(&self, j: u32, z: Complex64, side: Option<Side>) -> Result<Complex64> {
        let mut f: Complex64 = self.atoms.iter().map(|(p, w)| *w / (z - p.a())).sum();
        for k in 1..=j.min(self.r) {
            for (p, w) in &self.atoms {
                f -= p.eval(k, z, side.or(Some(Side::Upper)))? * *w;
            }
        }
        Ok(f)
    }

    /// `int log|(z^(1/r) - a^(1/r))/(z - a)| dmu_0(a)`.
    pub fn u_mu1_closed_form(&self, z: Complex64) -> f64 {
        self.atoms.iter().map(|(p, w)| w * u_mu1_closed_form(self.r, p.a(), z)).sum()
    }

    /// `I(mu_j, mu_k)` by quadrature; `I(mu_0, mu_0)` is infinite and not available.
    pub fn mutual_energy(&self, j: u32, k: u32) -> f64 {
        let (j, k) = if j <= k { (j, k) } else { (k, j) };
        if k >= self.r {
            return 0.0;
        }
        if j == 0 {
            if k == 0 {
                return f64::INFINITY;
            }
            return self.atoms.iter().map(|(p, w)| w * self.potential_at(k, p.a())).sum();
        }
        // both tables share one grid in u, so the kernel depends only on the index offset
        let h = self.quad.step;
        let (gj, gk) = (self.table(j), self.table(k));
        let n = gj.len();
        let mk = gk.iter().sum::<f64>() * h;
        let same = (j + k) % 2 == 0;
        let kernel: Vec<f64> = (0..2 * n - 1)
            .map(|i| {
                let t = (i as f64 - (n - 1) as f64) * h;
                if same {
                    log_abs_one_minus_exp(t)
                } else {
                    log_one_plus_exp(t)
                }
            })
            .collect();
        let mut total = 0.0;
        for (a, &ga) in gj.iter().enumerate() {
            if ga == 0.0 {
                continue;
            }
            let u = self.u_lo + h * a as f64;
            let mut acc = 0.0;
            for (b, &gb) in gk.iter().enumerate() {
                if b != a || !same {
                    acc += gb * kernel[b + n - 1 - a];
                }
            }
            let mut inner = acc * h;
            if same {
                inner += singular_correction(gk, a, h);
            }
            total += h * ga * (-u * mk - inner);
        }
        total
    }

    pub fn energy(&self, j: u32) -> f64 {
        self.mutual_energy(j, j)
    }

    /// `2 U^{mu_j} - U^{mu_{j-1}} - U^{mu_{j+1}}` at `x`.
    pub fn balayage_defect(&self, j: u32, x: f64) -> f64 {
        2.0 * self.potential_at(j, x) - self.potential_at(j - 1, x) - self.potential_at(j + 1, x)
    }

    /// Components on the given grids (component 0 as atoms); cell masses by quadrature.
    pub fn discretize(&self, grids: &[Arc<Grid>]) -> Result<VectorFamily> {
        if grids.len() + 1 != self.r as usize {
            return invalid(format!("need {} grids, got {}", self.r - 1, grids.len()));
        }
        let pts: Vec<f64> = self.atoms.iter().map(|p| p.0.a()).collect();
        let g0 = Arc::new(Grid::atoms(HalfLine::Positive, &pts)?);
        let mut ms = vec![DiscreteMeasure::new(g0, self.atoms.iter().map(|p| p.1).collect())?];
        for (i, g) in grids.iter().enumerate() {
            let j = i as u32 + 1;
            if g.half_line() != HalfLine::of_index(j as i32) {
                return invalid(format!("grid {j} is on the wrong half-line"));
            }
            let masses = g.cells().iter().map(|c| self.cell_mass(j, c.lo.abs().min(c.hi.abs()), c.lo.abs().max(c.hi.abs()))).collect();
            ms.push(DiscreteMeasure::new(g.clone(), masses)?);
        }
        VectorFamily::new(0, ms)
    }

    /// Mass of component `j` over `lo <= |s| <= hi`.
    pub fn cell_mass(&self, j: u32, lo: f64, hi: f64) -> f64 {
        let sg = Self::sign(j);
        let f = |u: f64| {
            let s = sg * u.exp();
            self.density(j, s) * s.abs()
        };
        let a = if lo > 0.0 { lo.ln() } else { self.u_lo };
        let b = hi.ln();
        if b <= a {
            return 0.0;
        }
        if b - a < 0.5 {
            return gl_integrate(f, a, b, 12);
        }
        de_integrate(&f, a, b, 1e-15)
    }
}

/// `log|1 - e^t|` without cancellation.
fn log_abs_one_minus_exp(t: f64) -> f64 {
    if t < 0.0 {
        (-t.exp_m1()).ln()
    } else {
        t + (-(-t).exp_m1()).ln()
    }
}

/// `log(1 + e^t)` without overflow.
fn log_one_plus_exp(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

const ZETA_PRIME_M2: f64 = -0.030448457058393270780;
const ZETA_PRIME_M4: f64 = 0.007983811450268624280;

/// `int g(u_c + t) log|1 - e^t| dt` from samples of `g` on a uniform grid with node `c` at `t = 0`.
///
/// Trapezoid rule with the correction terms for a logarithmic singularity at a node; the
/// error is `O(h^7)` for smooth `g`.
fn log_singular_sum(g: &[f64], c: usize, h: f64) -> f64 {
    let mut acc = 0.0;
    for (m, &v) in g.iter().enumerate() {
        if m != c && v != 0.0 {
            acc += v * log_abs_one_minus_exp((m as f64 - c as f64) * h);
        }
    }
    h * acc + singular_correction(g, c, h)
}

/// Node term and derivative corrections of [`log_singular_sum`].
fn singular_correction(g: &[f64], c: usize, h: f64) -> f64 {
    let mut out = h * g[c] * (h / (2.0 * PI)).ln();
    if c >= 3 && c + 3 < g.len() {
        let f = |i: i64| g[(c as i64 + i) as usize];
        let d2 = (-f(2) + 16.0 * f(1) - 30.0 * f(0) + 16.0 * f(-1) - f(-2)) / (12.0 * h * h);
        let d4 = (-f(3) + 12.0 * f(2) - 39.0 * f(1) + 56.0 * f(0) - 39.0 * f(-1) + 12.0 * f(-2) - f(-3)) / (6.0 * h.powi(4));
        out += ZETA_PRIME_M2 * d2 * h.powi(3) + ZETA_PRIME_M4 * d4 * h.powi(5) / 12.0;
    }
    out
}

/// Oracle family of a unit point mass at `a`, discretized on `grids` (components `1..r-1`).
///
/// Component 0 of the result is `delta_a` on a one-atom grid.
pub fn point_mass_family(r: u32, a: f64, grids: &[Arc<Grid>]) -> Result<VectorFamily> {
    AnalyticFamily::point_mass(r, a)?.discretize(grids)
}

/// Mixture of point-mass families over `mu`, with `n` Gauss-Legendre nodes per cell.
pub fn superpose(mu: &DiscreteMeasure, r: u32, n: usize) -> Result<AnalyticFamily> {
    if mu.half_line() != HalfLine::Positive {
        return invalid("mu must live on (0, inf)");
    }
    let mut atoms = Vec::new();
    for (c, &m) in mu.grid().cells().iter().zip(mu.masses()) {
        if m == 0.0 {
            continue;
        }
        if c.lo <= 0.0 {
            return invalid("mu must stay away from 0");
        }
        if c.is_atom() {
            atoms.push((c.lo, m));
            continue;
        }
        let (mid, half) = (c.mid(), 0.5 * c.width());
        for &(t, w) in crate::quad::gauss_legendre(n) {
            atoms.push((mid + half * t, 0.5 * w * m));
        }
    }
    AnalyticFamily::mixture(r, &atoms, OracleQuadrature::default())
}

/// Default oracle grids for `r`, `a`: log-graded half-lines reaching `a * 10^decades`.
pub fn oracle_grids(r: u32, a: f64, per_decade: f64, band_per_decade: f64, decades: f64) -> Result<Vec<Arc<Grid>>> {
    (1..r)
        .map(|j| {
            Grid::log_graded(
                HalfLine::of_index(j as i32),
                1e-10 * a,
                a * 10f64.powf(decades),
                per_decade,
                &[(1e-3 * a, 1e3 * a, band_per_decade)],
            )
            .map(Arc::new)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::psi::u_mu1_closed_form as closed;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn masses_telescope() {
        for r in 2..=5 {
            let f = AnalyticFamily::point_mass(r, 1.7).unwrap();
            for j in 1..r {
                let want = 1.0 - j as f64 / r as f64;
                assert!((f.mass(j) - want).abs() < 1e-9, "r {r} j {j}: {}", f.mass(j));
            }
        }
    }

    #[test]
    fn potential_matches_closed_form() {
        let f = AnalyticFamily::point_mass(3, 2.0).unwrap();
        for z in [c(-5.0, 0.0), c(0.5, 0.0), c(7.0, 3.0), c(-4.0, 0.2), c(-1e3, -1e-3), c(5.0, 0.0)] {
            let d = f.potential(1, z) - closed(3, 2.0, z);
            assert!(d.abs() < 1e-9, "{z}: {d}");
        }
    }

    #[test]
    fn balayage_identity_holds() {
        let f = AnalyticFamily::point_mass(4, 0.5).unwrap();
        for j in 1..4 {
            let sg = HalfLine::of_index(j as i32).sign();
            for x in [1e-3, 0.2, 0.5, 3.0, 1e4] {
                let d = f.balayage_defect(j, sg * x);
                assert!(d.abs() < 1e-9, "j {j} x {x}: {d}");
            }
        }
    }

    #[test]
    fn cauchy_transforms_agree() {
        let f = AnalyticFamily::point_mass(3, 1.0).unwrap();
        assert!((AnalyticFamily::point_mass(2, 1.0).unwrap().cauchy_closed_form(1, c(4.0, 0.0), None).unwrap() - 1.0 / 12.0).norm() < 1e-15);
        for z in [c(4.0, 0.0), c(-2.0, 1.0), c(0.3, -0.1), c(-3.0, -0.05)] {
            for j in 1..3u32 {
                if z.im == 0.0 && HalfLine::of_index(j as i32).contains(z.re) {
                    continue;
                }
                let q = f.cauchy(j, z, None).unwrap();
                let e = f.cauchy_closed_form(j, z, None).unwrap();
                assert!((q - e).norm() < 1e-9, "j {j} z {z}: {q} vs {e}");
            }
        }
        // boundary relation on each support
        for j in 1..3u32 {
            let sg = HalfLine::of_index(j as i32).sign();
            for x in [0.01, 0.9, 4.0, 300.0] {
                let x = sg * x;
                let p = f.cauchy(j, c(x, 0.0), Some(Side::Upper)).unwrap();
                let m = f.cauchy(j, c(x, 0.0), Some(Side::Lower)).unwrap();
                let rhs = f.cauchy(j - 1, c(x, 0.0), None).unwrap() + f.cauchy(j + 1, c(x, 0.0), None).unwrap();
                assert!((p + m - rhs).norm() < 1e-9, "j {j} x {x}: {}", (p + m - rhs).norm());
                let e = f.cauchy_closed_form(j, c(x, 0.0), Some(Side::Upper)).unwrap();
                assert!((p - e).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn energy_identity() {
        for (r, a) in [(2, 1.0), (3, 0.5), (4, 3.0)] {
            let f = AnalyticFamily::point_mass(r, a).unwrap();
            let lhs: f64 = (1..r).map(|j| f.energy(j)).sum::<f64>() - (1..r - 1).map(|j| f.mutual_energy(j, j + 1)).sum::<f64>();
            let rhs = 0.5 * f.mutual_energy(0, 1);
            let exact = -0.5 * (r as f64 * a.powf(1.0 - 1.0 / r as f64)).ln();
            assert!((lhs - rhs).abs() < 1e-8, "r {r}: {lhs} vs {rhs}");
            assert!((rhs - exact).abs() < 1e-9);
        }
    }

    #[test]
    fn mixture_is_linear() {
        let g = Arc::new(Grid::uniform(HalfLine::Positive, 2.0, 2).unwrap());
        let mu = DiscreteMeasure::new(g, vec![0.0, 1.0]).unwrap();
        let f = superpose(&mu, 2, 8).unwrap();
        assert!((f.mass(1) - 0.5).abs() < 1e-9);
        for x in [-0.1, -2.0, -50.0] {
            assert!(f.balayage_defect(1, x).abs() < 1e-9);
        }
        let z = c(-3.0, 0.0);
        let direct = gl_integrate(|a| closed(2, a, z), 1.0, 2.0, 20);
        assert!((f.u_mu1_closed_form(z) - direct).abs() < 1e-12);
        assert!((f.potential(1, z) - direct).abs() < 1e-9);
        let bad = DiscreteMeasure::uniform(Arc::new(Grid::uniform(HalfLine::Positive, 1.0, 3).unwrap()), 1.0);
        assert!(superpose(&bad, 2, 8).is_err());
    }

    #[test]
    fn single_atom_mixture_is_the_point_mass() {
        let g = Arc::new(Grid::atoms(HalfLine::Positive, &[1.5]).unwrap());
        let f = superpose(&DiscreteMeasure::new(g, vec![1.0]).unwrap(), 3, 8).unwrap();
        let p = AnalyticFamily::point_mass(3, 1.5).unwrap();
        for s in [-0.2, -9.0] {
            assert_eq!(f.density(1, s), p.density(1, s));
        }
    }

    #[test]
    fn potential_normalization_at_infinity() {
        let f = AnalyticFamily::point_mass(3, 1.0).unwrap();
        for j in 1..3u32 {
            let sg = HalfLine::of_index(j as i32).sign();
            let x = sg * 1e12;
            let want = -(1.0 - j as f64 / 3.0) * x.abs().ln();
            assert!((f.potential_at(j, x) - want).abs() < 1e-3);
        }
    }
}
