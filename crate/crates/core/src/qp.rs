//! Convex quadratic minimization over a scaled probability simplex.
//!
//! `min 1/2 x'Hx + b'x` subject to `x >= 0`, `sum x = mass`. Accelerated projected
//! gradient finds the active set, then a primal active-set method polishes it with
//! exact equality-constrained solves.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Debug)]
pub struct QpOptions {
    pub max_gradient_iters: usize,
    pub max_active_iters: usize,
    /// KKT tolerance in gradient units.
    pub kkt_tol: f64,
    /// Relative weight below which a node counts as inactive.
    pub weight_floor: f64,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self { max_gradient_iters: 3000, max_active_iters: 200, kkt_tol: 1e-10, weight_floor: 1e-10 }
    }
}

#[derive(Clone, Debug)]
pub struct QpResult {
    pub x: Vec<f64>,
    /// Gradient `Hx + b` at the solution.
    pub gradient: Vec<f64>,
    /// Multiplier of the mass constraint.
    pub ell: f64,
    pub objective: f64,
    /// Objective after each accepted iterate.
    pub history: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

fn objective(h: &DMatrix<f64>, b: &DVector<f64>, x: &DVector<f64>) -> f64 {
    0.5 * x.dot(&(h * x)) + b.dot(x)
}

/// Euclidean projection onto `{x >= 0, sum x = mass}`.
pub fn project_simplex(v: &mut [f64], mass: f64) {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (k, &x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - mass) / (k + 1) as f64;
        if x - t > 0.0 {
            tau = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - tau).max(0.0);
    }
}

/// Largest eigenvalue of `H` restricted to zero-sum vectors.
fn lipschitz(h: &DMatrix<f64>) -> f64 {
    let n = h.nrows();
    if n == 1 {
        return 1.0;
    }
    let center = |v: &mut DVector<f64>| {
        let m = v.mean();
        v.add_scalar_mut(-m);
    };
    let mut v = DVector::from_fn(n, |i, _| ((i * 7919) % 104729) as f64 / 104729.0 - 0.5);
    center(&mut v);
    let mut lam = 0.0;
    for _ in 0..100 {
        let nv = v.norm();
        if nv == 0.0 {
            break;
        }
        v /= nv;
        let mut w = h * &v;
        center(&mut w);
        let new = v.dot(&w);
        v = w;
        if (new - lam).abs() < 1e-6 * new.abs() {
            lam = new;
            break;
        }
        lam = new;
    }
    1.05 * lam.abs().max(1e-300)
}

pub fn simplex_qp(h: &DMatrix<f64>, b: &[f64], mass: f64, x0: Option<&[f64]>, opts: &QpOptions) -> QpResult {
    let n = b.len();
    let bv = DVector::from_column_slice(b);
    if n == 1 {
        let x = DVector::from_element(1, mass);
        let g = h * &x + &bv;
        let f = objective(h, &bv, &x);
        return QpResult {
            x: vec![mass],
            gradient: vec![g[0]],
            ell: g[0],
            objective: f,
            history: vec![f],
            converged: true,
            iterations: 0,
        };
    }
    let mut x = match x0 {
        Some(init) if init.len() == n => {
            let mut v = init.to_vec();
            project_simplex(&mut v, mass);
            DVector::from_vec(v)
        }
        _ => DVector::from_element(n, mass / n as f64),
    };
    let mut f = objective(h, &bv, &x);
    let mut history = vec![f];
    let floor = opts.weight_floor * mass;

    // phase 1: monotone accelerated projected gradient
    let l = lipschitz(h);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut stable = 0usize;
    let mut iters = 0usize;
    let support = |v: &DVector<f64>| v.iter().map(|&w| w > floor).collect::<Vec<bool>>();
    let mut last_support = support(&x);
    for _ in 0..opts.max_gradient_iters {
        iters += 1;
        let g = h * &y + &bv;
        let mut z: Vec<f64> = (0..n).map(|i| y[i] - g[i] / l).collect();
        project_simplex(&mut z, mass);
        let mut xn = DVector::from_vec(z);
        let mut fn_ = objective(h, &bv, &xn);
        if fn_ > f {
            // restart from the last accepted point with a plain gradient step
            t = 1.0;
            let g = h * &x + &bv;
            let mut z: Vec<f64> = (0..n).map(|i| x[i] - g[i] / l).collect();
            project_simplex(&mut z, mass);
            xn = DVector::from_vec(z);
            fn_ = objective(h, &bv, &xn);
            if fn_ > f {
                break;
            }
        }
        let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &xn + (&xn - &x) * ((t - 1.0) / tn);
        t = tn;
        x = xn;
        f = fn_;
        history.push(f);
        let s = support(&x);
        if s == last_support {
            stable += 1;
            if stable >= 60 {
                break;
            }
        } else {
            stable = 0;
            last_support = s;
        }
    }

    // phase 2: primal active set
    let mut free: Vec<bool> = x.iter().map(|&w| w > floor).collect();
    for i in 0..n {
        if !free[i] {
            x[i] = 0.0;
        }
    }
    let s = x.sum();
    if s > 0.0 {
        x *= mass / s;
    } else {
        x = DVector::from_element(n, mass / n as f64);
        free = vec![true; n];
    }
    f = objective(h, &bv, &x);
    let mut converged = false;
    let mut ell = 0.0;
    for _ in 0..opts.max_active_iters {
        iters += 1;
        let idx: Vec<usize> = (0..n).filter(|&i| free[i]).collect();
        let m = idx.len();
        let mut kkt = DMatrix::zeros(m + 1, m + 1);
        let mut rhs = DVector::zeros(m + 1);
        for (a, &i) in idx.iter().enumerate() {
            for (c, &j) in idx.iter().enumerate() {
                kkt[(a, c)] = h[(i, j)];
            }
            kkt[(a, m)] = 1.0;
            kkt[(m, a)] = 1.0;
            rhs[a] = -bv[i];
        }
        rhs[m] = mass;
        let sol = match kkt.lu().solve(&rhs) {
            Some(s) => s,
            None => break,
        };
        let p: Vec<f64> = sol.iter().take(m).copied().collect();
        if p.iter().any(|&v| v < 0.0) {
            let mut alpha = 1.0f64;
            let mut block = None;
            for (a, &i) in idx.iter().enumerate() {
                if p[a] < 0.0 {
                    let step = x[i] / (x[i] - p[a]);
                    if step < alpha {
                        alpha = step;
                        block = Some(i);
                    }
                }
            }
            for (a, &i) in idx.iter().enumerate() {
                x[i] += alpha * (p[a] - x[i]);
                if x[i] <= 0.0 {
                    x[i] = 0.0;
                    free[i] = false;
                }
            }
            if let Some(i) = block {
                x[i] = 0.0;
                free[i] = false;
            }
            let fn_ = objective(h, &bv, &x);
            f = fn_.min(f);
            history.push(fn_);
            continue;
        }
        for (a, &i) in idx.iter().enumerate() {
            x[i] = p[a];
        }
        f = objective(h, &bv, &x);
        history.push(f);
        ell = -sol[m];
        let g = h * &x + &bv;
        let mut worst = Vec::new();
        for i in 0..n {
            if !free[i] && g[i] - ell < -opts.kkt_tol {
                worst.push((g[i] - ell, i));
            }
        }
        if worst.is_empty() {
            converged = true;
            break;
        }
        worst.sort_by(|a, b| a.0.total_cmp(&b.0));
        let add = (worst.len() / 4).max(1);
        for &(_, i) in worst.iter().take(add) {
            free[i] = true;
        }
    }
    let g = h * &x + &bv;
    let w: f64 = x.iter().filter(|&&v| v > floor).sum();
    if w > 0.0 {
        ell = (0..n).filter(|&i| x[i] > floor).map(|i| x[i] * g[i]).sum::<f64>() / w;
    }
    QpResult {
        x: x.iter().copied().collect(),
        gradient: g.iter().copied().collect(),
        ell,
        objective: objective(h, &bv, &x),
        history,
        converged,
        iterations: iters,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn projection_examples() {
        let mut v = vec![0.5, 0.5, 2.0];
        project_simplex(&mut v, 1.0);
        assert_eq!(v, vec![0.0, 0.0, 1.0]);
        let mut v = vec![0.2, 0.2];
        project_simplex(&mut v, 1.0);
        assert_eq!(v, vec![0.5, 0.5]);
    }

    #[test]
    fn small_problem_with_active_bound() {
        // min x1^2 + x2^2 + x3^2 + 3 x3 on the simplex: x3 = 0, x1 = x2 = 1/2
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 2.0, 2.0]));
        let r = simplex_qp(&h, &[0.0, 0.0, 3.0], 1.0, None, &QpOptions::default());
        assert!(r.converged);
        assert!((r.x[0] - 0.5).abs() < 1e-12 && (r.x[1] - 0.5).abs() < 1e-12 && r.x[2] == 0.0);
        assert!((r.ell - 1.0).abs() < 1e-12);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    proptest! {
        #[test]
        fn kkt_holds_on_random_problems(n in 2usize..25, seed in 0u64..500, mass in 0.1f64..3.0) {
            let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let mut rnd = || { s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); ((s >> 11) as f64) / ((1u64 << 53) as f64) - 0.5 };
            let a = DMatrix::from_fn(n, n, |_, _| rnd());
            let h = &a * a.transpose() + DMatrix::identity(n, n) * 0.1;
            let b: Vec<f64> = (0..n).map(|_| 3.0 * rnd()).collect();
            let r = simplex_qp(&h, &b, mass, None, &QpOptions::default());
            prop_assert!(r.converged);
            prop_assert!((r.x.iter().sum::<f64>() - mass).abs() < 1e-10 * mass);
            prop_assert!(r.x.iter().all(|&v| v >= 0.0));
            for i in 0..n {
                if r.x[i] > 1e-10 * mass {
                    prop_assert!((r.gradient[i] - r.ell).abs() < 1e-8);
                } else {
                    prop_assert!(r.gradient[i] - r.ell > -1e-8);
                }
            }
            prop_assert!(r.history.windows(2).all(|w| w[1] <= w[0] + 1e-9 * (1.0 + w[0].abs())));
        }
    }
}
