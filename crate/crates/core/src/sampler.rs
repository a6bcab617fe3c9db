//! Metropolis sampler for the n-particle density
//! `prod (x_k - x_j)(x_k^theta - x_j^theta) prod exp(-n V(x_j))` on `[0, inf)`.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::measure::ExternalField;
use crate::scalar::ScalarSolution;

/// `log |x^theta - y^theta|`, expanded when the two powers nearly cancel.
fn log_power_gap(x: f64, y: f64, theta: f64) -> f64 {
    let (lo, hi) = if x < y { (x, y) } else { (y, x) };
    if lo > 0.0 && (hi - lo) < 1e-6 * hi {
        // x^t - y^t = y^t expm1(t log1p((x - y)/y))
        return theta * lo.ln() + (theta * ((hi - lo) / lo).ln_1p()).exp_m1().ln();
    }
    (hi.powf(theta) - lo.powf(theta)).ln()
}

/// Log of the unnormalized density; `-inf` for negative or coincident positions.
pub fn log_density_unnormalized(x: &[f64], theta: f64, v: &ExternalField) -> f64 {
    if x.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return f64::NEG_INFINITY;
    }
    let n = x.len();
    let mut acc = 0.0;
    for k in 0..n {
        for j in 0..k {
            let d = (x[k] - x[j]).abs();
            if d == 0.0 {
                return f64::NEG_INFINITY;
            }
            acc += d.ln() + log_power_gap(x[k], x[j], theta);
        }
    }
    acc - n as f64 * x.iter().map(|&p| v.eval(p)).sum::<f64>()
}

#[derive(Clone, Debug, Serialize)]
pub struct SamplerOptions {
    pub sweeps: usize,
    /// Fraction of sweeps discarded.
    pub burn_in: f64,
    pub target_acceptance: f64,
    pub initial_step: f64,
    pub max_particles: usize,
    pub bins: usize,
    /// Histogram range; chosen after burn-in when absent.
    pub hist_max: Option<f64>,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self {
            sweeps: 200_000,
            burn_in: 0.2,
            target_acceptance: 0.35,
            initial_step: 0.5,
            max_particles: 400,
            bins: 4000,
            hist_max: None,
        }
    }
}

/// Pooled post-burn-in positions as a histogram on `hi (k/bins)^2` edges.
#[derive(Clone, Debug, Serialize)]
pub struct ChainStats {
    pub n: usize,
    pub theta: f64,
    pub seed: u64,
    pub chains: usize,
    pub sweeps: usize,
    pub burn_in: usize,
    pub step: f64,
    pub acceptance: f64,
    /// Integrated autocorrelation time of the mean position, in sweeps.
    pub autocorrelation: f64,
    pub hist_max: f64,
    pub counts: Vec<u64>,
    /// Positions beyond `hist_max`.
    pub overflow: u64,
    pub max_position: f64,
}

impl ChainStats {
    pub fn edges(&self) -> Vec<f64> {
        let k = self.counts.len();
        (0..=k).map(|i| self.hist_max * (i as f64 / k as f64).powi(2)).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.overflow
    }

    fn bin(&self, x: f64) -> Option<usize> {
        if !(x < self.hist_max) {
            return None;
        }
        let k = self.counts.len();
        Some((((x / self.hist_max).max(0.0).sqrt() * k as f64) as usize).min(k - 1))
    }

    /// Histogram of a fixed sample set; mainly for tests and replay.
    pub fn from_samples(samples: &[f64], hist_max: f64, bins: usize) -> Self {
        let mut s = Self::empty(0, 0.0, 0, hist_max, bins);
        for &x in samples {
            s.record(x);
        }
        s
    }

    fn empty(n: usize, theta: f64, seed: u64, hist_max: f64, bins: usize) -> Self {
        Self {
            n,
            theta,
            seed,
            chains: 1,
            sweeps: 0,
            burn_in: 0,
            step: 0.0,
            acceptance: 0.0,
            autocorrelation: 0.0,
            hist_max,
            counts: vec![0; bins],
            overflow: 0,
            max_position: 0.0,
        }
    }

    fn record(&mut self, x: f64) {
        match self.bin(x) {
            Some(b) => self.counts[b] += 1,
            None => self.overflow += 1,
        }
        self.max_position = self.max_position.max(x);
    }

    /// Empirical CDF, exact at the edges and linear inside a bin.
    pub fn cdf(&self, x: f64) -> f64 {
        let tot = self.total() as f64;
        if tot == 0.0 || x <= 0.0 {
            return 0.0;
        }
        match self.bin(x) {
            None => 1.0 - self.overflow as f64 / tot,
            Some(b) => {
                let below: u64 = self.counts[..b].iter().sum();
                let k = self.counts.len() as f64;
                let (lo, hi) = (self.hist_max * (b as f64 / k).powi(2), self.hist_max * ((b + 1) as f64 / k).powi(2));
                (below as f64 + self.counts[b] as f64 * (x - lo) / (hi - lo)) / tot
            }
        }
    }

    /// Adds another chain on the same histogram.
    pub fn merge(&mut self, other: &ChainStats) -> Result<()> {
        if other.counts.len() != self.counts.len() || other.hist_max != self.hist_max {
            return invalid("chains use different histograms");
        }
        let (a, b) = (self.total() as f64, other.total() as f64);
        for (c, o) in self.counts.iter_mut().zip(&other.counts) {
            *c += o;
        }
        self.overflow += other.overflow;
        self.max_position = self.max_position.max(other.max_position);
        let w = |x: f64, y: f64| if a + b > 0.0 { (x * a + y * b) / (a + b) } else { x };
        self.acceptance = w(self.acceptance, other.acceptance);
        self.autocorrelation = w(self.autocorrelation, other.autocorrelation);
        self.chains += other.chains;
        Ok(())
    }
}

// V must outgrow the interaction, which grows like (1 + theta) log x per particle
fn check_decay(theta: f64, v: &ExternalField) -> Result<()> {
    let g = |x: f64| v.eval(x) - (1.0 + theta) * x.ln_1p();
    let xs: Vec<f64> = (0..=64).map(|k| 10f64.powf(1.0 + 7.0 * k as f64 / 64.0)).collect();
    if xs.windows(2).any(|w| g(w[1]) <= g(w[0])) {
        return invalid("the weight exp(-n V) does not decay fast enough for a normalizable density");
    }
    Ok(())
}

const CHUNK: usize = 32;

// sum over the slice of log[(y - a)(py - pa) / ((x - a)(px - pa))]; every factor is positive
fn log_ratio(xs: &[f64], ps: &[f64], x: f64, px: f64, y: f64, py: f64, theta: f64) -> f64 {
    let mut total = 0.0;
    for (xc, pc) in xs.chunks(CHUNK).zip(ps.chunks(CHUNK)) {
        let mut num = [1.0f64; 4];
        let mut den = [1.0f64; 4];
        let mut xi = xc.chunks_exact(4);
        let mut pi = pc.chunks_exact(4);
        for (a, b) in (&mut xi).zip(&mut pi) {
            for l in 0..4 {
                num[l] *= (y - a[l]) * (py - b[l]);
                den[l] *= (x - a[l]) * (px - b[l]);
            }
        }
        for (a, b) in xi.remainder().iter().zip(pi.remainder()) {
            num[0] *= (y - a) * (py - b);
            den[0] *= (x - a) * (px - b);
        }
        let nu = num[0] * num[1] * num[2] * num[3];
        let de = den[0] * den[1] * den[2] * den[3];
        if nu.is_normal() && de.is_normal() && nu > 0.0 && de > 0.0 {
            total += (nu / de).ln();
        } else {
            for &a in xc {
                total += (y - a).abs().ln() + log_power_gap(y, a, theta) - (x - a).abs().ln() - log_power_gap(x, a, theta);
            }
        }
    }
    total
}

// integrated autocorrelation time with the usual self-consistent window
fn autocorrelation_time(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 16 {
        return 1.0;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let var = series.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return 1.0;
    }
    let mut tau = 1.0;
    for lag in 1..n / 2 {
        let c = (0..n - lag).map(|i| (series[i] - mean) * (series[i + lag] - mean)).sum::<f64>() / ((n - lag) as f64 * var);
        tau += 2.0 * c;
        if lag as f64 >= 5.0 * tau {
            break;
        }
    }
    tau.max(1.0)
}

/// Single chain from the given start; the start is sorted first so its order is irrelevant.
pub fn mcmc_run_from(initial: &[f64], theta: f64, v: &ExternalField, seed: u64, opts: &SamplerOptions) -> Result<ChainStats> {
    let n = initial.len();
    if n == 0 || n > opts.max_particles {
        return invalid(format!("particle count {n} outside 1..={}", opts.max_particles));
    }
    if !(theta > 0.0 && theta.is_finite()) {
        return invalid("theta must be positive");
    }
    if !(opts.burn_in >= 0.0 && opts.burn_in < 1.0) || opts.sweeps == 0 || opts.bins == 0 {
        return invalid("bad sampler options");
    }
    check_decay(theta, v)?;
    let mut x = initial.to_vec();
    x.sort_by(|a, b| a.total_cmp(b));
    if x[0] <= 0.0 || x.windows(2).any(|w| w[0] == w[1]) || !x[n - 1].is_finite() {
        return invalid("initial positions must be positive, finite and distinct");
    }
    let mut p: Vec<f64> = x.iter().map(|&s| s.powf(theta)).collect();
    let mut vx: Vec<f64> = x.iter().map(|&s| v.eval(s)).collect();
    let nf = n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let burn = ((opts.sweeps as f64) * opts.burn_in).round() as usize;
    let mut step = opts.initial_step;
    let (mut window_acc, mut window_prop) = (0usize, 0usize);
    let (mut acc, mut prop) = (0usize, 0usize);
    let mut stats: Option<ChainStats> = None;
    let mut series = Vec::with_capacity(opts.sweeps - burn);
    for sweep in 0..opts.sweeps {
        for i in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            let u: f64 = rng.random();
            let y = x[i] * (step * z).exp();
            if !(y > 0.0 && y.is_finite()) {
                continue;
            }
            let py = y.powf(theta);
            let vy = v.eval(y);
            let mut d = log_ratio(&x[..i], &p[..i], x[i], p[i], y, py, theta);
            d += log_ratio(&x[i + 1..], &p[i + 1..], x[i], p[i], y, py, theta);
            // the proposal is symmetric in log x, which adds the Jacobian y/x
            d += -nf * (vy - vx[i]) + (y / x[i]).ln();
            let ok = d.is_finite() && (d >= 0.0 || u.ln() < d);
            if ok {
                x[i] = y;
                p[i] = py;
                vx[i] = vy;
            }
            if sweep < burn {
                window_prop += 1;
                window_acc += ok as usize;
            } else {
                prop += 1;
                acc += ok as usize;
            }
        }
        if sweep < burn && (sweep + 1) % 50 == 0 {
            let rate = window_acc as f64 / window_prop as f64;
            step *= (2.0 * (rate - opts.target_acceptance)).exp();
            step = step.clamp(1e-6, 10.0);
            window_acc = 0;
            window_prop = 0;
        }
        if sweep >= burn {
            let s = stats.get_or_insert_with(|| {
                let hi = opts.hist_max.unwrap_or_else(|| {
                    let m = x.iter().copied().fold(0.0, f64::max);
                    2f64.powf((4.0 * m).log2().ceil())
                });
                ChainStats::empty(n, theta, seed, hi, opts.bins)
            });
            for &xi in &x {
                s.record(xi);
            }
            series.push(x.iter().sum::<f64>() / nf);
        }
    }
    let mut s = stats.unwrap_or_else(|| ChainStats::empty(n, theta, seed, opts.hist_max.unwrap_or(1.0), opts.bins));
    s.sweeps = opts.sweeps;
    s.burn_in = burn;
    s.step = step;
    s.acceptance = if prop > 0 { acc as f64 / prop as f64 } else { 0.0 };
    s.autocorrelation = autocorrelation_time(&series);
    if !(0.1..=0.6).contains(&s.acceptance) {
        warn!("acceptance rate {:.3} outside [0.1, 0.6]", s.acceptance);
    }
    Ok(s)
}

/// Single chain from evenly spaced positions on `(0, 2]`.
pub fn mcmc_run(n: usize, theta: f64, v: &ExternalField, sweeps: usize, seed: u64) -> Result<ChainStats> {
    let opts = SamplerOptions { sweeps, ..SamplerOptions::default() };
    mcmc_run_from(&even_start(n), theta, v, seed, &opts)
}

fn even_start(n: usize) -> Vec<f64> {
    (0..n).map(|i| 2.0 * (i as f64 + 0.5) / n as f64).collect()
}

/// `chains` chains with seeds `seed, seed + 1, ...` pooled on the first chain's histogram.
pub fn mcmc_pooled(n: usize, theta: f64, v: &ExternalField, chains: usize, seed: u64, opts: &SamplerOptions) -> Result<ChainStats> {
    if chains == 0 {
        return invalid("at least one chain");
    }
    let start = even_start(n);
    let mut pooled = mcmc_run_from(&start, theta, v, seed, opts)?;
    let fixed = SamplerOptions { hist_max: Some(pooled.hist_max), ..opts.clone() };
    for c in 1..chains {
        let s = mcmc_run_from(&start, theta, v, seed.wrapping_add(c as u64), &fixed)?;
        pooled.merge(&s)?;
    }
    Ok(pooled)
}

/// Sup distance between two CDFs over the union of the given abscissae.
pub fn sup_distance_on(points: &[f64], f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64) -> f64 {
    points.iter().map(|&x| (f(x) - g(x)).abs()).fold(0.0, f64::max)
}

/// Sup distance between the empirical CDF and the solver's, over both sets of edges.
pub fn compare_cdf(stats: &ChainStats, sol: &ScalarSolution) -> f64 {
    let mut pts = stats.edges();
    pts.extend(sol.measure.grid().edges());
    sup_distance_on(&pts, |x| stats.cdf(x), |x| sol.measure.cdf(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_examples() {
        let v = ExternalField::linear();
        assert!((log_density_unnormalized(&[1.5], 0.7, &v) + 1.5).abs() < 1e-15);
        let z = ExternalField::zero();
        let two = log_density_unnormalized(&[0.3, 1.1], 1.0, &z);
        assert!((two - 2.0 * 0.8f64.ln()).abs() < 1e-14);
        let d = log_density_unnormalized(&[1.0, 2.0], 2.0, &v);
        assert!((d - (3f64.ln() - 6.0)).abs() < 1e-14, "{d}");
        assert_eq!(log_density_unnormalized(&[1.0, 1.0], 2.0, &v), f64::NEG_INFINITY);
        assert_eq!(log_density_unnormalized(&[-1.0, 1.0], 2.0, &v), f64::NEG_INFINITY);
    }

    #[test]
    fn near_coincident_powers() {
        let (x, y) = (2.0, 2.0 + 1e-12);
        let want = (0.5f64 * 2f64.powf(-0.5) * (y - x)).ln();
        assert!((log_power_gap(x, y, 0.5) - want).abs() < 1e-6);
    }

    #[test]
    fn ratio_matches_direct_difference() {
        let v = ExternalField::linear();
        let theta = 0.5;
        let x: Vec<f64> = (0..70).map(|i| 0.05 + 0.07 * i as f64 + 1e-3 * (i % 3) as f64).collect();
        let p: Vec<f64> = x.iter().map(|s| s.powf(theta)).collect();
        let i = 33;
        let y = x[i] * 1.013;
        let mut moved = x.clone();
        moved[i] = y;
        let want = log_density_unnormalized(&moved, theta, &v) - log_density_unnormalized(&x, theta, &v) + 70.0 * (y - x[i]);
        let got = log_ratio(&x[..i], &p[..i], x[i], p[i], y, y.powf(theta), theta)
            + log_ratio(&x[i + 1..], &p[i + 1..], x[i], p[i], y, y.powf(theta), theta);
        assert!((got - want).abs() < 1e-9, "{got} {want}");
    }

    #[test]
    fn same_seed_same_chain() {
        let v = ExternalField::linear();
        let a = mcmc_run(20, 1.5, &v, 400, 7).unwrap();
        let b = mcmc_run(20, 1.5, &v, 400, 7).unwrap();
        assert_eq!(a.counts, b.counts);
        assert_eq!(a.acceptance, b.acceptance);
        let c = mcmc_run(20, 1.5, &v, 400, 8).unwrap();
        assert_ne!(a.counts, c.counts);
    }

    #[test]
    fn start_order_is_irrelevant() {
        let v = ExternalField::linear();
        let opts = SamplerOptions { sweeps: 300, ..SamplerOptions::default() };
        let mut start = even_start(15);
        let a = mcmc_run_from(&start, 2.0, &v, 3, &opts).unwrap();
        start.reverse();
        start.swap(2, 9);
        let b = mcmc_run_from(&start, 2.0, &v, 3, &opts).unwrap();
        assert_eq!(a.counts, b.counts);
    }

    #[test]
    fn histogram_mass_and_cdf() {
        let s = ChainStats::from_samples(&[0.5, 1.0, 1.5, 9.0], 4.0, 64);
        assert_eq!(s.total(), 4);
        assert_eq!(s.overflow, 1);
        assert!((s.cdf(4.0) - 0.75).abs() < 1e-15);
        assert!((s.cdf(100.0) - 0.75).abs() < 1e-15);
        assert_eq!(s.cdf(0.0), 0.0);
        let mut t = s.clone();
        t.merge(&s).unwrap();
        assert_eq!(t.chains, 2);
        assert!((t.cdf(1.2) - s.cdf(1.2)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        let v = ExternalField::linear();
        assert!(mcmc_run(401, 1.0, &v, 10, 0).is_err());
        assert!(mcmc_run(10, -1.0, &v, 10, 0).is_err());
        let weak = ExternalField::new("log", |x: f64| 0.5 * x.ln_1p());
        assert!(mcmc_run(10, 1.0, &weak, 10, 0).is_err());
    }

    #[test]
    fn sup_distance_of_shifted_mass() {
        let f = |x: f64| x.clamp(0.0, 1.0);
        let g = |x: f64| if x >= 0.5 { (x + 0.1).min(1.0) } else { x.clamp(0.0, 1.0) };
        let pts: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
        assert_eq!(sup_distance_on(&pts, f, f), 0.0);
        assert!((sup_distance_on(&pts, f, g) - 0.1).abs() < 1e-12);
    }
}
