use mbeq::measure::ExternalField;
use mbeq::sampler::{compare_cdf, mcmc_pooled, ChainStats, SamplerOptions};
use mbeq::scalar::{marchenko_pastur_cdf, solve_scalar_auto, ScalarOptions};
use mbeq::Theta;

fn mp_distance(s: &ChainStats) -> f64 {
    s.edges().iter().map(|&x| (s.cdf(x) - marchenko_pastur_cdf(x.min(4.0))).abs()).fold(0.0, f64::max)
}

#[test]
fn distance_shrinks_with_n() {
    let v = ExternalField::linear();
    let opts = SamplerOptions { sweeps: 6000, ..SamplerOptions::default() };
    let d: Vec<f64> = [25, 50, 100, 200]
        .iter()
        .map(|&n| mp_distance(&mcmc_pooled(n, 1.0, &v, 1, 11, &opts).unwrap()))
        .collect();
    // monotone up to a statistical band of 0.005
    for w in d.windows(2) {
        assert!(w[1] <= w[0] + 5e-3, "{d:?}");
    }
    assert!(d[3] < d[0], "{d:?}");
}

#[test]
fn theta_two_matches_the_solver() {
    let v = ExternalField::linear();
    let sol = solve_scalar_auto(Theta::new(2, 1).unwrap(), &v, 400, &ScalarOptions::default()).unwrap();
    let opts = SamplerOptions { sweeps: 20_000, ..SamplerOptions::default() };
    let s = mcmc_pooled(100, 2.0, &v, 1, 5, &opts).unwrap();
    assert!((0.1..=0.6).contains(&s.acceptance));
    let d = compare_cdf(&s, &sol);
    assert!(d < 0.07, "{d}");
}

#[test]
fn pooling_is_deterministic() {
    let v = ExternalField::linear();
    let opts = SamplerOptions { sweeps: 500, ..SamplerOptions::default() };
    let a = mcmc_pooled(30, 0.5, &v, 3, 2, &opts).unwrap();
    let b = mcmc_pooled(30, 0.5, &v, 3, 2, &opts).unwrap();
    assert_eq!(a.counts, b.counts);
    assert_eq!(a.chains, 3);
    assert_eq!(a.total(), 3 * 400 * 30);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn solver_against_itself() {
    let v = ExternalField::linear();
    let sol = solve_scalar_auto(Theta::one(), &v, 200, &ScalarOptions::default()).unwrap();
    // a histogram on the solver's own cell masses reproduces its CDF up to binning
    let mut samples = Vec::new();
    for (c, &m) in sol.measure.grid().cells().iter().zip(sol.measure.masses()) {
        let k = (m * 2e5).round() as usize;
        samples.extend((0..k).map(|i| c.lo + c.width() * (i as f64 + 0.5) / k as f64));
    }
    let s = ChainStats::from_samples(&samples, 8.0, 4000);
    assert!(compare_cdf(&s, &sol) < 2e-3);
}
