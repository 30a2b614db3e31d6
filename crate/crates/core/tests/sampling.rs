use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use branchstop::{OffspringLaw, StoppingLaw};

const DRAWS: usize = 1_000_000;
// Kolmogorov-Smirnov 99% critical value, scaled by sqrt(n)
const KS_99: f64 = 1.628;

fn draws(x: &StoppingLaw, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..DRAWS).map(|_| x.sample(&mut rng)).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Largest gap between the empirical and true CDF, checked on both sides of
/// every distinct sample value so atoms are handled.
fn ks_distance(sorted: &[f64], x: &StoppingLaw) -> f64 {
    let n = sorted.len() as f64;
    let mut worst: f64 = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == v {
            j += 1;
        }
        worst = worst
            .max((i as f64 / n - x.cdf_left(v)).abs())
            .max((j as f64 / n - x.cdf(v)).abs());
        i = j;
    }
    worst
}

fn laws() -> Vec<OffspringLaw> {
    vec![
        OffspringLaw::mbernoulli(2, 0.75).unwrap(),
        OffspringLaw::poisson(1.0).unwrap(),
        OffspringLaw::generalized_geometric(0.5, 0.4).unwrap(),
        OffspringLaw::slack(0.5, 0.5).unwrap(),
    ]
}

#[test]
fn samples_follow_the_cdf() {
    let band = KS_99 / (DRAWS as f64).sqrt();
    for (i, law) in laws().iter().enumerate() {
        let x = StoppingLaw::from_offspring(law);
        let d = ks_distance(&draws(&x, 7 + i as u64), &x);
        assert!(d < band, "{law}: KS distance {d} above {band}");
    }
}

#[test]
fn sample_mean_is_the_zero_probability() {
    for (i, law) in laws().iter().enumerate() {
        let x = StoppingLaw::from_offspring(law);
        let v = draws(&x, 70 + i as u64);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        assert!((mean - law.p0()).abs() < 4.0 * se, "{law}: {mean} vs {}", law.p0());
    }
}
