//! Forward Monte Carlo of Galton-Watson populations in a possibly varying
//! environment.
//!
//! Generation `i + 1` is the total offspring of the `Z_i` individuals of
//! generation `i`. That total is drawn exactly in one step where the family
//! allows it (binomial, Poisson and negative-binomial sums, multinomial
//! counts for explicit pmfs); Slack laws are sampled per individual.
//!
//! Each trial owns the random stream `(seed, trial index)`, and all
//! tallies are integers, so results are identical across thread counts.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson};
use serde::Serialize;

use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::offspring::{Family, OffspringLaw};
use crate::parallel::{partition, run_blocks, stream_rng};

/// Default population size above which a trial stops being followed.
pub const DEFAULT_POP_CAP: u64 = 1_000_000;
/// Trials per parallel block.
pub const SIM_BLOCK: u64 = 2048;
/// Length of the exact survival table for Slack laws.
pub const SLACK_TABLE_LEN: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SimulationConfig {
    pub generations: usize,
    pub trials: u64,
    pub seed: u64,
    pub pop_cap: u64,
}

impl SimulationConfig {
    pub fn new(generations: usize, trials: u64, seed: u64) -> Self {
        SimulationConfig {
            generations,
            trials,
            seed,
            pop_cap: DEFAULT_POP_CAP,
        }
    }

    pub fn with_pop_cap(mut self, pop_cap: u64) -> Self {
        self.pop_cap = pop_cap;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.generations == 0 {
            return Err(Error::InvalidParameter("generations must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if self.pop_cap == 0 {
            return Err(Error::InvalidParameter("pop_cap must be at least 1".into()));
        }
        Ok(())
    }
}

/// Tallies of an ensemble of independent trials, each started from one
/// individual.
///
/// A trial whose population exceeds `pop_cap` is counted as surviving in
/// every later generation and drops out of the population means from then
/// on. Extinction frequencies are therefore biased low by at most the
/// probability of dying out after passing the cap.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleResult {
    pub config: SimulationConfig,
    /// Trials extinct by generation `i + 1`.
    pub extinct: Vec<u64>,
    /// Trials that passed the cap by generation `i + 1`.
    pub capped: Vec<u64>,
    population_sum: Vec<u128>,
    population_sum_sq: Vec<u128>,
}

impl EnsembleResult {
    pub fn trials(&self) -> u64 {
        self.config.trials
    }

    pub fn generations(&self) -> usize {
        self.config.generations
    }

    /// Trials that passed the population cap at some point.
    pub fn cap_hits(&self) -> u64 {
        self.capped.last().copied().unwrap_or(0)
    }

    /// `q_hat_i` for `i` in `1..=n`.
    pub fn extinction_frequency(&self, i: usize) -> f64 {
        self.extinct[i - 1] as f64 / self.trials() as f64
    }

    pub fn extinction_frequencies(&self) -> Vec<f64> {
        (1..=self.generations()).map(|i| self.extinction_frequency(i)).collect()
    }

    /// Binomial standard error of `q_hat_i` from the empirical frequency.
    pub fn standard_error(&self, i: usize) -> f64 {
        binomial_se(self.extinction_frequency(i), self.trials())
    }

    /// Mean of `Z_i` over trials not capped by generation `i`.
    pub fn mean_population(&self, i: usize) -> f64 {
        let tracked = self.trials() - self.capped[i - 1];
        if tracked == 0 {
            return f64::NAN;
        }
        self.population_sum[i - 1] as f64 / tracked as f64
    }

    /// Standard error of [`mean_population`](Self::mean_population).
    pub fn population_std_error(&self, i: usize) -> f64 {
        let tracked = (self.trials() - self.capped[i - 1]) as f64;
        if tracked < 2.0 {
            return f64::NAN;
        }
        let mean = self.population_sum[i - 1] as f64 / tracked;
        let second = self.population_sum_sq[i - 1] as f64 / tracked;
        let variance = (second - mean * mean).max(0.0) * tracked / (tracked - 1.0);
        (variance / tracked).sqrt()
    }

    /// Whether the extinct count at generation `i` lies within `k`
    /// binomial standard errors of its expectation under `q`, with the
    /// usual half-trial continuity correction. The standard error comes
    /// from `q` itself.
    pub fn agrees_with(&self, i: usize, q: f64, k: f64) -> bool {
        let n = self.trials() as f64;
        let expected = n * q;
        let sd = (n * q * (1.0 - q)).sqrt();
        (self.extinct[i - 1] as f64 - expected).abs() <= k * sd + 0.5
    }
}

/// `sqrt(q (1 - q) / trials)`.
pub fn binomial_se(q: f64, trials: u64) -> f64 {
    (q * (1.0 - q) / trials as f64).sqrt()
}

/// `E Z_n = prod_{j <= n} E Y_j`.
pub fn expected_size(env: &Environment, n: usize) -> Result<f64> {
    env.expected_size(n)
}

/// Runs `config.trials` independent populations for `config.generations`
/// generations.
pub fn simulate(env: &Environment, config: &SimulationConfig) -> Result<EnsembleResult> {
    config.validate()?;
    let n = config.generations;
    let samplers = env
        .laws(n)?
        .iter()
        .map(OffspringSampler::new)
        .collect::<Result<Vec<_>>>()?;
    let blocks = partition(config.trials, SIM_BLOCK);

    let tallies = run_blocks(blocks.len(), |b| {
        let (start, len) = blocks[b];
        let mut tally = Tally::new(n);
        for trial in start..start + len {
            let mut rng = stream_rng(config.seed, trial);
            let mut z: u64 = 1;
            for (g, sampler) in samplers.iter().enumerate() {
                z = sampler.sample_sum(z, config.pop_cap, &mut rng);
                if z == 0 {
                    tally.extinct_at[g] += 1;
                    break;
                }
                if z > config.pop_cap {
                    tally.capped_at[g] += 1;
                    break;
                }
                tally.population_sum[g] += z as u128;
                tally.population_sum_sq[g] += (z as u128) * (z as u128);
            }
        }
        tally
    });

    let mut total = Tally::new(n);
    for t in tallies {
        total.absorb(&t);
    }
    Ok(EnsembleResult {
        config: *config,
        extinct: cumulative(&total.extinct_at),
        capped: cumulative(&total.capped_at),
        population_sum: total.population_sum,
        population_sum_sq: total.population_sum_sq,
    })
}

fn cumulative(v: &[u64]) -> Vec<u64> {
    v.iter()
        .scan(0u64, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

struct Tally {
    extinct_at: Vec<u64>,
    capped_at: Vec<u64>,
    population_sum: Vec<u128>,
    population_sum_sq: Vec<u128>,
}

impl Tally {
    fn new(n: usize) -> Self {
        Tally {
            extinct_at: vec![0; n],
            capped_at: vec![0; n],
            population_sum: vec![0; n],
            population_sum_sq: vec![0; n],
        }
    }

    fn absorb(&mut self, other: &Tally) {
        for g in 0..self.extinct_at.len() {
            self.extinct_at[g] += other.extinct_at[g];
            self.capped_at[g] += other.capped_at[g];
            self.population_sum[g] += other.population_sum[g];
            self.population_sum_sq[g] += other.population_sum_sq[g];
        }
    }
}

/// Draws the total offspring of `z` independent individuals.
#[derive(Debug, Clone)]
enum OffspringSampler {
    Binomial { m: u64, p: f64 },
    Poisson { lambda: f64 },
    /// `p0` and the ratio `c` of the geometric tail.
    GeneralizedGeometric { p0: f64, c: f64 },
    Multinomial { pmf: Vec<f64> },
    /// `survival[k] = P(Y > k)` up to the table length, then a power tail
    /// `P(Y > k) ~ k^-(1 + alpha)`.
    PowerTail { survival: Vec<f64>, alpha: f64 },
}

impl OffspringSampler {
    fn new(law: &OffspringLaw) -> Result<Self> {
        Ok(match law.family() {
            Family::Bernoulli { p } => OffspringSampler::Binomial { m: 1, p: *p },
            Family::MBernoulli { m, p } => OffspringSampler::Binomial {
                m: *m as u64,
                p: *p,
            },
            Family::Poisson { lambda } => OffspringSampler::Poisson { lambda: *lambda },
            Family::GeneralizedGeometric { c, .. } => OffspringSampler::GeneralizedGeometric {
                p0: law.p0(),
                c: *c,
            },
            Family::ExplicitPmf { pmf } => OffspringSampler::Multinomial { pmf: pmf.clone() },
            Family::Slack { alpha, c } => {
                let mut survival = Vec::with_capacity(SLACK_TABLE_LEN);
                survival.push(1.0 - c);
                survival.push(alpha * c);
                for k in 1..SLACK_TABLE_LEN - 1 {
                    let next = survival[k] * (k as f64 - alpha) / (k as f64 + 1.0);
                    survival.push(next.max(0.0));
                }
                OffspringSampler::PowerTail {
                    survival,
                    alpha: *alpha,
                }
            }
        })
    }

    /// Total offspring of `z` individuals. Per-individual sampling stops
    /// early once the total exceeds `cap`.
    fn sample_sum(&self, z: u64, cap: u64, rng: &mut ChaCha8Rng) -> u64 {
        if z == 0 {
            return 0;
        }
        match self {
            OffspringSampler::Binomial { m, p } => m * binomial(z, *p, rng),
            OffspringSampler::Poisson { lambda } => poisson(z as f64 * lambda, rng),
            OffspringSampler::GeneralizedGeometric { p0, c } => {
                let positive = binomial(z, 1.0 - p0, rng);
                if positive == 0 {
                    return 0;
                }
                // each positive count is 1 + Geometric(1 - c) failures; the
                // failures add up to a gamma-mixed Poisson
                let rate = Gamma::new(positive as f64, c / (1.0 - c))
                    .expect("valid gamma parameters")
                    .sample(rng);
                positive + poisson(rate, rng)
            }
            OffspringSampler::Multinomial { pmf } => {
                let mut remaining = z;
                let mut mass_left = 1.0;
                let mut total = 0u64;
                for (k, &p) in pmf.iter().enumerate() {
                    if remaining == 0 {
                        break;
                    }
                    let count = if k + 1 == pmf.len() {
                        remaining
                    } else {
                        binomial(remaining, (p / mass_left).clamp(0.0, 1.0), rng)
                    };
                    total += k as u64 * count;
                    remaining -= count;
                    mass_left -= p;
                }
                total
            }
            OffspringSampler::PowerTail { survival, alpha } => {
                let mut total = 0u64;
                for _ in 0..z {
                    total += power_tail_draw(survival, *alpha, rng);
                    if total > cap {
                        break;
                    }
                }
                total
            }
        }
    }
}

fn binomial(n: u64, p: f64, rng: &mut ChaCha8Rng) -> u64 {
    if p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("valid binomial parameters").sample(rng)
}

fn poisson(lambda: f64, rng: &mut ChaCha8Rng) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    let x: f64 = Poisson::new(lambda).expect("valid poisson rate").sample(rng);
    x as u64
}

/// Smallest `k` with `P(Y > k) <= v` for uniform `v`.
fn power_tail_draw(survival: &[f64], alpha: f64, rng: &mut ChaCha8Rng) -> u64 {
    let v: f64 = 1.0 - rng.random::<f64>();
    let last = survival.len() - 1;
    if v < survival[last] {
        let k = last as f64 * (survival[last] / v).powf(1.0 / (1.0 + alpha));
        return k.min(u64::MAX as f64 / 4.0) as u64;
    }
    survival.partition_point(|&s| s > v) as u64
}
