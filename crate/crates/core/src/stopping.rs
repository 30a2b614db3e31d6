//! Optimal stopping of independent `[0, 1]`-valued observations.
//!
//! Values come from backward induction `V_i = h_i(V_{i+1})` with
//! `V_{n+1} = 0`. The optimal rule stops at the first `i` with
//! `X_i >= V_{i+1}`; ties stop.

use serde::Serialize;

use crate::correspondence::{PayoffMode, StoppingLaw};
use crate::environment::Environment;
use crate::error::{check_unit, Error, Result};
use crate::parallel::{partition, run_blocks, stream_rng};

/// Trials per Monte Carlo block. Fixed so results do not depend on the
/// thread count.
pub const MC_BLOCK: u64 = 8192;
/// Consecutive horizons whose increments must stay below the tolerance.
pub const PLATEAU_WINDOW: usize = 10;
/// Default plateau tolerance for [`value_infinite`].
pub const PLATEAU_TOLERANCE: f64 = 1e-10;

/// `V_n = h^(n)(0)` for i.i.d. observations.
pub fn value_iid(x_law: &StoppingLaw, n: usize, mode: PayoffMode) -> Result<f64> {
    Ok(*value_iid_sequence(x_law, n, mode)?.last().expect("n >= 1"))
}

/// `V_1, ..., V_n` for i.i.d. observations.
pub fn value_iid_sequence(x_law: &StoppingLaw, n: usize, mode: PayoffMode) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidParameter("horizon n must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(n);
    let mut v = 0.0;
    for _ in 0..n {
        v = x_law.payoff_h(v, mode)?;
        out.push(v);
    }
    Ok(out)
}

/// Backward-induction values `V_1^n, ..., V_n^n, V_{n+1}^n = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueSequence {
    values: Vec<f64>,
}

impl ValueSequence {
    pub fn horizon(&self) -> usize {
        self.values.len() - 1
    }

    /// `V_1^n`.
    pub fn value(&self) -> f64 {
        self.values[0]
    }

    /// `V_i^n` for `i` in `1..=n+1`.
    pub fn get(&self, i: usize) -> Option<f64> {
        i.checked_sub(1).and_then(|j| self.values.get(j)).copied()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Optimal thresholds `tau_i = V_{i+1}^n`.
    pub fn thresholds(&self) -> Vec<f64> {
        self.values[1..].to_vec()
    }

    pub fn optimal_rule(&self) -> StoppingRule {
        StoppingRule {
            thresholds: self.thresholds(),
        }
    }
}

pub fn value_sequence(x_laws: &[StoppingLaw], mode: PayoffMode) -> Result<ValueSequence> {
    if x_laws.is_empty() {
        return Err(Error::InvalidParameter("at least one observation law is required".into()));
    }
    let mut values = vec![0.0; x_laws.len() + 1];
    for i in (0..x_laws.len()).rev() {
        values[i] = x_laws[i].payoff_h(values[i + 1], mode)?;
    }
    Ok(ValueSequence { values })
}

/// Stop at the first `i` with `X_i >= tau_i`. The last threshold is
/// nonpositive, so the final observation is always accepted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoppingRule {
    thresholds: Vec<f64>,
}

impl StoppingRule {
    pub fn new(thresholds: Vec<f64>) -> Result<Self> {
        match thresholds.last() {
            None => Err(Error::InvalidParameter("a rule needs at least one threshold".into())),
            Some(&last) if !(last <= 0.0) => Err(Error::InvalidParameter(format!(
                "last threshold must be <= 0 to force acceptance, got {last}"
            ))),
            Some(_) if thresholds.iter().any(|t| t.is_nan()) => {
                Err(Error::InvalidParameter("thresholds must not be NaN".into()))
            }
            Some(_) => Ok(StoppingRule { thresholds }),
        }
    }

    /// Threshold `tau` at every step before the forced last one.
    pub fn constant(tau: f64, horizon: usize) -> Result<Self> {
        check_unit("tau", tau)?;
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        let mut thresholds = vec![tau; horizon];
        thresholds[horizon - 1] = 0.0;
        Ok(StoppingRule { thresholds })
    }

    pub fn horizon(&self) -> usize {
        self.thresholds.len()
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: u64,
}

impl Estimate {
    /// Builds an estimate from the sum and sum of squares of `trials` draws.
    pub fn from_moments(sum: f64, sum_sq: f64, trials: u64) -> Self {
        let n = trials as f64;
        let mean = sum / n;
        let variance = if trials > 1 {
            ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        Estimate {
            mean,
            std_error: (variance / n).sqrt(),
            trials,
        }
    }

    /// Whether `target` lies within `k` standard errors of the mean.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error
    }
}

fn check_horizon(x_laws: &[StoppingLaw], rule: &StoppingRule) -> Result<()> {
    if x_laws.len() != rule.horizon() {
        return Err(Error::InvalidParameter(format!(
            "rule horizon {} does not match {} observation laws",
            rule.horizon(),
            x_laws.len()
        )));
    }
    Ok(())
}

/// Simulated return of `rule`, using one random stream per block of trials.
pub fn evaluate_rule_mc(
    x_laws: &[StoppingLaw],
    rule: &StoppingRule,
    trials: u64,
    seed: u64,
) -> Result<Estimate> {
    check_horizon(x_laws, rule)?;
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let blocks = partition(trials, MC_BLOCK);
    let partial = run_blocks(blocks.len(), |b| {
        let mut rng = stream_rng(seed, b as u64);
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..blocks[b].1 {
            let mut chosen = 0.0;
            for (law, &tau) in x_laws.iter().zip(&rule.thresholds) {
                chosen = law.sample(&mut rng);
                if chosen >= tau {
                    break;
                }
            }
            sum += chosen;
            sum_sq += chosen * chosen;
        }
        (sum, sum_sq)
    });
    let (sum, sum_sq) = partial
        .into_iter()
        .fold((0.0, 0.0), |(s, q), (a, b)| (s + a, q + b));
    Ok(Estimate::from_moments(sum, sum_sq, trials))
}

/// Exact expected return of `rule` from the atoms and partial means.
pub fn rule_value(x_laws: &[StoppingLaw], rule: &StoppingRule) -> Result<f64> {
    check_horizon(x_laws, rule)?;
    let mut reach = 1.0;
    let mut total = 0.0;
    for (law, &tau) in x_laws.iter().zip(&rule.thresholds) {
        total += reach * law.upper_partial_mean(tau);
        reach *= law.cdf_left(tau);
    }
    Ok(total)
}

/// Expected return of "stop at the first `X_i >= tau`, else take `X_n`"
/// over the first `horizon` laws.
pub fn threshold_rule_value(x_laws: &[StoppingLaw], tau: f64, horizon: usize) -> Result<f64> {
    if horizon > x_laws.len() {
        return Err(Error::InsufficientLaws {
            requested: horizon,
            available: x_laws.len(),
        });
    }
    rule_value(&x_laws[..horizon], &StoppingRule::constant(tau, horizon)?)
}

/// Truncated infinite-horizon value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InfiniteValue {
    /// `V_1^{horizon}`.
    pub value: f64,
    pub horizon: usize,
    /// Set when the last [`PLATEAU_WINDOW`] horizon increments were all
    /// below the tolerance. A heuristic, not a certificate.
    pub converged: bool,
}

/// `V_1^{n_max}` with a plateau flag over the last horizons.
///
/// Homogeneous environments iterate forward and stop at the first
/// plateau. Other environments rerun backward induction for each of the
/// last `PLATEAU_WINDOW + 1` horizons.
pub fn value_infinite(env: &Environment, n_max: usize, tol: f64) -> Result<InfiniteValue> {
    if n_max == 0 {
        return Err(Error::InvalidParameter("n_max must be at least 1".into()));
    }
    if let Some(law) = env.homogeneous_law() {
        let x = StoppingLaw::from_offspring(law);
        let mut v = 0.0;
        let mut calm = 0;
        for n in 1..=n_max {
            let next = x.payoff_h(v, PayoffMode::ClosedForm)?;
            calm = if (next - v).abs() < tol { calm + 1 } else { 0 };
            v = next;
            if calm >= PLATEAU_WINDOW {
                return Ok(InfiniteValue {
                    value: v,
                    horizon: n,
                    converged: true,
                });
            }
        }
        return Ok(InfiniteValue {
            value: v,
            horizon: n_max,
            converged: false,
        });
    }
    let x_laws: Vec<StoppingLaw> = env
        .laws(n_max)?
        .iter()
        .map(StoppingLaw::from_offspring)
        .collect();
    let first = n_max.saturating_sub(PLATEAU_WINDOW).max(1);
    let mut values = Vec::new();
    for n in first..=n_max {
        values.push(value_sequence(&x_laws[..n], PayoffMode::ClosedForm)?.value());
    }
    let converged = values.len() > PLATEAU_WINDOW
        && values.windows(2).all(|w| (w[1] - w[0]).abs() < tol);
    Ok(InfiniteValue {
        value: *values.last().expect("nonempty"),
        horizon: n_max,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::offspring::OffspringLaw;

    fn x(law: OffspringLaw) -> StoppingLaw {
        StoppingLaw::from_offspring(&law)
    }

    #[test]
    fn iid_values() {
        let b = x(OffspringLaw::bernoulli(0.5).unwrap());
        assert!((value_iid(&b, 3, PayoffMode::Quadrature).unwrap() - 0.875).abs() < 1e-12);
        let u = x(OffspringLaw::mbernoulli(2, 0.5).unwrap());
        assert!((value_iid(&u, 2, PayoffMode::Quadrature).unwrap() - 0.625).abs() < 1e-12);
        let p = OffspringLaw::poisson(0.8).unwrap();
        let v1 = value_iid(&x(p.clone()), 1, PayoffMode::Quadrature).unwrap();
        assert!((v1 - p.p0()).abs() < 1e-11);
        assert!(value_iid(&u, 0, PayoffMode::ClosedForm).is_err());
    }

    #[test]
    fn sequence_matches_iid_and_single_law() {
        let law = x(OffspringLaw::poisson(1.5).unwrap());
        let seq = value_sequence(&vec![law.clone(); 6], PayoffMode::ClosedForm).unwrap();
        let iid = value_iid(&law, 6, PayoffMode::ClosedForm).unwrap();
        assert!((seq.value() - iid).abs() < 1e-15);
        assert_eq!(seq.get(7), Some(0.0));
        assert_eq!(seq.horizon(), 6);
        let one = value_sequence(&[law.clone()], PayoffMode::ClosedForm).unwrap();
        assert!((one.value() - law.mean()).abs() < 1e-15);
    }

    #[test]
    fn rules_never_beat_the_optimum() {
        let laws: Vec<_> = [0.2, 0.5, 0.9, 0.4]
            .iter()
            .map(|&p| x(OffspringLaw::from_pmf(vec![p * 0.5, 1.0 - p, p * 0.5]).unwrap()))
            .collect();
        let seq = value_sequence(&laws, PayoffMode::ClosedForm).unwrap();
        let best = rule_value(&laws, &seq.optimal_rule()).unwrap();
        assert!((best - seq.value()).abs() < 1e-12);
        for tau in [0.0, 0.1, 0.3, 0.5, 0.8, 1.0] {
            assert!(threshold_rule_value(&laws, tau, 4).unwrap() <= seq.value() + 1e-12);
        }
    }

    #[test]
    fn zero_threshold_stops_immediately() {
        let law = x(OffspringLaw::poisson(0.7).unwrap());
        let laws = vec![law.clone(); 5];
        let v = threshold_rule_value(&laws, 0.0, 5).unwrap();
        assert!((v - law.mean()).abs() < 1e-15);
        let est = evaluate_rule_mc(&laws, &StoppingRule::constant(0.0, 5).unwrap(), 20_000, 1).unwrap();
        assert!(est.within(law.mean(), 4.0));
    }

    #[test]
    fn rule_validation() {
        assert!(StoppingRule::new(vec![0.5, 0.2]).is_err());
        assert!(StoppingRule::new(vec![]).is_err());
        assert!(StoppingRule::new(vec![0.5, 0.0]).is_ok());
        assert!(StoppingRule::constant(1.5, 3).is_err());
    }

    #[test]
    fn mc_is_deterministic() {
        let law = x(OffspringLaw::mbernoulli(2, 0.75).unwrap());
        let laws = vec![law; 4];
        let rule = value_sequence(&laws, PayoffMode::ClosedForm).unwrap().optimal_rule();
        let a = evaluate_rule_mc(&laws, &rule, 30_000, 9).unwrap();
        let b = evaluate_rule_mc(&laws, &rule, 30_000, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn infinite_values() {
        let sub = Environment::homogeneous(OffspringLaw::poisson(0.5).unwrap());
        let v = value_infinite(&sub, 10_000, PLATEAU_TOLERANCE).unwrap();
        assert!(v.converged && (v.value - 1.0).abs() < 1e-9);
        let sup = Environment::homogeneous(OffspringLaw::mbernoulli(2, 0.75).unwrap());
        let v = value_infinite(&sup, 10_000, PLATEAU_TOLERANCE).unwrap();
        assert!(v.converged && (v.value - 1.0 / 3.0).abs() < 1e-9);
    }
}
