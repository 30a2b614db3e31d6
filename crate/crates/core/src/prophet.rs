//! Prophet values `E max(X_1, ..., X_n)` and what they say about
//! extinction.
//!
//! The prophet value at most doubles the optimal stopping value, which
//! brackets `q_n` between `V_p / 2` and `V_p`. When `EY <= 1` the CDF of the
//! maximum of `n` i.i.d. observations, `[g'(x)]^n`, is itself the
//! observation CDF of another offspring law `Y*_n`.

use serde::Serialize;

use crate::correspondence::{
    derivative_series, invert_to_offspring, CandidateCdf, Inversion, PayoffMode, StoppingLaw,
};
use crate::environment::Summability;
use crate::error::{Error, Result};
use crate::offspring::{Criticality, OffspringLaw};
use crate::parallel::{partition, run_blocks, stream_rng};
use crate::quadrature::integrate_piecewise;
use crate::stopping::{value_sequence, Estimate, MC_BLOCK};

/// Absolute tolerance of the expected-maximum integral.
pub const PROPHET_TOLERANCE: f64 = 1e-10;
/// Highest power-series degree kept for the CDF of a maximum.
pub const MAX_SERIES_DEGREE: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProphetMode {
    /// `int_0^1 [1 - prod F_i(x)] dx`, split at every `pi_i`.
    Analytic,
    MonteCarlo { trials: u64, seed: u64 },
}

/// `E max(X_1, ..., X_n)`. Analytic results carry a zero standard error
/// and a trial count of zero.
pub fn prophet_value(x_laws: &[StoppingLaw], mode: ProphetMode) -> Result<Estimate> {
    if x_laws.is_empty() {
        return Err(Error::InvalidParameter("at least one observation law is required".into()));
    }
    match mode {
        ProphetMode::Analytic => Ok(Estimate {
            mean: expected_maximum(x_laws),
            std_error: 0.0,
            trials: 0,
        }),
        ProphetMode::MonteCarlo { trials, seed } => {
            if trials == 0 {
                return Err(Error::InvalidParameter("trials must be at least 1".into()));
            }
            let blocks = partition(trials, MC_BLOCK);
            let partial = run_blocks(blocks.len(), |b| {
                let mut rng = stream_rng(seed, b as u64);
                let (mut sum, mut sum_sq) = (0.0, 0.0);
                for _ in 0..blocks[b].1 {
                    let max = x_laws
                        .iter()
                        .map(|law| law.sample(&mut rng))
                        .fold(0.0, f64::max);
                    sum += max;
                    sum_sq += max * max;
                }
                (sum, sum_sq)
            });
            let (sum, sum_sq) = partial
                .into_iter()
                .fold((0.0, 0.0), |(s, q), (a, b)| (s + a, q + b));
            Ok(Estimate::from_moments(sum, sum_sq, trials))
        }
    }
}

fn expected_maximum(x_laws: &[StoppingLaw]) -> f64 {
    let top = x_laws
        .iter()
        .map(StoppingLaw::upper_support)
        .fold(0.0, f64::max);
    if top == 0.0 {
        return 0.0;
    }
    let breaks: Vec<f64> = x_laws.iter().map(StoppingLaw::upper_support).collect();
    integrate_piecewise(
        |x| 1.0 - x_laws.iter().map(|law| law.cdf(x)).product::<f64>(),
        0.0,
        top,
        &breaks,
        PROPHET_TOLERANCE,
    )
    .value
}

/// `V_p / 2 <= V_n <= V_p`, with `V_n` from backward induction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProphetBounds {
    pub horizon: usize,
    pub prophet_value: f64,
    pub lower: f64,
    pub upper: f64,
    /// The optimal stopping value `V_1^n`.
    pub value: f64,
}

impl ProphetBounds {
    /// `V_p / 2 < V_n <= V_p`, the left inequality strict.
    pub fn brackets_value(&self) -> bool {
        self.lower < self.value && self.value <= self.upper + 1e-12
    }
}

pub fn prophet_bounds(x_laws: &[StoppingLaw]) -> Result<ProphetBounds> {
    let prophet_value = prophet_value(x_laws, ProphetMode::Analytic)?.mean;
    let value = value_sequence(x_laws, PayoffMode::ClosedForm)?.value();
    Ok(ProphetBounds {
        horizon: x_laws.len(),
        prophet_value,
        lower: prophet_value / 2.0,
        upper: prophet_value,
        value,
    })
}

/// Prophet value of `pi_i 1{X_i > 0}`, which stochastically dominates
/// `X_i` and so bounds the prophet value of the `X_i` from above.
pub fn dominating_prophet_value(x_laws: &[StoppingLaw]) -> f64 {
    let mut by_support: Vec<(f64, f64)> = x_laws
        .iter()
        .map(|law| (law.upper_support(), law.atom_at_zero()))
        .collect();
    by_support.sort_by(|a, b| b.0.total_cmp(&a.0));
    // between consecutive supports, P(max <= x) is the product of the atoms
    // at zero of the laws whose support lies above x
    let mut total = 0.0;
    let mut all_zero = 1.0;
    for (i, &(pi, p_zero)) in by_support.iter().enumerate() {
        all_zero *= p_zero;
        let next = by_support.get(i + 1).map_or(0.0, |&(s, _)| s);
        total += (1.0 - all_zero) * (pi - next);
    }
    total
}

/// Bounds on the limiting extinction probability for trinomial laws with
/// rates `r_i`, from two suboptimal rules and a dominating prophet value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrinomialBounds {
    pub truncation: usize,
    /// `prod_{i <= N} (1 - r_i)`.
    pub product: f64,
    /// `prod_{i <= N} (1 - r_i / 3)`.
    pub third_product: f64,
    /// `(1/2) [1 - prod (1 - r_i / 3)]`: stop at the first `X_i = 1/2`.
    pub lower_half_rule: f64,
    /// `(1/3) [1 - prod (1 - r_i)]`: stop at the first `X_i > 0`.
    pub lower_positive_rule: f64,
    /// `(1/2) [1 - prod (1 - r_i)]` over the truncated product.
    pub upper: f64,
    /// The upper bound after allowing for the declared tail sum
    /// `sum_{i > N} r_i`, when one is given.
    pub upper_with_tail: Option<f64>,
}

impl TrinomialBounds {
    pub fn lower(&self) -> f64 {
        self.lower_half_rule.max(self.lower_positive_rule)
    }
}

/// Evaluates the bounds with products truncated at `truncation` terms.
///
/// Truncation only makes the lower bounds more conservative. The upper
/// bound moves the other way, which `tail_sum`, a bound on the remaining
/// rates, accounts for.
pub fn trinomial_bounds<F: Fn(usize) -> f64>(
    rate: F,
    truncation: usize,
    summability: Summability,
    tail_sum: Option<f64>,
) -> Result<TrinomialBounds> {
    if summability == Summability::Divergent {
        return Err(Error::Precondition(
            "rates declared divergent: the bounds collapse to the common fixed point".into(),
        ));
    }
    let (mut log_full, mut log_third) = (0.0, 0.0);
    for i in 1..=truncation {
        let r = rate(i);
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::Domain {
                name: "r",
                value: r,
                domain: "[0, 1]",
            });
        }
        log_full += (-r).ln_1p();
        log_third += (-r / 3.0).ln_1p();
    }
    let product = log_full.exp();
    let third_product = log_third.exp();
    Ok(TrinomialBounds {
        truncation,
        product,
        third_product,
        lower_half_rule: 0.5 * -log_third.exp_m1(),
        lower_positive_rule: -log_full.exp_m1() / 3.0,
        upper: 0.5 * -log_full.exp_m1(),
        upper_with_tail: tail_sum.map(|t| 0.5 * (1.0 - product * (1.0 - t).max(0.0))),
    })
}

/// An offspring law built from the CDF of a maximum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxCorrespondence {
    #[serde(skip)]
    pub law: OffspringLaw,
    /// `P(Y* = 0) = g*(0)`, equal to the expected maximum.
    pub p0: f64,
    /// `E Y*`, from the reconstructed pmf.
    pub mean: f64,
    /// `prod_i E Y_i`, which `E Y*` must equal.
    pub expected_mean: f64,
    /// Mass lost to series truncation, `k(1) - sum of kept coefficients`.
    pub truncation_residual: f64,
}

/// `Y*_n` for the maximum of `n` i.i.d. observations of `law`.
pub fn max_correspondence(law: &OffspringLaw, n: usize) -> Result<MaxCorrespondence> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    max_correspondence_laws(&vec![law.clone(); n])
}

/// `Y*` whose observation CDF is `prod_i g_i'(x)`, for laws with
/// `E Y_i <= 1`.
pub fn max_correspondence_laws(laws: &[OffspringLaw]) -> Result<MaxCorrespondence> {
    if laws.is_empty() {
        return Err(Error::InvalidParameter("at least one law is required".into()));
    }
    for law in laws {
        if law.criticality() == Criticality::Supercritical {
            return Err(Error::Regime(format!(
                "{law} has EY > 1; the maximum corresponds to no offspring law"
            )));
        }
    }
    let mut series = vec![1.0];
    let mut expected_mean = 1.0;
    for law in laws {
        let factor = derivative_series(law, MAX_SERIES_DEGREE);
        series = truncated_product(&series, &factor, MAX_SERIES_DEGREE);
        expected_mean *= law.mean();
    }
    let kept: f64 = series.iter().sum();
    let truncation_residual = (expected_mean - kept).max(0.0);
    match invert_to_offspring(&CandidateCdf::polynomial(1.0, series)) {
        Inversion::Accepted { law, constant } => {
            let mean = law.mean();
            Ok(MaxCorrespondence {
                law,
                p0: constant,
                mean,
                expected_mean,
                truncation_residual,
            })
        }
        Inversion::Rejected(reason) => Err(Error::CrossCheck(format!(
            "maximum CDF was rejected: {reason:?}"
        ))),
    }
}

fn truncated_product(a: &[f64], b: &[f64], max_degree: usize) -> Vec<f64> {
    let len = (a.len() + b.len() - 1).min(max_degree + 1);
    let mut out = vec![0.0; len];
    for (i, &x) in a.iter().enumerate().take(len) {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate().take(len - i) {
            out[i + j] += x * y;
        }
    }
    out
}

/// Closed forms for `P(Y*_n = 0)`.
pub mod closed_form {
    /// `MBernoulli(m, p)`, `mp <= 1`: `1 - (mp)^n / [n(m - 1) + 1]`.
    pub fn mbernoulli(m: u32, p: f64, n: u32) -> f64 {
        1.0 - (m as f64 * p).powi(n as i32) / (n as f64 * (m as f64 - 1.0) + 1.0)
    }

    /// `Poisson(lambda)`, `lambda <= 1`: `1 - (lambda^(n-1) / n)(1 - e^(-n lambda))`.
    pub fn poisson(lambda: f64, n: u32) -> f64 {
        let nf = n as f64;
        1.0 + lambda.powi(n as i32 - 1) / nf * (-nf * lambda).exp_m1()
    }

    /// `g(x) = q / (1 - p x)`, `p <= 1/2`:
    /// `1 - (p/q)^(n-1) / (2n - 1) + p^(n-1) q^n / (2n - 1)`.
    pub fn geometric(p: f64, n: u32) -> f64 {
        let q = 1.0 - p;
        let k = 2.0 * n as f64 - 1.0;
        let e = n as i32 - 1;
        1.0 - (p / q).powi(e) / k + p.powi(e) * q.powi(n as i32) / k
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iid(law: &OffspringLaw, n: usize) -> Vec<StoppingLaw> {
        vec![StoppingLaw::from_offspring(law); n]
    }

    #[test]
    fn single_law_is_mean() {
        let law = OffspringLaw::poisson(1.7).unwrap();
        let v = prophet_value(&iid(&law, 1), ProphetMode::Analytic).unwrap();
        assert!((v.mean - law.p0()).abs() < 1e-10);
    }

    #[test]
    fn two_uniforms() {
        let law = OffspringLaw::mbernoulli(2, 0.5).unwrap();
        let v = prophet_value(&iid(&law, 2), ProphetMode::Analytic).unwrap();
        assert!((v.mean - 2.0 / 3.0).abs() < 1e-12);
        let mc = prophet_value(&iid(&law, 2), ProphetMode::MonteCarlo { trials: 50_000, seed: 1 }).unwrap();
        assert!(mc.within(2.0 / 3.0, 4.0));
    }

    #[test]
    fn bounds_bracket_value() {
        for law in [
            OffspringLaw::poisson(2.0).unwrap(),
            OffspringLaw::mbernoulli(3, 0.2).unwrap(),
            OffspringLaw::slack(0.5, 0.5).unwrap(),
        ] {
            for n in [1, 3, 10] {
                let b = prophet_bounds(&iid(&law, n)).unwrap();
                assert!(b.brackets_value(), "{law} n = {n}: {b:?}");
            }
        }
    }

    #[test]
    fn max_correspondence_closed_forms() {
        let n = 5;
        let mb = max_correspondence(&OffspringLaw::mbernoulli(3, 0.25).unwrap(), n).unwrap();
        assert!((mb.p0 - closed_form::mbernoulli(3, 0.25, n as u32)).abs() < 1e-12);
        assert!(mb.law.support_len() == Some(n * 2 + 2));
        let po = max_correspondence(&OffspringLaw::poisson(0.8).unwrap(), n).unwrap();
        assert!((po.p0 - closed_form::poisson(0.8, n as u32)).abs() < 1e-12);
        assert!((po.mean - po.expected_mean).abs() < 1e-10);
        let p = 0.3;
        let ge = max_correspondence(&OffspringLaw::geometric(1.0 - p).unwrap(), n).unwrap();
        assert!((ge.p0 - closed_form::geometric(p, n as u32)).abs() < 1e-12);
        assert!(max_correspondence(&OffspringLaw::poisson(1.2).unwrap(), 2).is_err());
    }

    #[test]
    fn trinomial_inverse_square() {
        let b = trinomial_bounds(crate::inhomogeneous::inverse_square_rate, 1_000_000, Summability::Convergent, None)
            .unwrap();
        assert!((b.product - 0.5).abs() < 1e-6);
        assert!((b.lower_positive_rule - 1.0 / 6.0).abs() < 1e-6);
        assert!((b.upper - 0.25).abs() < 1e-6);
        assert!(trinomial_bounds(|_| 1.0, 10, Summability::Divergent, None).is_err());
        let zero = trinomial_bounds(|_| 0.0, 10, Summability::Convergent, None).unwrap();
        assert_eq!((zero.lower(), zero.upper), (0.0, 0.0));
    }

    #[test]
    fn dominating_value_is_an_upper_bound() {
        let laws: Vec<_> = [0.1, 0.5, 0.9]
            .iter()
            .map(|&r| StoppingLaw::from_offspring(&crate::inhomogeneous::trinomial_law(r).unwrap()))
            .collect();
        let dom = dominating_prophet_value(&laws);
        let exact = prophet_value(&laws, ProphetMode::Analytic).unwrap().mean;
        let closed = 0.5 * (1.0 - 0.9 * 0.5 * 0.1);
        assert!((dom - closed).abs() < 1e-12);
        assert!(exact < dom);
    }
}
