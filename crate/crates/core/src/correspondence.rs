//! The map from an offspring law `Y` to a `[0, 1]`-valued observation `X`
//! whose one-step stopping payoff `h(a) = E[X v a]` reproduces the
//! generating function of `Y` on `[0, pi]`.
//!
//! `X` has CDF `g'(x)` on `[0, pi)`: an atom of size `P(Y = 1)` at zero, a
//! density `g''` on `(0, pi)` and an atom of size `1 - g'(pi)` at `pi`.
//!
//! [`PayoffMode::Quadrature`] evaluates `h` from the atoms and the density
//! alone, never calling `g` or `g'`; it is the independent path against
//! which the closed form is checked.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{check_unit, Result};
use crate::offspring::OffspringLaw;
use crate::quadrature::{integrate, integrate_to_singular_end};
use crate::roots::invert_nondecreasing;

/// Absolute tolerance of every density integral on the quadrature path.
pub const QUADRATURE_TOLERANCE: f64 = 1e-11;
/// Width below which CDF inversion stops.
pub const INVERSION_TOLERANCE: f64 = 1e-12;
/// Allowed mismatch in `g(pi) = pi` when reconstructing an offspring law.
pub const FIXED_POINT_MATCH: f64 = 1e-9;
/// Tail mass at which derivative series of infinite-support laws are cut.
pub const SERIES_TAIL: f64 = 1e-17;

/// How the payoff `h(a) = E[X v a]` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PayoffMode {
    /// `g(a)` on `[0, pi]` and `a` above `pi`.
    ClosedForm,
    /// Atoms plus adaptive integration of the density.
    Quadrature,
}

/// Distribution of the stopping observation attached to an offspring law.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppingLaw {
    source: OffspringLaw,
    upper_support: f64,
    atom_at_zero: f64,
    atom_at_pi: f64,
}

impl StoppingLaw {
    /// Builds the observation law of `law`. When `P(Y = 0) = 0` the
    /// fixed point is zero and `X` is the point mass at zero.
    pub fn from_offspring(law: &OffspringLaw) -> Self {
        let pi = law.eventual_extinction();
        let (atom_at_zero, atom_at_pi) = if pi == 0.0 {
            (1.0, 0.0)
        } else {
            (law.p1(), 1.0 - law.derivative(pi))
        };
        StoppingLaw {
            source: law.clone(),
            upper_support: pi,
            atom_at_zero,
            atom_at_pi,
        }
    }

    pub fn source(&self) -> &OffspringLaw {
        &self.source
    }

    /// `pi`, the right end of the support.
    pub fn upper_support(&self) -> f64 {
        self.upper_support
    }

    pub fn atom_at_zero(&self) -> f64 {
        self.atom_at_zero
    }

    pub fn atom_at_pi(&self) -> f64 {
        self.atom_at_pi
    }

    /// `g''(x)` on `(0, pi)`, zero elsewhere.
    pub fn density(&self, x: f64) -> f64 {
        if x > 0.0 && x < self.upper_support {
            self.source.second_derivative(x)
        } else {
            0.0
        }
    }

    /// The density at `x = pi - gap`, evaluated from `gap` when `pi = 1`.
    fn density_below_pi(&self, x: f64, gap: f64) -> f64 {
        if !(x > 0.0 && gap > 0.0) {
            0.0
        } else if self.upper_support == 1.0 {
            self.source.second_derivative_complement(gap)
        } else {
            self.source.second_derivative(x)
        }
    }

    /// `F(x) = P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            0.0
        } else if x >= self.upper_support {
            1.0
        } else {
            self.source.derivative(x)
        }
    }

    /// `F(x-) = P(X < x)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x > self.upper_support {
            1.0
        } else {
            self.source.derivative(x)
        }
    }

    /// `E[X] = P(Y = 0)`.
    pub fn mean(&self) -> f64 {
        if self.upper_support == 0.0 {
            0.0
        } else {
            self.source.p0()
        }
    }

    /// `E[X 1{X >= t}]`, equal to `g(t) - t g'(t)` on `[0, pi]`.
    pub fn upper_partial_mean(&self, t: f64) -> f64 {
        if t <= 0.0 {
            self.mean()
        } else if t > self.upper_support {
            0.0
        } else {
            self.source.eval(t) - t * self.source.derivative(t)
        }
    }

    /// `E[X 1{X < t}]`.
    pub fn lower_partial_mean(&self, t: f64) -> f64 {
        self.mean() - self.upper_partial_mean(t)
    }

    /// `h(a) = E[X v a]` for `a` in `[0, 1]`.
    pub fn payoff_h(&self, a: f64, mode: PayoffMode) -> Result<f64> {
        check_unit("a", a)?;
        Ok(match mode {
            PayoffMode::ClosedForm => self.payoff_closed_form(a),
            PayoffMode::Quadrature => self.payoff_quadrature(a),
        })
    }

    pub(crate) fn payoff_closed_form(&self, a: f64) -> f64 {
        if a <= self.upper_support {
            self.source.eval(a)
        } else {
            a
        }
    }

    /// `a P(X <= a) + E[X 1{X > a}]` from atoms and density integrals only.
    pub(crate) fn payoff_quadrature(&self, a: f64) -> f64 {
        let pi = self.upper_support;
        let below = self.atom_at_zero
            + self.density_mass(0.0, a.min(pi))
            + if a >= pi { self.atom_at_pi } else { 0.0 };
        let above = if a < pi {
            integrate_to_singular_end(
                |x, gap| x * self.density_below_pi(x, gap),
                a,
                pi,
                QUADRATURE_TOLERANCE,
            )
            .value
                + pi * self.atom_at_pi
        } else {
            0.0
        };
        a * below + above
    }

    /// `int_lo^hi g''(x) dx` by quadrature.
    pub fn density_mass(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        if hi >= self.upper_support {
            // the density may blow up at pi for heavy-tailed critical laws
            let hi = self.upper_support;
            integrate_to_singular_end(
                |x, gap| self.density_below_pi(x, gap),
                lo,
                hi,
                QUADRATURE_TOLERANCE,
            )
            .value
        } else {
            integrate(|x| self.density(x), lo, hi, QUADRATURE_TOLERANCE).value
        }
    }

    /// Atoms plus integrated density; one up to quadrature error.
    pub fn total_mass(&self) -> f64 {
        self.atom_at_zero + self.density_mass(0.0, self.upper_support) + self.atom_at_pi
    }

    /// Draws one observation by inverting the CDF.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.quantile(u)
    }

    /// Generalized inverse of the CDF at `u` in `[0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let pi = self.upper_support;
        if u < self.atom_at_zero || pi == 0.0 {
            return 0.0;
        }
        if u >= self.source.derivative(pi) {
            return pi;
        }
        invert_nondecreasing(|x| self.source.derivative(x), u, 0.0, pi, INVERSION_TOLERANCE)
    }

    /// Power-series description of this CDF, with the derivative series of
    /// infinite-support laws truncated at `max_degree`.
    pub fn to_candidate(&self, max_degree: usize) -> CandidateCdf {
        CandidateCdf {
            upper_support: self.upper_support,
            series: CdfSeries::Polynomial(derivative_series(&self.source, max_degree)),
        }
    }
}

/// Coefficients `(k + 1) p_{k+1}` of `g'`, up to degree `max_degree`.
pub fn derivative_series(law: &OffspringLaw, max_degree: usize) -> Vec<f64> {
    let pmf = law.pmf_table(SERIES_TAIL, max_degree + 2);
    pmf.iter()
        .enumerate()
        .skip(1)
        .map(|(k, p)| k as f64 * p)
        .collect()
}

/// How the continuous part `k(x)` of a candidate CDF is specified.
#[derive(Clone)]
pub enum CdfSeries {
    /// Power-series coefficients `a_0, a_1, ...` of `k`.
    Polynomial(Vec<f64>),
    /// Coefficient callback evaluated for degrees `0..=degree`.
    Analytic {
        coefficient: Arc<dyn Fn(usize) -> f64 + Send + Sync>,
        degree: usize,
    },
    /// Point evaluations only. Nonnegativity of series coefficients cannot
    /// be decided from these, so such candidates are always rejected.
    Opaque(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for CdfSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CdfSeries::Polynomial(c) => write!(f, "Polynomial(degree {})", c.len().saturating_sub(1)),
            CdfSeries::Analytic { degree, .. } => write!(f, "Analytic(degree {degree})"),
            CdfSeries::Opaque(_) => f.write_str("Opaque"),
        }
    }
}

/// A CDF equal to `k(x)` on `[0, pi)` and one from `pi` on.
#[derive(Debug, Clone)]
pub struct CandidateCdf {
    pub upper_support: f64,
    pub series: CdfSeries,
}

impl CandidateCdf {
    pub fn polynomial(upper_support: f64, coefficients: Vec<f64>) -> Self {
        CandidateCdf {
            upper_support,
            series: CdfSeries::Polynomial(coefficients),
        }
    }

    fn coefficients(&self) -> Option<Vec<f64>> {
        match &self.series {
            CdfSeries::Polynomial(c) => Some(c.clone()),
            CdfSeries::Analytic {
                coefficient,
                degree,
            } => Some((0..=*degree).map(|j| coefficient(j)).collect()),
            CdfSeries::Opaque(_) => None,
        }
    }

    /// `(P(X = 0), P(X = pi))` implied by the series, when it is explicit.
    pub fn atoms(&self) -> Option<(f64, f64)> {
        let c = self.coefficients()?;
        let at_zero = c.first().copied().unwrap_or(0.0);
        let at_pi = 1.0 - horner(&c, self.upper_support);
        Some((at_zero, at_pi))
    }
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, a| acc * x + a)
}

/// Why a candidate CDF corresponds to no offspring law.
#[derive(Debug, Clone, PartialEq)]
pub enum Rejection {
    /// Only point evaluations were supplied.
    Unverifiable,
    InvalidSupport { upper_support: f64 },
    /// Condition (i): a series coefficient is negative.
    NegativeCoefficient { degree: usize, value: f64 },
    /// `k(pi-) > 1`, so the candidate is not a distribution function.
    NotADistribution { left_limit: f64 },
    /// Condition (ii)(a) forces `c = 1 - int_0^1 k`, which is not positive.
    NonPositiveConstant { constant: f64 },
    /// Condition (ii)(b): `g(pi) != pi` for the constant fixed by (ii)(a).
    FixedPointMismatch { g_at_pi: f64, upper_support: f64 },
    /// The reconstructed pmf failed validation.
    InvalidLaw(String),
}

/// Result of [`invert_to_offspring`]; a rejection is a value, not an error.
#[derive(Debug, Clone, PartialEq)]
pub enum Inversion {
    Accepted {
        law: OffspringLaw,
        /// `c = g(0) = P(Y = 0)`.
        constant: f64,
    },
    Rejected(Rejection),
}

impl Inversion {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Inversion::Accepted { .. })
    }

    pub fn law(&self) -> Option<&OffspringLaw> {
        match self {
            Inversion::Accepted { law, .. } => Some(law),
            Inversion::Rejected(_) => None,
        }
    }
}

/// Recovers the offspring law whose observation CDF is `candidate`.
///
/// The constant of condition (ii) is pinned by `g(1) = 1`, so at most one
/// `c` is admissible; the candidate is accepted when that `c` is positive
/// and also satisfies `g(pi) = pi`.
pub fn invert_to_offspring(candidate: &CandidateCdf) -> Inversion {
    let pi = candidate.upper_support;
    if !(pi > 0.0 && pi <= 1.0) {
        return Inversion::Rejected(Rejection::InvalidSupport { upper_support: pi });
    }
    let coefficients = match candidate.coefficients() {
        Some(c) => c,
        None => return Inversion::Rejected(Rejection::Unverifiable),
    };
    if let Some((degree, &value)) = coefficients
        .iter()
        .enumerate()
        .find(|(_, a)| !(**a >= 0.0))
    {
        return Inversion::Rejected(Rejection::NegativeCoefficient { degree, value });
    }
    let left_limit = horner(&coefficients, pi);
    if left_limit > 1.0 + FIXED_POINT_MATCH {
        return Inversion::Rejected(Rejection::NotADistribution { left_limit });
    }

    // p_k = a_{k-1} / k, so int_0^s k = sum_{k>=1} p_k s^k
    let mut pmf = Vec::with_capacity(coefficients.len() + 1);
    pmf.push(0.0);
    pmf.extend(
        coefficients
            .iter()
            .enumerate()
            .map(|(j, a)| a / (j as f64 + 1.0)),
    );
    let integral_to_one: f64 = pmf.iter().sum();
    let constant = 1.0 - integral_to_one;
    if !(constant > 0.0) {
        return Inversion::Rejected(Rejection::NonPositiveConstant { constant });
    }
    let g_at_pi = if pi == 1.0 {
        1.0
    } else {
        constant + pmf.iter().rev().fold(0.0, |acc, p| acc * pi + p)
    };
    if (g_at_pi - pi).abs() > FIXED_POINT_MATCH {
        return Inversion::Rejected(Rejection::FixedPointMismatch {
            g_at_pi,
            upper_support: pi,
        });
    }
    pmf[0] = constant;
    match OffspringLaw::from_pmf(pmf) {
        Ok(law) => Inversion::Accepted { law, constant },
        Err(e) => Inversion::Rejected(Rejection::InvalidLaw(e.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bernoulli_maps_to_flipped_bernoulli() {
        let x = StoppingLaw::from_offspring(&OffspringLaw::bernoulli(0.3).unwrap());
        assert_eq!(x.upper_support(), 1.0);
        assert!((x.atom_at_zero() - 0.3).abs() < 1e-15);
        assert!((x.atom_at_pi() - 0.7).abs() < 1e-15);
        assert_eq!(x.density(0.5), 0.0);
    }

    #[test]
    fn critical_binary_splitting_is_uniform() {
        let x = StoppingLaw::from_offspring(&OffspringLaw::mbernoulli(2, 0.5).unwrap());
        assert_eq!(x.atom_at_zero(), 0.0);
        assert!(x.atom_at_pi().abs() < 1e-15);
        for t in [0.1, 0.25, 0.9] {
            assert!((x.cdf(t) - t).abs() < 1e-15);
        }
        let h = x.payoff_h(0.5, PayoffMode::Quadrature).unwrap();
        assert!((h - 0.625).abs() < 1e-12);
    }

    #[test]
    fn supercritical_binary_splitting_mixture() {
        let p = 0.75;
        let x = StoppingLaw::from_offspring(&OffspringLaw::mbernoulli(2, p).unwrap());
        let pi = (1.0 - p) / p;
        assert!((x.upper_support() - pi).abs() < 1e-13);
        assert!((x.atom_at_pi() - (2.0 * p - 1.0)).abs() < 1e-12);
        // uniform part has density 2(1-p)/pi on (0, pi)
        assert!((x.density(0.1) - 2.0 * (1.0 - p) / pi).abs() < 1e-12);
    }

    #[test]
    fn singular_density_keeps_mass() {
        let x = StoppingLaw::from_offspring(&OffspringLaw::slack(0.5, 0.5).unwrap());
        assert!((x.total_mass() - 1.0).abs() < 1e-10);
        for a in [0.0, 0.3, 0.9, 0.999] {
            let q = x.payoff_h(a, PayoffMode::Quadrature).unwrap();
            let c = x.payoff_h(a, PayoffMode::ClosedForm).unwrap();
            assert!((q - c).abs() < 1e-10, "a = {a}: {q} vs {c}");
        }
    }

    #[test]
    fn cdf_branches() {
        let x = StoppingLaw::from_offspring(&OffspringLaw::poisson(2.0).unwrap());
        assert_eq!(x.cdf(-0.1), 0.0);
        assert_eq!(x.cdf(x.upper_support()), 1.0);
        let t = 0.1;
        assert!((x.cdf(t) - 2.0 * (2.0 * (t - 1.0)).exp()).abs() < 1e-15);
    }

    #[test]
    fn payoff_examples() {
        let law = OffspringLaw::poisson(2.0).unwrap();
        let x = StoppingLaw::from_offspring(&law);
        let pi = x.upper_support();
        let at_zero = x.payoff_h(0.0, PayoffMode::Quadrature).unwrap();
        assert!((at_zero - law.p0()).abs() < 1e-11);
        assert!((x.payoff_h(pi, PayoffMode::ClosedForm).unwrap() - pi).abs() < 1e-13);
        assert!((x.payoff_h(pi, PayoffMode::Quadrature).unwrap() - pi).abs() < 1e-11);
        assert!(x.payoff_h(1.2, PayoffMode::ClosedForm).is_err());
    }

    #[test]
    fn above_pi_payoff_is_identity_while_g_is_below() {
        let law = OffspringLaw::mbernoulli(2, 0.75).unwrap();
        let x = StoppingLaw::from_offspring(&law);
        for a in [0.4, 0.6, 0.95] {
            assert_eq!(x.payoff_h(a, PayoffMode::Quadrature).unwrap(), a);
            assert!(law.eval(a) < a);
        }
    }

    #[test]
    fn quantile_branches() {
        let x = StoppingLaw::from_offspring(&OffspringLaw::from_pmf(vec![0.2, 0.3, 0.5]).unwrap());
        assert_eq!(x.quantile(0.1), 0.0);
        assert_eq!(x.quantile(0.9999), x.upper_support());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let v = x.sample(&mut rng);
            assert!((0.0..=x.upper_support()).contains(&v));
        }
    }

    #[test]
    fn round_trip_recovers_pmf() {
        let law = OffspringLaw::from_pmf(vec![0.2, 0.1, 0.3, 0.4]).unwrap();
        let x = StoppingLaw::from_offspring(&law);
        let back = invert_to_offspring(&x.to_candidate(64));
        let recovered = back.law().expect("accepted");
        for k in 0..4 {
            assert!((recovered.pmf(k) - law.pmf(k)).abs() < 1e-10);
        }
    }

    #[test]
    fn rejections() {
        let neg = CandidateCdf::polynomial(1.0, vec![0.2, -0.1, 0.5]);
        assert!(matches!(
            invert_to_offspring(&neg),
            Inversion::Rejected(Rejection::NegativeCoefficient { degree: 1, .. })
        ));
        let opaque = CandidateCdf {
            upper_support: 1.0,
            series: CdfSeries::Opaque(Arc::new(|x| x)),
        };
        assert_eq!(
            invert_to_offspring(&opaque),
            Inversion::Rejected(Rejection::Unverifiable)
        );
        // k = 2x integrates to 1 on [0,1], leaving no room for P(Y = 0)
        let full = CandidateCdf::polynomial(1.0, vec![0.0, 2.0]);
        assert!(matches!(
            invert_to_offspring(&full),
            Inversion::Rejected(Rejection::NotADistribution { .. })
                | Inversion::Rejected(Rejection::NonPositiveConstant { .. })
        ));
    }
}
