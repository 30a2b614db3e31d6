//! Extinction in varying environments.
//!
//! Covers the two-path identity between composed generating functions and
//! composed payoff operators when the fixed points are ordered, the
//! divergence criterion for a common fixed point, and fractional-linear
//! (generalized geometric) laws, whose compositions stay fractional-linear.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::correspondence::{PayoffMode, StoppingLaw};
use crate::environment::{Environment, Summability};
use crate::error::{Error, Result};
use crate::offspring::{iterate_g, Family, OffspringLaw};
use crate::stopping::value_sequence;

/// Agreement required between the generating-function and payoff paths.
pub const TWO_PATH_TOLERANCE: f64 = 1e-9;
/// Slack allowed when comparing fixed points for ordering or equality.
pub const FIXED_POINT_MATCH: f64 = 1e-10;
/// Tolerance on `alpha_1 / delta_1 = alpha_2 / delta_2`.
pub const RATIO_MATCH: f64 = 1e-12;

/// `g(s) = (alpha + beta s) / (gamma + delta s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MoebiusCoefficients {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl MoebiusCoefficients {
    pub fn new(alpha: f64, beta: f64, gamma: f64, delta: f64) -> Self {
        MoebiusCoefficients {
            alpha,
            beta,
            gamma,
            delta,
        }
    }

    /// Coefficients of the generalized geometric law `GG(b, c)`.
    pub fn from_gg(b: f64, c: f64) -> Self {
        MoebiusCoefficients {
            alpha: 1.0 - b - c,
            beta: b - c * (1.0 - c),
            gamma: 1.0 - c,
            delta: -c * (1.0 - c),
        }
    }

    /// Coefficients of a Bernoulli (linear) or generalized geometric law.
    pub fn from_law(law: &OffspringLaw) -> Result<Self> {
        match law.family() {
            Family::Bernoulli { p } => Ok(MoebiusCoefficients::new(1.0 - p, *p, 1.0, 0.0)),
            Family::GeneralizedGeometric { b, c } => Ok(MoebiusCoefficients::from_gg(*b, *c)),
            _ => Err(Error::InvalidParameter(format!(
                "{law} has no fractional-linear generating function"
            ))),
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        (self.alpha + self.beta * s) / (self.gamma + self.delta * s)
    }

    /// Coefficients of `self(inner(s))`.
    pub fn compose(&self, inner: &MoebiusCoefficients) -> Self {
        let (a1, b1, g1, d1) = (self.alpha, self.beta, self.gamma, self.delta);
        let (a2, b2, g2, d2) = (inner.alpha, inner.beta, inner.gamma, inner.delta);
        MoebiusCoefficients {
            alpha: a1 * g2 + b1 * a2,
            beta: a1 * d2 + b1 * b2,
            gamma: g1 * g2 + d1 * a2,
            delta: g1 * d2 + d1 * b2,
        }
    }

    /// `g(1) = 1` in coefficient form: `alpha + beta = gamma + delta`.
    pub fn preserves_one(&self, tol: f64) -> bool {
        let scale = self.gamma.abs().max(self.delta.abs()).max(f64::MIN_POSITIVE);
        ((self.alpha + self.beta) - (self.gamma + self.delta)).abs() <= tol * scale
    }

    /// `-alpha / delta`, the second fixed point besides one.
    pub fn finite_fixed_point(&self) -> Result<f64> {
        if self.delta == 0.0 {
            return Err(Error::Degenerate("linear generating function (delta = 0)".into()));
        }
        Ok(-self.alpha / self.delta)
    }
}

/// Whether two fractional-linear laws commute under composition, that is
/// `alpha_1 / delta_1 = alpha_2 / delta_2`.
pub fn permutation_invariant(g1: &MoebiusCoefficients, g2: &MoebiusCoefficients) -> Result<bool> {
    Ok((g1.finite_fixed_point()? - g2.finite_fixed_point()?).abs() <= RATIO_MATCH)
}

/// Elementary symmetric sums `S_0 = 1, S_1, ..., S_n` of `c`, by the
/// recurrence `S_j <- S_j + c_k S_{j-1}`.
pub fn elementary_symmetric(c: &[f64]) -> Vec<f64> {
    let mut s = vec![0.0; c.len() + 1];
    s[0] = 1.0;
    for (k, &ck) in c.iter().enumerate() {
        for j in (1..=k + 1).rev() {
            s[j] += ck * s[j - 1];
        }
    }
    s
}

fn exact_elementary_symmetric(c: &[BigRational]) -> Vec<BigRational> {
    let mut s = vec![BigRational::zero(); c.len() + 1];
    s[0] = BigRational::one();
    for (k, ck) in c.iter().enumerate() {
        for j in (1..=k + 1).rev() {
            let add = ck * &s[j - 1];
            s[j] += add;
        }
    }
    s
}

/// Closed form for a chain of critical generalized geometric laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GgClosedForm {
    /// Coefficients of `g_1 o ... o g_n`.
    pub coefficients: MoebiusCoefficients,
    /// `q_n = alpha^(n) / gamma^(n)`.
    pub extinction: f64,
}

/// `g_1 o ... o g_n` for the critical laws `GG((1 - c_i)^2, c_i)`.
///
/// The coefficients are alternating sums of elementary symmetric sums
/// whose terms dwarf the result (the sums collapse to multiples of
/// `prod (1 - c_i)`), so they are evaluated in exact rational arithmetic
/// on the binary values of `c_i` and rounded once at the end.
pub fn gg_closed_form(c: &[f64]) -> Result<GgClosedForm> {
    if c.is_empty() {
        return Err(Error::InvalidParameter("at least one law is required".into()));
    }
    let exact = c
        .iter()
        .map(|&ci| {
            if !(ci > 0.0 && ci < 1.0) {
                return Err(Error::Domain {
                    name: "c",
                    value: ci,
                    domain: "(0, 1)",
                });
            }
            Ok(BigRational::from_float(ci).expect("finite"))
        })
        .collect::<Result<Vec<_>>>()?;
    let s = exact_elementary_symmetric(&exact);

    let mut alpha = BigRational::zero();
    let mut beta = BigRational::zero();
    let mut gamma = BigRational::one();
    for (j, sj) in s.iter().enumerate() {
        let jr = BigRational::from_integer(BigInt::from(j));
        let sign_even = j % 2 == 0;
        // alpha: (-1)^(j-1) j S_j, j >= 1
        if j >= 1 {
            let term = &jr * sj;
            if sign_even {
                alpha -= term;
            } else {
                alpha += term;
            }
        }
        // beta: (-1)^j (j + 1) S_j, j >= 0
        let term = (&jr + BigRational::one()) * sj;
        if sign_even {
            beta += term;
        } else {
            beta -= term;
        }
        // gamma: 1 + (-1)^(j-1) (j - 1) S_j, j >= 2
        if j >= 2 {
            let term = (&jr - BigRational::one()) * sj;
            if sign_even {
                gamma -= term;
            } else {
                gamma += term;
            }
        }
    }
    let extinction = (&alpha / &gamma).to_f64().expect("finite ratio");
    let to_f64 = |x: &BigRational| x.to_f64().expect("finite coefficient");
    Ok(GgClosedForm {
        coefficients: MoebiusCoefficients {
            alpha: to_f64(&alpha),
            beta: to_f64(&beta),
            gamma: to_f64(&gamma),
            delta: -to_f64(&alpha),
        },
        extinction,
    })
}

/// [`gg_closed_form`] for explicit laws, each of which must be a critical
/// generalized geometric law, `b = (1 - c)^2`.
pub fn gg_closed_form_for_laws(laws: &[OffspringLaw]) -> Result<GgClosedForm> {
    let c = laws
        .iter()
        .map(|law| match law.family() {
            Family::GeneralizedGeometric { b, c } if (b - (1.0 - c) * (1.0 - c)).abs() <= 1e-12 => {
                Ok(*c)
            }
            _ => Err(Error::Precondition(format!(
                "{law} is not a critical generalized geometric law"
            ))),
        })
        .collect::<Result<Vec<_>>>()?;
    gg_closed_form(&c)
}

/// The critical law `GG((1 - c)^2, c)`.
pub fn critical_gg(c: f64) -> Result<OffspringLaw> {
    OffspringLaw::generalized_geometric((1.0 - c) * (1.0 - c), c)
}

/// Offspring law with `P(Y = 0) = r/3`, `P(Y = 1) = 1 - r`,
/// `P(Y = 2) = 2r/3`. Its fixed point is `1/2` for every `r`.
pub fn trinomial_law(r: f64) -> Result<OffspringLaw> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::Domain {
            name: "r",
            value: r,
            domain: "(0, 1]",
        });
    }
    OffspringLaw::from_pmf(vec![r / 3.0, 1.0 - r, 2.0 * r / 3.0])
}

/// Trinomial laws with rates `rate(i)` for generations `1..=horizon_cap`.
pub fn trinomial_environment<F>(rate: F, horizon_cap: usize, summability: Summability) -> Environment
where
    F: Fn(usize) -> f64 + Send + Sync + 'static,
{
    Environment::generated(move |i| trinomial_law(rate(i)), horizon_cap).with_summability(summability)
}

/// `r_i = 1 / (i + 1)^2`.
pub fn inverse_square_rate(i: usize) -> f64 {
    let k = (i + 1) as f64;
    1.0 / (k * k)
}

/// Extinction by generation `n`, with the payoff-operator cross-check when
/// the fixed points are nonincreasing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InhomExtinction {
    pub n: usize,
    /// `g_1(g_2(... g_n(0)))`.
    pub extinction: f64,
    /// Whether `pi_1 >= pi_2 >= ... >= pi_n`.
    pub ordered: bool,
    /// `h_1(h_2(... h_n(0)))` by quadrature payoffs, when ordered.
    pub payoff_path: Option<f64>,
    pub agreement: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub notice: Option<String>,
}

pub fn inhom_extinction(env: &Environment, n: usize) -> Result<InhomExtinction> {
    let laws = env.laws(n)?;
    let extinction = iterate_g(&laws, 0.0)?;
    let fixed_points: Vec<f64> = laws.iter().map(OffspringLaw::eventual_extinction).collect();
    let violation = fixed_points
        .windows(2)
        .position(|w| w[1] > w[0] + FIXED_POINT_MATCH);
    match violation {
        None => {
            let x_laws: Vec<StoppingLaw> = laws.iter().map(StoppingLaw::from_offspring).collect();
            let payoff = value_sequence(&x_laws, PayoffMode::Quadrature)?.value();
            Ok(InhomExtinction {
                n,
                extinction,
                ordered: true,
                payoff_path: Some(payoff),
                agreement: Some((payoff - extinction).abs() < TWO_PATH_TOLERANCE),
                notice: None,
            })
        }
        Some(i) => Ok(InhomExtinction {
            n,
            extinction,
            ordered: false,
            payoff_path: None,
            agreement: None,
            notice: Some(format!(
                "fixed points increase at generation {} ({} < {}); payoff cross-check skipped",
                i + 2,
                fixed_points[i],
                fixed_points[i + 1]
            )),
        }),
    }
}

/// Partial sums of `r_i = P(Y_i != 1)` for a common fixed point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceReport {
    /// The common fixed point `pi_0`.
    pub fixed_point: f64,
    pub partial_sums: Vec<f64>,
    /// Declared by the environment; never inferred from the partial sums.
    pub hint: Summability,
}

impl DivergenceReport {
    pub fn total(&self) -> f64 {
        self.partial_sums.last().copied().unwrap_or(0.0)
    }
}

pub fn divergence_criterion(env: &Environment, truncation: usize) -> Result<DivergenceReport> {
    let laws = env.laws(truncation)?;
    let first = laws
        .first()
        .ok_or_else(|| Error::InvalidParameter("truncation must be at least 1".into()))?;
    let fixed_point = first.eventual_extinction();
    let mut partial_sums = Vec::with_capacity(laws.len());
    let mut total = 0.0;
    for (i, law) in laws.iter().enumerate() {
        let pi = law.eventual_extinction();
        if (pi - fixed_point).abs() > FIXED_POINT_MATCH {
            return Err(Error::Hypothesis(format!(
                "fixed point of generation {} is {pi}, not {fixed_point}",
                i + 1
            )));
        }
        total += 1.0 - law.p1();
        partial_sums.push(total);
    }
    Ok(DivergenceReport {
        fixed_point,
        partial_sums,
        hint: env.summability(),
    })
}
