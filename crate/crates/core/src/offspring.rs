//! Offspring laws and their probability generating functions.
//!
//! An [`OffspringLaw`] is a nonnegative, nondegenerate integer distribution.
//! Every family with infinite support carries a closed-form generating
//! function; explicit pmfs are evaluated as polynomials. Besides `g`, `g'`
//! and `g''` the type exposes *decrements* `g(x) - g(x - e)` computed without
//! cancellation, which is what lets the rate code follow gaps like `pi - q_n`
//! far below machine epsilon.

use std::fmt;

use crate::error::{check_unit, Error, Result};
use crate::roots::bisect;

/// Allowed deviation of an explicit pmf's total mass from one.
pub const PMF_SUM_TOLERANCE: f64 = 1e-12;
/// Tail mass at which infinite-support pmf tables are cut off.
pub const TAIL_MASS: f64 = 1e-14;
/// Band around `EY = 1` treated as critical.
pub const CRITICALITY_TOLERANCE: f64 = 1e-12;
/// Absolute tolerance of the fixed-point search.
pub const FIXED_POINT_TOLERANCE: f64 = 1e-13;

/// Parametric family of an offspring law.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// `P(Y = 1) = p`, `P(Y = 0) = 1 - p`.
    Bernoulli { p: f64 },
    /// `P(Y = m) = p`, `P(Y = 0) = 1 - p`.
    MBernoulli { m: u32, p: f64 },
    Poisson { lambda: f64 },
    /// `P(Y = k) = b c^(k-1)` for `k >= 1`; fractional-linear generating function.
    GeneralizedGeometric { b: f64, c: f64 },
    /// Critical law with `g(s) = s + c (1 - s)^(1 + alpha)`.
    Slack { alpha: f64, c: f64 },
    ExplicitPmf { pmf: Vec<f64> },
}

/// Supercritical, critical or subcritical, judged by the mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Criticality {
    Subcritical,
    Critical,
    Supercritical,
}

impl fmt::Display for Criticality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criticality::Subcritical => "subcritical",
            Criticality::Critical => "critical",
            Criticality::Supercritical => "supercritical",
        })
    }
}

/// Mean and variance; the variance is `f64::INFINITY` when `g''(1)` diverges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
}

impl Moments {
    pub fn has_finite_variance(&self) -> bool {
        self.variance.is_finite()
    }
}

/// A validated offspring distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringLaw {
    family: Family,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

fn open_unit(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} = {v} must lie in (0, 1)")))
    }
}

impl OffspringLaw {
    /// Validates `family`, rejecting laws with `P(Y = 0) = 0`.
    pub fn new(family: Family) -> Result<Self> {
        Self::build(family, false)
    }

    /// Like [`OffspringLaw::new`] but admits `P(Y = 0) = 0`, for which the
    /// eventual extinction probability is zero.
    pub fn new_allowing_sure_survival(family: Family) -> Result<Self> {
        Self::build(family, true)
    }

    fn build(family: Family, allow_zero_p0: bool) -> Result<Self> {
        let family = match family {
            Family::Bernoulli { p } => {
                open_unit("p", p)?;
                Family::Bernoulli { p }
            }
            Family::MBernoulli { m, p } => {
                if m < 2 {
                    return Err(invalid(format!("m = {m} must be at least 2")));
                }
                open_unit("p", p)?;
                Family::MBernoulli { m, p }
            }
            Family::Poisson { lambda } => {
                if !(lambda.is_finite() && lambda > 0.0) {
                    return Err(invalid(format!("lambda = {lambda} must be positive")));
                }
                Family::Poisson { lambda }
            }
            Family::GeneralizedGeometric { b, c } => {
                if !(b.is_finite() && c.is_finite() && b > 0.0 && c > 0.0 && b + c < 1.0) {
                    return Err(invalid(format!(
                        "generalized geometric needs b, c > 0 and b + c < 1 (got b = {b}, c = {c})"
                    )));
                }
                Family::GeneralizedGeometric { b, c }
            }
            Family::Slack { alpha, c } => {
                if !(alpha.is_finite() && alpha > 0.0 && alpha <= 1.0) {
                    return Err(invalid(format!("alpha = {alpha} must lie in (0, 1]")));
                }
                if !(c.is_finite() && c > 0.0 && c <= 1.0 / (1.0 + alpha)) {
                    return Err(invalid(format!(
                        "c = {c} must lie in (0, 1/(1 + alpha)] = (0, {}]",
                        1.0 / (1.0 + alpha)
                    )));
                }
                Family::Slack { alpha, c }
            }
            Family::ExplicitPmf { mut pmf } => {
                if pmf.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return Err(invalid("pmf entries must be finite and nonnegative"));
                }
                while pmf.len() > 1 && pmf[pmf.len() - 1] == 0.0 {
                    pmf.pop();
                }
                let total: f64 = pmf.iter().sum();
                if (total - 1.0).abs() > PMF_SUM_TOLERANCE {
                    return Err(invalid(format!("pmf sums to {total}, not 1")));
                }
                if pmf.iter().any(|&p| p >= 1.0) {
                    return Err(invalid("pmf is degenerate (a single value has mass 1)"));
                }
                Family::ExplicitPmf { pmf }
            }
        };
        let law = OffspringLaw { family };
        if !allow_zero_p0 && law.p0() <= 0.0 {
            return Err(invalid(
                "P(Y = 0) = 0; use new_allowing_sure_survival to admit this case",
            ));
        }
        Ok(law)
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        Self::new(Family::Bernoulli { p })
    }

    pub fn mbernoulli(m: u32, p: f64) -> Result<Self> {
        Self::new(Family::MBernoulli { m, p })
    }

    pub fn poisson(lambda: f64) -> Result<Self> {
        Self::new(Family::Poisson { lambda })
    }

    pub fn generalized_geometric(b: f64, c: f64) -> Result<Self> {
        Self::new(Family::GeneralizedGeometric { b, c })
    }

    /// Geometric law with success probability `p`: `P(Y = k) = p q^k`,
    /// i.e. the generalized geometric law with `b = p q`, `c = q`.
    pub fn geometric(p: f64) -> Result<Self> {
        open_unit("p", p)?;
        let q = 1.0 - p;
        Self::generalized_geometric(p * q, q)
    }

    pub fn slack(alpha: f64, c: f64) -> Result<Self> {
        Self::new(Family::Slack { alpha, c })
    }

    pub fn from_pmf(pmf: Vec<f64>) -> Result<Self> {
        Self::new(Family::ExplicitPmf { pmf })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Number of support points `0..len` for finite-support laws.
    pub fn support_len(&self) -> Option<usize> {
        match &self.family {
            Family::Bernoulli { .. } => Some(2),
            Family::MBernoulli { m, .. } => Some(*m as usize + 1),
            Family::Slack { alpha, .. } if *alpha == 1.0 => Some(3),
            Family::ExplicitPmf { pmf } => Some(pmf.len()),
            _ => None,
        }
    }

    pub fn pmf(&self, k: usize) -> f64 {
        match &self.family {
            Family::Bernoulli { p } => match k {
                0 => 1.0 - p,
                1 => *p,
                _ => 0.0,
            },
            Family::MBernoulli { m, p } => {
                if k == 0 {
                    1.0 - p
                } else if k == *m as usize {
                    *p
                } else {
                    0.0
                }
            }
            Family::Poisson { lambda } => {
                let ln_fact: f64 = (1..=k).map(|j| (j as f64).ln()).sum();
                (-lambda + k as f64 * lambda.ln() - ln_fact).exp()
            }
            Family::GeneralizedGeometric { b, c } => {
                if k == 0 {
                    (1.0 - b - c) / (1.0 - c)
                } else {
                    b * c.powi(k as i32 - 1)
                }
            }
            Family::Slack { alpha, c } => match k {
                0 => *c,
                1 => 1.0 - (1.0 + alpha) * c,
                _ => {
                    let mut term = c * (1.0 + alpha) * alpha / 2.0;
                    for j in 2..k {
                        term *= (j as f64 - 1.0 - alpha) / (j as f64 + 1.0);
                    }
                    term
                }
            },
            Family::ExplicitPmf { pmf } => pmf.get(k).copied().unwrap_or(0.0),
        }
    }

    /// Leading pmf values `p_0, p_1, ...`: the full support when finite,
    /// otherwise until the remaining tail mass drops below `tail` or
    /// `max_len` entries have been produced.
    pub fn pmf_table(&self, tail: f64, max_len: usize) -> Vec<f64> {
        if let Some(len) = self.support_len() {
            return (0..len).map(|k| self.pmf(k)).collect();
        }
        let mut out = Vec::new();
        match &self.family {
            Family::Poisson { lambda } => {
                let mut term = (-lambda).exp();
                let mut cum = 0.0;
                let mut k = 0usize;
                while out.len() < max_len {
                    out.push(term);
                    cum += term;
                    k += 1;
                    // stop only once past the mode, where the tail is monotone
                    if k as f64 > *lambda && 1.0 - cum < tail {
                        break;
                    }
                    term *= lambda / k as f64;
                }
            }
            Family::GeneralizedGeometric { b, c } => {
                out.push(self.pmf(0));
                let mut term = *b;
                // tail beyond k is b c^k / (1 - c)
                while out.len() < max_len {
                    out.push(term);
                    if term * c / (1.0 - c) < tail {
                        break;
                    }
                    term *= c;
                }
            }
            Family::Slack { alpha, c } => {
                out.push(*c);
                out.push(1.0 - (1.0 + alpha) * c);
                let mut term = c * (1.0 + alpha) * alpha / 2.0;
                // survival P(Y > k) follows the ratio (k - alpha)/(k + 1)
                let mut survival = alpha * c;
                let mut k = 2usize;
                while out.len() < max_len {
                    out.push(term);
                    survival -= term;
                    if survival < tail {
                        break;
                    }
                    term *= (k as f64 - 1.0 - alpha) / (k as f64 + 1.0);
                    k += 1;
                }
            }
            _ => unreachable!("finite-support families handled above"),
        }
        out
    }

    pub fn p0(&self) -> f64 {
        self.pmf(0)
    }

    pub fn p1(&self) -> f64 {
        self.pmf(1)
    }

    /// `P(Y <= 1)`.
    pub fn mass_at_most_one(&self) -> f64 {
        self.p0() + self.p1()
    }

    /// Generating function `g(s) = E s^Y` on `[0, 1]`.
    pub fn g(&self, s: f64) -> Result<f64> {
        check_unit("s", s)?;
        Ok(self.eval(s))
    }

    /// `g(s)` without the domain check.
    pub fn eval(&self, s: f64) -> f64 {
        match &self.family {
            Family::Bernoulli { p } => (1.0 - p) + p * s,
            Family::MBernoulli { m, p } => (1.0 - p) + p * s.powi(*m as i32),
            Family::Poisson { lambda } => (lambda * (s - 1.0)).exp(),
            Family::GeneralizedGeometric { b, c } => {
                (1.0 - b - c) / (1.0 - c) + b * s / (1.0 - c * s)
            }
            Family::Slack { alpha, c } => s + c * (1.0 - s).powf(1.0 + alpha),
            Family::ExplicitPmf { pmf } => pmf.iter().rev().fold(0.0, |acc, p| acc * s + p),
        }
    }

    /// First or second derivative of `g`. At `s = 1` this is the analytic
    /// limit, which is infinite for the second derivative of heavy-tailed laws.
    pub fn g_derivative(&self, s: f64, order: u32) -> Result<f64> {
        check_unit("s", s)?;
        match order {
            1 => Ok(self.derivative(s)),
            2 => Ok(self.second_derivative(s)),
            other => Err(Error::UnsupportedOrder(other)),
        }
    }

    /// `g'(s)` without the domain check.
    pub fn derivative(&self, s: f64) -> f64 {
        match &self.family {
            Family::Bernoulli { p } => *p,
            Family::MBernoulli { m, p } => *m as f64 * p * s.powi(*m as i32 - 1),
            Family::Poisson { lambda } => lambda * (lambda * (s - 1.0)).exp(),
            Family::GeneralizedGeometric { b, c } => {
                let d = 1.0 - c * s;
                b / (d * d)
            }
            Family::Slack { alpha, c } => 1.0 - c * (1.0 + alpha) * (1.0 - s).powf(*alpha),
            Family::ExplicitPmf { pmf } => pmf
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, p)| acc * s + k as f64 * p),
        }
    }

    /// `g''(s)` without the domain check.
    pub fn second_derivative(&self, s: f64) -> f64 {
        match &self.family {
            Family::Bernoulli { .. } => 0.0,
            Family::MBernoulli { m, p } => {
                let m = *m as i32;
                (m * (m - 1)) as f64 * p * s.powi(m - 2)
            }
            Family::Poisson { lambda } => lambda * lambda * (lambda * (s - 1.0)).exp(),
            Family::GeneralizedGeometric { b, c } => {
                let d = 1.0 - c * s;
                2.0 * b * c / (d * d * d)
            }
            Family::Slack { alpha, c } => {
                if *alpha == 1.0 {
                    2.0 * c
                } else if s >= 1.0 {
                    f64::INFINITY
                } else {
                    c * (1.0 + alpha) * alpha * (1.0 - s).powf(alpha - 1.0)
                }
            }
            Family::ExplicitPmf { pmf } => pmf
                .iter()
                .enumerate()
                .skip(2)
                .rev()
                .fold(0.0, |acc, (k, p)| acc * s + (k * (k - 1)) as f64 * p),
        }
    }

    /// `g''(1 - d)`, keeping full relative precision in `d` where `g''`
    /// is singular at one.
    pub fn second_derivative_complement(&self, d: f64) -> f64 {
        match &self.family {
            Family::Slack { alpha, c } if *alpha != 1.0 => {
                if d <= 0.0 {
                    f64::INFINITY
                } else {
                    c * (1.0 + alpha) * alpha * d.powf(alpha - 1.0)
                }
            }
            _ => self.second_derivative(1.0 - d),
        }
    }

    /// `g(x) - g(x - e)` for `0 <= e <= x <= 1`, accurate to relative
    /// precision even when `e` is far below machine epsilon.
    pub fn decrement(&self, x: f64, e: f64) -> f64 {
        if e <= 0.0 {
            return 0.0;
        }
        // x^k - (x - e)^k = x^k (1 - (1 - e/x)^k)
        let power_drop = |k: f64| -> f64 { x.powf(k) * -(k * (-e / x).ln_1p()).exp_m1() };
        match &self.family {
            Family::Bernoulli { p } => p * e,
            Family::MBernoulli { m, p } => p * power_drop(*m as f64),
            Family::Poisson { lambda } => self.eval(x) * -(-lambda * e).exp_m1(),
            Family::GeneralizedGeometric { b, c } => {
                b * e / ((1.0 - c * x) * (1.0 - c * (x - e)))
            }
            Family::Slack { alpha, c } => {
                let gap = 1.0 - x;
                let rise = if gap == 0.0 {
                    e.powf(1.0 + alpha)
                } else {
                    gap.powf(1.0 + alpha) * ((1.0 + alpha) * (e / gap).ln_1p()).exp_m1()
                };
                e - c * rise
            }
            Family::ExplicitPmf { pmf } => pmf
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, p)| p * power_drop(k as f64))
                .sum(),
        }
    }

    /// `g'(x) - g'(x - e)` for `0 <= e <= x <= 1`, cancellation-free.
    pub fn derivative_decrement(&self, x: f64, e: f64) -> f64 {
        if e <= 0.0 {
            return 0.0;
        }
        let power_drop = |k: f64| -> f64 {
            if k == 0.0 {
                0.0
            } else {
                x.powf(k) * -(k * (-e / x).ln_1p()).exp_m1()
            }
        };
        match &self.family {
            Family::Bernoulli { .. } => 0.0,
            Family::MBernoulli { m, p } => *m as f64 * p * power_drop(*m as f64 - 1.0),
            Family::Poisson { lambda } => lambda * self.eval(x) * -(-lambda * e).exp_m1(),
            Family::GeneralizedGeometric { b, c } => {
                let hi = 1.0 - c * x;
                let lo = 1.0 - c * (x - e);
                b * c * e * (hi + lo) / (hi * hi * lo * lo)
            }
            Family::Slack { alpha, c } => {
                let gap = 1.0 - x;
                let rise = if gap == 0.0 {
                    e.powf(*alpha)
                } else {
                    gap.powf(*alpha) * (alpha * (e / gap).ln_1p()).exp_m1()
                };
                c * (1.0 + alpha) * rise
            }
            Family::ExplicitPmf { pmf } => pmf
                .iter()
                .enumerate()
                .skip(2)
                .map(|(k, p)| k as f64 * p * power_drop(k as f64 - 1.0))
                .sum(),
        }
    }

    /// `1 - g(1 - d)`.
    pub fn complement(&self, d: f64) -> f64 {
        self.decrement(1.0, d)
    }

    pub fn mean(&self) -> f64 {
        self.moments().mean
    }

    pub fn moments(&self) -> Moments {
        let mean = match &self.family {
            Family::Bernoulli { p } => *p,
            Family::MBernoulli { m, p } => *m as f64 * p,
            Family::Poisson { lambda } => *lambda,
            Family::GeneralizedGeometric { b, c } => b / ((1.0 - c) * (1.0 - c)),
            Family::Slack { .. } => 1.0,
            Family::ExplicitPmf { pmf } => pmf
                .iter()
                .enumerate()
                .map(|(k, p)| k as f64 * p)
                .sum(),
        };
        let factorial_moment = self.second_derivative(1.0);
        let variance = if factorial_moment.is_finite() {
            factorial_moment + mean - mean * mean
        } else {
            f64::INFINITY
        };
        Moments { mean, variance }
    }

    pub fn criticality(&self) -> Criticality {
        let m = self.mean();
        if m > 1.0 + CRITICALITY_TOLERANCE {
            Criticality::Supercritical
        } else if m < 1.0 - CRITICALITY_TOLERANCE {
            Criticality::Subcritical
        } else {
            Criticality::Critical
        }
    }

    /// Exponent of the regular variation of `1 - g'(s)` at `s = 1`: the
    /// heavy-tailed critical family carries its own `alpha`, every law with
    /// a finite second factorial moment has exponent one.
    pub fn tail_exponent(&self) -> f64 {
        match &self.family {
            Family::Slack { alpha, .. } => *alpha,
            _ => 1.0,
        }
    }

    /// Smallest root of `g(s) = s` on `[0, 1]`.
    pub fn eventual_extinction(&self) -> f64 {
        if self.p0() <= 0.0 {
            return 0.0;
        }
        if self.mean() <= 1.0 + CRITICALITY_TOLERANCE {
            return 1.0;
        }
        // g(s) - s, with the part near 1 rewritten as (1-s) - (1 - g(s))
        let excess = |s: f64| -> f64 {
            if let Family::ExplicitPmf { pmf } = &self.family {
                return pmf_excess(pmf, s);
            }
            if s < 0.5 {
                self.eval(s) - s
            } else {
                let d = 1.0 - s;
                d - self.complement(d)
            }
        };
        let mut delta = 1e-9;
        if excess(1.0 - delta) >= 0.0 {
            // root hugs 1; search below the starting offset
            while delta > 1e-300 && excess(1.0 - delta) >= 0.0 {
                delta *= 0.5;
            }
            if excess(1.0 - delta) >= 0.0 {
                return 1.0;
            }
            return bisect(excess, 1.0 - 2.0 * delta, 1.0 - delta, FIXED_POINT_TOLERANCE * 1e-3);
        }
        // grow the offset while the bracket still has the right sign at its top
        while delta < 0.25 && excess(1.0 - 2.0 * delta) < 0.0 {
            delta *= 2.0;
        }
        bisect(excess, 0.0, 1.0 - delta, FIXED_POINT_TOLERANCE * 1e-3)
    }

    /// `q_1, ..., q_n` with `q_k = g^(k)(0)`.
    pub fn extinction_sequence(&self, n: usize) -> Vec<f64> {
        let mut q = 0.0;
        (0..n)
            .map(|_| {
                q = self.eval(q);
                q
            })
            .collect()
    }

    /// `q_n = P(Z_n = 0)` for the homogeneous process.
    pub fn extinction_probability(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(invalid("horizon n must be at least 1"));
        }
        Ok(*self.extinction_sequence(n).last().expect("n >= 1"))
    }
}

/// `g(s) - s` for an explicit pmf with the `p_1 s` term folded into
/// `P(Y != 1)`, so laws close to the identity keep their relative precision.
fn pmf_excess(pmf: &[f64], s: f64) -> f64 {
    let off_one: f64 = pmf.iter().enumerate().filter(|(k, _)| *k != 1).map(|(_, p)| p).sum();
    if s < 0.5 {
        let higher: f64 = pmf.iter().enumerate().skip(2).map(|(k, p)| p * s.powi(k as i32)).sum();
        pmf[0] - off_one * s + higher
    } else {
        let d = 1.0 - s;
        let drops: f64 = pmf
            .iter()
            .enumerate()
            .skip(2)
            .map(|(k, p)| -p * (k as f64 * (-d).ln_1p()).exp_m1())
            .sum();
        off_one * d - drops
    }
}

impl fmt::Display for OffspringLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            Family::Bernoulli { p } => write!(f, "bernoulli(p={p})"),
            Family::MBernoulli { m, p } => write!(f, "mbernoulli(m={m}, p={p})"),
            Family::Poisson { lambda } => write!(f, "poisson(lambda={lambda})"),
            Family::GeneralizedGeometric { b, c } => write!(f, "gg(b={b}, c={c})"),
            Family::Slack { alpha, c } => write!(f, "slack(alpha={alpha}, c={c})"),
            Family::ExplicitPmf { pmf } => {
                write!(f, "pmf(")?;
                for (i, p) in pmf.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{p}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// `g_1(g_2(... g_n(s)))`, evaluated innermost first.
pub fn iterate_g(laws: &[OffspringLaw], s: f64) -> Result<f64> {
    check_unit("s", s)?;
    if laws.is_empty() {
        return Err(invalid("iterate_g needs at least one law"));
    }
    Ok(laws.iter().rev().fold(s, |acc, law| law.eval(acc)))
}

/// `P(Z_n = 0)` for the process whose generation `i` reproduces like `laws[i-1]`.
pub fn extinction_prob(laws: &[OffspringLaw], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(invalid("horizon n must be at least 1"));
    }
    if laws.len() < n {
        return Err(Error::InsufficientLaws {
            requested: n,
            available: laws.len(),
        });
    }
    iterate_g(&laws[..n], 0.0)
}
