//! Convergence rates of `q_n` toward `pi` in the three regimes.
//!
//! Gaps are propagated directly (`pi - q_n` or `1 - q_n`) through the
//! cancellation-free decrement of the generating function, so they keep
//! full relative precision long after `q_n` itself has rounded to its
//! limit.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::offspring::{Criticality, Family, OffspringLaw, CRITICALITY_TOLERANCE};
use crate::report::Check;

/// Relative margin for strict inequalities and equalities in bound checks.
pub const BOUND_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub n: usize,
    pub q_n: f64,
    /// The gap `pi - q_n`, `1 - q_n`, or the normalized critical statistic.
    pub statistic: f64,
    /// The bound or the limit the statistic is compared with.
    pub reference: f64,
    pub pass: bool,
    /// `n [1 - g'(q_n)]` in the critical regime.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub derivative_statistic: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub regime: Criticality,
    pub rows: Vec<RateRow>,
    /// Limit of the critical statistic.
    pub limit: Option<f64>,
    /// Limit of the critical derivative statistic, `1 + 1/alpha`.
    pub derivative_limit: Option<f64>,
    pub checks: Vec<Check>,
}

impl RateReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass) && self.checks.iter().all(|c| c.pass)
    }

    pub fn row(&self, n: usize) -> Option<&RateRow> {
        self.rows.iter().find(|r| r.n == n)
    }

    /// `|statistic / limit - 1|` at horizon `n`.
    pub fn relative_error_at(&self, n: usize) -> Option<f64> {
        let limit = self.limit?;
        self.row(n).map(|r| (r.statistic / limit - 1.0).abs())
    }
}

/// Checks `0 < pi - q_n < pi g'(pi)^n` for `n = 1..=n_max`.
pub fn supercritical_check(law: &OffspringLaw, n_max: usize) -> Result<RateReport> {
    if law.criticality() != Criticality::Supercritical {
        return Err(Error::Regime(format!("{law} is not supercritical")));
    }
    let pi = law.eventual_extinction();
    let slope = law.derivative(pi);
    let mut rows = Vec::with_capacity(n_max);
    let mut gap = pi;
    let mut bound = pi;
    for n in 1..=n_max {
        gap = law.decrement(pi, gap);
        bound *= slope;
        rows.push(RateRow {
            n,
            q_n: pi - gap,
            statistic: gap,
            reference: bound,
            pass: gap > 0.0 && gap < bound * (1.0 - BOUND_MARGIN),
            derivative_statistic: None,
        });
    }
    let checks = vec![Check::new(
        "gap strictly inside (0, pi g'(pi)^n)",
        rows.iter().all(|r| r.pass),
        format!("pi = {pi}, g'(pi) = {slope}, n <= {n_max}"),
    )];
    Ok(RateReport {
        regime: Criticality::Supercritical,
        rows,
        limit: None,
        derivative_limit: None,
        checks,
    })
}

/// Checks `0 < 1 - q_n <= (EY)^n`, with equality exactly when
/// `P(Y <= 1) = 1`.
pub fn subcritical_check(law: &OffspringLaw, n_max: usize) -> Result<RateReport> {
    if law.criticality() != Criticality::Subcritical {
        return Err(Error::Regime(format!("{law} is not subcritical")));
    }
    if law.p0() >= 1.0 {
        return Err(Error::Regime("P(Y = 0) = 1 leaves nothing to check".into()));
    }
    let mean = law.mean();
    let two_point = law.support_len().is_some_and(|len| len <= 2);
    let mut rows = Vec::with_capacity(n_max);
    let mut gap = 1.0;
    let mut bound = 1.0;
    for n in 1..=n_max {
        gap = law.complement(gap);
        bound *= mean;
        let pass = gap > 0.0
            && if two_point {
                (gap - bound).abs() <= BOUND_MARGIN * bound
            } else {
                gap < bound * (1.0 - BOUND_MARGIN)
            };
        rows.push(RateRow {
            n,
            q_n: 1.0 - gap,
            statistic: gap,
            reference: bound,
            pass,
            derivative_statistic: None,
        });
    }
    let name = if two_point {
        "1 - q_n equals (EY)^n"
    } else {
        "1 - q_n strictly below (EY)^n"
    };
    let checks = vec![Check::new(
        name,
        rows.iter().all(|r| r.pass),
        format!("EY = {mean}, P(Y <= 1) = {}, n <= {n_max}", law.mass_at_most_one()),
    )];
    Ok(RateReport {
        regime: Criticality::Subcritical,
        rows,
        limit: None,
        derivative_limit: None,
        checks,
    })
}

/// The critical statistic and its limit: `n (1 - q_n)^alpha -> 1/(c alpha)`
/// for Slack laws with `alpha < 1`, otherwise `n (1 - q_n) -> 2 / Var Y`.
fn critical_target(law: &OffspringLaw) -> (f64, f64) {
    match law.family() {
        Family::Slack { alpha, c } => (*alpha, 1.0 / (c * alpha)),
        _ => (1.0, 2.0 / law.moments().variance),
    }
}

/// Tabulates `n (1 - q_n)^alpha` and `n [1 - g'(q_n)]` on a strictly
/// increasing grid and checks that both move monotonically toward their
/// limits.
pub fn critical_limit(law: &OffspringLaw, n_grid: &[usize]) -> Result<RateReport> {
    let mean = law.mean();
    if (mean - 1.0).abs() > CRITICALITY_TOLERANCE {
        return Err(Error::Regime(format!("{law} has EY = {mean}, not 1")));
    }
    if n_grid.is_empty() || n_grid[0] == 0 || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "n_grid must be positive and strictly increasing".into(),
        ));
    }
    let (alpha, limit) = critical_target(law);
    let derivative_limit = 1.0 + 1.0 / alpha;

    let mut rows = Vec::with_capacity(n_grid.len());
    let mut gap = 1.0;
    let mut n = 0;
    let mut previous: Option<(f64, f64)> = None;
    for &target in n_grid {
        while n < target {
            gap = law.complement(gap);
            n += 1;
        }
        let statistic = n as f64 * gap.powf(alpha);
        let derivative_statistic = n as f64 * (law.derivative_decrement(1.0, gap) + (1.0 - mean));
        let distance = (statistic - limit).abs();
        let derivative_distance = (derivative_statistic - derivative_limit).abs();
        let pass = previous.is_none_or(|(d, dd)| distance <= d && derivative_distance <= dd);
        previous = Some((distance, derivative_distance));
        rows.push(RateRow {
            n,
            q_n: 1.0 - gap,
            statistic,
            reference: limit,
            pass,
            derivative_statistic: Some(derivative_statistic),
        });
    }
    let last = rows.last().expect("nonempty grid");
    let checks = vec![
        Check::new(
            "statistic approaches its limit monotonically",
            rows.iter().all(|r| r.pass),
            format!(
                "alpha = {alpha}, limit = {limit}, final = {} at n = {}",
                last.statistic, last.n
            ),
        ),
    ];
    Ok(RateReport {
        regime: Criticality::Critical,
        rows,
        limit: Some(limit),
        derivative_limit: Some(derivative_limit),
        checks,
    })
}

/// `(1 - s) g''(s) / [1 - g'(s)]` at each `s` in `[0, 1)`.
pub fn rate_ratio(law: &OffspringLaw, s_grid: &[f64]) -> Result<Vec<f64>> {
    let mean = law.mean();
    if (mean - 1.0).abs() > CRITICALITY_TOLERANCE {
        return Err(Error::Regime(format!("{law} has EY = {mean}, not 1")));
    }
    s_grid
        .iter()
        .map(|&s| {
            if !(0.0..1.0).contains(&s) {
                return Err(Error::Domain {
                    name: "s",
                    value: s,
                    domain: "[0, 1)",
                });
            }
            let d = 1.0 - s;
            let drop = law.derivative_decrement(1.0, d) + (1.0 - mean);
            Ok(d * law.second_derivative_complement(d) / drop)
        })
        .collect()
}

/// Doubling grid `start, 2 start, ...` up to `end`, with `end` appended.
pub fn doubling_grid(start: usize, end: usize) -> Vec<usize> {
    let mut grid = Vec::new();
    let mut n = start.max(1);
    while n < end {
        grid.push(n);
        n *= 2;
    }
    grid.push(end);
    grid
}
