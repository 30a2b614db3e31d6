//! The cross-check matrix run by `branchstop verify-all`.
//!
//! Every check compares two independent computations of the same
//! quantity: payoff quadrature against generating-function iteration,
//! closed forms against composition, analytic values against Monte Carlo.

use rand::Rng;

use crate::correspondence::{PayoffMode, StoppingLaw};
use crate::environment::{Environment, Summability};
use crate::error::Result;
use crate::inhomogeneous::{
    critical_gg, gg_closed_form, inhom_extinction, inverse_square_rate, trinomial_environment,
};
use crate::offspring::{iterate_g, Criticality, Family, OffspringLaw};
use crate::parallel::stream_rng;
use crate::prophet::{max_correspondence, prophet_bounds, prophet_value, ProphetMode};
use crate::report::Check;
use crate::simulation::{simulate, SimulationConfig};
use crate::stopping::{evaluate_rule_mc, value_iid_sequence, value_sequence};
use crate::asymptotics::{critical_limit, doubling_grid, subcritical_check, supercritical_check};

/// Trials per Monte Carlo check.
pub const VERIFY_TRIALS: u64 = 20_000;
/// Standard errors allowed between Monte Carlo and analytic values.
pub const VERIFY_SIGMAS: f64 = 4.0;
/// Fewest expected extinctions, and expected survivals, for a generation
/// to enter the simulated-extinction comparison.
pub const MIN_EXPECTED: f64 = 5.0;

/// The nine reference laws.
pub fn standard_families() -> Vec<OffspringLaw> {
    vec![
        OffspringLaw::bernoulli(0.3),
        OffspringLaw::mbernoulli(2, 0.5),
        OffspringLaw::mbernoulli(2, 0.75),
        OffspringLaw::mbernoulli(3, 0.2),
        OffspringLaw::poisson(0.8),
        OffspringLaw::poisson(1.0),
        OffspringLaw::poisson(2.0),
        OffspringLaw::generalized_geometric(0.25, 0.4),
        OffspringLaw::slack(0.5, 0.5),
    ]
    .into_iter()
    .map(|law| law.expect("reference parameters are valid"))
    .collect()
}

/// Runs the full matrix. Stochastic checks draw from streams keyed by
/// `seed`, so the output is a function of `seed` alone.
pub fn verify_all(seed: u64) -> Result<Vec<Check>> {
    let families = standard_families();
    let mut checks = Vec::new();

    for law in &families {
        let x = StoppingLaw::from_offspring(law);
        let v = value_iid_sequence(&x, 50, PayoffMode::Quadrature)?;
        let q = law.extinction_sequence(50);
        let worst = max_abs_diff(&v, &q);
        checks.push(Check::new(
            format!("value equals extinction: {law}"),
            worst < 1e-8,
            format!("max |V_n - q_n| = {worst:.3e}, n <= 50"),
        ));
    }

    for law in &families {
        let report = match law.criticality() {
            Criticality::Supercritical => supercritical_check(law, 50)?,
            Criticality::Subcritical => subcritical_check(law, 50)?,
            Criticality::Critical => critical_limit(law, &doubling_grid(100, 10_000))?,
        };
        checks.push(Check::new(
            format!("{} rate: {law}", law.criticality()),
            report.passed(),
            match report.limit {
                Some(limit) => format!(
                    "limit {limit}, relative error {:.3e} at n = 10000",
                    report.relative_error_at(10_000).unwrap_or(f64::NAN)
                ),
                None => format!("{} horizons", report.rows.len()),
            },
        ));
    }

    let mut rng = stream_rng(seed, 0);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(1..=30);
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..0.95)).collect();
        let closed = gg_closed_form(&c)?.extinction;
        let laws = c.iter().map(|&ci| critical_gg(ci)).collect::<Result<Vec<_>>>()?;
        worst = worst.max((closed - iterate_g(&laws, 0.0)?).abs());
    }
    checks.push(Check::new(
        "critical GG closed form equals composition",
        worst < 1e-10,
        format!("max difference {worst:.3e} over 20 environments"),
    ));

    let env = trinomial_environment(inverse_square_rate, 10_000, Summability::Convergent);
    let two_path = inhom_extinction(&env, 30)?;
    checks.push(Check::new(
        "composed payoffs equal composed generating functions",
        two_path.agreement == Some(true),
        format!(
            "q = {}, payoff path = {:?}",
            two_path.extinction, two_path.payoff_path
        ),
    ));

    for (i, law) in families.iter().enumerate() {
        let n = 10;
        let config = SimulationConfig::new(n, VERIFY_TRIALS, seed ^ (0x5157 + i as u64));
        let result = simulate(&Environment::homogeneous(law.clone()), &config)?;
        let q = law.extinction_sequence(n);
        // the normal approximation needs a few expected events on each side
        let testable: Vec<usize> = (1..=n)
            .filter(|&g| {
                let expected = VERIFY_TRIALS as f64 * q[g - 1];
                expected >= MIN_EXPECTED && VERIFY_TRIALS as f64 - expected >= MIN_EXPECTED
            })
            .collect();
        let bad: Vec<usize> = testable
            .iter()
            .copied()
            .filter(|&g| !result.agrees_with(g, q[g - 1], VERIFY_SIGMAS))
            .collect();
        checks.push(Check::new(
            format!("simulated extinction: {law}"),
            bad.is_empty(),
            format!(
                "{} generations tested, outside 4 SE: {bad:?}; cap hits {}",
                testable.len(),
                result.cap_hits()
            ),
        ));
    }

    for (i, law) in families.iter().enumerate() {
        let n = 5;
        let laws = vec![StoppingLaw::from_offspring(law); n];
        let seq = value_sequence(&laws, PayoffMode::ClosedForm)?;
        let est = evaluate_rule_mc(&laws, &seq.optimal_rule(), VERIFY_TRIALS, seed ^ (0x7a11 + i as u64))?;
        checks.push(Check::new(
            format!("simulated optimal stopping: {law}"),
            est.within(seq.value(), VERIFY_SIGMAS),
            format!("estimate {} +/- {}, value {}", est.mean, est.std_error, seq.value()),
        ));
    }

    for (i, law) in families.iter().enumerate() {
        let n = 5;
        let laws = vec![StoppingLaw::from_offspring(law); n];
        let bounds = prophet_bounds(&laws)?;
        checks.push(Check::new(
            format!("prophet value below twice the stopping value: {law}"),
            bounds.prophet_value < 2.0 * bounds.value,
            format!("V_p = {}, V_n = {}", bounds.prophet_value, bounds.value),
        ));
        let mc = prophet_value(
            &laws,
            ProphetMode::MonteCarlo {
                trials: VERIFY_TRIALS,
                seed: seed ^ (0x9e0 + i as u64),
            },
        )?;
        checks.push(Check::new(
            format!("simulated prophet value: {law}"),
            mc.within(bounds.prophet_value, VERIFY_SIGMAS),
            format!("estimate {} +/- {}, analytic {}", mc.mean, mc.std_error, bounds.prophet_value),
        ));
        // slack tails decay too slowly for a truncated series to reach 1e-9
        let heavy_tail = matches!(law.family(), Family::Slack { .. });
        if law.criticality() != Criticality::Supercritical && !heavy_tail {
            let star = max_correspondence(law, n)?;
            let diff = (star.p0 - bounds.prophet_value).abs();
            checks.push(Check::new(
                format!("maximum corresponds to an offspring law: {law}"),
                diff < 1e-9,
                format!("P(Y* = 0) = {}, |diff| = {diff:.3e}", star.p0),
            ));
        }
    }

    Ok(checks)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
