//! Backward induction for the stopping problem on `X_1, ..., X_n` and a
//! check of the optimal rule by simulation.

use branchstop::stopping::{evaluate_rule_mc, threshold_rule_value, value_sequence};
use branchstop::{OffspringLaw, PayoffMode, StoppingLaw};

fn main() -> branchstop::Result<()> {
    let law = OffspringLaw::poisson(0.8)?;
    let n = 8;
    let x = vec![StoppingLaw::from_offspring(&law); n];
    let seq = value_sequence(&x, PayoffMode::Quadrature)?;
    let q = law.extinction_sequence(n);

    println!("{law}, horizon {n}");
    println!("{:>3} {:>14} {:>14}", "k", "V_k", "q_k");
    for k in 1..=n {
        // V_k is the value with k observations left
        println!("{k:>3} {:>14.12} {:>14.12}", seq.get(n - k + 1).unwrap(), q[k - 1]);
    }
    println!("thresholds {:?}", seq.thresholds().iter().map(|t| format!("{t:.5}")).collect::<Vec<_>>());

    let est = evaluate_rule_mc(&x, &seq.optimal_rule(), 200_000, 1)?;
    println!(
        "simulated optimal rule: {:.6} +/- {:.6} (value {:.6})",
        est.mean, est.std_error, seq.value()
    );
    for tau in [0.2, 0.4, 0.6] {
        println!("stop at first X >= {tau}: {:.6}", threshold_rule_value(&x, tau, n)?);
    }
    Ok(())
}
