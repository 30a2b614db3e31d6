//! Extinction probabilities `q_n` and their limit for a few offspring laws.
//!
//! ```text
//! cargo run --example extinction
//! ```

use branchstop::OffspringLaw;

fn main() -> branchstop::Result<()> {
    let laws = [
        OffspringLaw::bernoulli(0.3)?,
        OffspringLaw::mbernoulli(2, 0.5)?,
        OffspringLaw::mbernoulli(2, 0.75)?,
        OffspringLaw::poisson(2.0)?,
        OffspringLaw::generalized_geometric(0.5, 0.4)?,
        OffspringLaw::slack(0.5, 0.5)?,
    ];
    println!("{:<26} {:>13} {:>12} {:>12} {:>12}", "law", "regime", "q_5", "q_50", "pi");
    for law in &laws {
        let q = law.extinction_sequence(50);
        println!(
            "{:<26} {:>13} {:>12.9} {:>12.9} {:>12.9}",
            law.to_string(),
            law.criticality().to_string(),
            q[4],
            q[49],
            law.eventual_extinction()
        );
    }
    Ok(())
}
