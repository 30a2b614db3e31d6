//! Monte Carlo populations against the analytic extinction probabilities.
//! Set `BRANCHSTOP_THREADS` to change the worker count; results do not
//! depend on it.

use branchstop::simulation::{simulate, SimulationConfig};
use branchstop::{Environment, OffspringLaw};

fn main() -> branchstop::Result<()> {
    let law = OffspringLaw::poisson(1.2)?;
    let env = Environment::homogeneous(law.clone());
    let config = SimulationConfig::new(15, 100_000, 2024);
    let run = simulate(&env, &config)?;
    let q = law.extinction_sequence(15);

    println!("{law}, {} trials, {} capped", run.trials(), run.cap_hits());
    println!("{:>3} {:>10} {:>10} {:>8} {:>12} {:>10}", "n", "simulated", "q_n", "agree", "mean Z_n", "E Z_n");
    for n in 1..=15 {
        println!(
            "{n:>3} {:>10.5} {:>10.5} {:>8} {:>12.4} {:>10.4}",
            run.extinction_frequency(n),
            q[n - 1],
            run.agrees_with(n, q[n - 1], 4.0),
            run.mean_population(n),
            env.expected_size(n)?
        );
    }
    Ok(())
}
