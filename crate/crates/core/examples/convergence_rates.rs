//! How fast `q_n` approaches its limit in each regime.

use branchstop::asymptotics::{critical_limit, doubling_grid, subcritical_check, supercritical_check};
use branchstop::OffspringLaw;

fn main() -> branchstop::Result<()> {
    let sup = OffspringLaw::mbernoulli(2, 0.75)?;
    let r = supercritical_check(&sup, 30)?;
    println!("{sup}: pi - q_n against pi g'(pi)^n");
    for row in r.rows.iter().step_by(5) {
        println!("  n={:>3} {:.6e} <= {:.6e}", row.n, row.statistic, row.reference);
    }

    let sub = OffspringLaw::poisson(0.8)?;
    let r = subcritical_check(&sub, 30)?;
    println!("{sub}: 1 - q_n against (EY)^n");
    for row in r.rows.iter().step_by(5) {
        println!("  n={:>3} {:.6e} <= {:.6e}", row.n, row.statistic, row.reference);
    }

    for law in [OffspringLaw::mbernoulli(2, 0.5)?, OffspringLaw::slack(0.5, 0.5)?] {
        let r = critical_limit(&law, &doubling_grid(100, 1_000_000))?;
        println!("{law}: n (1 - q_n)^alpha, limit {:.6}", r.limit.unwrap_or(f64::NAN));
        for row in &r.rows {
            println!("  n={:>8} {:.6}", row.n, row.statistic);
        }
    }
    Ok(())
}
