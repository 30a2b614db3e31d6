//! The prophet's `E[max X_i]` against the stopping value, and the offspring
//! law whose stopping law is the maximum.

use branchstop::inhomogeneous::{inverse_square_rate, trinomial_law};
use branchstop::prophet::{closed_form, max_correspondence, prophet_bounds, prophet_value, trinomial_bounds, ProphetMode};
use branchstop::{OffspringLaw, StoppingLaw, Summability};

fn main() -> branchstop::Result<()> {
    let law = OffspringLaw::mbernoulli(2, 0.4)?;
    let x = StoppingLaw::from_offspring(&law);
    println!("{law}");
    println!("{:>3} {:>10} {:>10} {:>10} {:>10}", "n", "V_n", "E max", "formula", "MC");
    for n in [1u32, 2, 4, 8] {
        let laws = vec![x.clone(); n as usize];
        let b = prophet_bounds(&laws)?;
        let mc = prophet_value(&laws, ProphetMode::MonteCarlo { trials: 200_000, seed: n as u64 })?;
        println!(
            "{n:>3} {:>10.6} {:>10.6} {:>10.6} {:>10.6}",
            b.value,
            b.prophet_value,
            closed_form::mbernoulli(2, 0.4, n),
            mc.mean
        );
    }

    let star = max_correspondence(&law, 4)?;
    println!("law behind the maximum of 4: {} (mean {:.6})", star.law, star.mean);

    let b = trinomial_bounds(inverse_square_rate, 1_000_000, Summability::Convergent, None)?;
    println!(
        "trinomial bounds: {:.6} <= lim q <= {:.6} (product {:.7})",
        b.lower(),
        b.upper,
        b.product
    );
    println!("trinomial law at r = 1/4: {}", trinomial_law(0.25)?);
    Ok(())
}
