//! The stopping law attached to an offspring law, and back again.
//!
//! `X` has CDF `g'` below the extinction probability `pi`, an atom at `pi`,
//! and mean `P(Y = 0)`. Its payoff `h(a) = E[X v a]` is `g(a)` up to `pi`.

use branchstop::correspondence::invert_to_offspring;
use branchstop::{OffspringLaw, PayoffMode, StoppingLaw};

fn main() -> branchstop::Result<()> {
    let law = OffspringLaw::mbernoulli(2, 0.75)?;
    let x = StoppingLaw::from_offspring(&law);
    println!("offspring law {law}");
    println!(
        "support [0, {:.6}], atom at 0 {:.4}, atom at pi {:.4}, mean {:.6}",
        x.upper_support(),
        x.atom_at_zero(),
        x.atom_at_pi(),
        x.mean()
    );

    println!("\n{:>6} {:>10} {:>12} {:>12} {:>12}", "a", "cdf", "g(a)", "h closed", "h quad");
    for i in 0..=8 {
        let a = i as f64 / 8.0;
        println!(
            "{a:>6.3} {:>10.6} {:>12.9} {:>12.9} {:>12.9}",
            x.cdf(a),
            law.eval(a),
            x.payoff_h(a, PayoffMode::ClosedForm)?,
            x.payoff_h(a, PayoffMode::Quadrature)?
        );
    }

    let back = invert_to_offspring(&x.to_candidate(8));
    match back.law() {
        Some(recovered) => println!("\nrecovered from the CDF: {recovered}"),
        None => println!("\ninversion rejected: {back:?}"),
    }

    // a polynomial that is not g' for any law
    let bogus = branchstop::correspondence::CandidateCdf::polynomial(1.0, vec![0.5, -0.2, 0.7]);
    println!("bogus candidate: {:?}", invert_to_offspring(&bogus));
    Ok(())
}
