//! Extinction in varying environments: linear fractional laws in closed
//! form, and trinomial laws whose survival hinges on `sum r_i`.

use branchstop::inhomogeneous::{
    critical_gg, divergence_criterion, gg_closed_form, inhom_extinction, inverse_square_rate,
    trinomial_environment,
};
use branchstop::offspring::iterate_g;
use branchstop::stopping::value_infinite;
use branchstop::Summability;

fn main() -> branchstop::Result<()> {
    let c = [0.3, 0.8, 0.5, 0.65, 0.2];
    let laws: Vec<_> = c.iter().map(|&ci| critical_gg(ci)).collect::<Result<_, _>>()?;
    let closed = gg_closed_form(&c)?;
    println!("critical GG environment {c:?}");
    println!("  closed form {:.15}", closed.extinction);
    println!("  composition {:.15}", iterate_g(&laws, 0.0)?);
    let mut reversed = c;
    reversed.reverse();
    println!("  reversed    {:.15}", gg_closed_form(&reversed)?.extinction);

    let env = trinomial_environment(inverse_square_rate, 100_000, Summability::Convergent);
    for n in [10, 100, 1000] {
        let r = inhom_extinction(&env, n)?;
        println!("trinomial, r_i = 1/(i+1)^2, n={n:>5}: {:.9} (payoff path {:?})", r.extinction, r.payoff_path);
    }
    let d = divergence_criterion(&env, 100_000)?;
    println!("sum of r_i over 1e5 terms: {:.6}", d.total());

    let v = value_infinite(&env, 2000, 1e-6)?;
    println!("stopping value over {} observations: {:.9}, settled: {}", v.horizon, v.value, v.converged);
    Ok(())
}
