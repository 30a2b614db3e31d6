//! Galton-Watson extinction probabilities and optimal stopping values.
//!
//! Every offspring law `Y` with generating function `g` and smallest fixed
//! point `pi` has a `[0, 1]`-valued partner `X` with CDF `g'` on `[0, pi)`.
//! Its one-step stopping payoff `E[X v a]` equals `g(a)` on `[0, pi]`,
//! so the optimal value for `n` i.i.d. copies of `X` is the extinction
//! probability `q_n = g^(n)(0)`.
//!
//! The crate computes both sides independently and checks them against
//! each other:
//!
//! - [`offspring`] and [`environment`]: laws, generating functions,
//!   extinction probabilities, varying environments.
//! - [`correspondence`]: the stopping law of an offspring law, its payoff
//!   by closed form or by quadrature, and the inverse map.
//! - [`stopping`]: backward induction, threshold rules, Monte Carlo rule
//!   evaluation.
//! - [`simulation`]: forward simulation of populations.
//! - [`asymptotics`]: convergence rates of `q_n` in each regime.
//! - [`inhomogeneous`]: varying environments and fractional-linear laws.
//! - [`prophet`]: expected maxima and the laws they correspond to.
//! - [`cli`] and [`verify`]: the `branchstop` command line.
//!
//! ```
//! use branchstop::correspondence::{PayoffMode, StoppingLaw};
//! use branchstop::offspring::OffspringLaw;
//! use branchstop::stopping::value_iid;
//!
//! let law = OffspringLaw::mbernoulli(2, 0.5)?;
//! let x = StoppingLaw::from_offspring(&law);
//! let v3 = value_iid(&x, 3, PayoffMode::Quadrature)?;
//! assert!((v3 - law.extinction_probability(3)?).abs() < 1e-12);
//! # Ok::<(), branchstop::Error>(())
//! ```

pub mod asymptotics;
pub mod cli;
pub mod correspondence;
pub mod environment;
pub mod error;
pub mod inhomogeneous;
pub mod offspring;
pub mod parallel;
pub mod prophet;
pub mod quadrature;
pub mod report;
pub mod roots;
pub mod simulation;
pub mod stopping;
pub mod verify;

pub use correspondence::{PayoffMode, StoppingLaw};
pub use environment::{Environment, Summability};
pub use error::{Error, Result};
pub use offspring::{Criticality, Family, OffspringLaw};
pub use report::Check;
