//! Varying environments: the sequence of offspring laws driving an
//! inhomogeneous branching process.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::offspring::{iterate_g, OffspringLaw};

/// Declared behaviour of `sum_i r_i` with `r_i = P(Y_i != 1)`.
///
/// Finite computation cannot decide divergence, so this is a property the
/// caller asserts about the generator, never something inferred from terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Summability {
    Divergent,
    Convergent,
    Undeclared,
}

type LawRule = Arc<dyn Fn(usize) -> Result<OffspringLaw> + Send + Sync>;

#[derive(Clone)]
enum Source {
    Homogeneous(OffspringLaw),
    Finite(Vec<OffspringLaw>),
    Generated { rule: LawRule, horizon_cap: usize },
}

/// Offspring laws indexed by generation, starting at generation 1.
#[derive(Clone)]
pub struct Environment {
    source: Source,
    summability: Summability,
}

impl fmt::Debug for Environment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.source {
            Source::Homogeneous(law) => write!(f, "Environment::Homogeneous({law})"),
            Source::Finite(laws) => write!(f, "Environment::Finite(len = {})", laws.len()),
            Source::Generated { horizon_cap, .. } => {
                write!(f, "Environment::Generated(cap = {horizon_cap})")
            }
        }
    }
}

impl Environment {
    /// The same law in every generation, without a horizon limit.
    pub fn homogeneous(law: OffspringLaw) -> Self {
        Environment {
            source: Source::Homogeneous(law),
            summability: Summability::Undeclared,
        }
    }

    pub fn finite(laws: Vec<OffspringLaw>) -> Result<Self> {
        if laws.is_empty() {
            return Err(Error::InvalidParameter(
                "an environment needs at least one law".into(),
            ));
        }
        Ok(Environment {
            source: Source::Finite(laws),
            summability: Summability::Undeclared,
        })
    }

    /// Laws produced on demand by `rule(i)` for generations `1..=horizon_cap`.
    pub fn generated<F>(rule: F, horizon_cap: usize) -> Self
    where
        F: Fn(usize) -> Result<OffspringLaw> + Send + Sync + 'static,
    {
        Environment {
            source: Source::Generated {
                rule: Arc::new(rule),
                horizon_cap,
            },
            summability: Summability::Undeclared,
        }
    }

    pub fn with_summability(mut self, summability: Summability) -> Self {
        self.summability = summability;
        self
    }

    pub fn summability(&self) -> Summability {
        self.summability
    }

    /// Largest generation the environment can supply; `None` when unbounded.
    pub fn horizon(&self) -> Option<usize> {
        match &self.source {
            Source::Homogeneous(_) => None,
            Source::Finite(laws) => Some(laws.len()),
            Source::Generated { horizon_cap, .. } => Some(*horizon_cap),
        }
    }

    pub fn homogeneous_law(&self) -> Option<&OffspringLaw> {
        match &self.source {
            Source::Homogeneous(law) => Some(law),
            _ => None,
        }
    }

    /// Law of generation `i` (1-based).
    pub fn law(&self, i: usize) -> Result<OffspringLaw> {
        if i == 0 {
            return Err(Error::InvalidParameter("generations are numbered from 1".into()));
        }
        match &self.source {
            Source::Homogeneous(law) => Ok(law.clone()),
            Source::Finite(laws) => laws.get(i - 1).cloned().ok_or(Error::InsufficientLaws {
                requested: i,
                available: laws.len(),
            }),
            Source::Generated { rule, horizon_cap } => {
                if i > *horizon_cap {
                    Err(Error::InsufficientLaws {
                        requested: i,
                        available: *horizon_cap,
                    })
                } else {
                    rule(i)
                }
            }
        }
    }

    /// Laws of generations `1..=n`.
    pub fn laws(&self, n: usize) -> Result<Vec<OffspringLaw>> {
        if let Some(cap) = self.horizon() {
            if n > cap {
                return Err(Error::InsufficientLaws {
                    requested: n,
                    available: cap,
                });
            }
        }
        (1..=n).map(|i| self.law(i)).collect()
    }

    /// `P(Z_n = 0) = g_1(g_2(... g_n(0)))`.
    pub fn extinction(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(Error::InvalidParameter("horizon n must be at least 1".into()));
        }
        if let Some(law) = self.homogeneous_law() {
            return law.extinction_probability(n);
        }
        iterate_g(&self.laws(n)?, 0.0)
    }

    /// `E Z_n = prod_{j <= n} E Y_j`.
    pub fn expected_size(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(Error::InvalidParameter("horizon n must be at least 1".into()));
        }
        if let Some(law) = self.homogeneous_law() {
            return Ok(law.mean().powi(n as i32));
        }
        Ok(self.laws(n)?.iter().map(OffspringLaw::mean).product())
    }
}
