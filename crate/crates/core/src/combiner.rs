//! Operators that fuse per-subspace outlier factors into one score.
//!
//! Factors are expected in `[0, 1]`. Every operator evaluates its arguments
//! left to right, so a fixed factor order gives bit-reproducible scores.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Combiner {
    /// `v1 * v2 * ... * vm`
    Product,
    /// `v1 + v2 + ... + vm`
    Addition,
    /// `(v1^q + ... + vm^q)^(1/q)`
    Sq(u32),
    /// Largest factor.
    SInf,
}

impl Combiner {
    /// Fuses `factors`. A single factor is returned unchanged by every operator.
    pub fn combine(&self, factors: &[f64]) -> Result<f64> {
        match factors {
            [] => Err(Error::EmptyFactors),
            [v] => Ok(*v),
            vs => Ok(match *self {
                Combiner::Product => vs.iter().product(),
                Combiner::Addition | Combiner::Sq(1) => vs.iter().sum(),
                Combiner::Sq(q) => {
                    let sum: f64 = vs.iter().map(|v| v.powi(q as i32)).sum();
                    sum.powf(1.0 / q as f64)
                }
                Combiner::SInf => vs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }),
        }
    }

    /// Like [`combine`](Self::combine), but the product is taken as a sum of
    /// logarithms. That is rank-preserving for the product and avoids
    /// underflow over hundreds of factors; other operators are unchanged.
    pub fn combine_log(&self, factors: &[f64]) -> Result<f64> {
        match (self, factors) {
            (_, []) => Err(Error::EmptyFactors),
            (Combiner::Product, vs) => Ok(vs.iter().map(|v| v.ln()).sum()),
            (_, vs) => self.combine(vs),
        }
    }

    /// Warning text for an even `q`, which the S_q rule is defined without.
    pub fn even_q_warning(&self) -> Option<String> {
        match self {
            Combiner::Sq(q) if q % 2 == 0 => Some(format!(
                "sq:{q} uses an even q; the S_q rule is stated for odd q, \
                 which only matters for negative factors"
            )),
            _ => None,
        }
    }
}

/// Parses `prod`, `sum`, `sq:<q>` or `sinf`, logging a warning for even q.
pub fn parse_combiner(spec: &str) -> Result<Combiner> {
    let c: Combiner = spec.parse()?;
    if let Some(w) = c.even_q_warning() {
        log::warn!("{w}");
    }
    Ok(c)
}

impl FromStr for Combiner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "prod" => Ok(Combiner::Product),
            "sum" => Ok(Combiner::Addition),
            "sinf" => Ok(Combiner::SInf),
            other => {
                let q = other
                    .strip_prefix("sq:")
                    .ok_or_else(|| {
                        Error::usage(format!(
                            "unknown operator `{other}` (expected prod, sum, sq:<q> or sinf)"
                        ))
                    })?
                    .parse::<u32>()
                    .map_err(|_| Error::usage(format!("invalid q in `{other}`")))?;
                if q < 1 {
                    return Err(Error::usage("q must be at least 1"));
                }
                Ok(Combiner::Sq(q))
            }
        }
    }
}

impl fmt::Display for Combiner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Combiner::Product => f.write_str("prod"),
            Combiner::Addition => f.write_str("sum"),
            Combiner::Sq(q) => write!(f, "sq:{q}"),
            Combiner::SInf => f.write_str("sinf"),
        }
    }
}
