use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::seq2seq::StepDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggregateMode {
    /// Weighted arithmetic mean (majority vote).
    Average,
    /// Renormalized product (unanimous vote).
    Mult,
    /// Renormalized elementwise maximum (optimistic vote).
    Max,
}

impl fmt::Display for AggregateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            AggregateMode::Average => "average",
            AggregateMode::Mult => "mult",
            AggregateMode::Max => "max",
        })
    }
}

impl FromStr for AggregateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" => Ok(AggregateMode::Average),
            "mult" => Ok(AggregateMode::Mult),
            "max" => Ok(AggregateMode::Max),
            other => Err(Error::Config(format!("unknown aggregate mode {other:?}"))),
        }
    }
}

/// Checks `Σβ = N` within 1e-6 and `β ≥ 0`.
pub fn validate_betas(betas: &[f64], n: usize) -> Result<()> {
    if betas.len() != n {
        return Err(Error::invalid(format!("{} betas for {n} distributions", betas.len())));
    }
    if betas.iter().any(|b| !b.is_finite() || *b < 0.0) {
        return Err(Error::invalid("betas must be finite and non-negative"));
    }
    let total: f64 = betas.iter().sum();
    if (total - n as f64).abs() > 1e-6 {
        return Err(Error::invalid(format!("betas sum to {total}, expected {n}")));
    }
    Ok(())
}

fn sorted(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    xs
}

fn normalize(values: Vec<f64>, what: &str) -> Result<Vec<f64>> {
    let total: f64 = values.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateDistribution(format!("{what} has no probability mass")));
    }
    Ok(values.into_iter().map(|x| x / total).collect())
}

/// Combines `N` next-token distributions into one.
///
/// Per-entry terms are sorted before they are reduced, so the result is
/// bitwise invariant under any simultaneous permutation of `dists` and
/// `betas`. The product is formed in log space so long products do not
/// underflow.
pub fn aggregate(dists: &[StepDistribution], betas: &[f64], mode: AggregateMode) -> Result<StepDistribution> {
    let n = dists.len();
    if n == 0 {
        return Err(Error::invalid("aggregate needs at least one distribution"));
    }
    let v = dists[0].len();
    if dists.iter().any(|d| d.len() != v) {
        return Err(Error::shape("aggregate", "distributions differ in length"));
    }
    validate_betas(betas, n)?;
    let column = |j: usize| dists.iter().map(move |d| d.probs[j]);
    let probs = match mode {
        AggregateMode::Average => (0..v)
            .map(|j| {
                let terms = column(j).zip(betas).map(|(p, b)| b * p).collect();
                sorted(terms).iter().sum::<f64>() / n as f64
            })
            .collect(),
        AggregateMode::Mult => {
            let logs: Vec<f64> = (0..v)
                .map(|j| sorted(column(j).map(f64::ln).collect()).iter().sum())
                .collect();
            let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if top == f64::NEG_INFINITY {
                return Err(Error::DegenerateDistribution(
                    "product of distributions is zero everywhere".into(),
                ));
            }
            normalize(logs.iter().map(|&l| (l - top).exp()).collect(), "product")?
        }
        AggregateMode::Max => normalize((0..v).map(|j| column(j).fold(0.0, f64::max)).collect(), "maximum")?,
    };
    Ok(StepDistribution { probs })
}
