use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;

use super::{auroc, eaurc, EvalRecord};

/// Attempts per bootstrap iteration before giving up on a resample that
/// violates the metric's preconditions.
pub const MAX_REDRAWS: usize = 100;

pub const DEFAULT_BOOTSTRAP: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// OoD detection; higher is better.
    Auroc,
    /// Failure detection on `confidence = −score`; lower is better.
    Eaurc,
}

impl Metric {
    pub fn higher_is_better(self) -> bool {
        matches!(self, Metric::Auroc)
    }

    pub fn direction(self) -> super::Direction {
        if self.higher_is_better() {
            super::Direction::HigherBetter
        } else {
            super::Direction::LowerBetter
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Auroc => "auroc",
            Metric::Eaurc => "eaurc",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auroc" | "ood" => Ok(Metric::Auroc),
            "eaurc" | "e-aurc" | "fd" => Ok(Metric::Eaurc),
            _ => Err(Error::InvalidParam(format!("unknown metric `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    pub mean: f64,
    /// Population standard deviation across resamples.
    pub std: f64,
    pub samples: Vec<f64>,
}

impl BootstrapResult {
    fn from_samples(samples: Vec<f64>) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
            samples,
        }
    }
}

/// Evaluates `metric` for one strategy on a subset of records.
pub fn metric_on(records: &[EvalRecord], idx: &[usize], strategy: &str, metric: Metric) -> Result<f64> {
    let score = |i: usize| -> Result<f64> {
        records[i]
            .scores
            .get(strategy)
            .ok_or_else(|| Error::MissingColumn(strategy.to_string()))
    };
    match metric {
        Metric::Auroc => {
            let mut scores = Vec::with_capacity(idx.len());
            let mut labels = Vec::with_capacity(idx.len());
            for &i in idx {
                scores.push(score(i)?);
                labels.push(records[i].ood_label.ok_or_else(|| {
                    Error::MissingColumn(format!("ood_label (sample `{}`)", records[i].sample_id))
                })?);
            }
            auroc(&scores, &labels)
        }
        Metric::Eaurc => {
            let mut risks = Vec::with_capacity(idx.len());
            let mut conf = Vec::with_capacity(idx.len());
            for &i in idx {
                conf.push(-score(i)?);
                risks.push(records[i].risk.ok_or_else(|| {
                    Error::MissingColumn(format!("risk (sample `{}`)", records[i].sample_id))
                })?);
            }
            eaurc(&risks, &conf)
        }
    }
}

/// `b` resamples of `0..n` with replacement. Iteration `i` draws from its
/// own stream, so the result does not depend on evaluation order. When
/// `labels` is given, resamples lacking either class are redrawn.
pub fn resample_indices(n: usize, b: usize, seed: u64, labels: Option<&[bool]>) -> Result<Vec<Vec<usize>>> {
    if n == 0 {
        return Err(Error::Empty);
    }
    if b == 0 {
        return Err(Error::InvalidParam("bootstrap count must be >= 1".into()));
    }
    (0..b)
        .into_par_iter()
        .map(|iter| {
            let mut rng = rng::stream(seed, iter as u64);
            for _ in 0..MAX_REDRAWS {
                let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                let ok = labels.is_none_or(|l| {
                    let pos = idx.iter().filter(|&&i| l[i]).count();
                    pos > 0 && pos < idx.len()
                });
                if ok {
                    return Ok(idx);
                }
            }
            Err(Error::SingleClass)
        })
        .collect()
}

/// Paired bootstrap: every strategy is evaluated on the same resamples.
pub fn bootstrap_many(
    records: &[EvalRecord],
    strategies: &[String],
    metric: Metric,
    b: usize,
    seed: u64,
) -> Result<Vec<BootstrapResult>> {
    let all: Vec<usize> = (0..records.len()).collect();
    // the full set must satisfy the metric's preconditions
    for s in strategies {
        metric_on(records, &all, s, metric)?;
    }
    let labels: Option<Vec<bool>> = match metric {
        Metric::Auroc => Some(records.iter().map(|r| r.ood_label.unwrap_or(false)).collect()),
        Metric::Eaurc => None,
    };
    let resamples = resample_indices(records.len(), b, seed, labels.as_deref())?;
    strategies
        .iter()
        .map(|s| {
            let samples = resamples
                .par_iter()
                .map(|idx| metric_on(records, idx, s, metric))
                .collect::<Result<Vec<f64>>>()?;
            Ok(BootstrapResult::from_samples(samples))
        })
        .collect()
}

pub fn bootstrap_metric(
    records: &[EvalRecord],
    strategy: &str,
    metric: Metric,
    b: usize,
    seed: u64,
) -> Result<BootstrapResult> {
    bootstrap_many(records, &[strategy.to_string()], metric, b, seed)
        .map(|mut v| v.remove(0))
}
