use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::auroc::average_ranks;
use super::wilcoxon::wilcoxon_paired;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

/// Per-dataset table: strategy → metric value.
pub type MetricTable = BTreeMap<String, f64>;

/// Ranks strategies within each table (1 = best, ties averaged) and
/// averages the ranks across tables. Returned in ascending mean rank, ties
/// by name.
pub fn mean_rank(tables: &[MetricTable], direction: Direction) -> Result<Vec<(String, f64)>> {
    let first = tables.first().ok_or(Error::Empty)?;
    let names: Vec<&String> = first.keys().collect();
    for (i, t) in tables.iter().enumerate() {
        if t.len() != first.len() || !t.keys().all(|k| first.contains_key(k)) {
            return Err(Error::StrategySetMismatch(format!(
                "table {i} does not match table 0"
            )));
        }
    }
    let mut totals = vec![0.0; names.len()];
    for t in tables {
        let keyed: Vec<f64> = names
            .iter()
            .map(|n| match direction {
                Direction::HigherBetter => -t[*n],
                Direction::LowerBetter => t[*n],
            })
            .collect();
        for (tot, r) in totals.iter_mut().zip(average_ranks(&keyed)) {
            *tot += r;
        }
    }
    let mut out: Vec<(String, f64)> = names
        .into_iter()
        .zip(totals)
        .map(|(n, t)| (n.clone(), t / tables.len() as f64))
        .collect();
    out.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    Ok(out)
}

/// One-sided p-values: entry `[a][b]` tests "strategy `a` beats `b`" on
/// paired bootstrap samples. Pairs without any non-zero difference,
/// including the diagonal, are reported as 1.
pub fn significance_matrix(samples: &[Vec<f64>], direction: Direction) -> Result<Vec<Vec<f64>>> {
    let s = samples.len();
    if let Some(len) = samples.first().map(Vec::len) {
        if let Some(bad) = samples.iter().find(|v| v.len() != len) {
            return Err(Error::LengthMismatch(bad.len(), len));
        }
    }
    let mut m = vec![vec![1.0; s]; s];
    for a in 0..s {
        for b in 0..s {
            if a == b {
                continue;
            }
            let (better, worse) = match direction {
                Direction::HigherBetter => (&samples[a], &samples[b]),
                Direction::LowerBetter => (&samples[b], &samples[a]),
            };
            m[a][b] = match wilcoxon_paired(better, worse) {
                Ok(r) => r.p_value,
                Err(Error::AllZeroDifferences) => 1.0,
                Err(e) => return Err(e),
            };
        }
    }
    Ok(m)
}
