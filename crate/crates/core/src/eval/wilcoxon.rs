//! One-sided Wilcoxon signed-rank test, H1: the paired differences are
//! shifted above zero.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

use super::auroc::average_ranks;

/// Largest number of non-zero differences handled by the exact null
/// distribution; larger samples use the normal approximation.
pub const EXACT_MAX_N: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonResult {
    pub w_plus: f64,
    /// Non-zero differences entering the test.
    pub n: usize,
    pub p_value: f64,
    pub exact: bool,
}

/// Tests `a > b` on paired samples.
pub fn wilcoxon_paired(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    wilcoxon_one_sided(&d)
}

/// Tests whether the differences are shifted above zero. Zero differences
/// are discarded; tied magnitudes share average ranks.
pub fn wilcoxon_one_sided(differences: &[f64]) -> Result<WilcoxonResult> {
    if differences.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidParam("differences must be finite".into()));
    }
    let nz: Vec<f64> = differences.iter().copied().filter(|&d| d != 0.0).collect();
    let n = nz.len();
    if n == 0 {
        return Err(Error::AllZeroDifferences);
    }
    let magnitudes: Vec<f64> = nz.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&magnitudes);
    let w_plus: f64 = ranks.iter().zip(&nz).filter(|(_, &d)| d > 0.0).map(|(r, _)| r).sum();

    if n <= EXACT_MAX_N {
        // average ranks are multiples of 1/2, so doubled ranks are integers
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let observed = (2.0 * w_plus).round() as usize;
        let p_value = exact_upper_tail(&doubled, observed);
        return Ok(WilcoxonResult {
            w_plus,
            n,
            p_value,
            exact: true,
        });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = tie_sizes(&magnitudes)
        .into_iter()
        .map(|t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let p_value = if var <= 0.0 {
        if w_plus > mean {
            0.0
        } else {
            1.0
        }
    } else {
        let z = (w_plus - mean - 0.5) / var.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        normal.sf(z)
    };
    Ok(WilcoxonResult {
        w_plus,
        n,
        p_value,
        exact: false,
    })
}

/// `P(W+ ≥ observed)` under random signs, all on the doubled-rank scale.
fn exact_upper_tail(doubled_ranks: &[usize], observed: usize) -> f64 {
    let total: usize = doubled_ranks.iter().sum();
    // counts[s] = number of sign assignments with doubled W+ equal to s
    let mut counts = vec![0.0f64; total + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in doubled_ranks {
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let all = 2f64.powi(doubled_ranks.len() as i32);
    let tail: f64 = counts[observed.min(total + 1)..].iter().sum();
    tail / all
}

fn tie_sizes(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut sizes = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        if j - i > 1 {
            sizes.push(j - i);
        }
        i = j;
    }
    sizes
}
