//! Intensity-based (AVG, PLM, ATA, AQA) and prediction-based (BCA, ICA,
//! QFR) aggregation.
//!
//! All reductions sum non-negative terms in a fixed order, so an
//! elementwise increase of the input can never decrease the result through
//! rounding alone.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::map::{SegmentationMask, UncertaintyMap};

/// Mean pixel uncertainty.
pub fn avg(map: &UncertaintyMap) -> f64 {
    map.sum() / map.len() as f64
}

/// Patch-level maximum: the largest mean over all `patch × patch` windows
/// lying fully inside the map (stride 1).
pub fn plm(map: &UncertaintyMap, patch: usize) -> Result<f64> {
    let (h, w) = map.shape();
    if patch == 0 || patch > h.min(w) {
        return Err(Error::PatchTooLarge {
            patch,
            shape: (h, w),
        });
    }
    let values = map.values();
    let out_w = w - patch + 1;
    let out_h = h - patch + 1;

    // Horizontal window sums, then vertical sums of those.
    let mut horiz = vec![0.0; h * out_w];
    for r in 0..h {
        let row = &values[r * w..(r + 1) * w];
        for c in 0..out_w {
            horiz[r * out_w + c] = row[c..c + patch].iter().sum();
        }
    }
    let area = (patch * patch) as f64;
    let mut best = 0.0f64;
    for r in 0..out_h {
        for c in 0..out_w {
            let s: f64 = (r..r + patch).map(|rr| horiz[rr * out_w + c]).sum();
            best = best.max(s / area);
        }
    }
    Ok(best)
}

/// Above-threshold average: mean of pixels strictly above `threshold`,
/// zero when none are.
pub fn ata(map: &UncertaintyMap, threshold: f64) -> Result<f64> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidThreshold(threshold));
    }
    let (sum, count) = map
        .values()
        .iter()
        .filter(|&&u| u > threshold)
        .fold((0.0, 0usize), |(s, n), &u| (s + u, n + 1));
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}

/// Above-quantile average: mean of the top `ceil((1 - q) · mn)` values.
pub fn aqa(map: &UncertaintyMap, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidQuantile(q));
    }
    let n = map.len();
    let k = top_count(1.0 - q, n);
    Ok(top_k_mean(map.values(), k))
}

/// `ceil(fraction · n)` clamped to `[1, n]`, robust to representation
/// error in `fraction` (e.g. `(1 - 0.9) · 10` must give 1, not 2).
fn top_count(fraction: f64, n: usize) -> usize {
    let raw = fraction * n as f64;
    let rounded = raw.round();
    let k = if (raw - rounded).abs() <= 1e-9 * raw.abs().max(1.0) {
        rounded
    } else {
        raw.ceil()
    };
    (k as usize).clamp(1, n)
}

fn top_k_mean(values: &[f64], k: usize) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    sorted[..k].iter().sum::<f64>() / k as f64
}

/// Per-class mean uncertainty and area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassStat {
    pub alpha: f64,
    pub area: usize,
}

/// Class-level averages over the non-background classes present in a mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassAverages {
    pub per_class: BTreeMap<u32, ClassStat>,
    pub excluded_background: u32,
}

impl ClassAverages {
    pub fn total_area(&self) -> usize {
        self.per_class.values().map(|s| s.area).sum()
    }
}

pub fn class_averages(map: &UncertaintyMap, mask: &SegmentationMask) -> Result<ClassAverages> {
    check_shapes(map, mask)?;
    let bg = mask.background();
    let mut sums: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
    for (&u, &label) in map.values().iter().zip(mask.labels()) {
        if label == bg {
            continue;
        }
        let e = sums.entry(label).or_insert((0.0, 0));
        e.0 += u;
        e.1 += 1;
    }
    if sums.is_empty() {
        return Err(Error::NoForeground);
    }
    let per_class = sums
        .into_iter()
        .map(|(c, (s, n))| {
            (
                c,
                ClassStat {
                    alpha: s / n as f64,
                    area: n,
                },
            )
        })
        .collect();
    Ok(ClassAverages {
        per_class,
        excluded_background: bg,
    })
}

/// Weighted class average `Σ_c w_c α_c`; classes missing from `weights`
/// get weight zero.
pub fn wca(averages: &ClassAverages, weights: &BTreeMap<u32, f64>) -> f64 {
    averages
        .per_class
        .iter()
        .map(|(c, s)| weights.get(c).copied().unwrap_or(0.0) * s.alpha)
        .sum()
}

/// Balanced class average: every present class weighted equally.
pub fn bca(map: &UncertaintyMap, mask: &SegmentationMask) -> Result<f64> {
    let ca = class_averages(map, mask)?;
    let n = ca.per_class.len() as f64;
    Ok(ca.per_class.values().map(|s| s.alpha).sum::<f64>() / n)
}

/// Imbalanced class average: classes weighted by their pixel share.
pub fn ica(map: &UncertaintyMap, mask: &SegmentationMask) -> Result<f64> {
    let ca = class_averages(map, mask)?;
    let total = ca.total_area() as f64;
    Ok(ca
        .per_class
        .values()
        .map(|s| s.area as f64 / total * s.alpha)
        .sum())
}

/// Foreground-ratio quantile average: the mask fixes the fraction `q_FG`
/// of foreground pixels, then the top `ceil(q_FG · mn)` values of the whole
/// map are averaged.
pub fn qfr(map: &UncertaintyMap, mask: &SegmentationMask) -> Result<f64> {
    check_shapes(map, mask)?;
    let fg = mask.foreground_count();
    if fg == 0 {
        return Err(Error::NoForeground);
    }
    // q_FG · mn is exactly the foreground count.
    Ok(top_k_mean(map.values(), fg))
}

fn check_shapes(map: &UncertaintyMap, mask: &SegmentationMask) -> Result<()> {
    if map.shape() != mask.shape() {
        return Err(Error::ShapeMismatch {
            left: map.shape(),
            right: mask.shape(),
        });
    }
    Ok(())
}
