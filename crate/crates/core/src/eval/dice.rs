use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::map::SegmentationMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiceMode {
    Micro,
    Macro,
}

impl FromStr for DiceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "micro" => Ok(DiceMode::Micro),
            "macro" => Ok(DiceMode::Macro),
            _ => Err(Error::InvalidParam(format!("unknown Dice mode `{s}`"))),
        }
    }
}

/// Multi-class Dice over non-background labels. Two masks without any
/// foreground agree perfectly and score 1.
pub fn dice(pred: &SegmentationMask, gt: &SegmentationMask, mode: DiceMode) -> Result<f64> {
    if pred.shape() != gt.shape() {
        return Err(Error::ShapeMismatch {
            left: pred.shape(),
            right: gt.shape(),
        });
    }
    // class -> (intersection, |pred|, |gt|)
    let mut counts: BTreeMap<u32, (usize, usize, usize)> = BTreeMap::new();
    for (&p, &g) in pred.labels().iter().zip(gt.labels()) {
        if p != pred.background() {
            counts.entry(p).or_default().1 += 1;
        }
        if g != gt.background() {
            counts.entry(g).or_default().2 += 1;
        }
        if p == g && p != pred.background() && g != gt.background() {
            counts.entry(p).or_default().0 += 1;
        }
    }
    if counts.is_empty() {
        return Ok(1.0);
    }
    Ok(match mode {
        DiceMode::Micro => {
            let (i, p, g) = counts
                .values()
                .fold((0, 0, 0), |acc, c| (acc.0 + c.0, acc.1 + c.1, acc.2 + c.2));
            2.0 * i as f64 / (p + g) as f64
        }
        DiceMode::Macro => {
            let sum: f64 = counts
                .values()
                .map(|&(i, p, g)| 2.0 * i as f64 / (p + g) as f64)
                .sum();
            sum / counts.len() as f64
        }
    })
}

/// Segmentation risk `1 − Dice`.
pub fn dice_risk(pred: &SegmentationMask, gt: &SegmentationMask, mode: DiceMode) -> Result<f64> {
    dice(pred, gt, mode).map(|d| 1.0 - d)
}
