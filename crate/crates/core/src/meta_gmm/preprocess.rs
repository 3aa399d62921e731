use crate::error::{Error, Result};

use super::features::FeatureMatrix;

/// Affine squeeze `f ↦ (1 − 2ε)(f − 0.5) + 0.5` moving `[0, 1]` onto `[ε, 1 − ε]`.
pub fn epsilon_rescale_value(f: f64, epsilon: f64) -> f64 {
    (1.0 - 2.0 * epsilon) * (f - 0.5) + 0.5
}

pub fn epsilon_rescale(features: &FeatureMatrix, epsilon: f64) -> Result<FeatureMatrix> {
    check_epsilon(epsilon)?;
    Ok(features.map_values(|_, v| epsilon_rescale_value(v, epsilon)))
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidEpsilon(epsilon))
    }
}

/// Column means and population standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Columns whose spread was zero; their std is stored as 1.
    pub degenerate: Vec<usize>,
}

pub fn standardize_fit(features: &FeatureMatrix) -> Result<Standardizer> {
    let n = features.nrows();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let d = features.ncols();
    let mut mean = Vec::with_capacity(d);
    let mut std = Vec::with_capacity(d);
    let mut degenerate = Vec::new();
    for j in 0..d {
        let m = features.column(j).sum::<f64>() / n as f64;
        let var = features.column(j).map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
        let s = var.sqrt();
        mean.push(m);
        if s > 0.0 && s.is_finite() {
            std.push(s);
        } else {
            log::warn!(
                "feature `{}` is constant on the training data; its scale is set to 1",
                features.names()[j]
            );
            degenerate.push(j);
            std.push(1.0);
        }
    }
    Ok(Standardizer {
        mean,
        std,
        degenerate,
    })
}

pub fn standardize_apply(features: &FeatureMatrix, mean: &[f64], std: &[f64]) -> Result<FeatureMatrix> {
    let d = features.ncols();
    if mean.len() != d || std.len() != d {
        return Err(Error::LengthMismatch(mean.len().min(std.len()), d));
    }
    Ok(features.map_values(|j, v| (v - mean[j]) / std[j]))
}
