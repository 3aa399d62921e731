//! Domain types: uncertainty maps, segmentation masks, sampled class
//! probability stacks and named feature vectors.

use crate::error::{Error, Result};

/// Tolerance on per-pixel probability sums in a [`ProbabilityStack`].
pub const PROB_SUM_TOL: f64 = 1e-6;

/// Pixel-wise uncertainty in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl UncertaintyMap {
    /// Validates a row-major buffer of shape `(height, width)`.
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || values.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if values.len() != height * width {
            return Err(Error::InvalidParam(format!(
                "buffer of length {} does not match shape ({height}, {width})",
                values.len()
            )));
        }
        for (i, &v) in values.iter().enumerate() {
            let (row, col) = (i / width, i % width);
            if !v.is_finite() {
                return Err(Error::NonFinite { row, col });
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfRange { row, col, value: v });
            }
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    /// Validates a nested grid; rows must all have the same length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let (height, width, values) = flatten(rows)?;
        Self::new(height, width, values)
    }

    pub fn filled(height: usize, width: usize, level: f64) -> Result<Self> {
        Self::new(height, width, vec![level; height * width])
    }

    /// Builds a map from values already known to be valid, clipping to `[0, 1]`.
    pub(crate) fn from_clipped(height: usize, width: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), height * width);
        let values = values
            .into_iter()
            .map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) })
            .collect();
        Self {
            height,
            width,
            values,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.width)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// Predicted (or ground-truth) semantic labels, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationMask {
    height: usize,
    width: usize,
    labels: Vec<u32>,
    background: u32,
}

impl SegmentationMask {
    pub fn new(height: usize, width: usize, labels: Vec<u32>) -> Result<Self> {
        Self::with_background(height, width, labels, 0)
    }

    pub fn with_background(
        height: usize,
        width: usize,
        labels: Vec<u32>,
        background: u32,
    ) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::EmptyGrid);
        }
        if labels.len() != height * width {
            return Err(Error::InvalidParam(format!(
                "buffer of length {} does not match shape ({height}, {width})",
                labels.len()
            )));
        }
        Ok(Self {
            height,
            width,
            labels,
            background,
        })
    }

    pub fn from_rows<R: AsRef<[u32]>>(rows: &[R]) -> Result<Self> {
        let (height, width, labels) = flatten(rows)?;
        Self::new(height, width, labels)
    }

    /// Checks that every label is below the declared class count.
    pub fn check_classes(&self, num_classes: u32) -> Result<()> {
        if num_classes == 0 {
            return Err(Error::InvalidParam("class count must be >= 1".into()));
        }
        match self.labels.iter().find(|&&l| l >= num_classes) {
            Some(l) => Err(Error::InvalidParam(format!(
                "label {l} outside declared class range 0..{num_classes}"
            ))),
            None => Ok(()),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn background(&self) -> u32 {
        self.background
    }

    pub fn is_foreground(&self, idx: usize) -> bool {
        self.labels[idx] != self.background
    }

    pub fn foreground_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l != self.background).count()
    }
}

/// `L` sampled softmax outputs over `K` classes, layout `(L, K, m, n)`.
#[derive(Debug, Clone)]
pub struct ProbabilityStack {
    samples: usize,
    classes: usize,
    height: usize,
    width: usize,
    probs: Vec<f64>,
}

impl ProbabilityStack {
    /// Validates the stack. Pixel rows that sum to one within
    /// [`PROB_SUM_TOL`] are renormalized, anything else is rejected.
    pub fn new(
        samples: usize,
        classes: usize,
        height: usize,
        width: usize,
        mut probs: Vec<f64>,
    ) -> Result<Self> {
        if samples == 0 {
            return Err(Error::InvalidStack("need at least one sample".into()));
        }
        if classes < 2 {
            return Err(Error::InvalidStack("need at least two classes".into()));
        }
        if height == 0 || width == 0 {
            return Err(Error::EmptyGrid);
        }
        let plane = height * width;
        if probs.len() != samples * classes * plane {
            return Err(Error::InvalidStack(format!(
                "buffer of length {} does not match shape ({samples}, {classes}, {height}, {width})",
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0 || **p > 1.0) {
            return Err(Error::InvalidStack(format!("probability {p} outside [0, 1]")));
        }
        for l in 0..samples {
            let base = l * classes * plane;
            for i in 0..plane {
                let s: f64 = (0..classes).map(|c| probs[base + c * plane + i]).sum();
                if (s - 1.0).abs() > PROB_SUM_TOL {
                    return Err(Error::InvalidStack(format!(
                        "sample {l}, pixel {i}: probabilities sum to {s}"
                    )));
                }
                for c in 0..classes {
                    probs[base + c * plane + i] /= s;
                }
            }
        }
        Ok(Self {
            samples,
            classes,
            height,
            width,
            probs,
        })
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn prob(&self, sample: usize, class: usize, pixel: usize) -> f64 {
        let plane = self.height * self.width;
        self.probs[(sample * self.classes + class) * plane + pixel]
    }

    /// Mean class probability across samples, layout `(K, m, n)`.
    pub fn mean_probs(&self) -> Vec<f64> {
        let plane = self.height * self.width;
        let mut mean = vec![0.0; self.classes * plane];
        for l in 0..self.samples {
            let chunk = &self.probs[l * self.classes * plane..(l + 1) * self.classes * plane];
            for (m, p) in mean.iter_mut().zip(chunk) {
                *m += p;
            }
        }
        let inv = 1.0 / self.samples as f64;
        mean.iter_mut().for_each(|m| *m *= inv);
        mean
    }
}

/// Normalized predictive entropy of the sample-averaged class distribution.
///
/// `u = -Σ_c p̄(c) ln p̄(c) / ln K`, with `0 · ln 0 = 0`.
pub fn entropy_uncertainty(stack: &ProbabilityStack) -> UncertaintyMap {
    let (height, width) = stack.shape();
    let plane = height * width;
    let k = stack.classes();
    let mean = stack.mean_probs();
    let norm = (k as f64).ln();
    let values = (0..plane)
        .map(|i| {
            let h: f64 = (0..k)
                .map(|c| mean[c * plane + i])
                .filter(|&p| p > 0.0)
                .map(|p| -p * p.ln())
                .sum();
            h / norm
        })
        .collect();
    UncertaintyMap::from_clipped(height, width, values)
}

/// Ordered, uniquely named scalar scores for one map.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    names: Vec<String>,
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(names: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::EmptyFeatureSet);
        }
        if names.len() != values.len() {
            return Err(Error::LengthMismatch(names.len(), values.len()));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::DuplicateStrategy(n.clone()));
            }
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::FeatureMismatch(format!(
                "feature `{}` is not finite",
                names[i]
            )));
        }
        Ok(Self { names, values })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }
}

fn flatten<T: Copy, R: AsRef<[T]>>(rows: &[R]) -> Result<(usize, usize, Vec<T>)> {
    let height = rows.len();
    let width = rows.first().map_or(0, |r| r.as_ref().len());
    if height == 0 || width == 0 {
        return Err(Error::EmptyGrid);
    }
    let mut values = Vec::with_capacity(height * width);
    for (row, r) in rows.iter().enumerate() {
        let r = r.as_ref();
        if r.len() != width {
            return Err(Error::Ragged {
                row,
                got: r.len(),
                expected: width,
            });
        }
        values.extend_from_slice(r);
    }
    Ok((height, width, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_values_are_admissible() {
        let m = UncertaintyMap::from_rows(&[[0.0, 1.0], [0.5, 0.5]]).unwrap();
        assert_eq!(m.shape(), (2, 2));
        assert_eq!(m.values(), &[0.0, 1.0, 0.5, 0.5]);
        let m = UncertaintyMap::from_rows(&[[0.0]]).unwrap();
        assert_eq!(m.shape(), (1, 1));
    }

    #[test]
    fn rejects_invalid_grids() {
        assert!(matches!(
            UncertaintyMap::from_rows(&[[1.2]]),
            Err(Error::OutOfRange { .. })
        ));
        assert!(matches!(
            UncertaintyMap::from_rows(&[[-0.1]]),
            Err(Error::OutOfRange { .. })
        ));
        assert!(matches!(
            UncertaintyMap::from_rows(&[[f64::NAN]]),
            Err(Error::NonFinite { .. })
        ));
        assert!(matches!(
            UncertaintyMap::from_rows(&[[f64::INFINITY]]),
            Err(Error::NonFinite { .. })
        ));
        let empty: [[f64; 0]; 0] = [];
        assert!(matches!(
            UncertaintyMap::from_rows(&empty),
            Err(Error::EmptyGrid)
        ));
        let ragged: Vec<Vec<f64>> = vec![vec![0.1, 0.2], vec![0.3]];
        assert!(matches!(
            UncertaintyMap::from_rows(&ragged),
            Err(Error::Ragged { row: 1, .. })
        ));
    }

    #[test]
    fn entropy_of_uniform_two_class_is_one() {
        let s = ProbabilityStack::new(1, 2, 1, 1, vec![0.5, 0.5]).unwrap();
        assert_eq!(entropy_uncertainty(&s).values(), &[1.0]);
    }

    #[test]
    fn entropy_of_deterministic_prediction_is_zero() {
        let s = ProbabilityStack::new(1, 3, 1, 1, vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(entropy_uncertainty(&s).values(), &[0.0]);
    }

    #[test]
    fn entropy_averages_samples_before_entropy() {
        // sample 0: (1, 0), sample 1: (0, 1) -> mean (0.5, 0.5)
        let s = ProbabilityStack::new(2, 2, 1, 1, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(entropy_uncertainty(&s).values(), &[1.0]);
    }

    #[test]
    fn stack_rows_are_checked_and_renormalized() {
        assert!(matches!(
            ProbabilityStack::new(1, 2, 1, 1, vec![0.5, 0.4]),
            Err(Error::InvalidStack(_))
        ));
        let s = ProbabilityStack::new(1, 2, 1, 1, vec![0.5 + 4e-7, 0.5]).unwrap();
        let total = s.prob(0, 0, 0) + s.prob(0, 1, 0);
        assert!((total - 1.0).abs() < 1e-15);
        assert!(ProbabilityStack::new(1, 1, 1, 1, vec![1.0]).is_err());
    }

    #[test]
    fn feature_vector_invariants() {
        assert!(FeatureVector::new(vec!["a".into(), "a".into()], vec![0.1, 0.2]).is_err());
        assert!(FeatureVector::new(vec!["a".into()], vec![f64::NAN]).is_err());
        assert!(FeatureVector::new(vec![], vec![]).is_err());
        let f = FeatureVector::new(vec!["a".into(), "b".into()], vec![0.1, 0.2]).unwrap();
        assert_eq!(f.get("b"), Some(0.2));
    }

    #[test]
    fn mask_class_range() {
        let m = SegmentationMask::from_rows(&[[0u32, 1], [2, 1]]).unwrap();
        assert!(m.check_classes(3).is_ok());
        assert!(m.check_classes(2).is_err());
        assert_eq!(m.foreground_count(), 3);
    }
}
