use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::FeatureVector;

use super::em::{bic, em_fit, EmConfig, EmFit, MixtureParams, PreparedMixture};
use super::features::{FeatureMatrix, FeatureSetSpec};
use super::preprocess::{
    check_epsilon, epsilon_rescale, epsilon_rescale_value, standardize_apply, standardize_fit,
};

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetaConfig {
    pub epsilon: f64,
    pub k_max: usize,
    pub em: EmConfig,
}

impl Default for MetaConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            k_max: 10,
            em: EmConfig::default(),
        }
    }
}

/// One candidate component count considered during model selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub k: usize,
    pub bic: f64,
    pub loglik: f64,
}

/// Fits `K = 1..=k_max` (capped at `n`) and returns the fit with the lowest
/// BIC together with every candidate's score. Ties go to the smaller `K`.
pub fn select_components(
    data: &[f64],
    n: usize,
    d: usize,
    k_max: usize,
    cfg: &EmConfig,
) -> Result<(EmFit, Vec<Candidate>)> {
    if k_max == 0 {
        return Err(Error::InvalidParam("k_max must be >= 1".into()));
    }
    let mut best: Option<(EmFit, f64)> = None;
    let mut candidates = Vec::new();
    for k in 1..=k_max.min(n) {
        let fit = em_fit(data, n, d, k, cfg)?;
        let score = bic(fit.loglik, k, d, n);
        candidates.push(Candidate {
            k,
            bic: score,
            loglik: fit.loglik,
        });
        if best.as_ref().is_none_or(|(_, b)| score < *b) {
            best = Some((fit, score));
        }
    }
    let (fit, _) = best.ok_or(Error::TooFewSamples { needed: 2, got: n })?;
    Ok((fit, candidates))
}

/// Fitted meta-aggregator: preprocessing parameters plus mixture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GmmModel {
    pub version: u32,
    pub feature_spec: FeatureSetSpec,
    pub epsilon: f64,
    pub feat_mean: Vec<f64>,
    pub feat_std: Vec<f64>,
    #[serde(rename = "K")]
    pub k: usize,
    pub pi: Vec<f64>,
    pub mu: Vec<Vec<f64>>,
    /// `K × d × d`, row-major per component.
    pub sigma: Vec<Vec<Vec<f64>>>,
    pub seed: u64,
    pub n_train: usize,
    pub bic: f64,
    pub loglik: f64,
    #[serde(skip)]
    prepared: OnceLock<PreparedMixture>,
}

impl GmmModel {
    pub fn dim(&self) -> usize {
        self.feature_spec.dim()
    }

    fn params(&self) -> MixtureParams {
        MixtureParams {
            weights: self.pi.clone(),
            means: self.mu.clone(),
            covariances: self.sigma.iter().map(|s| s.concat()).collect(),
        }
    }

    fn mixture(&self) -> Result<&PreparedMixture> {
        if let Some(p) = self.prepared.get() {
            return Ok(p);
        }
        let p = self.params().prepare()?;
        Ok(self.prepared.get_or_init(|| p))
    }

    /// Checks internal consistency (used after loading).
    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        let bad = |m: &str| Err(Error::FeatureMismatch(format!("invalid model: {m}")));
        if self.version != MODEL_VERSION {
            return bad(&format!("unsupported version {}", self.version));
        }
        if d == 0 {
            return Err(Error::EmptyFeatureSet);
        }
        check_epsilon(self.epsilon)?;
        if self.feat_mean.len() != d || self.feat_std.len() != d {
            return bad("preprocessing parameters do not match the feature set");
        }
        if self.feat_std.iter().any(|s| !(*s > 0.0)) {
            return bad("non-positive feature scale");
        }
        if self.k == 0 || self.pi.len() != self.k || self.mu.len() != self.k || self.sigma.len() != self.k {
            return bad("component count does not match parameters");
        }
        if self.mu.iter().any(|m| m.len() != d)
            || self.sigma.iter().any(|s| s.len() != d || s.iter().any(|r| r.len() != d))
        {
            return bad("parameter dimensions do not match the feature set");
        }
        if self.pi.iter().any(|p| *p < 0.0) || (self.pi.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("mixing weights must be non-negative and sum to 1");
        }
        self.mixture().map(|_| ())
    }

    /// Rescaled and standardized feature values in model order.
    fn transform(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                (epsilon_rescale_value(v, self.epsilon) - self.feat_mean[j]) / self.feat_std[j]
            })
            .collect()
    }

    /// Negative log-likelihood of already preprocessed coordinates.
    pub fn nll_transformed(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::LengthMismatch(x.len(), self.dim()));
        }
        Ok(-self.mixture()?.log_pdf(x))
    }

    /// Meta-score `−ln p(f)`; features are matched to the model by name.
    pub fn score(&self, features: &FeatureVector) -> Result<f64> {
        let values = self
            .feature_spec
            .strategies
            .iter()
            .map(|name| {
                features
                    .get(name)
                    .ok_or_else(|| Error::FeatureMismatch(format!("missing feature `{name}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        self.nll_transformed(&self.transform(&values))
    }

    /// Scores every row of a matrix (columns matched by name).
    pub fn score_matrix(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        let selected = features
            .select(&self.feature_spec.strategies)
            .map_err(|e| match e {
                Error::MissingColumn(c) => Error::FeatureMismatch(format!("missing feature `{c}`")),
                other => other,
            })?;
        let mixture = self.mixture()?;
        Ok((0..selected.nrows())
            .map(|i| -mixture.log_pdf(&self.transform(selected.row(i))))
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: GmmModel = serde_json::from_str(s)?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

/// Free function alias of [`GmmModel::score`].
pub fn meta_score(model: &GmmModel, features: &FeatureVector) -> Result<f64> {
    model.score(features)
}

/// Full pipeline on in-distribution features: ε-rescale, standardize, fit
/// `K = 1..=k_max` and keep the lowest BIC.
pub fn fit_meta(features: &FeatureMatrix, spec: &FeatureSetSpec, cfg: &MetaConfig) -> Result<GmmModel> {
    fit_meta_report(features, spec, cfg).map(|(m, _)| m)
}

/// [`fit_meta`] that also returns the BIC of every candidate `K`.
pub fn fit_meta_report(
    features: &FeatureMatrix,
    spec: &FeatureSetSpec,
    cfg: &MetaConfig,
) -> Result<(GmmModel, Vec<Candidate>)> {
    if spec.dim() == 0 {
        return Err(Error::EmptyFeatureSet);
    }
    let selected = features.select(&spec.strategies)?;
    let n = selected.nrows();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let rescaled = epsilon_rescale(&selected, cfg.epsilon)?;
    let scaler = standardize_fit(&rescaled)?;
    let standardized = standardize_apply(&rescaled, &scaler.mean, &scaler.std)?;
    let d = spec.dim();
    let (fit, candidates) = select_components(standardized.data(), n, d, cfg.k_max, &cfg.em)?;
    let k = fit.params.k();
    let model = GmmModel {
        version: MODEL_VERSION,
        feature_spec: spec.clone(),
        epsilon: cfg.epsilon,
        feat_mean: scaler.mean,
        feat_std: scaler.std,
        k,
        pi: fit.params.weights.clone(),
        mu: fit.params.means.clone(),
        sigma: fit
            .params
            .covariances
            .iter()
            .map(|c| c.chunks(d).map(<[f64]>::to_vec).collect())
            .collect(),
        seed: cfg.em.seed,
        n_train: n,
        bic: bic(fit.loglik, k, d, n),
        loglik: fit.loglik,
        prepared: OnceLock::new(),
    };
    Ok((model, candidates))
}

/// Feature-set reduction for ablation studies.
#[derive(Debug, Clone, PartialEq)]
pub enum Ablation {
    /// Leave one strategy out.
    Drop(String),
    /// Fit on the listed strategies only.
    KeepOnly(Vec<String>),
}

pub fn ablate(
    features: &FeatureMatrix,
    spec: &FeatureSetSpec,
    ablation: &Ablation,
    cfg: &MetaConfig,
) -> Result<GmmModel> {
    let reduced = match ablation {
        Ablation::Drop(name) => spec.without(name)?,
        Ablation::KeepOnly(names) => {
            if names.is_empty() {
                return Err(Error::EmptyFeatureSet);
            }
            FeatureSetSpec::custom(names.iter().cloned())?
        }
    };
    fit_meta(features, &reduced, cfg)
}
