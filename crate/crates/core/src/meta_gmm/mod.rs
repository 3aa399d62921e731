//! Meta-aggregation: a Gaussian mixture over vectors of aggregated scores,
//! fitted on in-distribution maps and queried by negative log-likelihood.

pub mod em;
pub mod features;
pub mod model;
pub mod preprocess;

pub use em::{bic, em_fit, EmConfig, EmFit, MixtureParams};
pub use features::{FeatureMatrix, FeatureSetSpec, Variant};
pub use model::{
    ablate, fit_meta, fit_meta_report, meta_score, select_components, Ablation, Candidate,
    GmmModel, MetaConfig,
};
pub use preprocess::{epsilon_rescale, standardize_apply, standardize_fit, Standardizer};
