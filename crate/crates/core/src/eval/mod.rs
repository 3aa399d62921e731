//! Downstream-task metrics and the statistical protocol around them.

pub mod auroc;
pub mod bootstrap;
pub mod dice;
pub mod ranking;
pub mod selective;
pub mod wilcoxon;

pub use auroc::auroc;
pub use bootstrap::{bootstrap_many, bootstrap_metric, BootstrapResult, Metric};
pub use dice::{dice, dice_risk, DiceMode};
pub use ranking::{mean_rank, significance_matrix, Direction, MetricTable};
pub use selective::{aurc, eaurc, oracle_aurc, risk_coverage, CurvePoint, RiskCoverageCurve};
pub use wilcoxon::{wilcoxon_one_sided, wilcoxon_paired, WilcoxonResult};

use crate::map::FeatureVector;

/// Scores of one sample plus whichever downstream labels it carries.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub sample_id: String,
    pub scores: FeatureVector,
    /// `true` for out-of-distribution.
    pub ood_label: Option<bool>,
    /// Segmentation risk, `1 − Dice`.
    pub risk: Option<f64>,
}
