//! Selective risk, coverage and the (excess) area under the risk–coverage
//! curve.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub coverage: f64,
    pub selective_risk: f64,
}

/// Points ordered by strictly decreasing coverage; the first covers every
/// sample. `thresholds[r]` is the confidence cut producing `points[r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskCoverageCurve {
    pub points: Vec<CurvePoint>,
    pub thresholds: Vec<f64>,
}

fn check_inputs(risks: &[f64], confidences: &[f64]) -> Result<()> {
    if risks.len() != confidences.len() {
        return Err(Error::LengthMismatch(risks.len(), confidences.len()));
    }
    if risks.is_empty() {
        return Err(Error::Empty);
    }
    if risks.iter().chain(confidences).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParam("risks and confidences must be finite".into()));
    }
    Ok(())
}

/// Indices sorted by decreasing confidence, ties by index.
fn by_confidence_desc(confidences: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..confidences.len()).collect();
    order.sort_by(|&a, &b| confidences[b].total_cmp(&confidences[a]).then(a.cmp(&b)));
    order
}

/// One point per distinct confidence `ρ`: samples with `g ≥ ρ` are kept.
pub fn risk_coverage(risks: &[f64], confidences: &[f64]) -> Result<RiskCoverageCurve> {
    check_inputs(risks, confidences)?;
    let n = risks.len() as f64;
    let order = by_confidence_desc(confidences);
    // walk from the most confident group down, one point per group
    let mut points = Vec::new();
    let mut thresholds = Vec::new();
    let mut kept = 0usize;
    let mut risk_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let rho = confidences[order[i]];
        while i < order.len() && confidences[order[i]] == rho {
            risk_sum += risks[order[i]];
            kept += 1;
            i += 1;
        }
        points.push(CurvePoint {
            coverage: kept as f64 / n,
            selective_risk: risk_sum / kept as f64,
        });
        thresholds.push(rho);
    }
    points.reverse();
    thresholds.reverse();
    Ok(RiskCoverageCurve { points, thresholds })
}

/// Trapezoidal area over coverage, integrated with positive increments.
pub fn aurc(curve: &RiskCoverageCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|w| (w[0].coverage - w[1].coverage) * (w[0].selective_risk + w[1].selective_risk) / 2.0)
        .sum()
}

/// AURC over all `n` coverage levels `k/n`, where a tie group that is cut
/// part-way contributes its mean risk per retained sample. This is the
/// expected AURC over uniformly random tie-breaking and equals [`aurc`] of
/// [`risk_coverage`] when confidences are distinct.
fn expected_aurc(risks: &[f64], order: &[usize], confidences: &[f64]) -> f64 {
    let n = risks.len();
    let mut sr = Vec::with_capacity(n);
    let mut before = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        let mut group_sum = 0.0;
        while j < n && confidences[order[j]] == confidences[order[i]] {
            group_sum += risks[order[j]];
            j += 1;
        }
        if j - i == 1 {
            before += group_sum;
            sr.push(before / (i + 1) as f64);
        } else {
            let group_mean = group_sum / (j - i) as f64;
            for k in i..j {
                let cum = before + (k + 1 - i) as f64 * group_mean;
                sr.push(cum / (k + 1) as f64);
            }
            before += group_sum;
        }
        i = j;
    }
    let step = 1.0 / n as f64;
    sr.windows(2).map(|w| step * (w[0] + w[1]) / 2.0).sum()
}

/// Area of the risk-optimal ordering (ascending risk, ties by index).
pub fn oracle_aurc(risks: &[f64]) -> Result<f64> {
    check_inputs(risks, risks)?;
    let (order, conf) = oracle_order(risks);
    Ok(expected_aurc(risks, &order, &conf))
}

fn oracle_order(risks: &[f64]) -> (Vec<usize>, Vec<f64>) {
    let mut order: Vec<usize> = (0..risks.len()).collect();
    order.sort_by(|&a, &b| risks[a].total_cmp(&risks[b]).then(a.cmp(&b)));
    // distinct confidences: position in the optimal order
    let mut conf = vec![0.0; risks.len()];
    for (pos, &idx) in order.iter().enumerate() {
        conf[idx] = -(pos as f64);
    }
    (order, conf)
}

/// Excess AURC: AURC of `confidences` minus AURC of the risk oracle.
pub fn eaurc(risks: &[f64], confidences: &[f64]) -> Result<f64> {
    check_inputs(risks, confidences)?;
    let order = by_confidence_desc(confidences);
    let actual = expected_aurc(risks, &order, confidences);
    let (oracle, conf) = oracle_order(risks);
    Ok(actual - expected_aurc(risks, &oracle, &conf))
}
