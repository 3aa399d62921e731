//! Canonical strategy identifiers (`avg`, `plm:20`, `eds:0.1`, ...) and
//! dispatch to the aggregators.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::intensity;
use crate::map::{SegmentationMask, UncertaintyMap};
use crate::spatial::{self, DEFAULT_EDS_TAU, DEFAULT_ENTROPY_BINS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    Avg,
    Plm(usize),
    Ata(f64),
    Aqa(f64),
    Bca,
    Ica,
    Qfr,
    Mor,
    Eds(f64),
    Ent(usize),
}

/// The thirteen intensity- and prediction-based strategies at their
/// benchmark parameters.
pub const INTENSITY_SET: [Strategy; 13] = [
    Strategy::Avg,
    Strategy::Plm(10),
    Strategy::Plm(20),
    Strategy::Plm(50),
    Strategy::Ata(0.3),
    Strategy::Ata(0.5),
    Strategy::Ata(0.7),
    Strategy::Aqa(0.6),
    Strategy::Aqa(0.75),
    Strategy::Aqa(0.9),
    Strategy::Bca,
    Strategy::Ica,
    Strategy::Qfr,
];

pub const SPATIAL_SET: [Strategy; 3] = [
    Strategy::Mor,
    Strategy::Eds(DEFAULT_EDS_TAU),
    Strategy::Ent(DEFAULT_ENTROPY_BINS),
];

impl Strategy {
    pub fn needs_mask(&self) -> bool {
        matches!(self, Strategy::Bca | Strategy::Ica | Strategy::Qfr)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Strategy::Plm(0) => Err(Error::InvalidParam("plm patch must be positive".into())),
            Strategy::Ata(t) if !(t > 0.0 && t < 1.0) => Err(Error::InvalidThreshold(t)),
            Strategy::Aqa(q) if !(q > 0.0 && q < 1.0) => Err(Error::InvalidQuantile(q)),
            Strategy::Eds(t) if !(t > 0.0 && t < 1.0) => Err(Error::InvalidParam(format!(
                "edge threshold {t} must lie in (0, 1)"
            ))),
            Strategy::Ent(b) if b < 2 => Err(Error::InvalidParam(format!(
                "entropy needs at least 2 bins, got {b}"
            ))),
            _ => Ok(()),
        }
    }

    /// Scores one map. Prediction-based strategies need `mask`.
    pub fn compute(&self, map: &UncertaintyMap, mask: Option<&SegmentationMask>) -> Result<f64> {
        let need_mask = || mask.ok_or_else(|| Error::MaskRequired(self.to_string()));
        match *self {
            Strategy::Avg => Ok(intensity::avg(map)),
            Strategy::Plm(p) => intensity::plm(map, p),
            Strategy::Ata(t) => intensity::ata(map, t),
            Strategy::Aqa(q) => intensity::aqa(map, q),
            Strategy::Bca => intensity::bca(map, need_mask()?),
            Strategy::Ica => intensity::ica(map, need_mask()?),
            Strategy::Qfr => intensity::qfr(map, need_mask()?),
            Strategy::Mor => Ok(spatial::mor(map)),
            Strategy::Eds(t) => spatial::eds(map, t),
            Strategy::Ent(b) => spatial::ent(map, b),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Strategy::Avg => f.write_str("avg"),
            Strategy::Plm(p) => write!(f, "plm:{p}"),
            Strategy::Ata(t) => write!(f, "ata:{t}"),
            Strategy::Aqa(q) => write!(f, "aqa:{q}"),
            Strategy::Bca => f.write_str("bca"),
            Strategy::Ica => f.write_str("ica"),
            Strategy::Qfr => f.write_str("qfr"),
            Strategy::Mor => f.write_str("mor"),
            Strategy::Eds(t) if t == DEFAULT_EDS_TAU => f.write_str("eds"),
            Strategy::Eds(t) => write!(f, "eds:{t}"),
            Strategy::Ent(b) if b == DEFAULT_ENTROPY_BINS => f.write_str("ent"),
            Strategy::Ent(b) => write!(f, "ent:{b}"),
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (n.trim(), Some(p.trim())),
            None => (s, None),
        };
        let bad = || Error::UnknownStrategy(s.to_string());
        let float = |p: Option<&str>| -> Result<f64> {
            p.ok_or_else(bad)?.parse::<f64>().map_err(|_| bad())
        };
        let int = |p: Option<&str>| -> Result<usize> {
            p.ok_or_else(bad)?.parse::<usize>().map_err(|_| bad())
        };
        let strategy = match name.to_ascii_lowercase().as_str() {
            "avg" if param.is_none() => Strategy::Avg,
            "plm" => Strategy::Plm(int(param)?),
            "ata" => Strategy::Ata(float(param)?),
            "aqa" => Strategy::Aqa(float(param)?),
            "bca" if param.is_none() => Strategy::Bca,
            "ica" if param.is_none() => Strategy::Ica,
            "qfr" if param.is_none() => Strategy::Qfr,
            "mor" if param.is_none() => Strategy::Mor,
            "eds" => Strategy::Eds(match param {
                Some(_) => float(param)?,
                None => DEFAULT_EDS_TAU,
            }),
            "ent" => Strategy::Ent(match param {
                Some(_) => int(param)?,
                None => DEFAULT_ENTROPY_BINS,
            }),
            _ => return Err(bad()),
        };
        strategy.validate()?;
        Ok(strategy)
    }
}

/// Parses a comma-separated list, rejecting duplicates after
/// canonicalization (`eds` and `eds:0.2` are the same strategy).
pub fn parse_list(list: &str) -> Result<Vec<Strategy>> {
    let mut out: Vec<Strategy> = Vec::new();
    for item in list.split(',').filter(|s| !s.trim().is_empty()) {
        let s: Strategy = item.parse()?;
        if out.contains(&s) {
            return Err(Error::DuplicateStrategy(s.to_string()));
        }
        out.push(s);
    }
    if out.is_empty() {
        return Err(Error::EmptyFeatureSet);
    }
    Ok(out)
}
