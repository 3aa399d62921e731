use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::FeatureVector;
use crate::strategy::{Strategy, INTENSITY_SET, SPATIAL_SET};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    All,
    Int,
    Spa,
    Custom,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::All => "all",
            Variant::Int => "int",
            Variant::Spa => "spa",
            Variant::Custom => "custom",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "all" => Ok(Variant::All),
            "int" => Ok(Variant::Int),
            "spa" => Ok(Variant::Spa),
            "custom" => Ok(Variant::Custom),
            _ => Err(Error::InvalidParam(format!("unknown feature variant `{s}`"))),
        }
    }
}

/// Which aggregated scores make up a feature vector, in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSetSpec {
    pub variant: Variant,
    pub strategies: Vec<String>,
}

impl FeatureSetSpec {
    pub fn all() -> Self {
        Self::from_strategies(Variant::All, INTENSITY_SET.iter().chain(&SPATIAL_SET))
    }

    pub fn int() -> Self {
        Self::from_strategies(Variant::Int, INTENSITY_SET.iter())
    }

    pub fn spa() -> Self {
        Self::from_strategies(Variant::Spa, SPATIAL_SET.iter())
    }

    /// Arbitrary identifiers; each must be unique and non-empty.
    pub fn custom<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let strategies: Vec<String> = names.into_iter().map(Into::into).collect();
        if strategies.is_empty() {
            return Err(Error::EmptyFeatureSet);
        }
        for (i, s) in strategies.iter().enumerate() {
            if s.is_empty() {
                return Err(Error::InvalidParam("empty feature name".into()));
            }
            if strategies[..i].contains(s) {
                return Err(Error::DuplicateStrategy(s.clone()));
            }
        }
        Ok(Self {
            variant: Variant::Custom,
            strategies,
        })
    }

    pub fn for_variant(variant: Variant) -> Option<Self> {
        match variant {
            Variant::All => Some(Self::all()),
            Variant::Int => Some(Self::int()),
            Variant::Spa => Some(Self::spa()),
            Variant::Custom => None,
        }
    }

    fn from_strategies<'a>(variant: Variant, it: impl Iterator<Item = &'a Strategy>) -> Self {
        Self {
            variant,
            strategies: it.map(|s| s.to_string()).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.strategies.len()
    }

    /// Parses the identifiers back into strategies, where possible.
    pub fn parsed(&self) -> Result<Vec<Strategy>> {
        self.strategies.iter().map(|s| s.parse()).collect()
    }

    /// The same set without `drop`.
    pub fn without(&self, drop: &str) -> Result<Self> {
        if !self.strategies.iter().any(|s| s == drop) {
            return Err(Error::FeatureMismatch(format!("`{drop}` is not in the feature set")));
        }
        Self::custom(self.strategies.iter().filter(|s| *s != drop).cloned())
            .map_err(|_| Error::EmptyFeatureSet)
    }
}

/// Rows of aggregated scores with named columns, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    names: Vec<String>,
    rows: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, rows: usize, data: Vec<f64>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::EmptyFeatureSet);
        }
        if data.len() != rows * names.len() {
            return Err(Error::LengthMismatch(data.len(), rows * names.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::FeatureMismatch("feature matrix holds non-finite values".into()));
        }
        Ok(Self { names, rows, data })
    }

    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let d = names.len();
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::LengthMismatch(r.len(), d));
        }
        Self::new(names, rows.len(), rows.concat())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.names.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.ncols();
        &self.data[i * d..(i + 1) * d]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().skip(j).step_by(self.ncols()).copied()
    }

    pub fn row_vector(&self, i: usize) -> FeatureVector {
        FeatureVector::new(self.names.clone(), self.row(i).to_vec())
            .expect("matrix columns are valid feature names")
    }

    /// Columns reordered (and subset) to match `names`.
    pub fn select(&self, names: &[String]) -> Result<Self> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.names
                    .iter()
                    .position(|m| m == n)
                    .ok_or_else(|| Error::MissingColumn(n.clone()))
            })
            .collect::<Result<_>>()?;
        let mut data = Vec::with_capacity(self.rows * idx.len());
        for r in 0..self.rows {
            let row = self.row(r);
            data.extend(idx.iter().map(|&j| row[j]));
        }
        Self::new(names.to_vec(), self.rows, data)
    }

    pub(crate) fn map_values(&self, f: impl Fn(usize, f64) -> f64) -> Self {
        let d = self.ncols();
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(i, &v)| f(i % d, v))
            .collect();
        Self {
            names: self.names.clone(),
            rows: self.rows,
            data,
        }
    }
}
