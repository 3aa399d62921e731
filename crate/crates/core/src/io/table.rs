//! CSV manifests and score tables.

use std::collections::HashSet;
use std::fs::File;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub sample_id: String,
    pub map_path: PathBuf,
    pub mask_path: Option<PathBuf>,
    pub ood_label: Option<bool>,
    pub risk: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, sample_id: &str) -> Option<&ManifestRow> {
        self.rows.iter().find(|r| r.sample_id == sample_id)
    }
}

fn open_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn create_writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn column(headers: &csv::StringRecord, names: &[&str]) -> Option<usize> {
    headers.iter().position(|h| names.contains(&h.trim()))
}

fn parse_err(row: usize, column: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        row,
        column: column.to_string(),
        message: message.into(),
    }
}

fn cell(record: &csv::StringRecord, idx: Option<usize>) -> Option<&str> {
    idx.and_then(|i| record.get(i)).map(str::trim).filter(|s| !s.is_empty())
}

fn parse_f64(text: &str, row: usize, column: &str) -> Result<f64> {
    let v: f64 = text
        .parse()
        .map_err(|_| parse_err(row, column, format!("`{text}` is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(row, column, "value must be finite"));
    }
    Ok(v)
}

/// Reads a manifest. Relative paths are resolved against the manifest's
/// directory and every referenced file must exist. Rows are numbered from
/// 1, excluding the header.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new(""));
    let mut reader = open_reader(path)?;
    let headers = reader.headers()?.clone();
    let id_col = column(&headers, &["sample_id"]).ok_or_else(|| Error::MissingColumn("sample_id".into()))?;
    let map_col = column(&headers, &["map_path", "path"]).ok_or_else(|| Error::MissingColumn("map_path".into()))?;
    let mask_col = column(&headers, &["mask_path"]);
    let ood_col = column(&headers, &["ood_label"]);
    let risk_col = column(&headers, &["risk"]);

    let resolve = |p: &str, row: usize, col: &str| -> Result<PathBuf> {
        let full = base.join(p);
        if !full.is_file() {
            return Err(Error::io(
                full,
                std::io::Error::new(std::io::ErrorKind::NotFound, format!("referenced at row {row}, column `{col}`")),
            ));
        }
        Ok(full)
    };

    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let sample_id = cell(&record, Some(id_col))
            .ok_or_else(|| parse_err(row, "sample_id", "empty sample id"))?
            .to_string();
        if !seen.insert(sample_id.clone()) {
            return Err(Error::DuplicateId(sample_id));
        }
        let map_path = cell(&record, Some(map_col)).ok_or_else(|| parse_err(row, "map_path", "empty path"))?;
        let map_path = resolve(map_path, row, "map_path")?;
        let mask_path = cell(&record, mask_col).map(|p| resolve(p, row, "mask_path")).transpose()?;
        let ood_label = cell(&record, ood_col)
            .map(|t| match t {
                "0" | "false" | "False" => Ok(false),
                "1" | "true" | "True" => Ok(true),
                other => Err(parse_err(row, "ood_label", format!("`{other}` is not 0 or 1"))),
            })
            .transpose()?;
        let risk = cell(&record, risk_col).map(|t| parse_f64(t, row, "risk")).transpose()?;
        rows.push(ManifestRow {
            sample_id,
            map_path,
            mask_path,
            ood_label,
            risk,
        });
    }
    Ok(Manifest { rows })
}

/// Writes a manifest with paths exactly as stored.
pub fn write_manifest(path: impl AsRef<Path>, manifest: &Manifest) -> Result<()> {
    let path = path.as_ref();
    let mut w = create_writer(path)?;
    w.write_record(["sample_id", "map_path", "mask_path", "ood_label", "risk"])?;
    for r in &manifest.rows {
        w.write_record([
            r.sample_id.clone(),
            r.map_path.to_string_lossy().into_owned(),
            r.mask_path.as_ref().map(|p| p.to_string_lossy().into_owned()).unwrap_or_default(),
            r.ood_label.map(|b| u8::from(b).to_string()).unwrap_or_default(),
            r.risk.map(format_f64).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Shortest text that parses back to the same `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

/// `sample_id` followed by one column per score; missing cells are `None`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreTable {
    pub columns: Vec<String>,
    pub ids: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl ScoreTable {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            ids: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn push_row(&mut self, id: String, row: Vec<Option<f64>>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::LengthMismatch(row.len(), self.columns.len()));
        }
        self.ids.push(id);
        self.values.push(row);
        Ok(())
    }

    pub fn push_column(&mut self, name: String, values: Vec<Option<f64>>) -> Result<()> {
        if values.len() != self.ids.len() {
            return Err(Error::LengthMismatch(values.len(), self.ids.len()));
        }
        if self.columns.contains(&name) {
            return Err(Error::DuplicateStrategy(name));
        }
        self.columns.push(name);
        for (row, v) in self.values.iter_mut().zip(values) {
            row.push(v);
        }
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let j = self.column_index(name)?;
        Ok(self.values.iter().map(|r| r[j]).collect())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

pub fn write_scores(path: impl AsRef<Path>, table: &ScoreTable) -> Result<()> {
    let path = path.as_ref();
    let mut w = create_writer(path)?;
    let mut header = vec!["sample_id".to_string()];
    header.extend(table.columns.iter().cloned());
    w.write_record(&header)?;
    for (id, row) in table.ids.iter().zip(&table.values) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(|v| v.map(format_f64).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_scores(path: impl AsRef<Path>) -> Result<ScoreTable> {
    let mut reader = open_reader(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let id_col = column(&headers, &["sample_id"]).ok_or_else(|| Error::MissingColumn("sample_id".into()))?;
    let cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != id_col)
        .map(|(i, h)| (i, h.trim().to_string()))
        .collect();
    let mut table = ScoreTable::new(cols.iter().map(|(_, n)| n.clone()).collect());
    let mut seen = HashSet::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let id = cell(&record, Some(id_col))
            .ok_or_else(|| parse_err(row, "sample_id", "empty sample id"))?
            .to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        let values = cols
            .iter()
            .map(|(j, name)| cell(&record, Some(*j)).map(|t| parse_f64(t, row, name)).transpose())
            .collect::<Result<Vec<_>>>()?;
        table.push_row(id, values)?;
    }
    Ok(table)
}
