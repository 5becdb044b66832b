//! Feature vectors, column-typed datasets and CSV ingestion.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    #[default]
    Continuous,
    /// Categorical or binary; matched exactly when conditioning.
    Categorical,
}

/// A single row of feature values with its column names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    values: Vec<f64>,
    feature_names: Vec<String>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, feature_names: Vec<String>) -> Result<Self> {
        if values.len() != feature_names.len() {
            return Err(Error::InvalidInput(format!(
                "{} values but {} feature names",
                values.len(),
                feature_names.len()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "feature `{}` has non-finite value {}",
                feature_names[j], values[j]
            )));
        }
        Ok(FeatureVector {
            values,
            feature_names,
        })
    }

    /// Builds a vector with default names `x1..xM`.
    pub fn unnamed(values: Vec<f64>) -> Result<Self> {
        let names = default_names(values.len());
        Self::new(values, names)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn default_names(n: usize) -> Vec<String> {
    (1..=n).map(|j| format!("x{j}")).collect()
}

/// A row-major table of finite numeric values.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    feature_names: Vec<String>,
    kinds: Vec<ColumnKind>,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(feature_names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_cols = feature_names.len();
        let mut values = Vec::with_capacity(rows.len() * n_cols);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::Data(format!(
                    "row {i} has {} values, expected {n_cols}",
                    row.len()
                )));
            }
            values.extend(row);
        }
        Self::from_flat(feature_names, values)
    }

    pub fn from_flat(feature_names: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n_cols = feature_names.len();
        if n_cols == 0 {
            return Err(Error::Data("dataset has no columns".into()));
        }
        if !values.len().is_multiple_of(n_cols) {
            return Err(Error::Data(format!(
                "{} values do not divide into rows of {n_cols}",
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite value in row {}, column `{}`",
                k / n_cols,
                feature_names[k % n_cols]
            )));
        }
        Ok(Dataset {
            kinds: vec![ColumnKind::Continuous; n_cols],
            feature_names,
            values,
        })
    }

    pub fn from_rows(rows: &[FeatureVector]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::Data("no rows given".into()))?;
        let names = first.feature_names().to_vec();
        let mut values = Vec::with_capacity(rows.len() * names.len());
        for (i, row) in rows.iter().enumerate() {
            if row.feature_names() != names.as_slice() {
                return Err(Error::Data(format!("row {i} has a different column layout")));
            }
            values.extend_from_slice(row.values());
        }
        Self::from_flat(names, values)
    }

    #[must_use]
    pub fn with_kinds(mut self, kinds: Vec<ColumnKind>) -> Self {
        assert_eq!(kinds.len(), self.n_cols(), "one kind per column");
        self.kinds = kinds;
        self
    }

    pub fn set_kind(&mut self, column: usize, kind: ColumnKind) {
        self.kinds[column] = kind;
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn kinds(&self) -> &[ColumnKind] {
        &self.kinds
    }

    pub fn n_cols(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_rows(&self) -> usize {
        self.values.len() / self.n_cols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.n_cols();
        &self.values[i * m..(i + 1) * m]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.n_cols())
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(move |r| r[j])
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn feature_vector(&self, i: usize) -> FeatureVector {
        FeatureVector {
            values: self.row(i).to_vec(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Keeps the listed rows in the given order.
    pub fn take_rows(&self, indices: &[usize]) -> Dataset {
        let mut values = Vec::with_capacity(indices.len() * self.n_cols());
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Dataset {
            feature_names: self.feature_names.clone(),
            kinds: self.kinds.clone(),
            values,
        }
    }

    /// Projects onto the listed columns in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Dataset> {
        if let Some(&bad) = columns.iter().find(|&&j| j >= self.n_cols()) {
            return Err(Error::InvalidArgument(format!("column {bad} out of range")));
        }
        let mut values = Vec::with_capacity(self.n_rows() * columns.len());
        for row in self.rows() {
            values.extend(columns.iter().map(|&j| row[j]));
        }
        Ok(Dataset {
            feature_names: columns.iter().map(|&j| self.feature_names[j].clone()).collect(),
            kinds: columns.iter().map(|&j| self.kinds[j]).collect(),
            values,
        })
    }

    /// Drops the named column if present.
    pub fn without_column(&self, name: &str) -> Result<Dataset> {
        match self.column_index(name) {
            None => Ok(self.clone()),
            Some(drop) => {
                let keep: Vec<usize> = (0..self.n_cols()).filter(|&j| j != drop).collect();
                self.select_columns(&keep)
            }
        }
    }

    /// Reads a CSV with a header row; every cell must parse as a finite number.
    /// Lines starting with `#` are treated as comments.
    pub fn read_csv<R: Read>(reader: R, kind_overrides: &HashMap<String, ColumnKind>) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let names: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        for key in kind_overrides.keys() {
            if !names.contains(key) {
                return Err(Error::Data(format!("kind override for unknown column `{key}`")));
            }
        }
        let mut values = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != names.len() {
                return Err(Error::Data(format!(
                    "data row {} has {} fields, expected {}",
                    i + 1,
                    record.len(),
                    names.len()
                )));
            }
            for (j, field) in record.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| {
                    Error::Data(format!(
                        "data row {}, column `{}`: `{field}` is not a number",
                        i + 1,
                        names[j]
                    ))
                })?;
                values.push(v);
            }
        }
        let kinds = names
            .iter()
            .map(|n| kind_overrides.get(n).copied().unwrap_or_default())
            .collect();
        Ok(Dataset::from_flat(names, values)?.with_kinds(kinds))
    }

    pub fn read_csv_path(path: &Path, kind_overrides: &HashMap<String, ColumnKind>) -> Result<Dataset> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file), kind_overrides)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(&self.feature_names)?;
        for row in self.rows() {
            wtr.write_record(row.iter().map(|v| v.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }
}
