//! Tabular datasets: schema, ingestion, MCAR masking, median/mode fill and
//! unit scaling.

mod csv_io;
mod impute_init;
mod mcar;
mod scale;
pub mod split;
mod stats;
pub mod synthetic;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub use csv_io::{load_csv, load_schema_file, parse_schema, read_csv, write_csv, SchemaSource};
pub use impute_init::initialize_impute;
pub use mcar::{remove_mcar, MissingnessRecord};
pub use scale::{scale_unit, UnitScaling};
pub use stats::{median, mode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnRole {
    Feature,
    Target,
    Ignore,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    pub role: ColumnRole,
}

impl ColumnSchema {
    pub fn new(name: impl Into<String>, kind: ColumnKind, role: ColumnRole) -> Self {
        Self {
            name: name.into(),
            kind,
            role,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Regression,
}

/// How a feature is split on by the trees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Categorical { levels: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub enum ColumnValues<T> {
    Numeric(Vec<T>),
    /// Dense codes in `0..levels.len()`, assigned in order of first appearance.
    Categorical { codes: Vec<u32>, levels: Vec<String> },
}

impl<T: Real> ColumnValues<T> {
    fn len(&self) -> usize {
        match self {
            ColumnValues::Numeric(v) => v.len(),
            ColumnValues::Categorical { codes, .. } => codes.len(),
        }
    }

    fn take(&self, rows: &[usize]) -> Self {
        match self {
            ColumnValues::Numeric(v) => ColumnValues::Numeric(rows.iter().map(|&r| v[r]).collect()),
            ColumnValues::Categorical { codes, levels } => ColumnValues::Categorical {
                codes: rows.iter().map(|&r| codes[r]).collect(),
                levels: levels.clone(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Column<T> {
    pub schema: ColumnSchema,
    pub values: ColumnValues<T>,
    /// `true` marks a missing cell. Missing numeric cells hold NaN.
    pub missing: Vec<bool>,
}

impl<T: Real> Column<T> {
    pub fn numeric(name: impl Into<String>, role: ColumnRole, values: Vec<T>) -> Self {
        let missing = values.iter().map(|v| v.is_nan()).collect();
        Self {
            schema: ColumnSchema::new(name, ColumnKind::Numeric, role),
            values: ColumnValues::Numeric(values),
            missing,
        }
    }

    pub fn categorical(
        name: impl Into<String>,
        role: ColumnRole,
        codes: Vec<u32>,
        levels: Vec<String>,
    ) -> Self {
        let missing = vec![false; codes.len()];
        Self {
            schema: ColumnSchema::new(name, ColumnKind::Categorical, role),
            values: ColumnValues::Categorical { codes, levels },
            missing,
        }
    }

    pub fn kind(&self) -> ColumnKind {
        self.schema.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell value as a scalar; categorical codes are returned as exact integers.
    pub fn get(&self, row: usize) -> T {
        match &self.values {
            ColumnValues::Numeric(v) => v[row],
            ColumnValues::Categorical { codes, .. } => T::of(codes[row] as f64),
        }
    }

    pub fn n_levels(&self) -> Option<usize> {
        match &self.values {
            ColumnValues::Categorical { levels, .. } => Some(levels.len()),
            ColumnValues::Numeric(_) => None,
        }
    }

    fn set(&mut self, row: usize, value: T) {
        match &mut self.values {
            ColumnValues::Numeric(v) => v[row] = value,
            ColumnValues::Categorical { codes, .. } => {
                codes[row] = value.to_u32().expect("category code fits in u32")
            }
        }
        self.missing[row] = false;
    }

    fn mark_missing(&mut self, row: usize) {
        if let ColumnValues::Numeric(v) = &mut self.values {
            v[row] = T::nan();
        }
        self.missing[row] = true;
    }
}

/// Borrowed view of the response column.
#[derive(Clone, Copy, Debug)]
pub enum Response<'a, T> {
    Classes { codes: &'a [u32], n_classes: usize },
    Values(&'a [T]),
}

/// Immutable columnar table with exactly one target column.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T: Real = f64> {
    columns: Vec<Column<T>>,
    n_rows: usize,
    target: usize,
    features: Vec<usize>,
    task: Task,
    /// Missing mask that was filled by [`initialize_impute`], indexed by feature.
    filled_mask: Option<Vec<Vec<bool>>>,
}

impl<T: Real> Dataset<T> {
    pub fn new(columns: Vec<Column<T>>) -> Result<Self> {
        let targets: Vec<usize> = columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.schema.role == ColumnRole::Target)
            .map(|(i, _)| i)
            .collect();
        if targets.len() != 1 {
            return Err(Error::data(format!(
                "exactly one target column required, found {}",
                targets.len()
            )));
        }
        let target = targets[0];
        let features: Vec<usize> = columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.schema.role == ColumnRole::Feature)
            .map(|(i, _)| i)
            .collect();
        if features.is_empty() {
            return Err(Error::data("at least one feature column required"));
        }
        let n_rows = columns[target].len();
        if n_rows == 0 {
            return Err(Error::data("dataset has zero rows"));
        }
        for c in &columns {
            if c.len() != n_rows || c.missing.len() != n_rows {
                return Err(Error::data(format!(
                    "column '{}' has {} entries, expected {}",
                    c.schema.name,
                    c.len(),
                    n_rows
                )));
            }
            if let ColumnValues::Categorical { codes, levels } = &c.values {
                if let Some(bad) = codes.iter().zip(&c.missing).find(|(&k, &m)| !m && k as usize >= levels.len()) {
                    return Err(Error::data(format!(
                        "column '{}' has code {} outside 0..{}",
                        c.schema.name,
                        bad.0,
                        levels.len()
                    )));
                }
            }
        }
        if let Some(row) = columns[target].missing.iter().position(|&m| m) {
            return Err(Error::data(format!("target is missing at row {row}")));
        }
        let task = match columns[target].kind() {
            ColumnKind::Categorical => Task::Classification,
            ColumnKind::Numeric => Task::Regression,
        };
        Ok(Self {
            columns,
            n_rows,
            target,
            features,
            task,
            filled_mask: None,
        })
    }

    /// Numeric features given row-major with integer class labels `0..K`.
    pub fn classification(rows: &[Vec<T>], labels: &[u32]) -> Result<Self> {
        let n_classes = labels.iter().copied().max().map_or(0, |m| m as usize + 1);
        let levels = (0..n_classes).map(|k| k.to_string()).collect();
        let mut columns = numeric_feature_columns(rows, labels.len())?;
        columns.push(Column::categorical("class", ColumnRole::Target, labels.to_vec(), levels));
        Self::new(columns)
    }

    /// Numeric features given row-major with a real response.
    pub fn regression(rows: &[Vec<T>], y: &[T]) -> Result<Self> {
        let mut columns = numeric_feature_columns(rows, y.len())?;
        columns.push(Column::numeric("y", ColumnRole::Target, y.to_vec()));
        Self::new(columns)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn columns(&self) -> &[Column<T>] {
        &self.columns
    }

    pub fn schema(&self) -> Vec<ColumnSchema> {
        self.columns.iter().map(|c| c.schema.clone()).collect()
    }

    pub fn target_column(&self) -> &Column<T> {
        &self.columns[self.target]
    }

    pub fn feature_column(&self, f: usize) -> &Column<T> {
        &self.columns[self.features[f]]
    }

    pub fn feature_name(&self, f: usize) -> &str {
        &self.feature_column(f).schema.name
    }

    pub fn feature_kind(&self, f: usize) -> FeatureKind {
        match self.feature_column(f).n_levels() {
            Some(levels) => FeatureKind::Categorical { levels },
            None => FeatureKind::Numeric,
        }
    }

    pub fn feature_kinds(&self) -> Vec<FeatureKind> {
        (0..self.n_features()).map(|f| self.feature_kind(f)).collect()
    }

    pub fn value(&self, row: usize, f: usize) -> T {
        self.feature_column(f).get(row)
    }

    pub fn is_missing(&self, row: usize, f: usize) -> bool {
        self.feature_column(f).missing[row]
    }

    pub fn n_missing(&self) -> usize {
        self.features
            .iter()
            .map(|&c| self.columns[c].missing.iter().filter(|&&m| m).count())
            .sum()
    }

    pub fn has_missing_features(&self) -> bool {
        self.n_missing() > 0
    }

    /// Feature values of one row; categorical codes as exact integers.
    pub fn feature_row(&self, row: usize) -> Vec<T> {
        (0..self.n_features()).map(|f| self.value(row, f)).collect()
    }

    pub fn feature_rows(&self) -> Vec<Vec<T>> {
        (0..self.n_rows).map(|r| self.feature_row(r)).collect()
    }

    pub fn response(&self) -> Response<'_, T> {
        match &self.columns[self.target].values {
            ColumnValues::Categorical { codes, levels } => Response::Classes {
                codes,
                n_classes: levels.len(),
            },
            ColumnValues::Numeric(v) => Response::Values(v),
        }
    }

    pub fn class_codes(&self) -> Option<&[u32]> {
        match self.response() {
            Response::Classes { codes, .. } => Some(codes),
            Response::Values(_) => None,
        }
    }

    pub fn n_classes(&self) -> usize {
        match self.response() {
            Response::Classes { n_classes, .. } => n_classes,
            Response::Values(_) => 0,
        }
    }

    pub fn class_levels(&self) -> Option<&[String]> {
        match &self.columns[self.target].values {
            ColumnValues::Categorical { levels, .. } => Some(levels),
            ColumnValues::Numeric(_) => None,
        }
    }

    pub fn targets(&self) -> Option<&[T]> {
        match self.response() {
            Response::Values(v) => Some(v),
            Response::Classes { .. } => None,
        }
    }

    /// Mask that was in place before [`initialize_impute`] filled it.
    pub fn filled_mask(&self) -> Option<&[Vec<bool>]> {
        self.filled_mask.as_deref()
    }

    /// Row subset; category tables are kept so codes stay comparable.
    pub fn take_rows(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n_rows) {
            return Err(Error::shape(format!("row {bad} out of range 0..{}", self.n_rows)));
        }
        let columns = self
            .columns
            .iter()
            .map(|c| Column {
                schema: c.schema.clone(),
                values: c.values.take(rows),
                missing: rows.iter().map(|&r| c.missing[r]).collect(),
            })
            .collect();
        let mut out = Self::new(columns)?;
        out.filled_mask = self
            .filled_mask
            .as_ref()
            .map(|m| m.iter().map(|col| rows.iter().map(|&r| col[r]).collect()).collect());
        Ok(out)
    }

    /// Copy with one feature cell replaced (and marked observed).
    pub fn with_value(&self, row: usize, f: usize, value: T) -> Self {
        let mut out = self.clone();
        out.set_value(row, f, value);
        out
    }

    pub(crate) fn set_value(&mut self, row: usize, f: usize, value: T) {
        let c = self.features[f];
        self.columns[c].set(row, value);
    }

    pub(crate) fn mark_missing(&mut self, row: usize, f: usize) {
        let c = self.features[f];
        self.columns[c].mark_missing(row);
    }

    pub(crate) fn set_filled_mask(&mut self, mask: Option<Vec<Vec<bool>>>) {
        self.filled_mask = mask;
    }

    pub(crate) fn missing_mask(&self) -> Vec<Vec<bool>> {
        self.features.iter().map(|&c| self.columns[c].missing.clone()).collect()
    }
}

fn numeric_feature_columns<T: Real>(rows: &[Vec<T>], n: usize) -> Result<Vec<Column<T>>> {
    if rows.len() != n {
        return Err(Error::shape(format!("{} feature rows for {} labels", rows.len(), n)));
    }
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::shape("ragged feature rows"));
    }
    Ok((0..d)
        .map(|f| Column::numeric(format!("x{}", f + 1), ColumnRole::Feature, rows.iter().map(|r| r[f]).collect()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        Dataset::classification(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]], &[0, 1, 0]).unwrap()
    }

    #[test]
    fn classification_constructor_infers_task() {
        let ds = toy();
        assert_eq!(ds.n_rows(), 3);
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.task(), Task::Classification);
        assert_eq!(ds.n_classes(), 2);
        assert_eq!(ds.feature_row(1), vec![3.0, 4.0]);
    }

    #[test]
    fn rejects_missing_target_and_ragged_columns() {
        let cols = vec![
            Column::numeric("a", ColumnRole::Feature, vec![1.0, 2.0]),
            Column::numeric("y", ColumnRole::Target, vec![1.0, f64::NAN]),
        ];
        assert!(matches!(Dataset::new(cols), Err(Error::Data(_))));
        let cols = vec![
            Column::numeric("a", ColumnRole::Feature, vec![1.0]),
            Column::numeric("y", ColumnRole::Target, vec![1.0, 2.0]),
        ];
        assert!(Dataset::new(cols).is_err());
    }

    #[test]
    fn needs_exactly_one_target_and_a_feature() {
        let cols: Vec<Column<f64>> = vec![Column::numeric("a", ColumnRole::Feature, vec![1.0])];
        assert!(Dataset::new(cols).is_err());
        let cols: Vec<Column<f64>> = vec![Column::numeric("y", ColumnRole::Target, vec![1.0])];
        assert!(Dataset::new(cols).is_err());
    }

    #[test]
    fn take_rows_keeps_levels() {
        let ds = toy();
        let sub = ds.take_rows(&[1]).unwrap();
        assert_eq!(sub.n_rows(), 1);
        assert_eq!(sub.n_classes(), 2);
        assert_eq!(sub.class_codes().unwrap(), &[1]);
        assert!(ds.take_rows(&[7]).is_err());
    }
}
