use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{Column, ColumnKind, ColumnRole, ColumnSchema, ColumnValues, Dataset};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Where the column schema comes from when loading a CSV.
#[derive(Clone, Debug, PartialEq)]
pub enum SchemaSource {
    /// Numeric iff every non-missing cell parses as a real; the target is the
    /// named column, or the last column when `None`.
    Infer { target: Option<String> },
    Explicit(Vec<ColumnSchema>),
}

impl Default for SchemaSource {
    fn default() -> Self {
        SchemaSource::Infer { target: None }
    }
}

fn is_missing_token(s: &str) -> bool {
    s.is_empty() || s == "NA"
}

pub fn load_csv<T: Real>(path: impl AsRef<Path>, schema: &SchemaSource) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

pub fn read_csv<T: Real, R: Read>(reader: R, schema: &SchemaSource) -> Result<Dataset<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let mut cells: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    for record in rdr.records() {
        let record = record?;
        for (col, field) in cells.iter_mut().zip(record.iter()) {
            col.push(field.trim().to_string());
        }
    }
    if cells.first().is_none_or(Vec::is_empty) {
        return Err(Error::data("csv has zero data rows"));
    }

    let schema = match schema {
        SchemaSource::Explicit(s) => {
            let names: Vec<&str> = s.iter().map(|c| c.name.as_str()).collect();
            if names != header.iter().map(String::as_str).collect::<Vec<_>>() {
                return Err(Error::data(format!(
                    "schema columns {names:?} do not match header {header:?}"
                )));
            }
            s.clone()
        }
        SchemaSource::Infer { target } => {
            let target_idx = match target {
                Some(name) => header
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| Error::data(format!("target column '{name}' not in header")))?,
                None => header.len() - 1,
            };
            header
                .iter()
                .zip(&cells)
                .enumerate()
                .map(|(i, (name, col))| {
                    let numeric = col
                        .iter()
                        .filter(|s| !is_missing_token(s))
                        .all(|s| s.parse::<f64>().is_ok())
                        && col.iter().any(|s| !is_missing_token(s));
                    let kind = if numeric { ColumnKind::Numeric } else { ColumnKind::Categorical };
                    let role = if i == target_idx { ColumnRole::Target } else { ColumnRole::Feature };
                    ColumnSchema::new(name.clone(), kind, role)
                })
                .collect()
        }
    };

    let columns = schema
        .into_iter()
        .zip(cells)
        .map(|(s, col)| build_column(s, col))
        .collect::<Result<Vec<Column<T>>>>()?;
    Dataset::new(columns)
}

fn build_column<T: Real>(schema: ColumnSchema, raw: Vec<String>) -> Result<Column<T>> {
    let missing: Vec<bool> = raw.iter().map(|s| is_missing_token(s)).collect();
    let values = match schema.kind {
        ColumnKind::Numeric => {
            let mut v = Vec::with_capacity(raw.len());
            for (row, s) in raw.iter().enumerate() {
                if is_missing_token(s) {
                    v.push(T::nan());
                    continue;
                }
                let x: f64 = s.parse().map_err(|_| {
                    Error::data(format!(
                        "column '{}' row {row}: '{s}' is not numeric",
                        schema.name
                    ))
                })?;
                v.push(T::of(x));
            }
            ColumnValues::Numeric(v)
        }
        ColumnKind::Categorical => {
            let mut levels: Vec<String> = Vec::new();
            let codes = raw
                .iter()
                .map(|s| {
                    if is_missing_token(s) {
                        return 0;
                    }
                    match levels.iter().position(|l| l == s) {
                        Some(k) => k as u32,
                        None => {
                            levels.push(s.clone());
                            (levels.len() - 1) as u32
                        }
                    }
                })
                .collect();
            ColumnValues::Categorical { codes, levels }
        }
    };
    Ok(Column {
        schema,
        values,
        missing,
    })
}

/// Parses a schema override: one `name,kind,role` line per column.
pub fn parse_schema(text: &str) -> Result<Vec<ColumnSchema>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|line| {
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            let [name, kind, role] = parts[..] else {
                return Err(Error::data(format!("schema line '{line}' is not name,kind,role")));
            };
            let kind = match kind {
                "numeric" => ColumnKind::Numeric,
                "categorical" => ColumnKind::Categorical,
                other => return Err(Error::data(format!("unknown column kind '{other}'"))),
            };
            let role = match role {
                "feature" => ColumnRole::Feature,
                "target" => ColumnRole::Target,
                "ignore" => ColumnRole::Ignore,
                other => return Err(Error::data(format!("unknown column role '{other}'"))),
            };
            Ok(ColumnSchema::new(name, kind, role))
        })
        .collect()
}

pub fn load_schema_file(path: impl AsRef<Path>) -> Result<Vec<ColumnSchema>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_schema(&text)
}

/// Writes all columns back out; missing cells become `NA`.
pub fn write_csv<T: Real, W: Write>(ds: &Dataset<T>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ds.columns().iter().map(|c| c.schema.name.as_str()))?;
    for row in 0..ds.n_rows() {
        let record: Vec<String> = ds
            .columns()
            .iter()
            .map(|c| {
                if c.missing[row] {
                    return "NA".to_string();
                }
                match &c.values {
                    ColumnValues::Numeric(v) => v[row].to_string(),
                    ColumnValues::Categorical { codes, levels } => levels[codes[row] as usize].clone(),
                }
            })
            .collect();
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Task;

    const TOY: &str = "f1,f2,label\n1.0,2.0,a\n3.5,,b\n2.0,NA,a\n";

    #[test]
    fn infers_kinds_and_missing_cells() {
        let ds: Dataset = read_csv(TOY.as_bytes(), &SchemaSource::default()).unwrap();
        assert_eq!(ds.n_rows(), 3);
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.task(), Task::Classification);
        assert!(ds.is_missing(1, 1));
        assert!(ds.is_missing(2, 1));
        assert!(!ds.is_missing(0, 1));
        assert_eq!(ds.class_codes().unwrap(), &[0, 1, 0]);
        assert_eq!(ds.class_levels().unwrap(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn numeric_target_means_regression() {
        let ds: Dataset = read_csv("a,y\n1,2\n3,4\n".as_bytes(), &SchemaSource::default()).unwrap();
        assert_eq!(ds.task(), Task::Regression);
        assert_eq!(ds.targets().unwrap(), &[2.0, 4.0]);
    }

    #[test]
    fn load_errors() {
        let infer = SchemaSource::default();
        // ragged
        assert!(read_csv::<f64, _>("a,b,y\n1,2,x\n1,x\n".as_bytes(), &infer).is_err());
        // missing target
        assert!(read_csv::<f64, _>("a,y\n1,x\n2,\n".as_bytes(), &infer).is_err());
        // zero rows
        assert!(read_csv::<f64, _>("a,y\n".as_bytes(), &infer).is_err());
        // non-numeric garbage in an explicitly numeric column
        let schema = parse_schema("a,numeric,feature\ny,categorical,target").unwrap();
        assert!(matches!(
            read_csv::<f64, _>("a,y\n1,x\nfoo,z\n".as_bytes(), &SchemaSource::Explicit(schema)),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn explicit_schema_with_ignore_column() {
        let schema = parse_schema("id,categorical,ignore\nx,numeric,feature\ny,categorical,target\n").unwrap();
        let ds: Dataset = read_csv("id,x,y\nr1,1,a\nr2,2,b\n".as_bytes(), &SchemaSource::Explicit(schema)).unwrap();
        assert_eq!(ds.n_features(), 1);
        assert_eq!(ds.feature_name(0), "x");
        let mismatch = parse_schema("x,numeric,feature\ny,categorical,target").unwrap();
        assert!(read_csv::<f64, _>("id,x,y\nr1,1,a\n".as_bytes(), &SchemaSource::Explicit(mismatch)).is_err());
    }

    #[test]
    fn write_then_read_back() {
        let ds: Dataset = read_csv(TOY.as_bytes(), &SchemaSource::default()).unwrap();
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        let again: Dataset = read_csv(buf.as_slice(), &SchemaSource::default()).unwrap();
        let mut buf2 = Vec::new();
        write_csv(&again, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
        assert_eq!(ds.missing_mask(), again.missing_mask());
    }
}
