use super::stats::{median, mode};
use super::{ColumnValues, Dataset, Response};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Fills every missing feature cell with the in-class median (numeric) or
/// mode (categorical) of the observed cells. Regression uses global values,
/// as does any class with no observed donor in that column.
///
/// The returned dataset has an empty missing mask; the mask it replaced is
/// available through [`Dataset::filled_mask`].
pub fn initialize_impute<T: Real>(ds: &Dataset<T>) -> Result<Dataset<T>> {
    if !ds.has_missing_features() {
        return Ok(ds.clone());
    }
    let mask = ds.missing_mask();
    let groups: Vec<Vec<usize>> = match ds.response() {
        Response::Classes { codes, n_classes } => {
            let mut g = vec![Vec::new(); n_classes];
            for (row, &k) in codes.iter().enumerate() {
                g[k as usize].push(row);
            }
            g
        }
        Response::Values(_) => vec![(0..ds.n_rows()).collect()],
    };
    let group_of: Vec<usize> = {
        let mut v = vec![0; ds.n_rows()];
        for (g, rows) in groups.iter().enumerate() {
            for &r in rows {
                v[r] = g;
            }
        }
        v
    };

    let mut out = ds.clone();
    for (f, col_mask) in mask.iter().enumerate() {
        if !col_mask.iter().any(|&m| m) {
            continue;
        }
        let col = ds.feature_column(f);
        let fill_for = |rows: &mut dyn Iterator<Item = usize>| -> Option<T> {
            match &col.values {
                ColumnValues::Numeric(v) => {
                    let obs: Vec<T> = rows.filter(|&r| !col_mask[r]).map(|r| v[r]).collect();
                    median(&obs)
                }
                ColumnValues::Categorical { codes, .. } => {
                    let obs: Vec<u32> = rows.filter(|&r| !col_mask[r]).map(|r| codes[r]).collect();
                    mode(&obs).map(|c| T::of(c as f64))
                }
            }
        };
        let global = fill_for(&mut (0..ds.n_rows())).ok_or_else(|| {
            Error::data(format!("column '{}' has no observed values", col.schema.name))
        })?;
        let per_group: Vec<T> = groups
            .iter()
            .map(|rows| fill_for(&mut rows.iter().copied()).unwrap_or(global))
            .collect();
        for (row, &m) in col_mask.iter().enumerate() {
            if m {
                out.set_value(row, f, per_group[group_of[row]]);
            }
        }
    }
    out.set_filled_mask(Some(mask));
    Ok(out)
}
