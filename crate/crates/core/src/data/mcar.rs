use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Real;

/// Cells removed by [`remove_mcar`], as `(row, feature index)` pairs with the
/// values they held (categorical codes as exact integers).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MissingnessRecord<T = f64> {
    pub cells: Vec<(usize, usize)>,
    pub original: Vec<T>,
}

impl<T: Real> MissingnessRecord<T> {
    pub fn empty() -> Self {
        Self {
            cells: Vec::new(),
            original: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Masks `round(fraction * n_rows * n_features)` feature cells chosen
/// uniformly without replacement. The target column is never touched.
pub fn remove_mcar<T: Real>(
    ds: &Dataset<T>,
    fraction: f64,
    seed: u64,
) -> Result<(Dataset<T>, MissingnessRecord<T>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::param(format!("MCAR fraction {fraction} not in (0, 1)")));
    }
    if ds.has_missing_features() {
        return Err(Error::data("dataset already contains missing feature cells"));
    }
    let d = ds.n_features();
    let total = ds.n_rows() * d;
    let count = (fraction * total as f64).round() as usize;
    let mut rng = rng::stream(seed, rng::MCAR_STREAM);
    let mut picked = sample(&mut rng, total, count).into_vec();
    picked.sort_unstable();

    let mut out = ds.clone();
    let mut record = MissingnessRecord::empty();
    for idx in picked {
        let (row, f) = (idx / d, idx % d);
        record.cells.push((row, f));
        record.original.push(ds.value(row, f));
        out.mark_missing(row, f);
    }
    debug_assert!(record
        .cells
        .iter()
        .all(|&(r, f)| out.is_missing(r, f) && (out.feature_column(f).kind() == ColumnKind::Categorical || out.value(r, f).is_nan())));
    Ok((out, record))
}
