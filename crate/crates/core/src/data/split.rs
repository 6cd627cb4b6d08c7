//! Seeded train/test partitions.

use rand::seq::SliceRandom;

use super::{Dataset, Response};
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Real;

/// Row indices for a train/test partition, both sorted ascending.
///
/// Classification splits are stratified: each class contributes
/// `round(fraction * n_k)` rows to training, keeping at least one row on each
/// side when the class has two or more members. Regression splits are plain
/// random.
pub fn train_test_indices<T: Real>(
    ds: &Dataset<T>,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::param(format!("split fraction {train_fraction} not in (0, 1)")));
    }
    let mut rng = rng::stream(seed, rng::SPLIT_STREAM);
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
    let stratified = groups.len() > 1 || ds.class_codes().is_some();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut rows in groups {
        rows.shuffle(&mut rng);
        let n = rows.len();
        let mut k = (train_fraction * n as f64).round() as usize;
        if stratified && n >= 2 {
            k = k.clamp(1, n - 1);
        }
        train.extend_from_slice(&rows[..k]);
        test.extend_from_slice(&rows[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    if train.is_empty() || test.is_empty() {
        return Err(Error::data("split leaves an empty partition"));
    }
    Ok((train, test))
}

pub fn train_test_split<T: Real>(
    ds: &Dataset<T>,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset<T>, Dataset<T>)> {
    let (train, test) = train_test_indices(ds, train_fraction, seed)?;
    Ok((ds.take_rows(&train)?, ds.take_rows(&test)?))
}
