use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::median;
use crate::error::{Error, Result};
use crate::proximity::ProximityMatrix;
use crate::scalar::Real;

/// Within-class outlier measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutlierResult<T = f64> {
    /// `n / sum_j p(i,j)^2` over same-class `j != i`; `T::max_value()` when
    /// that sum is zero.
    pub raw: Vec<T>,
    /// `(raw - class median) / class mean absolute deviation`.
    pub normalized: Vec<T>,
    /// Rows whose within-class proximity mass was zero.
    pub flagged: Vec<bool>,
    pub class_median: Vec<T>,
    pub class_mad: Vec<T>,
    pub classes: Vec<u32>,
}

impl<T: Real> OutlierResult<T> {
    /// Rows of `row_id,class,raw,normalized,flag`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["row_id", "class", "raw", "normalized", "flag"])?;
        for i in 0..self.raw.len() {
            w.write_record([
                i.to_string(),
                self.classes[i].to_string(),
                self.raw[i].to_string(),
                self.normalized[i].to_string(),
                u8::from(self.flagged[i]).to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<outliers>", e))
    }

    /// Row indices by decreasing normalized score (stable on ties).
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.normalized.len()).collect();
        idx.sort_by(|&a, &b| self.normalized[b].partial_cmp(&self.normalized[a]).expect("finite scores"));
        idx
    }
}

/// Scores each row by how weakly it is tied to its own class. `p` should be
/// a symmetric training matrix; self-proximities are ignored. Every class
/// needs at least two rows.
pub fn outlier_scores<T: Real>(p: &ProximityMatrix<T>, y: &[u32]) -> Result<OutlierResult<T>> {
    let n = p.n_rows();
    if !p.is_square() || y.len() != n {
        return Err(Error::shape(format!(
            "{} labels for a {}x{} proximity matrix",
            y.len(),
            p.n_rows(),
            p.n_cols()
        )));
    }
    let k = y.iter().map(|&c| c as usize + 1).max().unwrap_or(0);
    let mut sizes = vec![0usize; k];
    for &c in y {
        sizes[c as usize] += 1;
    }
    if let Some(c) = sizes.iter().position(|&s| s == 1) {
        return Err(Error::data(format!("class {c} has a single member")));
    }

    let scale = T::of_usize(n);
    let mut raw = vec![T::zero(); n];
    let mut flagged = vec![false; n];
    for i in 0..n {
        let mut s = T::zero();
        p.for_each_in_row(i, |j, v| {
            if j != i && y[j] == y[i] {
                s += v * v;
            }
        });
        if s > T::zero() {
            raw[i] = scale / s;
        } else {
            raw[i] = T::max_value();
            flagged[i] = true;
        }
    }

    let mut class_median = vec![T::zero(); k];
    let mut class_mad = vec![T::zero(); k];
    for c in 0..k {
        let vals: Vec<T> = (0..n).filter(|&i| y[i] as usize == c && !flagged[i]).map(|i| raw[i]).collect();
        let Some(m) = median(&vals) else { continue };
        class_median[c] = m;
        class_mad[c] = vals.iter().map(|&v| (v - m).abs()).sum::<T>() / T::of_usize(vals.len());
    }
    let normalized = (0..n)
        .map(|i| {
            let c = y[i] as usize;
            if flagged[i] {
                T::max_value()
            } else if class_mad[c] > T::zero() {
                (raw[i] - class_median[c]) / class_mad[c]
            } else {
                T::zero()
            }
        })
        .collect();
    Ok(OutlierResult {
        raw,
        normalized,
        flagged,
        class_median,
        class_mad,
        classes: y.to_vec(),
    })
}
