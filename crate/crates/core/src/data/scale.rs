use serde::{Deserialize, Serialize};

use super::{ColumnValues, Dataset};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Per-feature affine map onto `[0, 1]`; `None` for categorical features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitScaling<T = f64> {
    /// `(min, max - min)` for numeric features.
    pub params: Vec<Option<(T, T)>>,
}

impl<T: Real> UnitScaling<T> {
    /// Fits min/max over the observed cells of each numeric feature.
    pub fn fit(ds: &Dataset<T>) -> Result<Self> {
        let mut params = Vec::with_capacity(ds.n_features());
        for f in 0..ds.n_features() {
            let col = ds.feature_column(f);
            let ColumnValues::Numeric(v) = &col.values else {
                params.push(None);
                continue;
            };
            let mut lo = T::infinity();
            let mut hi = T::neg_infinity();
            for (x, &m) in v.iter().zip(&col.missing) {
                if m {
                    continue;
                }
                if !x.is_finite() {
                    return Err(Error::data(format!("non-finite value in '{}'", col.schema.name)));
                }
                lo = lo.min(*x);
                hi = hi.max(*x);
            }
            params.push(if lo.is_finite() { Some((lo, hi - lo)) } else { Some((T::zero(), T::zero())) });
        }
        Ok(Self { params })
    }

    /// Scaled value of `x` in feature `f`; constant features map to 0.
    pub fn forward(&self, f: usize, x: T) -> T {
        match self.params[f] {
            Some((lo, range)) if range > T::zero() => (x - lo) / range,
            Some(_) => T::zero(),
            None => x,
        }
    }

    pub fn inverse(&self, f: usize, x: T) -> T {
        match self.params[f] {
            Some((lo, range)) => x * range + lo,
            None => x,
        }
    }

    pub fn apply(&self, ds: &Dataset<T>) -> Dataset<T> {
        self.map(ds, |f, x| self.forward(f, x))
    }

    pub fn invert(&self, ds: &Dataset<T>) -> Dataset<T> {
        self.map(ds, |f, x| self.inverse(f, x))
    }

    fn map(&self, ds: &Dataset<T>, g: impl Fn(usize, T) -> T) -> Dataset<T> {
        let mut out = ds.clone();
        for f in 0..ds.n_features() {
            if self.params[f].is_none() {
                continue;
            }
            for row in 0..ds.n_rows() {
                if !ds.is_missing(row, f) {
                    out.set_value(row, f, g(f, ds.value(row, f)));
                }
            }
        }
        out
    }
}

/// Scales every numeric feature to `[0, 1]`, keeping the parameters for the
/// inverse map. Categorical features and the target are untouched.
pub fn scale_unit<T: Real>(ds: &Dataset<T>) -> Result<(Dataset<T>, UnitScaling<T>)> {
    let scaling = UnitScaling::fit(ds)?;
    Ok((scaling.apply(ds), scaling))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn affine_and_constant_columns() {
        let rows = vec![vec![2.0, 5.0], vec![4.0, 5.0], vec![6.0, 5.0]];
        let ds = Dataset::classification(&rows, &[0, 1, 0]).unwrap();
        let (s, _) = scale_unit(&ds).unwrap();
        let col0: Vec<f64> = (0..3).map(|r| s.value(r, 0)).collect();
        let col1: Vec<f64> = (0..3).map(|r| s.value(r, 1)).collect();
        assert_eq!(col0, vec![0.0, 0.5, 1.0]);
        assert_eq!(col1, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn rejects_infinite_values() {
        let rows = vec![vec![1.0], vec![f64::INFINITY]];
        let ds = Dataset::classification(&rows, &[0, 1]).unwrap();
        assert!(scale_unit(&ds).is_err());
    }

    proptest! {
        #[test]
        fn inverse_round_trips(values in prop::collection::vec(-1e6f64..1e6, 2..40)) {
            let rows: Vec<Vec<f64>> = values.iter().map(|&v| vec![v, 3.0]).collect();
            let labels: Vec<u32> = (0..rows.len() as u32).map(|i| i % 2).collect();
            let ds = Dataset::classification(&rows, &labels).unwrap();
            let (scaled, scaling) = scale_unit(&ds).unwrap();
            let back = scaling.invert(&scaled);
            for r in 0..ds.n_rows() {
                for f in 0..2 {
                    let (a, b) = (ds.value(r, f), back.value(r, f));
                    prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
                    let s = scaled.value(r, f);
                    prop_assert!((0.0..=1.0).contains(&s));
                }
            }
        }
    }
}
