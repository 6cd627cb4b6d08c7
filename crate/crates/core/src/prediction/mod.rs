//! Proximity-weighted prediction and comparison with the forest's own
//! predictions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Response};
use crate::error::{Error, Result};
use crate::forest::{Forest, Prediction, PredictionSet};
use crate::proximity::{proximities, query_proximities, DiagonalPolicy, Layout, ProximityKind, ProximityMatrix};
use crate::scalar::Real;

/// Regression predictions further apart than this count as a mismatch.
pub const REGRESSION_MISMATCH: f64 = 1e-8;

/// Tolerance on GAP row sums before they are used as weights.
fn row_sum_tolerance<T: Real>() -> T {
    T::of(1e-10).max(T::epsilon() * T::of(1e3))
}

/// Weights used for row `i`. GAP rows without a self weight are used as
/// they are; any other row is stripped of its diagonal and rescaled to sum
/// to one. Returns `None` when the row carries no mass.
pub fn row_weights<T: Real>(p: &ProximityMatrix<T>, i: usize) -> Result<Option<Vec<(usize, T)>>> {
    let direct = p.kind() == ProximityKind::Gap && (!p.is_train() || p.diagonal() == DiagonalPolicy::Zeroed);
    let mut w = p.row_entries(i);
    if direct {
        if w.is_empty() {
            return Ok(None);
        }
        let s: T = w.iter().map(|e| e.1).sum();
        if (s - T::one()).abs() > row_sum_tolerance::<T>() {
            return Err(Error::Invariant(format!("GAP row {i} sums to {s}, not 1")));
        }
        return Ok(Some(w));
    }
    if p.is_train() {
        w.retain(|&(j, _)| j != i);
    }
    let s: T = w.iter().map(|e| e.1).sum();
    if s <= T::zero() {
        return Ok(None);
    }
    for e in &mut w {
        e.1 /= s;
    }
    Ok(Some(w))
}

/// `sum_j p(i,j) y_j` per row, `None` for rows without proximity mass.
pub fn prox_weighted_regression<T: Real>(p: &ProximityMatrix<T>, y: &[T]) -> Result<Vec<Option<T>>> {
    if y.len() != p.n_cols() {
        return Err(Error::shape(format!("{} responses for {} columns", y.len(), p.n_cols())));
    }
    (0..p.n_rows())
        .into_par_iter()
        .map(|i| Ok(row_weights(p, i)?.map(|w| w.iter().map(|&(j, v)| v * y[j]).sum())))
        .collect()
}

/// Index of the largest vote; votes within `tol` of the maximum count as
/// tied and resolve to the smallest index.
pub(crate) fn tolerant_argmax<T: Real>(votes: &[T], tol: T) -> (usize, bool) {
    let max = votes.iter().copied().fold(T::neg_infinity(), T::max);
    let mut winner = None;
    let mut n_top = 0;
    for (k, &v) in votes.iter().enumerate() {
        if v >= max - tol {
            winner.get_or_insert(k);
            n_top += 1;
        }
    }
    (winner.unwrap_or(0), n_top > 1)
}

/// Weighted class vote per row; ties resolve to the smallest class code and
/// are flagged.
pub fn prox_weighted_classification<T: Real>(
    p: &ProximityMatrix<T>,
    y: &[u32],
    n_classes: usize,
) -> Result<PredictionSet<T>> {
    if y.len() != p.n_cols() {
        return Err(Error::shape(format!("{} labels for {} columns", y.len(), p.n_cols())));
    }
    if let Some(&bad) = y.iter().find(|&&k| k as usize >= n_classes) {
        return Err(Error::data(format!("class code {bad} outside 0..{n_classes}")));
    }
    let rows: Vec<(Option<Prediction<T>>, bool)> = (0..p.n_rows())
        .into_par_iter()
        .map(|i| {
            let Some(w) = row_weights(p, i)? else {
                return Ok((None, false));
            };
            let mut votes = vec![T::zero(); n_classes];
            let mut total = T::zero();
            for (j, v) in w {
                votes[y[j] as usize] += v;
                total += v;
            }
            let (k, tied) = tolerant_argmax(&votes, T::tie_tolerance() * total);
            Ok((Some(Prediction::Class(k as u32)), tied))
        })
        .collect::<Result<_>>()?;
    let (values, tied) = rows.into_iter().unzip();
    Ok(PredictionSet { values, tied })
}

/// Weighted predictions for whichever response `truth` carries.
pub fn prox_weighted<T: Real>(p: &ProximityMatrix<T>, truth: Response<'_, T>) -> Result<PredictionSet<T>> {
    match truth {
        Response::Classes { codes, n_classes } => prox_weighted_classification(p, codes, n_classes),
        Response::Values(y) => {
            let values: Vec<_> = prox_weighted_regression(p, y)?
                .into_iter()
                .map(|v| v.map(Prediction::Value))
                .collect();
            let tied = vec![false; values.len()];
            Ok(PredictionSet { values, tied })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitPart {
    Train,
    Test,
}

impl SplitPart {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitPart::Train => "train",
            SplitPart::Test => "test",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowDetail<T> {
    pub row: usize,
    pub predicted: Option<Prediction<T>>,
    pub forest: Option<Prediction<T>>,
    pub tied: bool,
    pub forest_tied: bool,
    pub mismatch: bool,
}

/// Agreement between proximity-weighted and forest predictions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport<T = f64> {
    pub kind: ProximityKind,
    pub split: SplitPart,
    pub predictions: Vec<Option<Prediction<T>>>,
    /// Share of rows with a forest prediction where the two disagree.
    pub mismatch_vs_forest: f64,
    /// Same share restricted to rows where neither vote was tied.
    pub mismatch_untied: f64,
    /// Rows where either vote was tied.
    pub tie_count: usize,
    /// Rows with a forest prediction; the mismatch denominator.
    pub n_compared: usize,
    /// Largest absolute difference on regression rows.
    pub max_abs_diff: Option<f64>,
    /// Error of the weighted predictions against the observed response.
    pub proximity_error: Option<f64>,
    pub forest_error: Option<f64>,
    pub rows: Vec<RowDetail<T>>,
}

impl<T: Real> PredictionReport<T> {
    pub const CSV_HEADER: [&'static str; 6] = ["dataset", "kind", "seed", "split", "mismatch", "ties"];

    pub fn compare(
        kind: ProximityKind,
        split: SplitPart,
        weighted: &PredictionSet<T>,
        forest: &PredictionSet<T>,
        truth: Response<'_, T>,
    ) -> Result<Self> {
        if weighted.len() != forest.len() {
            return Err(Error::shape("prediction sets differ in length"));
        }
        let mut rows = Vec::with_capacity(weighted.len());
        let (mut n_compared, mut n_mismatch) = (0usize, 0usize);
        let (mut n_untied, mut n_untied_mismatch) = (0usize, 0usize);
        let mut tie_count = 0;
        let mut max_abs_diff: Option<f64> = None;
        for i in 0..weighted.len() {
            let (p, q) = (weighted.values[i], forest.values[i]);
            let tied = weighted.tied[i] || forest.tied[i];
            let mismatch = match (p, q) {
                (_, None) => false,
                (None, Some(_)) => true,
                (Some(Prediction::Value(a)), Some(Prediction::Value(b))) => {
                    let d = (a - b).abs().as_f64();
                    max_abs_diff = Some(max_abs_diff.map_or(d, |m| m.max(d)));
                    d > REGRESSION_MISMATCH
                }
                (Some(a), Some(b)) => a != b,
            };
            if q.is_some() {
                n_compared += 1;
                n_mismatch += usize::from(mismatch);
                if tied {
                    tie_count += 1;
                } else {
                    n_untied += 1;
                    n_untied_mismatch += usize::from(mismatch);
                }
            }
            rows.push(RowDetail {
                row: i,
                predicted: p,
                forest: q,
                tied: weighted.tied[i],
                forest_tied: forest.tied[i],
                mismatch,
            });
        }
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        Ok(Self {
            kind,
            split,
            predictions: weighted.values.clone(),
            mismatch_vs_forest: ratio(n_mismatch, n_compared),
            mismatch_untied: ratio(n_untied_mismatch, n_untied),
            tie_count,
            n_compared,
            max_abs_diff,
            proximity_error: weighted.error(truth),
            forest_error: forest.error(truth),
            rows,
        })
    }

    pub fn n_mismatch(&self) -> usize {
        self.rows.iter().filter(|r| r.mismatch && r.forest.is_some()).count()
    }

    pub fn csv_record(&self, dataset: &str, seed: u64) -> Vec<String> {
        vec![
            dataset.to_string(),
            self.kind.to_string(),
            seed.to_string(),
            self.split.as_str().to_string(),
            self.mismatch_vs_forest.to_string(),
            self.tie_count.to_string(),
        ]
    }
}

/// Builds `kind` proximities, forms weighted predictions and compares them
/// with the forest: out-of-bag predictions on `train`, or ordinary
/// predictions on `test` when given.
pub fn equivalence_report<T: Real>(
    f: &Forest<T>,
    train: &Dataset<T>,
    kind: ProximityKind,
    test: Option<&Dataset<T>>,
) -> Result<PredictionReport<T>> {
    let diagonal = match kind {
        ProximityKind::Gap => DiagonalPolicy::Zeroed,
        _ => DiagonalPolicy::Identity,
    };
    let train_truth = train.response();
    match test {
        None => {
            let p = proximities(f, train, kind, diagonal, Layout::Auto)?;
            let weighted = prox_weighted(&p, train_truth)?;
            let forest = f.oob_predict(train)?;
            PredictionReport::compare(kind, SplitPart::Train, &weighted, &forest, train_truth)
        }
        Some(test) => {
            f.check_features(test)?;
            let rows = test.feature_rows();
            let p = query_proximities(f, train, &rows, kind, Layout::Auto)?;
            let weighted = prox_weighted(&p, train_truth)?;
            let forest = f.predict(&rows)?;
            PredictionReport::compare(kind, SplitPart::Test, &weighted, &forest, test.response())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{split, synthetic};
    use crate::forest::{fit_forest, ForestParams};

    fn matrix(rows: &[Vec<f64>], kind: ProximityKind, diagonal: DiagonalPolicy) -> ProximityMatrix {
        ProximityMatrix::from_rows(kind, diagonal, rows, Layout::Dense).unwrap()
    }

    #[test]
    fn one_hot_row_returns_that_response() {
        let p = matrix(
            &[vec![0.0, 1.0, 0.0], vec![0.5, 0.0, 0.5], vec![0.0, 0.0, 0.0]],
            ProximityKind::Gap,
            DiagonalPolicy::Zeroed,
        );
        let out = prox_weighted_regression(&p, &[1.0, 7.0, 3.0]).unwrap();
        assert_eq!(out, vec![Some(7.0), Some(2.0), None]);
    }

    #[test]
    fn non_gap_rows_drop_self_and_normalize() {
        let p = matrix(
            &[vec![1.0, 0.2, 0.6], vec![0.2, 1.0, 0.2], vec![0.6, 0.2, 1.0]],
            ProximityKind::Original,
            DiagonalPolicy::Identity,
        );
        let out = prox_weighted_regression(&p, &[100.0, 1.0, 3.0]).unwrap();
        assert!((out[0].unwrap() - 2.5).abs() < 1e-12);
        assert!((out[1].unwrap() - 51.5).abs() < 1e-12);
    }

    #[test]
    fn gap_row_not_summing_to_one_is_an_invariant_error() {
        let p = matrix(&[vec![0.0, 0.5], vec![0.9, 0.0]], ProximityKind::Gap, DiagonalPolicy::Zeroed);
        assert!(matches!(prox_weighted_regression(&p, &[1.0, 2.0]), Err(Error::Invariant(_))));
    }

    #[test]
    fn class_vote_follows_mass_and_breaks_ties_low() {
        let p = matrix(
            &[
                vec![0.0, 0.2, 0.8, 0.0],
                vec![0.5, 0.0, 0.0, 0.5],
                vec![0.0, 0.0, 0.0, 0.0],
                vec![0.1, 0.1, 0.8, 0.0],
            ],
            ProximityKind::Gap,
            DiagonalPolicy::Zeroed,
        );
        let out = prox_weighted_classification(&p, &[2, 0, 2, 1], 3).unwrap();
        assert_eq!(out.values[0], Some(Prediction::Class(2)));
        assert_eq!((out.values[1], out.tied[1]), (Some(Prediction::Class(1)), true));
        assert_eq!(out.values[2], None);
        assert_eq!((out.values[3], out.tied[3]), (Some(Prediction::Class(2)), false));
    }

    #[test]
    fn gap_reproduces_oob_regression() {
        let ds = synthetic::friedman1::<f64>(150, 3).unwrap();
        for size in [1, 5, 20] {
            let mut params = ForestParams::with_trees(60, 3);
            params.min_node_size = Some(size);
            let f = fit_forest(&ds, &params).unwrap();
            let r = equivalence_report(&f, &ds, ProximityKind::Gap, None).unwrap();
            assert!(r.max_abs_diff.unwrap() < 1e-10, "size {size}: {:?}", r.max_abs_diff);
            assert_eq!(r.mismatch_vs_forest, 0.0);
        }
    }

    #[test]
    fn gap_reproduces_oob_and_test_votes() {
        let ds = synthetic::blobs::<f64>(200, 5, 3, 2.0, 8).unwrap();
        let (train, test) = split::train_test_split(&ds, 0.7, 8).unwrap();
        let f = fit_forest(&train, &ForestParams::with_trees(101, 8)).unwrap();
        let r = equivalence_report(&f, &train, ProximityKind::Gap, None).unwrap();
        assert_eq!(r.n_mismatch(), 0);
        let r = equivalence_report(&f, &train, ProximityKind::Gap, Some(&test)).unwrap();
        assert_eq!(r.n_mismatch(), 0);
        assert_eq!(r.n_compared, test.n_rows());
        assert_eq!(r.csv_record("blobs", 8)[3], "test");
    }

    #[test]
    fn f32_gap_reproduces_oob_votes() {
        let ds = synthetic::blobs::<f32>(120, 4, 2, 2.0, 1).unwrap();
        let f = fit_forest(&ds, &ForestParams::with_trees(64, 1)).unwrap();
        let r = equivalence_report(&f, &ds, ProximityKind::Gap, None).unwrap();
        assert_eq!(r.n_mismatch(), 0);
    }

    #[test]
    fn tolerant_argmax_groups_near_equal_votes() {
        assert_eq!(tolerant_argmax(&[0.5, 0.5 + 1e-15], 1e-8), (0, true));
        assert_eq!(tolerant_argmax(&[0.4, 0.6], 1e-8), (1, false));
    }
}
