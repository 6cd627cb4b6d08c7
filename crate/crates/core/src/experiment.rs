//! Batch runs over datasets, seeds and proximity kinds: 70/30 splits,
//! agreement with the forest on both parts, and node-size / tree-count
//! sweeps.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::{split, synthetic, Dataset};
use crate::error::{Error, Result};
use crate::forest::{fit_forest, ForestParams};
use crate::prediction::{equivalence_report, PredictionReport};
use crate::proximity::{proximities, DiagonalPolicy, Layout, ProximityKind};
use crate::scalar::Real;

pub const NODE_SIZE_SWEEP: [usize; 5] = [1, 5, 10, 20, 50];
pub const TREE_COUNT_SWEEP: [usize; 6] = [5, 10, 50, 100, 250, 500];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kinds: Vec<ProximityKind>,
    pub seeds: Vec<u64>,
    /// Training share of each split.
    pub split: f64,
    /// Forest settings; the seed is replaced by each run's seed.
    pub params: ForestParams,
    pub node_size_sweep: bool,
    pub tree_count_sweep: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kinds: ProximityKind::ALL.to_vec(),
            seeds: vec![0],
            split: 0.7,
            params: ForestParams::default(),
            node_size_sweep: false,
            tree_count_sweep: false,
        }
    }
}

/// One line of the results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub sweep: String,
    pub kind: ProximityKind,
    pub seed: u64,
    pub split: String,
    pub n_trees: usize,
    pub min_node_size: usize,
    pub mismatch: f64,
    pub mismatch_untied: f64,
    pub ties: usize,
    pub n_compared: usize,
    pub max_abs_diff: Option<f64>,
    pub proximity_error: Option<f64>,
    pub forest_error: Option<f64>,
}

impl ResultRow {
    fn from_report<T: Real>(dataset: &str, sweep: &str, seed: u64, params: &ForestParams, r: &PredictionReport<T>) -> Self {
        Self {
            dataset: dataset.to_string(),
            sweep: sweep.to_string(),
            kind: r.kind,
            seed,
            split: r.split.as_str().to_string(),
            n_trees: params.n_trees,
            min_node_size: params.min_node_size.unwrap_or(0),
            mismatch: r.mismatch_vs_forest,
            mismatch_untied: r.mismatch_untied,
            ties: r.tie_count,
            n_compared: r.n_compared,
            max_abs_diff: r.max_abs_diff,
            proximity_error: r.proximity_error,
            forest_error: r.forest_error,
        }
    }
}

/// Runs one 70/30 split per seed and reports every kind on both parts,
/// followed by the requested sweeps (GAP on the same splits).
pub fn run_dataset<T: Real>(name: &str, ds: &Dataset<T>, config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for &seed in &config.seeds {
        let (train, test) = split::train_test_split(ds, config.split, seed)?;
        let mut settings: Vec<(&str, ForestParams, Vec<ProximityKind>)> = Vec::new();
        let base = ForestParams {
            seed,
            ..config.params.clone()
        };
        settings.push(("main", base.clone(), config.kinds.clone()));
        if config.node_size_sweep {
            for s in NODE_SIZE_SWEEP {
                let p = ForestParams {
                    min_node_size: Some(s),
                    ..base.clone()
                };
                settings.push(("node_size", p, vec![ProximityKind::Gap]));
            }
        }
        if config.tree_count_sweep {
            for t in TREE_COUNT_SWEEP {
                let p = ForestParams {
                    n_trees: t,
                    ..base.clone()
                };
                settings.push(("n_trees", p, vec![ProximityKind::Gap]));
            }
        }
        for (sweep, params, kinds) in settings {
            let f = fit_forest(&train, &params)?;
            let resolved = f.params().clone();
            for kind in kinds {
                for part in [None, Some(&test)] {
                    let r = equivalence_report(&f, &train, kind, part)?;
                    rows.push(ResultRow::from_report(name, sweep, seed, &resolved, &r));
                }
            }
        }
    }
    Ok(rows)
}

pub fn write_results_csv<W: Write>(rows: &[ResultRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<results>", e))
}

/// Least-squares slope of `y = b x` (no intercept).
pub fn slope_through_origin(points: &[(f64, f64)]) -> Option<f64> {
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `(train error, test error)` pairs of the main runs for `kind`, one per
/// dataset and seed.
pub fn train_test_pairs(rows: &[ResultRow], kind: ProximityKind) -> Vec<(f64, f64)> {
    let main: Vec<&ResultRow> = rows.iter().filter(|r| r.sweep == "main" && r.kind == kind).collect();
    main.iter()
        .filter(|r| r.split == "train")
        .filter_map(|tr| {
            let te = main
                .iter()
                .find(|r| r.split == "test" && r.dataset == tr.dataset && r.seed == tr.seed)?;
            Some((tr.proximity_error?, te.proximity_error?))
        })
        .collect()
}

/// Median over seeds of the GAP asymmetry on the graded-normal synthetic
/// set, for each tree count.
pub fn asymmetry_by_trees(n_rows: usize, tree_counts: &[usize], seeds: &[u64]) -> Result<Vec<(usize, f64)>> {
    tree_counts
        .iter()
        .map(|&t| {
            let mut values = Vec::with_capacity(seeds.len());
            for &seed in seeds {
                let ds: Dataset<f64> = synthetic::graded_normal(n_rows, seed)?;
                let f = fit_forest(&ds, &ForestParams::with_trees(t, seed))?;
                let p = proximities(&f, &ds, ProximityKind::Gap, DiagonalPolicy::Zeroed, Layout::Auto)?;
                values.push(p.asymmetry_mse()?);
            }
            let m = crate::data::median(&values).ok_or_else(|| Error::param("no seeds"))?;
            Ok((t, m))
        })
        .collect()
}
