//! Bootstrap sampling, CART induction, forest training and out-of-bag
//! prediction.

mod bootstrap;
mod io;
mod tree;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureKind, Response, Task};
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Real;

pub use bootstrap::{bootstrap_sample, BootstrapRecord};
pub use io::FORMAT_VERSION;
pub use tree::{fit_tree, Leaf, LeafStats, Node, SplitRule, Tree};

pub(crate) use tree::argmax_low;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features drawn per node; `None` picks the task default.
    pub mtry: Option<usize>,
    /// Nodes at or below this in-bag weight are not split; `None` picks the
    /// task default.
    pub min_node_size: Option<usize>,
    /// Must agree with the dataset when given.
    pub task: Option<Task>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 500,
            mtry: None,
            min_node_size: None,
            task: None,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn with_trees(n_trees: usize, seed: u64) -> Self {
        Self {
            n_trees,
            seed,
            ..Self::default()
        }
    }

    /// Fills defaults for `ds` and validates ranges.
    ///
    /// Defaults: `mtry = floor(sqrt(d))` for classification and
    /// `max(1, floor(d / 3))` for regression; minimum node size 1 and 5.
    pub fn resolve<T: Real>(&self, ds: &Dataset<T>) -> Result<Self> {
        let d = ds.n_features();
        let task = ds.task();
        if let Some(t) = self.task {
            if t != task {
                return Err(Error::param(format!("task {t:?} does not match dataset ({task:?})")));
            }
        }
        if self.n_trees == 0 {
            return Err(Error::param("n_trees must be at least 1"));
        }
        let mtry = self.mtry.unwrap_or(match task {
            Task::Classification => ((d as f64).sqrt().floor() as usize).max(1),
            Task::Regression => (d / 3).max(1),
        });
        if mtry == 0 || mtry > d {
            return Err(Error::param(format!("mtry {mtry} not in 1..={d}")));
        }
        let min_node_size = self.min_node_size.unwrap_or(match task {
            Task::Classification => 1,
            Task::Regression => 5,
        });
        if min_node_size == 0 {
            return Err(Error::param("min_node_size must be at least 1"));
        }
        Ok(Self {
            n_trees: self.n_trees,
            mtry: Some(mtry),
            min_node_size: Some(min_node_size),
            task: Some(task),
            seed: self.seed,
        })
    }
}

/// Description of the training table a forest was grown on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub n_rows: usize,
    pub features: Vec<(String, FeatureKind)>,
    pub target: String,
    pub task: Task,
    pub class_levels: Option<Vec<String>>,
}

impl Fingerprint {
    pub fn of<T: Real>(ds: &Dataset<T>) -> Self {
        Self {
            n_rows: ds.n_rows(),
            features: (0..ds.n_features())
                .map(|f| (ds.feature_name(f).to_string(), ds.feature_kind(f)))
                .collect(),
            target: ds.target_column().schema.name.clone(),
            task: ds.task(),
            class_levels: ds.class_levels().map(<[String]>::to_vec),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prediction<T> {
    Class(u32),
    Value(T),
}

impl<T: Real> Prediction<T> {
    pub fn class(&self) -> Option<u32> {
        match self {
            Prediction::Class(k) => Some(*k),
            Prediction::Value(_) => None,
        }
    }

    pub fn value(&self) -> Option<T> {
        match self {
            Prediction::Value(v) => Some(*v),
            Prediction::Class(_) => None,
        }
    }
}

/// Per-row predictions. `None` marks rows without a defined prediction
/// (no out-of-bag tree, or no proximity mass).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet<T> {
    pub values: Vec<Option<Prediction<T>>>,
    /// The class vote was tied and broken toward the smallest code.
    pub tied: Vec<bool>,
}

impl<T: Real> PredictionSet<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_defined(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn n_tied(&self) -> usize {
        self.tied.iter().filter(|&&t| t).count()
    }

    /// Misclassification rate or mean squared error against `truth`, over
    /// rows with a defined prediction. `None` when no row is defined.
    pub fn error(&self, truth: Response<'_, T>) -> Option<f64> {
        let mut n = 0usize;
        let mut err = 0.0;
        for (i, p) in self.values.iter().enumerate() {
            let Some(p) = p else { continue };
            n += 1;
            err += match (p, truth) {
                (Prediction::Class(k), Response::Classes { codes, .. }) => f64::from(u8::from(*k != codes[i])),
                (Prediction::Value(v), Response::Values(y)) => (*v - y[i]).as_f64().powi(2),
                _ => return None,
            };
        }
        (n > 0).then(|| err / n as f64)
    }
}

/// Leaf id of every row in every tree, tree-major: `ids[t][row]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LeafMap {
    pub ids: Vec<Vec<u32>>,
}

impl LeafMap {
    pub fn n_trees(&self) -> usize {
        self.ids.len()
    }

    pub fn n_rows(&self) -> usize {
        self.ids.first().map_or(0, Vec::len)
    }

    pub fn leaf(&self, t: usize, row: usize) -> usize {
        self.ids[t][row] as usize
    }
}

/// Trained ensemble with the bootstrap record of every tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest<T = f64> {
    pub(crate) params: ForestParams,
    pub(crate) trees: Vec<Tree<T>>,
    pub(crate) bootstraps: Vec<BootstrapRecord>,
    pub(crate) fingerprint: Fingerprint,
}

/// Trains `params.n_trees` trees in parallel; tree `t` draws from stream `t`
/// of `params.seed`, so the result does not depend on the thread count.
pub fn fit_forest<T: Real>(ds: &Dataset<T>, params: &ForestParams) -> Result<Forest<T>> {
    let params = params.resolve(ds)?;
    let view = tree::TrainingView::new(ds)?;
    let n = ds.n_rows();
    let (trees, bootstraps): (Vec<_>, Vec<_>) = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::stream(params.seed, t as u64);
            let boot = bootstrap_sample(n, &mut rng);
            let tree = tree::grow(&view, &boot, &params, &mut rng);
            (tree, boot)
        })
        .unzip();
    Ok(Forest {
        params,
        trees,
        bootstraps,
        fingerprint: Fingerprint::of(ds),
    })
}

impl<T: Real> Forest<T> {
    pub fn fit(ds: &Dataset<T>, params: &ForestParams) -> Result<Self> {
        fit_forest(ds, params)
    }

    /// Assembles a forest from parts, checking that they line up.
    pub fn from_parts(
        params: ForestParams,
        trees: Vec<Tree<T>>,
        bootstraps: Vec<BootstrapRecord>,
        fingerprint: Fingerprint,
    ) -> Result<Self> {
        if trees.len() != bootstraps.len() || trees.len() != params.n_trees {
            return Err(Error::shape(format!(
                "{} trees, {} bootstrap records, n_trees = {}",
                trees.len(),
                bootstraps.len(),
                params.n_trees
            )));
        }
        for (t, b) in bootstraps.iter().enumerate() {
            if b.len() != fingerprint.n_rows || b.total() != fingerprint.n_rows as u64 {
                return Err(Error::shape(format!("bootstrap record {t} does not cover the training rows")));
            }
        }
        Ok(Self {
            params,
            trees,
            bootstraps,
            fingerprint,
        })
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn trees(&self) -> &[Tree<T>] {
        &self.trees
    }

    pub fn bootstraps(&self) -> &[BootstrapRecord] {
        &self.bootstraps
    }

    pub fn fingerprint(&self) -> &Fingerprint {
        &self.fingerprint
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn n_train(&self) -> usize {
        self.fingerprint.n_rows
    }

    pub fn task(&self) -> Task {
        self.fingerprint.task
    }

    pub fn n_classes(&self) -> usize {
        self.fingerprint.class_levels.as_ref().map_or(0, Vec::len)
    }

    /// Trees in which `row` is out of bag.
    pub fn oob_trees(&self, row: usize) -> Vec<usize> {
        (0..self.n_trees()).filter(|&t| self.bootstraps[t].is_oob(row)).collect()
    }

    /// Errors unless `ds` has the training features (names and kinds).
    pub fn check_features<T2: Real>(&self, ds: &Dataset<T2>) -> Result<()> {
        let fp = Fingerprint::of(ds);
        if fp.features != self.fingerprint.features {
            return Err(Error::shape("dataset features differ from the forest's training features"));
        }
        Ok(())
    }

    /// Errors unless `ds` looks like the training set (same features,
    /// target and row count).
    pub fn check_training(&self, ds: &Dataset<T>) -> Result<()> {
        let fp = Fingerprint::of(ds);
        if fp != self.fingerprint {
            return Err(Error::shape("dataset does not match the forest's training fingerprint"));
        }
        Ok(())
    }

    fn check_rows(&self, rows: &[Vec<T>]) -> Result<()> {
        let d = self.fingerprint.features.len();
        if let Some(r) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::shape(format!("row {r} has {} features, expected {d}", rows[r].len())));
        }
        if let Some(r) = rows.iter().position(|r| r.iter().any(|x| x.is_nan())) {
            return Err(Error::data(format!("row {r} has missing features")));
        }
        Ok(())
    }

    /// Leaf of every row in every tree.
    pub fn leaf_map(&self, rows: &[Vec<T>]) -> Result<LeafMap> {
        self.check_rows(rows)?;
        let ids = self
            .trees
            .par_iter()
            .map(|tree| rows.iter().map(|x| tree.leaf_of(x) as u32).collect())
            .collect();
        Ok(LeafMap { ids })
    }

    /// Out-of-bag predictions for the training rows: each row is judged
    /// only by trees that did not see it. Class votes and per-tree leaf
    /// votes break ties toward the smallest class code.
    pub fn oob_predict(&self, ds: &Dataset<T>) -> Result<PredictionSet<T>> {
        self.check_training(ds)?;
        let leaves = self.leaf_map(&ds.feature_rows())?;
        Ok(self.aggregate(&leaves, |t, i| self.bootstraps[t].is_oob(i)))
    }

    /// Predictions for new rows, aggregated over all trees.
    pub fn predict(&self, rows: &[Vec<T>]) -> Result<PredictionSet<T>> {
        let leaves = self.leaf_map(rows)?;
        Ok(self.aggregate(&leaves, |_, _| true))
    }

    pub fn predict_dataset(&self, ds: &Dataset<T>) -> Result<PredictionSet<T>> {
        self.check_features(ds)?;
        self.predict(&ds.feature_rows())
    }

    fn aggregate(&self, leaves: &LeafMap, uses: impl Fn(usize, usize) -> bool + Sync) -> PredictionSet<T> {
        let n = leaves.n_rows();
        let k = self.n_classes();
        let rows: Vec<(Option<Prediction<T>>, bool)> = (0..n)
            .into_par_iter()
            .map(|i| match self.task() {
                Task::Classification => {
                    let mut votes = vec![0u32; k];
                    let mut used = 0;
                    for (t, tree) in self.trees.iter().enumerate() {
                        if !uses(t, i) {
                            continue;
                        }
                        let LeafStats::Classes(w) = &tree.leaf(leaves.leaf(t, i)).stats else {
                            unreachable!("classification forest has class leaves")
                        };
                        votes[argmax_low(w).0] += 1;
                        used += 1;
                    }
                    if used == 0 {
                        (None, false)
                    } else {
                        let (c, tied) = argmax_low(&votes);
                        (Some(Prediction::Class(c as u32)), tied)
                    }
                }
                Task::Regression => {
                    let mut sum = T::zero();
                    let mut used = 0usize;
                    for (t, tree) in self.trees.iter().enumerate() {
                        if !uses(t, i) {
                            continue;
                        }
                        let LeafStats::Mean(m) = tree.leaf(leaves.leaf(t, i)).stats else {
                            unreachable!("regression forest has mean leaves")
                        };
                        sum += m;
                        used += 1;
                    }
                    if used == 0 {
                        (None, false)
                    } else {
                        (Some(Prediction::Value(sum / T::of_usize(used))), false)
                    }
                }
            })
            .collect();
        let (values, tied) = rows.into_iter().unzip();
        PredictionSet { values, tied }
    }

    /// Out-of-bag misclassification rate or mean squared error.
    pub fn oob_error(&self, ds: &Dataset<T>) -> Result<f64> {
        self.oob_predict(ds)?
            .error(ds.response())
            .ok_or_else(|| Error::data("no row has an out-of-bag prediction"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic;
    use proptest::prelude::*;

    /// Out-of-bag prediction recomputed from bootstrap records and leaf
    /// contents alone: leaf membership of `i` is found by routing, leaf
    /// votes by re-tallying the in-bag labels that share the leaf.
    fn brute_force_oob(forest: &Forest, ds: &Dataset) -> Vec<Option<Prediction<f64>>> {
        let n = ds.n_rows();
        let rows = ds.feature_rows();
        (0..n)
            .map(|i| {
                let mut class_votes: Vec<u32> = vec![0; ds.n_classes()];
                let mut values = Vec::new();
                for t in 0..forest.n_trees() {
                    let boot = &forest.bootstraps()[t];
                    if boot.counts[i] != 0 {
                        continue;
                    }
                    let tree = &forest.trees()[t];
                    let leaf_i = tree.leaf_of(&rows[i]);
                    let mates: Vec<usize> = (0..n)
                        .filter(|&j| boot.counts[j] > 0 && tree.leaf_of(&rows[j]) == leaf_i)
                        .collect();
                    match ds.response() {
                        Response::Classes { codes, n_classes } => {
                            let mut w = vec![0u32; n_classes];
                            for &j in &mates {
                                w[codes[j] as usize] += boot.counts[j];
                            }
                            let top = *w.iter().max().unwrap();
                            class_votes[w.iter().position(|&v| v == top).unwrap()] += 1;
                        }
                        Response::Values(y) => {
                            let s: f64 = mates.iter().map(|&j| boot.counts[j] as f64 * y[j]).sum();
                            let c: f64 = mates.iter().map(|&j| boot.counts[j] as f64).sum();
                            values.push(s / c);
                        }
                    }
                }
                match ds.task() {
                    Task::Classification if class_votes.iter().sum::<u32>() > 0 => {
                        let top = *class_votes.iter().max().unwrap();
                        Some(Prediction::Class(class_votes.iter().position(|&v| v == top).unwrap() as u32))
                    }
                    Task::Regression if !values.is_empty() => {
                        Some(Prediction::Value(values.iter().sum::<f64>() / values.len() as f64))
                    }
                    _ => None,
                }
            })
            .collect()
    }

    fn same(a: &[Option<Prediction<f64>>], b: &[Option<Prediction<f64>>]) -> bool {
        a.len() == b.len()
            && a.iter().zip(b).all(|(x, y)| match (x, y) {
                (Some(Prediction::Value(u)), Some(Prediction::Value(v))) => (u - v).abs() < 1e-12,
                _ => x == y,
            })
    }

    #[test]
    fn bootstrap_records_sum_to_n_and_oob_is_complement() {
        let ds = synthetic::blobs::<f64>(40, 3, 2, 1.0, 4).unwrap();
        let f = fit_forest(&ds, &ForestParams::with_trees(30, 9)).unwrap();
        for b in f.bootstraps() {
            assert_eq!(b.total(), 40);
            let oob = b.oob();
            assert!(oob.iter().all(|&j| b.counts[j] == 0));
            assert_eq!(oob.len() + b.in_bag().len(), 40);
        }
    }

    #[test]
    fn leaves_are_pure_and_stats_recomputable() {
        let ds = synthetic::blobs::<f64>(60, 4, 3, 2.0, 1).unwrap();
        let f = fit_forest(&ds, &ForestParams::with_trees(25, 2)).unwrap();
        let codes = ds.class_codes().unwrap();
        let rows = ds.feature_rows();
        for (tree, boot) in f.trees().iter().zip(f.bootstraps()) {
            let mut seen = vec![0u32; 60];
            for (id, leaf) in tree.leaves().iter().enumerate() {
                let LeafStats::Classes(w) = &leaf.stats else { panic!() };
                let mut expect = vec![0u32; 3];
                for &(j, c) in &leaf.members {
                    expect[codes[j as usize] as usize] += c;
                    assert_eq!(boot.counts[j as usize], c);
                    assert_eq!(tree.leaf_of(&rows[j as usize]), id);
                    seen[j as usize] += 1;
                }
                assert_eq!(w, &expect);
                assert_eq!(w.iter().filter(|&&c| c > 0).count(), 1, "impure leaf");
            }
            for j in 0..60 {
                assert_eq!(seen[j], u32::from(boot.counts[j] > 0));
            }
        }
    }

    #[test]
    fn same_seed_gives_identical_forests() {
        let ds = synthetic::friedman1::<f64>(80, 3).unwrap();
        let p = ForestParams::with_trees(20, 11);
        assert_eq!(fit_forest(&ds, &p).unwrap(), fit_forest(&ds, &p).unwrap());
        let other = fit_forest(&ds, &ForestParams::with_trees(20, 12)).unwrap();
        assert_ne!(fit_forest(&ds, &p).unwrap(), other);
    }

    #[test]
    fn thread_count_does_not_change_the_forest() {
        let ds = synthetic::blobs::<f64>(50, 3, 2, 1.0, 5).unwrap();
        let p = ForestParams::with_trees(16, 3);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| fit_forest(&ds, &p).unwrap());
        let b = four.install(|| fit_forest(&ds, &p).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn single_tree_leaves_in_bag_rows_undefined() {
        let ds = synthetic::blobs::<f64>(20, 2, 2, 1.0, 0).unwrap();
        let f = fit_forest(&ds, &ForestParams::with_trees(1, 0)).unwrap();
        let pred = f.oob_predict(&ds).unwrap();
        for i in 0..20 {
            assert_eq!(pred.values[i].is_none(), !f.bootstraps()[0].is_oob(i));
        }
    }

    #[test]
    fn predict_on_training_row_with_one_tree_is_leaf_statistic() {
        let ds = synthetic::friedman1::<f64>(30, 1).unwrap();
        let f = fit_forest(&ds, &ForestParams::with_trees(1, 4)).unwrap();
        let x = ds.feature_row(7);
        let p = f.predict(&[x.clone(), x.clone()]).unwrap();
        let LeafStats::Mean(m) = f.trees()[0].leaf(f.trees()[0].leaf_of(&x)).stats else { panic!() };
        assert_eq!(p.values[0], Some(Prediction::Value(m)));
        assert_eq!(p.values[0], p.values[1]);
    }

    #[test]
    fn separated_clusters_are_learned() {
        let ds = synthetic::separated_clusters::<f64>(300, 4, 6.0, 8).unwrap();
        let f = fit_forest(&ds, &ForestParams::with_trees(500, 1)).unwrap();
        assert!(f.oob_error(&ds).unwrap() < 0.02);
        let test = synthetic::separated_clusters::<f64>(200, 4, 6.0, 9).unwrap();
        let err = f.predict_dataset(&test).unwrap().error(test.response()).unwrap();
        assert!(err < 0.02, "test error {err}");
    }

    #[test]
    fn invalid_params_are_rejected() {
        let ds = synthetic::blobs::<f64>(20, 2, 2, 1.0, 0).unwrap();
        assert!(fit_forest(&ds, &ForestParams::with_trees(0, 0)).is_err());
        let mut p = ForestParams::with_trees(5, 0);
        p.mtry = Some(3);
        assert!(fit_forest(&ds, &p).is_err());
        p.mtry = None;
        p.min_node_size = Some(0);
        assert!(fit_forest(&ds, &p).is_err());
        p.min_node_size = None;
        p.task = Some(Task::Regression);
        assert!(fit_forest(&ds, &p).is_err());
    }

    #[test]
    fn resolved_defaults_follow_the_task() {
        let c = synthetic::blobs::<f64>(20, 10, 2, 1.0, 0).unwrap();
        let p = ForestParams::default().resolve(&c).unwrap();
        assert_eq!((p.mtry, p.min_node_size), (Some(3), Some(1)));
        let r = synthetic::friedman1::<f64>(20, 0).unwrap();
        let p = ForestParams::default().resolve(&r).unwrap();
        assert_eq!((p.mtry, p.min_node_size), (Some(3), Some(5)));
    }

    #[test]
    fn oob_error_rejects_foreign_dataset() {
        let ds = synthetic::blobs::<f64>(20, 2, 2, 1.0, 0).unwrap();
        let f = fit_forest(&ds, &ForestParams::with_trees(3, 0)).unwrap();
        let other = ds.take_rows(&(0..10).collect::<Vec<_>>()).unwrap();
        assert!(f.oob_predict(&other).is_err());
    }

    #[test]
    fn leaf_region_contains_routed_point() {
        let ds = synthetic::friedman1::<f64>(60, 2).unwrap();
        let f = fit_forest(&ds, &ForestParams::with_trees(5, 2)).unwrap();
        let x: Vec<f64> = (0..10).map(|k| 0.05 + 0.09 * k as f64).collect();
        for tree in f.trees() {
            let mut lo = [f64::NEG_INFINITY; 10];
            let mut hi = [f64::INFINITY; 10];
            for (feat, rule, left) in tree.path(&x) {
                let SplitRule::Numeric { threshold } = rule else { panic!() };
                if left {
                    hi[feat] = hi[feat].min(*threshold);
                } else {
                    lo[feat] = lo[feat].max(*threshold);
                }
            }
            for k in 0..10 {
                assert!(lo[k] < x[k] && x[k] <= hi[k]);
            }
            // every in-bag member of the leaf lies in the same box
            let leaf = tree.leaf(tree.leaf_of(&x));
            for &(j, _) in &leaf.members {
                let r = ds.feature_row(j as usize);
                assert!((0..10).all(|k| lo[k] < r[k] && r[k] <= hi[k]));
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(5))]
        #[test]
        fn oob_predict_matches_brute_force(seed in 0u64..1000, n in 8usize..50) {
            let cls = synthetic::blobs::<f64>(n, 3, 3, 1.5, seed).unwrap();
            let f = fit_forest(&cls, &ForestParams::with_trees(25, seed)).unwrap();
            prop_assert!(same(&f.oob_predict(&cls).unwrap().values, &brute_force_oob(&f, &cls)));

            let reg = synthetic::friedman1::<f64>(n, seed).unwrap();
            let mut p = ForestParams::with_trees(25, seed);
            p.min_node_size = Some(1 + (seed % 4) as usize);
            let f = fit_forest(&reg, &p).unwrap();
            prop_assert!(same(&f.oob_predict(&reg).unwrap().values, &brute_force_oob(&f, &reg)));
        }
    }
}
