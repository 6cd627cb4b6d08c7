use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::bootstrap::BootstrapRecord;
use super::{ForestParams, Prediction};
use crate::data::{Dataset, FeatureKind, Response};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Categorical partitions are searched exhaustively up to this many levels
/// present in a node, one-vs-rest above it.
const EXHAUSTIVE_LEVELS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRule<T> {
    /// `x <= threshold` goes left.
    Numeric { threshold: T },
    /// Levels seen in the node are partitioned into `left` / `right`; any
    /// other level follows `unseen_left`, the heavier child.
    Categorical {
        left: Vec<u32>,
        right: Vec<u32>,
        unseen_left: bool,
    },
}

impl<T: Real> SplitRule<T> {
    pub fn goes_left(&self, x: T) -> bool {
        match self {
            SplitRule::Numeric { threshold } => x <= *threshold,
            SplitRule::Categorical {
                left,
                right,
                unseen_left,
            } => {
                let code = x.to_u32().unwrap_or(u32::MAX);
                if left.contains(&code) {
                    true
                } else if right.contains(&code) {
                    false
                } else {
                    *unseen_left
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node<T> {
    Split {
        feature: usize,
        rule: SplitRule<T>,
        left: usize,
        right: usize,
    },
    Leaf {
        leaf: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafStats<T> {
    /// In-bag class weights (sum of multiplicities per class).
    Classes(Vec<u32>),
    /// Multiplicity-weighted mean response.
    Mean(T),
}

/// Terminal node with its in-bag members.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Leaf<T> {
    /// `(row, multiplicity)` of every in-bag row in the leaf, ascending by row.
    pub members: Vec<(u32, u32)>,
    /// Size of the in-bag multiset, i.e. the sum of multiplicities.
    pub weight: u32,
    pub stats: LeafStats<T>,
}

impl<T: Real> Leaf<T> {
    /// Leaf vote or mean, with a flag when the class vote was tied.
    pub fn prediction(&self) -> (Prediction<T>, bool) {
        match &self.stats {
            LeafStats::Classes(w) => {
                let (k, tied) = argmax_low(w);
                (Prediction::Class(k as u32), tied)
            }
            LeafStats::Mean(m) => (Prediction::Value(*m), false),
        }
    }
}

/// Index of the largest count, smallest index on ties; second value reports
/// whether a tie occurred.
pub(crate) fn argmax_low(w: &[u32]) -> (usize, bool) {
    let mut best = 0;
    let mut tied = false;
    for (k, &v) in w.iter().enumerate().skip(1) {
        if v > w[best] {
            best = k;
            tied = false;
        } else if v == w[best] {
            tied = true;
        }
    }
    (best, tied)
}

/// Unpruned binary CART tree grown on one bootstrap sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree<T = f64> {
    pub(crate) nodes: Vec<Node<T>>,
    pub(crate) leaves: Vec<Leaf<T>>,
    pub(crate) depth: usize,
}

impl<T: Real> Tree<T> {
    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn leaves(&self) -> &[Leaf<T>] {
        &self.leaves
    }

    pub fn leaf(&self, id: usize) -> &Leaf<T> {
        &self.leaves[id]
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Routes a feature row to its leaf id.
    pub fn leaf_of(&self, x: &[T]) -> usize {
        let mut node = 0;
        loop {
            match &self.nodes[node] {
                Node::Leaf { leaf } => return *leaf,
                Node::Split {
                    feature,
                    rule,
                    left,
                    right,
                } => node = if rule.goes_left(x[*feature]) { *left } else { *right },
            }
        }
    }

    /// Sequence of `(feature, rule, went_left)` decisions taken by `x`.
    pub fn path(&self, x: &[T]) -> Vec<(usize, &SplitRule<T>, bool)> {
        let mut out = Vec::new();
        let mut node = 0;
        while let Node::Split {
            feature,
            rule,
            left,
            right,
        } = &self.nodes[node]
        {
            let l = rule.goes_left(x[*feature]);
            out.push((*feature, rule, l));
            node = if l { *left } else { *right };
        }
        out
    }
}

/// Column-major copy of the training data used during induction.
pub(crate) struct TrainingView<T> {
    pub columns: Vec<Vec<T>>,
    pub kinds: Vec<FeatureKind>,
    pub target: Target<T>,
}

pub(crate) enum Target<T> {
    Classes { codes: Vec<u32>, n_classes: usize },
    Values(Vec<T>),
}

impl<T: Real> TrainingView<T> {
    pub fn new(ds: &Dataset<T>) -> Result<Self> {
        if ds.has_missing_features() {
            return Err(Error::data("forests need complete feature data; impute first"));
        }
        let columns = (0..ds.n_features())
            .map(|f| (0..ds.n_rows()).map(|r| ds.value(r, f)).collect())
            .collect();
        let target = match ds.response() {
            Response::Classes { codes, n_classes } => Target::Classes {
                codes: codes.to_vec(),
                n_classes,
            },
            Response::Values(v) => Target::Values(v.to_vec()),
        };
        Ok(Self {
            columns,
            kinds: ds.feature_kinds(),
            target,
        })
    }

    fn n_features(&self) -> usize {
        self.columns.len()
    }
}

/// Grows one tree on the bootstrap sample `boot`. `params` must be resolved.
pub fn fit_tree<T: Real, R: Rng + ?Sized>(
    ds: &Dataset<T>,
    boot: &BootstrapRecord,
    params: &ForestParams,
    rng: &mut R,
) -> Result<Tree<T>> {
    if boot.len() != ds.n_rows() {
        return Err(Error::shape(format!(
            "bootstrap covers {} rows, dataset has {}",
            boot.len(),
            ds.n_rows()
        )));
    }
    let params = params.resolve(ds)?;
    let view = TrainingView::new(ds)?;
    Ok(grow(&view, boot, &params, rng))
}

type Members = Vec<(u32, u32)>;
/// Members, depth and the parent slot to patch: `(node, is_left)`.
type Pending = (Members, usize, Option<(usize, bool)>);

struct Candidate<T> {
    feature: usize,
    rule: SplitRule<T>,
    score: f64,
    decrease: f64,
}

pub(crate) fn grow<T: Real, R: Rng + ?Sized>(
    view: &TrainingView<T>,
    boot: &BootstrapRecord,
    params: &ForestParams,
    rng: &mut R,
) -> Tree<T> {
    let mtry = params.mtry.expect("resolved mtry");
    let min_node_size = params.min_node_size.expect("resolved min_node_size") as u64;
    let root: Members = boot
        .counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(j, &c)| (j as u32, c))
        .collect();

    let mut tree = Tree {
        nodes: Vec::new(),
        leaves: Vec::new(),
        depth: 0,
    };
    let mut stack: Vec<Pending> = vec![(root, 0, None)];
    while let Some((members, depth, parent)) = stack.pop() {
        let id = tree.nodes.len();
        if let Some((p, is_left)) = parent {
            if let Node::Split { left, right, .. } = &mut tree.nodes[p] {
                if is_left {
                    *left = id;
                } else {
                    *right = id;
                }
            }
        }
        tree.depth = tree.depth.max(depth);
        let weight: u64 = members.iter().map(|&(_, c)| c as u64).sum();
        let split = if weight <= min_node_size || is_pure(view, &members) {
            None
        } else {
            find_split(view, &members, mtry, rng)
        };
        match split {
            None => {
                tree.nodes.push(Node::Leaf {
                    leaf: tree.leaves.len(),
                });
                tree.leaves.push(make_leaf(view, members));
            }
            Some(c) => {
                let (l, r): (Members, Members) = members
                    .into_iter()
                    .partition(|&(j, _)| c.rule.goes_left(view.columns[c.feature][j as usize]));
                debug_assert!(!l.is_empty() && !r.is_empty());
                tree.nodes.push(Node::Split {
                    feature: c.feature,
                    rule: c.rule,
                    left: usize::MAX,
                    right: usize::MAX,
                });
                // right pushed first so the left subtree is numbered first
                stack.push((r, depth + 1, Some((id, false))));
                stack.push((l, depth + 1, Some((id, true))));
            }
        }
    }
    tree
}

fn is_pure<T: Real>(view: &TrainingView<T>, members: &[(u32, u32)]) -> bool {
    match &view.target {
        Target::Classes { codes, .. } => {
            let first = codes[members[0].0 as usize];
            members.iter().all(|&(j, _)| codes[j as usize] == first)
        }
        Target::Values(y) => {
            let first = y[members[0].0 as usize];
            members.iter().all(|&(j, _)| y[j as usize] == first)
        }
    }
}

fn make_leaf<T: Real>(view: &TrainingView<T>, members: Members) -> Leaf<T> {
    let weight: u32 = members.iter().map(|&(_, c)| c).sum();
    let stats = match &view.target {
        Target::Classes { codes, n_classes } => {
            let mut w = vec![0u32; *n_classes];
            for &(j, c) in &members {
                w[codes[j as usize] as usize] += c;
            }
            LeafStats::Classes(w)
        }
        Target::Values(y) => {
            let mut s = T::zero();
            for &(j, c) in &members {
                s += T::of(c as f64) * y[j as usize];
            }
            LeafStats::Mean(s / T::of(weight as f64))
        }
    };
    Leaf {
        members,
        weight,
        stats,
    }
}

/// Best split over `mtry` features drawn without replacement.
///
/// Classification keeps drawing further features when none of the first
/// `mtry` separates the node, and as a last resort accepts a zero-decrease
/// split, so that with `min_node_size = 1` every leaf ends up pure unless
/// identical feature vectors carry different labels.
fn find_split<T: Real, R: Rng + ?Sized>(
    view: &TrainingView<T>,
    members: &[(u32, u32)],
    mtry: usize,
    rng: &mut R,
) -> Option<Candidate<T>> {
    let d = view.n_features();
    let order = sample(rng, d, d).into_vec();
    let classification = matches!(view.target, Target::Classes { .. });
    let mut best: Option<Candidate<T>> = None;
    for (drawn, &f) in order.iter().enumerate() {
        if drawn >= mtry {
            let found_positive = best.as_ref().is_some_and(|b| b.decrease > 0.0);
            if found_positive || !classification {
                break;
            }
        }
        if let Some(c) = best_split_for_feature(view, members, f) {
            if best.as_ref().is_none_or(|b| c.score > b.score) {
                best = Some(c);
            }
        }
    }
    match best {
        Some(b) if b.decrease > 0.0 || classification => Some(b),
        _ => None,
    }
}

/// Accumulated label statistics of one side of a candidate split.
#[derive(Clone)]
enum Acc {
    Classes { w: Vec<f64>, total: f64, sumsq: f64 },
    Moments { w: f64, sum: f64 },
}

impl Acc {
    fn empty<T>(target: &Target<T>) -> Self {
        match target {
            Target::Classes { n_classes, .. } => Acc::Classes {
                w: vec![0.0; *n_classes],
                total: 0.0,
                sumsq: 0.0,
            },
            Target::Values(_) => Acc::Moments { w: 0.0, sum: 0.0 },
        }
    }

    fn add<T: Real>(&mut self, target: &Target<T>, row: usize, count: f64) {
        match (self, target) {
            (Acc::Classes { w, total, sumsq }, Target::Classes { codes, .. }) => {
                let k = codes[row] as usize;
                let old = w[k];
                w[k] += count;
                *sumsq += w[k] * w[k] - old * old;
                *total += count;
            }
            (Acc::Moments { w, sum }, Target::Values(y)) => {
                *w += count;
                *sum += count * y[row].as_f64();
            }
            _ => unreachable!("accumulator matches target"),
        }
    }

    fn merge(&mut self, other: &Acc) {
        match (self, other) {
            (Acc::Classes { w, total, sumsq }, Acc::Classes { w: ow, total: ot, .. }) => {
                for (a, b) in w.iter_mut().zip(ow) {
                    *a += b;
                }
                *total += ot;
                *sumsq = w.iter().map(|v| v * v).sum();
            }
            (Acc::Moments { w, sum }, Acc::Moments { w: ow, sum: os }) => {
                *w += ow;
                *sum += os;
            }
            _ => unreachable!("accumulators share a kind"),
        }
    }

    fn minus(&self, other: &Acc) -> Acc {
        match (self, other) {
            (Acc::Classes { w, total, .. }, Acc::Classes { w: ow, total: ot, .. }) => {
                let w: Vec<f64> = w.iter().zip(ow).map(|(a, b)| a - b).collect();
                let sumsq = w.iter().map(|v| v * v).sum();
                Acc::Classes {
                    w,
                    total: total - ot,
                    sumsq,
                }
            }
            (Acc::Moments { w, sum }, Acc::Moments { w: ow, sum: os }) => Acc::Moments {
                w: w - ow,
                sum: sum - os,
            },
            _ => unreachable!("accumulators share a kind"),
        }
    }

    fn weight(&self) -> f64 {
        match self {
            Acc::Classes { total, .. } => *total,
            Acc::Moments { w, .. } => *w,
        }
    }

    /// `sum_k w_k^2 / W` for classes, `S^2 / W` for moments: the part of the
    /// impurity reduction that depends on the partition.
    fn gain_term(&self) -> f64 {
        match self {
            Acc::Classes { total, sumsq, .. } => sumsq / total,
            Acc::Moments { w, sum } => sum * sum / w,
        }
    }
}

/// Weighted impurity decrease (Gini for classes, SSE for responses) of the
/// best split on feature `f`, or `None` when the feature is constant in the
/// node. `score` orders candidates; `decrease` is thresholded.
fn best_split_for_feature<T: Real>(
    view: &TrainingView<T>,
    members: &[(u32, u32)],
    f: usize,
) -> Option<Candidate<T>> {
    let mut parent = Acc::empty(&view.target);
    for &(j, c) in members {
        parent.add(&view.target, j as usize, c as f64);
    }
    let base = parent.gain_term();
    let tol = 1e-10 * base.abs().max(1e-300);
    let col = &view.columns[f];

    let (rule, score) = match view.kinds[f] {
        FeatureKind::Numeric => {
            let mut sorted: Vec<(T, u32, u32)> = members.iter().map(|&(j, c)| (col[j as usize], j, c)).collect();
            sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features").then(a.1.cmp(&b.1)));
            if sorted[0].0 == sorted[sorted.len() - 1].0 {
                return None;
            }
            let mut left = Acc::empty(&view.target);
            let mut best: Option<(usize, f64)> = None;
            for i in 0..sorted.len() - 1 {
                let (x, j, c) = sorted[i];
                left.add(&view.target, j as usize, c as f64);
                if sorted[i + 1].0 == x {
                    continue;
                }
                let right = parent.minus(&left);
                let s = left.gain_term() + right.gain_term();
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((i, s));
                }
            }
            let (i, s) = best?;
            let (a, b) = (sorted[i].0, sorted[i + 1].0);
            let mut threshold = a / T::of(2.0) + b / T::of(2.0);
            if !(threshold >= a && threshold < b) {
                threshold = a;
            }
            (SplitRule::Numeric { threshold }, s)
        }
        FeatureKind::Categorical { levels } => {
            let mut per_level: Vec<Option<Acc>> = vec![None; levels];
            for &(j, c) in members {
                let code = col[j as usize].to_usize().expect("category code");
                per_level[code]
                    .get_or_insert_with(|| Acc::empty(&view.target))
                    .add(&view.target, j as usize, c as f64);
            }
            let present: Vec<(u32, Acc)> = per_level
                .into_iter()
                .enumerate()
                .filter_map(|(k, a)| a.map(|a| (k as u32, a)))
                .collect();
            let k = present.len();
            if k < 2 {
                return None;
            }
            let masks: Vec<u64> = if k <= EXHAUSTIVE_LEVELS {
                // last present level stays right, so each partition appears once
                (1..(1u64 << (k - 1))).collect()
            } else {
                (0..k).map(|i| 1u64 << i).collect()
            };
            let mut best: Option<(u64, f64, f64)> = None;
            for mask in masks {
                let mut left = Acc::empty(&view.target);
                for (i, (_, a)) in present.iter().enumerate() {
                    if mask >> i & 1 == 1 {
                        left.merge(a);
                    }
                }
                let right = parent.minus(&left);
                let s = left.gain_term() + right.gain_term();
                if best.is_none_or(|(_, b, _)| s > b) {
                    best = Some((mask, s, left.weight()));
                }
            }
            let (mask, s, wl) = best?;
            let (l, r): (Vec<_>, Vec<_>) = present.iter().enumerate().partition(|(i, _)| mask >> i & 1 == 1);
            let rule = SplitRule::Categorical {
                left: l.into_iter().map(|(_, (code, _))| *code).collect(),
                right: r.into_iter().map(|(_, (code, _))| *code).collect(),
                unseen_left: wl >= parent.weight() - wl,
            };
            (rule, s)
        }
    };
    let gain = score - base;
    Some(Candidate {
        feature: f,
        rule,
        score,
        decrease: if gain > tol { gain } else { 0.0 },
    })
}
