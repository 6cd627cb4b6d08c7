use rayon::prelude::*;

use super::{DiagonalPolicy, Layout, ProximityKind, ProximityMatrix};
use crate::data::Dataset;
use crate::error::Result;
use crate::forest::{Forest, LeafMap};
use crate::scalar::Real;

/// Training rows grouped by leaf, per tree: `groups[t][leaf]`, ascending.
fn leaf_groups<T: Real>(
    f: &Forest<T>,
    leaves: &LeafMap,
    keep: impl Fn(usize, usize) -> bool + Sync,
) -> Vec<Vec<Vec<u32>>> {
    f.trees()
        .par_iter()
        .enumerate()
        .map(|(t, tree)| {
            let mut g = vec![Vec::new(); tree.n_leaves()];
            for (j, &l) in leaves.ids[t].iter().enumerate() {
                if keep(t, j) {
                    g[l as usize].push(j as u32);
                }
            }
            g
        })
        .collect()
}

/// Out-of-bag indicator of each training row as a bitset over trees.
fn oob_bits<T: Real>(f: &Forest<T>) -> Vec<Vec<u64>> {
    let words = f.n_trees().div_ceil(64);
    (0..f.n_train())
        .map(|j| {
            let mut b = vec![0u64; words];
            for (t, boot) in f.bootstraps().iter().enumerate() {
                if boot.is_oob(j) {
                    b[t / 64] |= 1 << (t % 64);
                }
            }
            b
        })
        .collect()
}

fn shared(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x & y).count_ones()).sum()
}

struct RowOut<T> {
    /// Nonzero entries by column.
    entries: Vec<(u32, T)>,
    flagged: bool,
    undefined: Vec<usize>,
}

/// Shared kernel. `query` holds the leaf of each query row; when `train` is
/// true the query rows are the training rows and a row is judged only by
/// its out-of-bag trees (OOB and GAP), otherwise by every tree.
fn build<T: Real>(
    f: &Forest<T>,
    query: &LeafMap,
    train_leaves: &LeafMap,
    train: bool,
    kind: ProximityKind,
    diagonal: DiagonalPolicy,
    layout: Layout,
) -> ProximityMatrix<T> {
    let n = f.n_train();
    let n_query = query.n_rows();
    let n_trees = f.n_trees();
    let boots = f.bootstraps();
    let judged = |t: usize, i: usize| !train || boots[t].is_oob(i);

    let all_groups = (kind == ProximityKind::Original).then(|| leaf_groups(f, train_leaves, |_, _| true));
    let oob_groups = (kind == ProximityKind::Oob).then(|| leaf_groups(f, train_leaves, |t, j| boots[t].is_oob(j)));
    let bits = (kind == ProximityKind::Oob).then(|| oob_bits(f));

    let row = |i: usize| -> RowOut<T> {
        let n_judging = (0..n_trees).filter(|&t| judged(t, i)).count();
        let mut undefined = Vec::new();
        let mut values = match kind {
            ProximityKind::Original => {
                let groups = all_groups.as_ref().expect("groups built");
                let mut count = vec![0u32; n];
                for t in 0..n_trees {
                    for &j in &groups[t][query.leaf(t, i)] {
                        count[j as usize] += 1;
                    }
                }
                let tt = T::of_usize(n_trees);
                count.into_iter().map(|c| T::of(c as f64) / tt).collect()
            }
            ProximityKind::Oob => {
                let groups = oob_groups.as_ref().expect("groups built");
                let bits = bits.as_ref().expect("bits built");
                let mut num = vec![0u32; n];
                for t in (0..n_trees).filter(|&t| judged(t, i)) {
                    for &j in &groups[t][query.leaf(t, i)] {
                        num[j as usize] += 1;
                    }
                }
                (0..n)
                    .map(|j| {
                        let den = if train {
                            shared(&bits[i], &bits[j])
                        } else {
                            bits[j].iter().map(|w| w.count_ones()).sum()
                        };
                        if den == 0 {
                            if !(train && i == j) {
                                undefined.push(j);
                            }
                            T::zero()
                        } else {
                            T::of(num[j] as f64) / T::of(den as f64)
                        }
                    })
                    .collect()
            }
            ProximityKind::Gap => {
                let mut acc = vec![T::zero(); n];
                for t in (0..n_trees).filter(|&t| judged(t, i)) {
                    let leaf = f.trees()[t].leaf(query.leaf(t, i));
                    let w = T::of(leaf.weight as f64);
                    for &(j, c) in &leaf.members {
                        acc[j as usize] += T::of(c as f64) / w;
                    }
                }
                if n_judging > 0 {
                    let s = T::of_usize(n_judging);
                    for v in &mut acc {
                        *v /= s;
                    }
                }
                acc
            }
        };
        if train {
            values[i] = match (diagonal, kind) {
                (DiagonalPolicy::Zeroed, _) => T::zero(),
                (DiagonalPolicy::Identity, _) => T::one(),
                (DiagonalPolicy::DuplicateOob, ProximityKind::Gap) => {
                    let mut s = T::zero();
                    for (t, tree) in f.trees().iter().enumerate() {
                        let c = boots[t].count(i);
                        if c > 0 {
                            let leaf = tree.leaf(query.leaf(t, i));
                            s += T::of(c as f64) / T::of(leaf.weight as f64);
                        }
                    }
                    s / T::of_usize(n_trees)
                }
                (DiagonalPolicy::DuplicateOob, _) => T::one(),
            };
        }
        let flagged = kind != ProximityKind::Original && n_judging == 0;
        RowOut {
            entries: values
                .into_iter()
                .enumerate()
                .filter(|(_, v)| *v != T::zero())
                .map(|(j, v)| (j as u32, v))
                .collect(),
            flagged,
            undefined,
        }
    };

    let outs: Vec<RowOut<T>> = (0..n_query).into_par_iter().map(row).collect();
    let flagged: Vec<usize> = (0..n_query).filter(|&i| outs[i].flagged).collect();
    let undefined: Vec<(usize, usize)> = outs
        .iter()
        .enumerate()
        .flat_map(|(i, o)| o.undefined.iter().map(move |&j| (i, j)))
        .collect();
    let storage = ProximityMatrix::assemble(n_query, n, layout, |i| {
        let mut row = vec![T::zero(); n];
        for &(j, v) in &outs[i].entries {
            row[j as usize] = v;
        }
        row
    });
    let symmetric = train && kind != ProximityKind::Gap;
    ProximityMatrix::from_storage(kind, diagonal, symmetric, train, n_query, n, storage, flagged, undefined)
}

/// Proximities among the training rows of `f`.
pub fn proximities<T: Real>(
    f: &Forest<T>,
    ds: &Dataset<T>,
    kind: ProximityKind,
    diagonal: DiagonalPolicy,
    layout: Layout,
) -> Result<ProximityMatrix<T>> {
    f.check_training(ds)?;
    let leaves = f.leaf_map(&ds.feature_rows())?;
    Ok(build(f, &leaves, &leaves, true, kind, diagonal, layout))
}

/// Proximities of new rows to the training rows. New rows are out of bag in
/// every tree.
pub fn query_proximities<T: Real>(
    f: &Forest<T>,
    train: &Dataset<T>,
    rows: &[Vec<T>],
    kind: ProximityKind,
    layout: Layout,
) -> Result<ProximityMatrix<T>> {
    f.check_training(train)?;
    let train_leaves = if kind == ProximityKind::Gap {
        // GAP reads leaf members directly
        crate::forest::LeafMap { ids: Vec::new() }
    } else {
        f.leaf_map(&train.feature_rows())?
    };
    let query = f.leaf_map(rows)?;
    Ok(build(f, &query, &train_leaves, false, kind, DiagonalPolicy::Zeroed, layout))
}

/// Share of trees in which two training rows share a leaf.
pub fn prox_original<T: Real>(f: &Forest<T>, ds: &Dataset<T>) -> Result<ProximityMatrix<T>> {
    proximities(f, ds, ProximityKind::Original, DiagonalPolicy::Identity, Layout::Auto)
}

/// Share of jointly out-of-bag trees in which two training rows share a leaf.
pub fn prox_oob<T: Real>(f: &Forest<T>, ds: &Dataset<T>) -> Result<ProximityMatrix<T>> {
    proximities(f, ds, ProximityKind::Oob, DiagonalPolicy::Identity, Layout::Auto)
}

pub fn prox_gap<T: Real>(f: &Forest<T>, ds: &Dataset<T>, diagonal: DiagonalPolicy) -> Result<ProximityMatrix<T>> {
    proximities(f, ds, ProximityKind::Gap, diagonal, Layout::Auto)
}

pub fn prox_gap_test<T: Real>(f: &Forest<T>, train: &Dataset<T>, rows: &[Vec<T>]) -> Result<ProximityMatrix<T>> {
    query_proximities(f, train, rows, ProximityKind::Gap, Layout::Auto)
}
