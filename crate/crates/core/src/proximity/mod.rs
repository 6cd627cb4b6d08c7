//! Proximity matrices: original co-occurrence, out-of-bag, and GAP.

mod compute;
mod export;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub use compute::{prox_gap, prox_gap_test, prox_oob, prox_original, proximities, query_proximities};
pub use export::ProximityInfo;

/// Matrices with more query rows than this are stored sparse under
/// [`Layout::Auto`].
pub const DENSE_ROW_LIMIT: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProximityKind {
    /// Share of trees in which two rows land in the same leaf.
    Original,
    /// Same, counted only over trees where both rows are out of bag.
    Oob,
    /// Out-of-bag trees of the query row, weighting in-bag leaf mates by
    /// their bootstrap multiplicity over the leaf's in-bag size.
    Gap,
}

impl ProximityKind {
    pub const ALL: [ProximityKind; 3] = [ProximityKind::Original, ProximityKind::Oob, ProximityKind::Gap];

    pub fn as_str(self) -> &'static str {
        match self {
            ProximityKind::Original => "original",
            ProximityKind::Oob => "oob",
            ProximityKind::Gap => "gap",
        }
    }
}

impl fmt::Display for ProximityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProximityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "original" => Ok(ProximityKind::Original),
            "oob" => Ok(ProximityKind::Oob),
            "gap" | "rf-gap" | "rfgap" => Ok(ProximityKind::Gap),
            other => Err(Error::param(format!("unknown proximity kind '{other}'"))),
        }
    }
}

/// What a training row's proximity to itself is set to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagonalPolicy {
    Zeroed,
    /// Proximity to an identical copy of the row that is out of bag in
    /// every tree. For GAP this is `(1/T) sum_t c_i(t) / |M_i(t)|`; for the
    /// other kinds it is 1.
    DuplicateOob,
    Identity,
}

impl fmt::Display for DiagonalPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiagonalPolicy::Zeroed => "zeroed",
            DiagonalPolicy::DuplicateOob => "duplicate-oob",
            DiagonalPolicy::Identity => "identity",
        })
    }
}

impl FromStr for DiagonalPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zeroed" | "zero" => Ok(DiagonalPolicy::Zeroed),
            "duplicate-oob" | "duplicate" => Ok(DiagonalPolicy::DuplicateOob),
            "identity" | "one" => Ok(DiagonalPolicy::Identity),
            other => Err(Error::param(format!("unknown diagonal policy '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// Dense up to [`DENSE_ROW_LIMIT`] rows, sparse above.
    #[default]
    Auto,
    Dense,
    Sparse,
}

impl Layout {
    fn sparse_for(self, n_rows: usize) -> bool {
        match self {
            Layout::Auto => n_rows > DENSE_ROW_LIMIT,
            Layout::Dense => false,
            Layout::Sparse => true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Storage<T> {
    /// Row-major `n_rows * n_cols`.
    Dense(Vec<T>),
    /// Compressed rows; column indices ascending within a row, zeros omitted.
    Sparse {
        indptr: Vec<usize>,
        indices: Vec<u32>,
        values: Vec<T>,
    },
}

/// `n_query x n_train` nonnegative matrix tagged with its definition.
#[derive(Clone, Debug, PartialEq)]
pub struct ProximityMatrix<T = f64> {
    kind: ProximityKind,
    diagonal: DiagonalPolicy,
    symmetric: bool,
    /// Rows are the training rows themselves, so `(i, i)` is a diagonal.
    train_rows: bool,
    n_rows: usize,
    n_cols: usize,
    row_ids: Vec<usize>,
    storage: Storage<T>,
    flagged_rows: Vec<usize>,
    undefined_pairs: Vec<(usize, usize)>,
}

impl<T: Real> ProximityMatrix<T> {
    /// Builds a matrix row by row; `row(i)` must return `n_cols` values.
    pub(crate) fn assemble(
        n_rows: usize,
        n_cols: usize,
        layout: Layout,
        row: impl Fn(usize) -> Vec<T> + Sync,
    ) -> Storage<T> {
        if layout.sparse_for(n_rows) {
            let rows: Vec<(Vec<u32>, Vec<T>)> = (0..n_rows)
                .into_par_iter()
                .map(|i| {
                    let r = row(i);
                    debug_assert_eq!(r.len(), n_cols);
                    r.into_iter()
                        .enumerate()
                        .filter(|(_, v)| *v != T::zero())
                        .map(|(j, v)| (j as u32, v))
                        .unzip()
                })
                .collect();
            let mut indptr = Vec::with_capacity(n_rows + 1);
            indptr.push(0);
            let mut indices = Vec::new();
            let mut values = Vec::new();
            for (idx, val) in rows {
                indices.extend(idx);
                values.extend(val);
                indptr.push(indices.len());
            }
            Storage::Sparse {
                indptr,
                indices,
                values,
            }
        } else {
            let rows: Vec<Vec<T>> = (0..n_rows).into_par_iter().map(&row).collect();
            Storage::Dense(rows.into_iter().flatten().collect())
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_storage(
        kind: ProximityKind,
        diagonal: DiagonalPolicy,
        symmetric: bool,
        train_rows: bool,
        n_rows: usize,
        n_cols: usize,
        storage: Storage<T>,
        flagged_rows: Vec<usize>,
        undefined_pairs: Vec<(usize, usize)>,
    ) -> Self {
        Self {
            kind,
            diagonal,
            symmetric,
            train_rows,
            n_rows,
            n_cols,
            row_ids: (0..n_rows).collect(),
            storage,
            flagged_rows,
            undefined_pairs,
        }
    }

    /// Wraps explicit values, e.g. a matrix computed elsewhere. A square
    /// input is treated as training rows against themselves.
    pub fn from_rows(
        kind: ProximityKind,
        diagonal: DiagonalPolicy,
        rows: &[Vec<T>],
        layout: Layout,
    ) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::shape("ragged proximity rows"));
        }
        if rows.iter().flatten().any(|v| !(v.is_finite() && *v >= T::zero())) {
            return Err(Error::data("proximities must be finite and nonnegative"));
        }
        let storage = Self::assemble(n_rows, n_cols, layout, |i| rows[i].clone());
        let mut m = Self::from_storage(
            kind,
            diagonal,
            false,
            n_rows == n_cols,
            n_rows,
            n_cols,
            storage,
            Vec::new(),
            Vec::new(),
        );
        m.symmetric = m.is_square() && m.asymmetry_mse()? == T::zero();
        Ok(m)
    }

    pub fn kind(&self) -> ProximityKind {
        self.kind
    }

    pub fn diagonal(&self) -> DiagonalPolicy {
        self.diagonal
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Rows are training rows (so the matrix has a diagonal).
    pub fn is_train(&self) -> bool {
        self.train_rows
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse { .. })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// Dataset row behind each matrix row.
    pub fn row_ids(&self) -> &[usize] {
        &self.row_ids
    }

    pub fn set_row_ids(&mut self, ids: Vec<usize>) -> Result<()> {
        if ids.len() != self.n_rows {
            return Err(Error::shape(format!("{} row ids for {} rows", ids.len(), self.n_rows)));
        }
        self.row_ids = ids;
        Ok(())
    }

    /// Rows with no out-of-bag tree; their off-diagonal entries are zero.
    pub fn flagged_rows(&self) -> &[usize] {
        &self.flagged_rows
    }

    pub fn is_flagged(&self, row: usize) -> bool {
        self.flagged_rows.binary_search(&row).is_ok()
    }

    /// Out-of-bag pairs that are never out of bag together; stored as 0.
    pub fn undefined_pairs(&self) -> &[(usize, usize)] {
        &self.undefined_pairs
    }

    pub fn nnz(&self) -> usize {
        match &self.storage {
            Storage::Dense(v) => v.iter().filter(|x| **x != T::zero()).count(),
            Storage::Sparse { values, .. } => values.len(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        assert!(i < self.n_rows && j < self.n_cols, "index ({i}, {j}) out of bounds");
        match &self.storage {
            Storage::Dense(v) => v[i * self.n_cols + j],
            Storage::Sparse {
                indptr,
                indices,
                values,
            } => {
                let (a, b) = (indptr[i], indptr[i + 1]);
                match indices[a..b].binary_search(&(j as u32)) {
                    Ok(k) => values[a + k],
                    Err(_) => T::zero(),
                }
            }
        }
    }

    /// Calls `f(j, value)` for the nonzero entries of row `i`, by column.
    pub fn for_each_in_row(&self, i: usize, mut f: impl FnMut(usize, T)) {
        match &self.storage {
            Storage::Dense(v) => {
                for (j, &x) in v[i * self.n_cols..(i + 1) * self.n_cols].iter().enumerate() {
                    if x != T::zero() {
                        f(j, x);
                    }
                }
            }
            Storage::Sparse {
                indptr,
                indices,
                values,
            } => {
                for k in indptr[i]..indptr[i + 1] {
                    f(indices[k] as usize, values[k]);
                }
            }
        }
    }

    pub fn row_entries(&self, i: usize) -> Vec<(usize, T)> {
        let mut out = Vec::new();
        self.for_each_in_row(i, |j, v| out.push((j, v)));
        out
    }

    pub fn row_dense(&self, i: usize) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_cols];
        self.for_each_in_row(i, |j, v| out[j] = v);
        out
    }

    pub fn row_sum(&self, i: usize) -> T {
        let mut s = T::zero();
        self.for_each_in_row(i, |_, v| s += v);
        s
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        (0..self.n_rows).map(|i| self.row_dense(i)).collect()
    }

    /// Nonzero entries as `(row, col, value)`, row-major.
    pub fn triplets(&self) -> Vec<(usize, usize, T)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.n_rows {
            self.for_each_in_row(i, |j, v| out.push((i, j, v)));
        }
        out
    }

    pub fn with_layout(&self, layout: Layout) -> Self {
        let storage = Self::assemble(self.n_rows, self.n_cols, layout, |i| self.row_dense(i));
        Self {
            storage,
            ..self.clone()
        }
    }

    fn require_square(&self, what: &str) -> Result<()> {
        if !self.is_square() {
            return Err(Error::shape(format!(
                "{what} needs a square matrix, got {}x{}",
                self.n_rows, self.n_cols
            )));
        }
        Ok(())
    }

    /// `(p + p^T) / 2`, keeping kind, diagonal policy and layout.
    pub fn symmetrize(&self) -> Result<Self> {
        self.require_square("symmetrize")?;
        let half = T::of(0.5);
        let mut entries: Vec<(usize, usize, T)> = Vec::with_capacity(2 * self.nnz());
        for (i, j, v) in self.triplets() {
            entries.push((i, j, v * half));
            entries.push((j, i, v * half));
        }
        entries.sort_by_key(|a| (a.0, a.1));
        let merged = merge_sorted(entries);
        let n = self.n_rows;
        let storage = if self.is_sparse() {
            let mut indptr = vec![0usize; n + 1];
            let mut indices = Vec::with_capacity(merged.len());
            let mut values = Vec::with_capacity(merged.len());
            for &(i, j, v) in &merged {
                indptr[i + 1] += 1;
                indices.push(j as u32);
                values.push(v);
            }
            for i in 0..n {
                indptr[i + 1] += indptr[i];
            }
            Storage::Sparse {
                indptr,
                indices,
                values,
            }
        } else {
            let mut dense = vec![T::zero(); n * n];
            for (i, j, v) in merged {
                dense[i * n + j] = v;
            }
            Storage::Dense(dense)
        };
        Ok(Self {
            symmetric: true,
            storage,
            ..self.clone()
        })
    }

    /// Mean over all `(i, j)` of `(p(i,j) - p(j,i))^2`.
    pub fn asymmetry_mse(&self) -> Result<T> {
        self.require_square("asymmetry_mse")?;
        let mut entries: Vec<(usize, usize, T)> = Vec::with_capacity(2 * self.nnz());
        for (i, j, v) in self.triplets() {
            if i == j {
                continue;
            }
            // key each unordered pair by (min, max); sign marks orientation
            if i < j {
                entries.push((i, j, v));
            } else {
                entries.push((j, i, -v));
            }
        }
        entries.sort_by_key(|a| (a.0, a.1));
        let sum: T = merge_sorted(entries).into_iter().map(|(_, _, d)| d * d).sum();
        // each unordered pair appears twice in the full mean
        let n = T::of_usize(self.n_rows);
        Ok(T::of(2.0) * sum / (n * n))
    }
}

/// Sums values of equal `(row, col)` keys in a sorted triplet list.
fn merge_sorted<T: Real>(entries: Vec<(usize, usize, T)>) -> Vec<(usize, usize, T)> {
    let mut out: Vec<(usize, usize, T)> = Vec::with_capacity(entries.len());
    for (i, j, v) in entries {
        match out.last_mut() {
            Some(last) if last.0 == i && last.1 == j => last.2 += v,
            _ => out.push((i, j, v)),
        }
    }
    out
}

pub fn symmetrize<T: Real>(p: &ProximityMatrix<T>) -> Result<ProximityMatrix<T>> {
    p.symmetrize()
}

pub fn asymmetry_mse<T: Real>(p: &ProximityMatrix<T>) -> Result<T> {
    p.asymmetry_mse()
}
