use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{initialize_impute, ColumnValues, Dataset, MissingnessRecord, UnitScaling};
use crate::error::{Error, Result};
use crate::forest::{fit_forest, ForestParams};
use crate::prediction::tolerant_argmax;
use crate::proximity::{proximities, DiagonalPolicy, Layout, ProximityKind, ProximityMatrix};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImputationRunResult<T: Real = f64> {
    /// MSE over the recorded cells in unit-scaled space; entry 0 is the
    /// median/mode fill, entry `k` the state after iteration `k`.
    pub trace: Vec<f64>,
    #[serde(skip)]
    pub imputed: Dataset<T>,
    pub iterations: usize,
    pub kind: ProximityKind,
}

impl<T: Real> ImputationRunResult<T> {
    pub fn final_mse(&self) -> f64 {
        *self.trace.last().expect("trace has the initial entry")
    }

    /// Rows of `iteration,kind,seed,mse`.
    pub fn write_trace_csv<W: Write>(&self, seed: u64, header: bool, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        if header {
            w.write_record(["iteration", "kind", "seed", "mse"])?;
        }
        for (it, mse) in self.trace.iter().enumerate() {
            w.write_record([it.to_string(), self.kind.to_string(), seed.to_string(), mse.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<trace>", e))
    }
}

/// Mean squared error over the recorded cells after scaling each numeric
/// feature with `scaling`; a categorical cell contributes 0 or 1.
pub fn imputation_mse<T: Real>(ds: &Dataset<T>, record: &MissingnessRecord<T>, scaling: &UnitScaling<T>) -> f64 {
    if record.is_empty() {
        return 0.0;
    }
    let total: f64 = record
        .cells
        .iter()
        .zip(&record.original)
        .map(|(&(r, f), &orig)| {
            let got = ds.value(r, f);
            match scaling.params[f] {
                Some(_) => (scaling.forward(f, got) - scaling.forward(f, orig)).as_f64().powi(2),
                None => f64::from(u8::from(got != orig)),
            }
        })
        .sum();
    total / record.len() as f64
}

/// One proximity-weighted pass: every cell of `mask` is replaced using the
/// rows observed in that column as donors, weights renormalized over those
/// donors. Numeric cells take the weighted mean, categorical cells the
/// weighted majority (ties to the smallest code). A cell whose donors carry
/// no weight keeps its current value.
pub fn proximity_fill<T: Real>(current: &Dataset<T>, mask: &[Vec<bool>], p: &ProximityMatrix<T>) -> Result<Dataset<T>> {
    let n = current.n_rows();
    if p.n_rows() != n || p.n_cols() != n {
        return Err(Error::shape("proximity matrix does not cover the dataset rows"));
    }
    if mask.len() != current.n_features() || mask.iter().any(|m| m.len() != n) {
        return Err(Error::shape("missing mask does not match the dataset"));
    }
    let rows_with_missing: Vec<usize> = (0..n).filter(|&i| mask.iter().any(|m| m[i])).collect();
    let updates: Vec<Vec<(usize, usize, T)>> = rows_with_missing
        .par_iter()
        .map(|&i| {
            let entries = p.row_entries(i);
            let mut out = Vec::new();
            for (f, m) in mask.iter().enumerate() {
                if !m[i] {
                    continue;
                }
                let donors = entries.iter().filter(|&&(j, _)| j != i && !m[j]);
                let value = match &current.feature_column(f).values {
                    ColumnValues::Numeric(x) => {
                        let (mut s, mut w) = (T::zero(), T::zero());
                        for &(j, v) in donors {
                            s += v * x[j];
                            w += v;
                        }
                        (w > T::zero()).then(|| s / w)
                    }
                    ColumnValues::Categorical { codes, levels } => {
                        let mut votes = vec![T::zero(); levels.len()];
                        let mut w = T::zero();
                        for &(j, v) in donors {
                            votes[codes[j] as usize] += v;
                            w += v;
                        }
                        (w > T::zero()).then(|| {
                            let (k, _) = tolerant_argmax(&votes, T::tie_tolerance() * w);
                            T::of_usize(k)
                        })
                    }
                };
                if let Some(v) = value {
                    out.push((i, f, v));
                }
            }
            out
        })
        .collect();
    let mut next = current.clone();
    for (i, f, v) in updates.into_iter().flatten() {
        next.set_value(i, f, v);
    }
    Ok(next)
}

/// Iterative proximity imputation.
///
/// Starts from the in-class median/mode fill, then per iteration grows a
/// forest on the current data, builds symmetrized `kind` proximities with
/// duplicate-row diagonals, and refills every originally missing cell from
/// originally observed donors. The forest seed for iteration `k` is
/// `params.seed + k`.
pub fn impute<T: Real>(
    ds: &Dataset<T>,
    record: &MissingnessRecord<T>,
    kind: ProximityKind,
    params: &ForestParams,
    iterations: usize,
) -> Result<ImputationRunResult<T>> {
    if iterations == 0 {
        return Err(Error::param("iterations must be at least 1"));
    }
    let mask = ds.missing_mask();
    let n_masked: usize = mask.iter().map(|m| m.iter().filter(|&&x| x).count()).sum();
    if record.cells.len() != record.original.len() {
        return Err(Error::shape("missingness record has unequal cell and value lists"));
    }
    if let Some(&(r, f)) = record
        .cells
        .iter()
        .find(|&&(r, f)| f >= ds.n_features() || r >= ds.n_rows() || !mask[f][r])
    {
        return Err(Error::data(format!("recorded cell ({r}, {f}) is not missing")));
    }
    if n_masked == 0 {
        return Ok(ImputationRunResult {
            trace: vec![0.0; iterations + 1],
            imputed: ds.clone(),
            iterations,
            kind,
        });
    }
    for (f, m) in mask.iter().enumerate() {
        if m.iter().all(|&x| x) {
            return Err(Error::data(format!("feature '{}' has no observed donors", ds.feature_name(f))));
        }
    }

    // scale on the complete data: observed cells plus the recorded originals
    let mut complete = ds.clone();
    for (&(r, f), &v) in record.cells.iter().zip(&record.original) {
        complete.set_value(r, f, v);
    }
    let scaling = UnitScaling::fit(&complete)?;

    let mut current = initialize_impute(ds)?;
    let mut trace = vec![imputation_mse(&current, record, &scaling)];
    for it in 0..iterations {
        let mut p = params.clone();
        p.seed = params.seed.wrapping_add(it as u64);
        let forest = fit_forest(&current, &p)?;
        let prox = proximities(&forest, &current, kind, DiagonalPolicy::DuplicateOob, Layout::Auto)?.symmetrize()?;
        let mut next = proximity_fill(&current, &mask, &prox)?;
        next.set_filled_mask(Some(mask.clone()));
        current = next;
        trace.push(imputation_mse(&current, record, &scaling));
        log::debug!("imputation iteration {} ({kind}): mse {}", it + 1, trace[it + 1]);
    }
    Ok(ImputationRunResult {
        trace,
        imputed: current,
        iterations,
        kind,
    })
}
