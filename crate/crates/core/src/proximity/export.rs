use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{DiagonalPolicy, ProximityKind, ProximityMatrix};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Description written next to an exported matrix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProximityInfo {
    pub kind: ProximityKind,
    pub diagonal: DiagonalPolicy,
    pub symmetric: bool,
    pub train_rows: bool,
    pub n_rows: usize,
    pub n_cols: usize,
    pub layout: String,
    pub nnz: usize,
    pub flagged_rows: Vec<usize>,
    pub n_undefined_pairs: usize,
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<proximity export>", e)
}

impl<T: Real> ProximityMatrix<T> {
    pub fn info(&self) -> ProximityInfo {
        ProximityInfo {
            kind: self.kind(),
            diagonal: self.diagonal(),
            symmetric: self.is_symmetric(),
            train_rows: self.is_train(),
            n_rows: self.n_rows(),
            n_cols: self.n_cols(),
            layout: if self.is_sparse() { "sparse" } else { "dense" }.to_string(),
            nnz: self.nnz(),
            flagged_rows: self.flagged_rows().to_vec(),
            n_undefined_pairs: self.undefined_pairs().len(),
        }
    }

    /// Full matrix; the header lists the training row ids.
    pub fn write_dense_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["row_id".to_string()];
        header.extend((0..self.n_cols()).map(|j| j.to_string()));
        w.write_record(&header)?;
        for i in 0..self.n_rows() {
            let mut rec = vec![self.row_ids()[i].to_string()];
            rec.extend(self.row_dense(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(io_err)
    }

    /// Nonzero entries as `i,j,value` with `i` the dataset row id.
    pub fn write_triplets_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["i", "j", "value"])?;
        for (i, j, v) in self.triplets() {
            w.write_record([self.row_ids()[i].to_string(), j.to_string(), v.to_string()])?;
        }
        w.flush().map_err(io_err)
    }
}
