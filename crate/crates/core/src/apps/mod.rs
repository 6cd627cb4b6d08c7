//! Applications of proximities: imputation, outlier scores, embeddings.

mod impute;
mod mds;
mod outliers;

pub use impute::{impute, imputation_mse, proximity_fill, ImputationRunResult};
pub use mds::{classical_mds, mds_embed, Embedding};
pub use outliers::{outlier_scores, OutlierResult};
