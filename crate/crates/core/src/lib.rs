//! Random-forest proximities and the applications built on them.
//!
//! A trained [`Forest`] keeps, for every tree, the bootstrap multiplicity of
//! each training row. From that record three proximity definitions can be
//! computed ([`ProximityKind`]): the original co-occurrence proximity, the
//! out-of-bag variant, and the geometry- and accuracy-preserving (GAP)
//! proximity whose weighted predictions reproduce the forest's out-of-bag
//! predictions exactly. The [`apps`] module uses those matrices for
//! imputation, within-class outlier scores and MDS embeddings.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the plain
//! type names default to `f64` and `*32` aliases are provided below.

#![allow(clippy::needless_range_loop)]

pub mod apps;
pub mod data;
pub mod error;
pub mod experiment;
pub mod forest;
pub mod prediction;
pub mod proximity;
pub mod rng;
pub mod scalar;

pub use apps::{Embedding, ImputationRunResult, OutlierResult};
pub use data::{ColumnKind, ColumnRole, ColumnSchema, Dataset, MissingnessRecord, Task};
pub use error::{Error, Result};
pub use forest::{BootstrapRecord, Forest, ForestParams, Prediction, PredictionSet, Tree};
pub use prediction::PredictionReport;
pub use proximity::{DiagonalPolicy, Layout, ProximityKind, ProximityMatrix};
pub use scalar::Real;

pub type Dataset32 = Dataset<f32>;
pub type Forest32 = Forest<f32>;
pub type Tree32 = Tree<f32>;
pub type ProximityMatrix32 = ProximityMatrix<f32>;
pub type Embedding32 = Embedding<f32>;
pub type OutlierResult32 = OutlierResult<f32>;
