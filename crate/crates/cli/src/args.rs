use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rfgap::data::SchemaSource;
use rfgap::{DiagonalPolicy, ForestParams, Layout, ProximityKind};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "rfgap", version, about = "Random-forest proximities and their applications")]
pub struct Cli {
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub job: Job,
}

#[derive(Subcommand, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Job {
    /// Train a forest and report its out-of-bag error.
    Train(TrainArgs),
    /// Write a proximity matrix.
    Prox(ProxArgs),
    /// Compare proximity-weighted predictions with the forest's own.
    PredictCheck(CheckArgs),
    /// Mask cells at random and impute them with each proximity kind.
    Impute(ImputeArgs),
    /// Within-class outlier scores.
    Outliers(OutlierArgs),
    /// Classical MDS of `sqrt(1 - proximity)`.
    Embed(EmbedArgs),
    /// Split/train/compare runs over a list of datasets.
    Experiment(ExperimentArgs),
    /// Repeat the job recorded in a run sidecar.
    Rerun(RerunArgs),
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Schema file, one `name,kind,role` line per column.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Target column when the schema is inferred (default: last column).
    #[arg(long, conflicts_with = "schema")]
    pub target: Option<String>,
}

impl DataArgs {
    pub fn schema_source(&self) -> rfgap::Result<SchemaSource> {
        Ok(match &self.schema {
            Some(path) => SchemaSource::Explicit(rfgap::data::load_schema_file(path)?),
            None => SchemaSource::Infer {
                target: self.target.clone(),
            },
        })
    }

    pub fn name(&self) -> String {
        self.input
            .file_stem()
            .map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned())
    }
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestArgs {
    #[arg(long, default_value_t = 500)]
    pub trees: usize,
    /// Features tried per split (default: sqrt(d) or d/3).
    #[arg(long)]
    pub mtry: Option<usize>,
    /// Nodes at or below this in-bag weight are leaves (default: 1 or 5).
    #[arg(long)]
    pub min_node_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl ForestArgs {
    pub fn params(&self) -> ForestParams {
        ForestParams {
            n_trees: self.trees,
            mtry: self.mtry,
            min_node_size: self.min_node_size,
            task: None,
            seed: self.seed,
        }
    }
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutArgs {
    /// Compressed sparse storage; proximities are written as `i,j,value`.
    #[arg(long, conflicts_with = "dense")]
    pub sparse: bool,
    /// Dense storage; proximities are written as a full matrix.
    #[arg(long)]
    pub dense: bool,
}

impl LayoutArgs {
    pub fn layout(&self) -> Layout {
        match (self.sparse, self.dense) {
            (true, _) => Layout::Sparse,
            (_, true) => Layout::Dense,
            _ => Layout::Auto,
        }
    }
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub forest: ForestArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProxArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Trained forest; one is grown from the forest flags when omitted.
    #[arg(long)]
    pub forest: Option<PathBuf>,
    #[command(flatten)]
    pub forest_args: ForestArgs,
    #[arg(long, default_value = "gap")]
    pub kind: ProximityKind,
    /// zeroed, duplicate-oob or identity (default: zeroed for GAP, identity
    /// otherwise).
    #[arg(long)]
    pub diagonal: Option<DiagonalPolicy>,
    /// Average the matrix with its transpose.
    #[arg(long)]
    pub symmetrize: bool,
    /// Rows to place against the training rows instead of the training rows
    /// themselves; same columns as the input.
    #[arg(long, conflicts_with_all = ["diagonal", "symmetrize"])]
    pub query: Option<PathBuf>,
    #[command(flatten)]
    pub layout: LayoutArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, conflicts_with = "split")]
    pub forest: Option<PathBuf>,
    #[command(flatten)]
    pub forest_args: ForestArgs,
    /// Proximity kinds, comma separated (default: all).
    #[arg(long, value_delimiter = ',')]
    pub kind: Vec<ProximityKind>,
    /// Training share; when given the data is split and both parts are
    /// checked.
    #[arg(long)]
    pub split: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImputeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub forest_args: ForestArgs,
    #[arg(long, value_delimiter = ',')]
    pub kind: Vec<ProximityKind>,
    /// Share of feature cells to mask before imputing; without it the
    /// cells already missing in the input are imputed and no MSE is known.
    #[arg(long)]
    pub mcar: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub iterations: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutlierArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub forest: Option<PathBuf>,
    #[command(flatten)]
    pub forest_args: ForestArgs,
    #[arg(long, default_value = "gap")]
    pub kind: ProximityKind,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbedArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub forest: Option<PathBuf>,
    #[command(flatten)]
    pub forest_args: ForestArgs,
    #[arg(long, default_value = "gap")]
    pub kind: ProximityKind,
    #[arg(long, default_value_t = 2)]
    pub dims: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentArgs {
    /// One dataset CSV per line; relative paths resolve against the
    /// manifest's directory. The last column is the target.
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub forest_args: ForestArgs,
    /// Number of seeds, starting at `--seed`.
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0.7)]
    pub split: f64,
    #[arg(long, value_delimiter = ',')]
    pub kind: Vec<ProximityKind>,
    /// Add GAP runs over minimum node sizes 1, 5, 10, 20, 50.
    #[arg(long)]
    pub node_size_sweep: bool,
    /// Add GAP runs over 5, 10, 50, 100, 250, 500 trees.
    #[arg(long)]
    pub tree_count_sweep: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RerunArgs {
    /// `run.json` written by an earlier command.
    #[arg(long)]
    pub sidecar: PathBuf,
    /// Write to this directory instead of the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Job {
    pub fn out_mut(&mut self) -> Option<&mut PathBuf> {
        Some(match self {
            Job::Train(a) => &mut a.out,
            Job::Prox(a) => &mut a.out,
            Job::PredictCheck(a) => &mut a.out,
            Job::Impute(a) => &mut a.out,
            Job::Outliers(a) => &mut a.out,
            Job::Embed(a) => &mut a.out,
            Job::Experiment(a) => &mut a.out,
            Job::Rerun(_) => return None,
        })
    }
}

/// `kinds`, or every kind when empty.
pub fn kinds_or_all(kinds: &[ProximityKind]) -> Vec<ProximityKind> {
    if kinds.is_empty() {
        ProximityKind::ALL.to_vec()
    } else {
        kinds.to_vec()
    }
}
