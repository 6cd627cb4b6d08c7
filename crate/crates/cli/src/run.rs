use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rfgap::apps::{impute, mds_embed, outlier_scores};
use rfgap::data::{load_csv, remove_mcar, split, write_csv, SchemaSource};
use rfgap::experiment::{run_dataset, write_results_csv, ExperimentConfig};
use rfgap::prediction::{equivalence_report, SplitPart};
use rfgap::proximity::{proximities, query_proximities};
use rfgap::{
    Dataset, DiagonalPolicy, Error, Forest, ForestParams, MissingnessRecord, Prediction, PredictionReport,
    ProximityKind, Task,
};
use serde::Serialize;

use crate::args::{
    kinds_or_all, CheckArgs, DataArgs, EmbedArgs, ExperimentArgs, ForestArgs, ImputeArgs, Job, OutlierArgs,
    ProxArgs, TrainArgs,
};
use crate::Usage;

pub const MAX_ITERATIONS: usize = 10;

/// Files written into one output directory, in creation order.
pub struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    pub fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.path(name);
        let file = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
        Ok(BufWriter::new(file))
    }

    pub fn json<S: Serialize>(&mut self, name: &str, value: &S) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    pub fn into_files(self) -> Vec<String> {
        self.files
    }
}

fn load(data: &DataArgs) -> Result<Dataset> {
    let schema = data.schema_source()?;
    load_csv(&data.input, &schema).with_context(|| format!("loading {}", data.input.display()))
}

fn forest_for(ds: &Dataset, path: Option<&Path>, args: &ForestArgs) -> Result<Forest> {
    match path {
        Some(p) => {
            let f = Forest::load(p).with_context(|| format!("loading forest {}", p.display()))?;
            f.check_training(ds)?;
            Ok(f)
        }
        None => Ok(Forest::fit(ds, &args.params())?),
    }
}

/// Runs `job`, writing into its output directory; returns the file names.
pub fn dispatch(job: &Job) -> Result<Vec<String>> {
    match job {
        Job::Train(a) => train(a),
        Job::Prox(a) => prox(a),
        Job::PredictCheck(a) => predict_check(a),
        Job::Impute(a) => impute_cmd(a),
        Job::Outliers(a) => outliers(a),
        Job::Embed(a) => embed(a),
        Job::Experiment(a) => experiment(a),
        Job::Rerun(_) => Err(Usage("a sidecar cannot record another rerun".into()).into()),
    }
}

#[derive(Serialize)]
struct TrainReport {
    dataset: String,
    task: Task,
    n_rows: usize,
    n_features: usize,
    seed: u64,
    params: ForestParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    oob_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oob_mse: Option<f64>,
    /// Rows that were in bag in every tree.
    rows_without_oob_trees: usize,
}

fn train(a: &TrainArgs) -> Result<Vec<String>> {
    let ds = load(&a.data)?;
    let f = Forest::fit(&ds, &a.forest.params())?;
    let mut out = Output::new(&a.out)?;
    f.save(out.path("forest.jsonl"))?;
    let oob = f.oob_predict(&ds)?;
    let err = oob.error(ds.response());
    let classification = ds.task() == Task::Classification;
    let report = TrainReport {
        dataset: a.data.name(),
        task: ds.task(),
        n_rows: ds.n_rows(),
        n_features: ds.n_features(),
        seed: f.params().seed,
        params: f.params().clone(),
        oob_error: err.filter(|_| classification),
        oob_mse: err.filter(|_| !classification),
        rows_without_oob_trees: oob.len() - oob.n_defined(),
    };
    out.json("report.json", &report)?;
    match err {
        Some(e) if classification => println!("oob error {e:.6} ({} rows, {} trees)", ds.n_rows(), f.n_trees()),
        Some(e) => println!("oob mse {e:.6} ({} rows, {} trees)", ds.n_rows(), f.n_trees()),
        None => println!("no out-of-bag predictions"),
    }
    Ok(out.into_files())
}

fn default_diagonal(kind: ProximityKind) -> DiagonalPolicy {
    match kind {
        ProximityKind::Gap => DiagonalPolicy::Zeroed,
        _ => DiagonalPolicy::Identity,
    }
}

fn prox(a: &ProxArgs) -> Result<Vec<String>> {
    let ds = load(&a.data)?;
    let f = forest_for(&ds, a.forest.as_deref(), &a.forest_args)?;
    let layout = a.layout.layout();
    let p = match &a.query {
        Some(q) => {
            let schema = SchemaSource::Explicit(ds.schema());
            let qd: Dataset = load_csv(q, &schema).with_context(|| format!("loading {}", q.display()))?;
            query_proximities(&f, &ds, &qd.feature_rows(), a.kind, layout)?
        }
        None => {
            let diagonal = a.diagonal.unwrap_or_else(|| default_diagonal(a.kind));
            let p = proximities(&f, &ds, a.kind, diagonal, layout)?;
            if a.symmetrize {
                p.symmetrize()?
            } else {
                p
            }
        }
    };
    let mut out = Output::new(&a.out)?;
    let mut w = out.create("proximity.csv")?;
    if a.layout.dense {
        p.write_dense_csv(&mut w)?;
    } else {
        p.write_triplets_csv(&mut w)?;
    }
    w.flush()?;
    out.json("proximity.json", &p.info())?;
    Ok(out.into_files())
}

fn label(ds: &Dataset, p: &Option<Prediction<f64>>) -> String {
    match p {
        None => String::new(),
        Some(Prediction::Class(c)) => ds
            .class_levels()
            .and_then(|l| l.get(*c as usize).cloned())
            .unwrap_or_else(|| c.to_string()),
        Some(Prediction::Value(v)) => v.to_string(),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn predict_check(a: &CheckArgs) -> Result<Vec<String>> {
    let ds = load(&a.data)?;
    let seed = a.forest_args.seed;
    let kinds = kinds_or_all(&a.kind);
    let (train, test, train_ids, test_ids) = match a.split {
        Some(s) => {
            let (tr, te) = split::train_test_indices(&ds, s, seed)?;
            (ds.take_rows(&tr)?, Some(ds.take_rows(&te)?), tr, te)
        }
        None => (ds.clone(), None, (0..ds.n_rows()).collect(), Vec::new()),
    };
    let f = forest_for(&train, a.forest.as_deref(), &a.forest_args)?;
    let name = a.data.name();

    let mut out = Output::new(&a.out)?;
    let mut summary = csv::Writer::from_writer(out.create("summary.csv")?);
    let mut header: Vec<&str> = PredictionReport::<f64>::CSV_HEADER.to_vec();
    header.extend(["n_compared", "n_mismatch", "max_abs_diff", "proximity_error", "forest_error"]);
    summary.write_record(&header)?;
    let mut rows = csv::Writer::from_writer(out.create("rows.csv")?);
    rows.write_record(["kind", "split", "row_id", "weighted", "forest", "tied", "forest_tied", "mismatch"])?;

    for kind in kinds {
        let mut parts: Vec<(Option<&Dataset>, &[usize])> = vec![(None, &train_ids)];
        if let Some(te) = &test {
            parts.push((Some(te), &test_ids));
        }
        for (part, ids) in parts {
            let r = equivalence_report(&f, &train, kind, part)?;
            let mut rec = r.csv_record(&name, seed);
            rec.extend([
                r.n_compared.to_string(),
                r.n_mismatch().to_string(),
                opt(r.max_abs_diff),
                opt(r.proximity_error),
                opt(r.forest_error),
            ]);
            summary.write_record(&rec)?;
            for d in &r.rows {
                rows.write_record([
                    kind.to_string(),
                    r.split.as_str().to_string(),
                    ids[d.row].to_string(),
                    label(&ds, &d.predicted),
                    label(&ds, &d.forest),
                    u8::from(d.tied).to_string(),
                    u8::from(d.forest_tied).to_string(),
                    u8::from(d.mismatch).to_string(),
                ])?;
            }
            if r.split == SplitPart::Train && r.kind == ProximityKind::Gap && r.n_mismatch() > 0 {
                log::warn!("{name}: GAP disagrees with the forest on {} rows", r.n_mismatch());
            }
        }
    }
    summary.flush()?;
    rows.flush()?;
    drop((summary, rows));
    Ok(out.into_files())
}

fn impute_cmd(a: &ImputeArgs) -> Result<Vec<String>> {
    if a.iterations == 0 || a.iterations > MAX_ITERATIONS {
        return Err(Usage(format!("--iterations must be in 1..={MAX_ITERATIONS}")).into());
    }
    let ds = load(&a.data)?;
    let seed = a.forest_args.seed;
    let (masked, record) = match a.mcar {
        Some(fraction) => remove_mcar(&ds, fraction, seed)?,
        None => {
            if !ds.has_missing_features() {
                return Err(Usage("input has no missing feature cells; pass --mcar to mask some".into()).into());
            }
            (ds.clone(), MissingnessRecord::empty())
        }
    };
    let params = a.forest_args.params();
    let kinds = kinds_or_all(&a.kind);
    let scored = !record.is_empty();

    let mut out = Output::new(&a.out)?;
    let mut mse = csv::Writer::from_writer(out.create("mse.csv")?);
    mse.write_record(["kind", "fraction", "seed", "iterations", "cells", "initial_mse", "mse"])?;
    let mut trace = out.create("trace.csv")?;
    for (k, &kind) in kinds.iter().enumerate() {
        let res = impute(&masked, &record, kind, &params, a.iterations)?;
        mse.write_record([
            kind.to_string(),
            opt(a.mcar),
            seed.to_string(),
            a.iterations.to_string(),
            masked.n_missing().to_string(),
            if scored { res.trace[0].to_string() } else { String::new() },
            if scored { res.final_mse().to_string() } else { String::new() },
        ])?;
        res.write_trace_csv(seed, k == 0, &mut trace)?;
        let mut w = out.create(&format!("imputed_{kind}.csv"))?;
        write_csv(&res.imputed, &mut w)?;
        w.flush()?;
    }
    mse.flush()?;
    trace.flush()?;
    Ok(out.into_files())
}

fn application_matrix(
    data: &DataArgs,
    forest: Option<&Path>,
    forest_args: &ForestArgs,
    kind: ProximityKind,
) -> Result<(Dataset, rfgap::ProximityMatrix)> {
    let ds = load(data)?;
    let f = forest_for(&ds, forest, forest_args)?;
    let p = proximities(&f, &ds, kind, DiagonalPolicy::DuplicateOob, rfgap::Layout::Auto)?.symmetrize()?;
    Ok((ds, p))
}

fn outliers(a: &OutlierArgs) -> Result<Vec<String>> {
    let (ds, p) = application_matrix(&a.data, a.forest.as_deref(), &a.forest_args, a.kind)?;
    let y = ds
        .class_codes()
        .ok_or_else(|| Error::Data("outlier scores need a class target".into()))?;
    let res = outlier_scores(&p, y)?;
    let mut out = Output::new(&a.out)?;
    let mut w = out.create("outliers.csv")?;
    res.write_csv(&mut w)?;
    w.flush()?;
    Ok(out.into_files())
}

#[derive(Serialize)]
struct EmbeddingInfo<'a> {
    kind: ProximityKind,
    requested_dims: usize,
    n_dims: usize,
    eigenvalues: &'a [f64],
    stress: f64,
    warning: &'a Option<String>,
}

fn embed(a: &EmbedArgs) -> Result<Vec<String>> {
    let (_, p) = application_matrix(&a.data, a.forest.as_deref(), &a.forest_args, a.kind)?;
    let e = mds_embed(&p, a.dims)?;
    let mut out = Output::new(&a.out)?;
    let mut w = out.create("embedding.csv")?;
    e.write_csv(&mut w)?;
    w.flush()?;
    out.json(
        "embedding.json",
        &EmbeddingInfo {
            kind: a.kind,
            requested_dims: e.requested_dims,
            n_dims: e.n_dims(),
            eigenvalues: &e.eigenvalues,
            stress: e.stress,
            warning: &e.warning,
        },
    )?;
    Ok(out.into_files())
}

#[derive(Serialize)]
struct ExperimentSummary {
    datasets: Vec<String>,
    failures: Vec<(String, String)>,
    rows: usize,
}

pub fn manifest_paths(manifest: &Path) -> Result<Vec<PathBuf>> {
    let text = fs::read_to_string(manifest).map_err(|e| Error::Io {
        path: manifest.to_path_buf(),
        source: e,
    })?;
    let base = manifest.parent().unwrap_or(Path::new(""));
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let p = Path::new(l);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        })
        .collect())
}

fn experiment(a: &ExperimentArgs) -> Result<Vec<String>> {
    if a.seeds == 0 {
        return Err(Usage("--seeds must be at least 1".into()).into());
    }
    let base = a.forest_args.seed;
    let config = ExperimentConfig {
        kinds: kinds_or_all(&a.kind),
        seeds: (base..base + a.seeds).collect(),
        split: a.split,
        params: a.forest_args.params(),
        node_size_sweep: a.node_size_sweep,
        tree_count_sweep: a.tree_count_sweep,
    };
    let paths = manifest_paths(&a.manifest)?;
    if paths.is_empty() {
        return Err(Usage(format!("manifest {} lists no datasets", a.manifest.display())).into());
    }
    let mut rows = Vec::new();
    let mut summary = ExperimentSummary {
        datasets: Vec::new(),
        failures: Vec::new(),
        rows: 0,
    };
    for path in &paths {
        let name = path
            .file_stem()
            .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        let result = load_csv::<f64>(path, &SchemaSource::default())
            .and_then(|ds| run_dataset(&name, &ds, &config));
        match result {
            Ok(r) => {
                log::info!("{name}: {} rows of results", r.len());
                rows.extend(r);
                summary.datasets.push(name);
            }
            Err(e) => {
                log::error!("{}: {e}", path.display());
                summary.failures.push((path.display().to_string(), e.to_string()));
            }
        }
    }
    if summary.datasets.is_empty() {
        return Err(Error::Data("every dataset in the manifest failed".into()).into());
    }
    summary.rows = rows.len();
    let mut out = Output::new(&a.out)?;
    let w = out.create("results.csv")?;
    write_results_csv(&rows, w)?;
    out.json("experiment.json", &summary)?;
    Ok(out.into_files())
}
