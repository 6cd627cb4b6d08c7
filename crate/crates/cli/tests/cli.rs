use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(format!("{name}.csv"))
}

fn rfgap(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rfgap"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], out: &Path) {
    let o = rfgap(args, out);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn code(args: &[&str], out: &Path) -> i32 {
    rfgap(args, out).status.code().expect("exit code")
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn train_reports_iris_oob_error_and_params() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["train", "--input", s(&data("iris")), "--seed", "1"], tmp.path());
    let report = json(&tmp.path().join("report.json"));
    let err = report["oob_error"].as_f64().unwrap();
    assert!(err > 0.0 && err < 0.12, "{err}");
    assert!(report.get("oob_mse").is_none());
    assert_eq!(report["seed"], 1);
    assert_eq!(report["params"]["n_trees"], 500);
    assert_eq!(report["params"]["mtry"], 2);
    let side = json(&tmp.path().join("run.json"));
    assert_eq!(side["job"]["command"], "train");
    assert_eq!(side["outputs"], serde_json::json!(["forest.jsonl", "report.json"]));
}

#[test]
fn regression_training_reports_mse() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["train", "--input", s(&data("auto_mpg")), "--trees", "50"], tmp.path());
    let report = json(&tmp.path().join("report.json"));
    assert!(report["oob_mse"].as_f64().unwrap() > 0.0);
    assert_eq!(report["params"]["min_node_size"], 5);
}

#[test]
fn forest_file_is_identical_across_runs_and_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let iris = data("iris");
    let mut files = Vec::new();
    for (k, threads) in ["1", "4", "4"].iter().enumerate() {
        let out = tmp.path().join(k.to_string());
        ok(&["train", "--input", s(&iris), "--trees", "80", "--threads", threads], &out);
        files.push(fs::read(out.join("forest.jsonl")).unwrap());
    }
    assert_eq!(files[0], files[1]);
    assert_eq!(files[1], files[2]);
}

#[test]
fn exit_codes_follow_the_failure_class() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    let iris = data("iris");
    let iris = s(&iris);
    assert_eq!(code(&["train", "--input", iris, "--trees", "0"], out), 2);
    assert_eq!(code(&["train", "--input", iris, "--mtry", "9"], out), 2);
    assert_eq!(code(&["train", "--input", iris, "--threads", "0"], out), 2);
    assert_eq!(code(&["prox", "--input", iris, "--kind", "cosine"], out), 2);
    assert_eq!(code(&["train", "--input", iris, "--unknown"], out), 2);
    assert_eq!(code(&["impute", "--input", iris, "--iterations", "11", "--mcar", "0.1"], out), 2);
    assert_eq!(code(&["impute", "--input", iris, "--mcar", "1.5"], out), 2);
    assert_eq!(code(&["impute", "--input", iris], out), 2);
    assert_eq!(code(&["train", "--input", "/does/not/exist.csv"], out), 3);
    assert_eq!(code(&["train", "--input", iris, "--target", "nope"], out), 3);
    assert_eq!(
        code(&["outliers", "--input", s(&data("auto_mpg")), "--trees", "20"], out),
        3
    );

    let junk = tmp.path().join("junk.json");
    fs::write(&junk, "{\"tool\": \"something else\"}").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_rfgap"))
        .args(["rerun", "--sidecar", s(&junk)])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn forest_from_another_dataset_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let trained = tmp.path().join("t");
    ok(&["train", "--input", s(&data("iris")), "--trees", "10"], &trained);
    let forest = trained.join("forest.jsonl");
    let o = rfgap(
        &["prox", "--input", s(&data("wine")), "--forest", s(&forest)],
        &tmp.path().join("p"),
    );
    assert_eq!(o.status.code(), Some(3));
}

fn row_sums(path: &Path, n: usize) -> Vec<f64> {
    let mut sums = vec![0.0; n];
    for r in csv_rows(path) {
        let i: usize = r[0].parse().unwrap();
        let j: usize = r[1].parse().unwrap();
        let v: f64 = r[2].parse().unwrap();
        assert!(j < 150 && v > 0.0);
        sums[i] += v;
    }
    sums
}

#[test]
fn gap_triplets_on_iris_have_unit_rows() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["prox", "--input", s(&data("iris")), "--kind", "gap"], tmp.path());
    let info = json(&tmp.path().join("proximity.json"));
    assert_eq!(info["n_rows"], 150);
    assert_eq!(info["n_cols"], 150);
    assert_eq!(info["diagonal"], "zeroed");
    for s in row_sums(&tmp.path().join("proximity.csv"), 150) {
        assert!((s - 1.0).abs() < 1e-10, "{s}");
    }
}

#[test]
fn query_rows_are_placed_against_training_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(data("iris")).unwrap();
    let query: String = text.lines().take(11).map(|l| format!("{l}\n")).collect();
    let qpath = tmp.path().join("query.csv");
    fs::write(&qpath, query).unwrap();
    let out = tmp.path().join("q");
    ok(
        &["prox", "--input", s(&data("iris")), "--trees", "50", "--query", s(&qpath)],
        &out,
    );
    let info = json(&out.join("proximity.json"));
    assert_eq!(info["n_rows"], 10);
    assert_eq!(info["train_rows"], false);
    for s in row_sums(&out.join("proximity.csv"), 10) {
        assert!((s - 1.0).abs() < 1e-10, "{s}");
    }
}

#[test]
fn dense_symmetrized_matrix_is_symmetric() {
    let tmp = tempfile::tempdir().unwrap();
    ok(
        &[
            "prox", "--input", s(&data("iris")), "--trees", "40", "--dense", "--symmetrize", "--diagonal",
            "duplicate-oob",
        ],
        tmp.path(),
    );
    let rows = csv_rows(&tmp.path().join("proximity.csv"));
    assert_eq!(rows.len(), 150);
    let m: Vec<Vec<f64>> = rows.iter().map(|r| r[1..].iter().map(|v| v.parse().unwrap()).collect()).collect();
    for (i, row) in m.iter().enumerate() {
        assert_eq!(row.len(), 150);
        assert!(row[i] > 0.0);
        for (j, v) in row.iter().enumerate().take(i) {
            assert_eq!(*v, m[j][i]);
        }
    }
    assert_eq!(json(&tmp.path().join("proximity.json"))["symmetric"], true);
}

#[test]
fn predict_check_reports_gap_agreement_on_both_parts() {
    let tmp = tempfile::tempdir().unwrap();
    ok(
        &["predict-check", "--input", s(&data("wine")), "--trees", "100", "--split", "0.7", "--seed", "4"],
        tmp.path(),
    );
    let summary = csv_rows(&tmp.path().join("summary.csv"));
    assert_eq!(summary.len(), 6);
    for r in summary.iter().filter(|r| r[1] == "gap") {
        assert_eq!(r[4], "0", "{r:?}");
    }
    let rows = csv_rows(&tmp.path().join("rows.csv"));
    assert_eq!(rows.len(), 3 * 178);
    let ids: std::collections::BTreeSet<usize> =
        rows.iter().filter(|r| r[0] == "gap").map(|r| r[2].parse().unwrap()).collect();
    assert_eq!(ids.len(), 178);
}

#[test]
fn predict_check_regression_without_split() {
    let tmp = tempfile::tempdir().unwrap();
    ok(
        &["predict-check", "--input", s(&data("diabetes_progression")), "--trees", "60", "--kind", "gap"],
        tmp.path(),
    );
    let summary = csv_rows(&tmp.path().join("summary.csv"));
    assert_eq!(summary.len(), 1);
    let max_diff: f64 = summary[0][8].parse().unwrap();
    assert!(max_diff < 1e-10);
}

#[test]
fn impute_writes_one_mse_row_per_kind() {
    let tmp = tempfile::tempdir().unwrap();
    ok(
        &["impute", "--input", s(&data("iris")), "--mcar", "0.05", "--iterations", "1", "--trees", "100"],
        tmp.path(),
    );
    let mse = csv_rows(&tmp.path().join("mse.csv"));
    assert_eq!(mse.len(), 3);
    let kinds: Vec<&str> = mse.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(kinds, ["original", "oob", "gap"]);
    for r in &mse {
        assert_eq!(r[4], "30");
        assert!(r[6].parse::<f64>().unwrap() > 0.0);
    }
    let trace = fs::read_to_string(tmp.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,kind,seed,mse\n"));
    assert_eq!(trace.lines().count(), 1 + 3 * 2);
    let imputed = csv_rows(&tmp.path().join("imputed_gap.csv"));
    assert_eq!(imputed.len(), 150);
    assert!(imputed.iter().flatten().all(|c| c != "NA" && !c.is_empty()));
}

#[test]
fn impute_fills_cells_missing_in_the_input() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(data("iris")).unwrap();
    let holed: String = text
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i % 20 == 5 {
                let mut cells: Vec<&str> = l.split(',').collect();
                cells[1] = "NA";
                format!("{}\n", cells.join(","))
            } else {
                format!("{l}\n")
            }
        })
        .collect();
    let path = tmp.path().join("holed.csv");
    fs::write(&path, holed).unwrap();
    let out = tmp.path().join("o");
    ok(&["impute", "--input", s(&path), "--kind", "gap", "--trees", "50"], &out);
    let mse = csv_rows(&out.join("mse.csv"));
    assert_eq!(mse.len(), 1);
    assert_eq!(mse[0][4], "8");
    assert_eq!(mse[0][6], "");
    let imputed = csv_rows(&out.join("imputed_gap.csv"));
    assert!(imputed.iter().flatten().all(|c| c != "NA"));
}

#[test]
fn outliers_rank_rows_within_class() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["outliers", "--input", s(&data("iris")), "--trees", "100"], tmp.path());
    let rows = csv_rows(&tmp.path().join("outliers.csv"));
    assert_eq!(rows.len(), 150);
    for class in ["0", "1", "2"] {
        let mut v: Vec<f64> = rows
            .iter()
            .filter(|r| r[1] == class && r[4] == "0")
            .map(|r| r[3].parse().unwrap())
            .collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mid = if v.len() % 2 == 1 {
            v[v.len() / 2]
        } else {
            (v[v.len() / 2 - 1] + v[v.len() / 2]) / 2.0
        };
        assert!(mid.abs() < 1e-9, "class {class} median {mid}");
    }
}

/// Mean distance of each group of rows to the centroid of its class.
fn centroid_distances(coords: &[Vec<f64>], labels: &[String], miss: &[bool]) -> (f64, f64) {
    let mut centroid: BTreeMap<&str, (Vec<f64>, usize)> = BTreeMap::new();
    for (x, y) in coords.iter().zip(labels) {
        let e = centroid.entry(y).or_insert((vec![0.0; x.len()], 0));
        for (a, b) in e.0.iter_mut().zip(x) {
            *a += b;
        }
        e.1 += 1;
    }
    let (mut sum, mut cnt) = ([0.0; 2], [0usize; 2]);
    for ((x, y), &m) in coords.iter().zip(labels).zip(miss) {
        let (c, n) = &centroid[y.as_str()];
        let d: f64 = x.iter().zip(c).map(|(a, b)| (a - b / *n as f64).powi(2)).sum::<f64>().sqrt();
        sum[usize::from(m)] += d;
        cnt[usize::from(m)] += 1;
    }
    (sum[0] / cnt[0] as f64, sum[1] / cnt[1] as f64)
}

#[test]
fn sonar_misclassified_rows_sit_away_from_their_class() {
    let tmp = tempfile::tempdir().unwrap();
    let sonar = data("sonar");
    let t = tmp.path().join("t");
    ok(&["train", "--input", s(&sonar), "--seed", "2"], &t);
    let forest = t.join("forest.jsonl");
    let e = tmp.path().join("e");
    ok(&["embed", "--input", s(&sonar), "--forest", s(&forest)], &e);
    let c = tmp.path().join("c");
    ok(
        &["predict-check", "--input", s(&sonar), "--forest", s(&forest), "--kind", "gap"],
        &c,
    );

    let coords: Vec<Vec<f64>> = csv_rows(&e.join("embedding.csv"))
        .iter()
        .map(|r| r[1..].iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(coords.len(), 208);
    assert!(coords.iter().all(|r| r.len() == 2));
    let labels: Vec<String> = csv_rows(&sonar).iter().map(|r| r.last().unwrap().clone()).collect();
    let forest_votes: Vec<String> = csv_rows(&c.join("rows.csv")).iter().map(|r| r[4].clone()).collect();
    let miss: Vec<bool> = labels.iter().zip(&forest_votes).map(|(a, b)| a != b).collect();
    assert!(miss.iter().any(|&m| m));
    let (right, wrong) = centroid_distances(&coords, &labels, &miss);
    assert!(wrong > right, "misclassified {wrong} vs correct {right}");
    let info = json(&e.join("embedding.json"));
    assert_eq!(info["n_dims"], 2);
}

#[test]
fn experiment_continues_past_a_bad_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = tmp.path().join("list.txt");
    fs::write(
        &manifest,
        format!(
            "# suite\n{}\n\nmissing.csv\n{}\n",
            data("iris").display(),
            data("auto_mpg").display()
        ),
    )
    .unwrap();
    let out = tmp.path().join("out");
    ok(
        &[
            "experiment", "--manifest", s(&manifest), "--trees", "60", "--seeds", "2", "--node-size-sweep",
        ],
        &out,
    );
    let summary = json(&out.join("experiment.json"));
    assert_eq!(summary["datasets"], serde_json::json!(["iris", "auto_mpg"]));
    assert_eq!(summary["failures"].as_array().unwrap().len(), 1);
    let text = fs::read_to_string(out.join("results.csv")).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let rows = csv_rows(&out.join("results.csv"));
    // main: 3 kinds x 2 parts; sweep: 5 sizes x 2 parts; per dataset and seed
    assert_eq!(rows.len(), 2 * 2 * (6 + 10));
    // votes agree exactly only with pure leaves; weighted means agree at
    // every node size
    for r in rows.iter().filter(|r| r[col("kind")] == "gap") {
        if r[col("dataset")] == "auto_mpg" {
            assert!(r[col("max_abs_diff")].parse::<f64>().unwrap() < 1e-10, "{r:?}");
        } else if r[col("min_node_size")] == "1" {
            assert_eq!(r[col("mismatch")].parse::<f64>().unwrap(), 0.0, "{r:?}");
        }
    }
}

#[test]
fn rerun_into_another_directory_reproduces_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ok(
        &["impute", "--input", s(&data("wine")), "--mcar", "0.1", "--trees", "40", "--seed", "9", "--threads", "2"],
        &a,
    );
    let o = Command::new(env!("CARGO_BIN_EXE_rfgap"))
        .args(["rerun", "--sidecar", s(&a.join("run.json")), "--out", s(&b)])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["mse.csv", "trace.csv", "imputed_original.csv", "imputed_oob.csv", "imputed_gap.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let side = json(&b.join("run.json"));
    assert_eq!(side["threads"], 2);
    assert_eq!(side["job"]["out"], s(&b));
    assert_eq!(side["job"]["mcar"], 0.1);
}
