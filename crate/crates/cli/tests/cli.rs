use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const TINY: &[&str] = &[
    "--d-bert",
    "16",
    "--gnn-hidden",
    "12",
    "--d-gnn",
    "6",
    "--bilstm-out",
    "6",
];

fn ces(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ces"))
        .args(args)
        .env("CES_LOG", "error")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

struct Corpus {
    dir: tempfile::TempDir,
}

impl Corpus {
    fn new(count: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let out = ces(&["synth", "--count", &count.to_string(), "--out-dir", dir.path().to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn s(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_owned()
    }

    fn data_args(&self) -> Vec<String> {
        vec![
            "--dataset".into(),
            self.s("dataset.csv"),
            "--conllu".into(),
            self.s("parses.conllu"),
            "--tokenization".into(),
            self.s("tokens.jsonl"),
        ]
    }

    fn run(&self, command: &str, extra: &[&str]) -> Output {
        let mut args: Vec<String> = vec![command.into()];
        args.extend(self.data_args());
        args.extend(extra.iter().map(|s| s.to_string()));
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        ces(&refs)
    }

    fn train(&self, checkpoint: &str, epochs: &str) -> Output {
        let mut extra = vec!["--checkpoint", checkpoint, "--epochs", epochs];
        extra.extend_from_slice(TINY);
        self.run("train", &extra)
    }
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn train_predict_eval_round_trip() {
    let c = Corpus::new(12);
    let ckpt = c.s("model.cemd");
    let out = c.train(&ckpt, "2");
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let trace = read_json(&c.path("model.cemd.loss.json"));
    assert_eq!(trace.as_array().unwrap().len(), 2);
    let manifest = read_json(&c.path("model.cemd.manifest.json"));
    assert_eq!(manifest["command"], "train");
    assert_eq!(manifest["run"]["seed"], 123);
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 3);
    assert_eq!(manifest["outputs"][0]["sha256"].as_str().unwrap().len(), 64);

    let pred = c.s("pred.csv");
    let out = c.run("predict", &["--checkpoint", &ckpt, "--output", &pred]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(&pred).unwrap();
    assert!(csv.starts_with("Index;Text;Cause;Effect\n"));
    assert_eq!(csv.lines().count(), 13);
    let tags = fs::read_to_string(c.path("pred.csv.tags.jsonl")).unwrap();
    let first: Value = serde_json::from_str(tags.lines().next().unwrap()).unwrap();
    assert_eq!(first["tokens"].as_array().unwrap().len(), first["token_tags"].as_array().unwrap().len());

    let report = c.s("report.json");
    let out = ces(&["eval", "--gold", &c.s("dataset.csv"), "--pred", &pred, "--output", &report]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = read_json(Path::new(&report));
    for key in ["precision", "recall", "f1", "exact_match"] {
        let v = r[key].as_f64().unwrap();
        assert!((0.0..=100.0).contains(&v), "{key} {v}");
    }
}

#[test]
fn gold_scored_against_itself_is_perfect() {
    let c = Corpus::new(5);
    let out = ces(&["eval", "--gold", &c.s("dataset.csv"), "--pred", &c.s("dataset.csv")]);
    assert_eq!(code(&out), 0);
    let table = String::from_utf8(out.stdout).unwrap();
    assert_eq!(table.matches("100.00").count(), 4, "{table}");
}

#[test]
fn eval_lists_mismatched_ids() {
    let c = Corpus::new(4);
    let gold = fs::read_to_string(c.path("dataset.csv")).unwrap();
    let pred: String = gold.lines().filter(|l| !l.starts_with("syn.0002")).map(|l| format!("{l}\n")).collect();
    fs::write(c.path("pred.csv"), pred).unwrap();
    let out = ces(&["eval", "--gold", &c.s("dataset.csv"), "--pred", &c.s("pred.csv")]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("syn.0002"), "{}", stderr(&out));
}

#[test]
fn identical_runs_are_byte_identical() {
    let c = Corpus::new(8);
    let (a, b) = (c.s("a.cemd"), c.s("b.cemd"));
    assert_eq!(code(&c.train(&a, "2")), 0);
    assert_eq!(code(&c.train(&b, "2")), 0);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    for (ckpt, out) in [(&a, c.s("pa.csv")), (&b, c.s("pb.csv"))] {
        assert_eq!(code(&c.run("predict", &["--checkpoint", ckpt, "--output", &out])), 0);
    }
    assert_eq!(fs::read(c.path("pa.csv")).unwrap(), fs::read(c.path("pb.csv")).unwrap());
    assert_eq!(
        fs::read(c.path("pa.csv.tags.jsonl")).unwrap(),
        fs::read(c.path("pb.csv.tags.jsonl")).unwrap()
    );
}

#[test]
fn replay_reproduces_outputs() {
    let c = Corpus::new(6);
    let ckpt = c.s("m.cemd");
    assert_eq!(code(&c.train(&ckpt, "1")), 0);
    let before = fs::read(&ckpt).unwrap();
    let out = ces(&["replay", &c.s("m.cemd.manifest.json")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read(&ckpt).unwrap(), before);
}

#[test]
fn config_file_then_flags() {
    let c = Corpus::new(6);
    fs::write(
        c.path("run.json"),
        r#"{"seed": 9, "model": {"epochs": 1, "d_bert": 16, "gnn_hidden": 12, "d_gnn": 6, "bilstm_out": 6}}"#,
    )
    .unwrap();
    let ckpt = c.s("m.cemd");
    let out = c.run("train", &["--config", &c.s("run.json"), "--epochs", "3", "--checkpoint", &ckpt]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(read_json(&c.path("m.cemd.loss.json")).as_array().unwrap().len(), 3);
    let m = read_json(&c.path("m.cemd.manifest.json"));
    assert_eq!(m["run"]["seed"], 9);
    assert_eq!(m["run"]["model"]["d_bert"], 16);

    fs::write(c.path("bad.json"), r#"{"model": {"epoch": 1}}"#).unwrap();
    let out = c.run("train", &["--config", &c.s("bad.json"), "--checkpoint", &ckpt]);
    assert_eq!(code(&out), 1);
}

#[test]
fn no_viterbi_and_empty_input() {
    let c = Corpus::new(6);
    let ckpt = c.s("m.cemd");
    assert_eq!(code(&c.train(&ckpt, "1")), 0);
    let out = c.run("predict", &["--checkpoint", &ckpt, "--output", &c.s("p.csv"), "--no-viterbi"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(read_json(&c.path("p.csv.manifest.json"))["run"]["decode"], "argmax");

    fs::write(c.path("empty.csv"), "").unwrap();
    let empty_out = c.s("e.csv");
    let out = ces(&["predict", "--dataset", &c.s("empty.csv"), "--checkpoint", &ckpt, "--output", &empty_out]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::metadata(&empty_out).unwrap().len(), 0);
    assert_eq!(fs::metadata(c.path("e.csv.tags.jsonl")).unwrap().len(), 0);
}

#[test]
fn checkpoint_must_match_requested_architecture() {
    let c = Corpus::new(4);
    let ckpt = c.s("m.cemd");
    assert_eq!(code(&c.train(&ckpt, "1")), 0);
    let out = c.run("predict", &["--checkpoint", &ckpt, "--output", &c.s("p.csv"), "--d-bert", "8"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn cross_validation_shrunk_grid() {
    let c = Corpus::new(8);
    let out_path = c.s("cv.json");
    let mut extra = vec![
        "--epochs",
        "1",
        "--seeds",
        "1,2",
        "--folds",
        "2",
        "--variants",
        "proposed,baseline",
        "--output",
        &out_path,
    ];
    extra.extend_from_slice(TINY);
    let out = c.run("cv", &extra);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v = read_json(Path::new(&out_path));
    for variant in v["variants"].as_array().unwrap() {
        let reports = variant["reports"].as_array().unwrap();
        let order: Vec<(u64, u64)> = reports
            .iter()
            .map(|r| (r["seed"].as_u64().unwrap(), r["fold"].as_u64().unwrap()))
            .collect();
        assert_eq!(order, [(1, 0), (1, 1), (2, 0), (2, 1)]);
    }
    assert_eq!(v["comparisons"][0]["f1"]["df"], 3);
    assert!(String::from_utf8(out.stdout).unwrap().contains("baseline"));
}

#[test]
fn gradcheck_passes_and_catches_corruption() {
    let out = ces(&["gradcheck", "--instances", "2", "--dims", "5,4,3"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = ces(&["gradcheck", "--instances", "1", "--corrupt"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn graph_stats_reports_homophily() {
    let c = Corpus::new(10);
    let out_path = c.s("g.json");
    let out = c.run("graph-stats", &["--output", &out_path]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v = read_json(Path::new(&out_path));
    assert_eq!(v["documents"], 10);
    let h = v["homophily"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&h));
    let same: u64 = v["per_document"].as_array().unwrap().iter().map(|d| d["same_label_edges"].as_u64().unwrap()).sum();
    assert_eq!(same, v["same_label_edges"].as_u64().unwrap());
}

#[test]
fn exit_codes_for_bad_input() {
    assert_eq!(code(&ces(&["train", "--no-such-flag"])), 1);
    assert_eq!(code(&ces(&["train", "--dataset", "/nonexistent.csv", "--checkpoint", "/tmp/x"])), 1);
    assert_eq!(code(&ces(&["train", "--ablation", "everything"])), 1);
    assert_eq!(code(&ces(&["gradcheck", "--dims", "1,2"])), 1);
    assert_eq!(code(&ces(&["--help"])), 0);
}
