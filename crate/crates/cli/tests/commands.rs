use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ruletag::corpus::{generate_synthetic, parse_corpus, write_corpus, SyntheticConfig};
use ruletag_cli::RunConfig;
use tempfile::TempDir;

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let syn = generate_synthetic(&SyntheticConfig::default(), 1).unwrap();
        let mut buf = Vec::new();
        write_corpus(&syn.sentences, &syn.tags, &mut buf).unwrap();
        fs::write(dir.path().join("corpus.txt"), buf).unwrap();
        fs::write(
            dir.path().join("dicts.json"),
            serde_json::to_string(&syn.dictionary_file).unwrap(),
        )
        .unwrap();
        let config = RunConfig {
            dim: 8,
            hidden: 8,
            rule_hidden: 4,
            dropout: 0.2,
            lr: 0.01,
            epochs: 2,
            window: 0,
            ..RunConfig::default()
        };
        fs::write(dir.path().join("config.json"), config.to_json()).unwrap();
        Fixture { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_ruletag"))
            .args(args)
            .current_dir(self.dir.path())
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    }
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap()
}

const BASE: [&str; 6] = ["--config", "config.json", "--corpus", "corpus.txt", "--dictionaries", "dicts.json"];

fn with<'a>(cmd: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![cmd];
    v.extend(BASE);
    v.extend(extra);
    v
}

#[test]
fn ingest_prints_counts_and_is_idempotent() {
    let f = Fixture::new();
    let out = f.ok(&["ingest", "--corpus", "corpus.txt", "--out", "a"]);
    assert!(out.contains("Train") && out.contains("#Labels"), "{out}");
    assert!(out.lines().last().unwrap().trim_end().ends_with('8'), "{out}");
    for name in ["corpus.tsv", "tagset.json", "split.json"] {
        assert!(f.path("a").join(name).exists(), "{name}");
    }
    f.ok(&["ingest", "--corpus", "a/corpus.tsv", "--out", "b"]);
    for name in ["corpus.tsv", "tagset.json", "split.json"] {
        assert_eq!(read(&f.path("a").join(name)), read(&f.path("b").join(name)), "{name}");
    }
}

#[test]
fn ingest_converts_iob_tags() {
    let f = Fixture::new();
    fs::write(f.path("iob.txt"), "a 0 B-X\nb 0 I-X\nc 0 O\n\nd 1 O\n\ne 2 B-Y\n").unwrap();
    f.ok(&["ingest", "--corpus", "iob.txt", "--out", "o"]);
    let (sentences, tags) = parse_corpus(&read(&f.path("o/corpus.tsv"))).unwrap();
    assert_eq!(sentences.len(), 3);
    assert_eq!(tags.names(), ["O", "X", "Y"]);
}

#[test]
fn corrupt_line_reports_file_and_line() {
    let f = Fixture::new();
    fs::write(f.path("bad.txt"), "a 0 O\nb 0\n").unwrap();
    let out = f.run(&["ingest", "--corpus", "bad.txt", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.txt:2:"), "{err}");
}

#[test]
fn exit_codes_follow_the_taxonomy() {
    let f = Fixture::new();
    assert_eq!(f.run(&["train", "--bogus"]).status.code(), Some(1));
    assert_eq!(f.run(&["train", "--variant", "E"]).status.code(), Some(1));
    fs::write(f.path("typo.json"), r#"{"epoch": 3}"#).unwrap();
    assert_eq!(f.run(&["train", "--config", "typo.json", "--corpus", "corpus.txt"]).status.code(), Some(1));
    assert_eq!(f.run(&with("train", &["--imitation", "2"])).status.code(), Some(1));
    assert_eq!(f.run(&with("train", &["--percent", "30"])).status.code(), Some(1));
    assert_eq!(f.run(&["train", "--corpus", "missing.txt"]).status.code(), Some(4));
    assert_eq!(f.run(&with("eval", &["--checkpoint", "missing.json"])).status.code(), Some(4));
    fs::write(f.path("junk.json"), "{}").unwrap();
    assert_eq!(f.run(&with("eval", &["--checkpoint", "junk.json"])).status.code(), Some(2));
    assert_eq!(f.run(&with("train", &["--lr", "1e300", "--epochs", "3"])).status.code(), Some(3));
    assert_eq!(f.run(&["--help"]).status.code(), Some(0));
}

#[test]
fn rules_report_one_line_per_token_and_perfect_baseline() {
    let f = Fixture::new();
    let out = f.ok(&with("rules", &["--out", "r"]));
    assert!(out.contains("micro-F1 1.0000"), "{out}");
    let (sentences, _) = parse_corpus(&read(&f.path("corpus.txt"))).unwrap();
    let tokens: usize = sentences.iter().map(|s| s.len()).sum();
    let report = read(&f.path("r/rules.tsv"));
    assert_eq!(report.lines().count(), tokens);
    assert!(report.lines().all(|l| l.split('\t').count() == 3));
    let eval: serde_json::Value = serde_json::from_str(&read(&f.path("r/rules_eval.json"))).unwrap();
    assert_eq!(eval["micro_f1"], 1.0);
}

#[test]
fn rules_reject_dictionaries_for_unknown_tags() {
    let f = Fixture::new();
    fs::write(f.path("other.json"), r#"{"synonyms": {"NOPE": ["x"]}}"#).unwrap();
    let out = f.run(&["rules", "--corpus", "corpus.txt", "--dictionaries", "other.json", "--out", "r"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_eval_predict_round_trip() {
    let f = Fixture::new();
    f.ok(&with("train", &["--variant", "D", "--out", "t"]));
    let log = read(&f.path("t/train_log.jsonl"));
    assert_eq!(log.lines().count(), 2);

    let eval = with("eval", &["--checkpoint", "t/checkpoint.json", "--out", "e1"]);
    f.ok(&eval);
    let eval2 = with("eval", &["--checkpoint", "t/checkpoint.json", "--out", "e2"]);
    f.ok(&eval2);
    assert_eq!(read(&f.path("e1/report.json")), read(&f.path("e2/report.json")));

    let words: String = parse_corpus(&read(&f.path("corpus.txt")))
        .unwrap()
        .0
        .iter()
        .map(|s| s.words().join("\n") + "\n\n")
        .collect();
    fs::write(f.path("raw.txt"), words).unwrap();
    f.ok(&["predict", "--checkpoint", "t/checkpoint.json", "--input", "raw.txt", "--out", "p"]);
    let (tagged, _) = parse_corpus(&read(&f.path("p/predictions.tsv"))).unwrap();
    assert_eq!(tagged.len(), 200);
    f.ok(&["ingest", "--corpus", "p/predictions.tsv", "--out", "again"]);
}

#[test]
fn ablate_writes_four_cells_per_seed() {
    let f = Fixture::new();
    let out = f.ok(&with(
        "ablate",
        &["--variants", "A,B", "--percents", "20,40", "--seeds", "1,2", "--epochs", "1", "--out", "g"],
    ));
    assert_eq!(read(&f.path("g/grid.jsonl")).lines().count(), 8);
    let csv = read(&f.path("g/summary.csv"));
    assert_eq!(csv, out);
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("percent,A_micro_f1"), "{csv}");
}
