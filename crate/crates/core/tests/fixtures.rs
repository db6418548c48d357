//! Regression-locked outputs on the bundled synthetic corpus.

use std::path::{Path, PathBuf};
use std::process::Command;

use discoeval::analysis::{cohort_report, CohortSpec};
use discoeval::evaluation::{human_system_scores, pair_decisions, randomization_test, Outcome, TauConfig};
use discoeval::rst::{TreeCorpus, ValidationMode};
use discoeval::tuning::{expand_rankings, read_judgments, ExpandMode};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn data(rel: &str) -> PathBuf {
    root().join("data/synthetic").join(rel)
}

fn fixture(name: &str) -> String {
    std::fs::read_to_string(root().join("tests/fixtures").join(name))
        .unwrap()
        .replace("\r\n", "\n")
}

fn bin(args: &[&str], dir: &Path) {
    let out = Command::new(env!("CARGO_BIN_EXE_discoeval"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn hyp_args() -> Vec<String> {
    ["sys_a", "sys_b", "sys_c", "sys_d"]
        .iter()
        .map(|s| data(&format!("hyps/{s}.jsonl")).display().to_string())
        .collect()
}

fn s(p: PathBuf) -> String {
    p.display().to_string()
}

#[test]
fn locked_score_table_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let refs = s(data("refs.jsonl"));
    let mut score = vec![
        "score",
        "--refs",
        &refs,
        "--lang-pair",
        "de-en",
        "--rep",
        "all",
        "--ablation",
        "all",
        "--out",
        "dr.tsv",
        "--hyps",
    ];
    let hyps = hyp_args();
    score.extend(hyps.iter().map(String::as_str));
    bin(&score, d);
    let scores = std::fs::read_to_string(d.join("dr.tsv")).unwrap();
    assert_eq!(scores, fixture("synthetic_scores.tsv"));

    let (ext, judg) = (s(data("scores.tsv")), s(data("judgments.tsv")));
    bin(
        &[
            "tune",
            "--scores",
            "dr.tsv",
            &ext,
            "--judgments",
            &judg,
            "--seed",
            "7",
            "--out",
            "model.json",
        ],
        d,
    );
    bin(
        &[
            "evaluate",
            "--scores",
            "dr.tsv",
            &ext,
            "--judgments",
            &judg,
            "--model",
            "model.json",
            "--tie-policy",
            "both",
            "--out",
            "eval.json",
        ],
        d,
    );
    assert_eq!(
        std::fs::read_to_string(d.join("eval.txt")).unwrap(),
        fixture("synthetic_evaluate.txt")
    );

    let mut analyze = vec![
        "analyze",
        "--refs",
        &refs,
        "--lang-pair",
        "de-en",
        "--judgments",
        &judg,
        "--out",
        "analysis.json",
        "--hyps",
    ];
    analyze.extend(hyps.iter().map(String::as_str));
    bin(&analyze, d);
    assert_eq!(
        std::fs::read_to_string(d.join("analysis.txt")).unwrap(),
        fixture("synthetic_analysis.txt")
    );
}

#[test]
fn good_cohort_dominates_bad_on_f1() {
    let refs = TreeCorpus::read(&data("refs.jsonl"), ValidationMode::Lenient).unwrap();
    let systems = ["sys_a", "sys_b", "sys_c", "sys_d"]
        .iter()
        .map(|s| {
            let c = TreeCorpus::read(&data(&format!("hyps/{s}.jsonl")), ValidationMode::Lenient).unwrap();
            (s.to_string(), c)
        })
        .collect();
    let judgments = read_judgments(&data("judgments.tsv")).unwrap();
    let human = human_system_scores(&judgments).unwrap().remove("de-en").unwrap();
    let r = cohort_report(CohortSpec::default(), &refs, &systems, &human).unwrap();
    assert_eq!(r.good.systems, ["sys_a", "sys_b"]);
    assert!(r.good.relation_micro_f1.f1 > r.bad.relation_micro_f1.f1);
    assert!(r.good.nuclearity_f1.f1 > r.bad.nuclearity_f1.f1);
    assert!(r.good.edu_f1.f1 > r.bad.edu_f1.f1);
    assert!(r.good.depth_rmse < r.bad.depth_rmse);
    assert!(r.good.relations.kl_to_gold < r.bad.relations.kl_to_gold);

    // same systems on both sides give identical cohort numbers
    let same = cohort_report(
        CohortSpec { k: 2 },
        &refs,
        &[
            ("x".to_string(), systems["sys_a"].clone()),
            ("y".to_string(), systems["sys_a"].clone()),
        ]
        .into_iter()
        .chain([
            ("z".to_string(), systems["sys_a"].clone()),
            ("w".to_string(), systems["sys_a"].clone()),
        ])
        .collect(),
        &[("x", 0.9), ("y", 0.5), ("z", 0.4), ("w", 0.1)]
            .iter()
            .map(|(s, v)| (s.to_string(), *v))
            .collect(),
    )
    .unwrap();
    assert_eq!(same.good.relation_micro_f1, same.bad.relation_micro_f1);
    assert_eq!(same.good.depth_rmse, same.bad.depth_rmse);
    assert_eq!(same.good.relations.kl_to_gold, same.bad.relations.kl_to_gold);
}

#[test]
fn locked_randomization_p_values() {
    let perfect = vec![Outcome::Concordant; 100];
    let inverted = vec![Outcome::Discordant; 100];
    let r = randomization_test(&perfect, &inverted, 10_000, 2014).unwrap();
    assert_eq!(r.p_value, 1.0 / 10_001.0);

    let table = discoeval::scoring::MetricScoreTable::read_tsv(&data("scores.tsv")).unwrap();
    let judgments = read_judgments(&data("judgments.tsv")).unwrap();
    let pairs = expand_rankings(&judgments, ExpandMode::Test);
    let a = pair_decisions(&table, "LEXOVERLAP", &pairs, &TauConfig::default()).unwrap();
    let b = pair_decisions(&table, "NOISE", &pairs, &TauConfig::default()).unwrap();
    let r = randomization_test(&a, &b, 1000, 5).unwrap();
    assert!(r.tau_a > 0.7 && r.tau_b.abs() < 0.1);
    assert_eq!(r.p_value, 1.0 / 1001.0);
}
