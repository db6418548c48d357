//! Command-line front end: `score`, `tune`, `evaluate`, `analyze` and
//! `significance`.
//!
//! Options can also come from a flat `key = value` file given with
//! `--config`; keys are the long flag names. Flags on the command line win.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::analysis::{ablation_sweep, cohort_report, depth_distribution, CohortReport, CohortSpec, DepthReport};
use crate::error::{Error, Result};
use crate::evaluation::{
    break_ties, kendall_tau, metric_system_scores, pair_decisions, render_table, system_level_report,
    CorrelationReport, RankMode, SignificanceResult, SystemStatistic, TauConfig, TiePolicy,
};
use crate::kernel::KernelConfig;
use crate::representation::{AblationKind, RepresentationKind};
use crate::rst::{TreeCorpus, ValidationMode};
use crate::scoring::{score_dr_metrics, MetricScoreTable};
use crate::tuning::{
    expand_rankings, read_judgments, tune, CombinedMetricModel, ExpandMode, RankingJudgment, TuneConfig,
};

pub const DEFAULT_ROUNDS: usize = 10_000;

#[derive(Debug, Parser)]
#[command(
    name = "discoeval",
    version,
    about = "Discourse-tree metrics for machine translation evaluation"
)]
pub struct Cli {
    /// Flat key=value file with default option values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score hypothesis trees against reference trees (TSV output).
    Score(ScoreArgs),
    /// Learn combination weights from human rankings (JSON model output).
    Tune(TuneArgs),
    /// Correlate metrics with human judgments.
    Evaluate(EvaluateArgs),
    /// Ablations, depth statistics and good/bad cohort comparison.
    Analyze(AnalyzeArgs),
    /// Paired approximate randomization test between two metrics.
    Significance(SignificanceArgs),
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long, value_name = "FILE")]
    pub refs: Option<PathBuf>,
    /// Hypothesis tree files; the system name is the file stem.
    #[arg(long, num_args = 1.., value_name = "FILE")]
    pub hyps: Vec<PathBuf>,
    #[arg(long)]
    pub lang_pair: Option<String>,
    /// Comma-separated representations, or `all`.
    #[arg(long)]
    pub rep: Option<String>,
    /// Comma-separated ablations, or `all`.
    #[arg(long)]
    pub ablation: Option<String>,
    #[arg(long)]
    pub decay: Option<f64>,
    /// Reject trees with warnings instead of accepting them.
    #[arg(long)]
    pub strict: bool,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long, num_args = 1.., value_name = "FILE")]
    pub scores: Vec<PathBuf>,
    #[arg(long, num_args = 1.., value_name = "FILE")]
    pub judgments: Vec<PathBuf>,
    /// Comma-separated metrics to combine; defaults to every metric.
    #[arg(long)]
    pub metrics: Option<String>,
    #[arg(long)]
    pub lambda_grid: Option<String>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, num_args = 1.., value_name = "FILE")]
    pub scores: Vec<PathBuf>,
    #[arg(long, num_args = 1.., value_name = "FILE")]
    pub judgments: Vec<PathBuf>,
    /// Combined model to evaluate alongside the raw metrics.
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub metrics: Option<String>,
    /// `exclude`, `discordant` or `both`.
    #[arg(long)]
    pub tie_policy: Option<String>,
    /// Break segment-level ties by adding epsilon times the system score.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Strict Spearman (no tied values allowed).
    #[arg(long)]
    pub strict: bool,
    /// Report path; a `.txt` table is written next to it.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long, value_name = "FILE")]
    pub refs: Option<PathBuf>,
    #[arg(long, num_args = 1.., value_name = "FILE")]
    pub hyps: Vec<PathBuf>,
    #[arg(long, num_args = 1.., value_name = "FILE")]
    pub judgments: Vec<PathBuf>,
    #[arg(long)]
    pub lang_pair: Option<String>,
    /// Cohort size.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub strict: bool,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SignificanceArgs {
    #[arg(long, num_args = 1.., value_name = "FILE")]
    pub scores: Vec<PathBuf>,
    #[arg(long, num_args = 1.., value_name = "FILE")]
    pub judgments: Vec<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// The two metrics to compare, comma-separated.
    #[arg(long)]
    pub metrics: Option<String>,
    #[arg(long)]
    pub tie_policy: Option<String>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

const CONFIG_KEYS: [&str; 19] = [
    "decay",
    "refs",
    "hyps",
    "scores",
    "judgments",
    "model",
    "rep",
    "ablation",
    "tie-policy",
    "lambda-grid",
    "seed",
    "strict",
    "epsilon",
    "out",
    "lang-pair",
    "metrics",
    "rounds",
    "k",
    "folds",
];

/// Values read from a `--config` file.
#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Syntax {
                line: i + 1,
                message: format!("expected key = value, got {line:?}"),
            })?;
            let key = key.trim().replace('_', "-");
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(Error::Syntax {
                    line: i + 1,
                    message: format!("unknown key {key:?}"),
                });
            }
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(Error::DuplicateKey(format!("config key {key}")));
            }
        }
        Ok(ConfigFile { values })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    fn value<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        self.values
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::InvalidArgument(format!("config {key}: cannot parse {v:?}")))
            })
            .transpose()
    }

    fn paths(&self, flag: Vec<PathBuf>, key: &str) -> Vec<PathBuf> {
        if !flag.is_empty() {
            return flag;
        }
        self.values
            .get(key)
            .map(|v| split_list(v).into_iter().map(PathBuf::from).collect())
            .unwrap_or_default()
    }

    fn flag(&self, flag: bool, key: &str) -> Result<bool> {
        Ok(flag || self.value::<bool>(None, key)?.unwrap_or(false))
    }
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(String::from)
        .collect()
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| Error::InvalidArgument(format!("--{flag} is required")))
}

fn require_paths(paths: &[PathBuf], flag: &str) -> Result<()> {
    if paths.is_empty() {
        return Err(Error::InvalidArgument(format!("--{flag} is required")));
    }
    for p in paths {
        if !p.is_file() {
            return Err(Error::io(
                p,
                std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
            ));
        }
    }
    Ok(())
}

fn basenames(groups: &[&[PathBuf]]) -> Vec<String> {
    groups
        .iter()
        .flat_map(|g| g.iter())
        .map(|p| {
            p.file_name()
                .map_or_else(String::new, |n| n.to_string_lossy().into_owned())
        })
        .collect()
}

fn system_name(path: &Path) -> Result<String> {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::InvalidArgument(format!("cannot derive a system name from {}", path.display())))
}

fn validation_mode(strict: bool) -> ValidationMode {
    if strict {
        ValidationMode::Strict
    } else {
        ValidationMode::Lenient
    }
}

fn read_hyps(paths: &[PathBuf], mode: ValidationMode) -> Result<BTreeMap<String, TreeCorpus>> {
    let mut hyps = BTreeMap::new();
    for p in paths {
        let name = system_name(p)?;
        let corpus = TreeCorpus::read(p, mode)?;
        if hyps.insert(name.clone(), corpus).is_some() {
            return Err(Error::DuplicateKey(format!("system {name}")));
        }
    }
    Ok(hyps)
}

fn read_scores(paths: &[PathBuf]) -> Result<MetricScoreTable> {
    let mut table = MetricScoreTable::new();
    for p in paths {
        table.merge(MetricScoreTable::read_tsv(p)?)?;
    }
    Ok(table)
}

fn read_all_judgments(paths: &[PathBuf]) -> Result<Vec<RankingJudgment>> {
    let mut out = Vec::new();
    for p in paths {
        out.extend(read_judgments(p)?);
    }
    if out.is_empty() {
        return Err(Error::Empty("no judgments".to_string()));
    }
    Ok(out)
}

fn parse_list<T: FromStr<Err = Error> + Copy>(spec: &str, all: &[T]) -> Result<Vec<T>> {
    if spec.trim().eq_ignore_ascii_case("all") {
        return Ok(all.to_vec());
    }
    let items = split_list(spec);
    if items.is_empty() {
        return Err(Error::InvalidArgument("empty selection".to_string()));
    }
    items.iter().map(|s| s.parse()).collect()
}

fn tie_policies(spec: Option<&str>) -> Result<Vec<TiePolicy>> {
    match spec.map(|s| s.trim().to_ascii_lowercase()) {
        None => Ok(vec![TiePolicy::Exclude]),
        Some(s) if s == "both" => Ok(vec![TiePolicy::Exclude, TiePolicy::Discordant]),
        Some(s) => Ok(vec![s.parse()?]),
    }
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let grid: Vec<f64> = split_list(spec)
        .iter()
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| Error::InvalidArgument(format!("bad lambda {s:?}")))
        })
        .collect::<Result<_>>()?;
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty lambda grid".to_string()));
    }
    Ok(grid)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serialization is infallible");
    s.push('\n');
    s
}

/// What a command produced: a primary artifact and an optional text table.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub primary: String,
    pub table: Option<String>,
}

impl Output {
    fn write(&self, out: Option<&Path>) -> Result<()> {
        match out {
            Some(path) => {
                std::fs::write(path, &self.primary).map_err(|e| Error::io(path, e))?;
                if let Some(table) = &self.table {
                    let txt = path.with_extension("txt");
                    std::fs::write(&txt, table).map_err(|e| Error::io(&txt, e))?;
                }
                Ok(())
            }
            None => {
                print!("{}", self.table.as_ref().unwrap_or(&self.primary));
                Ok(())
            }
        }
    }
}

pub fn cmd_score(args: ScoreArgs, cfg: &ConfigFile) -> Result<(Output, Option<PathBuf>)> {
    let refs = require(cfg.value(args.refs, "refs")?, "refs")?;
    let hyp_paths = cfg.paths(args.hyps, "hyps");
    require_paths(std::slice::from_ref(&refs), "refs")?;
    require_paths(&hyp_paths, "hyps")?;
    let lang_pair: String = require(cfg.value(args.lang_pair, "lang-pair")?, "lang-pair")?;
    let reps = parse_list(
        &cfg.value(args.rep, "rep")?.unwrap_or_else(|| "all".into()),
        &RepresentationKind::ALL,
    )?;
    let ablations = parse_list(
        &cfg.value(args.ablation, "ablation")?.unwrap_or_else(|| "full".into()),
        &AblationKind::ALL,
    )?;
    let kernel = KernelConfig {
        decay_weight: cfg.value(args.decay, "decay")?.unwrap_or(1.0),
        normalize: true,
    };
    let mode = validation_mode(cfg.flag(args.strict, "strict")?);
    let refs = TreeCorpus::read(&refs, mode)?;
    let hyps = read_hyps(&hyp_paths, mode)?;
    let kinds: BTreeSet<RepresentationKind> = reps.into_iter().collect();
    let mut table = MetricScoreTable::new();
    for ablation in ablations.into_iter().collect::<BTreeSet<_>>() {
        table.merge(score_dr_metrics(&refs, &hyps, &lang_pair, &kinds, ablation, &kernel)?)?;
    }
    let mut buf = Vec::new();
    table.write_tsv(&mut buf).map_err(|e| Error::io("<output>", e))?;
    let out = cfg.value(args.out, "out")?;
    Ok((
        Output {
            primary: String::from_utf8(buf).expect("TSV output is UTF-8"),
            table: None,
        },
        out,
    ))
}

fn metric_list(spec: Option<String>, table: &MetricScoreTable) -> Vec<String> {
    match spec {
        Some(s) => split_list(&s),
        None => table.metrics().map(String::from).collect(),
    }
}

pub fn cmd_tune(args: TuneArgs, cfg: &ConfigFile) -> Result<(Output, Option<PathBuf>)> {
    let score_paths = cfg.paths(args.scores, "scores");
    let judgment_paths = cfg.paths(args.judgments, "judgments");
    let seed = require(cfg.value(args.seed, "seed")?, "seed")?;
    require_paths(&score_paths, "scores")?;
    require_paths(&judgment_paths, "judgments")?;
    let mut tc = TuneConfig::new(seed);
    if let Some(grid) = cfg.value::<String>(args.lambda_grid, "lambda-grid")? {
        tc.lambda_grid = parse_grid(&grid)?;
    }
    if let Some(folds) = cfg.value(args.folds, "folds")? {
        tc.folds = folds;
    }
    let raw = read_scores(&score_paths)?;
    let judgments = read_all_judgments(&judgment_paths)?;
    let metrics = metric_list(cfg.value(args.metrics, "metrics")?, &raw);
    let mut model = tune(&raw, &judgments, &metrics, &tc)?;
    model.metadata.datasets = basenames(&[&score_paths, &judgment_paths]);
    let out = cfg.value(args.out, "out")?;
    Ok((
        Output {
            primary: model.to_json(),
            table: None,
        },
        out,
    ))
}

#[derive(Debug, Serialize)]
struct EvaluationReport {
    tie_policies: Vec<TiePolicy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    spearman_ranks: &'static str,
    segment_level: Vec<CorrelationReport>,
    system_level: Vec<CorrelationReport>,
}

fn with_model(raw: MetricScoreTable, model: Option<&Path>) -> Result<(MetricScoreTable, Option<String>)> {
    let Some(path) = model else {
        return Ok((raw, None));
    };
    let model = CombinedMetricModel::read(path)?;
    let combined = model.score(&raw)?;
    let mut table = raw;
    table.merge(combined)?;
    Ok((table, Some(model.name)))
}

pub fn cmd_evaluate(args: EvaluateArgs, cfg: &ConfigFile) -> Result<(Output, Option<PathBuf>)> {
    let score_paths = cfg.paths(args.scores, "scores");
    let judgment_paths = cfg.paths(args.judgments, "judgments");
    require_paths(&score_paths, "scores")?;
    require_paths(&judgment_paths, "judgments")?;
    let model_path = cfg.value(args.model, "model")?;
    if let Some(m) = &model_path {
        require_paths(std::slice::from_ref(m), "model")?;
    }
    let policies = tie_policies(cfg.value::<String>(args.tie_policy, "tie-policy")?.as_deref())?;
    let epsilon = cfg.value(args.epsilon, "epsilon")?;
    let rank_mode = if cfg.flag(args.strict, "strict")? {
        RankMode::Strict
    } else {
        RankMode::Lenient
    };
    let raw = read_scores(&score_paths)?;
    let judgments = read_all_judgments(&judgment_paths)?;
    let mut metrics = metric_list(cfg.value(args.metrics, "metrics")?, &raw);
    let (table, combined) = with_model(raw, model_path.as_deref())?;
    if let Some(name) = combined {
        if !metrics.contains(&name) {
            metrics.push(name);
        }
    }
    let mut segment_table = table.clone();
    if let Some(eps) = epsilon {
        for m in &metrics {
            let broken = break_ties(&segment_table, m, eps)?;
            segment_table = replace_metric(&segment_table, m, broken)?;
        }
    }
    let mut segment_level = Vec::new();
    let mut system_level = Vec::new();
    for m in &metrics {
        for policy in &policies {
            let tau_cfg = TauConfig {
                metric_tie_policy: *policy,
            };
            segment_level.push(kendall_tau(&segment_table, m, &judgments, &tau_cfg)?);
        }
        system_level.extend(system_level_report(
            &table,
            m,
            &judgments,
            SystemStatistic::Both,
            rank_mode,
        )?);
    }
    let report = EvaluationReport {
        tie_policies: policies,
        epsilon,
        spearman_ranks: match rank_mode {
            RankMode::Strict => "strict",
            RankMode::Lenient => "average",
        },
        segment_level,
        system_level,
    };
    let mut text = String::from("segment level\n");
    text.push_str(&render_table(&report.segment_level));
    text.push_str("\nsystem level\n");
    text.push_str(&render_table(&report.system_level));
    let out = cfg.value(args.out, "out")?;
    Ok((
        Output {
            primary: to_json(&report),
            table: Some(text),
        },
        out,
    ))
}

fn replace_metric(table: &MetricScoreTable, metric: &str, replacement: MetricScoreTable) -> Result<MetricScoreTable> {
    let mut out = MetricScoreTable::new();
    for m in table.metrics().filter(|m| *m != metric) {
        out.merge(table.select(m)?)?;
    }
    out.merge(replacement)?;
    Ok(out)
}

#[derive(Debug, Serialize)]
struct AblationReport {
    system_scores: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    correlations: Vec<CorrelationReport>,
}

#[derive(Debug, Serialize)]
struct AnalysisReport {
    lang_pair: String,
    reference_depth: DepthReport,
    system_depth: BTreeMap<String, DepthReport>,
    ablation: AblationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    cohorts: Option<CohortReport>,
}

fn skip_undefined<T>(result: Result<T>, what: &str) -> Result<Option<T>> {
    match result {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedCorrelation(msg)) | Err(Error::Empty(msg)) => {
            log::warn!("{what}: {msg}");
            Ok(None)
        }
        Err(Error::NoUsablePairs) => {
            log::warn!("{what}: no usable pairs");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

pub fn cmd_analyze(args: AnalyzeArgs, cfg: &ConfigFile) -> Result<(Output, Option<PathBuf>)> {
    let refs = require(cfg.value(args.refs, "refs")?, "refs")?;
    let hyp_paths = cfg.paths(args.hyps, "hyps");
    let judgment_paths = cfg.paths(args.judgments, "judgments");
    require_paths(std::slice::from_ref(&refs), "refs")?;
    require_paths(&hyp_paths, "hyps")?;
    if !judgment_paths.is_empty() {
        require_paths(&judgment_paths, "judgments")?;
    }
    let lang_pair: String = require(cfg.value(args.lang_pair, "lang-pair")?, "lang-pair")?;
    let k = cfg.value(args.k, "k")?;
    if k.is_some() && judgment_paths.is_empty() {
        return Err(Error::InvalidArgument("--k needs --judgments".to_string()));
    }
    let mode = validation_mode(cfg.flag(args.strict, "strict")?);
    let refs = TreeCorpus::read(&refs, mode)?;
    let hyps = read_hyps(&hyp_paths, mode)?;

    let reference_depth = depth_distribution(refs.trees())?;
    let mut system_depth = BTreeMap::new();
    for (name, corpus) in &hyps {
        if let Some(d) = skip_undefined(depth_distribution(corpus.trees()), name)? {
            system_depth.insert(name.clone(), d);
        }
    }

    let sweep = ablation_sweep(&refs, &hyps, &lang_pair, &KernelConfig::default())?;
    let mut system_scores = BTreeMap::new();
    for m in sweep.metrics() {
        let per_lang = metric_system_scores(&sweep, m)?;
        system_scores.insert(m.to_string(), per_lang.get(&lang_pair).cloned().unwrap_or_default());
    }
    let judgments = if judgment_paths.is_empty() {
        Vec::new()
    } else {
        read_all_judgments(&judgment_paths)?
            .into_iter()
            .filter(|j| j.lang_pair == lang_pair)
            .collect()
    };
    let mut correlations = Vec::new();
    let mut cohorts = None;
    if !judgments.is_empty() {
        let metrics: Vec<String> = sweep.metrics().map(String::from).collect();
        for m in &metrics {
            if let Some(r) = skip_undefined(kendall_tau(&sweep, m, &judgments, &TauConfig::default()), m)? {
                correlations.push(r);
            }
            for stat in [SystemStatistic::Spearman, SystemStatistic::Pearson] {
                if let Some(r) = skip_undefined(system_level_report(&sweep, m, &judgments, stat, RankMode::Lenient), m)?
                {
                    correlations.extend(r);
                }
            }
        }
        let human = crate::evaluation::human_system_scores(&judgments)?;
        let human = human.get(&lang_pair).cloned().unwrap_or_default();
        let spec = CohortSpec { k: k.unwrap_or(2) };
        cohorts = Some(cohort_report(spec, &refs, &hyps, &human)?);
    } else if !judgment_paths.is_empty() {
        log::warn!("no judgments for {lang_pair}; skipping correlations and cohorts");
    }

    let report = AnalysisReport {
        lang_pair,
        reference_depth,
        system_depth,
        ablation: AblationReport {
            system_scores,
            correlations,
        },
        cohorts,
    };
    let out = cfg.value(args.out, "out")?;
    Ok((
        Output {
            primary: to_json(&report),
            table: Some(render_analysis(&report)),
        },
        out,
    ))
}

fn render_analysis(report: &AnalysisReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "depth ({})", report.lang_pair);
    let _ = writeln!(out, "reference  {}", report.reference_depth.summary());
    for (name, d) in &report.system_depth {
        let _ = writeln!(out, "{name}  {}", d.summary());
    }
    let _ = writeln!(out, "\nablation system scores");
    let systems: BTreeSet<&str> = report
        .ablation
        .system_scores
        .values()
        .flat_map(|s| s.keys().map(String::as_str))
        .collect();
    let width = report
        .ablation
        .system_scores
        .keys()
        .map(String::len)
        .max()
        .unwrap_or(6)
        .max(6);
    let _ = write!(out, "{:<width$}", "metric");
    for s in &systems {
        let _ = write!(out, "  {s:>10}");
    }
    out.push('\n');
    for (metric, scores) in &report.ablation.system_scores {
        let _ = write!(out, "{metric:<width$}");
        for s in &systems {
            match scores.get(*s) {
                Some(v) => {
                    let _ = write!(out, "  {v:>10.4}");
                }
                None => {
                    let _ = write!(out, "  {:>10}", "-");
                }
            }
        }
        out.push('\n');
    }
    if !report.ablation.correlations.is_empty() {
        let _ = writeln!(out, "\nablation correlations");
        out.push_str(&render_table(&report.ablation.correlations));
    }
    if let Some(c) = &report.cohorts {
        let _ = writeln!(out, "\ncohorts (k = {})", c.k);
        out.push_str(&c.render());
    }
    out
}

#[derive(Debug, Serialize)]
struct SignificanceReport {
    metric_a: String,
    metric_b: String,
    seed: u64,
    tests: Vec<(TiePolicy, SignificanceResult)>,
}

pub fn cmd_significance(args: SignificanceArgs, cfg: &ConfigFile) -> Result<(Output, Option<PathBuf>)> {
    let score_paths = cfg.paths(args.scores, "scores");
    let judgment_paths = cfg.paths(args.judgments, "judgments");
    let seed = require(cfg.value(args.seed, "seed")?, "seed")?;
    require_paths(&score_paths, "scores")?;
    require_paths(&judgment_paths, "judgments")?;
    let model_path = cfg.value(args.model, "model")?;
    if let Some(m) = &model_path {
        require_paths(std::slice::from_ref(m), "model")?;
    }
    let metrics = split_list(&require(cfg.value::<String>(args.metrics, "metrics")?, "metrics")?);
    let [a, b] = metrics.as_slice() else {
        return Err(Error::InvalidArgument(format!(
            "--metrics needs exactly two metrics, got {}",
            metrics.len()
        )));
    };
    let policies = tie_policies(cfg.value::<String>(args.tie_policy, "tie-policy")?.as_deref())?;
    let rounds = cfg.value(args.rounds, "rounds")?.unwrap_or(DEFAULT_ROUNDS);
    let (table, _) = with_model(read_scores(&score_paths)?, model_path.as_deref())?;
    let judgments = read_all_judgments(&judgment_paths)?;
    let pairs = expand_rankings(&judgments, ExpandMode::Test);
    let mut tests = Vec::new();
    for policy in policies {
        let tc = TauConfig {
            metric_tie_policy: policy,
        };
        let oa = pair_decisions(&table, a, &pairs, &tc)?;
        let ob = pair_decisions(&table, b, &pairs, &tc)?;
        tests.push((policy, crate::evaluation::randomization_test(&oa, &ob, rounds, seed)?));
    }
    let report = SignificanceReport {
        metric_a: a.clone(),
        metric_b: b.clone(),
        seed,
        tests,
    };
    let mut text = format!("{} vs {} (seed {seed})\n", report.metric_a, report.metric_b);
    for (policy, r) in &report.tests {
        let _ = writeln!(
            text,
            "{:<11} tau_a {:.4}  tau_b {:.4}  delta {:+.4}  rounds {}  p {:.4}",
            policy.as_str(),
            r.tau_a,
            r.tau_b,
            r.delta,
            r.rounds,
            r.p_value
        );
    }
    let out = cfg.value(args.out, "out")?;
    Ok((
        Output {
            primary: to_json(&report),
            table: Some(text),
        },
        out,
    ))
}

/// Runs a parsed command line and writes its outputs.
pub fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => ConfigFile::read(path)?,
        None => ConfigFile::default(),
    };
    let (output, out) = match cli.command {
        Command::Score(a) => cmd_score(a, &cfg)?,
        Command::Tune(a) => cmd_tune(a, &cfg)?,
        Command::Evaluate(a) => cmd_evaluate(a, &cfg)?,
        Command::Analyze(a) => cmd_analyze(a, &cfg)?,
        Command::Significance(a) => cmd_significance(a, &cfg)?,
    };
    output.write(out.as_deref())
}

/// Process exit code for a command result.
pub fn exit_code(result: &Result<()>) -> i32 {
    match result {
        Ok(()) => 0,
        Err(e) if e.is_input_error() => 2,
        Err(_) => 1,
    }
}
