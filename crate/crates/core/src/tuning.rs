//! Learning metric combination weights from human rankings.
//!
//! Each k-way human ranking is expanded into pairwise comparisons. A training
//! example is the difference of the normalized metric vectors of the two
//! translations together with a binary label saying whether the first one was
//! judged better. Weights maximize the L2-penalized logistic log-likelihood
//! (no bias term), optimized with L-BFGS; the penalty strength is chosen by
//! stratified k-fold cross-validation on held-out pairwise accuracy.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::{minmax_normalize, MetricScoreTable, NormalizationRanges, Unit};

pub const DEFAULT_LAMBDA_GRID: [f64; 6] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0];
pub const COMBINED_METRIC: &str = "COMBINED";

/// One judge's ranking of several systems' translations of a segment.
/// Rank 1 is best; equal ranks are ties.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankingJudgment {
    pub lang_pair: String,
    pub segment: u64,
    pub judge: String,
    pub ranks: Vec<(String, u8)>,
}

impl RankingJudgment {
    fn validate(&self) -> std::result::Result<(), String> {
        if !(2..=5).contains(&self.ranks.len()) {
            return Err(format!("{} systems ranked, expected 2 to 5", self.ranks.len()));
        }
        if let Some((s, r)) = self.ranks.iter().find(|(_, r)| !(1..=5).contains(r)) {
            return Err(format!("rank {r} of {s} outside 1..5"));
        }
        let distinct: BTreeSet<&str> = self.ranks.iter().map(|(s, _)| s.as_str()).collect();
        if distinct.len() != self.ranks.len() {
            return Err("system ranked twice".to_string());
        }
        Ok(())
    }
}

/// Reads `lang_pair<TAB>segment<TAB>judge<TAB>sys:rank,sys:rank,...`. A
/// first line starting with `lang_pair` is taken as a header.
pub fn parse_judgments<R: BufRead>(reader: R) -> Result<Vec<RankingJudgment>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let syntax = |message: String| Error::Syntax { line: lineno, message };
        let line = line.map_err(|e| syntax(e.to_string()))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || (lineno == 1 && line.starts_with("lang_pair")) {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [lang_pair, segment, judge, ranking] = fields[..] else {
            return Err(syntax(format!("expected 4 fields, found {}", fields.len())));
        };
        let segment = segment
            .parse()
            .map_err(|_| syntax(format!("invalid segment id {segment:?}")))?;
        let ranks = ranking
            .split(',')
            .map(|item| {
                let (sys, rank) = item
                    .rsplit_once(':')
                    .ok_or_else(|| syntax(format!("expected system:rank, found {item:?}")))?;
                let rank = rank.parse().map_err(|_| syntax(format!("invalid rank {rank:?}")))?;
                if sys.is_empty() {
                    return Err(syntax("empty system name".to_string()));
                }
                Ok((sys.to_string(), rank))
            })
            .collect::<Result<Vec<_>>>()?;
        let judgment = RankingJudgment {
            lang_pair: lang_pair.to_string(),
            segment,
            judge: judge.to_string(),
            ranks,
        };
        judgment
            .validate()
            .map_err(|m| Error::Validation(format!("line {lineno}: {m}")))?;
        out.push(judgment);
    }
    Ok(out)
}

pub fn read_judgments(path: &Path) -> Result<Vec<RankingJudgment>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_judgments(std::io::BufReader::new(file))
}

/// A decided pairwise human comparison.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PairwiseJudgment {
    pub lang_pair: String,
    pub segment: u64,
    pub better: String,
    pub worse: String,
}

impl PairwiseJudgment {
    pub fn better_unit(&self) -> Unit {
        Unit::new(&self.lang_pair, &self.better, self.segment)
    }

    pub fn worse_unit(&self) -> Unit {
        Unit::new(&self.lang_pair, &self.worse, self.segment)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpandMode {
    /// Repeated votes collapse to one comparison; pairs with balanced votes
    /// are dropped.
    Train,
    /// Every judgment counts, repetitions included.
    Test,
}

/// Expands rankings into pairwise comparisons, skipping human ties.
pub fn expand_rankings(judgments: &[RankingJudgment], mode: ExpandMode) -> Vec<PairwiseJudgment> {
    let mut all = Vec::new();
    for j in judgments {
        for (i, (sa, ra)) in j.ranks.iter().enumerate() {
            for (sb, rb) in &j.ranks[i + 1..] {
                if ra == rb {
                    continue;
                }
                let (better, worse) = if ra < rb { (sa, sb) } else { (sb, sa) };
                all.push(PairwiseJudgment {
                    lang_pair: j.lang_pair.clone(),
                    segment: j.segment,
                    better: better.clone(),
                    worse: worse.clone(),
                });
            }
        }
    }
    match mode {
        ExpandMode::Test => all,
        ExpandMode::Train => {
            // (lang_pair, segment, first, second) with first < second -> net votes for first
            let mut votes: BTreeMap<(String, u64, String, String), i64> = BTreeMap::new();
            for p in all {
                let (key, sign) = if p.better < p.worse {
                    ((p.lang_pair, p.segment, p.better, p.worse), 1)
                } else {
                    ((p.lang_pair, p.segment, p.worse, p.better), -1)
                };
                *votes.entry(key).or_insert(0) += sign;
            }
            votes
                .into_iter()
                .filter(|(_, net)| *net != 0)
                .map(|((lang_pair, segment, a, b), net)| {
                    let (better, worse) = if net > 0 { (a, b) } else { (b, a) };
                    PairwiseJudgment {
                        lang_pair,
                        segment,
                        better,
                        worse,
                    }
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseExample {
    /// `u(first) - u(second)` over the model metrics.
    pub diff: Vec<f64>,
    /// Whether the first translation was judged better.
    pub first_better: bool,
    pub lang_pair: String,
    pub segment: u64,
    pub first: String,
    pub second: String,
}

impl PairwiseExample {
    fn sign(&self) -> f64 {
        if self.first_better {
            1.0
        } else {
            -1.0
        }
    }
}

/// Builds one example per comparison from normalized scores. The pair is
/// oriented by system name so both labels occur. Missing scores count as 0.
pub fn build_examples(
    pairs: &[PairwiseJudgment],
    table: &MetricScoreTable,
    metrics: &[String],
) -> Result<Vec<PairwiseExample>> {
    for m in metrics {
        if !table.has_metric(m) {
            return Err(Error::MissingMetric(m.clone()));
        }
    }
    let mut missing = 0usize;
    let mut lookup = |metric: &str, unit: &Unit| {
        table.get(metric, unit).unwrap_or_else(|| {
            missing += 1;
            0.0
        })
    };
    let mut out = Vec::with_capacity(pairs.len());
    for p in pairs {
        let first_better = p.better < p.worse;
        let (first, second) = if first_better {
            (p.better_unit(), p.worse_unit())
        } else {
            (p.worse_unit(), p.better_unit())
        };
        let diff = metrics.iter().map(|m| lookup(m, &first) - lookup(m, &second)).collect();
        out.push(PairwiseExample {
            diff,
            first_better,
            lang_pair: p.lang_pair.clone(),
            segment: p.segment,
            first: first.system,
            second: second.system,
        });
    }
    if missing > 0 {
        log::warn!("{missing} missing normalized scores treated as 0 while building examples");
    }
    Ok(out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Penalized negative log-likelihood `-sum log P(y | d) + lambda |w|^2` and
/// its gradient.
pub fn objective_and_gradient(w: &[f64], examples: &[PairwiseExample], lambda: f64) -> (f64, Vec<f64>) {
    let mut value = 0.0;
    let mut grad: Vec<f64> = w.iter().map(|wi| 2.0 * lambda * wi).collect();
    for ex in examples {
        // margin of the observed label: -log sigma(margin) = softplus(-margin)
        let margin = ex.sign() * dot(w, &ex.diff);
        value += softplus(-margin);
        let scale = -ex.sign() * sigmoid(-margin);
        for (g, d) in grad.iter_mut().zip(&ex.diff) {
            *g += scale * d;
        }
    }
    value += lambda * dot(w, w);
    (value, grad)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            max_iters: 500,
            grad_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub weights: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub fn train(examples: &[PairwiseExample], lambda: f64, opts: &TrainOptions) -> Result<TrainResult> {
    let dim = examples.first().map_or(0, |e| e.diff.len());
    train_from(vec![0.0; dim], examples, lambda, opts)
}

const LBFGS_MEMORY: usize = 10;

/// L-BFGS with backtracking (Armijo) line search from `w0`.
pub fn train_from(w0: Vec<f64>, examples: &[PairwiseExample], lambda: f64, opts: &TrainOptions) -> Result<TrainResult> {
    if examples.is_empty() {
        return Err(Error::Empty("no training examples".to_string()));
    }
    if let Some(bad) = examples.iter().find(|e| e.diff.len() != w0.len()) {
        return Err(Error::InvalidArgument(format!(
            "example dimension {} differs from {}",
            bad.diff.len(),
            w0.len()
        )));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("invalid lambda {lambda}")));
    }
    let inf_norm = |g: &[f64]| g.iter().fold(0.0f64, |m, x| m.max(x.abs()));

    let mut w = w0;
    let (mut f, mut g) = objective_and_gradient(&w, examples, lambda);
    let mut history: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    let mut iterations = 0;
    while iterations < opts.max_iters {
        if inf_norm(&g) < opts.grad_tol {
            return Ok(TrainResult {
                weights: w,
                iterations,
                converged: true,
            });
        }
        iterations += 1;

        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.last() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|qi| *qi *= gamma);
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut direction: Vec<f64> = q.iter().map(|x| -x).collect();
        let mut slope = dot(&g, &direction);
        if slope >= 0.0 {
            history.clear();
            direction = g.iter().map(|x| -x).collect();
            slope = dot(&g, &direction);
        }

        // rounding slack so steps near the optimum are not rejected
        let slack = 4.0 * f64::EPSILON * f.abs().max(1.0);
        let mut step = if history.is_empty() {
            1.0 / inf_norm(&g).max(1.0)
        } else {
            1.0
        };
        let accepted = loop {
            let candidate: Vec<f64> = w.iter().zip(&direction).map(|(wi, di)| wi + step * di).collect();
            let (fc, gc) = objective_and_gradient(&candidate, examples, lambda);
            if fc <= f + 1e-4 * step * slope + slack {
                break Some((candidate, fc, gc));
            }
            step *= 0.5;
            if step < 1e-20 {
                break None;
            }
        };
        let Some((next, fn_, gn)) = accepted else {
            log::debug!("line search failed after {iterations} iterations");
            return Ok(TrainResult {
                weights: w,
                iterations,
                converged: inf_norm(&g) < opts.grad_tol,
            });
        };
        let s: Vec<f64> = next.iter().zip(&w).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-18 {
            if history.len() == LBFGS_MEMORY {
                history.remove(0);
            }
            history.push((s, y, 1.0 / sy));
        }
        w = next;
        f = fn_;
        g = gn;
    }
    let converged = inf_norm(&g) < opts.grad_tol;
    Ok(TrainResult {
        weights: w,
        iterations,
        converged,
    })
}

/// Fraction of examples whose label agrees with the sign of `w . d`; a zero
/// margin counts half.
pub fn pairwise_accuracy(w: &[f64], examples: &[PairwiseExample]) -> f64 {
    if examples.is_empty() {
        return 0.0;
    }
    let correct: f64 = examples
        .iter()
        .map(|ex| {
            let m = ex.sign() * dot(w, &ex.diff);
            if m > 0.0 {
                1.0
            } else if m == 0.0 {
                0.5
            } else {
                0.0
            }
        })
        .sum();
    correct / examples.len() as f64
}

/// Fold index per example: shuffled within each language pair, then dealt
/// round-robin so every fold holds a share of each language pair.
pub fn assign_folds(examples: &[PairwiseExample], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, ex) in examples.iter().enumerate() {
        groups.entry(ex.lang_pair.as_str()).or_default().push(i);
    }
    let mut assignment = vec![0; examples.len()];
    let mut next = 0;
    for indices in groups.values_mut() {
        indices.shuffle(&mut rng);
        for &i in indices.iter() {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    assignment
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaScore {
    pub lambda: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSelection {
    pub lambda: f64,
    pub scores: Vec<LambdaScore>,
}

/// Chooses the grid value with the best mean held-out pairwise accuracy;
/// ties go to the larger lambda.
pub fn select_lambda(
    examples: &[PairwiseExample],
    grid: &[f64],
    folds: usize,
    seed: u64,
    opts: &TrainOptions,
) -> Result<LambdaSelection> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty lambda grid".to_string()));
    }
    if folds < 2 {
        return Err(Error::InvalidArgument(format!("{folds} folds; need at least 2")));
    }
    if examples.len() < folds {
        return Err(Error::InvalidArgument(format!(
            "{} examples for {folds} folds",
            examples.len()
        )));
    }
    let assignment = assign_folds(examples, folds, seed);
    let split = |k: usize| -> (Vec<PairwiseExample>, Vec<PairwiseExample>) {
        let mut train = Vec::new();
        let mut held = Vec::new();
        for (ex, &f) in examples.iter().zip(&assignment) {
            if f == k {
                held.push(ex.clone());
            } else {
                train.push(ex.clone());
            }
        }
        (train, held)
    };
    let splits: Vec<_> = (0..folds).map(split).collect();
    let mut scores = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let mut total = 0.0;
        for (train_set, held) in &splits {
            let fit = train(train_set, lambda, opts)?;
            total += pairwise_accuracy(&fit.weights, held);
        }
        scores.push(LambdaScore {
            lambda,
            accuracy: total / folds as f64,
        });
    }
    let best = scores
        .iter()
        .fold(None::<&LambdaScore>, |best, s| match best {
            Some(b) if b.accuracy > s.accuracy || (b.accuracy == s.accuracy && b.lambda >= s.lambda) => Some(b),
            _ => Some(s),
        })
        .expect("non-empty grid");
    Ok(LambdaSelection {
        lambda: best.lambda,
        scores,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub datasets: Vec<String>,
    pub seed: Option<u64>,
    pub folds: usize,
    pub fold_stratification: String,
    pub examples: usize,
    pub optimizer_iterations: usize,
    pub converged: bool,
    pub cv_scores: Vec<LambdaScore>,
}

/// A linear combination of normalized metric scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedMetricModel {
    pub name: String,
    pub metrics: Vec<String>,
    pub weights: Vec<f64>,
    pub ranges: NormalizationRanges,
    pub lambda: f64,
    pub metadata: TrainingMetadata,
}

impl CombinedMetricModel {
    pub fn with_weights(metrics: Vec<String>, weights: Vec<f64>) -> Self {
        assert_eq!(metrics.len(), weights.len(), "one weight per metric");
        CombinedMetricModel {
            name: COMBINED_METRIC.to_string(),
            metrics,
            weights,
            ranges: NormalizationRanges::new(),
            lambda: 0.0,
            metadata: TrainingMetadata::default(),
        }
    }

    pub fn uniform(metrics: Vec<String>) -> Self {
        let w = 1.0 / metrics.len() as f64;
        let n = metrics.len();
        Self::with_weights(metrics, vec![w; n])
    }

    pub fn weight(&self, metric: &str) -> Option<f64> {
        self.metrics.iter().position(|m| m == metric).map(|i| self.weights[i])
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serialization is infallible");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: CombinedMetricModel = serde_json::from_str(text)?;
        if model.metrics.len() != model.weights.len() {
            return Err(Error::Validation(format!(
                "model has {} metrics but {} weights",
                model.metrics.len(),
                model.weights.len()
            )));
        }
        Ok(model)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Normalizes `raw` with the model's ranges and combines it.
    pub fn score(&self, raw: &MetricScoreTable) -> Result<MetricScoreTable> {
        let mut selected = MetricScoreTable::new();
        for m in &self.metrics {
            selected.merge(raw.select(m)?)?;
        }
        let (normalized, _) = minmax_normalize(&selected, Some(&self.ranges))?;
        crate::scoring::combine(&normalized, self)
    }
}

impl CombinedMetricModel {
    /// Combined score of one unit from its raw scores, given in the order of
    /// `self.metrics`.
    pub fn score_values(&self, raw: &[f64]) -> Result<f64> {
        if raw.len() != self.metrics.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} scores, got {}",
                self.metrics.len(),
                raw.len()
            )));
        }
        let mut total = 0.0;
        for ((metric, w), &s) in self.metrics.iter().zip(&self.weights).zip(raw) {
            let range = self
                .ranges
                .get(metric)
                .ok_or_else(|| Error::MissingMetric(format!("no normalization range for {metric}")))?;
            total += w * range.apply(s, true);
        }
        Ok(total)
    }
}

#[derive(Debug, Clone)]
pub struct TuneConfig {
    pub lambda_grid: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
    pub train: TrainOptions,
}

impl TuneConfig {
    pub fn new(seed: u64) -> Self {
        TuneConfig {
            lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(),
            folds: 5,
            seed,
            train: TrainOptions::default(),
        }
    }
}

/// Full tuning pipeline: normalize raw scores, expand training pairs, select
/// lambda by cross-validation and fit on all examples.
pub fn tune(
    raw: &MetricScoreTable,
    judgments: &[RankingJudgment],
    metrics: &[String],
    cfg: &TuneConfig,
) -> Result<CombinedMetricModel> {
    if judgments.is_empty() {
        return Err(Error::Empty("no judgments".to_string()));
    }
    if metrics.is_empty() {
        return Err(Error::Empty("no metrics to combine".to_string()));
    }
    let mut selected = MetricScoreTable::new();
    for m in metrics {
        selected.merge(raw.select(m)?)?;
    }
    let (normalized, ranges) = minmax_normalize(&selected, None)?;
    let pairs = expand_rankings(judgments, ExpandMode::Train);
    let examples = build_examples(&pairs, &normalized, metrics)?;
    if examples.is_empty() {
        return Err(Error::Empty("no training pairs after filtering".to_string()));
    }
    let selection = select_lambda(&examples, &cfg.lambda_grid, cfg.folds, cfg.seed, &cfg.train)?;
    let fit = train(&examples, selection.lambda, &cfg.train)?;
    Ok(CombinedMetricModel {
        name: COMBINED_METRIC.to_string(),
        metrics: metrics.to_vec(),
        weights: fit.weights,
        ranges,
        lambda: selection.lambda,
        metadata: TrainingMetadata {
            datasets: Vec::new(),
            seed: Some(cfg.seed),
            folds: cfg.folds,
            fold_stratification: "lang_pair".to_string(),
            examples: examples.len(),
            optimizer_iterations: fit.iterations,
            converged: fit.converged,
            cv_scores: selection.scores,
        },
    })
}
