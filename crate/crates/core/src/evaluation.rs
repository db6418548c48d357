//! Correlation of metric scores with human judgments.
//!
//! Segment level: Kendall's tau over the pooled pairwise human judgments,
//! `(C - D) / (C + D)`. System level: human win ratios are correlated with
//! per-system mean metric scores using Spearman's rho or Pearson's r,
//! computed per language pair and then averaged.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::MetricScoreTable;
use crate::tuning::{expand_rankings, ExpandMode, PairwiseJudgment, RankingJudgment};

/// How a metric tie on a human-decided pair is counted. Human ties never
/// enter the statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TiePolicy {
    /// Neither concordant nor discordant.
    #[default]
    Exclude,
    /// Counted as discordant.
    Discordant,
}

impl TiePolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            TiePolicy::Exclude => "exclude",
            TiePolicy::Discordant => "discordant",
        }
    }
}

impl FromStr for TiePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exclude" | "wmt12" => Ok(TiePolicy::Exclude),
            "discordant" => Ok(TiePolicy::Discordant),
            _ => Err(Error::InvalidArgument(format!("unknown tie policy {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TauConfig {
    pub metric_tie_policy: TiePolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Concordant,
    Discordant,
    Excluded,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TauCounts {
    pub concordant: u64,
    pub discordant: u64,
    pub excluded: u64,
}

impl TauCounts {
    pub fn add(&mut self, outcome: Outcome) {
        match outcome {
            Outcome::Concordant => self.concordant += 1,
            Outcome::Discordant => self.discordant += 1,
            Outcome::Excluded => self.excluded += 1,
        }
    }

    pub fn merge(&mut self, other: &TauCounts) {
        self.concordant += other.concordant;
        self.discordant += other.discordant;
        self.excluded += other.excluded;
    }

    pub fn tau(&self) -> Result<f64> {
        let used = self.concordant + self.discordant;
        if used == 0 {
            return Err(Error::NoUsablePairs);
        }
        Ok((self.concordant as f64 - self.discordant as f64) / used as f64)
    }
}

impl FromIterator<Outcome> for TauCounts {
    fn from_iter<I: IntoIterator<Item = Outcome>>(iter: I) -> Self {
        let mut c = TauCounts::default();
        for o in iter {
            c.add(o);
        }
        c
    }
}

/// Per-language scores keyed by language pair, then system.
pub type SystemScores = BTreeMap<String, BTreeMap<String, f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub metric: String,
    pub statistic: String,
    pub per_language: BTreeMap<String, f64>,
    pub overall: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub counts: Option<TauCounts>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub per_language_counts: BTreeMap<String, TauCounts>,
}

/// Concordance of the metric with each human judgment.
pub fn pair_decisions(
    table: &MetricScoreTable,
    metric: &str,
    pairs: &[PairwiseJudgment],
    cfg: &TauConfig,
) -> Result<Vec<Outcome>> {
    let column = table
        .column(metric)
        .ok_or_else(|| Error::MissingMetric(metric.to_string()))?;
    pairs
        .iter()
        .map(|p| {
            let score = |unit: crate::scoring::Unit| {
                column.get(&unit).copied().ok_or_else(|| {
                    Error::MissingScore(format!(
                        "{metric} has no score for {} {} segment {}",
                        unit.lang_pair, unit.system, unit.segment
                    ))
                })
            };
            let better = score(p.better_unit())?;
            let worse = score(p.worse_unit())?;
            Ok(if better > worse {
                Outcome::Concordant
            } else if better < worse {
                Outcome::Discordant
            } else {
                match cfg.metric_tie_policy {
                    TiePolicy::Exclude => Outcome::Excluded,
                    TiePolicy::Discordant => Outcome::Discordant,
                }
            })
        })
        .collect()
}

/// Kendall's tau over already-expanded pairwise judgments.
pub fn kendall_tau_pairs(
    table: &MetricScoreTable,
    metric: &str,
    pairs: &[PairwiseJudgment],
    cfg: &TauConfig,
) -> Result<CorrelationReport> {
    let outcomes = pair_decisions(table, metric, pairs, cfg)?;
    let mut per_language_counts: BTreeMap<String, TauCounts> = BTreeMap::new();
    for (p, o) in pairs.iter().zip(&outcomes) {
        per_language_counts.entry(p.lang_pair.clone()).or_default().add(*o);
    }
    let mut pooled = TauCounts::default();
    for c in per_language_counts.values() {
        pooled.merge(c);
    }
    let per_language = per_language_counts
        .iter()
        .filter_map(|(lp, c)| c.tau().ok().map(|t| (lp.clone(), t)))
        .collect();
    Ok(CorrelationReport {
        metric: metric.to_string(),
        statistic: format!("kendall_tau[{}]", cfg.metric_tie_policy.as_str()),
        per_language,
        overall: pooled.tau()?,
        counts: Some(pooled),
        per_language_counts,
    })
}

/// Segment-level Kendall's tau over all pairwise judgments, repetitions
/// included.
pub fn kendall_tau(
    table: &MetricScoreTable,
    metric: &str,
    judgments: &[RankingJudgment],
    cfg: &TauConfig,
) -> Result<CorrelationReport> {
    kendall_tau_pairs(table, metric, &expand_rankings(judgments, ExpandMode::Test), cfg)
}

/// Win ratio `wins / (wins + losses)` of every system, ignoring ties.
pub fn human_system_scores(judgments: &[RankingJudgment]) -> Result<SystemScores> {
    let mut record: BTreeMap<(String, String), (u64, u64)> = BTreeMap::new();
    for j in judgments {
        for (s, _) in &j.ranks {
            record.entry((j.lang_pair.clone(), s.clone())).or_default();
        }
    }
    for p in expand_rankings(judgments, ExpandMode::Test) {
        record
            .get_mut(&(p.lang_pair.clone(), p.better))
            .expect("ranked system")
            .0 += 1;
        record.get_mut(&(p.lang_pair, p.worse)).expect("ranked system").1 += 1;
    }
    let mut out = SystemScores::new();
    for ((lp, sys), (wins, losses)) in record {
        if wins + losses == 0 {
            return Err(Error::UndefinedCorrelation(format!(
                "system {sys} ({lp}) has no decided comparisons"
            )));
        }
        out.entry(lp)
            .or_default()
            .insert(sys, wins as f64 / (wins + losses) as f64);
    }
    Ok(out)
}

/// Mean segment score per system.
pub fn metric_system_scores(table: &MetricScoreTable, metric: &str) -> Result<SystemScores> {
    let column = table
        .column(metric)
        .ok_or_else(|| Error::MissingMetric(metric.to_string()))?;
    let mut sums: BTreeMap<(&str, &str), (f64, usize)> = BTreeMap::new();
    for (unit, score) in column {
        let e = sums.entry((&unit.lang_pair, &unit.system)).or_default();
        e.0 += score;
        e.1 += 1;
    }
    let mut out = SystemScores::new();
    for ((lp, sys), (sum, n)) in sums {
        out.entry(lp.to_string())
            .or_default()
            .insert(sys.to_string(), sum / n as f64);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RankMode {
    /// Ties are an error.
    Strict,
    /// Ties get average ranks and rho is Pearson on ranks.
    #[default]
    Lenient,
}

/// Ranks with 1 for the largest value; tied values share their mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn has_ties(values: &[f64]) -> bool {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.windows(2).any(|w| w[0] == w[1])
}

/// Spearman's rank correlation `1 - 6 sum d^2 / (n (n^2 - 1))`.
pub fn spearman(human: &[f64], metric: &[f64], mode: RankMode) -> Result<f64> {
    check_lengths(human, metric)?;
    let tied = has_ties(human) || has_ties(metric);
    if tied && mode == RankMode::Strict {
        return Err(Error::UndefinedCorrelation(
            "tied ranks are not allowed in strict mode".to_string(),
        ));
    }
    let rh = average_ranks(human);
    let rm = average_ranks(metric);
    if tied {
        log::warn!("tied ranks; using Pearson correlation of average ranks");
        return pearson(&rh, &rm);
    }
    let n = human.len() as f64;
    let d2: f64 = rh.iter().zip(&rm).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - 6.0 * d2 / (n * (n * n - 1.0)))
}

pub fn pearson(human: &[f64], metric: &[f64]) -> Result<f64> {
    check_lengths(human, metric)?;
    let n = human.len() as f64;
    let mh = human.iter().sum::<f64>() / n;
    let mm = metric.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (h, m) in human.iter().zip(metric) {
        let (dh, dm) = (h - mh, m - mm);
        sxy += dh * dm;
        sxx += dh * dh;
        syy += dm * dm;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant score vector".to_string()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "score vectors differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::UndefinedCorrelation(format!(
            "{} systems; need at least 2",
            a.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemStatistic {
    Spearman,
    Pearson,
    Both,
}

impl FromStr for SystemStatistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "spearman" => Ok(SystemStatistic::Spearman),
            "pearson" => Ok(SystemStatistic::Pearson),
            "both" => Ok(SystemStatistic::Both),
            _ => Err(Error::InvalidArgument(format!("unknown statistic {s:?}"))),
        }
    }
}

/// Per-language system-level correlation, averaged over language pairs.
pub fn system_level_report(
    table: &MetricScoreTable,
    metric: &str,
    judgments: &[RankingJudgment],
    which: SystemStatistic,
    mode: RankMode,
) -> Result<Vec<CorrelationReport>> {
    let human = human_system_scores(judgments)?;
    let automatic = metric_system_scores(table, metric)?;
    let mut vectors: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (lp, systems) in &human {
        let metric_scores = automatic.get(lp);
        let entry = vectors.entry(lp).or_default();
        for (sys, h) in systems {
            let m = metric_scores
                .and_then(|m| m.get(sys))
                .ok_or_else(|| Error::MissingScore(format!("{metric} has no scores for system {sys} ({lp})")))?;
            entry.0.push(*h);
            entry.1.push(*m);
        }
    }
    let stats: &[SystemStatistic] = match which {
        SystemStatistic::Both => &[SystemStatistic::Spearman, SystemStatistic::Pearson],
        SystemStatistic::Spearman => &[SystemStatistic::Spearman],
        SystemStatistic::Pearson => &[SystemStatistic::Pearson],
    };
    let mut out = Vec::new();
    for stat in stats {
        let mut per_language = BTreeMap::new();
        for (lp, (h, m)) in &vectors {
            let value = match stat {
                SystemStatistic::Spearman => spearman(h, m, mode),
                _ => pearson(h, m),
            }
            .map_err(|e| match e {
                Error::UndefinedCorrelation(msg) => Error::UndefinedCorrelation(format!("{lp}: {msg}")),
                other => other,
            })?;
            per_language.insert(lp.to_string(), value);
        }
        if per_language.is_empty() {
            return Err(Error::Empty("no language pairs with judgments".to_string()));
        }
        let overall = per_language.values().sum::<f64>() / per_language.len() as f64;
        out.push(CorrelationReport {
            metric: metric.to_string(),
            statistic: match stat {
                SystemStatistic::Spearman => "spearman",
                _ => "pearson",
            }
            .to_string(),
            per_language,
            overall,
            counts: None,
            per_language_counts: BTreeMap::new(),
        });
    }
    Ok(out)
}

/// Adds `epsilon * system_score` to every segment score of the metric so
/// that segment-level ties between systems follow the system-level order.
pub fn break_ties(table: &MetricScoreTable, metric: &str, epsilon: f64) -> Result<MetricScoreTable> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let systems = metric_system_scores(table, metric)?;
    table.map_metric(metric, |unit, score| {
        score + epsilon * systems[&unit.lang_pair][&unit.system]
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub tau_a: f64,
    pub tau_b: f64,
    pub delta: f64,
    pub rounds: usize,
    pub p_value: f64,
}

fn tau_or_zero(counts: &TauCounts) -> f64 {
    counts.tau().unwrap_or(0.0)
}

/// Paired approximate randomization test on the absolute tau difference.
/// Each round swaps the two metrics' outcomes on every judgment with
/// probability 1/2.
pub fn randomization_test(a: &[Outcome], b: &[Outcome], rounds: usize, seed: u64) -> Result<SignificanceResult> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "decision vectors differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if rounds == 0 {
        return Err(Error::InvalidArgument("zero randomization rounds".to_string()));
    }
    let ca: TauCounts = a.iter().copied().collect();
    let cb: TauCounts = b.iter().copied().collect();
    let (tau_a, tau_b) = (tau_or_zero(&ca), tau_or_zero(&cb));
    let observed = (tau_a - tau_b).abs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut at_least = 0usize;
    for _ in 0..rounds {
        let mut pa = TauCounts::default();
        let mut pb = TauCounts::default();
        for (&oa, &ob) in a.iter().zip(b) {
            if rng.gen_bool(0.5) {
                pa.add(ob);
                pb.add(oa);
            } else {
                pa.add(oa);
                pb.add(ob);
            }
        }
        if (tau_or_zero(&pa) - tau_or_zero(&pb)).abs() >= observed - 1e-12 {
            at_least += 1;
        }
    }
    Ok(SignificanceResult {
        tau_a,
        tau_b,
        delta: tau_a - tau_b,
        rounds,
        p_value: (1 + at_least) as f64 / (1 + rounds) as f64,
    })
}

/// Aligned plain-text table of reports, one row per report.
pub fn render_table(reports: &[CorrelationReport]) -> String {
    let langs: BTreeSet<&str> = reports
        .iter()
        .flat_map(|r| r.per_language.keys().map(String::as_str))
        .collect();
    let mut header = vec!["metric".to_string(), "statistic".to_string()];
    header.extend(langs.iter().map(|l| l.to_string()));
    header.push("overall".to_string());
    let mut rows = vec![header];
    for r in reports {
        let mut row = vec![r.metric.clone(), r.statistic.clone()];
        row.extend(
            langs
                .iter()
                .map(|l| r.per_language.get(*l).map_or("-".to_string(), |v| format!("{v:.4}"))),
        );
        row.push(format!("{:.4}", r.overall));
        rows.push(row);
    }
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (cell, w))| {
                if i < 2 {
                    format!("{cell:<w$}")
                } else {
                    format!("{cell:>w$}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    out
}
