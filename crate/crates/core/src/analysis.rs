//! Ablations and structural comparison of hypothesis trees against
//! reference ("gold") trees: depth statistics, label distributions with KL
//! divergence, simplified F1 and depth RMSE for good and bad system cohorts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelConfig;
use crate::representation::{AblationKind, RepresentationKind};
use crate::rst::{LabelKind, RstTree, TreeCorpus};
use crate::scoring::{score_dr_metrics, MetricScoreTable};

pub const DEFAULT_KL_EPSILON: f64 = 1e-9;

/// `DR-LEX` scores under every ablation. The `Full` column is named `DR-LEX`.
pub fn ablation_sweep(
    refs: &TreeCorpus,
    hyps: &BTreeMap<String, TreeCorpus>,
    lang_pair: &str,
    cfg: &KernelConfig,
) -> Result<MetricScoreTable> {
    let kinds = BTreeSet::from([RepresentationKind::DrLex]);
    let mut table = MetricScoreTable::new();
    for ablation in AblationKind::ALL {
        table.merge(score_dr_metrics(refs, hyps, lang_pair, &kinds, ablation, cfg)?)?;
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthReport {
    pub trees: usize,
    /// Proportion of trees at each depth, for every depth from 0 to the max.
    pub proportions: BTreeMap<usize, f64>,
    pub avg_depth: f64,
    pub min_depth: usize,
    pub max_depth: usize,
    pub avg_edus: f64,
    pub min_edus: usize,
    pub max_edus: usize,
    pub nontrivial_fraction: f64,
}

impl DepthReport {
    /// One-line summary in the usual reporting shape.
    pub fn summary(&self) -> String {
        format!(
            "trees {}  depth avg {:.2} min {} max {}  EDUs avg {:.2} min {} max {}  non-trivial {:.1}%",
            self.trees,
            self.avg_depth,
            self.min_depth,
            self.max_depth,
            self.avg_edus,
            self.min_edus,
            self.max_edus,
            100.0 * self.nontrivial_fraction
        )
    }
}

pub fn depth_distribution<'a>(trees: impl IntoIterator<Item = &'a RstTree>) -> Result<DepthReport> {
    let stats: Vec<_> = trees.into_iter().map(RstTree::stats).collect();
    if stats.is_empty() {
        return Err(Error::Empty("no trees for depth statistics".to_string()));
    }
    let n = stats.len() as f64;
    let max_depth = stats.iter().map(|s| s.depth).max().unwrap_or(0);
    let mut counts = vec![0usize; max_depth + 1];
    for s in &stats {
        counts[s.depth] += 1;
    }
    Ok(DepthReport {
        trees: stats.len(),
        proportions: counts.iter().enumerate().map(|(d, c)| (d, *c as f64 / n)).collect(),
        avg_depth: stats.iter().map(|s| s.depth as f64).sum::<f64>() / n,
        min_depth: stats.iter().map(|s| s.depth).min().unwrap_or(0),
        max_depth,
        avg_edus: stats.iter().map(|s| s.edu_count as f64).sum::<f64>() / n,
        min_edus: stats.iter().map(|s| s.edu_count).min().unwrap_or(0),
        max_edus: stats.iter().map(|s| s.edu_count).max().unwrap_or(0),
        nontrivial_fraction: stats.iter().filter(|s| s.depth > 0).count() as f64 / n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub proportions: BTreeMap<String, f64>,
    pub epsilon: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub kl_to_gold: Option<f64>,
}

/// Counts smoothed by `epsilon` over `support` and renormalized.
pub fn smoothed_distribution(
    counts: &BTreeMap<String, f64>,
    support: &BTreeSet<String>,
    epsilon: f64,
) -> BTreeMap<String, f64> {
    let raw: BTreeMap<String, f64> = support
        .iter()
        .map(|l| (l.clone(), counts.get(l).copied().unwrap_or(0.0) + epsilon))
        .collect();
    let total: f64 = raw.values().sum();
    raw.into_iter()
        .map(|(l, c)| (l, if total > 0.0 { c / total } else { 0.0 }))
        .collect()
}

/// `KL(p || q)` in nats after epsilon smoothing over the union support.
pub fn kl_divergence(p: &BTreeMap<String, f64>, q: &BTreeMap<String, f64>, epsilon: f64) -> f64 {
    let support: BTreeSet<String> = p.keys().chain(q.keys()).cloned().collect();
    let ps = smoothed_distribution(p, &support, epsilon);
    let qs = smoothed_distribution(q, &support, epsilon);
    ps.iter()
        .map(|(l, &pv)| {
            let qv = qs[l];
            if pv > 0.0 {
                pv * (pv / qv).ln()
            } else {
                0.0
            }
        })
        .sum::<f64>()
        .max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    pub true_positives: u64,
    pub hyp_total: u64,
    pub gold_total: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when a denominator was zero and the affected values were reported
    /// as 0.
    pub undefined: bool,
}

impl F1Report {
    fn from_counts(tp: u64, hyp: u64, gold: u64) -> Self {
        let precision = if hyp > 0 { tp as f64 / hyp as f64 } else { 0.0 };
        let recall = if gold > 0 { tp as f64 / gold as f64 } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        F1Report {
            true_positives: tp,
            hyp_total: hyp,
            gold_total: gold,
            precision,
            recall,
            f1,
            undefined: hyp == 0 || gold == 0,
        }
    }
}

fn counts_of(tree: Option<&RstTree>, kind: LabelKind) -> BTreeMap<String, usize> {
    tree.map(|t| t.label_counts(kind)).unwrap_or_default()
}

/// Position-free F1: per segment, true positives for a label are the smaller
/// of its hypothesis and gold counts. Counts are pooled over `pairs` and over
/// all `labels` (micro-average).
pub fn f1_over_pairs<'a>(
    pairs: impl IntoIterator<Item = (Option<&'a RstTree>, Option<&'a RstTree>)>,
    labels: &[String],
    kind: LabelKind,
) -> F1Report {
    let (mut tp, mut hyp_total, mut gold_total) = (0u64, 0u64, 0u64);
    for (hyp, gold) in pairs {
        let hc = counts_of(hyp, kind);
        let gc = counts_of(gold, kind);
        for label in labels {
            let h = hc.get(label).copied().unwrap_or(0) as u64;
            let g = gc.get(label).copied().unwrap_or(0) as u64;
            tp += h.min(g);
            hyp_total += h;
            gold_total += g;
        }
    }
    F1Report::from_counts(tp, hyp_total, gold_total)
}

pub fn simplified_f1(hyp: &TreeCorpus, gold: &TreeCorpus, labels: &[String], kind: LabelKind) -> Result<F1Report> {
    gold.check_aligned(hyp)?;
    Ok(f1_over_pairs(
        gold.segments().map(|s| (hyp.get(s), gold.get(s))),
        labels,
        kind,
    ))
}

/// Root-mean-squared depth difference pooled over all pairs where both
/// trees are present.
pub fn rmse_over_pairs<'a>(pairs: impl IntoIterator<Item = (Option<&'a RstTree>, Option<&'a RstTree>)>) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (hyp, gold) in pairs {
        if let (Some(h), Some(g)) = (hyp, gold) {
            let d = h.stats().depth as f64 - g.stats().depth as f64;
            sum += d * d;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Empty("no segment with both trees present".to_string()));
    }
    Ok((sum / n as f64).sqrt())
}

pub fn depth_rmse(hyp: &TreeCorpus, gold: &TreeCorpus) -> Result<f64> {
    gold.check_aligned(hyp)?;
    rmse_over_pairs(gold.segments().map(|s| (hyp.get(s), gold.get(s))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CohortSpec {
    pub k: usize,
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec { k: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortStats {
    pub systems: Vec<String>,
    pub relations: DistributionReport,
    pub nuclearity: DistributionReport,
    pub relation_f1: BTreeMap<String, F1Report>,
    pub relation_micro_f1: F1Report,
    pub nuclearity_f1: F1Report,
    pub edu_f1: F1Report,
    pub depth_rmse: f64,
    pub depth: DepthReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortReport {
    pub k: usize,
    pub ranking: Vec<(String, f64)>,
    pub f1_averaging: String,
    pub gold_relations: BTreeMap<String, f64>,
    pub gold_nuclearity: BTreeMap<String, f64>,
    pub gold_depth: DepthReport,
    pub good: CohortStats,
    pub bad: CohortStats,
}

fn pooled_counts<'a>(trees: impl IntoIterator<Item = &'a RstTree>, kind: LabelKind) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for t in trees {
        for (l, c) in t.label_counts(kind) {
            *out.entry(l).or_insert(0.0) += c as f64;
        }
    }
    out
}

fn proportions(counts: &BTreeMap<String, f64>) -> BTreeMap<String, f64> {
    let total: f64 = counts.values().sum();
    counts
        .iter()
        .map(|(l, c)| (l.clone(), if total > 0.0 { c / total } else { 0.0 }))
        .collect()
}

/// Orders systems by human score, best first, with ties broken by name.
pub fn rank_systems(human: &BTreeMap<String, f64>) -> Vec<(String, f64)> {
    let mut ranking: Vec<(String, f64)> = human.iter().map(|(s, v)| (s.clone(), *v)).collect();
    ranking.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranking
}

/// Compares the trees of the top-k and bottom-k systems (by human score)
/// with the gold trees.
pub fn cohort_report(
    spec: CohortSpec,
    gold: &TreeCorpus,
    systems: &BTreeMap<String, TreeCorpus>,
    human: &BTreeMap<String, f64>,
) -> Result<CohortReport> {
    for (name, corpus) in systems {
        if !human.contains_key(name) {
            return Err(Error::MissingScore(format!("no human score for system {name}")));
        }
        gold.check_aligned(corpus)?;
    }
    let ranking: Vec<(String, f64)> = rank_systems(human)
        .into_iter()
        .filter(|(s, _)| systems.contains_key(s))
        .collect();
    if spec.k == 0 || 2 * spec.k > ranking.len() {
        return Err(Error::InvalidArgument(format!(
            "cohort size {} needs at least {} ranked systems, found {}",
            spec.k,
            2 * spec.k,
            ranking.len()
        )));
    }
    let good: Vec<String> = ranking[..spec.k].iter().map(|(s, _)| s.clone()).collect();
    let bad: Vec<String> = ranking[ranking.len() - spec.k..]
        .iter()
        .map(|(s, _)| s.clone())
        .collect();

    let gold_rel = pooled_counts(gold.trees(), LabelKind::Relation);
    let gold_nuc = pooled_counts(gold.trees(), LabelKind::Nuclearity);
    let mut relation_labels: BTreeSet<String> = gold_rel.keys().cloned().collect();
    for corpus in systems.values() {
        relation_labels.extend(pooled_counts(corpus.trees(), LabelKind::Relation).into_keys());
    }
    let relation_labels: Vec<String> = relation_labels.into_iter().collect();
    let nuclearity_labels = vec!["Nucleus".to_string(), "Satellite".to_string()];
    let edu_labels = vec!["EDU".to_string()];

    let cohort = |members: &[String]| -> Result<CohortStats> {
        let pairs = || {
            members.iter().flat_map(|m| {
                let corpus = &systems[m];
                gold.segments().map(move |s| (corpus.get(s), gold.get(s)))
            })
        };
        let trees = || members.iter().flat_map(|m| systems[m].trees());
        let rel = pooled_counts(trees(), LabelKind::Relation);
        let nuc = pooled_counts(trees(), LabelKind::Nuclearity);
        Ok(CohortStats {
            systems: members.to_vec(),
            relations: DistributionReport {
                proportions: proportions(&rel),
                epsilon: DEFAULT_KL_EPSILON,
                kl_to_gold: Some(kl_divergence(&rel, &gold_rel, DEFAULT_KL_EPSILON)),
            },
            nuclearity: DistributionReport {
                proportions: proportions(&nuc),
                epsilon: DEFAULT_KL_EPSILON,
                kl_to_gold: Some(kl_divergence(&nuc, &gold_nuc, DEFAULT_KL_EPSILON)),
            },
            relation_f1: relation_labels
                .iter()
                .map(|l| {
                    (
                        l.clone(),
                        f1_over_pairs(pairs(), std::slice::from_ref(l), LabelKind::Relation),
                    )
                })
                .collect(),
            relation_micro_f1: f1_over_pairs(pairs(), &relation_labels, LabelKind::Relation),
            nuclearity_f1: f1_over_pairs(pairs(), &nuclearity_labels, LabelKind::Nuclearity),
            edu_f1: f1_over_pairs(pairs(), &edu_labels, LabelKind::Edu),
            depth_rmse: rmse_over_pairs(pairs())?,
            depth: depth_distribution(trees())?,
        })
    };

    Ok(CohortReport {
        k: spec.k,
        ranking,
        f1_averaging: "micro (pooled counts, frequency-weighted)".to_string(),
        gold_relations: proportions(&gold_rel),
        gold_nuclearity: proportions(&gold_nuc),
        gold_depth: depth_distribution(gold.trees())?,
        good: cohort(&good)?,
        bad: cohort(&bad)?,
    })
}

impl CohortReport {
    /// Plain-text comparison of the two cohorts.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "good: {}", self.good.systems.join(", "));
        let _ = writeln!(out, "bad:  {}", self.bad.systems.join(", "));
        let _ = writeln!(out, "{:<22}{:>10}{:>10}", "measure", "good", "bad");
        let rows: [(&str, f64, f64); 7] = [
            (
                "relation KL",
                self.good.relations.kl_to_gold.unwrap_or(0.0),
                self.bad.relations.kl_to_gold.unwrap_or(0.0),
            ),
            (
                "nuclearity KL",
                self.good.nuclearity.kl_to_gold.unwrap_or(0.0),
                self.bad.nuclearity.kl_to_gold.unwrap_or(0.0),
            ),
            (
                "relation micro F1",
                self.good.relation_micro_f1.f1,
                self.bad.relation_micro_f1.f1,
            ),
            ("nuclearity F1", self.good.nuclearity_f1.f1, self.bad.nuclearity_f1.f1),
            ("EDU F1", self.good.edu_f1.f1, self.bad.edu_f1.f1),
            ("depth RMSE", self.good.depth_rmse, self.bad.depth_rmse),
            ("avg depth", self.good.depth.avg_depth, self.bad.depth.avg_depth),
        ];
        for (name, g, b) in rows {
            let _ = writeln!(out, "{name:<22}{g:>10.4}{b:>10.4}");
        }
        for (label, g) in &self.good.relation_f1 {
            let b = self.bad.relation_f1.get(label).map_or(0.0, |r| r.f1);
            let _ = writeln!(out, "{:<22}{:>10.4}{:>10.4}", format!("F1 {label}"), g.f1, b);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rst::Nuclearity;

    fn edu(n: Nuclearity, w: &str) -> RstTree {
        RstTree::edu(n, &[w])
    }

    fn elaborations(n: usize) -> RstTree {
        // right-branching chain of n Elaboration spans
        let mut t = edu(Nuclearity::Satellite, "z");
        for i in 0..n {
            let nuc = if i + 1 == n {
                Nuclearity::Root
            } else {
                Nuclearity::Satellite
            };
            t = RstTree::span(nuc, "Elaboration", vec![edu(Nuclearity::Nucleus, "a"), t]);
        }
        t
    }

    fn corpus(trees: Vec<Option<RstTree>>) -> TreeCorpus {
        trees.into_iter().enumerate().map(|(i, t)| (i as u64, t)).collect()
    }

    #[test]
    fn depth_distribution_cases() {
        let trivial = RstTree::edu(Nuclearity::Root, &["a"]);
        let r = depth_distribution([&trivial, &trivial]).unwrap();
        assert_eq!(r.proportions, BTreeMap::from([(0, 1.0)]));
        assert_eq!(r.avg_depth, 0.0);
        let two = elaborations(2);
        let r = depth_distribution([&trivial, &two]).unwrap();
        assert_eq!(r.proportions, BTreeMap::from([(0, 0.5), (1, 0.0), (2, 0.5)]));
        assert_eq!(r.avg_depth, 1.0);
        assert_eq!((r.min_depth, r.max_depth), (0, 2));
        assert_eq!(r.avg_edus, 2.0);
        assert!(depth_distribution(std::iter::empty()).is_err());
    }

    fn dist(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(l, c)| (l.to_string(), *c)).collect()
    }

    #[test]
    fn kl_cases() {
        let p = dist(&[("a", 3.0), ("b", 1.0)]);
        assert_eq!(kl_divergence(&p, &p, 1e-9), 0.0);
        let p = dist(&[("a", 1.0), ("b", 0.0)]);
        let q = dist(&[("a", 1.0), ("b", 1.0)]);
        assert!((kl_divergence(&p, &q, 1e-12) - std::f64::consts::LN_2).abs() < 1e-6);
        assert!((kl_divergence(&p, &q, 1e-12) - kl_divergence(&q, &p, 1e-12)).abs() > 0.1);
    }

    #[test]
    fn f1_min_count_example() {
        let hyp = corpus(vec![Some(elaborations(3))]);
        let gold = corpus(vec![Some(elaborations(2))]);
        let r = simplified_f1(&hyp, &gold, &["Elaboration".to_string()], LabelKind::Relation).unwrap();
        assert!((r.precision - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.recall, 1.0);
        assert!((r.f1 - 0.8).abs() < 1e-15);
        let same = simplified_f1(&gold, &gold, &["Elaboration".to_string()], LabelKind::Relation).unwrap();
        assert_eq!((same.precision, same.recall, same.f1), (1.0, 1.0, 1.0));
        let none = simplified_f1(&hyp, &gold, &["Contrast".to_string()], LabelKind::Relation).unwrap();
        assert_eq!(none.f1, 0.0);
        assert!(none.undefined);
    }

    #[test]
    fn rmse_cases() {
        let hyp = corpus(vec![Some(elaborations(1)), Some(elaborations(3))]);
        let gold = corpus(vec![Some(elaborations(2)), Some(elaborations(2))]);
        assert_eq!(depth_rmse(&hyp, &gold).unwrap(), 1.0);
        assert_eq!(depth_rmse(&gold, &gold).unwrap(), 0.0);
        let short = corpus(vec![Some(elaborations(1))]);
        assert!(matches!(depth_rmse(&short, &gold), Err(Error::Alignment { .. })));
    }

    fn systems() -> (TreeCorpus, BTreeMap<String, TreeCorpus>, BTreeMap<String, f64>) {
        let gold = corpus(vec![Some(elaborations(2)), Some(elaborations(1))]);
        let degraded = corpus(vec![
            Some(RstTree::edu(Nuclearity::Root, &["a"])),
            Some(elaborations(3)),
        ]);
        let systems = BTreeMap::from([
            ("s1".to_string(), gold.clone()),
            ("s2".to_string(), gold.clone()),
            ("s3".to_string(), degraded.clone()),
            ("s4".to_string(), degraded),
        ]);
        let human = BTreeMap::from([
            ("s1".to_string(), 0.9),
            ("s2".to_string(), 0.6),
            ("s3".to_string(), 0.4),
            ("s4".to_string(), 0.1),
        ]);
        (gold, systems, human)
    }

    #[test]
    fn cohorts_with_gold_copies() {
        let (gold, systems, human) = systems();
        let r = cohort_report(CohortSpec::default(), &gold, &systems, &human).unwrap();
        assert_eq!(r.good.systems, ["s1", "s2"]);
        assert_eq!(r.bad.systems, ["s3", "s4"]);
        assert_eq!(r.good.relation_micro_f1.f1, 1.0);
        assert_eq!(r.good.relations.kl_to_gold, Some(0.0));
        assert_eq!(r.good.depth_rmse, 0.0);
        assert!(r.bad.depth_rmse > 0.0);
        assert!(r.render().contains("depth RMSE"));
    }

    #[test]
    fn cohort_size_checked() {
        let (gold, systems, human) = systems();
        assert!(cohort_report(CohortSpec { k: 3 }, &gold, &systems, &human).is_err());
        let mut partial = human.clone();
        partial.remove("s4");
        assert!(cohort_report(CohortSpec::default(), &gold, &systems, &partial).is_err());
    }

    #[test]
    fn ranking_ties_by_name() {
        let human = BTreeMap::from([("b".to_string(), 0.5), ("a".to_string(), 0.5), ("c".to_string(), 0.7)]);
        let names: Vec<String> = rank_systems(&human).into_iter().map(|(s, _)| s).collect();
        assert_eq!(names, ["c", "a", "b"]);
    }

    #[test]
    fn sweep_identical_is_one() {
        let refs = corpus(vec![Some(elaborations(2)), Some(elaborations(1))]);
        let hyps = BTreeMap::from([("s".to_string(), refs.clone())]);
        let t = ablation_sweep(&refs, &hyps, "de-en", &KernelConfig::default()).unwrap();
        assert_eq!(t.metrics().count(), 5);
        assert!(t.rows().all(|(_, _, s)| s == 1.0));
    }
}
