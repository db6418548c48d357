//! Per-segment metric score tables: discourse metrics computed from tree
//! files, external scores read from TSV, min-max normalization and linear
//! combination.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{similarity_or_absent, KernelConfig};
use crate::representation::{ablated_representation, to_representation, AblationKind, RepresentationKind};
use crate::rst::TreeCorpus;
use crate::tuning::CombinedMetricModel;

pub const TSV_HEADER: &str = "metric\tlang_pair\tsystem\tsegment\tscore";

/// One translation: a system's output for a segment of a language pair.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Unit {
    pub lang_pair: String,
    pub system: String,
    pub segment: u64,
}

impl Unit {
    pub fn new(lang_pair: &str, system: &str, segment: u64) -> Self {
        Unit {
            lang_pair: lang_pair.to_string(),
            system: system.to_string(),
            segment,
        }
    }
}

/// Scores keyed by metric and then by translation unit. Entries not present
/// are missing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricScoreTable {
    columns: BTreeMap<String, BTreeMap<Unit, f64>>,
}

impl MetricScoreTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, metric: &str, unit: Unit, score: f64) -> Result<()> {
        if !score.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "non-finite score {score} for {metric} {unit:?}"
            )));
        }
        let column = self.columns.entry(metric.to_string()).or_default();
        if column.contains_key(&unit) {
            return Err(Error::DuplicateKey(format!(
                "{metric}\t{}\t{}\t{}",
                unit.lang_pair, unit.system, unit.segment
            )));
        }
        column.insert(unit, score);
        Ok(())
    }

    pub fn get(&self, metric: &str, unit: &Unit) -> Option<f64> {
        self.columns.get(metric)?.get(unit).copied()
    }

    pub fn column(&self, metric: &str) -> Option<&BTreeMap<Unit, f64>> {
        self.columns.get(metric)
    }

    pub fn metrics(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    pub fn has_metric(&self, metric: &str) -> bool {
        self.columns.contains_key(metric)
    }

    /// Every unit scored by at least one metric.
    pub fn units(&self) -> BTreeSet<&Unit> {
        self.columns.values().flat_map(BTreeMap::keys).collect()
    }

    pub fn len(&self) -> usize {
        self.columns.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// (metric, unit, score) in key order.
    pub fn rows(&self) -> impl Iterator<Item = (&str, &Unit, f64)> {
        self.columns
            .iter()
            .flat_map(|(m, col)| col.iter().map(move |(u, s)| (m.as_str(), u, *s)))
    }

    /// Merges `other` into `self`; overlapping keys are an error.
    pub fn merge(&mut self, other: MetricScoreTable) -> Result<()> {
        for (metric, column) in other.columns {
            for (unit, score) in column {
                self.insert(&metric, unit, score)?;
            }
        }
        Ok(())
    }

    /// A table restricted to the given metric.
    pub fn select(&self, metric: &str) -> Result<MetricScoreTable> {
        let column = self
            .columns
            .get(metric)
            .ok_or_else(|| Error::MissingMetric(metric.to_string()))?;
        Ok(MetricScoreTable {
            columns: BTreeMap::from([(metric.to_string(), column.clone())]),
        })
    }

    /// Applies `f` to every score of one metric.
    pub fn map_metric(&self, metric: &str, mut f: impl FnMut(&Unit, f64) -> f64) -> Result<MetricScoreTable> {
        let mut out = self.clone();
        let column = out
            .columns
            .get_mut(metric)
            .ok_or_else(|| Error::MissingMetric(metric.to_string()))?;
        for (unit, score) in column.iter_mut() {
            *score = f(unit, *score);
        }
        Ok(out)
    }

    /// Parses the scores TSV. A score of `NA` marks an explicitly missing
    /// entry and is skipped.
    pub fn parse_tsv<R: BufRead>(reader: R) -> Result<Self> {
        let mut table = MetricScoreTable::new();
        let mut lines = reader.lines().enumerate();
        let syntax = |line: usize, message: String| Error::Syntax { line, message };
        match lines.next() {
            Some((_, Ok(header))) if header.trim_end() == TSV_HEADER => {}
            Some((_, Ok(header))) => {
                return Err(syntax(1, format!("expected header {TSV_HEADER:?}, found {header:?}")))
            }
            Some((_, Err(e))) => return Err(syntax(1, e.to_string())),
            None => return Err(syntax(1, "empty file".to_string())),
        }
        for (idx, line) in lines {
            let lineno = idx + 1;
            let line = line.map_err(|e| syntax(lineno, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim_end_matches(['\r', '\n']).split('\t').collect();
            let [metric, lang_pair, system, segment, score] = fields[..] else {
                return Err(syntax(lineno, format!("expected 5 fields, found {}", fields.len())));
            };
            if metric.is_empty() || lang_pair.is_empty() || system.is_empty() {
                return Err(syntax(lineno, "empty key field".to_string()));
            }
            let segment: u64 = segment
                .parse()
                .map_err(|_| syntax(lineno, format!("invalid segment id {segment:?}")))?;
            if score == "NA" {
                continue;
            }
            let score: f64 = score
                .parse()
                .map_err(|_| syntax(lineno, format!("invalid score {score:?}")))?;
            if !score.is_finite() {
                return Err(syntax(lineno, format!("non-finite score {score}")));
            }
            table
                .insert(metric, Unit::new(lang_pair, system, segment), score)
                .map_err(|e| match e {
                    Error::DuplicateKey(k) => Error::DuplicateKey(format!("line {lineno}: {k}")),
                    other => other,
                })?;
        }
        Ok(table)
    }

    pub fn read_tsv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tsv(std::io::BufReader::new(file))
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{TSV_HEADER}")?;
        for (metric, unit, score) in self.rows() {
            writeln!(
                out,
                "{metric}\t{}\t{}\t{}\t{score}",
                unit.lang_pair, unit.system, unit.segment
            )?;
        }
        Ok(())
    }
}

/// Metric name for a representation under an ablation. Ablated scores are
/// always computed on `DR-LEX`.
pub fn dr_metric_name(kind: RepresentationKind, ablation: AblationKind) -> String {
    match ablation {
        AblationKind::Full => kind.metric_name().to_string(),
        other => format!("{}{}", RepresentationKind::DrLex.metric_name(), other.suffix()),
    }
}

/// Scores each system's hypothesis trees against the reference trees.
///
/// With `AblationKind::Full` one metric is produced per requested kind;
/// any other ablation yields the single ablated `DR-LEX` metric.
pub fn score_dr_metrics(
    refs: &TreeCorpus,
    hyps: &BTreeMap<String, TreeCorpus>,
    lang_pair: &str,
    kinds: &BTreeSet<RepresentationKind>,
    ablation: AblationKind,
    cfg: &KernelConfig,
) -> Result<MetricScoreTable> {
    for corpus in hyps.values() {
        refs.check_aligned(corpus)?;
    }
    let kinds: Vec<RepresentationKind> = if ablation == AblationKind::Full {
        kinds.iter().copied().collect()
    } else {
        vec![RepresentationKind::DrLex]
    };
    let render = |tree: &crate::rst::RstTree, kind| match ablation {
        AblationKind::Full => to_representation(tree, kind),
        other => ablated_representation(tree, other),
    };
    let mut table = MetricScoreTable::new();
    for kind in kinds {
        let name = dr_metric_name(kind, ablation);
        let rendered_refs: BTreeMap<u64, _> = refs
            .iter()
            .map(|(seg, tree)| (seg, tree.map(|t| render(t, kind))))
            .collect();
        for (system, corpus) in hyps {
            for (seg, hyp) in corpus.iter() {
                let hyp = hyp.map(|t| render(t, kind));
                let score = match similarity_or_absent(rendered_refs[&seg].as_ref(), hyp.as_ref(), cfg) {
                    Ok(s) => s,
                    Err(Error::KernelOverflow) => {
                        log::warn!("{name} {system} segment {seg}: kernel overflow, scoring 0");
                        0.0
                    }
                    Err(e) => return Err(e),
                };
                table.insert(&name, Unit::new(lang_pair, system, seg), score)?;
            }
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    /// Maps `score` into the range's unit interval; a degenerate range maps
    /// everything to 0.
    pub fn apply(&self, score: f64, clamp: bool) -> f64 {
        let width = self.max - self.min;
        let v = if width > 0.0 { (score - self.min) / width } else { 0.0 };
        if clamp {
            v.clamp(0.0, 1.0)
        } else {
            v
        }
    }
}

/// Per-metric score ranges from the tuning corpus.
pub type NormalizationRanges = BTreeMap<String, Range>;

/// Rescales every metric to `[0, 1]`. When `ranges` is given (test time) the
/// stored ranges are reused and outputs are clamped; otherwise ranges are
/// computed from `table` and returned.
pub fn minmax_normalize(
    table: &MetricScoreTable,
    ranges: Option<&NormalizationRanges>,
) -> Result<(MetricScoreTable, NormalizationRanges)> {
    let mut out = MetricScoreTable::new();
    let mut used = NormalizationRanges::new();
    for (metric, column) in &table.columns {
        if column.is_empty() {
            return Err(Error::Empty(format!("metric column {metric}")));
        }
        let (range, clamp) = match ranges {
            Some(r) => (
                *r.get(metric)
                    .ok_or_else(|| Error::MissingMetric(format!("no normalization range for {metric}")))?,
                true,
            ),
            None => {
                let (min, max) = column
                    .values()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
                        (lo.min(s), hi.max(s))
                    });
                (Range { min, max }, false)
            }
        };
        let width = range.max - range.min;
        if width <= 0.0 {
            log::warn!(
                "metric {metric} has a degenerate range [{}, {}]; mapping to 0",
                range.min,
                range.max
            );
        }
        let normalized: BTreeMap<Unit, f64> = column
            .iter()
            .map(|(unit, &s)| (unit.clone(), range.apply(s, clamp)))
            .collect();
        out.columns.insert(metric.clone(), normalized);
        used.insert(metric.clone(), range);
    }
    Ok((out, used))
}

/// Weighted sum of the model's metrics for every unit scored by any of them.
/// Missing scores count as 0.
pub fn combine(table: &MetricScoreTable, model: &CombinedMetricModel) -> Result<MetricScoreTable> {
    let columns = model
        .metrics
        .iter()
        .map(|m| table.column(m).ok_or_else(|| Error::MissingMetric(m.clone())))
        .collect::<Result<Vec<_>>>()?;
    let units: BTreeSet<&Unit> = columns.iter().flat_map(|c| c.keys()).collect();
    let mut out = MetricScoreTable::new();
    let mut missing = 0usize;
    for unit in units {
        let mut total = 0.0;
        for (column, w) in columns.iter().zip(&model.weights) {
            match column.get(unit) {
                Some(u) => total += w * u,
                None => missing += 1,
            }
        }
        out.insert(&model.name, unit.clone(), total)?;
    }
    if missing > 0 {
        log::warn!("{missing} missing metric scores treated as 0 in {}", model.name);
    }
    Ok(out)
}
