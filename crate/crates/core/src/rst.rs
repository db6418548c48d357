//! Sentence-level RST discourse trees.
//!
//! A tree is either a single EDU (elementary discourse unit) carrying its
//! tokens, or a span joining two or more subtrees under a relation label.
//! Every node carries its nuclearity with respect to its parent; the root
//! carries [`Nuclearity::Root`].
//!
//! Trees are read from JSON lines of the form
//! `{"seg": <id>, "tree": <node>|null}` where `null` marks a segment whose
//! parse is missing.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The coarse-grained RST relation inventory.
pub const RELATION_VOCABULARY: [&str; 18] = [
    "Attribution",
    "Background",
    "Cause",
    "Comparison",
    "Condition",
    "Contrast",
    "Elaboration",
    "Enablement",
    "Evaluation",
    "Explanation",
    "Joint",
    "Manner-Means",
    "Topic-Comment",
    "Summary",
    "Temporal",
    "Topic-Change",
    "Textual-Organization",
    "Same-Unit",
];

/// Label used in place of relation and nuclearity tags by ablations.
pub const DUMMY_TAG: &str = "*";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Nuclearity {
    Nucleus,
    Satellite,
    Root,
    /// Nuclearity erased by an ablation.
    #[serde(rename = "*")]
    Masked,
}

impl Nuclearity {
    pub fn as_str(self) -> &'static str {
        match self {
            Nuclearity::Nucleus => "Nucleus",
            Nuclearity::Satellite => "Satellite",
            Nuclearity::Root => "Root",
            Nuclearity::Masked => DUMMY_TAG,
        }
    }
}

impl fmt::Display for Nuclearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationLabel(String);

impl RelationLabel {
    pub fn new(label: impl Into<String>) -> Self {
        RelationLabel(label.into())
    }

    pub fn masked() -> Self {
        RelationLabel(DUMMY_TAG.to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_canonical(&self) -> bool {
        RELATION_VOCABULARY.contains(&self.0.as_str())
    }
}

impl fmt::Display for RelationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RstTree {
    Edu {
        #[serde(rename = "nuc")]
        nuclearity: Nuclearity,
        tokens: Vec<String>,
    },
    Span {
        #[serde(rename = "nuc")]
        nuclearity: Nuclearity,
        #[serde(rename = "rel")]
        relation: RelationLabel,
        children: Vec<RstTree>,
    },
}

/// How invariant violations found while reading trees are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ValidationMode {
    /// Violations are logged and the tree is kept.
    #[default]
    Lenient,
    /// Violations are errors.
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeStats {
    pub depth: usize,
    pub edu_count: usize,
    pub token_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelKind {
    Relation,
    Nuclearity,
    Edu,
}

impl RstTree {
    pub fn edu(nuclearity: Nuclearity, tokens: &[&str]) -> Self {
        RstTree::Edu {
            nuclearity,
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
        }
    }

    pub fn span(nuclearity: Nuclearity, relation: &str, children: Vec<RstTree>) -> Self {
        RstTree::Span {
            nuclearity,
            relation: RelationLabel::new(relation),
            children,
        }
    }

    pub fn nuclearity(&self) -> Nuclearity {
        match self {
            RstTree::Edu { nuclearity, .. } | RstTree::Span { nuclearity, .. } => *nuclearity,
        }
    }

    pub fn is_edu(&self) -> bool {
        matches!(self, RstTree::Edu { .. })
    }

    /// Tokens of all EDUs, left to right.
    pub fn tokens(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.visit_edus(&mut |tokens| out.extend(tokens.iter().map(String::as_str)));
        out
    }

    fn visit_edus<'a>(&'a self, f: &mut impl FnMut(&'a [String])) {
        match self {
            RstTree::Edu { tokens, .. } => f(tokens),
            RstTree::Span { children, .. } => {
                for child in children {
                    child.visit_edus(f);
                }
            }
        }
    }

    /// Visits every node in preorder along with its depth in span edges.
    pub fn visit(&self, f: &mut impl FnMut(&RstTree, usize)) {
        fn go(node: &RstTree, depth: usize, f: &mut impl FnMut(&RstTree, usize)) {
            f(node, depth);
            if let RstTree::Span { children, .. } = node {
                for child in children {
                    go(child, depth + 1, f);
                }
            }
        }
        go(self, 0, f);
    }

    pub fn stats(&self) -> TreeStats {
        let mut stats = TreeStats {
            depth: 0,
            edu_count: 0,
            token_count: 0,
        };
        self.visit(&mut |node, depth| {
            if let RstTree::Edu { tokens, .. } = node {
                stats.depth = stats.depth.max(depth);
                stats.edu_count += 1;
                stats.token_count += tokens.len();
            }
        });
        stats
    }

    /// Counts labels of the given kind: relation labels of spans, the
    /// nuclearity of every non-root node, or the number of EDUs (under the
    /// key `EDU`).
    pub fn label_counts(&self, kind: LabelKind) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        self.visit(&mut |node, depth| {
            let key = match (kind, node) {
                (LabelKind::Relation, RstTree::Span { relation, .. }) => Some(relation.as_str().to_string()),
                (LabelKind::Nuclearity, node) if depth > 0 => Some(node.nuclearity().as_str().to_string()),
                (LabelKind::Edu, RstTree::Edu { .. }) => Some("EDU".to_string()),
                _ => None,
            };
            if let Some(key) = key {
                *counts.entry(key).or_insert(0) += 1;
            }
        });
        counts
    }

    /// Checks tree invariants. Structural problems that make a tree unusable
    /// (empty EDUs, empty tokens or labels) are always errors; the remaining
    /// issues are returned in lenient mode and are errors in strict mode.
    pub fn validate(&self, mode: ValidationMode) -> Result<Vec<String>> {
        let mut issues = Vec::new();
        validate_node(self, true, &mut issues)?;
        if mode == ValidationMode::Strict {
            if let Some(first) = issues.first() {
                return Err(Error::Validation(first.clone()));
            }
        }
        Ok(issues)
    }

    /// One-line JSON form of the tree.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("tree serialization is infallible")
    }
}

fn validate_node(node: &RstTree, is_root: bool, issues: &mut Vec<String>) -> Result<()> {
    let nuc = node.nuclearity();
    if is_root && !matches!(nuc, Nuclearity::Root | Nuclearity::Masked) {
        issues.push(format!("root carries nuclearity {nuc}, expected Root"));
    }
    if !is_root && nuc == Nuclearity::Root {
        issues.push("non-root node carries nuclearity Root".to_string());
    }
    match node {
        RstTree::Edu { tokens, .. } => {
            if tokens.is_empty() {
                return Err(Error::Validation("EDU without tokens".to_string()));
            }
            if tokens.iter().any(|t| t.is_empty()) {
                return Err(Error::Validation("EDU contains an empty token".to_string()));
            }
        }
        RstTree::Span { relation, children, .. } => {
            if relation.as_str().is_empty() {
                return Err(Error::Validation("empty relation label".to_string()));
            }
            if !relation.is_canonical() && relation.as_str() != DUMMY_TAG {
                issues.push(format!("relation label {relation:?} is not in the canonical set"));
            }
            if children.is_empty() {
                return Err(Error::Validation("span without children".to_string()));
            }
            if children.len() < 2 {
                issues.push(format!(
                    "span {relation} has {} child, expected at least 2",
                    children.len()
                ));
            }
            let nucs: Vec<Nuclearity> = children.iter().map(RstTree::nuclearity).collect();
            if !nucs.contains(&Nuclearity::Masked) {
                let nuclei = nucs.iter().filter(|n| **n == Nuclearity::Nucleus).count();
                let satellites = nucs.iter().filter(|n| **n == Nuclearity::Satellite).count();
                let multinuclear = nuclei == nucs.len();
                let mononuclear = nuclei == 1 && satellites == nucs.len() - 1;
                if !(multinuclear || mononuclear) {
                    issues.push(format!(
                        "span {relation} has {nuclei} nucleus and {satellites} satellite children; \
                         expected all nuclei or exactly one nucleus"
                    ));
                }
            }
            for child in children {
                validate_node(child, false, issues)?;
            }
        }
    }
    Ok(())
}

/// Parses a one-line JSON tree and validates it.
pub fn parse_tree(text: &str, mode: ValidationMode) -> Result<RstTree> {
    let tree: RstTree = serde_json::from_str(text).map_err(|e| Error::Syntax {
        line: 1,
        message: e.to_string(),
    })?;
    for issue in tree.validate(mode)? {
        log::warn!("{issue}");
    }
    Ok(tree)
}

pub fn serialize_tree(tree: &RstTree) -> String {
    tree.to_json_line()
}

/// Trees keyed by segment id. `None` marks an absent (missing or unusable)
/// parse.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TreeCorpus {
    trees: BTreeMap<u64, Option<RstTree>>,
}

#[derive(Serialize)]
struct TreeRecordOut<'a> {
    seg: u64,
    tree: Option<&'a RstTree>,
}

impl TreeCorpus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, seg: u64, tree: Option<RstTree>) -> Result<()> {
        if self.trees.contains_key(&seg) {
            return Err(Error::DuplicateKey(format!("segment {seg}")));
        }
        self.trees.insert(seg, tree);
        Ok(())
    }

    pub fn get(&self, seg: u64) -> Option<&RstTree> {
        self.trees.get(&seg).and_then(Option::as_ref)
    }

    pub fn contains(&self, seg: u64) -> bool {
        self.trees.contains_key(&seg)
    }

    pub fn segments(&self) -> impl Iterator<Item = u64> + '_ {
        self.trees.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, Option<&RstTree>)> {
        self.trees.iter().map(|(seg, tree)| (*seg, tree.as_ref()))
    }

    /// Present trees only.
    pub fn trees(&self) -> impl Iterator<Item = &RstTree> {
        self.trees.values().flatten()
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    /// Errors unless `other` covers exactly the same segment ids.
    pub fn check_aligned(&self, other: &TreeCorpus) -> Result<()> {
        let missing: Vec<u64> = self
            .segments()
            .filter(|s| !other.contains(*s))
            .chain(other.segments().filter(|s| !self.contains(*s)))
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            let mut missing = missing;
            missing.sort_unstable();
            Err(Error::Alignment { missing })
        }
    }

    pub fn parse<R: BufRead>(reader: R, mode: ValidationMode) -> Result<Self> {
        let mut corpus = TreeCorpus::new();
        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| Error::Syntax {
                line: lineno,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let syntax = |message: String| Error::Syntax { line: lineno, message };
            let mut record: serde_json::Value = serde_json::from_str(&line).map_err(|e| syntax(e.to_string()))?;
            let seg = record
                .get("seg")
                .and_then(serde_json::Value::as_u64)
                .ok_or_else(|| syntax("missing or non-integer \"seg\"".to_string()))?;
            let tree = match record.get_mut("tree").map(serde_json::Value::take) {
                None => return Err(syntax("missing \"tree\"".to_string())),
                Some(serde_json::Value::Null) => None,
                Some(value) => match read_node(value, mode) {
                    Ok(tree) => Some(tree),
                    Err(e) if mode == ValidationMode::Strict => {
                        return Err(match e {
                            Error::Syntax { message, .. } => syntax(message),
                            Error::Validation(m) => Error::Validation(format!("line {lineno}: {m}")),
                            other => other,
                        })
                    }
                    Err(e) => {
                        log::warn!("line {lineno}: segment {seg} treated as absent: {e}");
                        None
                    }
                },
            };
            corpus
                .insert(seg, tree)
                .map_err(|_| Error::DuplicateKey(format!("line {lineno}: segment {seg} appears twice")))?;
        }
        Ok(corpus)
    }

    pub fn read(path: &Path, mode: ValidationMode) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(std::io::BufReader::new(file), mode)
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (seg, tree) in self.iter() {
            let line = serde_json::to_string(&TreeRecordOut { seg, tree }).expect("tree serialization is infallible");
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

fn read_node(value: serde_json::Value, mode: ValidationMode) -> Result<RstTree> {
    let tree: RstTree = serde_json::from_value(value).map_err(|e| Error::Syntax {
        line: 0,
        message: e.to_string(),
    })?;
    for issue in tree.validate(mode)? {
        log::warn!("{issue}");
    }
    Ok(tree)
}

impl FromIterator<(u64, Option<RstTree>)> for TreeCorpus {
    fn from_iter<I: IntoIterator<Item = (u64, Option<RstTree>)>>(iter: I) -> Self {
        TreeCorpus {
            trees: iter.into_iter().collect(),
        }
    }
}
