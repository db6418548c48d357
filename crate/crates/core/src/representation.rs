//! Kernel-ready renderings of discourse trees.
//!
//! Each [`RepresentationKind`] turns an [`RstTree`] into a [`KernelTree`] with
//! a fixed label convention:
//!
//! | kind        | spans                                   | EDUs                                          |
//! |-------------|-----------------------------------------|-----------------------------------------------|
//! | `DR`        | `SPAN:<nuc>:<rel>`                      | leaf `EDU:<nuc>`                              |
//! | `DR-LEX`    | `SPAN(NUC:<nuc>, REL:<rel>, ...)`       | `EDU(NUC:<nuc>, NGRAM(w(*), ...))`            |
//! | `DR-LEX1`   | `<rel>(<nuc>(child), ...)`              | `EDU:<nuc>(w(*), ...)`                        |
//! | `DR-LEX1.1` | as `DR-LEX1`                            | `DR-LEX1` EDU plus three `LEX:` groups        |
//! | `DR-LEXe`   | as `DR-LEX`                             | `DR-LEX` EDU plus three `LEX:` groups         |
//!
//! The `LEX:` groups are `LEX:NUC:<nuc>`, `LEX:REL:<rel>` and
//! `LEX:NUC:REL:<nuc>:<rel>`, each holding a copy of the EDU's words, where
//! `<rel>` is the relation of the span directly above the EDU (`NONE` for a
//! single-EDU tree). Every word node has one dummy child `*` so the kernel
//! can match unigrams. Words are lowercased.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;
use crate::rst::{Nuclearity, RelationLabel, RstTree, DUMMY_TAG};

/// Generic labeled ordered tree consumed by the kernel.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KernelTree {
    pub label: String,
    pub children: Vec<KernelTree>,
}

impl KernelTree {
    pub fn leaf(label: impl Into<String>) -> Self {
        KernelTree {
            label: label.into(),
            children: Vec::new(),
        }
    }

    pub fn node(label: impl Into<String>, children: Vec<KernelTree>) -> Self {
        KernelTree {
            label: label.into(),
            children,
        }
    }

    /// A word with its dummy leaf.
    pub fn word(word: &str) -> Self {
        KernelTree::node(word.to_lowercase(), vec![KernelTree::leaf(DUMMY_TAG)])
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn is_word(&self) -> bool {
        self.children.len() == 1 && self.children[0].is_leaf() && self.children[0].label == DUMMY_TAG
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(KernelTree::node_count).sum::<usize>()
    }

    /// Preorder traversal.
    pub fn preorder(&self) -> Vec<&KernelTree> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            out.push(node);
            stack.extend(node.children.iter().rev());
        }
        out
    }

    /// Words of the primary lexical layer, left to right. Copies held under
    /// `LEX:` groups are skipped.
    pub fn words(&self) -> Vec<&str> {
        fn go<'a>(node: &'a KernelTree, out: &mut Vec<&'a str>) {
            if node.is_word() {
                out.push(&node.label);
                return;
            }
            for child in &node.children {
                if !child.label.starts_with("LEX:") {
                    go(child, out);
                }
            }
        }
        let mut out = Vec::new();
        go(self, &mut out);
        out
    }
}

/// Bracketed dump: `label(child, child)`.
impl fmt::Display for KernelTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)?;
        if !self.children.is_empty() {
            f.write_str("(")?;
            for (i, child) in self.children.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{child}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RepresentationKind {
    Dr,
    DrLex,
    DrLex1,
    DrLex1_1,
    DrLexE,
}

impl RepresentationKind {
    pub const ALL: [RepresentationKind; 5] = [
        RepresentationKind::Dr,
        RepresentationKind::DrLex,
        RepresentationKind::DrLex1,
        RepresentationKind::DrLex1_1,
        RepresentationKind::DrLexE,
    ];

    /// Metric name used in score tables.
    pub fn metric_name(self) -> &'static str {
        match self {
            RepresentationKind::Dr => "DR",
            RepresentationKind::DrLex => "DR-LEX",
            RepresentationKind::DrLex1 => "DR-LEX1",
            RepresentationKind::DrLex1_1 => "DR-LEX1.1",
            RepresentationKind::DrLexE => "DR-LEXe",
        }
    }

    pub fn is_lexicalized(self) -> bool {
        self != RepresentationKind::Dr
    }
}

impl fmt::Display for RepresentationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.metric_name())
    }
}

impl FromStr for RepresentationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let norm = s.trim().to_ascii_uppercase().replace('_', "-");
        Ok(match norm.as_str() {
            "DR" | "DR-NOLEX" => RepresentationKind::Dr,
            "DR-LEX" => RepresentationKind::DrLex,
            "DR-LEX1" => RepresentationKind::DrLex1,
            "DR-LEX1.1" | "DR-LEX1-1" => RepresentationKind::DrLex1_1,
            "DR-LEXE" => RepresentationKind::DrLexE,
            _ => return Err(Error::InvalidArgument(format!("unknown representation {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AblationKind {
    Full,
    NoRel,
    NoNuc,
    NoNucNoRel,
    NoDiscourse,
}

impl AblationKind {
    pub const ALL: [AblationKind; 5] = [
        AblationKind::Full,
        AblationKind::NoRel,
        AblationKind::NoNuc,
        AblationKind::NoNucNoRel,
        AblationKind::NoDiscourse,
    ];

    /// Suffix appended to metric names, empty for `Full`.
    pub fn suffix(self) -> &'static str {
        match self {
            AblationKind::Full => "",
            AblationKind::NoRel => "@norel",
            AblationKind::NoNuc => "@nonuc",
            AblationKind::NoNucNoRel => "@nonucnorel",
            AblationKind::NoDiscourse => "@nodiscourse",
        }
    }
}

impl FromStr for AblationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Ok(match s.trim().trim_start_matches('@').to_ascii_lowercase().as_str() {
            "full" | "none" => AblationKind::Full,
            "norel" => AblationKind::NoRel,
            "nonuc" => AblationKind::NoNuc,
            "nonucnorel" => AblationKind::NoNucNoRel,
            "nodiscourse" => AblationKind::NoDiscourse,
            _ => return Err(Error::InvalidArgument(format!("unknown ablation {s:?}"))),
        })
    }
}

/// Result of an ablation: either a masked discourse tree, or (for
/// `NoDiscourse`) a flat bag of words.
#[derive(Debug, Clone, PartialEq)]
pub enum Ablated {
    Tree(RstTree),
    Flat(KernelTree),
}

pub fn apply_ablation(tree: &RstTree, kind: AblationKind) -> Ablated {
    match kind {
        AblationKind::Full => Ablated::Tree(tree.clone()),
        AblationKind::NoRel => Ablated::Tree(mask(tree, false, true)),
        AblationKind::NoNuc => Ablated::Tree(mask(tree, true, false)),
        AblationKind::NoNucNoRel => Ablated::Tree(mask(tree, true, true)),
        AblationKind::NoDiscourse => Ablated::Flat(KernelTree::node(
            "ROOT",
            tree.tokens().into_iter().map(KernelTree::word).collect(),
        )),
    }
}

/// The ablated tree as rendered for the kernel; masked trees use `DR-LEX`.
pub fn ablated_representation(tree: &RstTree, kind: AblationKind) -> KernelTree {
    match apply_ablation(tree, kind) {
        Ablated::Tree(t) => to_representation(&t, RepresentationKind::DrLex),
        Ablated::Flat(k) => k,
    }
}

fn mask(tree: &RstTree, nuc: bool, rel: bool) -> RstTree {
    let masked_nuc = |n: Nuclearity| if nuc { Nuclearity::Masked } else { n };
    match tree {
        RstTree::Edu { nuclearity, tokens } => RstTree::Edu {
            nuclearity: masked_nuc(*nuclearity),
            tokens: tokens.clone(),
        },
        RstTree::Span {
            nuclearity,
            relation,
            children,
        } => RstTree::Span {
            nuclearity: masked_nuc(*nuclearity),
            relation: if rel { RelationLabel::masked() } else { relation.clone() },
            children: children.iter().map(|c| mask(c, nuc, rel)).collect(),
        },
    }
}

pub fn to_representation(tree: &RstTree, kind: RepresentationKind) -> KernelTree {
    render(tree, kind, None)
}

fn render(tree: &RstTree, kind: RepresentationKind, parent_rel: Option<&RelationLabel>) -> KernelTree {
    use RepresentationKind::*;
    match tree {
        RstTree::Edu { nuclearity, tokens } => render_edu(*nuclearity, tokens, kind, parent_rel),
        RstTree::Span {
            nuclearity,
            relation,
            children,
        } => match kind {
            Dr => KernelTree::node(
                format!("SPAN:{nuclearity}:{relation}"),
                children.iter().map(|c| render(c, kind, Some(relation))).collect(),
            ),
            DrLex | DrLexE => {
                let mut kids = vec![
                    KernelTree::leaf(format!("NUC:{nuclearity}")),
                    KernelTree::leaf(format!("REL:{relation}")),
                ];
                kids.extend(children.iter().map(|c| render(c, kind, Some(relation))));
                KernelTree::node("SPAN", kids)
            }
            DrLex1 | DrLex1_1 => KernelTree::node(
                relation.as_str(),
                children
                    .iter()
                    .map(|c| KernelTree::node(c.nuclearity().as_str(), vec![render(c, kind, Some(relation))]))
                    .collect(),
            ),
        },
    }
}

fn render_edu(
    nuc: Nuclearity,
    tokens: &[String],
    kind: RepresentationKind,
    parent_rel: Option<&RelationLabel>,
) -> KernelTree {
    use RepresentationKind::*;
    let words = || tokens.iter().map(|t| KernelTree::word(t)).collect::<Vec<_>>();
    match kind {
        Dr => KernelTree::leaf(format!("EDU:{nuc}")),
        DrLex => KernelTree::node(
            "EDU",
            vec![
                KernelTree::leaf(format!("NUC:{nuc}")),
                KernelTree::node("NGRAM", words()),
            ],
        ),
        DrLexE => {
            let mut kids = vec![
                KernelTree::leaf(format!("NUC:{nuc}")),
                KernelTree::node("NGRAM", words()),
            ];
            kids.extend(lex_groups(nuc, parent_rel, &words));
            KernelTree::node("EDU", kids)
        }
        DrLex1 => KernelTree::node(format!("EDU:{nuc}"), words()),
        DrLex1_1 => {
            let mut kids = words();
            kids.extend(lex_groups(nuc, parent_rel, &words));
            KernelTree::node(format!("EDU:{nuc}"), kids)
        }
    }
}

fn lex_groups(
    nuc: Nuclearity,
    parent_rel: Option<&RelationLabel>,
    words: &dyn Fn() -> Vec<KernelTree>,
) -> [KernelTree; 3] {
    let rel = parent_rel.map_or("NONE", RelationLabel::as_str);
    [
        KernelTree::node(format!("LEX:NUC:{nuc}"), words()),
        KernelTree::node(format!("LEX:REL:{rel}"), words()),
        KernelTree::node(format!("LEX:NUC:REL:{nuc}:{rel}"), words()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rst::tests::arb_tree;
    use crate::rst::RELATION_VOCABULARY;
    use proptest::prelude::*;

    fn trivial() -> RstTree {
        RstTree::edu(Nuclearity::Root, &["a"])
    }

    fn attribution() -> RstTree {
        RstTree::span(
            Nuclearity::Root,
            "Attribution",
            vec![
                RstTree::edu(Nuclearity::Satellite, &["he", "said"]),
                RstTree::edu(Nuclearity::Nucleus, &["it", "works"]),
            ],
        )
    }

    #[test]
    fn dr_trivial_is_single_leaf() {
        assert_eq!(
            to_representation(&trivial(), RepresentationKind::Dr).to_string(),
            "EDU:Root"
        );
    }

    #[test]
    fn dr_lex1_trivial() {
        assert_eq!(
            to_representation(&trivial(), RepresentationKind::DrLex1).to_string(),
            "EDU:Root(a(*))"
        );
    }

    #[test]
    fn dr_lex_attribution() {
        assert_eq!(
            to_representation(&attribution(), RepresentationKind::DrLex).to_string(),
            "SPAN(NUC:Root, REL:Attribution, EDU(NUC:Satellite, NGRAM(he(*), said(*))), \
             EDU(NUC:Nucleus, NGRAM(it(*), works(*))))"
        );
    }

    #[test]
    fn dr_attribution() {
        assert_eq!(
            to_representation(&attribution(), RepresentationKind::Dr).to_string(),
            "SPAN:Root:Attribution(EDU:Satellite, EDU:Nucleus)"
        );
    }

    #[test]
    fn dr_lex1_attribution() {
        assert_eq!(
            to_representation(&attribution(), RepresentationKind::DrLex1).to_string(),
            "Attribution(Satellite(EDU:Satellite(he(*), said(*))), Nucleus(EDU:Nucleus(it(*), works(*))))"
        );
    }

    #[test]
    fn dr_lex1_1_trivial_uses_none_relation() {
        assert_eq!(
            to_representation(&trivial(), RepresentationKind::DrLex1_1).to_string(),
            "EDU:Root(a(*), LEX:NUC:Root(a(*)), LEX:REL:NONE(a(*)), LEX:NUC:REL:Root:NONE(a(*)))"
        );
    }

    #[test]
    fn dr_lexe_edu_layout() {
        let k = to_representation(&attribution(), RepresentationKind::DrLexE);
        let edu = &k.children[2];
        let labels: Vec<&str> = edu.children.iter().map(|c| c.label.as_str()).collect();
        assert_eq!(
            labels,
            [
                "NUC:Satellite",
                "NGRAM",
                "LEX:NUC:Satellite",
                "LEX:REL:Attribution",
                "LEX:NUC:REL:Satellite:Attribution"
            ]
        );
    }

    #[test]
    fn words_are_lowercased() {
        let t = RstTree::edu(Nuclearity::Root, &["The", "ECB"]);
        assert_eq!(to_representation(&t, RepresentationKind::DrLex).words(), ["the", "ecb"]);
    }

    #[test]
    fn ablations() {
        let t = attribution();
        match apply_ablation(&t, AblationKind::NoRel) {
            Ablated::Tree(RstTree::Span { relation, children, .. }) => {
                assert_eq!(relation.as_str(), "*");
                assert_eq!(children[0].nuclearity(), Nuclearity::Satellite);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(
            ablated_representation(&t, AblationKind::NoDiscourse).to_string(),
            "ROOT(he(*), said(*), it(*), works(*))"
        );
        assert_eq!(apply_ablation(&trivial(), AblationKind::Full), Ablated::Tree(trivial()));
        assert_eq!(
            ablated_representation(&t, AblationKind::Full),
            to_representation(&t, RepresentationKind::DrLex)
        );
    }

    fn lower(tree: &RstTree) -> Vec<String> {
        tree.tokens().iter().map(|t| t.to_lowercase()).collect()
    }

    proptest! {
        #[test]
        fn token_preservation(tree in arb_tree()) {
            for kind in RepresentationKind::ALL.into_iter().filter(|k| k.is_lexicalized()) {
                let k = to_representation(&tree, kind);
                prop_assert_eq!(k.words(), lower(&tree));
            }
            let flat = ablated_representation(&tree, AblationKind::NoDiscourse);
            prop_assert_eq!(flat.words(), lower(&tree));
        }

        #[test]
        fn dr_has_no_lexical_content(tree in arb_tree()) {
            let k = to_representation(&tree, RepresentationKind::Dr);
            prop_assert!(k.preorder().iter().all(|n| !n.is_word() && n.label != DUMMY_TAG));
        }

        #[test]
        fn nonucnorel_erases_labels(tree in arb_tree()) {
            let k = ablated_representation(&tree, AblationKind::NoNucNoRel);
            for node in k.preorder() {
                for bad in RELATION_VOCABULARY.iter().chain(["Nucleus", "Satellite"].iter()) {
                    prop_assert!(!node.label.contains(bad), "{} in {}", bad, node.label);
                }
            }
        }

        #[test]
        fn deterministic(tree in arb_tree()) {
            for kind in RepresentationKind::ALL {
                prop_assert_eq!(to_representation(&tree, kind), to_representation(&tree, kind));
            }
        }

        #[test]
        fn lex_groups_per_edu(tree in arb_tree()) {
            let edus = tree.stats().edu_count;
            for kind in [RepresentationKind::DrLex1_1, RepresentationKind::DrLexE] {
                let k = to_representation(&tree, kind);
                let edu_nodes: Vec<&KernelTree> = k
                    .preorder()
                    .into_iter()
                    .filter(|n| n.label.starts_with("EDU"))
                    .collect();
                prop_assert_eq!(edu_nodes.len(), edus);
                for edu in edu_nodes {
                    let lex: Vec<&str> = edu
                        .children
                        .iter()
                        .filter(|c| c.label.starts_with("LEX:"))
                        .map(|c| c.label.as_str())
                        .collect();
                    prop_assert_eq!(lex.len(), 3);
                    prop_assert!(lex[0].starts_with("LEX:NUC:") && !lex[0].starts_with("LEX:NUC:REL:"));
                    prop_assert!(lex[1].starts_with("LEX:REL:"));
                    prop_assert!(lex[2].starts_with("LEX:NUC:REL:"));
                }
            }
        }
    }
}
