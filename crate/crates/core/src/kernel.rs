//! All-subtree (Collins–Duffy) tree kernel.
//!
//! The kernel counts the tree fragments two trees have in common, where a
//! fragment is rooted at an internal node and every included node keeps
//! either all of its children or none of them. With `decay_weight = 1` every
//! fragment counts once.
//!
//! For nodes `n1`, `n2` with the same production (label plus ordered child
//! labels):
//!
//! ```text
//! delta(n1, n2) = decay * prod_j (1 + delta(child_j(n1), child_j(n2)))
//! ```
//!
//! and `delta = 0` when either node is a leaf or the productions differ. The
//! kernel is the sum of `delta` over all node pairs.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::representation::KernelTree;

/// Default node limit for [`brute_force_kernel`].
pub const BRUTE_FORCE_NODE_LIMIT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    pub decay_weight: f64,
    pub normalize: bool,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            decay_weight: 1.0,
            normalize: true,
        }
    }
}

impl KernelConfig {
    fn check(&self) -> Result<()> {
        if self.decay_weight > 0.0 && self.decay_weight <= 1.0 {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "decay weight {} outside (0, 1]",
                self.decay_weight
            )))
        }
    }
}

/// Postorder arena view of a tree with interned production ids.
struct Indexed {
    children: Vec<Vec<usize>>,
    /// `None` for leaves.
    production: Vec<Option<usize>>,
}

#[derive(Default)]
struct Interner<'a> {
    labels: HashMap<&'a str, usize>,
    productions: HashMap<(usize, Vec<usize>), usize>,
}

impl<'a> Interner<'a> {
    fn label(&mut self, label: &'a str) -> usize {
        let next = self.labels.len();
        *self.labels.entry(label).or_insert(next)
    }

    fn index(&mut self, tree: &'a KernelTree) -> Indexed {
        let mut out = Indexed {
            children: Vec::new(),
            production: Vec::new(),
        };
        self.push(tree, &mut out);
        out
    }

    fn push(&mut self, node: &'a KernelTree, out: &mut Indexed) -> usize {
        let kids: Vec<usize> = node.children.iter().map(|c| self.push(c, out)).collect();
        let production = if node.is_leaf() {
            None
        } else {
            let key = (
                self.label(&node.label),
                node.children.iter().map(|c| self.label(&c.label)).collect(),
            );
            let next = self.productions.len();
            Some(*self.productions.entry(key).or_insert(next))
        };
        out.children.push(kids);
        out.production.push(production);
        out.children.len() - 1
    }
}

fn kernel_indexed(a: &Indexed, b: &Indexed, decay: f64) -> Result<f64> {
    let mut by_production: HashMap<usize, Vec<usize>> = HashMap::new();
    for (j, p) in b.production.iter().enumerate() {
        if let Some(p) = p {
            by_production.entry(*p).or_default().push(j);
        }
    }
    let mut delta: HashMap<(usize, usize), f64> = HashMap::new();
    let mut total = 0.0;
    // postorder: children of `i` were visited before `i`
    for (i, p) in a.production.iter().enumerate() {
        let Some(matches) = p.and_then(|p| by_production.get(&p)) else {
            continue;
        };
        for &j in matches {
            let value = a.children[i].iter().zip(&b.children[j]).fold(decay, |acc, (&ci, &cj)| {
                acc * (1.0 + delta.get(&(ci, cj)).copied().unwrap_or(0.0))
            });
            delta.insert((i, j), value);
            total += value;
        }
    }
    if total.is_finite() {
        Ok(total)
    } else {
        Err(Error::KernelOverflow)
    }
}

pub fn subtree_kernel(a: &KernelTree, b: &KernelTree, cfg: &KernelConfig) -> Result<f64> {
    cfg.check()?;
    let mut interner = Interner::default();
    let ia = interner.index(a);
    let ib = interner.index(b);
    kernel_indexed(&ia, &ib, cfg.decay_weight)
}

/// `K(a, b) / sqrt(K(a, a) K(b, b))`, or 0 when either tree has no
/// production. With `cfg.normalize == false` the raw kernel is returned.
pub fn normalized_similarity(a: &KernelTree, b: &KernelTree, cfg: &KernelConfig) -> Result<f64> {
    cfg.check()?;
    let mut interner = Interner::default();
    let ia = interner.index(a);
    let ib = interner.index(b);
    let k = kernel_indexed(&ia, &ib, cfg.decay_weight)?;
    if !cfg.normalize {
        return Ok(k);
    }
    let kaa = kernel_indexed(&ia, &ia, cfg.decay_weight)?;
    let kbb = kernel_indexed(&ib, &ib, cfg.decay_weight)?;
    if kaa == 0.0 || kbb == 0.0 {
        return Ok(0.0);
    }
    let denom = (kaa * kbb).sqrt();
    if !denom.is_finite() {
        return Err(Error::KernelOverflow);
    }
    Ok((k / denom).clamp(0.0, 1.0))
}

/// Similarity with absent trees mapped to 0.
pub fn similarity_or_absent(a: Option<&KernelTree>, b: Option<&KernelTree>, cfg: &KernelConfig) -> Result<f64> {
    match (a, b) {
        (Some(a), Some(b)) => normalized_similarity(a, b, cfg),
        _ => Ok(0.0),
    }
}

/// Counts common fragments by explicit enumeration. Exponential; intended
/// as a reference for small trees.
pub fn brute_force_kernel(a: &KernelTree, b: &KernelTree, node_limit: usize) -> Result<f64> {
    for t in [a, b] {
        let nodes = t.node_count();
        if nodes > node_limit {
            return Err(Error::NodeLimit {
                nodes,
                limit: node_limit,
            });
        }
    }
    let fa = fragment_multiset(a);
    let fb = fragment_multiset(b);
    let total: u128 = fa
        .iter()
        .map(|(f, m)| *m as u128 * fb.get(f).copied().unwrap_or(0) as u128)
        .sum();
    Ok(total as f64)
}

fn encode_label(label: &str) -> String {
    format!("{}:{}", label.len(), label)
}

/// All fragments rooted at `node`, canonically serialized.
fn fragments_at(node: &KernelTree) -> Vec<String> {
    let mut partial = vec![format!("{}(", encode_label(&node.label))];
    for child in &node.children {
        let mut options = vec![encode_label(&child.label)];
        if !child.is_leaf() {
            options.extend(fragments_at(child));
        }
        partial = partial
            .iter()
            .flat_map(|prefix| options.iter().map(move |o| format!("{prefix}{o} ")))
            .collect();
    }
    partial.into_iter().map(|p| p + ")").collect()
}

pub fn fragment_multiset(tree: &KernelTree) -> HashMap<String, u64> {
    let mut out = HashMap::new();
    for node in tree.preorder() {
        if node.is_leaf() {
            continue;
        }
        for f in fragments_at(node) {
            *out.entry(f).or_insert(0) += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(l: &str) -> KernelTree {
        KernelTree::leaf(l)
    }

    fn node(l: &str, c: Vec<KernelTree>) -> KernelTree {
        KernelTree::node(l, c)
    }

    fn edu_ab() -> KernelTree {
        node("EDU", vec![KernelTree::word("a"), KernelTree::word("b")])
    }

    #[test]
    fn edu_self_kernel_is_six() {
        let cfg = KernelConfig::default();
        assert_eq!(brute_force_kernel(&edu_ab(), &edu_ab(), 12).unwrap(), 6.0);
        assert_eq!(subtree_kernel(&edu_ab(), &edu_ab(), &cfg).unwrap(), 6.0);
    }

    #[test]
    fn disjoint_labels() {
        let other = node("X", vec![node("y", vec![leaf("z")])]);
        let cfg = KernelConfig::default();
        assert_eq!(subtree_kernel(&edu_ab(), &other, &cfg).unwrap(), 0.0);
        assert_eq!(normalized_similarity(&edu_ab(), &other, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn bag_of_words_pair() {
        let a = node("ROOT", vec![KernelTree::word("a"), KernelTree::word("b")]);
        let b = node("ROOT", vec![KernelTree::word("b"), KernelTree::word("c")]);
        assert_eq!(brute_force_kernel(&a, &b, 12).unwrap(), 1.0);
        assert_eq!(subtree_kernel(&a, &b, &KernelConfig::default()).unwrap(), 1.0);
    }

    #[test]
    fn one_shared_word_similarity() {
        let a = edu_ab();
        let b = node("EDU", vec![KernelTree::word("a"), KernelTree::word("c")]);
        assert_eq!(brute_force_kernel(&a, &b, 12).unwrap(), 1.0);
        let s = normalized_similarity(&a, &b, &KernelConfig::default()).unwrap();
        assert!((s - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn single_production_and_leaf() {
        let t = node("A", vec![leaf("b")]);
        assert_eq!(brute_force_kernel(&t, &t, 12).unwrap(), 1.0);
        assert_eq!(brute_force_kernel(&t, &leaf("A"), 12).unwrap(), 0.0);
        assert_eq!(subtree_kernel(&t, &leaf("A"), &KernelConfig::default()).unwrap(), 0.0);
        // tree without productions
        assert_eq!(
            normalized_similarity(&leaf("A"), &leaf("A"), &KernelConfig::default()).unwrap(),
            0.0
        );
    }

    #[test]
    fn node_limit_enforced() {
        let big = node("R", (0..12).map(|i| leaf(&i.to_string())).collect());
        assert!(matches!(
            brute_force_kernel(&big, &big, 12),
            Err(Error::NodeLimit { nodes: 13, .. })
        ));
    }

    #[test]
    fn decay_lowers_self_kernel() {
        let t = edu_ab();
        let full = subtree_kernel(&t, &t, &KernelConfig::default()).unwrap();
        let cfg = KernelConfig {
            decay_weight: 0.5,
            normalize: true,
        };
        let decayed = subtree_kernel(&t, &t, &cfg).unwrap();
        // 2 * 0.5 + 0.5 * 1.5 * 1.5
        assert_eq!(decayed, 2.125);
        assert!(full >= decayed);
    }

    #[test]
    fn invalid_decay_rejected() {
        let cfg = KernelConfig {
            decay_weight: 0.0,
            normalize: true,
        };
        assert!(subtree_kernel(&edu_ab(), &edu_ab(), &cfg).is_err());
    }

    #[test]
    fn overflow_detected() {
        // one production with 1100 matching word children: 2^1100
        let t = node("w", (0..1100).map(|_| KernelTree::word("x")).collect());
        let cfg = KernelConfig::default();
        assert!(matches!(subtree_kernel(&t, &t, &cfg), Err(Error::KernelOverflow)));
    }

    #[test]
    fn absent_is_zero() {
        let cfg = KernelConfig::default();
        assert_eq!(similarity_or_absent(Some(&edu_ab()), None, &cfg).unwrap(), 0.0);
        assert_eq!(similarity_or_absent(None, None, &cfg).unwrap(), 0.0);
    }
}
