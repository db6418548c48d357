use std::collections::{BTreeMap, BTreeSet};

use discoeval::kernel::{brute_force_kernel, fragment_multiset, normalized_similarity, subtree_kernel};
use discoeval::rst::Nuclearity;
use discoeval::scoring::{score_dr_metrics, Unit};
use discoeval::{parse_tree, to_representation, KernelConfig, RepresentationKind, RstTree, TreeCorpus, ValidationMode};

const ATTRIBUTION: &str = r#"{"kind":"span","nuc":"Root","rel":"Attribution","children":[{"kind":"edu","nuc":"Satellite","tokens":["he","said"]},{"kind":"edu","nuc":"Nucleus","tokens":["it","works"]}]}"#;

#[test]
fn one_shared_word_under_dr_lex1() {
    let reference = RstTree::edu(Nuclearity::Root, &["the", "cat"]);
    let hypothesis = RstTree::edu(Nuclearity::Root, &["a", "cat"]);
    let a = to_representation(&reference, RepresentationKind::DrLex1);
    let b = to_representation(&hypothesis, RepresentationKind::DrLex1);
    let cfg = KernelConfig::default();
    // only cat(*) is shared; EDU productions differ in their first word
    assert_eq!(brute_force_kernel(&a, &b, 12).unwrap(), 1.0);
    assert_eq!(subtree_kernel(&a, &b, &cfg).unwrap(), 1.0);
    let kaa = brute_force_kernel(&a, &a, 12).unwrap();
    let kbb = brute_force_kernel(&b, &b, 12).unwrap();
    let s = normalized_similarity(&a, &b, &cfg).unwrap();
    assert_eq!(s, 1.0 / (kaa * kbb).sqrt());
    assert!(s > 0.0 && s < 1.0);

    let refs: TreeCorpus = [(1, Some(reference))].into_iter().collect();
    let hyps = BTreeMap::from([(
        "sys".to_string(),
        [(1, Some(hypothesis))].into_iter().collect::<TreeCorpus>(),
    )]);
    let kinds = BTreeSet::from([RepresentationKind::DrLex1]);
    let table = score_dr_metrics(&refs, &hyps, "de-en", &kinds, discoeval::AblationKind::Full, &cfg).unwrap();
    assert_eq!(table.get("DR-LEX1", &Unit::new("de-en", "sys", 1)), Some(s));
}

#[test]
fn every_representation_agrees_with_enumeration_on_small_trees() {
    let t = parse_tree(ATTRIBUTION, ValidationMode::Strict).unwrap();
    let u = parse_tree(&ATTRIBUTION.replace("works", "fails"), ValidationMode::Strict).unwrap();
    for kind in RepresentationKind::ALL {
        let (a, b) = (to_representation(&t, kind), to_representation(&u, kind));
        if a.node_count() > 24 {
            continue;
        }
        let fast = subtree_kernel(&a, &b, &KernelConfig::default()).unwrap();
        // enumerate through the fragment multisets directly
        let fa = fragment_multiset(&a);
        let fb = fragment_multiset(&b);
        let slow: u64 = fa.iter().map(|(f, m)| m * fb.get(f).copied().unwrap_or(0)).sum();
        assert_eq!(fast, slow as f64, "{}", kind.metric_name());
    }
}
