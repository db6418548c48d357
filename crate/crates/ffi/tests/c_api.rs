use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use discoeval_ffi::*;

const TREE: &str = r#"{"kind":"span","nuc":"Root","rel":"Elaboration","children":[{"kind":"edu","nuc":"Nucleus","tokens":["The","cat"]},{"kind":"edu","nuc":"Satellite","tokens":["sat"]}]}"#;
const OTHER: &str = r#"{"kind":"span","nuc":"Root","rel":"Contrast","children":[{"kind":"edu","nuc":"Nucleus","tokens":["a","dog"]},{"kind":"edu","nuc":"Nucleus","tokens":["ran"]}]}"#;

fn parse(json: &str) -> *mut DeTree {
    let text = CString::new(json).unwrap();
    let mut tree = ptr::null_mut();
    assert_eq!(unsafe { de_tree_parse(text.as_ptr(), false, &mut tree) }, DeStatus::Ok);
    assert!(!tree.is_null());
    tree
}

fn last_error() -> String {
    let p = de_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_set() {
    let v = unsafe { CStr::from_ptr(de_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn tree_round_trip() {
    let tree = parse(TREE);
    let mut stats = DeTreeStats::default();
    assert_eq!(unsafe { de_tree_stats(tree, &mut stats) }, DeStatus::Ok);
    assert_eq!(
        stats,
        DeTreeStats {
            depth: 1,
            edu_count: 2,
            token_count: 3
        }
    );
    let mut text = ptr::null_mut();
    let status = unsafe { de_tree_render(tree, DeRepresentation::Dr, DeAblation::Full, &mut text) };
    assert_eq!(status, DeStatus::Ok);
    let rendered = unsafe { CStr::from_ptr(text) }.to_str().unwrap().to_string();
    assert!(rendered.contains("Elaboration"), "{rendered}");
    unsafe {
        de_string_free(text);
        de_tree_free(tree);
    }
}

#[test]
fn parse_errors_report_status_and_message() {
    let bad = CString::new("{not json").unwrap();
    let mut tree = ptr::null_mut();
    assert_eq!(
        unsafe { de_tree_parse(bad.as_ptr(), false, &mut tree) },
        DeStatus::ParseError
    );
    assert!(tree.is_null());
    assert!(last_error().contains("syntax"));
    assert_eq!(
        unsafe { de_tree_parse(ptr::null(), false, &mut tree) },
        DeStatus::NullPointer
    );
    let not_utf8 = [0xffu8, 0];
    assert_eq!(
        unsafe { de_tree_parse(not_utf8.as_ptr().cast(), false, &mut tree) },
        DeStatus::InvalidUtf8
    );
}

#[test]
fn similarity_matches_core() {
    let a = parse(TREE);
    let b = parse(OTHER);
    let mut s = f64::NAN;
    for rep in [
        DeRepresentation::Dr,
        DeRepresentation::DrLex,
        DeRepresentation::DrLex1,
        DeRepresentation::DrLex11,
        DeRepresentation::DrLexE,
    ] {
        assert_eq!(
            unsafe { de_similarity(a, a, rep, DeAblation::Full, 1.0, &mut s) },
            DeStatus::Ok
        );
        assert!((s - 1.0).abs() < 1e-12);
    }
    assert_eq!(
        unsafe { de_similarity(a, b, DeRepresentation::DrLex, DeAblation::Full, 1.0, &mut s) },
        DeStatus::Ok
    );
    let core_a = discoeval::parse_tree(TREE, discoeval::ValidationMode::Lenient).unwrap();
    let core_b = discoeval::parse_tree(OTHER, discoeval::ValidationMode::Lenient).unwrap();
    let expected = discoeval::normalized_similarity(
        &discoeval::to_representation(&core_a, discoeval::RepresentationKind::DrLex),
        &discoeval::to_representation(&core_b, discoeval::RepresentationKind::DrLex),
        &discoeval::KernelConfig::default(),
    )
    .unwrap();
    assert_eq!(s, expected);
    assert_eq!(
        unsafe { de_similarity(a, ptr::null(), DeRepresentation::DrLex, DeAblation::NoRel, 1.0, &mut s) },
        DeStatus::Ok
    );
    assert_eq!(s, 0.0);
    assert_eq!(
        unsafe { de_similarity(a, b, DeRepresentation::DrLex, DeAblation::Full, 2.0, &mut s) },
        DeStatus::InvalidArgument
    );
    unsafe {
        de_tree_free(a);
        de_tree_free(b);
    }
}

#[test]
fn correlations() {
    let x = [1.0, 2.0, 3.0, 4.0];
    let y = [2.0, 4.0, 5.0, 9.0];
    let mut r = 0.0;
    assert_eq!(unsafe { de_spearman(x.as_ptr(), y.as_ptr(), 4, &mut r) }, DeStatus::Ok);
    assert_eq!(r, 1.0);
    assert_eq!(unsafe { de_pearson(x.as_ptr(), y.as_ptr(), 4, &mut r) }, DeStatus::Ok);
    assert!(r > 0.9 && r < 1.0);
    let flat = [1.0; 4];
    assert_eq!(
        unsafe { de_pearson(x.as_ptr(), flat.as_ptr(), 4, &mut r) },
        DeStatus::ComputationError
    );
    assert_eq!(
        unsafe { de_pearson(ptr::null(), y.as_ptr(), 4, &mut r) },
        DeStatus::NullPointer
    );
}

#[test]
fn model_scoring() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let mut model = discoeval::tuning::CombinedMetricModel::with_weights(vec!["A".into(), "B".into()], vec![2.0, -1.0]);
    model
        .ranges
        .insert("A".into(), discoeval::scoring::Range { min: 0.0, max: 10.0 });
    model
        .ranges
        .insert("B".into(), discoeval::scoring::Range { min: 0.0, max: 1.0 });
    std::fs::write(&path, model.to_json()).unwrap();

    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let mut handle = ptr::null_mut();
    assert_eq!(unsafe { de_model_load(cpath.as_ptr(), &mut handle) }, DeStatus::Ok);
    assert_eq!(unsafe { de_model_metric_count(handle) }, 2);
    let name = unsafe { CStr::from_ptr(de_model_metric_name(handle, 1)) };
    assert_eq!(name.to_str().unwrap(), "B");
    assert!(unsafe { de_model_metric_name(handle, 2) }.is_null());
    let mut v = 0.0;
    // 2 * 0.5 - 1 * 1.0 (clamped)
    let raw = [5.0, 3.0];
    assert_eq!(unsafe { de_model_score(handle, raw.as_ptr(), 2, &mut v) }, DeStatus::Ok);
    assert_eq!(v, 0.0);
    assert_eq!(
        unsafe { de_model_score(handle, raw.as_ptr(), 1, &mut v) },
        DeStatus::InvalidArgument
    );
    unsafe { de_model_free(handle) };

    let missing = CString::new(dir.path().join("none.json").to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { de_model_load(missing.as_ptr(), &mut handle) },
        DeStatus::IoError
    );
    assert!(handle.is_null());
}

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/discoeval.h")
}

#[test]
fn header_declares_api() {
    let text = std::fs::read_to_string(header()).unwrap();
    for f in [
        "de_version",
        "de_last_error",
        "de_tree_parse",
        "de_tree_free",
        "de_tree_stats",
        "de_tree_render",
        "de_similarity",
        "de_pearson",
        "de_spearman",
        "de_model_load",
        "de_model_score",
        "de_model_metric_count",
        "de_model_metric_name",
        "de_model_free",
        "de_string_free",
        "DE_STATUS_OK",
        "typedef struct DeTree DeTree",
    ] {
        assert!(text.contains(f), "header lacks {f}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler; skipping");
        return;
    };
    if !cc.status.success() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"discoeval.h\"\nint main(void) { DeTree *t = 0; return de_tree_parse(\"{}\", false, &t) == DE_STATUS_OK; }\n",
    )
    .unwrap();
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header().parent().unwrap())
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}
