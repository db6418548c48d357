//! C ABI for discoeval.
//!
//! Handles (`DeTree`, `DeModel`) are opaque and owned by the caller once
//! returned; release them with the matching `*_free` function. Strings
//! returned through out-parameters must be released with `de_string_free`.
//! Every fallible call returns a `DeStatus`; on failure a message is
//! available from `de_last_error` on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use discoeval::evaluation::{pearson, spearman, RankMode};
use discoeval::kernel::{similarity_or_absent, KernelConfig};
use discoeval::representation::{ablated_representation, to_representation, AblationKind, RepresentationKind};
use discoeval::rst::{parse_tree, RstTree, ValidationMode};
use discoeval::tuning::CombinedMetricModel;
use discoeval::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidArgument = 4,
    ComputationError = 5,
    IoError = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeRepresentation {
    Dr = 0,
    DrLex = 1,
    DrLex1 = 2,
    DrLex11 = 3,
    DrLexE = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeAblation {
    Full = 0,
    NoRel = 1,
    NoNuc = 2,
    NoNucNoRel = 3,
    NoDiscourse = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DeTreeStats {
    pub depth: usize,
    pub edu_count: usize,
    pub token_count: usize,
}

/// A parsed discourse tree.
pub struct DeTree(RstTree);

/// A trained metric combination.
pub struct DeModel {
    model: CombinedMetricModel,
    names: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let msg = CString::new(message.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: DeStatus, message: impl Into<String>) -> DeStatus {
    set_error(message);
    status
}

fn from_error(e: Error) -> DeStatus {
    let status = match &e {
        Error::Syntax { .. } | Error::Validation(_) | Error::Json(_) => DeStatus::ParseError,
        Error::Io { .. } => DeStatus::IoError,
        e if e.is_input_error() => DeStatus::InvalidArgument,
        _ => DeStatus::ComputationError,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> DeStatus) -> DeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(DeStatus::Panic, "internal panic"),
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, DeStatus> {
    if s.is_null() {
        return Err(fail(DeStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(DeStatus::InvalidUtf8, "string is not UTF-8"))
}

unsafe fn read_slice<'a>(p: *const f64, n: usize) -> Result<&'a [f64], DeStatus> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(DeStatus::NullPointer, "null array"));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

fn representation(rep: DeRepresentation) -> RepresentationKind {
    match rep {
        DeRepresentation::Dr => RepresentationKind::Dr,
        DeRepresentation::DrLex => RepresentationKind::DrLex,
        DeRepresentation::DrLex1 => RepresentationKind::DrLex1,
        DeRepresentation::DrLex11 => RepresentationKind::DrLex1_1,
        DeRepresentation::DrLexE => RepresentationKind::DrLexE,
    }
}

fn ablation(a: DeAblation) -> AblationKind {
    match a {
        DeAblation::Full => AblationKind::Full,
        DeAblation::NoRel => AblationKind::NoRel,
        DeAblation::NoNuc => AblationKind::NoNuc,
        DeAblation::NoNucNoRel => AblationKind::NoNucNoRel,
        DeAblation::NoDiscourse => AblationKind::NoDiscourse,
    }
}

fn render(tree: &RstTree, rep: DeRepresentation, abl: DeAblation) -> discoeval::KernelTree {
    match ablation(abl) {
        AblationKind::Full => to_representation(tree, representation(rep)),
        other => ablated_representation(tree, other),
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn de_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn de_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |m| m.as_ptr()))
}

/// Parses one tree from its JSON form.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn de_tree_parse(json: *const c_char, strict: bool, out: *mut *mut DeTree) -> DeStatus {
    guard(|| {
        if out.is_null() {
            return fail(DeStatus::NullPointer, "null out pointer");
        }
        *out = ptr::null_mut();
        let text = match read_str(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let mode = if strict {
            ValidationMode::Strict
        } else {
            ValidationMode::Lenient
        };
        match parse_tree(text, mode) {
            Ok(tree) => {
                *out = Box::into_raw(Box::new(DeTree(tree)));
                DeStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `tree` must come from `de_tree_parse` and not have been freed. NULL is a
/// no-op.
#[no_mangle]
pub unsafe extern "C" fn de_tree_free(tree: *mut DeTree) {
    if !tree.is_null() {
        drop(Box::from_raw(tree));
    }
}

/// # Safety
/// `tree` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn de_tree_stats(tree: *const DeTree, out: *mut DeTreeStats) -> DeStatus {
    guard(|| {
        let (Some(tree), false) = (tree.as_ref(), out.is_null()) else {
            return fail(DeStatus::NullPointer, "null argument");
        };
        let s = tree.0.stats();
        *out = DeTreeStats {
            depth: s.depth,
            edu_count: s.edu_count,
            token_count: s.token_count,
        };
        DeStatus::Ok
    })
}

/// Renders the kernel-side representation of a tree as text. With an
/// ablation other than `Full` the representation argument is ignored.
///
/// # Safety
/// `tree` and `out` must be valid pointers. The string stored in `*out`
/// must be released with `de_string_free`.
#[no_mangle]
pub unsafe extern "C" fn de_tree_render(
    tree: *const DeTree,
    rep: DeRepresentation,
    abl: DeAblation,
    out: *mut *mut c_char,
) -> DeStatus {
    guard(|| {
        let (Some(tree), false) = (tree.as_ref(), out.is_null()) else {
            return fail(DeStatus::NullPointer, "null argument");
        };
        let text = render(&tree.0, rep, abl).to_string();
        *out = CString::new(text).expect("labels have no nul bytes").into_raw();
        DeStatus::Ok
    })
}

/// Normalized kernel similarity. A NULL tree stands for a missing parse and
/// yields 0.
///
/// # Safety
/// Non-null tree pointers must be valid; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn de_similarity(
    reference: *const DeTree,
    hypothesis: *const DeTree,
    rep: DeRepresentation,
    abl: DeAblation,
    decay: f64,
    out: *mut f64,
) -> DeStatus {
    guard(|| {
        if out.is_null() {
            return fail(DeStatus::NullPointer, "null out pointer");
        }
        let cfg = KernelConfig {
            decay_weight: decay,
            normalize: true,
        };
        let a = reference.as_ref().map(|t| render(&t.0, rep, abl));
        let b = hypothesis.as_ref().map(|t| render(&t.0, rep, abl));
        match similarity_or_absent(a.as_ref(), b.as_ref(), &cfg) {
            Ok(s) => {
                *out = s;
                DeStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

unsafe fn correlation(
    x: *const f64,
    y: *const f64,
    n: usize,
    out: *mut f64,
    f: impl FnOnce(&[f64], &[f64]) -> discoeval::Result<f64>,
) -> DeStatus {
    guard(|| {
        if out.is_null() {
            return fail(DeStatus::NullPointer, "null out pointer");
        }
        let (x, y) = match (read_slice(x, n), read_slice(y, n)) {
            (Ok(x), Ok(y)) => (x, y),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        match f(x, y) {
            Ok(v) => {
                *out = v;
                DeStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `x` and `y` must point to `n` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn de_pearson(x: *const f64, y: *const f64, n: usize, out: *mut f64) -> DeStatus {
    correlation(x, y, n, out, pearson)
}

/// Spearman's rho with average ranks for ties.
///
/// # Safety
/// `x` and `y` must point to `n` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn de_spearman(x: *const f64, y: *const f64, n: usize, out: *mut f64) -> DeStatus {
    correlation(x, y, n, out, |a, b| spearman(a, b, RankMode::Lenient))
}

fn model_handle(model: CombinedMetricModel) -> *mut DeModel {
    let names = model
        .metrics
        .iter()
        .map(|m| CString::new(m.as_str()).unwrap_or_default())
        .collect();
    Box::into_raw(Box::new(DeModel { model, names }))
}

/// Loads a model from a JSON file written by `discoeval tune`.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn de_model_load(path: *const c_char, out: *mut *mut DeModel) -> DeStatus {
    guard(|| {
        if out.is_null() {
            return fail(DeStatus::NullPointer, "null out pointer");
        }
        *out = ptr::null_mut();
        let path = match read_str(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match CombinedMetricModel::read(std::path::Path::new(path)) {
            Ok(m) => {
                *out = model_handle(m);
                DeStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `model` must be a valid handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn de_model_metric_count(model: *const DeModel) -> usize {
    model.as_ref().map_or(0, |m| m.names.len())
}

/// Name of the model's `index`-th metric, owned by the model. NULL when out
/// of range.
///
/// # Safety
/// `model` must be a valid handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn de_model_metric_name(model: *const DeModel, index: usize) -> *const c_char {
    model
        .as_ref()
        .and_then(|m| m.names.get(index))
        .map_or(ptr::null(), |n| n.as_ptr())
}

/// Combined score from `n` raw metric scores given in model metric order.
///
/// # Safety
/// `model` must be a valid handle, `raw` must point to `n` doubles and
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn de_model_score(model: *const DeModel, raw: *const f64, n: usize, out: *mut f64) -> DeStatus {
    guard(|| {
        let (Some(model), false) = (model.as_ref(), out.is_null()) else {
            return fail(DeStatus::NullPointer, "null argument");
        };
        let raw = match read_slice(raw, n) {
            Ok(r) => r,
            Err(s) => return s,
        };
        match model.model.score_values(raw) {
            Ok(v) => {
                *out = v;
                DeStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `model` must come from `de_model_load` and not have been freed. NULL is
/// a no-op.
#[no_mangle]
pub unsafe extern "C" fn de_model_free(model: *mut DeModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `s` must be a string returned by this library, or NULL.
#[no_mangle]
pub unsafe extern "C" fn de_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
