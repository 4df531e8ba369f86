//! C ABI over the lexicon library.
//!
//! Handles are opaque and owned by the caller once returned; release them with
//! the matching `*_free`. Every fallible call returns an [`LlxStatus`] and, on
//! failure, records a message readable with [`llx_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use libertylex::corpus::{load_jsonl, preprocess, LabeledDataset, Scheme, Stopwords};
use libertylex::cs::generate_cs;
use libertylex::experiments::friedman_test;
use libertylex::learn::f1_macro;
use libertylex::lexicon::{overlap_merge, Lexicon, RescaleMode};
use libertylex::Error;

/// Status codes. Library failures use the same numbers as the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LlxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    NotFound = 5,
    Corpus = 10,
    Embedding = 11,
    SeedSelection = 12,
    WeLexicon = 13,
    CsLexicon = 14,
    LexiconCore = 15,
    Featurize = 16,
    Learn = 17,
    Experiments = 18,
    Other = 19,
    Panic = 99,
}

pub struct LlxDataset {
    inner: LabeledDataset,
}

pub struct LlxLexicon {
    inner: Lexicon,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> LlxStatus {
    match err.module() {
        "io" => LlxStatus::Io,
        "parse" => LlxStatus::Parse,
        "corpus" => LlxStatus::Corpus,
        "embedding" => LlxStatus::Embedding,
        "seed_selection" => LlxStatus::SeedSelection,
        "we_lexicon" => LlxStatus::WeLexicon,
        "cs_lexicon" => LlxStatus::CsLexicon,
        "lexicon_core" => LlxStatus::LexiconCore,
        "featurize" => LlxStatus::Featurize,
        "learn" => LlxStatus::Learn,
        "experiments" => LlxStatus::Experiments,
        _ => LlxStatus::Other,
    }
}

struct Fail(LlxStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LlxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LlxStatus::Ok,
        Ok(Err(Fail(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            LlxStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(LlxStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(LlxStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail(LlxStatus::NullPointer, format!("{what} is null")))
}

fn out_ptr<T>(p: *mut T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        Err(Fail(LlxStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

fn parse_arg<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T, Fail> {
    s.parse().map_err(|e: Error| Fail(LlxStatus::InvalidArgument, e.to_string()))
}

/// Message of the last failure on this thread, or null. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn llx_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn llx_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a JSONL dataset. `scheme` is `ternary`, `binary_moral` or `binary_side`.
///
/// # Safety
/// `path` and `scheme` must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn llx_dataset_load(
    path: *const c_char,
    scheme: *const c_char,
    out: *mut *mut LlxDataset,
) -> LlxStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let path = text(path, "path")?;
        let scheme: Scheme = parse_arg(text(scheme, "scheme")?)?;
        let inner = load_jsonl(Path::new(path), scheme)?;
        *out = Box::into_raw(Box::new(LlxDataset { inner }));
        Ok(())
    })
}

/// Tokenizes every document into a new dataset. `stopwords` is `english`,
/// `none` or a file path.
///
/// # Safety
/// `dataset` must be a live handle; `stopwords` a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn llx_dataset_preprocess(
    dataset: *const LlxDataset,
    stopwords: *const c_char,
    out: *mut *mut LlxDataset,
) -> LlxStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let ds = handle(dataset, "dataset")?;
        let stop = match text(stopwords, "stopwords")? {
            "english" => Stopwords::english(),
            "none" => Stopwords::empty(),
            path => Stopwords::load(Path::new(path))?,
        };
        *out = Box::into_raw(Box::new(LlxDataset { inner: preprocess(&ds.inner, &stop) }));
        Ok(())
    })
}

/// Number of documents, or 0 for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn llx_dataset_len(dataset: *const LlxDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.len())
}

/// # Safety
/// `dataset` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn llx_dataset_free(dataset: *mut LlxDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Builds the compositional lexicon of a tokenized binary dataset.
///
/// # Safety
/// `dataset` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn llx_generate_cs(
    dataset: *const LlxDataset,
    min_frequency: u64,
    out: *mut *mut LlxLexicon,
) -> LlxStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let ds = handle(dataset, "dataset")?;
        let inner = generate_cs(&ds.inner, min_frequency)?;
        *out = Box::into_raw(Box::new(LlxLexicon { inner }));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn llx_lexicon_load(path: *const c_char, out: *mut *mut LlxLexicon) -> LlxStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let inner = Lexicon::load(Path::new(text(path, "path")?))?;
        *out = Box::into_raw(Box::new(LlxLexicon { inner }));
        Ok(())
    })
}

/// # Safety
/// `lexicon` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn llx_lexicon_save(lexicon: *const LlxLexicon, path: *const c_char) -> LlxStatus {
    guard(|| {
        let lex = handle(lexicon, "lexicon")?;
        lex.inner.save(Path::new(text(path, "path")?))?;
        Ok(())
    })
}

/// Number of entries, or 0 for a null handle.
///
/// # Safety
/// `lexicon` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn llx_lexicon_len(lexicon: *const LlxLexicon) -> usize {
    lexicon.as_ref().map_or(0, |l| l.inner.len())
}

/// Writes the score of `token` to `score`; `NotFound` if absent.
///
/// # Safety
/// `lexicon` must be a live handle; `token` a NUL-terminated string; `score` writable.
#[no_mangle]
pub unsafe extern "C" fn llx_lexicon_score(
    lexicon: *const LlxLexicon,
    token: *const c_char,
    score: *mut f64,
) -> LlxStatus {
    guard(|| {
        out_ptr(score, "score")?;
        let lex = handle(lexicon, "lexicon")?;
        let token = text(token, "token")?;
        match lex.inner.score(token) {
            Some(s) => {
                *score = s;
                Ok(())
            }
            None => Err(Fail(LlxStatus::NotFound, format!("token {token:?} is not in the lexicon"))),
        }
    })
}

/// Overlap merge of `count` lexicons. `rescale` is `none`,
/// `minmax_symmetric` or `zscore`.
///
/// # Safety
/// `lexicons` must point to `count` live handles; `rescale` a NUL-terminated
/// string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn llx_lexicon_merge(
    lexicons: *const *const LlxLexicon,
    count: usize,
    selection: f64,
    rescale: *const c_char,
    out: *mut *mut LlxLexicon,
) -> LlxStatus {
    guard(|| {
        out_ptr(out, "out")?;
        if lexicons.is_null() {
            return Err(Fail(LlxStatus::NullPointer, "lexicons is null".into()));
        }
        let mode: RescaleMode = parse_arg(text(rescale, "rescale")?)?;
        let family: Vec<Lexicon> = std::slice::from_raw_parts(lexicons, count)
            .iter()
            .map(|&p| handle(p, "lexicon").map(|l| l.inner.clone()))
            .collect::<Result<_, _>>()?;
        let inner = overlap_merge(&family, selection, mode)?;
        *out = Box::into_raw(Box::new(LlxLexicon { inner }));
        Ok(())
    })
}

/// # Safety
/// `lexicon` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn llx_lexicon_free(lexicon: *mut LlxLexicon) {
    if !lexicon.is_null() {
        drop(Box::from_raw(lexicon));
    }
}

/// Friedman test over a row-major `blocks × methods` score table (higher is
/// better). Writes the average rank of each method to `average_ranks`.
///
/// # Safety
/// `scores` must hold `blocks * methods` values; `average_ranks` room for
/// `methods`; `statistic` and `p_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn llx_friedman(
    scores: *const f64,
    blocks: usize,
    methods: usize,
    alpha: f64,
    average_ranks: *mut f64,
    statistic: *mut f64,
    p_value: *mut f64,
) -> LlxStatus {
    guard(|| {
        if scores.is_null() {
            return Err(Fail(LlxStatus::NullPointer, "scores is null".into()));
        }
        out_ptr(average_ranks, "average_ranks")?;
        out_ptr(statistic, "statistic")?;
        out_ptr(p_value, "p_value")?;
        let flat = std::slice::from_raw_parts(scores, blocks * methods);
        let table: Vec<Vec<f64>> = flat.chunks(methods.max(1)).map(<[f64]>::to_vec).collect();
        let names: Vec<String> = (0..methods).map(|i| i.to_string()).collect();
        let r = friedman_test(&names, &table, alpha)?;
        std::slice::from_raw_parts_mut(average_ranks, methods).copy_from_slice(&r.average_ranks);
        *statistic = r.statistic;
        *p_value = r.p_value;
        Ok(())
    })
}

/// Macro-averaged F1 over integer class labels.
///
/// # Safety
/// `truth` and `predicted` must each hold `n` values; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn llx_f1_macro(truth: *const i32, predicted: *const i32, n: usize, out: *mut f64) -> LlxStatus {
    guard(|| {
        out_ptr(out, "out")?;
        if truth.is_null() || predicted.is_null() {
            return Err(Fail(LlxStatus::NullPointer, "label array is null".into()));
        }
        let t = std::slice::from_raw_parts(truth, n);
        let p = std::slice::from_raw_parts(predicted, n);
        *out = f1_macro(t, p)?;
        Ok(())
    })
}
