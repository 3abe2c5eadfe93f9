//! C ABI over the covcon library.
//!
//! Every fallible function returns a [`CovconStatus`] and writes its result
//! through an out-pointer. On failure, `covcon_last_error()` describes the
//! problem. Strings returned by the library must be released with
//! `covcon_string_free`; handles with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use covcon::conllu::{parse_conllu_str, DepSentence};
use covcon::detector::{run_additions, run_omissions, DetectorConfig};
use covcon::scoring::{avg_logprob, Direction, Lexicon, LexiconScorer, ScoreRequest, Scorer};
use covcon::spans::{extract_spans, PosConfig};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovconStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidArgument = 4,
    OutOfRange = 5,
    BackendError = 6,
    Panic = 7,
}

/// Parsed CoNLL-U sentences.
pub struct CovconSentences {
    sentences: Vec<DepSentence>,
}

/// A lexicon scorer for one language pair, with its reverse.
pub struct CovconScorer {
    direction: Direction,
    forward: Scorer,
    reverse: Scorer,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let msg = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(msg).expect("nul bytes removed")));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(CovconStatus, String);

fn fail<T>(status: CovconStatus, message: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, message.into()))
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CovconStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CovconStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CovconStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return fail(CovconStatus::NullPointer, format!("{name} is null"));
    }
    CStr::from_ptr(p).to_str().or_else(|_| {
        fail(
            CovconStatus::InvalidUtf8,
            format!("{name} is not valid UTF-8"),
        )
    })
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().map_or_else(
        || fail(CovconStatus::NullPointer, format!("{name} is null")),
        Ok,
    )
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().map_or_else(
        || fail(CovconStatus::NullPointer, format!("{name} is null")),
        Ok,
    )
}

fn to_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .or_else(|_| fail(CovconStatus::InvalidArgument, "result contains a nul byte"))
}

fn sentence(handle: &CovconSentences, index: usize) -> Result<&DepSentence, Failure> {
    handle.sentences.get(index).map_or_else(
        || {
            fail(
                CovconStatus::OutOfRange,
                format!(
                    "sentence index {index} out of range ({} sentences)",
                    handle.sentences.len()
                ),
            )
        },
        Ok,
    )
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next library call on the same thread.
#[no_mangle]
pub extern "C" fn covcon_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn covcon_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn covcon_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses CoNLL-U text.
///
/// # Safety
/// `conllu` must be a nul-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn covcon_sentences_parse(
    conllu: *const c_char,
    out: *mut *mut CovconSentences,
) -> CovconStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let text = str_arg(conllu, "conllu")?;
        let sentences =
            parse_conllu_str(text).or_else(|e| fail(CovconStatus::ParseError, e.to_string()))?;
        *out = Box::into_raw(Box::new(CovconSentences { sentences }));
        Ok(())
    })
}

/// Number of parsed sentences; 0 for null.
///
/// # Safety
/// `handle` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn covcon_sentences_count(handle: *const CovconSentences) -> usize {
    handle.as_ref().map_or(0, |h| h.sentences.len())
}

/// # Safety
/// `handle` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn covcon_sentences_free(handle: *mut CovconSentences) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Candidate spans of one sentence as a JSON array. `pos_tags` is a
/// comma-separated UPOS list, or null for the default set.
///
/// # Safety
/// Pointers must be valid; `pos_tags` may be null.
#[no_mangle]
pub unsafe extern "C" fn covcon_spans_json(
    handle: *const CovconSentences,
    index: usize,
    pos_tags: *const c_char,
    out_json: *mut *mut c_char,
) -> CovconStatus {
    guard(|| {
        let out = out_arg(out_json, "out_json")?;
        *out = ptr::null_mut();
        let h = ref_arg(handle, "handle")?;
        let s = sentence(h, index)?;
        let pos = if pos_tags.is_null() {
            PosConfig::default()
        } else {
            PosConfig::parse_list(str_arg(pos_tags, "pos_tags")?)
                .or_else(|e| fail(CovconStatus::InvalidArgument, e.to_string()))?
        };
        let spans = extract_spans(s, &pos);
        *out = to_c_string(serde_json::to_string(&spans).expect("serializable"))?;
        Ok(())
    })
}

/// Builds a lexicon scorer from `source<TAB>target` lines.
///
/// # Safety
/// String arguments must be nul-terminated; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn covcon_lexicon_scorer_new(
    lexicon_tsv: *const c_char,
    src_lang: *const c_char,
    tgt_lang: *const c_char,
    lambda_src: f64,
    lambda_tgt: f64,
    out: *mut *mut CovconScorer,
) -> CovconStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let tsv = str_arg(lexicon_tsv, "lexicon_tsv")?;
        let direction = Direction::new(
            str_arg(src_lang, "src_lang")?,
            str_arg(tgt_lang, "tgt_lang")?,
        )
        .or_else(|e| fail(CovconStatus::InvalidArgument, e.to_string()))?;
        let lexicon = Lexicon::read_tsv(tsv.as_bytes())
            .or_else(|e| fail(CovconStatus::ParseError, e.to_string()))?;
        let scorer = LexiconScorer::new(lexicon)
            .with_penalties(lambda_src, lambda_tgt)
            .or_else(|e| fail(CovconStatus::InvalidArgument, e))?;
        let reverse = scorer.reversed();
        *out = Box::into_raw(Box::new(CovconScorer {
            direction,
            forward: Scorer::new(Arc::new(scorer)),
            reverse: Scorer::new(Arc::new(reverse)),
        }));
        Ok(())
    })
}

/// # Safety
/// `handle` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn covcon_scorer_free(handle: *mut CovconScorer) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Mean token log-probability of `scored` given `conditioning` in the
/// scorer's forward direction.
///
/// # Safety
/// Pointers must be valid and strings nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn covcon_score(
    handle: *const CovconScorer,
    conditioning: *const c_char,
    scored: *const c_char,
    out_score: *mut f64,
) -> CovconStatus {
    guard(|| {
        let out = out_arg(out_score, "out_score")?;
        let h = ref_arg(handle, "handle")?;
        let req = ScoreRequest::new(
            "ffi",
            &h.direction,
            str_arg(conditioning, "conditioning")?,
            str_arg(scored, "scored")?,
        );
        let r = h
            .forward
            .score(&req)
            .or_else(|e| fail(CovconStatus::BackendError, e.to_string()))?;
        *out = r.score;
        Ok(())
    })
}

fn detector_config(margin: f64) -> Result<DetectorConfig, Failure> {
    DetectorConfig::default()
        .with_margin(margin)
        .or_else(|e| fail(CovconStatus::InvalidArgument, e.to_string()))
}

/// Omission detections for a parsed source sentence and its translation,
/// as a JSON array.
///
/// # Safety
/// Pointers must be valid and strings nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn covcon_detect_omissions_json(
    scorer: *const CovconScorer,
    sources: *const CovconSentences,
    index: usize,
    translation: *const c_char,
    margin: f64,
    out_json: *mut *mut c_char,
) -> CovconStatus {
    guard(|| {
        let out = out_arg(out_json, "out_json")?;
        *out = ptr::null_mut();
        let h = ref_arg(scorer, "scorer")?;
        let src = sentence(ref_arg(sources, "sources")?, index)?;
        let cfg = detector_config(margin)?;
        let outcome = run_omissions(
            src,
            str_arg(translation, "translation")?,
            &h.forward,
            &h.direction,
            &cfg,
        )
        .or_else(|e| fail(CovconStatus::BackendError, e.to_string()))?;
        *out = to_c_string(serde_json::to_string(&outcome.detections).expect("serializable"))?;
        Ok(())
    })
}

/// Addition detections for a source text and a parsed translation, as a
/// JSON array.
///
/// # Safety
/// Pointers must be valid and strings nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn covcon_detect_additions_json(
    scorer: *const CovconScorer,
    source: *const c_char,
    translations: *const CovconSentences,
    index: usize,
    margin: f64,
    out_json: *mut *mut c_char,
) -> CovconStatus {
    guard(|| {
        let out = out_arg(out_json, "out_json")?;
        *out = ptr::null_mut();
        let h = ref_arg(scorer, "scorer")?;
        let tgt = sentence(ref_arg(translations, "translations")?, index)?;
        let cfg = detector_config(margin)?;
        let outcome = run_additions(
            str_arg(source, "source")?,
            tgt,
            &h.reverse,
            &h.direction.reversed(),
            &cfg,
        )
        .or_else(|e| fail(CovconStatus::BackendError, e.to_string()))?;
        *out = to_c_string(serde_json::to_string(&outcome.detections).expect("serializable"))?;
        Ok(())
    })
}

/// Mean of `len` log-probabilities.
///
/// # Safety
/// `values` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn covcon_avg_logprob(
    values: *const f64,
    len: usize,
    out: *mut f64,
) -> CovconStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if values.is_null() {
            return fail(CovconStatus::NullPointer, "values is null");
        }
        let v = std::slice::from_raw_parts(values, len);
        *out = avg_logprob(v).or_else(|e| fail(CovconStatus::InvalidArgument, e.to_string()))?;
        Ok(())
    })
}

/// Cohen's kappa between two raters' integer-coded labels.
///
/// # Safety
/// `a` and `b` must each point to `len` values.
#[no_mangle]
pub unsafe extern "C" fn covcon_cohens_kappa(
    a: *const i32,
    b: *const i32,
    len: usize,
    out: *mut f64,
) -> CovconStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if a.is_null() || b.is_null() {
            return fail(CovconStatus::NullPointer, "label array is null");
        }
        let (a, b) = (
            std::slice::from_raw_parts(a, len),
            std::slice::from_raw_parts(b, len),
        );
        *out = covcon::evalkit::cohens_kappa(a, b)
            .or_else(|e| fail(CovconStatus::InvalidArgument, e.to_string()))?;
        Ok(())
    })
}
