//! C ABI over the `plausible` toolkit.
//!
//! Objects are opaque handles created by `pl_*_load`/`pl_*_new` and released
//! with the matching `pl_*_free`. Every fallible call returns a [`PlStatus`];
//! on failure, [`pl_last_error_message`] describes the error on the calling
//! thread. Strings returned to the caller are released with
//! [`pl_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use plausible::conllu::ErrorPolicy;
use plausible::embeddings::{EmbeddingTable, OovPolicy};
use plausible::eval::report;
use plausible::extract::{extract_files, ExtractionConfig};
use plausible::mlp::{load_checkpoint, MlpParams};
use plausible::rng::{seeded, Rng};
use plausible::sampling::{build_selfsupervised_dataset, save_labeled, DatasetOptions, Label, NegativeSampler};
use plausible::store::TripleStore;
use plausible::{Error, Triple};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Empty = 5,
    InvalidArgument = 6,
    /// A word of the triple has no vector.
    Oov = 7,
    Panic = 8,
}

/// Confusion counts; `fp_share` is NaN when there are no errors.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PlReport {
    pub accuracy: f64,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
    pub fp_share: f64,
}

pub struct PlStore {
    inner: TripleStore,
}

pub struct PlSampler {
    inner: NegativeSampler<TripleStore>,
    rng: Rng,
}

pub struct PlEmbeddings {
    inner: EmbeddingTable,
}

pub struct PlModel {
    inner: MlpParams,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<Vec<u8>>) {
    let mut bytes: Vec<u8> = msg.into();
    bytes.retain(|&b| b != 0);
    let msg = CString::new(bytes).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> PlStatus {
    match err {
        Error::Io(_) | Error::Open { .. } => PlStatus::Io,
        Error::MalformedLine { .. }
        | Error::InvalidTree { .. }
        | Error::MalformedRow { .. }
        | Error::InconsistentDim { .. }
        | Error::CorruptCheckpoint(_) => PlStatus::Parse,
        Error::EmptyDistribution(_) | Error::EmptyTable => PlStatus::Empty,
        _ => PlStatus::InvalidArgument,
    }
}

struct Failure(PlStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

type FfiResult = Result<(), Failure>;

/// Run `f`, record any failure, and convert panics into `PlStatus::Panic`.
fn guard(f: impl FnOnce() -> FfiResult) -> PlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PlStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PlStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(PlStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(PlStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn triple_arg(s: *const c_char, v: *const c_char, o: *const c_char) -> Result<Triple, Failure> {
    let (s, v, o) = (str_arg(s, "subject")?, str_arg(v, "verb")?, str_arg(o, "object")?);
    Triple::new(s, v, o).ok_or_else(|| {
        Failure(
            PlStatus::InvalidArgument,
            format!("{s}-{v}-{o} has a non-alphabetic slot"),
        )
    })
}

/// Message for the last failed call on this thread. Empty if none. Valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Load a `subject\tverb\tobject\tcount` file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pl_store_load(path: *const c_char, out: *mut *mut PlStore) -> PlStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let store = TripleStore::load(str_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(PlStore { inner: store }));
        Ok(())
    })
}

/// Extract triples from `n_paths` CoNLL-U files. Malformed sentences are
/// skipped unless `strict` is set.
///
/// # Safety
/// `paths` must point to `n_paths` NUL-terminated strings; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn pl_store_from_conllu(
    paths: *const *const c_char,
    n_paths: usize,
    include_passive: bool,
    strict: bool,
    out: *mut *mut PlStore,
) -> PlStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if paths.is_null() {
            return Err(null("paths"));
        }
        let files = std::slice::from_raw_parts(paths, n_paths)
            .iter()
            .map(|&p| str_arg(p, "path").map(PathBuf::from))
            .collect::<Result<Vec<_>, _>>()?;
        if files.is_empty() {
            return Err(Failure(PlStatus::InvalidArgument, "no input files".into()));
        }
        let cfg = ExtractionConfig {
            include_passive,
            ..Default::default()
        };
        let policy = if strict { ErrorPolicy::Strict } else { ErrorPolicy::Lenient };
        let (store, _) = extract_files(&files, &cfg, policy)?;
        *out = Box::into_raw(Box::new(PlStore { inner: store }));
        Ok(())
    })
}

/// # Safety
/// `store` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pl_store_save(store: *const PlStore, path: *const c_char) -> PlStatus {
    guard(|| {
        let store = ref_arg(store, "store")?;
        store.inner.save(str_arg(path, "path")?)?;
        Ok(())
    })
}

/// Count of one triple; 0 if unattested.
///
/// # Safety
/// `store` must be a live handle; the lemmas NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pl_store_count(
    store: *const PlStore,
    subject: *const c_char,
    verb: *const c_char,
    object: *const c_char,
    out: *mut u64,
) -> PlStatus {
    guard(|| {
        let store = ref_arg(store, "store")?;
        let out = out_arg(out, "out")?;
        *out = store.inner.count(&triple_arg(subject, verb, object)?);
        Ok(())
    })
}

/// Number of distinct triples; 0 for a null handle.
///
/// # Safety
/// `store` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pl_store_unique_len(store: *const PlStore) -> usize {
    store.as_ref().map_or(0, |s| s.inner.len())
}

/// Sum of all counts; 0 for a null handle.
///
/// # Safety
/// `store` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pl_store_total(store: *const PlStore) -> u64 {
    store.as_ref().map_or(0, |s| s.inner.total())
}

/// # Safety
/// `store` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pl_store_free(store: *mut PlStore) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}

/// Write a balanced self-supervised dataset of `2 * n_positive` rows.
///
/// # Safety
/// `store` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pl_dataset_build(
    store: *const PlStore,
    n_positive: usize,
    seed: u64,
    path: *const c_char,
) -> PlStatus {
    guard(|| {
        let store = ref_arg(store, "store")?;
        let path = str_arg(path, "path")?;
        let data = build_selfsupervised_dataset(&store.inner, n_positive, seed, &DatasetOptions::default())?;
        save_labeled(&data, path)?;
        Ok(())
    })
}

/// Negative sampler over a copy of `store`. `max_resample = 0` disables
/// rejection of attested draws.
///
/// # Safety
/// `store` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pl_sampler_new(
    store: *const PlStore,
    max_resample: usize,
    seed: u64,
    out: *mut *mut PlSampler,
) -> PlStatus {
    guard(|| {
        let store = ref_arg(store, "store")?;
        let out = out_arg(out, "out")?;
        let inner = NegativeSampler::new(store.inner.clone(), max_resample)?;
        *out = Box::into_raw(Box::new(PlSampler {
            inner,
            rng: seeded(seed),
        }));
        Ok(())
    })
}

/// Draw one negative as `subject\tverb\tobject` into `*triple_out` (free
/// with `pl_string_free`). `*collision` is set when the draw is attested.
///
/// # Safety
/// `sampler` must be a live handle; the out pointers writable.
#[no_mangle]
pub unsafe extern "C" fn pl_sampler_sample(
    sampler: *mut PlSampler,
    triple_out: *mut *mut c_char,
    collision: *mut bool,
) -> PlStatus {
    guard(|| {
        let sampler = sampler.as_mut().ok_or_else(|| null("sampler"))?;
        let triple_out = out_arg(triple_out, "triple_out")?;
        let collision = out_arg(collision, "collision")?;
        let draw = sampler.inner.sample(&mut sampler.rng);
        let t = draw.triple;
        let text = format!("{}\t{}\t{}", t.subject, t.verb, t.object);
        *triple_out = CString::new(text).expect("lemmas have no NUL").into_raw();
        *collision = draw.collision;
        Ok(())
    })
}

/// # Safety
/// `sampler` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pl_sampler_free(sampler: *mut PlSampler) {
    if !sampler.is_null() {
        drop(Box::from_raw(sampler));
    }
}

/// Load text vectors. Triples with an unknown word are not scored.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pl_embeddings_load(path: *const c_char, out: *mut *mut PlEmbeddings) -> PlStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let (table, _) = EmbeddingTable::load(str_arg(path, "path")?, None, OovPolicy::Drop, false)?;
        *out = Box::into_raw(Box::new(PlEmbeddings { inner: table }));
        Ok(())
    })
}

/// Vector dimension; 0 for a null handle.
///
/// # Safety
/// `emb` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pl_embeddings_dim(emb: *const PlEmbeddings) -> usize {
    emb.as_ref().map_or(0, |e| e.inner.dim())
}

/// # Safety
/// `emb` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pl_embeddings_free(emb: *mut PlEmbeddings) {
    if !emb.is_null() {
        drop(Box::from_raw(emb));
    }
}

/// Load a classifier checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pl_model_load(path: *const c_char, out: *mut *mut PlModel) -> PlStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let params = load_checkpoint(str_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(PlModel { inner: params }));
        Ok(())
    })
}

/// Input vector dimension the model expects; 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pl_model_dim(model: *const PlModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.dim())
}

/// Plausibility probability of a triple and its label (1 plausible, 0 not).
/// Returns `Oov` when a word has no vector.
///
/// # Safety
/// Handles must be live; lemmas NUL-terminated; out pointers writable.
#[no_mangle]
pub unsafe extern "C" fn pl_model_predict(
    model: *const PlModel,
    emb: *const PlEmbeddings,
    subject: *const c_char,
    verb: *const c_char,
    object: *const c_char,
    probability: *mut f64,
    label: *mut i32,
) -> PlStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        let emb = ref_arg(emb, "embeddings")?;
        let probability = out_arg(probability, "probability")?;
        let label = out_arg(label, "label")?;
        if model.inner.dim() != emb.inner.dim() {
            return Err(Failure(
                PlStatus::InvalidArgument,
                format!(
                    "model expects {}-dimensional vectors, table has {}",
                    model.inner.dim(),
                    emb.inner.dim()
                ),
            ));
        }
        let t = triple_arg(subject, verb, object)?;
        let (l, p) = model
            .inner
            .predict(&emb.inner, &t)
            .ok_or_else(|| Failure(PlStatus::Oov, format!("no vector for a word of {t}")))?;
        *probability = p;
        *label = i32::from(l.as_u8());
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pl_model_free(model: *mut PlModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Accuracy and confusion counts of `n` predictions against labels, both
/// given as 0/1 bytes.
///
/// # Safety
/// `predictions` and `labels` must point to `n` readable bytes; `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn pl_report_compute(
    predictions: *const u8,
    labels: *const u8,
    n: usize,
    out: *mut PlReport,
) -> PlStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if predictions.is_null() || labels.is_null() {
            return Err(null("predictions or labels"));
        }
        let to_labels = |p: *const u8| -> Result<Vec<Label>, Failure> {
            std::slice::from_raw_parts(p, n)
                .iter()
                .map(|&b| match b {
                    0 => Ok(Label::Implausible),
                    1 => Ok(Label::Plausible),
                    _ => Err(Failure(PlStatus::InvalidArgument, format!("label byte {b} is not 0 or 1"))),
                })
                .collect()
        };
        let r = report(&to_labels(predictions)?, &to_labels(labels)?)?;
        *out = PlReport {
            accuracy: r.accuracy,
            tp: r.tp as u64,
            fp: r.fp as u64,
            tn: r.tn as u64,
            fn_: r.fn_ as u64,
            fp_share: r.fp_share_of_errors.unwrap_or(f64::NAN),
        };
        Ok(())
    })
}
