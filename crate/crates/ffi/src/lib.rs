//! C interface to soapclf: character alignment and model scoring.
//!
//! Every function returns a [`SoapclfStatus`]. On failure the message is kept
//! in a thread-local slot readable with [`soapclf_last_error`]. Strings handed
//! out by the library must be released with [`soapclf_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use soapclf::align::AlignmentDump;
use soapclf::corpus::parse_transcript_line;
use soapclf::data::label_corpus;
use soapclf::pipeline::ModelFile;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SoapclfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Invariant = 4,
    Io = 5,
    InvalidInput = 6,
    Internal = 7,
}

/// Opaque alignment result.
pub struct SoapclfAlignment {
    dump: AlignmentDump,
    ops: CString,
}

/// Opaque trained model.
pub struct SoapclfModel {
    model: ModelFile,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(SoapclfStatus, String);

impl From<soapclf::Error> for Failure {
    fn from(e: soapclf::Error) -> Self {
        let status = match &e {
            soapclf::Error::Io { .. } => SoapclfStatus::Io,
            soapclf::Error::Parse { .. } | soapclf::Error::Validation { .. } => SoapclfStatus::Parse,
            soapclf::Error::Invariant(_) => SoapclfStatus::Invariant,
            soapclf::Error::InvalidInput(_) => SoapclfStatus::InvalidInput,
            soapclf::Error::Numeric(_) => SoapclfStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SoapclfStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SoapclfStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SoapclfStatus::Internal
        }
    }
}

/// # Safety
/// `p` is null or a NUL-terminated string valid for the call.
unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(SoapclfStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(SoapclfStatus::InvalidUtf8, format!("{name}: {e}")))
}

fn out_arg<T>(p: *mut T, name: &str) -> Result<&'static mut T, Failure> {
    // SAFETY: non-null out pointers are caller-provided writable slots.
    unsafe { p.as_mut() }.ok_or_else(|| Failure(SoapclfStatus::NullPointer, format!("{name} is null")))
}

fn to_cstring(s: String) -> Result<CString, Failure> {
    CString::new(s).map_err(|_| Failure(SoapclfStatus::Internal, "interior NUL in output".into()))
}

/// Message for the last failed call on this thread, or null. Owned by the
/// library; valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn soapclf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` is null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn soapclf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Align `reference` against `asr` (case-folded characters).
///
/// # Safety
/// Inputs are NUL-terminated strings; `out` is a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn soapclf_align(
    reference: *const c_char,
    asr: *const c_char,
    out: *mut *mut SoapclfAlignment,
) -> SoapclfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let r = str_arg(reference, "reference")?;
        let a = str_arg(asr, "asr")?;
        let dump = AlignmentDump::build("", r, a);
        let ops = to_cstring(dump.leaves.iter().fold(String::new(), |mut s, l| {
            s.push_str(&l.ops);
            s
        }))?;
        *out = Box::into_raw(Box::new(SoapclfAlignment { dump, ops }));
        Ok(())
    })
}

/// Edit cost of the alignment; 0 for a null handle.
///
/// # Safety
/// `al` is null or a live handle from [`soapclf_align`].
#[no_mangle]
pub unsafe extern "C" fn soapclf_alignment_cost(al: *const SoapclfAlignment) -> usize {
    al.as_ref().map_or(0, |a| a.dump.cost)
}

/// # Safety
/// `al` is null or a live handle from [`soapclf_align`].
#[no_mangle]
pub unsafe extern "C" fn soapclf_alignment_lengths(
    al: *const SoapclfAlignment,
    ref_len: *mut usize,
    asr_len: *mut usize,
) -> SoapclfStatus {
    guard(|| {
        let a = al
            .as_ref()
            .ok_or_else(|| Failure(SoapclfStatus::NullPointer, "alignment is null".into()))?;
        *out_arg(ref_len, "ref_len")? = a.dump.ref_len;
        *out_arg(asr_len, "asr_len")? = a.dump.asr_len;
        Ok(())
    })
}

/// Number of anchored span pairs.
///
/// # Safety
/// `al` is null or a live handle from [`soapclf_align`].
#[no_mangle]
pub unsafe extern "C" fn soapclf_alignment_anchor_count(al: *const SoapclfAlignment) -> usize {
    al.as_ref().map_or(0, |a| a.dump.anchors.len())
}

/// Concatenated leaf ops (`M`, `S`, `I`, `D`) in text order, excluding
/// anchors. Borrowed from the handle.
///
/// # Safety
/// `al` is null or a live handle from [`soapclf_align`].
#[no_mangle]
pub unsafe extern "C" fn soapclf_alignment_leaf_ops(al: *const SoapclfAlignment) -> *const c_char {
    al.as_ref().map_or(ptr::null(), |a| a.ops.as_ptr())
}

/// Full alignment record as JSON; free with [`soapclf_string_free`].
///
/// # Safety
/// `al` is a live handle; `out` is a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn soapclf_alignment_json(al: *const SoapclfAlignment, out: *mut *mut c_char) -> SoapclfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let a = al
            .as_ref()
            .ok_or_else(|| Failure(SoapclfStatus::NullPointer, "alignment is null".into()))?;
        let json = serde_json::to_string(&a.dump).map_err(|e| Failure(SoapclfStatus::Internal, e.to_string()))?;
        *out = to_cstring(json)?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `al` is null or a handle from [`soapclf_align`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn soapclf_alignment_free(al: *mut SoapclfAlignment) {
    if !al.is_null() {
        drop(Box::from_raw(al));
    }
}

/// Load a model file written by `soapclf train`.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn soapclf_model_load(path: *const c_char, out: *mut *mut SoapclfModel) -> SoapclfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let model = ModelFile::load(str_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(SoapclfModel { model }));
        Ok(())
    })
}

/// Score one transcript given as a corpus JSON line. Writes
/// `{"soap": [[..5]..], "speaker": [[..4]..]}` with one row per kept
/// utterance (utterances without words are dropped, as in training).
///
/// # Safety
/// `model` is a live handle; `transcript` is NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn soapclf_model_predict(
    model: *const SoapclfModel,
    transcript: *const c_char,
    calibrated: bool,
    out: *mut *mut c_char,
) -> SoapclfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let m = &model
            .as_ref()
            .ok_or_else(|| Failure(SoapclfStatus::NullPointer, "model is null".into()))?
            .model;
        let t = parse_transcript_line(str_arg(transcript, "transcript")?, 1)?;
        let data = label_corpus(std::slice::from_ref(&t), &m.preprocess);
        let mut scores = m.predict(&data)?;
        if calibrated {
            scores = m.calibrate(&scores);
        }
        let json = serde_json::json!({ "soap": scores.soap, "speaker": scores.speaker });
        *out = to_cstring(json.to_string())?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `model` is null or a handle from [`soapclf_model_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn soapclf_model_free(model: *mut SoapclfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
