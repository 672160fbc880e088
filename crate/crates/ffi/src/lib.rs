//! C ABI over the ECG-language codec.
//!
//! Every fallible call returns an [`EcgStatus`]; on failure a message is
//! kept per thread and read with [`ecg_last_error_message`]. Codebooks are
//! opaque handles. Strings and sample buffers handed out by this library
//! must be released with [`ecg_string_free`] and [`ecg_samples_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ecg_abcde::codec::{decode_lead, encode_lead, EcgLanguage, EncodeOptions};
use ecg_abcde::quantize::{load_codebook, CodeBook};
use ecg_abcde::trend::{l1_trend_filter, LambdaPolicy, TrendOptions};
use ecg_abcde::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EcgStatus {
    Ok = 0,
    Io = 1,
    Parse = 2,
    LeadCount = 3,
    UnknownLead = 4,
    DuplicateLead = 5,
    RaggedLeads = 6,
    NonFinite = 7,
    InvalidArgument = 8,
    SignalTooShort = 9,
    Degenerate = 10,
    CodebookVersion = 11,
    InvalidCodebook = 12,
    MalformedLanguage = 13,
    OutsideAlphabet = 14,
    NonConvergence = 15,
    DumpMismatch = 16,
    /// A required pointer argument was null.
    NullPointer = 17,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 18,
    /// The library panicked; the message describes where.
    Panic = 19,
}

impl From<&Error> for EcgStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Io { .. } => EcgStatus::Io,
            Error::Parse(_) => EcgStatus::Parse,
            Error::LeadCount(_) => EcgStatus::LeadCount,
            Error::UnknownLead(_) => EcgStatus::UnknownLead,
            Error::DuplicateLead(_) => EcgStatus::DuplicateLead,
            Error::RaggedLeads { .. } => EcgStatus::RaggedLeads,
            Error::NonFinite { .. } => EcgStatus::NonFinite,
            Error::InvalidArgument(_) => EcgStatus::InvalidArgument,
            Error::SignalTooShort { .. } => EcgStatus::SignalTooShort,
            Error::Degenerate(_) => EcgStatus::Degenerate,
            Error::CodebookVersion { .. } => EcgStatus::CodebookVersion,
            Error::InvalidCodebook(_) => EcgStatus::InvalidCodebook,
            Error::MalformedLanguage { .. } => EcgStatus::MalformedLanguage,
            Error::OutsideAlphabet(_) => EcgStatus::OutsideAlphabet,
            Error::NonConvergence { .. } => EcgStatus::NonConvergence,
            Error::DumpMismatch(_) => EcgStatus::DumpMismatch,
        }
    }
}

/// Opaque codebook handle.
pub struct EcgCodebook {
    inner: CodeBook,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(EcgStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(EcgStatus::from(&e), format!("{}: {e}", e.kind()))
    }
}

fn set_last_error(msg: Option<String>) {
    let c = msg.map(|m| CString::new(m.replace('\0', " ")).expect("interior nuls were replaced"));
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> EcgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error(None);
            EcgStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(Some(msg));
            status
        }
        Err(payload) => {
            let what = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(Some(format!("panic: {what}")));
            EcgStatus::Panic
        }
    }
}

fn null(name: &str) -> Failure {
    Failure(EcgStatus::NullPointer, format!("null_pointer: {name} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(EcgStatus::InvalidUtf8, format!("invalid_utf8: {name}: {e}")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn codebook_arg<'a>(cb: *const EcgCodebook) -> Result<&'a CodeBook, Failure> {
    cb.as_ref().map(|c| &c.inner).ok_or_else(|| null("codebook"))
}

fn give_string(s: String) -> *mut c_char {
    CString::new(s).expect("library strings contain no nul").into_raw()
}

/// Library version, a static nul-terminated string.
#[no_mangle]
pub extern "C" fn ecg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null after a
/// successful call. Valid until the next call into the library on the same
/// thread.
#[no_mangle]
pub extern "C" fn ecg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a codebook JSON file.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ecg_codebook_load(path: *const c_char, out: *mut *mut EcgCodebook) -> EcgStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let inner = load_codebook(Path::new(path))?;
        *out = Box::into_raw(Box::new(EcgCodebook { inner }));
        Ok(())
    })
}

/// Parses a codebook from JSON text.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ecg_codebook_from_json(json: *const c_char, out: *mut *mut EcgCodebook) -> EcgStatus {
    guard(|| {
        let json = str_arg(json, "json")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let inner = CodeBook::from_json(json)?;
        *out = Box::into_raw(Box::new(EcgCodebook { inner }));
        Ok(())
    })
}

/// Serializes a codebook to JSON. Free the result with `ecg_string_free`.
///
/// # Safety
/// `cb` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ecg_codebook_to_json(cb: *const EcgCodebook, out: *mut *mut c_char) -> EcgStatus {
    guard(|| {
        let cb = codebook_arg(cb)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = give_string(cb.to_json()?);
        Ok(())
    })
}

/// Releases a codebook. Null is ignored.
///
/// # Safety
/// `cb` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ecg_codebook_free(cb: *mut EcgCodebook) {
    if !cb.is_null() {
        drop(Box::from_raw(cb));
    }
}

/// Encodes one lead sampled at the codebook's rate. A negative `lambda`
/// selects the automatic smoothing policy. Free the result with
/// `ecg_string_free`.
///
/// # Safety
/// `samples` must point to `len` doubles, `cb` come from this library and
/// `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ecg_encode_lead(
    cb: *const EcgCodebook,
    samples: *const f64,
    len: usize,
    lambda: f64,
    out: *mut *mut c_char,
) -> EcgStatus {
    guard(|| {
        let cb = codebook_arg(cb)?;
        let x = slice_arg(samples, len, "samples")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let opts = EncodeOptions {
            lambda: if lambda < 0.0 {
                LambdaPolicy::default()
            } else {
                LambdaPolicy::Fixed { lambda }
            },
            ..Default::default()
        };
        let lang = encode_lead(x, cb, &opts)?;
        *out = give_string(lang.as_str().to_string());
        Ok(())
    })
}

/// Decodes one lead. On success `*out` holds `*out_len` samples; free them
/// with `ecg_samples_free`.
///
/// # Safety
/// `text` must be a nul-terminated string, `cb` come from this library and
/// the out pointers be valid.
#[no_mangle]
pub unsafe extern "C" fn ecg_decode_lead(
    cb: *const EcgCodebook,
    text: *const c_char,
    out: *mut *mut f64,
    out_len: *mut usize,
) -> EcgStatus {
    guard(|| {
        let cb = codebook_arg(cb)?;
        let text = str_arg(text, "text")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let out_len = out_len.as_mut().ok_or_else(|| null("out_len"))?;
        let x = decode_lead(&EcgLanguage::parse(text)?, cb)?.into_boxed_slice();
        *out_len = x.len();
        *out = Box::into_raw(x).cast();
        Ok(())
    })
}

/// L1 trend filter of `y` with a fixed `lambda`, written to the caller's
/// buffer `x` of the same length.
///
/// # Safety
/// `y` and `x` must each point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ecg_trend_filter(y: *const f64, len: usize, lambda: f64, x: *mut f64) -> EcgStatus {
    guard(|| {
        let y = slice_arg(y, len, "y")?;
        if x.is_null() {
            return Err(null("x"));
        }
        let fit = l1_trend_filter(y, lambda, &TrendOptions::default())?;
        if !fit.converged {
            return Err(Error::NonConvergence {
                iterations: fit.iterations,
            }
            .into());
        }
        std::slice::from_raw_parts_mut(x, len).copy_from_slice(&fit.x);
        Ok(())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ecg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Releases samples returned by `ecg_decode_lead`. Null is ignored.
///
/// # Safety
/// `p` and `len` must be exactly as returned and not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ecg_samples_free(p: *mut f64, len: usize) {
    if !p.is_null() {
        drop(Box::from_raw(ptr::slice_from_raw_parts_mut(p, len)));
    }
}
