//! C ABI over the rule toolchain.
//!
//! Rules and vocabularies are opaque handles created and destroyed through
//! this interface; strings returned to the caller are owned by the caller
//! and must be released with [`rf_string_free`]. Every fallible call
//! returns an [`RfStatus`]; on failure [`rf_last_error_message`] yields a
//! human-readable description for the current thread.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ruleforge::chain;
use ruleforge::parse::parse_rule;
use ruleforge::rule::{Polarity, Rule};
use ruleforge::validate::run_all_checks;
use ruleforge::verbalize::verbalize_rule;
use ruleforge::vocab::Vocabulary;

/// Status code returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RfStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    ChainError = 4,
    Panic = 5,
}

/// An owned rule handle.
pub struct RfRule {
    inner: Rule,
}

/// An owned vocabulary handle.
pub struct RfVocabulary {
    inner: Vocabulary,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<Vec<u8>>) {
    let text =
        CString::new(message).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| slot.replace(Some(text)));
}

fn guard<F: FnOnce() -> RfStatus>(body: F) -> RfStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            RfStatus::Panic
        }
    }
}

fn to_c_string(text: String) -> *mut c_char {
    CString::new(text)
        .map(CString::into_raw)
        .unwrap_or(ptr::null_mut())
}

unsafe fn read_str<'a>(text: *const c_char) -> Result<&'a str, RfStatus> {
    if text.is_null() {
        set_error("null string argument");
        return Err(RfStatus::NullArgument);
    }
    CStr::from_ptr(text).to_str().map_err(|_| {
        set_error("string is not valid UTF-8");
        RfStatus::InvalidUtf8
    })
}

/// Most recent error on this thread, or NULL. Free with `rf_string_free`.
#[no_mangle]
pub extern "C" fn rf_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map(|text| text.clone().into_raw())
            .unwrap_or(ptr::null_mut())
    })
}

/// Frees a string returned by this library. NULL is accepted.
///
/// # Safety
/// `text` must have been returned by a `ruleforge` call and not freed yet.
#[no_mangle]
pub unsafe extern "C" fn rf_string_free(text: *mut c_char) {
    if !text.is_null() {
        drop(CString::from_raw(text));
    }
}

/// Creates the default vocabulary (32 abstract objects, 18 properties).
#[no_mangle]
pub extern "C" fn rf_vocabulary_default() -> *mut RfVocabulary {
    Box::into_raw(Box::new(RfVocabulary {
        inner: Vocabulary::default(),
    }))
}

/// Frees a vocabulary handle. NULL is accepted.
///
/// # Safety
/// `vocab` must come from `rf_vocabulary_default` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn rf_vocabulary_free(vocab: *mut RfVocabulary) {
    if !vocab.is_null() {
        drop(Box::from_raw(vocab));
    }
}

/// Parses one `Conclusion:- Premise` rule into a new handle.
///
/// # Safety
/// `text` must be a valid NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rf_rule_parse(text: *const c_char, out: *mut *mut RfRule) -> RfStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return RfStatus::NullArgument;
        }
        let source = match read_str(text) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match parse_rule(source) {
            Ok(rule) => {
                *out = Box::into_raw(Box::new(RfRule { inner: rule }));
                RfStatus::Ok
            }
            Err(err) => {
                set_error(err.to_string());
                RfStatus::ParseError
            }
        }
    })
}

/// Frees a rule handle. NULL is accepted.
///
/// # Safety
/// `rule` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn rf_rule_free(rule: *mut RfRule) {
    if !rule.is_null() {
        drop(Box::from_raw(rule));
    }
}

/// Writes the canonical serialization of a rule.
///
/// # Safety
/// `rule` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rf_rule_serialize(rule: *const RfRule, out: *mut *mut c_char) -> RfStatus {
    guard(|| {
        let (Some(rule), false) = (rule.as_ref(), out.is_null()) else {
            set_error("null argument");
            return RfStatus::NullArgument;
        };
        *out = to_c_string(rule.inner.canonical());
        RfStatus::Ok
    })
}

/// Writes the `If ..., then ...` verbalization of a rule.
///
/// # Safety
/// `rule` and `vocab` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rf_rule_verbalize(
    rule: *const RfRule,
    vocab: *const RfVocabulary,
    out: *mut *mut c_char,
) -> RfStatus {
    guard(|| {
        let (Some(rule), Some(vocab), false) = (rule.as_ref(), vocab.as_ref(), out.is_null())
        else {
            set_error("null argument");
            return RfStatus::NullArgument;
        };
        *out = to_c_string(verbalize_rule(&rule.inner, &vocab.inner));
        RfStatus::Ok
    })
}

/// Creates a copy of the rule with its conclusion negation toggled.
///
/// # Safety
/// `rule` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rf_rule_negate_conclusion(
    rule: *const RfRule,
    out: *mut *mut RfRule,
) -> RfStatus {
    guard(|| {
        let (Some(rule), false) = (rule.as_ref(), out.is_null()) else {
            set_error("null argument");
            return RfStatus::NullArgument;
        };
        *out = Box::into_raw(Box::new(RfRule {
            inner: rule.inner.negate_conclusion(),
        }));
        RfStatus::Ok
    })
}

/// Number of premise facts; 0 when the handle is NULL.
///
/// # Safety
/// `rule` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn rf_rule_length(rule: *const RfRule) -> u32 {
    rule.as_ref().map(|r| r.inner.length() as u32).unwrap_or(0)
}

/// Compositional depth; 0 when the handle is NULL.
///
/// # Safety
/// `rule` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn rf_rule_depth(rule: *const RfRule) -> u32 {
    rule.as_ref().map(|r| r.inner.depth() as u32).unwrap_or(0)
}

/// 1 when the conclusion is negated, 0 when positive, -1 on NULL.
///
/// # Safety
/// `rule` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn rf_rule_is_negative(rule: *const RfRule) -> i32 {
    match rule.as_ref() {
        Some(r) => (r.inner.polarity() == Polarity::Negative) as i32,
        None => -1,
    }
}

/// Writes a JSON array of the three validity reports, e.g.
/// `[{"check":"grammar","reasons":[]}, ...]`.
///
/// # Safety
/// `rule` and `vocab` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rf_rule_validity_json(
    rule: *const RfRule,
    vocab: *const RfVocabulary,
    out: *mut *mut c_char,
) -> RfStatus {
    guard(|| {
        let (Some(rule), Some(vocab), false) = (rule.as_ref(), vocab.as_ref(), out.is_null())
        else {
            set_error("null argument");
            return RfStatus::NullArgument;
        };
        let reports = run_all_checks(&rule.inner, &vocab.inner);
        let json = serde_json::to_string(&reports).expect("reports serialize");
        *out = to_c_string(json);
        RfStatus::Ok
    })
}

/// One backward-chaining step: replaces `host` premise fact `fact_index`
/// with the premise of `sub`.
///
/// # Safety
/// `host` and `sub` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rf_backward_chain(
    host: *const RfRule,
    fact_index: u32,
    sub: *const RfRule,
    out: *mut *mut RfRule,
) -> RfStatus {
    guard(|| {
        let (Some(host), Some(sub), false) = (host.as_ref(), sub.as_ref(), out.is_null()) else {
            set_error("null argument");
            return RfStatus::NullArgument;
        };
        match chain::backward_chain(&host.inner, fact_index as usize, &sub.inner) {
            Ok(result) => {
                *out = Box::into_raw(Box::new(RfRule { inner: result }));
                RfStatus::Ok
            }
            Err(err) => {
                set_error(err.to_string());
                RfStatus::ChainError
            }
        }
    })
}

/// One forward-chaining step: swaps the conclusion of `host` for the
/// conclusion of the single-fact rule `sub`.
///
/// # Safety
/// `host` and `sub` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rf_forward_chain(
    host: *const RfRule,
    sub: *const RfRule,
    out: *mut *mut RfRule,
) -> RfStatus {
    guard(|| {
        let (Some(host), Some(sub), false) = (host.as_ref(), sub.as_ref(), out.is_null()) else {
            set_error("null argument");
            return RfStatus::NullArgument;
        };
        match chain::forward_chain(&host.inner, &sub.inner) {
            Ok(result) => {
                *out = Box::into_raw(Box::new(RfRule { inner: result }));
                RfStatus::Ok
            }
            Err(err) => {
                set_error(err.to_string());
                RfStatus::ChainError
            }
        }
    })
}
