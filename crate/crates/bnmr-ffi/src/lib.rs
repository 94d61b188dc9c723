//! C ABI over the bnmr library: opaque handles for datasets and calibration
//! networks, integer status codes and an audit entry point. Every function
//! is safe to call from C as long as handles and strings obey the stated
//! ownership rules:
//!
//! * handles returned by `*_new`/`*_load`/`*_learn` functions are owned by
//!   the caller and released with the matching `*_free`,
//! * strings returned through `char **` out-parameters are owned by the
//!   caller and released with `bnmr_string_free`,
//! * the pointer returned by `bnmr_last_error_message` is borrowed and only
//!   valid until the next failing call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use bnmr::bayesnet::BayesianNetwork;
use bnmr::data::Dataset;
use bnmr::{cli, data, fairmetrics, trainer, Error};

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnmrStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8 or contained interior NULs.
    InvalidString = 2,
    /// File could not be read or written.
    Io = 3,
    /// Input text failed to parse.
    Parse = 4,
    /// Inputs were structurally invalid (shape, config or data errors).
    Invalid = 5,
    /// The operation panicked; this indicates a bug in the library.
    Internal = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(status: BnmrStatus, message: &str) -> BnmrStatus {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
    status
}

fn status_of(err: &Error) -> BnmrStatus {
    match err {
        Error::Io { .. } => BnmrStatus::Io,
        Error::Parse { .. } => BnmrStatus::Parse,
        _ => BnmrStatus::Invalid,
    }
}

fn from_result<T>(result: Result<T, Error>, out: &mut Option<T>) -> BnmrStatus {
    match result {
        Ok(value) => {
            *out = Some(value);
            BnmrStatus::Ok
        }
        Err(e) => set_error(status_of(&e), &e.to_string()),
    }
}

/// Run a closure, converting panics into `BnmrStatus::Internal` instead of
/// unwinding across the FFI boundary.
fn guarded(f: impl FnOnce() -> BnmrStatus + std::panic::UnwindSafe) -> BnmrStatus {
    match std::panic::catch_unwind(f) {
        Ok(status) => status,
        Err(_) => set_error(BnmrStatus::Internal, "internal panic"),
    }
}

unsafe fn required_str<'a>(ptr: *const c_char) -> Result<&'a str, BnmrStatus> {
    if ptr.is_null() {
        return Err(set_error(BnmrStatus::NullArgument, "null string argument"));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| set_error(BnmrStatus::InvalidString, "string is not valid UTF-8"))
}

fn export_string(text: String, out: *mut *mut c_char) -> BnmrStatus {
    match CString::new(text.replace('\0', " ")) {
        Ok(s) => {
            unsafe { *out = s.into_raw() };
            BnmrStatus::Ok
        }
        Err(_) => set_error(BnmrStatus::Internal, "output contained interior NUL"),
    }
}

/// Opaque dataset handle.
pub struct BnmrDataset {
    inner: Dataset,
}

/// Opaque calibration-network handle.
pub struct BnmrNetwork {
    inner: BayesianNetwork,
}

/// Message describing the most recent failure on this thread, or an empty
/// string. Borrowed; valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bnmr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Free a string returned through a `char **` out-parameter. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn bnmr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Load a dataset from a CSV file produced by `bnmr gen-data`.
#[no_mangle]
pub unsafe extern "C" fn bnmr_dataset_load_csv(
    path: *const c_char,
    out: *mut *mut BnmrDataset,
) -> BnmrStatus {
    guarded(|| {
        if out.is_null() {
            return set_error(BnmrStatus::NullArgument, "null output pointer");
        }
        let path = match required_str(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        let text = match std::fs::read_to_string(Path::new(path)) {
            Ok(t) => t,
            Err(e) => return set_error(BnmrStatus::Io, &format!("{path}: {e}")),
        };
        let mut parsed = None;
        let status = from_result(data::dataset_from_csv(&text), &mut parsed);
        if let Some(dataset) = parsed {
            *out = Box::into_raw(Box::new(BnmrDataset { inner: dataset }));
        }
        status
    })
}

/// Generate a synthetic dataset from a generator spec (same text format as
/// the `bnmr gen-data --spec` file).
#[no_mangle]
pub unsafe extern "C" fn bnmr_dataset_generate(
    spec_text: *const c_char,
    rows: usize,
    seed: u64,
    out: *mut *mut BnmrDataset,
) -> BnmrStatus {
    guarded(|| {
        if out.is_null() {
            return set_error(BnmrStatus::NullArgument, "null output pointer");
        }
        let spec_text = match required_str(spec_text) {
            Ok(t) => t,
            Err(status) => return status,
        };
        let mut generated = None;
        let status = from_result(
            cli::parse_synthetic_spec(spec_text)
                .and_then(|spec| data::generate_synthetic(&spec, rows, seed)),
            &mut generated,
        );
        if let Some(dataset) = generated {
            *out = Box::into_raw(Box::new(BnmrDataset { inner: dataset }));
        }
        status
    })
}

/// Number of rows in the dataset. Returns 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn bnmr_dataset_len(dataset: *const BnmrDataset) -> usize {
    if dataset.is_null() {
        return 0;
    }
    (*dataset).inner.len()
}

/// Release a dataset handle. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn bnmr_dataset_free(dataset: *mut BnmrDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Learn a calibration network (structure, CPTs and an initially uniform
/// prediction node) from a dataset's attribute columns.
#[no_mangle]
pub unsafe extern "C" fn bnmr_network_learn(
    dataset: *const BnmrDataset,
    out: *mut *mut BnmrNetwork,
) -> BnmrStatus {
    guarded(|| {
        if dataset.is_null() || out.is_null() {
            return set_error(BnmrStatus::NullArgument, "null handle argument");
        }
        let mut learned = None;
        let status = from_result(
            trainer::fit_calibration_network(&(*dataset).inner),
            &mut learned,
        );
        if let Some(network) = learned {
            *out = Box::into_raw(Box::new(BnmrNetwork { inner: network }));
        }
        status
    })
}

/// Parse a network from its text serialization.
#[no_mangle]
pub unsafe extern "C" fn bnmr_network_from_text(
    text: *const c_char,
    out: *mut *mut BnmrNetwork,
) -> BnmrStatus {
    guarded(|| {
        if out.is_null() {
            return set_error(BnmrStatus::NullArgument, "null output pointer");
        }
        let text = match required_str(text) {
            Ok(t) => t,
            Err(status) => return status,
        };
        let mut parsed = None;
        let status = from_result(bnmr::bayesnet::from_text(text), &mut parsed);
        if let Some(network) = parsed {
            *out = Box::into_raw(Box::new(BnmrNetwork { inner: network }));
        }
        status
    })
}

/// Serialize a network to its text format. The caller frees `*out` with
/// `bnmr_string_free`.
#[no_mangle]
pub unsafe extern "C" fn bnmr_network_to_text(
    network: *const BnmrNetwork,
    out: *mut *mut c_char,
) -> BnmrStatus {
    guarded(|| {
        if network.is_null() || out.is_null() {
            return set_error(BnmrStatus::NullArgument, "null handle argument");
        }
        export_string(bnmr::bayesnet::to_text(&(*network).inner), out)
    })
}

/// Calibration ratio P(attribute=value | prediction=1) / P(attribute=value).
#[no_mangle]
pub unsafe extern "C" fn bnmr_network_calibrator_z(
    network: *const BnmrNetwork,
    attribute: *const c_char,
    value: u8,
    out: *mut f64,
) -> BnmrStatus {
    guarded(|| {
        if network.is_null() || out.is_null() {
            return set_error(BnmrStatus::NullArgument, "null handle argument");
        }
        let attribute = match required_str(attribute) {
            Ok(a) => a,
            Err(status) => return status,
        };
        let mut z = None;
        let status = from_result(
            bnmr::bayesnet::calibrator_z(&(*network).inner, attribute, value),
            &mut z,
        );
        if let Some(z) = z {
            *out = z;
        }
        status
    })
}

/// Release a network handle. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn bnmr_network_free(network: *mut BnmrNetwork) {
    if !network.is_null() {
        drop(Box::from_raw(network));
    }
}

/// Audit binary predictions against a dataset: accuracy, per-attribute true
/// positive rate disparity and disparate impact gap, plus pairwise phi
/// coefficients, rendered as text. `predictions` holds one 0/1 entry per
/// dataset row. The caller frees `*out` with `bnmr_string_free`.
#[no_mangle]
pub unsafe extern "C" fn bnmr_audit_predictions(
    dataset: *const BnmrDataset,
    predictions: *const u8,
    prediction_count: usize,
    out: *mut *mut c_char,
) -> BnmrStatus {
    guarded(|| {
        if dataset.is_null() || predictions.is_null() || out.is_null() {
            return set_error(BnmrStatus::NullArgument, "null handle argument");
        }
        let dataset = &(*dataset).inner;
        if prediction_count != dataset.len() {
            return set_error(
                BnmrStatus::Invalid,
                &format!(
                    "{prediction_count} predictions for {} dataset rows",
                    dataset.len()
                ),
            );
        }
        let predictions = std::slice::from_raw_parts(predictions, prediction_count);
        if let Some(bad) = predictions.iter().find(|&&p| p > 1) {
            return set_error(BnmrStatus::Invalid, &format!("prediction value {bad} is not 0/1"));
        }
        let mut report = None;
        let status = from_result(build_report(predictions, dataset), &mut report);
        match report {
            Some(report) => export_string(report.to_text(), out),
            None => status,
        }
    })
}

fn build_report(
    predictions: &[u8],
    dataset: &Dataset,
) -> Result<fairmetrics::FairnessReport, Error> {
    let correct = predictions
        .iter()
        .zip(&dataset.labels)
        .filter(|(p, y)| p == y)
        .count();
    Ok(fairmetrics::FairnessReport {
        accuracy: correct as f64 / dataset.len() as f64,
        tprd: fairmetrics::tprd(
            predictions,
            &dataset.labels,
            &dataset.attrs,
            &dataset.attribute_names,
        )?,
        dig: fairmetrics::dig(
            predictions,
            &dataset.labels,
            &dataset.attrs,
            &dataset.attribute_names,
        )?,
        demographic: None,
        phi: Some(fairmetrics::phi_matrix(
            &dataset.attrs,
            &dataset.attribute_names,
        )?),
        notes: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    const SPEC: &str = "target = Y\nnodes = A B\nparents.B = A\ncpt.A = 0.5\ncpt.B = 0.3 0.7\n\
        label.bias = -0.5\nlabel.coefs = 1.2 0.4\nlabel.noise_scale = 1.0\nfeature.dim = 3\n\
        feature.sigma = 0.5\nfeature.shift.A = 1.0 0.0 0.3\nfeature.shift.B = 0.0 1.0 -0.3\n";

    fn last_error() -> String {
        unsafe { CStr::from_ptr(bnmr_last_error_message()) }
            .to_string_lossy()
            .into_owned()
    }

    #[test]
    fn generate_learn_audit_round_trip() {
        unsafe {
            let spec = CString::new(SPEC).unwrap();
            let mut dataset: *mut BnmrDataset = ptr::null_mut();
            assert_eq!(
                bnmr_dataset_generate(spec.as_ptr(), 400, 7, &mut dataset),
                BnmrStatus::Ok,
                "{}",
                last_error()
            );
            assert_eq!(bnmr_dataset_len(dataset), 400);

            let mut network: *mut BnmrNetwork = ptr::null_mut();
            assert_eq!(bnmr_network_learn(dataset, &mut network), BnmrStatus::Ok);
            let mut text: *mut c_char = ptr::null_mut();
            assert_eq!(bnmr_network_to_text(network, &mut text), BnmrStatus::Ok);
            let serialized = CStr::from_ptr(text).to_str().unwrap().to_string();
            assert!(serialized.contains("nodes:"));

            let mut round_trip: *mut BnmrNetwork = ptr::null_mut();
            assert_eq!(
                bnmr_network_from_text(text, &mut round_trip),
                BnmrStatus::Ok,
                "{}",
                last_error()
            );
            bnmr_string_free(text);

            // uniform prediction node straight after learning: ratio is 1
            let attr = CString::new("A").unwrap();
            let mut z = 0.0f64;
            assert_eq!(
                bnmr_network_calibrator_z(round_trip, attr.as_ptr(), 1, &mut z),
                BnmrStatus::Ok
            );
            assert_eq!(z, 1.0);

            let predictions = vec![1u8; 400];
            let mut report: *mut c_char = ptr::null_mut();
            assert_eq!(
                bnmr_audit_predictions(dataset, predictions.as_ptr(), 400, &mut report),
                BnmrStatus::Ok,
                "{}",
                last_error()
            );
            let report_text = CStr::from_ptr(report).to_str().unwrap().to_string();
            assert!(report_text.contains("mean_tprd="));
            bnmr_string_free(report);

            bnmr_network_free(network);
            bnmr_network_free(round_trip);
            bnmr_dataset_free(dataset);
        }
    }

    #[test]
    fn error_paths_set_status_and_message() {
        unsafe {
            let mut dataset: *mut BnmrDataset = ptr::null_mut();
            assert_eq!(
                bnmr_dataset_generate(ptr::null(), 10, 0, &mut dataset),
                BnmrStatus::NullArgument
            );
            let bad = CString::new("not a spec").unwrap();
            assert_eq!(
                bnmr_dataset_generate(bad.as_ptr(), 10, 0, &mut dataset),
                BnmrStatus::Parse
            );
            assert!(last_error().contains("line"));

            let missing = CString::new("/nonexistent/data.csv").unwrap();
            assert_eq!(
                bnmr_dataset_load_csv(missing.as_ptr(), &mut dataset),
                BnmrStatus::Io
            );

            let spec = CString::new(SPEC).unwrap();
            assert_eq!(
                bnmr_dataset_generate(spec.as_ptr(), 50, 1, &mut dataset),
                BnmrStatus::Ok
            );
            let predictions = vec![1u8; 10];
            let mut report: *mut c_char = ptr::null_mut();
            assert_eq!(
                bnmr_audit_predictions(dataset, predictions.as_ptr(), 10, &mut report),
                BnmrStatus::Invalid
            );
            assert!(last_error().contains("10 predictions"));
            bnmr_dataset_free(dataset);

            // frees tolerate null
            bnmr_dataset_free(ptr::null_mut());
            bnmr_network_free(ptr::null_mut());
            bnmr_string_free(ptr::null_mut());
        }
    }
}
