//! C ABI for `mtmc-eval`.
//!
//! Scenarios and reports are opaque handles created and released through this
//! interface. Every fallible call returns an [`MtmcStatus`]; on failure the
//! message is available from [`mtmc_last_error`] on the same thread until the
//! next failing call. Strings handed out by the library are released with
//! [`mtmc_string_free`].

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::ptr;

use mtmc_eval::event_measures::MotaMismatches;
use mtmc_eval::report::{evaluate, EvalOptions, ReportDocument};
use mtmc_eval::{Error, OverlapMode, Scenario};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtmcStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Parse = 3,
    Validation = 4,
    Io = 5,
    Undefined = 6,
    Internal = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtmcMode {
    Iou = 0,
    Ground = 1,
}

/// Add per-camera rows to the report.
pub const MTMC_PER_CAMERA: u32 = 1;
/// Add handover diagnostics.
pub const MTMC_DIAGNOSTICS: u32 = 2;
/// Add the truth-to-result mapping.
pub const MTMC_MAPPING: u32 = 4;
/// Count merges as well as fragmentations in MOTA.
pub const MTMC_MOTA_MU: u32 = 8;

/// Opaque scenario handle.
pub struct MtmcScenario(Scenario);

/// Opaque report handle.
pub struct MtmcReport(ReportDocument);

/// Headline numbers of a report. Scores the report did not compute are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MtmcScores {
    pub idp: f64,
    pub idr: f64,
    pub idf1: f64,
    pub idtp: u64,
    pub idfp: u64,
    pub idfn: u64,
    pub mota: f64,
    pub motp: f64,
    pub mcta: f64,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub fragmentations: u64,
    pub merges: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: MtmcStatus, msg: impl Into<String>) -> MtmcStatus {
    set_error(msg);
    status
}

fn from_error(e: &Error) -> MtmcStatus {
    let status = match e {
        Error::Parse { .. } => MtmcStatus::Parse,
        Error::Io { .. } => MtmcStatus::Io,
        Error::UndefinedMeasure(_) => MtmcStatus::Undefined,
        Error::Json(_) => MtmcStatus::Internal,
        _ => MtmcStatus::Validation,
    };
    fail(status, e.to_string())
}

/// # Safety
/// `s` must be null or a valid NUL-terminated string.
unsafe fn path_arg(s: *const c_char, what: &str) -> Result<Option<PathBuf>, MtmcStatus> {
    if s.is_null() {
        return Ok(None);
    }
    match CStr::from_ptr(s).to_str() {
        Ok(v) => Ok(Some(PathBuf::from(v))),
        Err(_) => Err(fail(
            MtmcStatus::InvalidArgument,
            format!("{what} is not valid UTF-8"),
        )),
    }
}

fn guard(f: impl FnOnce() -> MtmcStatus + std::panic::UnwindSafe) -> MtmcStatus {
    std::panic::catch_unwind(f).unwrap_or_else(|_| fail(MtmcStatus::Internal, "internal panic"))
}

/// Message of the last failure on this thread, or null. Owned by the library;
/// valid until the next call that fails.
#[no_mangle]
pub extern "C" fn mtmc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn mtmc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads ground truth and tracker CSVs. `homography_dir` may be null.
/// `delta <= 0` selects the mode's default threshold.
///
/// # Safety
/// Path arguments must be null or NUL-terminated strings; `out` must be a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mtmc_scenario_load(
    gt_path: *const c_char,
    res_path: *const c_char,
    mode: MtmcMode,
    delta: f64,
    homography_dir: *const c_char,
    out: *mut *mut MtmcScenario,
) -> MtmcStatus {
    guard(|| {
        if out.is_null() {
            return fail(MtmcStatus::NullArgument, "out is null");
        }
        *out = ptr::null_mut();
        let (gt, res, hom) = match (
            path_arg(gt_path, "gt_path"),
            path_arg(res_path, "res_path"),
            path_arg(homography_dir, "homography_dir"),
        ) {
            (Ok(Some(g)), Ok(Some(r)), Ok(h)) => (g, r, h),
            (Err(s), _, _) | (_, Err(s), _) | (_, _, Err(s)) => return s,
            _ => {
                return fail(
                    MtmcStatus::NullArgument,
                    "gt_path and res_path are required",
                )
            }
        };
        let mode = match (mode, delta > 0.0) {
            (MtmcMode::Iou, true) => OverlapMode::iou(delta),
            (MtmcMode::Iou, false) => OverlapMode::iou(OverlapMode::DEFAULT_IOU),
            (MtmcMode::Ground, true) => OverlapMode::ground_plane(delta),
            (MtmcMode::Ground, false) => OverlapMode::ground_plane(OverlapMode::DEFAULT_DISTANCE),
        };
        match mtmc_eval::io::load_scenario(&gt, &res, mode, hom.as_deref(), &BTreeMap::new()) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(MtmcScenario(s)));
                MtmcStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// # Safety
/// `scenario` must be null or a handle from [`mtmc_scenario_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mtmc_scenario_free(scenario: *mut MtmcScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs all measures. `flags` is a bitwise OR of the `MTMC_*` options.
///
/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mtmc_evaluate(
    scenario: *const MtmcScenario,
    flags: u32,
    out: *mut *mut MtmcReport,
) -> MtmcStatus {
    guard(|| {
        if scenario.is_null() || out.is_null() {
            return fail(MtmcStatus::NullArgument, "scenario or out is null");
        }
        *out = ptr::null_mut();
        let opts = EvalOptions {
            per_camera: flags & MTMC_PER_CAMERA != 0,
            diagnostics: flags & MTMC_DIAGNOSTICS != 0,
            mapping: flags & MTMC_MAPPING != 0,
            mota_mismatches: if flags & MTMC_MOTA_MU != 0 {
                MotaMismatches::Mu
            } else {
                MotaMismatches::Phi
            },
            ..Default::default()
        };
        match evaluate(&(*scenario).0, &opts) {
            Ok(doc) => {
                *out = Box::into_raw(Box::new(MtmcReport(doc)));
                MtmcStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// # Safety
/// `report` must be null or a handle from [`mtmc_evaluate`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mtmc_report_free(report: *mut MtmcReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Copies the headline scores into `out`.
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mtmc_report_scores(
    report: *const MtmcReport,
    out: *mut MtmcScores,
) -> MtmcStatus {
    if report.is_null() || out.is_null() {
        return fail(MtmcStatus::NullArgument, "report or out is null");
    }
    let doc = &(*report).0;
    let mut s = MtmcScores {
        idp: f64::NAN,
        idr: f64::NAN,
        idf1: f64::NAN,
        idtp: 0,
        idfp: 0,
        idfn: 0,
        mota: f64::NAN,
        motp: f64::NAN,
        mcta: f64::NAN,
        tp: 0,
        fp: 0,
        fn_: 0,
        fragmentations: 0,
        merges: 0,
    };
    if let Some(id) = &doc.id {
        (s.idp, s.idr, s.idf1) = (id.idp.0, id.idr.0, id.idf1.0);
        (s.idtp, s.idfp, s.idfn) = (id.idtp, id.idfp, id.idfn);
    }
    if let Some(c) = &doc.clear {
        s.mota = c.mota.map_or(f64::NAN, |m| m.0);
        s.motp = c.motp.0;
        (s.tp, s.fp, s.fn_) = (c.tp, c.fp, c.fn_);
        s.fragmentations = c.fragmentations.total;
        s.merges = c.merges.total;
    }
    if let Some(m) = &doc.mcta {
        s.mcta = m.mcta.0;
    }
    *out = s;
    MtmcStatus::Ok
}

/// The report as pretty-printed JSON, or null on failure. Release with
/// [`mtmc_string_free`].
///
/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mtmc_report_json(report: *const MtmcReport) -> *mut c_char {
    if report.is_null() {
        fail(MtmcStatus::NullArgument, "report is null");
        return ptr::null_mut();
    }
    match (*report).0.to_json() {
        Ok(s) => CString::new(s).map_or(ptr::null_mut(), CString::into_raw),
        Err(e) => {
            from_error(&e);
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mtmc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
