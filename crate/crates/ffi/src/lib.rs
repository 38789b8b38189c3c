//! C ABI over the plate-stokes solver.
//!
//! Every function returns a [`PsStatus`]. On failure a message is kept per
//! thread and can be copied out with [`ps_last_error_message`]. Handles are
//! opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use plate_stokes::cli::error_kind;
use plate_stokes::coupled::CoupledSolution;
use plate_stokes::verification::{
    convergence_study, infsup_record, run_level, ConvergenceReport, LevelRecord, ManufacturedCase, StudyOptions,
};
use plate_stokes::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Solver = 3,
    Numerics = 4,
    Io = 5,
    Panic = 6,
    BufferTooSmall = 7,
    OutOfRange = 8,
}

/// Errors of one level of the manufactured case.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PsLevelErrors {
    pub level: u32,
    pub plate_elements: u64,
    pub fluid_elements: u64,
    pub char_length: f64,
    pub plate_h2: f64,
    pub plate_h1: f64,
    pub plate_l2: f64,
    pub fluid_l2: f64,
    pub fluid_h1: f64,
    pub pressure_l2: f64,
    pub energy_residual: f64,
    pub energy_scale: f64,
}

/// Observed rates between two consecutive levels.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PsRates {
    pub from_level: u32,
    pub to_level: u32,
    pub plate_h2: f64,
    pub plate_h1: f64,
    pub plate_l2: f64,
    pub fluid_l2: f64,
    pub fluid_h1: f64,
    pub pressure_l2: f64,
}

/// Opaque convergence study.
pub struct PsStudy {
    report: ConvergenceReport,
}

/// Opaque discrete solution of one level.
pub struct PsSolution {
    solution: CoupledSolution,
    record: LevelRecord,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: PsStatus, msg: impl Into<String>) -> PsStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> PsStatus {
    let status = match error_kind(&e) {
        "config" => PsStatus::InvalidArgument,
        "io" => PsStatus::Io,
        "solver" => PsStatus::Solver,
        _ => PsStatus::Numerics,
    };
    fail(status, e.to_string())
}

/// Runs `f`, turning errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), PsStatus>) -> PsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PsStatus::Ok,
        Ok(Err(s)) => s,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(PsStatus::Panic, format!("panic: {msg}"))
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), PsStatus> {
    if p.is_null() {
        Err(fail(PsStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

fn level_errors(r: &LevelRecord) -> PsLevelErrors {
    PsLevelErrors {
        level: r.level as u32,
        plate_elements: r.plate_elements as u64,
        fluid_elements: r.fluid_elements as u64,
        char_length: r.char_length,
        plate_h2: r.plate.h2,
        plate_h1: r.plate.h1,
        plate_l2: r.plate.l2,
        fluid_l2: r.fluid.l2,
        fluid_h1: r.fluid.h1,
        pressure_l2: r.fluid.pressure_l2,
        energy_residual: r.energy_residual,
        energy_scale: r.energy_scale,
    }
}

/// Copies `text` with a trailing NUL into `buf`. `needed` (if non-null)
/// receives the required size including the NUL.
///
/// # Safety
/// `buf` must be writable for `len` bytes or null with `len == 0`.
unsafe fn copy_out(text: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> Result<(), PsStatus> {
    let bytes = text.as_bytes();
    if !needed.is_null() {
        *needed = bytes.len() + 1;
    }
    if buf.is_null() || len < bytes.len() + 1 {
        return Err(fail(
            PsStatus::BufferTooSmall,
            format!("buffer of {len} bytes, {} needed", bytes.len() + 1),
        ));
    }
    std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, bytes.len());
    *buf.add(bytes.len()) = 0;
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ps_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copies the calling thread's last error message into `buf`. Returns the
/// message length including the NUL, or 0 when there is no error. The copy
/// is truncated to fit `len`.
///
/// # Safety
/// `buf` must be writable for `len` bytes or null.
#[no_mangle]
pub unsafe extern "C" fn ps_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes_with_nul();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len);
                std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
                *buf.add(n - 1) = 0;
            }
            bytes.len()
        }
    })
}

/// Runs the manufactured convergence study on `n_levels` strictly increasing levels.
///
/// # Safety
/// `levels` must point to `n_levels` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_study_run(
    levels: *const u32,
    n_levels: usize,
    lambda: f64,
    rho: f64,
    out: *mut *mut PsStudy,
) -> PsStatus {
    guard(|| {
        non_null(levels, "levels")?;
        non_null(out, "out")?;
        *out = std::ptr::null_mut();
        let levels: Vec<usize> = std::slice::from_raw_parts(levels, n_levels).iter().map(|&l| l as usize).collect();
        let report = convergence_study(&levels, lambda, rho, &StudyOptions::default()).map_err(from_error)?;
        *out = Box::into_raw(Box::new(PsStudy { report }));
        Ok(())
    })
}

/// # Safety
/// `study` must come from [`ps_study_run`] or be null.
#[no_mangle]
pub unsafe extern "C" fn ps_study_free(study: *mut PsStudy) {
    if !study.is_null() {
        drop(Box::from_raw(study));
    }
}

/// Number of levels in the study, 0 for a null handle.
///
/// # Safety
/// `study` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ps_study_n_levels(study: *const PsStudy) -> usize {
    study.as_ref().map(|s| s.report.records.len()).unwrap_or(0)
}

/// # Safety
/// `study` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_study_level_errors(
    study: *const PsStudy,
    index: usize,
    out: *mut PsLevelErrors,
) -> PsStatus {
    guard(|| {
        non_null(study, "study")?;
        non_null(out, "out")?;
        let records = &(*study).report.records;
        let r = records
            .get(index)
            .ok_or_else(|| fail(PsStatus::OutOfRange, format!("level index {index} of {}", records.len())))?;
        *out = level_errors(r);
        Ok(())
    })
}

/// Rates between levels `index` and `index + 1`.
///
/// # Safety
/// `study` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_study_rates(study: *const PsStudy, index: usize, out: *mut PsRates) -> PsStatus {
    guard(|| {
        non_null(study, "study")?;
        non_null(out, "out")?;
        let rates = (*study).report.rates();
        let r = rates
            .get(index)
            .ok_or_else(|| fail(PsStatus::OutOfRange, format!("rate index {index} of {}", rates.len())))?;
        *out = PsRates {
            from_level: r.from as u32,
            to_level: r.to as u32,
            plate_h2: r.plate_h2,
            plate_h1: r.plate_h1,
            plate_l2: r.plate_l2,
            fluid_l2: r.fluid_l2,
            fluid_h1: r.fluid_h1,
            pressure_l2: r.pressure_l2,
        };
        Ok(())
    })
}

/// Writes the study as CSV. Call with a null `buf` to learn the size.
///
/// # Safety
/// `study` must be a live handle; `buf` writable for `len` bytes or null.
#[no_mangle]
pub unsafe extern "C" fn ps_study_csv(
    study: *const PsStudy,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> PsStatus {
    guard(|| {
        non_null(study, "study")?;
        let csv = (*study).report.to_csv().map_err(from_error)?;
        copy_out(&csv, buf, len, needed)
    })
}

/// Solves the manufactured case at one level.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_solve_level(level: u32, lambda: f64, rho: f64, out: *mut *mut PsSolution) -> PsStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = std::ptr::null_mut();
        if level == 0 {
            return Err(fail(PsStatus::InvalidArgument, "level must be at least 1"));
        }
        let case = ManufacturedCase::new(lambda, rho).map_err(from_error)?;
        let l = level as usize;
        let run = run_level(&case, l, l, &StudyOptions::default()).map_err(from_error)?;
        *out = Box::into_raw(Box::new(PsSolution {
            solution: run.solution,
            record: run.record,
        }));
        Ok(())
    })
}

/// # Safety
/// `solution` must come from [`ps_solve_level`] or be null.
#[no_mangle]
pub unsafe extern "C" fn ps_solution_free(solution: *mut PsSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// # Safety
/// `solution` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_solution_errors(solution: *const PsSolution, out: *mut PsLevelErrors) -> PsStatus {
    guard(|| {
        non_null(solution, "solution")?;
        non_null(out, "out")?;
        *out = level_errors(&(*solution).record);
        Ok(())
    })
}

/// Plate displacement `w₁h(x, y)`.
///
/// # Safety
/// `solution` must be a live handle; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_solution_plate(solution: *const PsSolution, x: f64, y: f64, value: *mut f64) -> PsStatus {
    guard(|| {
        non_null(solution, "solution")?;
        non_null(value, "value")?;
        *value = (*solution).solution.w1h.evaluate([x, y]).map_err(from_error)?.value;
        Ok(())
    })
}

/// Fluid velocity at `(x, y, z)` written to `velocity[0..3]`.
///
/// # Safety
/// `solution` must be a live handle; `velocity` writable for three values.
#[no_mangle]
pub unsafe extern "C" fn ps_solution_velocity(
    solution: *const PsSolution,
    x: f64,
    y: f64,
    z: f64,
    velocity: *mut f64,
) -> PsStatus {
    guard(|| {
        non_null(solution, "solution")?;
        non_null(velocity, "velocity")?;
        let v = (*solution).solution.uh.value([x, y, z]).map_err(from_error)?;
        std::ptr::copy_nonoverlapping(v.as_ptr(), velocity, 3);
        Ok(())
    })
}

/// # Safety
/// `solution` must be a live handle; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_solution_pressure(
    solution: *const PsSolution,
    x: f64,
    y: f64,
    z: f64,
    value: *mut f64,
) -> PsStatus {
    guard(|| {
        non_null(solution, "solution")?;
        non_null(value, "value")?;
        *value = (*solution).solution.ph.value([x, y, z]).map_err(from_error)?;
        Ok(())
    })
}

/// Discrete inf-sup constant `β_h` and `∫ξ_h` at one level.
///
/// # Safety
/// `beta` and `xi_integral` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_infsup(level: u32, beta: *mut f64, xi_integral: *mut f64) -> PsStatus {
    guard(|| {
        non_null(beta, "beta")?;
        non_null(xi_integral, "xi_integral")?;
        let r = infsup_record(level as usize).map_err(from_error)?;
        *beta = r.beta;
        *xi_integral = r.xi_integral;
        Ok(())
    })
}
