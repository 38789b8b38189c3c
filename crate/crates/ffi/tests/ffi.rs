use std::ffi::{c_char, CStr};
use std::path::PathBuf;
use std::ptr;

use plate_stokes_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as c_char; 512];
    let n = unsafe { ps_last_error_message(buf.as_mut_ptr(), buf.len()) };
    if n == 0 {
        return String::new();
    }
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn study_round_trip() {
    let levels = [1u32, 2];
    let mut study = ptr::null_mut();
    let s = unsafe { ps_study_run(levels.as_ptr(), levels.len(), 1.0, 0.0, &mut study) };
    assert_eq!(s, PsStatus::Ok, "{}", last_error());
    assert_eq!(unsafe { ps_study_n_levels(study) }, 2);
    let mut e = PsLevelErrors::default();
    assert_eq!(unsafe { ps_study_level_errors(study, 0, &mut e) }, PsStatus::Ok);
    assert_eq!((e.level, e.plate_elements, e.fluid_elements), (1, 4, 24));
    assert!(e.plate_h2 > 0.0 && e.plate_h2 < 1e-3);
    assert_eq!(unsafe { ps_study_level_errors(study, 2, &mut e) }, PsStatus::OutOfRange);
    assert!(last_error().contains("index 2"));
    let mut r = PsRates::default();
    assert_eq!(unsafe { ps_study_rates(study, 0, &mut r) }, PsStatus::Ok);
    assert_eq!((r.from_level, r.to_level), (1, 2));
    assert!(r.plate_h2 > 1.0);

    let mut needed = 0usize;
    assert_eq!(unsafe { ps_study_csv(study, ptr::null_mut(), 0, &mut needed) }, PsStatus::BufferTooSmall);
    let mut buf = vec![0 as c_char; needed];
    assert_eq!(unsafe { ps_study_csv(study, buf.as_mut_ptr(), buf.len(), &mut needed) }, PsStatus::Ok);
    let csv = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_owned();
    assert_eq!(csv.lines().count(), 1 + 2 + 1);
    unsafe { ps_study_free(study) };
    unsafe { ps_study_free(ptr::null_mut()) };
}

#[test]
fn solution_handles_evaluate_fields() {
    let mut sol = ptr::null_mut();
    assert_eq!(unsafe { ps_solve_level(2, 1.0, 0.0, &mut sol) }, PsStatus::Ok, "{}", last_error());
    let mut w = f64::NAN;
    assert_eq!(unsafe { ps_solution_plate(sol, 0.5, 0.3, &mut w) }, PsStatus::Ok);
    // the exact displacement is odd about x = 1/2
    assert!(w.abs() < 1e-6);
    let mut v = [f64::NAN; 3];
    assert_eq!(unsafe { ps_solution_velocity(sol, 0.3, 0.4, -1.0, v.as_mut_ptr()) }, PsStatus::Ok);
    assert!(v.iter().all(|x| x.abs() < 1e-14));
    let mut p = f64::NAN;
    assert_eq!(unsafe { ps_solution_pressure(sol, 0.3, 0.4, -0.5, &mut p) }, PsStatus::Ok);
    assert!(p.is_finite());
    assert_eq!(unsafe { ps_solution_plate(sol, 2.0, 0.3, &mut w) }, PsStatus::Numerics);
    assert!(last_error().contains("outside"));
    let mut e = PsLevelErrors::default();
    assert_eq!(unsafe { ps_solution_errors(sol, &mut e) }, PsStatus::Ok);
    assert_eq!(e.level, 2);
    unsafe { ps_solution_free(sol) };
}

#[test]
fn invalid_input_and_null_pointers() {
    let mut study = ptr::null_mut();
    let levels = [2u32, 1];
    assert_eq!(unsafe { ps_study_run(levels.as_ptr(), 2, 1.0, 0.0, &mut study) }, PsStatus::InvalidArgument);
    assert!(study.is_null());
    assert!(last_error().contains("increasing"));
    assert_eq!(unsafe { ps_study_run(ptr::null(), 0, 1.0, 0.0, &mut study) }, PsStatus::NullPointer);
    let mut sol = ptr::null_mut();
    assert_eq!(unsafe { ps_solve_level(1, -1.0, 0.0, &mut sol) }, PsStatus::InvalidArgument);
    assert_eq!(unsafe { ps_solve_level(0, 1.0, 0.0, &mut sol) }, PsStatus::InvalidArgument);
    assert_eq!(unsafe { ps_solve_level(1, 1.0, 0.0, ptr::null_mut()) }, PsStatus::NullPointer);
    assert_eq!(unsafe { ps_study_n_levels(ptr::null()) }, 0);
    // a successful call clears the message
    let (mut b, mut x) = (0.0, 0.0);
    assert_eq!(unsafe { ps_infsup(1, &mut b, &mut x) }, PsStatus::Ok);
    assert_eq!(unsafe { ps_last_error_message(ptr::null_mut(), 0) }, 0);
    assert!((x - b * b).abs() < 1e-12 * x);
}

#[test]
fn truncated_error_message_is_terminated() {
    let mut sol = ptr::null_mut();
    assert_ne!(unsafe { ps_solve_level(0, 1.0, 0.0, &mut sol) }, PsStatus::Ok);
    let mut buf = [1 as c_char; 6];
    let full = unsafe { ps_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(full > buf.len());
    assert_eq!(buf[5], 0);
    assert_eq!(unsafe { CStr::from_ptr(buf.as_ptr()) }.to_bytes().len(), 5);
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(ps_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/plate_stokes.h")
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(header()).unwrap();
    for name in [
        "ps_version",
        "ps_last_error_message",
        "ps_study_run",
        "ps_study_free",
        "ps_study_level_errors",
        "ps_study_rates",
        "ps_study_csv",
        "ps_solve_level",
        "ps_solution_free",
        "ps_solution_plate",
        "ps_solution_velocity",
        "ps_solution_pressure",
        "ps_infsup",
        "typedef struct PsStudy PsStudy",
        "PS_STATUS_OK = 0",
    ] {
        assert!(h.contains(name), "{name}");
    }
}

/// Compiles a small C client against the header when a C compiler is present.
#[test]
fn header_compiles_as_c() {
    let dir = std::env::temp_dir().join(format!("plate-stokes-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("client.c");
    std::fs::write(
        &src,
        "#include \"plate_stokes.h\"\n\
         int main(void) {\n\
           PsStudy *s = NULL; unsigned levels[1] = {1};\n\
           PsStatus st = ps_study_run(levels, 1, 1.0, 0.0, &s);\n\
           PsLevelErrors e; if (st == PS_STATUS_OK) ps_study_level_errors(s, 0, &e);\n\
           ps_study_free(s);\n\
           return st == PS_STATUS_OK ? 0 : 1;\n\
         }\n",
    )
    .unwrap();
    let include = header().parent().unwrap().to_path_buf();
    let status = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .status();
    match status {
        Ok(s) => assert!(s.success(), "C compilation of the header failed"),
        Err(_) => {
            eprintln!("no C compiler found, skipping");
            return;
        }
    }
    // link and run against the static library when cargo produced it
    let exe = std::env::current_exe().unwrap();
    let lib = exe.parent().and_then(|d| d.parent()).map(|d| d.join("libplate_stokes_ffi.a"));
    if let Some(lib) = lib.filter(|l| l.exists()) {
        let bin = dir.join("client");
        let ok = std::process::Command::new("cc")
            .args(["-std=c99", "-I"])
            .arg(&include)
            .arg(&src)
            .arg(&lib)
            .args(["-lm", "-lpthread", "-ldl", "-o"])
            .arg(&bin)
            .status()
            .unwrap();
        assert!(ok.success(), "linking the C client failed");
        assert!(std::process::Command::new(&bin).status().unwrap().success());
    } else {
        eprintln!("libplate_stokes_ffi.a not built yet, link step skipped (run `cargo build -p plate-stokes-ffi` first)");
    }
    std::fs::remove_dir_all(dir).unwrap();
}
