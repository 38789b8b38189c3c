use std::path::PathBuf;
use std::process::Command;

use plate_stokes::cli::vtk::{validate, VTK_TETRA, VTK_TRIANGLE};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_plate-stokes"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("plate-stokes-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn converge_writes_error_and_rate_rows() {
    let dir = scratch("converge");
    let status = bin()
        .args(["converge", "--case", "paper-rho0", "--levels", "1,2,4,8", "--lambda", "1.0", "--output-dir"])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let csv = std::fs::read_to_string(dir.join("convergence.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| l.starts_with("error,")).count(), 4);
    assert_eq!(csv.lines().filter(|l| l.starts_with("rate,")).count(), 3);
    let tables = std::fs::read_to_string(dir.join("rates.txt")).unwrap();
    assert!(tables.contains("4/8"));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn identical_configs_give_identical_csv() {
    let a = scratch("det-a");
    let b = scratch("det-b");
    for dir in [&a, &b] {
        let out = bin()
            .args(["converge", "--levels", "1,2", "--export", "csv,field-grid", "--grid-resolution", "6", "--output-dir"])
            .arg(dir)
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    for name in ["convergence.csv", "w1_grid_L1.csv", "w1_grid_L2.csv"] {
        let x = std::fs::read(a.join(name)).unwrap();
        let y = std::fs::read(b.join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    let grid = std::fs::read_to_string(a.join("w1_grid_L2.csv")).unwrap();
    assert_eq!(grid.lines().count(), 1 + 49);
    std::fs::remove_dir_all(a).unwrap();
    std::fs::remove_dir_all(b).unwrap();
}

#[test]
fn solve_exports_valid_vtk() {
    let dir = scratch("solve");
    let out = bin()
        .args(["solve", "--level", "2", "--export", "vtk", "--grid-resolution", "10", "--output-dir"])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fluid = validate(&std::fs::read_to_string(dir.join("fluid_L2.vtk")).unwrap()).unwrap();
    assert_eq!(fluid.cell_types.get(&VTK_TETRA), Some(&192));
    assert_eq!(fluid.point_fields, ["velocity", "pressure"]);
    let plate = validate(&std::fs::read_to_string(dir.join("plate_L2.vtk")).unwrap()).unwrap();
    assert_eq!(plate.cell_types.get(&VTK_TRIANGLE), Some(&200));
    assert_eq!(plate.points, 121);
    assert_eq!(plate.point_fields, ["w1", "w2"]);
    assert!(!dir.join("solve_L2.csv").exists());
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn mesh_dump_and_infsup() {
    let dir = scratch("dump");
    let out = bin().args(["mesh-dump", "--level", "4", "--output-dir"]).arg(&dir).output().unwrap();
    assert!(out.status.success());
    let plate = validate(&std::fs::read_to_string(dir.join("plate_mesh_L4.vtk")).unwrap()).unwrap();
    assert_eq!(plate.cells, 64);
    let fluid = validate(&std::fs::read_to_string(dir.join("fluid_mesh_L4.vtk")).unwrap()).unwrap();
    assert_eq!(fluid.cells, 1536);
    let out = bin().args(["infsup", "--levels", "1,2,4", "--output-dir"]).arg(&dir).output().unwrap();
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.join("infsup.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn failures_exit_nonzero_with_structured_message() {
    let out = bin().args(["converge", "--lambda", "-2"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error[config]"), "{err}");
    assert!(err.contains("lambda"));
    let out = bin().args(["solve", "--level", "16"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--deep"));
    let out = bin().args(["converge", "--levels", "1", "--config", "/nonexistent/run.cfg"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
