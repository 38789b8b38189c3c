//! Command-line entry point, run configuration and exporters.

pub mod config;
pub mod vtk;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub use config::{Case, ExportFlags, RunConfig};

use crate::mesh::{Mesh2, Mesh3};
use crate::plate::PlateField;
use crate::verification::{
    convergence_study_with, infsup_orders, infsup_study, run_level, ConvergenceReport, InfSupRecord, LevelRun,
    ManufacturedCase,
};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "plate-stokes", version, about = "Stokes fluid / clamped plate resolvent solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Converge,
    Solve,
    Infsup,
    MeshDump,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Manufactured-solution convergence study over several levels.
    Converge(RunArgs),
    /// One level of the manufactured case, with optional field exports.
    Solve(RunArgs),
    /// Discrete inf-sup constant per level.
    Infsup(RunArgs),
    /// Writes the plate and fluid meshes of one level as VTK.
    MeshDump(RunArgs),
}

impl Command {
    pub fn split(&self) -> (CommandKind, &RunArgs) {
        match self {
            Command::Converge(a) => (CommandKind::Converge, a),
            Command::Solve(a) => (CommandKind::Solve, a),
            Command::Infsup(a) => (CommandKind::Infsup, a),
            Command::MeshDump(a) => (CommandKind::MeshDump, a),
        }
    }
}

/// Every flag mirrors a config file key and overrides it.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Flat `key = value` file read before the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// paper-rho0 or paper-rho
    #[arg(long)]
    pub case: Option<String>,
    /// Comma-separated, strictly increasing.
    #[arg(long)]
    pub levels: Option<String>,
    /// Fluid level per plate level, or `same`.
    #[arg(long)]
    pub fluid_levels: Option<String>,
    #[arg(long)]
    pub level: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<String>,
    /// hessian or laplacian
    #[arg(long)]
    pub h2_seminorm: Option<String>,
    #[arg(long)]
    pub plate_error_degree: Option<String>,
    #[arg(long)]
    pub plate_error_subdivisions: Option<String>,
    #[arg(long)]
    pub fluid_error_degree: Option<String>,
    /// Relative tolerance of the iterative solvers.
    #[arg(long)]
    pub tolerance: Option<String>,
    /// auto, direct or schur-cg
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long)]
    pub output_dir: Option<String>,
    /// Comma-separated subset of csv, vtk, field-grid, or none.
    #[arg(long)]
    pub export: Option<String>,
    /// Intervals per side of the plate sampling grid.
    #[arg(long)]
    pub grid_resolution: Option<String>,
    /// Allow and append level 16.
    #[arg(long)]
    pub deep: bool,
}

impl RunArgs {
    fn overrides(&self) -> Vec<(&'static str, &str)> {
        let pairs = [
            ("case", &self.case),
            ("levels", &self.levels),
            ("fluid-levels", &self.fluid_levels),
            ("level", &self.level),
            ("lambda", &self.lambda),
            ("rho", &self.rho),
            ("h2-seminorm", &self.h2_seminorm),
            ("plate-error-degree", &self.plate_error_degree),
            ("plate-error-subdivisions", &self.plate_error_subdivisions),
            ("fluid-error-degree", &self.fluid_error_degree),
            ("tolerance", &self.tolerance),
            ("backend", &self.backend),
            ("output-dir", &self.output_dir),
            ("export", &self.export),
            ("grid-resolution", &self.grid_resolution),
        ];
        let mut out: Vec<_> = pairs.iter().filter_map(|(k, v)| v.as_deref().map(|v| (*k, v))).collect();
        if self.deep {
            out.push(("deep", "true"));
        }
        out
    }

    /// Defaults, then the config file, then the flags.
    pub fn to_config(&self) -> Result<RunConfig> {
        let mut c = RunConfig::default();
        if let Some(path) = &self.config {
            c.apply_file(path)?;
        }
        for (k, v) in self.overrides() {
            c.set(k, v).map_err(|e| Error::Config(format!("--{e}")))?;
        }
        c.validate()?;
        Ok(c)
    }
}

/// Short category used in error lines and exit codes.
pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::AtLevel { source, .. } => error_kind(source),
        Error::Config(_) | Error::InvalidParameter(_) | Error::InvalidLevel(_) => "config",
        Error::Io(_) => "io",
        Error::Singular { .. } | Error::NotConverged { .. } => "solver",
        _ => "numerics",
    }
}

pub fn exit_code(e: &Error) -> u8 {
    match error_kind(e) {
        "config" => 2,
        "io" => 3,
        _ => 1,
    }
}

/// `error[kind] level=N stage=S: message`.
pub fn format_error(e: &Error) -> String {
    let mut context = String::new();
    let mut inner = e;
    while let Error::AtLevel { level, stage, source } = inner {
        context.push_str(&format!(" level={level} stage=\"{stage}\""));
        inner = source;
    }
    format!("error[{}]{context}: {inner}", error_kind(e))
}

/// Parses `args`, runs the command and reports errors on stderr.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let (kind, args) = cli.command.split();
    let stdout = std::io::stdout();
    let result = args.to_config().and_then(|c| run(kind, &c, &mut stdout.lock()));
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", format_error(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Files written by a run, in order.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    pub report: Option<ConvergenceReport>,
    pub infsup: Vec<InfSupRecord>,
}

pub fn run(kind: CommandKind, config: &RunConfig, out: &mut dyn Write) -> Result<RunOutput> {
    config.validate()?;
    match kind {
        CommandKind::Converge => converge(config, out),
        CommandKind::Solve => solve(config, out),
        CommandKind::Infsup => infsup(config, out),
        CommandKind::MeshDump => mesh_dump(config, out),
    }
}

fn write_file(dir: &Path, name: &str, text: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, text)?;
    files.push(path);
    Ok(())
}

fn export_level(config: &RunConfig, run: &LevelRun, files: &mut Vec<PathBuf>) -> Result<()> {
    let level = run.record.level;
    let sol = &run.solution;
    let dir = &config.output_dir;
    if config.export.vtk {
        let fluid = vtk::fluid_fields(&sol.uh, &sol.ph)?;
        write_file(dir, &format!("fluid_L{level}.vtk"), &fluid, files)?;
        let plate = vtk::plate_sampling(&[("w1", &sol.w1h), ("w2", &sol.w2h)], config.grid_resolution)?;
        write_file(dir, &format!("plate_L{level}.vtk"), &plate, files)?;
    }
    if config.export.field_grid {
        let grid = field_grid_csv(&sol.w1h, config.grid_resolution)?;
        write_file(dir, &format!("w1_grid_L{level}.csv"), &grid, files)?;
    }
    Ok(())
}

/// `x,y,value` of a plate field on the uniform `(n + 1)²` grid.
pub fn field_grid_csv(field: &PlateField, n: usize) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Config(format!("csv: {e}"));
    w.write_record(["x", "y", "value"]).map_err(csv_err)?;
    for p in vtk::sample_points(n.max(1)) {
        let v = field.evaluate(p)?.value;
        w.write_record([format!("{:e}", p[0]), format!("{:e}", p[1]), format!("{v:e}")])
            .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
}

fn level_line(r: &crate::verification::LevelRecord) -> String {
    format!(
        "level {:>2} (fluid {:>2}): energy residual {:.3e} ({:.3e} of λ‖x_h‖²), c̃ {:.3e}, constraint {:.1e}, trace {:.1e}",
        r.level,
        r.fluid_level,
        r.energy_residual,
        r.relative_energy_residual(),
        r.c_tilde,
        r.constraint_defect,
        r.trace_defect
    )
}

fn converge(config: &RunConfig, out: &mut dyn Write) -> Result<RunOutput> {
    let mut files = Vec::new();
    let levels = config.effective_levels();
    let report = convergence_study_with(&levels, config.lambda, config.rho, &config.study_options(), |run| {
        writeln!(out, "{}", level_line(&run.record))?;
        export_level(config, run, &mut files)
    })?;
    let report = ConvergenceReport {
        case: config.case.name().into(),
        ..report
    };
    let tables = format!(
        "case {} λ={} ρ={} H² seminorm: {}\n\nplate\n{}\nfluid\n{}",
        report.case,
        report.lambda,
        report.rho,
        report.h2_seminorm.name(),
        report.plate_tables(),
        report.fluid_tables()
    );
    writeln!(out, "\n{tables}")?;
    if config.export.csv {
        write_file(&config.output_dir, "convergence.csv", &report.to_csv()?, &mut files)?;
        write_file(&config.output_dir, "rates.txt", &tables, &mut files)?;
    }
    Ok(RunOutput {
        files,
        report: Some(report),
        infsup: Vec::new(),
    })
}

fn solve(config: &RunConfig, out: &mut dyn Write) -> Result<RunOutput> {
    let mut files = Vec::new();
    let case = ManufacturedCase::new(config.lambda, config.rho)?;
    let fluid_level = config.fluid_levels.as_ref().and_then(|f| f.first().copied()).unwrap_or(config.level);
    let run = run_level(&case, config.level, fluid_level, &config.study_options())?;
    let r = &run.record;
    writeln!(out, "{}", level_line(r))?;
    writeln!(
        out,
        "plate errors: H² {:.4e}  H¹ {:.4e}  L² {:.4e}\nfluid errors: u L² {:.4e}  u H¹ {:.4e}  p L² {:.4e}",
        r.plate.h2, r.plate.h1, r.plate.l2, r.fluid.l2, r.fluid.h1, r.fluid.pressure_l2
    )?;
    export_level(config, &run, &mut files)?;
    let report = ConvergenceReport {
        case: config.case.name().into(),
        lambda: config.lambda,
        rho: config.rho,
        h2_seminorm: config.h2_seminorm,
        records: vec![run.record.clone()],
    };
    if config.export.csv {
        write_file(&config.output_dir, &format!("solve_L{}.csv", config.level), &report.to_csv()?, &mut files)?;
    }
    Ok(RunOutput {
        files,
        report: Some(report),
        infsup: Vec::new(),
    })
}

fn infsup(config: &RunConfig, out: &mut dyn Write) -> Result<RunOutput> {
    let mut files = Vec::new();
    let levels = config.effective_levels();
    let records = infsup_study(&levels)?;
    let reference = records.last().map(|r| r.beta).unwrap_or(f64::NAN);
    let orders = if records.len() > 2 {
        infsup_orders(&records[..records.len() - 1], reference)
    } else {
        Vec::new()
    };
    writeln!(out, "{:>6} {:>20} {:>20} {:>12} {:>8}", "level", "beta_h", "int xi_h", "identity", "order")?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Config(format!("csv: {e}"));
    w.write_record(["level", "beta", "xi_integral", "identity_defect", "order_vs_finest"]).map_err(csv_err)?;
    for (i, r) in records.iter().enumerate() {
        let order = if i > 0 { orders.get(i - 1).copied() } else { None };
        let order_text = order.map(|o| format!("{o:.2}")).unwrap_or_else(|| "-".into());
        writeln!(
            out,
            "{:>6} {:>20.12e} {:>20.12e} {:>12.2e} {:>8}",
            r.level,
            r.beta,
            r.xi_integral,
            r.identity_defect(),
            order_text
        )?;
        w.write_record([
            r.level.to_string(),
            format!("{:.15e}", r.beta),
            format!("{:.15e}", r.xi_integral),
            format!("{:.3e}", r.identity_defect()),
            order.map(|o| format!("{o:.4}")).unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    if config.export.csv {
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        let text = String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))?;
        write_file(&config.output_dir, "infsup.csv", &text, &mut files)?;
    }
    Ok(RunOutput {
        files,
        report: None,
        infsup: records,
    })
}

fn mesh_dump(config: &RunConfig, out: &mut dyn Write) -> Result<RunOutput> {
    let mut files = Vec::new();
    let level = config.level;
    let m2 = Mesh2::new(level)?;
    let m3 = Mesh3::new(level)?;
    write_file(&config.output_dir, &format!("plate_mesh_L{level}.vtk"), &vtk::plate_mesh(&m2)?, &mut files)?;
    write_file(&config.output_dir, &format!("fluid_mesh_L{level}.vtk"), &vtk::fluid_mesh(&m3)?, &mut files)?;
    writeln!(
        out,
        "level {level}: {} triangles, {} tetrahedra, characteristic length {}",
        m2.n_triangles(),
        m3.n_tets(),
        m2.characteristic_length()
    )?;
    Ok(RunOutput {
        files,
        report: None,
        infsup: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> (CommandKind, RunConfig) {
        let cli = Cli::try_parse_from(std::iter::once("plate-stokes").chain(args.iter().copied())).unwrap();
        let (k, a) = cli.command.split();
        (k, a.to_config().unwrap())
    }

    #[test]
    fn flags_parse_into_config() {
        let (k, c) = parse(&["converge", "--case", "paper-rho0", "--levels", "1,2,4,8", "--lambda", "1.0"]);
        assert_eq!(k, CommandKind::Converge);
        assert_eq!(c.levels, [1, 2, 4, 8]);
        let (k, c) = parse(&["solve", "--level", "2", "--export", "vtk"]);
        assert_eq!(k, CommandKind::Solve);
        assert!(c.export.vtk && !c.export.csv);
        let (_, c) = parse(&["converge", "--deep"]);
        assert_eq!(c.effective_levels(), [1, 2, 4, 8, 16]);
    }

    #[test]
    fn flags_override_file() {
        let dir = std::env::temp_dir().join(format!("plate-stokes-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.cfg");
        std::fs::write(&path, "lambda = 3\nlevels = 1,2\n").unwrap();
        let p = path.to_str().unwrap();
        let (_, c) = parse(&["converge", "--config", p, "--lambda", "2"]);
        assert_eq!((c.lambda, c.levels.as_slice()), (2.0, &[1usize, 2][..]));
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn structured_errors() {
        let e = Error::Singular {
            context: "x".into(),
            pivot: None,
        }
        .at_level(4, "coupled solve");
        let s = format_error(&e);
        assert!(s.starts_with("error[solver] level=4 stage=\"coupled solve\": "), "{s}");
        assert_eq!(exit_code(&e), 1);
        assert_eq!(exit_code(&Error::Config("bad".into())), 2);
        let cli = Cli::try_parse_from(["plate-stokes", "converge", "--lambda", "-1"]).unwrap();
        let err = cli.command.split().1.to_config().unwrap_err();
        assert_eq!(error_kind(&err), "config");
    }
}
