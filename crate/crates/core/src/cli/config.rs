//! Run configuration: defaults, a flat `key = value` file, then flag overrides.

use std::path::{Path, PathBuf};

use crate::coupled::REDUCED_TOLERANCE;
use crate::quadrature::{MAX_TET_DEGREE, MAX_TRIANGLE_DEGREE};
use crate::stokes::FluidBackend;
use crate::verification::{validate_levels, H2Seminorm, StudyOptions, FLUID_ERROR_DEGREE, PLATE_ERROR_DEGREE};
use crate::{Error, Result};

/// Finest level run without `deep`.
pub const SHALLOW_MAX_LEVEL: usize = 8;
pub const DEEP_LEVEL: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    /// Manufactured solution with `ρ = 0`.
    PaperRho0,
    /// The same solution with `ρ > 0`.
    PaperRho,
}

impl Case {
    pub fn name(self) -> &'static str {
        match self {
            Case::PaperRho0 => "paper-rho0",
            Case::PaperRho => "paper-rho",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExportFlags {
    pub csv: bool,
    pub vtk: bool,
    pub field_grid: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub case: Case,
    pub levels: Vec<usize>,
    pub fluid_levels: Option<Vec<usize>>,
    /// Level for `solve` and `mesh-dump`.
    pub level: usize,
    pub lambda: f64,
    pub rho: f64,
    pub h2_seminorm: H2Seminorm,
    pub plate_error_degree: usize,
    pub plate_error_subdivisions: usize,
    pub fluid_error_degree: usize,
    pub tolerance: f64,
    pub backend: FluidBackend,
    pub output_dir: PathBuf,
    pub export: ExportFlags,
    pub grid_resolution: usize,
    pub deep: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            case: Case::PaperRho0,
            levels: vec![1, 2, 4, 8],
            fluid_levels: None,
            level: 2,
            lambda: 1.0,
            rho: 0.0,
            h2_seminorm: H2Seminorm::Hessian,
            plate_error_degree: PLATE_ERROR_DEGREE,
            plate_error_subdivisions: 1,
            fluid_error_degree: FLUID_ERROR_DEGREE,
            tolerance: REDUCED_TOLERANCE,
            backend: FluidBackend::Auto,
            output_dir: PathBuf::from("out"),
            export: ExportFlags {
                csv: true,
                ..ExportFlags::default()
            },
            grid_resolution: 64,
            deep: false,
        }
    }
}

/// Keys accepted in config files; each is also a `--key` flag.
pub const KEYS: &[&str] = &[
    "case",
    "levels",
    "fluid-levels",
    "level",
    "lambda",
    "rho",
    "h2-seminorm",
    "plate-error-degree",
    "plate-error-subdivisions",
    "fluid-error-degree",
    "tolerance",
    "backend",
    "output-dir",
    "export",
    "grid-resolution",
    "deep",
];

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|_| Error::Config(format!("{key}: `{s}` is not a level"))))
        .collect()
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(Error::Config(format!("{key}: expected true or false, got `{other}`"))),
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "case" => {
                self.case = match v {
                    "paper-rho0" => Case::PaperRho0,
                    "paper-rho" => Case::PaperRho,
                    _ => return Err(Error::Config(format!("case: unknown case `{v}`"))),
                }
            }
            "levels" => self.levels = parse_list(key, v)?,
            "fluid-levels" => self.fluid_levels = if v == "same" { None } else { Some(parse_list(key, v)?) },
            "level" => self.level = parse_num(key, v)?,
            "lambda" => self.lambda = parse_num(key, v)?,
            "rho" => self.rho = parse_num(key, v)?,
            "h2-seminorm" => {
                self.h2_seminorm =
                    H2Seminorm::parse(v).ok_or_else(|| Error::Config(format!("h2-seminorm: unknown `{v}`")))?
            }
            "plate-error-degree" => self.plate_error_degree = parse_num(key, v)?,
            "plate-error-subdivisions" => self.plate_error_subdivisions = parse_num(key, v)?,
            "fluid-error-degree" => self.fluid_error_degree = parse_num(key, v)?,
            "tolerance" => self.tolerance = parse_num(key, v)?,
            "backend" => {
                self.backend = match v {
                    "auto" => FluidBackend::Auto,
                    "direct" => FluidBackend::Direct,
                    "schur-cg" => FluidBackend::SchurCg,
                    _ => return Err(Error::Config(format!("backend: unknown `{v}`"))),
                }
            }
            "output-dir" => self.output_dir = PathBuf::from(v),
            "export" => {
                let mut flags = ExportFlags::default();
                for item in v.split(',').map(str::trim) {
                    match item {
                        "csv" => flags.csv = true,
                        "vtk" => flags.vtk = true,
                        "field-grid" => flags.field_grid = true,
                        "none" => {}
                        _ => return Err(Error::Config(format!("export: unknown format `{item}`"))),
                    }
                }
                self.export = flags;
            }
            "grid-resolution" => self.grid_resolution = parse_num(key, v)?,
            "deep" => self.deep = parse_bool(key, v)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies a flat file: one `key = value` per line, `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(k.trim(), v).map_err(|e| Error::Config(format!("config line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    /// Inverse of [`RunConfig::apply_text`].
    pub fn to_text(&self) -> String {
        let list = |l: &[usize]| l.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        let mut export = Vec::new();
        if self.export.csv {
            export.push("csv");
        }
        if self.export.vtk {
            export.push("vtk");
        }
        if self.export.field_grid {
            export.push("field-grid");
        }
        if export.is_empty() {
            export.push("none");
        }
        let backend = match self.backend {
            FluidBackend::Auto => "auto",
            FluidBackend::Direct => "direct",
            FluidBackend::SchurCg => "schur-cg",
        };
        let entries = [
            ("case", self.case.name().to_string()),
            ("levels", list(&self.levels)),
            ("fluid-levels", self.fluid_levels.as_deref().map(list).unwrap_or_else(|| "same".into())),
            ("level", self.level.to_string()),
            ("lambda", format!("{:?}", self.lambda)),
            ("rho", format!("{:?}", self.rho)),
            ("h2-seminorm", self.h2_seminorm.name().into()),
            ("plate-error-degree", self.plate_error_degree.to_string()),
            ("plate-error-subdivisions", self.plate_error_subdivisions.to_string()),
            ("fluid-error-degree", self.fluid_error_degree.to_string()),
            ("tolerance", format!("{:?}", self.tolerance)),
            ("backend", backend.into()),
            ("output-dir", self.output_dir.display().to_string()),
            ("export", export.join(",")),
            ("grid-resolution", self.grid_resolution.to_string()),
            ("deep", self.deep.to_string()),
        ];
        entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Levels actually run by `converge`: `deep` appends the finest level.
    pub fn effective_levels(&self) -> Vec<usize> {
        let mut levels = self.levels.clone();
        if self.deep && levels.last().is_some_and(|&l| l < DEEP_LEVEL) {
            levels.push(DEEP_LEVEL);
        }
        levels
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.rho >= 0.0) || !self.rho.is_finite() {
            return Err(Error::Config(format!("rho must be nonnegative, got {}", self.rho)));
        }
        match self.case {
            Case::PaperRho0 if self.rho != 0.0 => {
                return Err(Error::Config(format!("case paper-rho0 needs rho = 0, got {}", self.rho)))
            }
            Case::PaperRho if self.rho == 0.0 => return Err(Error::Config("case paper-rho needs rho > 0".into())),
            _ => {}
        }
        validate_levels(&self.levels).map_err(|e| Error::Config(format!("levels: {e}")))?;
        if self.level == 0 {
            return Err(Error::Config("level must be at least 1".into()));
        }
        let levels = self.effective_levels();
        let finest = levels.iter().copied().chain([self.level]).max().unwrap_or(0);
        if finest > SHALLOW_MAX_LEVEL && !self.deep {
            return Err(Error::Config(format!(
                "level {finest} exceeds {SHALLOW_MAX_LEVEL}; pass --deep to run it"
            )));
        }
        if let Some(f) = &self.fluid_levels {
            if f.len() != levels.len() {
                return Err(Error::Config(format!("{} fluid levels for {} plate levels", f.len(), levels.len())));
            }
            if f.contains(&0) {
                return Err(Error::Config("fluid levels must be at least 1".into()));
            }
        }
        if self.plate_error_degree == 0 || self.plate_error_degree > MAX_TRIANGLE_DEGREE {
            return Err(Error::Config(format!(
                "plate-error-degree must lie in 1..={MAX_TRIANGLE_DEGREE}, got {}",
                self.plate_error_degree
            )));
        }
        if self.fluid_error_degree == 0 || self.fluid_error_degree > MAX_TET_DEGREE {
            return Err(Error::Config(format!(
                "fluid-error-degree must lie in 1..={MAX_TET_DEGREE}, got {}",
                self.fluid_error_degree
            )));
        }
        if self.plate_error_subdivisions == 0 {
            return Err(Error::Config("plate-error-subdivisions must be positive".into()));
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::Config(format!("tolerance must lie in (0, 1), got {}", self.tolerance)));
        }
        if self.grid_resolution == 0 {
            return Err(Error::Config("grid-resolution must be positive".into()));
        }
        Ok(())
    }

    pub fn study_options(&self) -> StudyOptions {
        StudyOptions {
            h2_seminorm: self.h2_seminorm,
            fluid_levels: self.fluid_levels.clone(),
            backend: self.backend,
            plate_error_degree: self.plate_error_degree,
            plate_error_subdivisions: self.plate_error_subdivisions,
            fluid_error_degree: self.fluid_error_degree,
            tolerance: self.tolerance,
        }
    }
}
