//! Per-level error records, observed rates, CSV and aligned-text tables.

use std::fmt::Write as _;

use super::norms::{FluidErrors, H2Seminorm, PlateErrors};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct LevelRecord {
    pub level: usize,
    pub fluid_level: usize,
    pub plate_elements: usize,
    pub fluid_elements: usize,
    pub char_length: f64,
    pub plate: PlateErrors,
    pub fluid: FluidErrors,
    /// `|λ‖x_h‖² + ‖∇u_h‖² − (x*, x_h)|`.
    pub energy_residual: f64,
    /// `λ‖x_h‖²`.
    pub energy_scale: f64,
    pub c_tilde: f64,
    /// `|∫w₁h| / |w₁h|_{H²}`.
    pub constraint_defect: f64,
    /// Max nodal mismatch between `u_h` and `[0, 0, w₂h]` on the plate.
    pub trace_defect: f64,
}

impl LevelRecord {
    pub fn relative_energy_residual(&self) -> f64 {
        self.energy_residual / self.energy_scale.max(f64::MIN_POSITIVE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub from: usize,
    pub to: usize,
    pub plate_h2: f64,
    pub plate_h1: f64,
    pub plate_l2: f64,
    pub fluid_l2: f64,
    pub fluid_h1: f64,
    pub pressure_l2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub case: String,
    pub lambda: f64,
    pub rho: f64,
    pub h2_seminorm: H2Seminorm,
    pub records: Vec<LevelRecord>,
}

/// `log(e_i / e_{i+1}) / log(h_i / h_{i+1})`; for halved mesh sizes the
/// denominator is `log 2`.
pub fn observed_rate(e0: f64, e1: f64, h0: f64, h1: f64) -> f64 {
    (e0 / e1).ln() / (h0 / h1).ln()
}

impl ConvergenceReport {
    pub fn rates(&self) -> Vec<RateRow> {
        self.records
            .windows(2)
            .map(|w| {
                let (a, b) = (&w[0], &w[1]);
                let r = |x: f64, y: f64| observed_rate(x, y, a.char_length, b.char_length);
                RateRow {
                    from: a.level,
                    to: b.level,
                    plate_h2: r(a.plate.h2, b.plate.h2),
                    plate_h1: r(a.plate.h1, b.plate.h1),
                    plate_l2: r(a.plate.l2, b.plate.l2),
                    fluid_l2: r(a.fluid.l2, b.fluid.l2),
                    fluid_h1: r(a.fluid.h1, b.fluid.h1),
                    pressure_l2: r(a.fluid.pressure_l2, b.fluid.pressure_l2),
                }
            })
            .collect()
    }

    /// One row per level, then one row per consecutive level pair.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "kind",
            "level",
            "to_level",
            "fluid_level",
            "plate_elements",
            "fluid_elements",
            "char_length",
            "plate_h2",
            "plate_h1",
            "plate_l2",
            "fluid_l2",
            "fluid_h1",
            "pressure_l2",
            "energy_residual",
            "energy_scale",
            "c_tilde",
            "h2_seminorm",
        ])
        .map_err(csv_error)?;
        let e = |v: f64| format!("{v:.6e}");
        for r in &self.records {
            w.write_record([
                "error".to_string(),
                r.level.to_string(),
                String::new(),
                r.fluid_level.to_string(),
                r.plate_elements.to_string(),
                r.fluid_elements.to_string(),
                e(r.char_length),
                e(r.plate.h2),
                e(r.plate.h1),
                e(r.plate.l2),
                e(r.fluid.l2),
                e(r.fluid.h1),
                e(r.fluid.pressure_l2),
                e(r.energy_residual),
                e(r.energy_scale),
                e(r.c_tilde),
                self.h2_seminorm.name().to_string(),
            ])
            .map_err(csv_error)?;
        }
        let f = |v: f64| format!("{v:.4}");
        for r in self.rates() {
            w.write_record([
                "rate".to_string(),
                r.from.to_string(),
                r.to.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                f(r.plate_h2),
                f(r.plate_h1),
                f(r.plate_l2),
                f(r.fluid_l2),
                f(r.fluid_h1),
                f(r.pressure_l2),
                String::new(),
                String::new(),
                String::new(),
                self.h2_seminorm.name().to_string(),
            ])
            .map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(|e| crate::Error::Config(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| crate::Error::Config(e.to_string()))
    }

    /// Plate errors and rates laid out like the structure tables.
    pub fn plate_tables(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>10} {:>8} {:>12} {:>12} {:>12}",
            "elements", "h", "|e|_H2", "|e|_H1", "||e||_L2"
        );
        for r in &self.records {
            let _ = writeln!(
                s,
                "{:>10} {:>8.4} {:>12.3e} {:>12.3e} {:>12.3e}",
                r.plate_elements, r.char_length, r.plate.h2, r.plate.h1, r.plate.l2
            );
        }
        let _ = writeln!(s, "\n{:>10} {:>8} {:>8} {:>8}", "meshes", "H2", "H1", "L2");
        for r in self.rates() {
            let _ = writeln!(
                s,
                "{:>10} {:>8.2} {:>8.2} {:>8.2}",
                format!("{}/{}", r.from, r.to),
                r.plate_h2,
                r.plate_h1,
                r.plate_l2
            );
        }
        s
    }

    /// Fluid errors and rates laid out like the fluid tables.
    pub fn fluid_tables(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>10} {:>8} {:>12} {:>12} {:>12}",
            "elements", "h", "||e_u||_L2", "|e_u|_H1", "||e_p||_L2"
        );
        for r in &self.records {
            let _ = writeln!(
                s,
                "{:>10} {:>8.4} {:>12.3e} {:>12.3e} {:>12.3e}",
                r.fluid_elements, r.char_length, r.fluid.l2, r.fluid.h1, r.fluid.pressure_l2
            );
        }
        let _ = writeln!(s, "\n{:>10} {:>8} {:>8} {:>8}", "meshes", "L2(u)", "H1(u)", "L2(p)");
        for r in self.rates() {
            let _ = writeln!(
                s,
                "{:>10} {:>8.2} {:>8.2} {:>8.2}",
                format!("{}/{}", r.from, r.to),
                r.fluid_l2,
                r.fluid_h1,
                r.pressure_l2
            );
        }
        s
    }
}

fn csv_error(e: csv::Error) -> crate::Error {
    crate::Error::Config(format!("csv: {e}"))
}
