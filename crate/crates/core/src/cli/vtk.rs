//! Legacy ASCII VTK unstructured grids and a structural validator.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::mesh::{Mesh2, Mesh3};
use crate::plate::PlateField;
use crate::stokes::{FluidField, PressureField};
use crate::{Error, Result};

pub const VTK_TRIANGLE: u8 = 5;
pub const VTK_TETRA: u8 = 10;

fn vertex_count(cell_type: u8) -> Option<usize> {
    match cell_type {
        1 => Some(1),
        3 => Some(2),
        VTK_TRIANGLE => Some(3),
        9 => Some(4),
        VTK_TETRA => Some(4),
        12 => Some(8),
        _ => None,
    }
}

/// Point data attached to a grid.
pub enum PointData<'a> {
    Scalars(&'a str, Vec<f64>),
    Vectors(&'a str, Vec<[f64; 3]>),
}

/// Assembles the file text. Every cell must use `cell_type`.
pub fn unstructured_grid(
    title: &str,
    points: &[[f64; 3]],
    cells: &[Vec<usize>],
    cell_type: u8,
    data: &[PointData<'_>],
) -> Result<String> {
    let expected = vertex_count(cell_type)
        .ok_or_else(|| Error::InvalidParameter(format!("unsupported VTK cell type {cell_type}")))?;
    if title.contains('\n') {
        return Err(Error::InvalidParameter("VTK title must be a single line".into()));
    }
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", points.len());
    for p in points {
        let _ = writeln!(s, "{:e} {:e} {:e}", p[0], p[1], p[2]);
    }
    let _ = writeln!(s, "CELLS {} {}", cells.len(), cells.len() * (expected + 1));
    for c in cells {
        if c.len() != expected || c.iter().any(|&i| i >= points.len()) {
            return Err(Error::DimensionMismatch(format!("malformed cell {c:?}")));
        }
        let _ = write!(s, "{expected}");
        for i in c {
            let _ = write!(s, " {i}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "CELL_TYPES {}", cells.len());
    for _ in cells {
        let _ = writeln!(s, "{cell_type}");
    }
    if !data.is_empty() {
        let _ = writeln!(s, "POINT_DATA {}", points.len());
    }
    for d in data {
        match d {
            PointData::Scalars(name, v) => {
                check_len(name, v.len(), points.len())?;
                let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
                for x in v {
                    let _ = writeln!(s, "{x:e}");
                }
            }
            PointData::Vectors(name, v) => {
                check_len(name, v.len(), points.len())?;
                let _ = writeln!(s, "VECTORS {name} double");
                for x in v {
                    let _ = writeln!(s, "{:e} {:e} {:e}", x[0], x[1], x[2]);
                }
            }
        }
    }
    Ok(s)
}

fn check_len(name: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::DimensionMismatch(format!("point field {name} has {got} values for {want} points")));
    }
    Ok(())
}

pub fn plate_mesh(mesh: &Mesh2) -> Result<String> {
    let points: Vec<[f64; 3]> = mesh.vertices().iter().map(|p| [p[0], p[1], 0.0]).collect();
    let cells: Vec<Vec<usize>> = mesh.triangles().iter().map(|t| t.to_vec()).collect();
    unstructured_grid(&format!("plate mesh level {}", mesh.level()), &points, &cells, VTK_TRIANGLE, &[])
}

pub fn fluid_mesh(mesh: &Mesh3) -> Result<String> {
    let cells: Vec<Vec<usize>> = mesh.tets().iter().map(|t| t.to_vec()).collect();
    unstructured_grid(&format!("fluid mesh level {}", mesh.level()), mesh.vertices(), &cells, VTK_TETRA, &[])
}

/// Velocity and pressure at the mesh vertices on linear tetrahedra.
pub fn fluid_fields(uh: &FluidField, ph: &PressureField) -> Result<String> {
    let space = uh.space();
    let mesh = space.mesh();
    let nv = mesh.n_vertices();
    let velocity: Vec<[f64; 3]> = (0..nv).map(|v| uh.node_value(v)).collect();
    let cells: Vec<Vec<usize>> = mesh.tets().iter().map(|t| t.to_vec()).collect();
    unstructured_grid(
        &format!("fluid solution level {}", mesh.level()),
        mesh.vertices(),
        &cells,
        VTK_TETRA,
        &[
            PointData::Vectors("velocity", velocity),
            PointData::Scalars("pressure", ph.coeffs().to_vec()),
        ],
    )
}

/// Plate fields sampled on an `n × n` grid of squares, each cut into two triangles.
pub fn plate_sampling(fields: &[(&str, &PlateField)], n: usize) -> Result<String> {
    if n == 0 {
        return Err(Error::InvalidParameter("sampling resolution must be positive".into()));
    }
    let grid = sample_points(n);
    let points: Vec<[f64; 3]> = grid.iter().map(|p| [p[0], p[1], 0.0]).collect();
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut cells = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            cells.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            cells.push(vec![id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let mut data = Vec::with_capacity(fields.len());
    for (name, f) in fields {
        let v = grid.iter().map(|&p| f.evaluate(p).map(|j| j.value)).collect::<Result<Vec<_>>>()?;
        data.push(PointData::Scalars(name, v));
    }
    let level = fields.first().map(|(_, f)| f.space().mesh().level()).unwrap_or(0);
    unstructured_grid(&format!("plate sampling level {level}"), &points, &cells, VTK_TRIANGLE, &data)
}

/// `(n + 1)²` points of the uniform grid on the unit square, `x` fastest.
pub fn sample_points(n: usize) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            out.push([i as f64 / n as f64, j as f64 / n as f64]);
        }
    }
    out
}

/// What the validator found in a file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VtkSummary {
    pub points: usize,
    pub cells: usize,
    /// Cell count per type code.
    pub cell_types: BTreeMap<u8, usize>,
    pub point_fields: Vec<String>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Config(format!("invalid VTK file: {}", msg.into()))
}

/// Checks the legacy unstructured-grid layout: header, point count, cell
/// connectivity against the declared sizes, known cell type codes whose vertex
/// counts match the connectivity, and point data lengths.
pub fn validate(text: &str) -> Result<VtkSummary> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty"))?;
    if !header.starts_with("# vtk DataFile Version") {
        return Err(bad("missing version line"));
    }
    lines.next().ok_or_else(|| bad("missing title"))?;
    if lines.next().map(str::trim) != Some("ASCII") {
        return Err(bad("only ASCII files are supported"));
    }
    if lines.next().map(str::trim) != Some("DATASET UNSTRUCTURED_GRID") {
        return Err(bad("not an unstructured grid"));
    }
    let mut tokens = lines.flat_map(str::split_whitespace).peekable();
    let mut next = |what: &str| tokens.next().ok_or_else(|| bad(format!("truncated before {what}")));

    let count = |tok: &str, what: &str| tok.parse::<usize>().map_err(|_| bad(format!("bad {what} `{tok}`")));
    let number = |tok: &str| tok.parse::<f64>().map_err(|_| bad(format!("bad number `{tok}`")));

    if next("POINTS")? != "POINTS" {
        return Err(bad("expected POINTS"));
    }
    let n_points = count(next("point count")?, "point count")?;
    next("point type")?;
    for _ in 0..3 * n_points {
        number(next("coordinates")?)?;
    }
    if next("CELLS")? != "CELLS" {
        return Err(bad("expected CELLS"));
    }
    let n_cells = count(next("cell count")?, "cell count")?;
    let size = count(next("cell list size")?, "cell list size")?;
    let mut used = 0;
    let mut arity = Vec::with_capacity(n_cells);
    for _ in 0..n_cells {
        let k = count(next("cell")?, "cell size")?;
        used += k + 1;
        for _ in 0..k {
            let i = count(next("cell index")?, "cell index")?;
            if i >= n_points {
                return Err(bad(format!("cell index {i} out of range for {n_points} points")));
            }
        }
        arity.push(k);
    }
    if used != size {
        return Err(bad(format!("cell list size {size} but {used} entries")));
    }
    if next("CELL_TYPES")? != "CELL_TYPES" {
        return Err(bad("expected CELL_TYPES"));
    }
    if count(next("cell type count")?, "cell type count")? != n_cells {
        return Err(bad("CELL_TYPES count differs from CELLS"));
    }
    let mut cell_types = BTreeMap::new();
    for &k in &arity {
        let t: u8 = next("cell type")?.parse().map_err(|_| bad("bad cell type"))?;
        match vertex_count(t) {
            Some(v) if v == k => *cell_types.entry(t).or_insert(0) += 1,
            Some(v) => return Err(bad(format!("cell type {t} needs {v} vertices, cell has {k}"))),
            None => return Err(bad(format!("unknown cell type {t}"))),
        }
    }
    let mut point_fields = Vec::new();
    if let Ok(tok) = next("POINT_DATA") {
        if tok != "POINT_DATA" {
            return Err(bad(format!("unexpected `{tok}`")));
        }
        if count(next("point data count")?, "point data count")? != n_points {
            return Err(bad("POINT_DATA count differs from POINTS"));
        }
        while let Ok(kind) = next("field") {
            let name = next("field name")?.to_string();
            next("field type")?;
            let width = match kind {
                "SCALARS" => {
                    let comps = next("components")?;
                    let comps = if comps == "LOOKUP_TABLE" {
                        next("lookup table")?;
                        1
                    } else {
                        let c = count(comps, "component count")?;
                        if next("LOOKUP_TABLE")? != "LOOKUP_TABLE" {
                            return Err(bad("expected LOOKUP_TABLE"));
                        }
                        next("lookup table")?;
                        c
                    };
                    comps
                }
                "VECTORS" => 3,
                other => return Err(bad(format!("unsupported point data `{other}`"))),
            };
            for _ in 0..width * n_points {
                number(next("field values")?)?;
            }
            point_fields.push(name);
        }
    }
    Ok(VtkSummary {
        points: n_points,
        cells: n_cells,
        cell_types,
        point_fields,
    })
}
