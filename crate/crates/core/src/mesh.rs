//! Structured criss-cross simplicial meshes of the plate square and the fluid cube.
//!
//! Both families live on a "doubled" integer lattice: grid vertices sit at even
//! lattice coordinates and cell/face centers at odd ones. Vertices are numbered
//! lexicographically by lattice index, so runs are bit-reproducible.
//!
//! * [`Mesh2`]: every grid cell of `[0,1]²` is cut through its center into 4
//!   triangles, giving `4 n²` triangles at level `n`.
//! * [`Mesh3`]: every cell of `[0,1]² × [-1,0]` is cut into 24 tetrahedra
//!   (cell center × face center × face edge), giving `24 n³` tetrahedra. The
//!   top face `z = 0` carries exactly the triangulation of [`Mesh2`].

use std::collections::HashMap;

use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

/// Boundary classification of a tetrahedral face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaceTag {
    /// Lies on the plate `z = 0`.
    Omega,
    /// Lies on one of the five rigid walls.
    S,
    Interior,
}

/// Criss-cross triangulation of the unit square.
#[derive(Debug, Clone)]
pub struct Mesh2 {
    level: usize,
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    /// Local edge `k` joins local vertices `k` and `(k + 1) % 3`.
    triangle_edges: Vec<[usize; 3]>,
    edge_triangles: Vec<[usize; 2]>,
    boundary_vertex: Vec<bool>,
    boundary_edge: Vec<bool>,
}

fn checked_count(level: usize, terms: &[(usize, u32)]) -> Result<usize> {
    // sum of a * b^k with overflow detection
    let mut total = 0usize;
    for &(base, exp) in terms {
        let v = base
            .checked_pow(exp)
            .ok_or(Error::MeshTooLarge { level })?;
        total = total.checked_add(v).ok_or(Error::MeshTooLarge { level })?;
    }
    Ok(total)
}

impl Mesh2 {
    /// Builds the level-`n` criss-cross mesh with `4 n²` triangles.
    pub fn new(level: usize) -> Result<Self> {
        if level == 0 {
            return Err(Error::InvalidLevel(0));
        }
        let n = level;
        let nv = checked_count(level, &[(n + 1, 2), (n, 2)])?;
        let side = 2 * n + 1;
        side.checked_mul(side)
            .and_then(|s| s.checked_mul(4))
            .ok_or(Error::MeshTooLarge { level })?;

        let mut lattice = vec![NONE; side * side];
        let mut vertices = Vec::with_capacity(nv);
        let scale = 1.0 / (2 * n) as f64;
        for i in 0..side {
            for j in 0..side {
                if i % 2 == j % 2 {
                    lattice[i * side + j] = vertices.len();
                    vertices.push([i as f64 * scale, j as f64 * scale]);
                }
            }
        }
        let id = |i: usize, j: usize| lattice[i * side + j];

        let mut triangles = Vec::with_capacity(4 * n * n);
        for ci in 0..n {
            for cj in 0..n {
                let (i, j) = (2 * ci, 2 * cj);
                let c00 = id(i, j);
                let c10 = id(i + 2, j);
                let c11 = id(i + 2, j + 2);
                let c01 = id(i, j + 2);
                let m = id(i + 1, j + 1);
                // bottom, right, top, left; all counterclockwise
                triangles.push([c00, c10, m]);
                triangles.push([c10, c11, m]);
                triangles.push([c11, c01, m]);
                triangles.push([c01, c00, m]);
            }
        }

        let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut edge_triangles: Vec<[usize; 2]> = Vec::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut te = [0; 3];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let e = *edge_ids.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_triangles.push([NONE, NONE]);
                    edges.len() - 1
                });
                let slot = &mut edge_triangles[e];
                if slot[0] == NONE {
                    slot[0] = t;
                } else {
                    slot[1] = t;
                }
                te[k] = e;
            }
            triangle_edges.push(te);
        }

        let on_boundary = |p: [f64; 2]| {
            p.iter()
                .any(|&c| c.abs() < 1e-12 || (c - 1.0).abs() < 1e-12)
        };
        let boundary_vertex: Vec<bool> = vertices.iter().map(|&p| on_boundary(p)).collect();
        let boundary_edge: Vec<bool> = edge_triangles.iter().map(|t| t[1] == NONE).collect();

        Ok(Self {
            level,
            vertices,
            triangles,
            edges,
            triangle_edges,
            edge_triangles,
            boundary_vertex,
            boundary_edge,
        })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// Grid spacing `1 / n`.
    pub fn characteristic_length(&self) -> f64 {
        1.0 / self.level as f64
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn triangle_edges(&self) -> &[[usize; 3]] {
        &self.triangle_edges
    }

    /// Triangles adjacent to an edge; the second entry is `None` on the boundary.
    pub fn edge_triangles(&self, edge: usize) -> (usize, Option<usize>) {
        let [a, b] = self.edge_triangles[edge];
        (a, (b != NONE).then_some(b))
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.boundary_edge[e]
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn triangle_coords(&self, t: usize) -> [[f64; 2]; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    /// Signed area (positive for counterclockwise triangles).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_coords(t);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn edge_midpoint(&self, e: usize) -> [f64; 2] {
        let [a, b] = self.edges[e].map(|v| self.vertices[v]);
        [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
    }

    /// Finds a triangle containing `p`, using the structured cell layout.
    pub fn locate(&self, p: [f64; 2]) -> Result<usize> {
        const TOL: f64 = 1e-12;
        let [x, y] = p;
        if !(x >= -TOL && x <= 1.0 + TOL && y >= -TOL && y <= 1.0 + TOL) {
            return Err(Error::PointOutsidePlate { x, y });
        }
        let n = self.level;
        let cell = |c: f64| ((c * n as f64).floor().max(0.0) as usize).min(n - 1);
        let (ci, cj) = (cell(x), cell(y));
        let a = x * n as f64 - ci as f64;
        let b = y * n as f64 - cj as f64;
        let quadrant = if b <= a && b <= 1.0 - a {
            0
        } else if a >= b && a >= 1.0 - b {
            1
        } else if b >= a && b >= 1.0 - a {
            2
        } else {
            3
        };
        Ok(4 * (ci * n + cj) + quadrant)
    }
}

/// Criss-cross tetrahedral mesh of `[0,1]² × [-1,0]`.
#[derive(Debug, Clone)]
pub struct Mesh3 {
    level: usize,
    vertices: Vec<[f64; 3]>,
    tets: Vec<[usize; 4]>,
    faces: Vec<[usize; 3]>,
    face_tags: Vec<FaceTag>,
    edges: Vec<[usize; 2]>,
    /// Local edge order: (0,1) (0,2) (0,3) (1,2) (1,3) (2,3).
    tet_edges: Vec<[usize; 6]>,
}

/// Local vertex pairs of the six tetrahedron edges.
pub const TET_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];

fn tet_volume(p: &[[f64; 3]; 4]) -> f64 {
    let d = |k: usize, c: usize| p[k][c] - p[0][c];
    let det = d(1, 0) * (d(2, 1) * d(3, 2) - d(2, 2) * d(3, 1))
        - d(1, 1) * (d(2, 0) * d(3, 2) - d(2, 2) * d(3, 0))
        + d(1, 2) * (d(2, 0) * d(3, 1) - d(2, 1) * d(3, 0));
    det / 6.0
}

fn triangle_area3(p: [[f64; 3]; 3]) -> f64 {
    let u = [p[1][0] - p[0][0], p[1][1] - p[0][1], p[1][2] - p[0][2]];
    let v = [p[2][0] - p[0][0], p[2][1] - p[0][1], p[2][2] - p[0][2]];
    let c = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    0.5 * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
}

impl Mesh3 {
    /// Builds the level-`n` mesh with `24 n³` tetrahedra.
    pub fn new(level: usize) -> Result<Self> {
        if level == 0 {
            return Err(Error::InvalidLevel(0));
        }
        let n = level;
        // grid vertices + cell centers + face centers
        let nv = checked_count(level, &[(n + 1, 3), (n, 3)])?
            .checked_add(
                3usize
                    .checked_mul(n * n)
                    .and_then(|v| v.checked_mul(n + 1))
                    .ok_or(Error::MeshTooLarge { level })?,
            )
            .ok_or(Error::MeshTooLarge { level })?;
        let side = 2 * n + 1;
        side.checked_pow(3)
            .and_then(|s| s.checked_mul(24))
            .ok_or(Error::MeshTooLarge { level })?;

        let mut lattice = vec![NONE; side * side * side];
        let mut vertices = Vec::with_capacity(nv);
        let scale = 1.0 / (2 * n) as f64;
        for i in 0..side {
            for j in 0..side {
                for k in 0..side {
                    let odd = (i % 2) + (j % 2) + (k % 2);
                    if odd != 1 {
                        lattice[(i * side + j) * side + k] = vertices.len();
                        vertices.push([
                            i as f64 * scale,
                            j as f64 * scale,
                            k as f64 * scale - 1.0,
                        ]);
                    }
                }
            }
        }
        let id = |l: [usize; 3]| lattice[(l[0] * side + l[1]) * side + l[2]];

        let mut tets = Vec::with_capacity(24 * n * n * n);
        for ci in 0..n {
            for cj in 0..n {
                for ck in 0..n {
                    let base = [2 * ci, 2 * cj, 2 * ck];
                    let center = id([base[0] + 1, base[1] + 1, base[2] + 1]);
                    for axis in 0..3 {
                        let (a1, a2) = ((axis + 1) % 3, (axis + 2) % 3);
                        for s in 0..2 {
                            let mut fc = [base[0] + 1, base[1] + 1, base[2] + 1];
                            fc[axis] = base[axis] + 2 * s;
                            let face_center = id(fc);
                            // face corners in cyclic order
                            let corner = |d1: usize, d2: usize| {
                                let mut l = base;
                                l[axis] += 2 * s;
                                l[a1] += 2 * d1;
                                l[a2] += 2 * d2;
                                id(l)
                            };
                            let ring = [corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)];
                            for q in 0..4 {
                                let mut t = [ring[q], ring[(q + 1) % 4], face_center, center];
                                let p = t.map(|v| vertices[v]);
                                if tet_volume(&p) < 0.0 {
                                    t.swap(0, 1);
                                }
                                tets.push(t);
                            }
                        }
                    }
                }
            }
        }

        let mut face_ids: HashMap<[usize; 3], usize> = HashMap::new();
        let mut faces = Vec::new();
        let mut face_count: Vec<u8> = Vec::new();
        let mut edge_ids: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut tet_edges = Vec::with_capacity(tets.len());
        for t in &tets {
            for skip in 0..4 {
                let mut f = [0; 3];
                let mut c = 0;
                for (k, &v) in t.iter().enumerate() {
                    if k != skip {
                        f[c] = v;
                        c += 1;
                    }
                }
                f.sort_unstable();
                let fid = *face_ids.entry(f).or_insert_with(|| {
                    faces.push(f);
                    face_count.push(0);
                    faces.len() - 1
                });
                face_count[fid] += 1;
            }
            let mut te = [0; 6];
            for (k, [a, b]) in TET_EDGES.iter().enumerate() {
                let key = [t[*a].min(t[*b]), t[*a].max(t[*b])];
                te[k] = *edge_ids.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edges.len() - 1
                });
            }
            tet_edges.push(te);
        }
        let face_tags = faces
            .iter()
            .zip(&face_count)
            .map(|(f, &c)| {
                if c == 2 {
                    FaceTag::Interior
                } else if f.iter().all(|&v| vertices[v][2].abs() < 1e-12) {
                    FaceTag::Omega
                } else {
                    FaceTag::S
                }
            })
            .collect();

        Ok(Self {
            level,
            vertices,
            tets,
            faces,
            face_tags,
            edges,
            tet_edges,
        })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn characteristic_length(&self) -> f64 {
        1.0 / self.level as f64
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn face_tags(&self) -> &[FaceTag] {
        &self.face_tags
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn tet_edges(&self) -> &[[usize; 6]] {
        &self.tet_edges
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn tet_coords(&self, t: usize) -> [[f64; 3]; 4] {
        self.tets[t].map(|v| self.vertices[v])
    }

    pub fn tet_volume(&self, t: usize) -> f64 {
        tet_volume(&self.tet_coords(t))
    }

    pub fn face_area(&self, f: usize) -> f64 {
        triangle_area3(self.faces[f].map(|v| self.vertices[v]))
    }

    /// Finds a tetrahedron containing `p`, together with its barycentric coordinates.
    pub fn locate(&self, p: [f64; 3]) -> Result<(usize, [f64; 4])> {
        const TOL: f64 = 1e-12;
        let [x, y, z] = p;
        let inside = (-TOL..=1.0 + TOL).contains(&x)
            && (-TOL..=1.0 + TOL).contains(&y)
            && (-1.0 - TOL..=TOL).contains(&z);
        if !inside {
            return Err(Error::PointOutsideFluid { x, y, z });
        }
        let n = self.level;
        let cell = |c: f64| ((c * n as f64).floor().max(0.0) as usize).min(n - 1);
        let (ci, cj, ck) = (cell(x), cell(y), cell(z + 1.0));
        let first = 24 * ((ci * n + cj) * n + ck);
        let mut best = (first, [0.0; 4], f64::NEG_INFINITY);
        for t in first..first + 24 {
            let bary = barycentric3(&self.tet_coords(t), p);
            let min = bary.iter().cloned().fold(f64::INFINITY, f64::min);
            if min > best.2 {
                best = (t, bary, min);
            }
            if min >= -1e-12 {
                return Ok((t, bary));
            }
        }
        // numerically on a face: take the least-violating candidate
        Ok((best.0, best.1))
    }
}

/// Barycentric coordinates of `p` with respect to a tetrahedron.
pub fn barycentric3(v: &[[f64; 3]; 4], p: [f64; 3]) -> [f64; 4] {
    let vol = tet_volume(v);
    let mut out = [0.0; 4];
    for k in 0..4 {
        let mut w = *v;
        w[k] = p;
        out[k] = tet_volume(&w) / vol;
    }
    out
}

/// Builds square meshes for each level of a strictly increasing sequence.
pub fn refine_square(levels: &[usize]) -> Result<Vec<Mesh2>> {
    check_increasing(levels)?;
    levels.iter().map(|&l| Mesh2::new(l)).collect()
}

/// Builds cube meshes for each level of a strictly increasing sequence.
pub fn refine_cube(levels: &[usize]) -> Result<Vec<Mesh3>> {
    check_increasing(levels)?;
    levels.iter().map(|&l| Mesh3::new(l)).collect()
}

pub(crate) fn check_increasing(levels: &[usize]) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::InvalidParameter("level list is empty".into()));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(format!(
            "levels must be strictly increasing: {levels:?}"
        )));
    }
    Ok(())
}
