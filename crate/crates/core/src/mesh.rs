//! Polytopal meshes of the unit square and the L-shaped domain.
//!
//! A mesh stores, besides the usual vertex/face/cell connectivity, the
//! geometric quantities the schemes need: cell measures and centroids,
//! one cell point `x_K` per cell (not necessarily the centroid), outward
//! unit normals per (cell, face) pair and the orthogonal distances
//! `d_{K,σ} = (x̄_σ - x_K)·n_{K,σ}`.

use std::collections::HashMap;
use std::io::{self, Write};

use thiserror::Error;

/// A point (or vector) of the plane.
pub type Point = [f64; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("subdivision count must be at least 1")]
    ZeroSubdivisions,
    #[error("cell point shift {0} is outside [0, 0.5)")]
    InvalidShift(f64),
    #[error("cell {cell} is not star-shaped with respect to its point (d = {distance:e} on face {face})")]
    NotStarShaped {
        cell: usize,
        face: usize,
        distance: f64,
    },
    #[error("cell {0} has fewer than three vertices or a non-positive area")]
    DegenerateCell(usize),
    #[error("uniform refinement only supports pure triangle or pure quadrilateral meshes")]
    UnsupportedRefinement,
}

/// Which family of cells a mesh is made of.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshKind {
    Triangular,
    Cartesian,
}

/// How the cell point `x_K` is placed inside each cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellPointRule {
    Centroid,
    /// `x_K = x̄_K + shift·(h_x, h_y)` with `h_x, h_y` the bounding-box sides of the cell.
    Shifted(f64),
}

/// Geometry of one face as seen from one of its cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellFace {
    pub face: usize,
    /// Outward unit normal `n_{K,σ}`.
    pub normal: Point,
    /// Orthogonal distance `d_{K,σ}` from the cell point to the face.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    /// Counter-clockwise vertex loop.
    pub vertices: Vec<usize>,
    /// Faces in loop order: face `i` joins `vertices[i]` and `vertices[i + 1]`.
    pub faces: Vec<CellFace>,
    pub area: f64,
    pub centroid: Point,
    pub point: Point,
    pub diameter: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub vertices: [usize; 2],
    pub length: f64,
    pub midpoint: Point,
    /// Owning cells: one for boundary faces, two for interior faces.
    pub cells: Vec<usize>,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.cells.len() == 1
    }
}

/// Regularity measures of a mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshQuality {
    /// Maximal cell diameter.
    pub h: f64,
    /// `max_K diam(K) / ρ_K`.
    pub eta: f64,
    /// `max_K h² / |K|`.
    pub chi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolytopalMesh {
    pub vertices: Vec<Point>,
    pub cells: Vec<Cell>,
    pub faces: Vec<Face>,
    pub boundary_vertex: Vec<bool>,
    /// Indices of the boundary faces, in face order.
    pub boundary_faces: Vec<usize>,
    pub kind: MeshKind,
    pub point_rule: CellPointRule,
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn norm(a: Point) -> f64 {
    dot(a, a).sqrt()
}

impl PolytopalMesh {
    /// Builds a mesh from counter-clockwise cell vertex loops.
    pub fn from_cells(
        vertices: Vec<Point>,
        loops: Vec<Vec<usize>>,
        kind: MeshKind,
        point_rule: CellPointRule,
    ) -> Result<Self, MeshError> {
        if let CellPointRule::Shifted(s) = point_rule {
            if !(0.0..0.5).contains(&s) {
                return Err(MeshError::InvalidShift(s));
            }
        }
        let mut faces: Vec<Face> = Vec::new();
        let mut edge_map: HashMap<(usize, usize), usize> = HashMap::new();
        let mut cells = Vec::with_capacity(loops.len());

        for (k, lp) in loops.into_iter().enumerate() {
            let n = lp.len();
            if n < 3 {
                return Err(MeshError::DegenerateCell(k));
            }
            // Shoelace area and polygon centroid.
            let (mut a2, mut cx, mut cy) = (0.0, 0.0, 0.0);
            for i in 0..n {
                let p = vertices[lp[i]];
                let q = vertices[lp[(i + 1) % n]];
                let cross = p[0] * q[1] - q[0] * p[1];
                a2 += cross;
                cx += (p[0] + q[0]) * cross;
                cy += (p[1] + q[1]) * cross;
            }
            if a2 <= 0.0 {
                return Err(MeshError::DegenerateCell(k));
            }
            let area = 0.5 * a2;
            let centroid = [cx / (3.0 * a2), cy / (3.0 * a2)];

            let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
            let mut diameter: f64 = 0.0;
            for (i, &vi) in lp.iter().enumerate() {
                let p = vertices[vi];
                xmin = xmin.min(p[0]);
                xmax = xmax.max(p[0]);
                ymin = ymin.min(p[1]);
                ymax = ymax.max(p[1]);
                for &vj in &lp[i + 1..] {
                    diameter = diameter.max(norm(sub(p, vertices[vj])));
                }
            }
            let point = match point_rule {
                CellPointRule::Centroid => centroid,
                CellPointRule::Shifted(s) => [
                    centroid[0] + s * (xmax - xmin),
                    centroid[1] + s * (ymax - ymin),
                ],
            };

            let mut cell_faces = Vec::with_capacity(n);
            for i in 0..n {
                let (a, b) = (lp[i], lp[(i + 1) % n]);
                let key = (a.min(b), a.max(b));
                let pa = vertices[a];
                let pb = vertices[b];
                let f = *edge_map.entry(key).or_insert_with(|| {
                    faces.push(Face {
                        vertices: [a, b],
                        length: norm(sub(pb, pa)),
                        midpoint: [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])],
                        cells: Vec::with_capacity(2),
                    });
                    faces.len() - 1
                });
                faces[f].cells.push(k);
                let e = sub(pb, pa);
                let len = norm(e);
                let normal = [e[1] / len, -e[0] / len];
                let distance = dot(sub(faces[f].midpoint, point), normal);
                if distance <= 1e-12 * diameter {
                    return Err(MeshError::NotStarShaped {
                        cell: k,
                        face: f,
                        distance,
                    });
                }
                cell_faces.push(CellFace {
                    face: f,
                    normal,
                    distance,
                });
            }
            cells.push(Cell {
                vertices: lp,
                faces: cell_faces,
                area,
                centroid,
                point,
                diameter,
            });
        }

        let mut boundary_vertex = vec![false; vertices.len()];
        let mut boundary_faces = Vec::new();
        for (f, face) in faces.iter().enumerate() {
            if face.is_boundary() {
                boundary_faces.push(f);
                boundary_vertex[face.vertices[0]] = true;
                boundary_vertex[face.vertices[1]] = true;
            }
        }
        Ok(Self {
            vertices,
            cells,
            faces,
            boundary_vertex,
            boundary_faces,
            kind,
            point_rule,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_simplicial(&self) -> bool {
        self.cells.iter().all(|c| c.vertices.len() == 3)
    }

    /// Maximal cell diameter.
    pub fn h(&self) -> f64 {
        self.cells.iter().map(|c| c.diameter).fold(0.0, f64::max)
    }

    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(|c| c.area).sum()
    }

    pub fn vertex_coords(&self, cell: usize) -> Vec<Point> {
        self.cells[cell]
            .vertices
            .iter()
            .map(|&v| self.vertices[v])
            .collect()
    }

    /// Triangles tiling a cell: the cell itself for triangles, a fan from
    /// the centroid otherwise.
    pub fn cell_triangles(&self, cell: usize) -> Vec<[Point; 3]> {
        let c = &self.cells[cell];
        let pts = self.vertex_coords(cell);
        if pts.len() == 3 {
            return vec![[pts[0], pts[1], pts[2]]];
        }
        let n = pts.len();
        (0..n)
            .map(|i| [c.centroid, pts[i], pts[(i + 1) % n]])
            .collect()
    }

    /// Red refinement of triangles, 1-to-4 split of quadrilaterals.
    pub fn uniform_refine(&self) -> Result<Self, MeshError> {
        let nv = self.vertices.len();
        let nf = self.faces.len();
        let mut vertices = self.vertices.clone();
        vertices.extend(self.faces.iter().map(|f| f.midpoint));
        let mid = |cell: &Cell, i: usize| nv + cell.faces[i].face;

        let mut loops = Vec::with_capacity(4 * self.cells.len());
        match self.kind {
            MeshKind::Triangular if self.is_simplicial() => {
                for c in &self.cells {
                    let [v0, v1, v2] = [c.vertices[0], c.vertices[1], c.vertices[2]];
                    let (m01, m12, m20) = (mid(c, 0), mid(c, 1), mid(c, 2));
                    loops.push(vec![v0, m01, m20]);
                    loops.push(vec![m01, v1, m12]);
                    loops.push(vec![m20, m12, v2]);
                    loops.push(vec![m01, m12, m20]);
                }
            }
            MeshKind::Cartesian if self.cells.iter().all(|c| c.vertices.len() == 4) => {
                for (k, c) in self.cells.iter().enumerate() {
                    vertices.push(c.centroid);
                    let ctr = nv + nf + k;
                    let v = &c.vertices;
                    let (m01, m12, m23, m30) = (mid(c, 0), mid(c, 1), mid(c, 2), mid(c, 3));
                    loops.push(vec![v[0], m01, ctr, m30]);
                    loops.push(vec![m01, v[1], m12, ctr]);
                    loops.push(vec![ctr, m12, v[2], m23]);
                    loops.push(vec![m30, ctr, m23, v[3]]);
                }
            }
            _ => return Err(MeshError::UnsupportedRefinement),
        }
        Self::from_cells(vertices, loops, self.kind, self.point_rule)
    }

    /// Refines `times` times.
    pub fn refined(&self, times: usize) -> Result<Self, MeshError> {
        let mut mesh = self.clone();
        for _ in 0..times {
            mesh = mesh.uniform_refine()?;
        }
        Ok(mesh)
    }

    /// `ρ_K` is taken as the distance from the centroid to the nearest face line.
    pub fn quality(&self) -> MeshQuality {
        let h = self.h();
        let mut eta: f64 = 0.0;
        let mut chi: f64 = 0.0;
        for c in &self.cells {
            let rho = c
                .faces
                .iter()
                .map(|cf| dot(sub(self.faces[cf.face].midpoint, c.centroid), cf.normal))
                .fold(f64::INFINITY, f64::min);
            eta = eta.max(c.diameter / rho);
            chi = chi.max(h * h / c.area);
        }
        MeshQuality { h, eta, chi }
    }

    /// Plain-text dump for debugging: header `vertices cells faces`, then
    /// coordinates, cell vertex loops and face records
    /// (`v0 v1 owner [owner]`).
    pub fn write_dump<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "{} {} {}",
            self.vertices.len(),
            self.cells.len(),
            self.faces.len()
        )?;
        for v in &self.vertices {
            writeln!(w, "{:.17e} {:.17e}", v[0], v[1])?;
        }
        for c in &self.cells {
            let s: Vec<String> = c.vertices.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", s.join(" "))?;
        }
        for f in &self.faces {
            let owners: Vec<String> = f.cells.iter().map(|v| v.to_string()).collect();
            writeln!(
                w,
                "{} {} {}",
                f.vertices[0],
                f.vertices[1],
                owners.join(" ")
            )?;
        }
        Ok(())
    }
}

fn grid_vertices(m: usize, origin: Point) -> Vec<Point> {
    let step = 1.0 / m as f64;
    let mut v = Vec::with_capacity((m + 1) * (m + 1));
    for j in 0..=m {
        for i in 0..=m {
            v.push([origin[0] + i as f64 * step, origin[1] + j as f64 * step]);
        }
    }
    v
}

fn square_triangles(m: usize, offset: usize) -> Vec<Vec<usize>> {
    let id = |i: usize, j: usize| offset + j * (m + 1) + i;
    let mut loops = Vec::with_capacity(2 * m * m);
    for j in 0..m {
        for i in 0..m {
            let (p00, p10, p11, p01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            loops.push(vec![p00, p10, p11]);
            loops.push(vec![p00, p11, p01]);
        }
    }
    loops
}

/// Uniform triangulation of (0,1)² into `2m²` right triangles, all
/// diagonals running from lower-left to upper-right.
pub fn unit_square_triangulation(m: usize) -> Result<PolytopalMesh, MeshError> {
    if m == 0 {
        return Err(MeshError::ZeroSubdivisions);
    }
    PolytopalMesh::from_cells(
        grid_vertices(m, [0.0, 0.0]),
        square_triangles(m, 0),
        MeshKind::Triangular,
        CellPointRule::Centroid,
    )
}

/// Triangulation of (−1,1)² \ ([0,1)×(−1,0]) with `m` subdivisions per unit edge.
pub fn lshape_triangulation(m: usize) -> Result<PolytopalMesh, MeshError> {
    if m == 0 {
        return Err(MeshError::ZeroSubdivisions);
    }
    const TOL: f64 = 1e-12;
    let mut vertices: Vec<Point> = Vec::new();
    let mut lookup: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let mut loops = Vec::new();
    for origin in [[-1.0, -1.0], [-1.0, 0.0], [0.0, 0.0]] {
        let local = grid_vertices(m, origin);
        let mut map = Vec::with_capacity(local.len());
        for p in local {
            let key = ((p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64);
            let bucket = lookup.entry(key).or_default();
            let found = bucket.iter().copied().find(|&i| {
                (vertices[i][0] - p[0]).abs() <= TOL && (vertices[i][1] - p[1]).abs() <= TOL
            });
            let idx = found.unwrap_or_else(|| {
                vertices.push(p);
                bucket.push(vertices.len() - 1);
                vertices.len() - 1
            });
            map.push(idx);
        }
        for lp in square_triangles(m, 0) {
            loops.push(lp.into_iter().map(|i| map[i]).collect());
        }
    }
    PolytopalMesh::from_cells(
        vertices,
        loops,
        MeshKind::Triangular,
        CellPointRule::Centroid,
    )
}

/// `m×m` square cells on (0,1)² with cell points shifted by `shift` times the cell size.
pub fn cartesian_mesh(m: usize, shift: f64) -> Result<PolytopalMesh, MeshError> {
    if m == 0 {
        return Err(MeshError::ZeroSubdivisions);
    }
    let id = |i: usize, j: usize| j * (m + 1) + i;
    let mut loops = Vec::with_capacity(m * m);
    for j in 0..m {
        for i in 0..m {
            loops.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let rule = if shift == 0.0 {
        CellPointRule::Centroid
    } else {
        CellPointRule::Shifted(shift)
    };
    PolytopalMesh::from_cells(
        grid_vertices(m, [0.0, 0.0]),
        loops,
        MeshKind::Cartesian,
        rule,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_invariants(mesh: &PolytopalMesh, area: f64) {
        for c in &mesh.cells {
            let mut s = [0.0, 0.0];
            for cf in &c.faces {
                let l = mesh.faces[cf.face].length;
                s[0] += l * cf.normal[0];
                s[1] += l * cf.normal[1];
                assert!(cf.distance > 0.0);
            }
            assert!(s[0].abs() < 1e-12 && s[1].abs() < 1e-12);
        }
        assert!((mesh.total_area() - area).abs() <= 1e-12 * area);
        for (f, face) in mesh.faces.iter().enumerate() {
            assert!(face.cells.len() == 1 || face.cells.len() == 2);
            if face.cells.len() == 2 {
                let n = |k: usize| {
                    mesh.cells[k]
                        .faces
                        .iter()
                        .find(|cf| cf.face == f)
                        .unwrap()
                        .normal
                };
                let (a, b) = (n(face.cells[0]), n(face.cells[1]));
                assert!((a[0] + b[0]).abs() < 1e-14 && (a[1] + b[1]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn smallest_square() {
        let m = unit_square_triangulation(1).unwrap();
        assert_eq!((m.n_cells(), m.n_vertices(), m.n_faces()), (2, 4, 5));
        assert!((m.h() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(m.boundary_faces.len(), 4);
    }

    #[test]
    fn square_invariants() {
        let m2 = unit_square_triangulation(2).unwrap();
        assert_eq!(m2.n_cells(), 8);
        check_invariants(&m2, 1.0);
        check_invariants(&unit_square_triangulation(4).unwrap(), 1.0);
    }

    #[test]
    fn zero_subdivisions_rejected() {
        assert_eq!(
            unit_square_triangulation(0),
            Err(MeshError::ZeroSubdivisions)
        );
        assert_eq!(lshape_triangulation(0), Err(MeshError::ZeroSubdivisions));
        assert_eq!(cartesian_mesh(0, 0.0), Err(MeshError::ZeroSubdivisions));
    }

    #[test]
    fn lshape_area_and_corner() {
        let m = lshape_triangulation(1).unwrap();
        check_invariants(&m, 3.0);
        assert!(m.vertices.iter().any(|v| v[0] == 0.0 && v[1] == 0.0));
        assert_eq!(m.n_cells(), 6);
        assert_eq!(m.n_vertices(), 8);
    }

    #[test]
    fn lshape_generator_matches_refiner() {
        let sort = |mut v: Vec<Point>| {
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v
        };
        let direct = lshape_triangulation(2).unwrap();
        let refined = lshape_triangulation(1).unwrap().uniform_refine().unwrap();
        assert_eq!(direct.n_cells(), refined.n_cells());
        assert_eq!(
            sort(direct.vertices.clone()),
            sort(refined.vertices.clone())
        );
    }

    #[test]
    fn cartesian_shift() {
        let m = cartesian_mesh(2, 0.0).unwrap();
        for c in &m.cells {
            assert_eq!(c.point, c.centroid);
        }
        let m = cartesian_mesh(4, 0.25).unwrap();
        check_invariants(&m, 1.0);
        assert!(cartesian_mesh(2, 0.49).is_ok());
        assert!(cartesian_mesh(2, 0.5).is_err());
        assert!(matches!(
            cartesian_mesh(2, -0.1),
            Err(MeshError::InvalidShift(_))
        ));
    }

    #[test]
    fn refinement_counts_and_h() {
        for mesh in [
            unit_square_triangulation(1).unwrap(),
            lshape_triangulation(1).unwrap(),
            cartesian_mesh(3, 0.3).unwrap(),
        ] {
            let area = mesh.total_area();
            let fine = mesh.uniform_refine().unwrap();
            assert_eq!(fine.n_cells(), 4 * mesh.n_cells());
            assert!((fine.h() - mesh.h() / 2.0).abs() <= 1e-14 * mesh.h());
            check_invariants(&fine, area);
            assert_eq!(fine.point_rule, mesh.point_rule);
        }
    }

    #[test]
    fn refine_rejects_general_polygons() {
        let verts = vec![[0.0, 0.0], [1.0, 0.0], [1.5, 0.5], [1.0, 1.0], [0.0, 1.0]];
        let m = PolytopalMesh::from_cells(
            verts,
            vec![vec![0, 1, 2, 3, 4]],
            MeshKind::Cartesian,
            CellPointRule::Centroid,
        )
        .unwrap();
        assert_eq!(m.uniform_refine(), Err(MeshError::UnsupportedRefinement));
    }

    #[test]
    fn square_cells_eta() {
        let q = cartesian_mesh(4, 0.0).unwrap().quality();
        assert!((q.eta - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!((q.chi - 2.0).abs() < 1e-12);
    }

    #[test]
    fn right_triangle_rho_matches_sampling() {
        let m = PolytopalMesh::from_cells(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![vec![0, 1, 2]],
            MeshKind::Triangular,
            CellPointRule::Centroid,
        )
        .unwrap();
        let c = m.cells[0].centroid;
        // Brute force: march along many rays until leaving the triangle.
        let inside = |p: Point| p[0] >= 0.0 && p[1] >= 0.0 && p[0] + p[1] <= 1.0;
        let mut rho = f64::INFINITY;
        for k in 0..20000 {
            let t = 2.0 * std::f64::consts::PI * k as f64 / 20000.0;
            let (mut lo, mut hi) = (0.0, 2.0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if inside([c[0] + mid * t.cos(), c[1] + mid * t.sin()]) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            rho = rho.min(lo);
        }
        let q = m.quality();
        assert!((m.h() - 2f64.sqrt()).abs() < 1e-15);
        assert!((q.eta - 2f64.sqrt() / rho).abs() < 1e-6 * q.eta);
        assert!(q.eta >= 2.0);
    }

    #[test]
    fn chi_constant_across_levels() {
        let base = unit_square_triangulation(2).unwrap();
        let c0 = base.quality().chi;
        let c2 = base.refined(2).unwrap().quality().chi;
        assert!((c0 - c2).abs() < 1e-9);
    }

    #[test]
    fn dump_header() {
        let m = unit_square_triangulation(1).unwrap();
        let mut buf = Vec::new();
        m.write_dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("4 2 5"));
    }
}
