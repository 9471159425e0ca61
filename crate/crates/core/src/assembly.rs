//! Sparse assembly of the discrete bilinear and linear forms, and SPD solves.
//!
//! Every operator lives on the free DOFs of a [`GradientDiscretisation`]:
//! constrained (Dirichlet) rows and columns are dropped, never penalised.
//! Duplicate triplets are summed after a stable sort, so assembled values do
//! not depend on traversal order.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::gd::{Diffusion, GradientDiscretisation, GradientPiece};
use crate::mesh::Point;
use crate::quadrature::{integrate_segment, QuadratureRule, RuleName};

/// Target normwise backward error of every linear solve.
pub const SOLVE_TOLERANCE: f64 = 1e-12;

/// Gauss–Legendre points used on boundary faces for data terms.
const BOUNDARY_LOAD_POINTS: usize = 4;

/// Row-compressed sparse matrix with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

/// Accumulates `(row, col, value)` triplets.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn build(mut self) -> CsrMatrix {
        // Stable: duplicates are summed in insertion order.
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; self.nrows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..self.nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

impl CsrMatrix {
    pub fn identity(n: usize) -> Self {
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            b.push(i, i, 1.0);
        }
        b.build()
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let ncols = rows.first().map_or(0, Vec::len);
        let mut b = TripletBuilder::new(rows.len(), ncols);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    b.push(i, j, v);
                }
            }
        }
        b.build()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `Aᵀ x`.
    pub fn tmatvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            for (j, v) in self.row(i) {
                y[j] += v * xi;
            }
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let mut b = TripletBuilder::new(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                b.push(j, i, v);
            }
        }
        b.build()
    }

    /// `x ↦ α·self + β·other`, same shape.
    pub fn add_scaled(&self, alpha: f64, other: &Self, beta: f64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut b = TripletBuilder::new(self.nrows, self.ncols);
        for (m, s) in [(self, alpha), (other, beta)] {
            for i in 0..m.nrows {
                for (j, v) in m.row(i) {
                    b.push(i, j, s * v);
                }
            }
        }
        b.build()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }

    /// Largest `|a_ij − a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// The same matrix in faer's column-compressed layout.
    pub fn to_faer(&self) -> SparseColMat<usize, f64> {
        let t = self.transpose();
        let symbolic =
            SymbolicSparseColMat::new_checked(self.nrows, self.ncols, t.row_ptr, None, t.col_idx);
        SparseColMat::new(symbolic, t.values)
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn to_col(b: &[f64]) -> Mat<f64> {
    Mat::from_fn(b.len(), 1, |i, _| b[i])
}

fn from_col(m: &Mat<f64>) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, 0)]).collect()
}

enum Factor {
    Llt(Llt<usize, f64>),
    Lu(Lu<usize, f64>),
}

/// A factorised sparse matrix reused across right-hand sides.
///
/// Each solve is followed by up to three steps of iterative refinement and
/// fails with [`Error::Inaccurate`] if the normwise backward error
/// `‖b − Ax‖∞ / (‖A‖∞ ‖x‖∞ + ‖b‖∞)` stays above [`SOLVE_TOLERANCE`].
pub struct SparseSolver {
    matrix: CsrMatrix,
    /// `‖A‖∞`.
    row_norm: f64,
    factor: Factor,
}

impl std::fmt::Debug for SparseSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseSolver")
            .field("n", &self.matrix.nrows)
            .finish()
    }
}

impl SparseSolver {
    /// Cholesky factorisation; fails on matrices that are not SPD.
    pub fn spd(matrix: CsrMatrix) -> Result<Self> {
        check_square(&matrix)?;
        let factor = matrix.to_faer().sp_cholesky(Side::Lower).map_err(|e| {
            Error::Singular(format!(
                "Cholesky failed on {}×{}: {e:?}",
                matrix.nrows, matrix.nrows
            ))
        })?;
        Ok(Self {
            row_norm: row_norm(&matrix),
            matrix,
            factor: Factor::Llt(factor),
        })
    }

    /// LU with partial pivoting, for symmetric indefinite systems.
    pub fn general(matrix: CsrMatrix) -> Result<Self> {
        check_square(&matrix)?;
        let factor = matrix.to_faer().sp_lu().map_err(|e| {
            Error::Singular(format!(
                "LU failed on {}×{}: {e:?}",
                matrix.nrows, matrix.nrows
            ))
        })?;
        Ok(Self {
            row_norm: row_norm(&matrix),
            matrix,
            factor: Factor::Lu(factor),
        })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    fn apply_inverse(&self, b: &[f64]) -> Vec<f64> {
        let mut x = to_col(b);
        match &self.factor {
            Factor::Llt(f) => f.solve_in_place(x.as_mut()),
            Factor::Lu(f) => f.solve_in_place(x.as_mut()),
        }
        from_col(&x)
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(b.len(), self.matrix.nrows);
        let bnorm = max_abs(b);
        if bnorm == 0.0 {
            return Ok(vec![0.0; b.len()]);
        }
        let mut x = self.apply_inverse(b);
        let mut residual = f64::INFINITY;
        for _ in 0..4 {
            let ax = self.matrix.matvec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            residual = max_abs(&r) / (self.row_norm * max_abs(&x) + bnorm);
            if !residual.is_finite() {
                return Err(Error::Singular(format!(
                    "non-finite residual in {}×{} solve",
                    b.len(),
                    b.len()
                )));
            }
            if residual <= SOLVE_TOLERANCE {
                return Ok(x);
            }
            let dx = self.apply_inverse(&r);
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
        }
        Err(Error::Inaccurate { residual })
    }
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn row_norm(m: &CsrMatrix) -> f64 {
    (0..m.nrows)
        .map(|i| m.row(i).map(|(_, v)| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn check_square(m: &CsrMatrix) -> Result<()> {
    if m.nrows != m.ncols {
        return Err(Error::Singular(format!(
            "non-square {}×{} matrix",
            m.nrows, m.ncols
        )));
    }
    Ok(())
}

/// Solves an SPD system to backward error [`SOLVE_TOLERANCE`].
pub fn solve_spd(matrix: &CsrMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    if matrix.nrows == 0 {
        return Ok(Vec::new());
    }
    SparseSolver::spd(matrix.clone())?.solve(rhs)
}

/// Free-DOF indices of a cell's local DOFs.
fn local_free(gd: &GradientDiscretisation, cell: usize) -> Vec<Option<usize>> {
    gd.cells[cell]
        .dofs
        .iter()
        .map(|&d| gd.dofs.free_index(d))
        .collect()
}

fn average_tensor(diffusion: &Diffusion, piece: &GradientPiece) -> [[f64; 2]; 2] {
    match diffusion {
        Diffusion::Identity => [[1.0, 0.0], [0.0, 1.0]],
        Diffusion::Field(_) => {
            let rule = QuadratureRule::new(RuleName::Gauss3);
            let mut m = [[0.0; 2]; 2];
            for (p, w) in rule.on_triangle(&piece.triangle) {
                let a = diffusion.at(p);
                for i in 0..2 {
                    for j in 0..2 {
                        m[i][j] += w * a[i][j] / piece.area;
                    }
                }
            }
            m
        }
    }
}

fn push_gradient_products(
    b: &mut TripletBuilder,
    free: &[Option<usize>],
    piece: &GradientPiece,
    tensor: [[f64; 2]; 2],
    scale: f64,
) {
    for (i, gi) in piece.gradients.iter().enumerate() {
        let Some(fi) = free[i] else { continue };
        let agi = [
            tensor[0][0] * gi[0] + tensor[0][1] * gi[1],
            tensor[1][0] * gi[0] + tensor[1][1] * gi[1],
        ];
        for (j, gj) in piece.gradients.iter().enumerate() {
            let Some(fj) = free[j] else { continue };
            let v = scale * piece.area * (agi[0] * gj[0] + agi[1] * gj[1]);
            if v != 0.0 {
                b.push(fi, fj, v);
            }
        }
    }
}

fn push_value_products(
    b: &mut TripletBuilder,
    gd: &GradientDiscretisation,
    cell: usize,
    free: &[Option<usize>],
    scale: f64,
) {
    let rule = QuadratureRule::new(RuleName::Gauss3);
    let c = &gd.cells[cell];
    for piece in &c.pieces {
        for (p, w) in rule.on_triangle(&piece.triangle) {
            let phi: Vec<f64> = c.values.iter().map(|a| a.eval(p)).collect();
            for (i, &pi) in phi.iter().enumerate() {
                let Some(fi) = free[i] else { continue };
                for (j, &pj) in phi.iter().enumerate() {
                    let Some(fj) = free[j] else { continue };
                    let v = scale * w * pi * pj;
                    if v != 0.0 {
                        b.push(fi, fj, v);
                    }
                }
            }
        }
    }
}

/// `∫ ∇_D u·∇_D v` on the free DOFs.
pub fn assemble_gradient_gram(gd: &GradientDiscretisation) -> CsrMatrix {
    let n = gd.dofs.n_free();
    let mut b = TripletBuilder::new(n, n);
    let identity = [[1.0, 0.0], [0.0, 1.0]];
    for (k, cell) in gd.cells.iter().enumerate() {
        let free = local_free(gd, k);
        for piece in &cell.pieces {
            push_gradient_products(&mut b, &free, piece, identity, 1.0);
        }
    }
    b.build()
}

/// `∫ Π_D u Π_D v` on the free DOFs (exact for affine reconstructions).
pub fn assemble_mass(gd: &GradientDiscretisation) -> CsrMatrix {
    let n = gd.dofs.n_free();
    let mut b = TripletBuilder::new(n, n);
    for k in 0..gd.cells.len() {
        let free = local_free(gd, k);
        push_value_products(&mut b, gd, k, &free, 1.0);
    }
    b.build()
}

/// `∫_∂Ω T_D u T_D v` on the free DOFs.
pub fn assemble_trace_mass(gd: &GradientDiscretisation) -> CsrMatrix {
    let n = gd.dofs.n_free();
    let mut b = TripletBuilder::new(n, n);
    for t in &gd.traces {
        let face = &gd.mesh.faces[t.face];
        let (a, e) = (
            gd.mesh.vertices[face.vertices[0]],
            gd.mesh.vertices[face.vertices[1]],
        );
        let free: Vec<Option<usize>> = t.dofs.iter().map(|&d| gd.dofs.free_index(d)).collect();
        for i in 0..t.dofs.len() {
            let Some(fi) = free[i] else { continue };
            for j in 0..t.dofs.len() {
                let Some(fj) = free[j] else { continue };
                let v = integrate_segment(a, e, 2, |p| t.values[i].eval(p) * t.values[j].eval(p));
                if v != 0.0 {
                    b.push(fi, fj, v);
                }
            }
        }
    }
    b.build()
}

/// `a_D(u, v) = ∫ A∇_D u·∇_D v + c0 Π_D u Π_D v`, with `c0` taken from the
/// boundary condition (zero under Dirichlet).
pub fn assemble_stiffness(gd: &GradientDiscretisation, diffusion: &Diffusion) -> Result<CsrMatrix> {
    let c0 = gd.bc.reaction();
    if gd.bc.is_neumann() && c0 <= 0.0 {
        return Err(Error::NonPositiveReaction(c0));
    }
    let n = gd.dofs.n_free();
    let mut b = TripletBuilder::new(n, n);
    for (k, cell) in gd.cells.iter().enumerate() {
        let free = local_free(gd, k);
        for piece in &cell.pieces {
            push_gradient_products(&mut b, &free, piece, average_tensor(diffusion, piece), 1.0);
        }
        if c0 != 0.0 {
            push_value_products(&mut b, gd, k, &free, c0);
        }
    }
    Ok(b.build())
}

/// `w ↦ ∫ F Π_D w + ∫_∂Ω G T_D w` on the free DOFs.
///
/// `F` is integrated with the 7-point rule on each gradient piece, `G` with a
/// 4-point Gauss–Legendre rule on each boundary face.
pub fn assemble_load(
    gd: &GradientDiscretisation,
    f: &dyn Fn(Point) -> f64,
    g: Option<&dyn Fn(Point) -> f64>,
) -> Result<Vec<f64>> {
    if g.is_some() && !gd.bc.is_neumann() {
        return Err(Error::BoundaryTermUnderDirichlet);
    }
    let rule = QuadratureRule::new(RuleName::Gauss7);
    let mut load = vec![0.0; gd.dofs.n_free()];
    for (k, cell) in gd.cells.iter().enumerate() {
        let free = local_free(gd, k);
        for piece in &cell.pieces {
            for (p, w) in rule.on_triangle(&piece.triangle) {
                let fp = w * f(p);
                for (i, a) in cell.values.iter().enumerate() {
                    if let Some(fi) = free[i] {
                        load[fi] += fp * a.eval(p);
                    }
                }
            }
        }
    }
    if let Some(g) = g {
        for t in &gd.traces {
            let face = &gd.mesh.faces[t.face];
            let (a, e) = (
                gd.mesh.vertices[face.vertices[0]],
                gd.mesh.vertices[face.vertices[1]],
            );
            for (i, &d) in t.dofs.iter().enumerate() {
                if let Some(fi) = gd.dofs.free_index(d) {
                    load[fi] += integrate_segment(a, e, BOUNDARY_LOAD_POINTS, |p| {
                        g(p) * t.values[i].eval(p)
                    });
                }
            }
        }
    }
    Ok(load)
}

/// `B` with `(B c)_i = ∫ c_h Π_D φ_i` for a cellwise-constant `c_h`;
/// shape (free DOFs) × (cells).
pub fn assemble_cell_coupling(gd: &GradientDiscretisation) -> CsrMatrix {
    let rule = QuadratureRule::new(RuleName::Gauss3);
    let mut b = TripletBuilder::new(gd.dofs.n_free(), gd.cells.len());
    for (k, cell) in gd.cells.iter().enumerate() {
        let free = local_free(gd, k);
        for (i, a) in cell.values.iter().enumerate() {
            let Some(fi) = free[i] else { continue };
            let v: f64 = cell
                .pieces
                .iter()
                .map(|piece| rule.integrate(&piece.triangle, |p| a.eval(p)))
                .sum();
            if v != 0.0 {
                b.push(fi, k, v);
            }
        }
    }
    b.build()
}

/// `B_b` with `(B_b c)_i = ∫_∂Ω c_h T_D φ_i` for a facewise-constant `c_h` on
/// the boundary faces; shape (free DOFs) × (boundary faces).
pub fn assemble_face_coupling(gd: &GradientDiscretisation) -> CsrMatrix {
    let mut b = TripletBuilder::new(gd.dofs.n_free(), gd.traces.len());
    for (j, t) in gd.traces.iter().enumerate() {
        let face = &gd.mesh.faces[t.face];
        let (a, e) = (
            gd.mesh.vertices[face.vertices[0]],
            gd.mesh.vertices[face.vertices[1]],
        );
        for (i, &d) in t.dofs.iter().enumerate() {
            let Some(fi) = gd.dofs.free_index(d) else {
                continue;
            };
            let v = integrate_segment(a, e, 2, |p| t.values[i].eval(p));
            if v != 0.0 {
                b.push(fi, j, v);
            }
        }
    }
    b.build()
}

/// Solves the gradient scheme `a_D(ψ, w) = ∫ F Π_D w (+ ∫_∂Ω G T_D w)` and
/// returns the full DOF vector (constrained entries zero).
pub fn solve_pde(
    gd: &GradientDiscretisation,
    diffusion: &Diffusion,
    f: &dyn Fn(Point) -> f64,
    g: Option<&dyn Fn(Point) -> f64>,
) -> Result<Vec<f64>> {
    let a = assemble_stiffness(gd, diffusion)?;
    let load = assemble_load(gd, f, g)?;
    Ok(gd.dofs.expand(&solve_spd(&a, &load)?))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::gd::{BoundaryCondition, SchemeKind};
    use crate::mesh::{cartesian_mesh, unit_square_triangulation};
    use crate::schemes::{make_conforming_p1, make_hmm, make_ncp1};

    fn square(m: usize) -> Arc<crate::mesh::PolytopalMesh> {
        Arc::new(unit_square_triangulation(m).unwrap())
    }

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let mut b = TripletBuilder::new(2, 3);
        b.push(1, 2, 1.0);
        b.push(0, 1, 2.0);
        b.push(1, 0, 3.0);
        b.push(1, 2, 4.0);
        let m = b.build();
        assert_eq!(m.row_ptr, vec![0, 1, 3]);
        assert_eq!(m.col_idx, vec![1, 0, 2]);
        assert_eq!(m.values, vec![2.0, 3.0, 5.0]);
        assert_eq!(m.get(1, 2), 5.0);
        assert_eq!(m.get(0, 0), 0.0);
        assert_eq!(m.tmatvec(&[1.0, 1.0]), vec![3.0, 2.0, 5.0]);
    }

    #[test]
    fn solves_small_systems() {
        let x = solve_spd(&CsrMatrix::identity(3), &[1.0, -2.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, -2.0, 3.0]);
        let m = CsrMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let x = solve_spd(&m, &[3.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn random_spd_meets_residual_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 50;
        let g: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let dense: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        (0..n).map(|k| g[i][k] * g[j][k]).sum::<f64>()
                            + if i == j { 1.0 } else { 0.0 }
                    })
                    .collect()
            })
            .collect();
        let m = CsrMatrix::from_dense(&dense);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = solve_spd(&m, &b).unwrap();
        let r: Vec<f64> = m.matvec(&x).iter().zip(&b).map(|(a, b)| a - b).collect();
        assert!(norm(&r) / norm(&b) <= SOLVE_TOLERANCE);
    }

    #[test]
    fn rounding_level_rhs_is_solved() {
        let m = CsrMatrix::from_dense(&[
            vec![4.0, -1.0, 0.0],
            vec![-1.0, 4.0, -1.0],
            vec![0.0, -1.0, 4.0],
        ]);
        let b = [3e-17, -1e-16, 2e-17];
        let x = solve_spd(&m, &b).unwrap();
        assert!(x.iter().all(|v| v.abs() < 1e-16));
    }

    #[test]
    fn indefinite_matrix_is_rejected_by_cholesky() {
        let m = CsrMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(
            solve_spd(&m, &[1.0, 0.0]),
            Err(Error::Singular(_))
        ));
        let lu = SparseSolver::general(m).unwrap();
        let x = lu.solve(&[3.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn hmm_single_square_cell_stiffness() {
        // One unit square, x_K at the centre: the cell DOF sees only the
        // stabilization, Σ_σ |D_{K,σ}| (√2/d)² = 4 · (1/4) · 8 = 8.
        let mesh = Arc::new(cartesian_mesh(1, 0.0).unwrap());
        let gd = make_hmm(mesh, BoundaryCondition::Dirichlet).unwrap();
        let a = assemble_stiffness(&gd, &Diffusion::Identity).unwrap();
        assert_eq!((a.nrows, a.ncols), (1, 1));
        assert!((a.get(0, 0) - 8.0).abs() < 1e-13);
    }

    #[test]
    fn p1_interior_vertex_has_five_point_stencil() {
        let gd = make_conforming_p1(square(2), BoundaryCondition::Dirichlet).unwrap();
        let a = assemble_stiffness(&gd, &Diffusion::Identity).unwrap();
        assert_eq!(a.nrows, 1);
        // Oracle: Σ over incident triangles of |T| |∇λ|² from explicit gradients.
        let centre = [0.5, 0.5];
        let mut oracle = 0.0;
        for cell in &gd.mesh.cells {
            let pts: Vec<Point> = cell.vertices.iter().map(|&v| gd.mesh.vertices[v]).collect();
            let Some(i) = pts.iter().position(|p| *p == centre) else {
                continue;
            };
            let (pj, pk) = (pts[(i + 1) % 3], pts[(i + 2) % 3]);
            let grad = [
                (pj[1] - pk[1]) / (2.0 * cell.area),
                (pk[0] - pj[0]) / (2.0 * cell.area),
            ];
            oracle += cell.area * (grad[0] * grad[0] + grad[1] * grad[1]);
        }
        assert!((a.get(0, 0) - oracle).abs() < 1e-13);
        assert!((a.get(0, 0) - 4.0).abs() < 1e-13);
    }

    #[test]
    fn assembled_matrices_are_symmetric() {
        let bc = BoundaryCondition::Neumann { c0: 0.7 };
        let field = Diffusion::Field(Arc::new(|p: Point| [[1.0 + p[0], 0.2], [0.2, 2.0 - p[1]]]));
        let gds = [
            make_conforming_p1(square(3), bc).unwrap(),
            make_ncp1(square(3), bc).unwrap(),
            make_hmm(Arc::new(cartesian_mesh(3, 0.2).unwrap()), bc).unwrap(),
        ];
        for gd in &gds {
            for m in [
                assemble_stiffness(gd, &field).unwrap(),
                assemble_mass(gd),
                assemble_gradient_gram(gd),
                assemble_trace_mass(gd),
            ] {
                assert!(m.asymmetry() <= 1e-12 * m.max_abs().max(1.0));
            }
        }
    }

    #[test]
    fn load_of_unit_source() {
        let gd = make_hmm(square(2), BoundaryCondition::Dirichlet).unwrap();
        let load = assemble_load(&gd, &|_| 1.0, None).unwrap();
        for (k, cell) in gd.mesh.cells.iter().enumerate() {
            assert!((load[gd.dofs.free_index(k).unwrap()] - cell.area).abs() < 1e-15);
        }

        let gd = make_conforming_p1(square(3), BoundaryCondition::Neumann { c0: 1.0 }).unwrap();
        let load = assemble_load(&gd, &|_| 1.0, None).unwrap();
        for v in 0..gd.mesh.n_vertices() {
            let patch: f64 = gd
                .mesh
                .cells
                .iter()
                .filter(|c| c.vertices.contains(&v))
                .map(|c| c.area)
                .sum();
            assert!((load[gd.dofs.free_index(v).unwrap()] - patch / 3.0).abs() < 1e-15);
        }

        let zero = assemble_load(&gd, &|_| 0.0, Some(&|_| 0.0)).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn boundary_data_needs_neumann() {
        let gd = make_ncp1(square(2), BoundaryCondition::Dirichlet).unwrap();
        assert!(matches!(
            assemble_load(&gd, &|_| 1.0, Some(&|_| 1.0)),
            Err(Error::BoundaryTermUnderDirichlet)
        ));
    }

    #[test]
    fn neumann_needs_positive_reaction() {
        let gd = make_ncp1(square(2), BoundaryCondition::Neumann { c0: 0.0 }).unwrap();
        assert!(matches!(
            assemble_stiffness(&gd, &Diffusion::Identity),
            Err(Error::NonPositiveReaction(_))
        ));
    }

    #[test]
    fn neumann_constants_are_not_in_the_kernel() {
        let gd = make_conforming_p1(square(3), BoundaryCondition::Neumann { c0: 1.0 }).unwrap();
        let a = assemble_stiffness(&gd, &Diffusion::Identity).unwrap();
        let ones = vec![1.0; a.nrows];
        let q: f64 = a.matvec(&ones).iter().sum();
        assert!((q - 1.0).abs() < 1e-13);
        assert!(SparseSolver::spd(a).is_ok());
    }

    fn contains(mesh: &crate::mesh::PolytopalMesh, cell: &crate::mesh::Cell, p: Point) -> bool {
        let n = cell.vertices.len();
        (0..n).all(|i| {
            let a = mesh.vertices[cell.vertices[i]];
            let b = mesh.vertices[cell.vertices[(i + 1) % n]];
            (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) > -1e-14
        })
    }

    #[test]
    fn couplings_match_loads_for_cellwise_data() {
        let c = |p: Point| if p[0] + 0.3 * p[1] < 0.55 { 2.0 } else { -1.0 };
        for gd in [
            make_conforming_p1(square(4), BoundaryCondition::Dirichlet).unwrap(),
            make_ncp1(square(4), BoundaryCondition::Neumann { c0: 1.0 }).unwrap(),
            make_hmm(square(4), BoundaryCondition::Dirichlet).unwrap(),
        ] {
            let values: Vec<f64> = gd.mesh.cells.iter().map(|k| c(k.centroid)).collect();
            let by_cell = |p: Point| {
                let k = gd
                    .mesh
                    .cells
                    .iter()
                    .position(|cell| contains(&gd.mesh, cell, p))
                    .unwrap();
                values[k]
            };
            let b = assemble_cell_coupling(&gd);
            let direct = b.matvec(&values);
            let load = assemble_load(&gd, &by_cell, None).unwrap();
            for (x, y) in direct.iter().zip(&load) {
                assert!((x - y).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn p1_solution_converges_on_manufactured_problem() {
        let pi = std::f64::consts::PI;
        let exact = |p: Point| (pi * p[0]).sin() * (pi * p[1]).sin();
        let f = |p: Point| 2.0 * pi * pi * exact(p);
        let rule = QuadratureRule::new(RuleName::Gauss7);
        let mut errors = Vec::new();
        for m in [4, 8, 16, 32] {
            let gd = make_conforming_p1(square(m), BoundaryCondition::Dirichlet).unwrap();
            let psi = solve_pde(&gd, &Diffusion::Identity, &f, None).unwrap();
            let mut e2 = 0.0;
            for (k, cell) in gd.cells.iter().enumerate() {
                for (p, w) in rule.on_triangle(&cell.pieces[0].triangle) {
                    e2 += w * (gd.value(k, p, &psi) - exact(p)).powi(2);
                }
            }
            errors.push(e2.sqrt());
        }
        for w in errors.windows(2) {
            assert!((w[0] / w[1]).log2() >= 1.8);
        }
    }

    #[test]
    fn solution_is_orthogonal_to_every_test_function() {
        let f = |p: Point| (3.0 * p[0]).exp() * (p[1] - 0.5);
        for kind in [
            SchemeKind::ConformingP1,
            SchemeKind::NonConformingP1,
            SchemeKind::Hmm,
        ] {
            for bc in [
                BoundaryCondition::Dirichlet,
                BoundaryCondition::Neumann { c0: 2.0 },
            ] {
                let gd = crate::schemes::build(kind, square(8), bc).unwrap();
                let psi = gd
                    .dofs
                    .restrict(&solve_pde(&gd, &Diffusion::Identity, &f, None).unwrap());
                let a = assemble_stiffness(&gd, &Diffusion::Identity).unwrap();
                let load = assemble_load(&gd, &f, None).unwrap();
                let scale = load.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                for (ai, li) in a.matvec(&psi).iter().zip(&load) {
                    assert!((ai - li).abs() <= 1e-10 * scale);
                }
            }
        }
    }

    #[test]
    fn zero_source_gives_zero_solution() {
        let gd = make_hmm(square(3), BoundaryCondition::Dirichlet).unwrap();
        let psi = solve_pde(&gd, &Diffusion::Identity, &|_| 0.0, None).unwrap();
        assert!(psi.iter().all(|&v| v == 0.0));
    }
}
