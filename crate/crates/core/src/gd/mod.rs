//! The gradient discretisation abstraction.
//!
//! Every scheme is reduced to the same per-cell description: the function
//! reconstruction `Π_D` is affine on each cell (constant for HMM) and the
//! gradient reconstruction `∇_D` is constant on a set of triangular pieces
//! tiling the cell (the cell itself for finite elements, the half-diamonds
//! `D_{K,σ}` for HMM). The trace `T_D` is affine on each boundary face.
//! Assembly, error measurement and diagnostics only ever talk to this
//! description, never to a concrete scheme.

use std::sync::Arc;

use crate::mesh::{Point, PolytopalMesh};

pub mod quality;

pub use quality::{compute_cd, compute_sd_upper, compute_wd, GdQuality};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryCondition {
    /// Homogeneous Dirichlet.
    Dirichlet,
    /// `A∇y·n = g` with reaction term `c0 y` in the equation.
    Neumann { c0: f64 },
}

impl BoundaryCondition {
    pub fn is_neumann(&self) -> bool {
        matches!(self, Self::Neumann { .. })
    }

    pub fn reaction(&self) -> f64 {
        match self {
            Self::Dirichlet => 0.0,
            Self::Neumann { c0 } => *c0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    ConformingP1,
    NonConformingP1,
    Hmm,
}

impl SchemeKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::ConformingP1 => "p1",
            Self::NonConformingP1 => "ncp1",
            Self::Hmm => "hmm",
        }
    }
}

/// Where a degree of freedom lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofLocation {
    Vertex(usize),
    Face(usize),
    Cell(usize),
}

/// How exact functions are projected before being compared with `Π_D`
/// reconstructions (`w ↦ w_T`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingPolicy {
    /// `w_T = w`, for piecewise-linear reconstructions.
    Identity,
    /// `w_T|_K = w(x_K)`, for piecewise-constant reconstructions.
    CellPoint,
}

/// `c + gx·x + gy·y`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Affine {
    pub c: f64,
    pub gx: f64,
    pub gy: f64,
}

impl Affine {
    pub const fn constant(c: f64) -> Self {
        Self {
            c,
            gx: 0.0,
            gy: 0.0,
        }
    }

    #[inline]
    pub fn eval(&self, p: Point) -> f64 {
        self.c + self.gx * p[0] + self.gy * p[1]
    }
}

/// A triangle on which `∇_D` is constant.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientPiece {
    pub triangle: [Point; 3],
    pub area: f64,
    /// Gradient contribution of each local DOF of the owning cell.
    pub gradients: Vec<Point>,
}

impl GradientPiece {
    pub fn centroid(&self) -> Point {
        let t = &self.triangle;
        [
            (t[0][0] + t[1][0] + t[2][0]) / 3.0,
            (t[0][1] + t[1][1] + t[2][1]) / 3.0,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellReconstruction {
    /// Global DOF indices touching this cell.
    pub dofs: Vec<usize>,
    /// `Π_D` basis restricted to the cell, aligned with `dofs`.
    pub values: Vec<Affine>,
    pub pieces: Vec<GradientPiece>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceReconstruction {
    pub face: usize,
    pub dofs: Vec<usize>,
    pub values: Vec<Affine>,
}

/// DOF bookkeeping and the Dirichlet mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DofSpace {
    pub locations: Vec<DofLocation>,
    /// Interpolation point of each DOF.
    pub points: Vec<Point>,
    pub constrained: Vec<bool>,
    free: Vec<usize>,
    free_index: Vec<Option<usize>>,
}

impl DofSpace {
    pub fn new(locations: Vec<DofLocation>, points: Vec<Point>, constrained: Vec<bool>) -> Self {
        let mut free = Vec::new();
        let mut free_index = vec![None; locations.len()];
        for (i, &c) in constrained.iter().enumerate() {
            if !c {
                free_index[i] = Some(free.len());
                free.push(i);
            }
        }
        Self {
            locations,
            points,
            constrained,
            free,
            free_index,
        }
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    pub fn free_index(&self, dof: usize) -> Option<usize> {
        self.free_index[dof]
    }

    /// Scatters a vector on the free DOFs into the full DOF vector.
    pub fn expand(&self, free_values: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.len()];
        for (&d, &v) in self.free.iter().zip(free_values) {
            full[d] = v;
        }
        full
    }

    /// Gathers the free entries of a full DOF vector.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&d| full[d]).collect()
    }
}

/// A gradient discretisation `(X_D, Π_D, ∇_D, T_D)` on a mesh.
#[derive(Debug, Clone)]
pub struct GradientDiscretisation {
    pub scheme: SchemeKind,
    pub bc: BoundaryCondition,
    pub mesh: Arc<PolytopalMesh>,
    pub dofs: DofSpace,
    pub cells: Vec<CellReconstruction>,
    /// One entry per boundary face, in `mesh.boundary_faces` order.
    pub traces: Vec<TraceReconstruction>,
    pub policy: SamplingPolicy,
}

impl GradientDiscretisation {
    pub fn n_dofs(&self) -> usize {
        self.dofs.len()
    }

    /// `Π_D v` at a point of `cell`.
    pub fn value(&self, cell: usize, p: Point, v: &[f64]) -> f64 {
        let c = &self.cells[cell];
        c.dofs
            .iter()
            .zip(&c.values)
            .map(|(&d, a)| v[d] * a.eval(p))
            .sum()
    }

    /// Mean of `Π_D v` over a cell (exact since `Π_D v` is affine there).
    pub fn cell_mean(&self, cell: usize, v: &[f64]) -> f64 {
        self.value(cell, self.mesh.cells[cell].centroid, v)
    }

    /// `∇_D v` on one piece of `cell`.
    pub fn gradient(&self, cell: usize, piece: usize, v: &[f64]) -> Point {
        let c = &self.cells[cell];
        let mut g = [0.0, 0.0];
        for (&d, gi) in c.dofs.iter().zip(&c.pieces[piece].gradients) {
            g[0] += v[d] * gi[0];
            g[1] += v[d] * gi[1];
        }
        g
    }

    /// `T_D v` at a point of the boundary face `traces[index]`.
    pub fn trace(&self, index: usize, p: Point, v: &[f64]) -> f64 {
        let t = &self.traces[index];
        t.dofs
            .iter()
            .zip(&t.values)
            .map(|(&d, a)| v[d] * a.eval(p))
            .sum()
    }

    /// Nodal interpolant: each DOF samples `f` at its point; constrained DOFs are zero.
    pub fn interpolate<F: Fn(Point) -> f64>(&self, f: F) -> Vec<f64> {
        self.dofs
            .points
            .iter()
            .zip(&self.dofs.constrained)
            .map(|(&p, &c)| if c { 0.0 } else { f(p) })
            .collect()
    }

    /// Value of `w_T` at `p ∈ cell` according to the sampling policy.
    pub fn sample<F: Fn(Point) -> f64>(&self, cell: usize, p: Point, f: F) -> f64 {
        match self.policy {
            SamplingPolicy::Identity => f(p),
            SamplingPolicy::CellPoint => f(self.mesh.cells[cell].point),
        }
    }
}

/// Diffusion tensor `A(x)`, symmetric and uniformly elliptic.
#[derive(Clone, Default)]
pub enum Diffusion {
    #[default]
    Identity,
    Field(Arc<dyn Fn(Point) -> [[f64; 2]; 2] + Send + Sync>),
}

impl std::fmt::Debug for Diffusion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Identity => write!(f, "Identity"),
            Self::Field(_) => write!(f, "Field(..)"),
        }
    }
}

impl Diffusion {
    pub fn at(&self, p: Point) -> [[f64; 2]; 2] {
        match self {
            Self::Identity => [[1.0, 0.0], [0.0, 1.0]],
            Self::Field(a) => a(p),
        }
    }
}

/// A scalar function together with its gradient.
pub struct ScalarField<'a> {
    pub value: &'a dyn Fn(Point) -> f64,
    pub gradient: &'a dyn Fn(Point) -> Point,
}

/// A vector field together with its divergence.
pub struct VectorField<'a> {
    pub value: &'a dyn Fn(Point) -> Point,
    pub divergence: &'a dyn Fn(Point) -> f64,
}
