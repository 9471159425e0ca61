//! Discrete optimality system with piecewise-constant box-constrained controls.
//!
//! With `A` the stiffness matrix, `M` the `Π_D` mass matrix, `B` the cell
//! coupling and `B_b` the boundary-face coupling (all on free DOFs):
//!
//! ```text
//! A y = F + B u + B_b u_b
//! A p = M y − Y_d
//! u_K   = P_[a,b](ū_{d,K} − (Bᵀp)_K / (α|K|))
//! u_b,σ = P_[a_b,b_b](−(B_bᵀp)_σ / (β|σ|))
//! ```
//!
//! The last two lines are the cellwise form of the variational inequality for
//! the product `⟪U, V⟫ = α(u, v) + β(u_b, v_b)_∂` restricted to piecewise
//! constants.

use std::sync::Arc;

use crate::assembly::{
    assemble_cell_coupling, assemble_face_coupling, assemble_load, assemble_mass,
    assemble_stiffness, norm, CsrMatrix,
};
use crate::error::{Error, Result};
use crate::gd::{BoundaryCondition, Diffusion, GradientDiscretisation};
use crate::mesh::{Point, PolytopalMesh};
use crate::quadrature::{QuadratureRule, RuleName};

mod pdas;
mod postprocess;
mod reference;

pub use pdas::{solve_kkt_pdas, PdasConfig};
pub use postprocess::{postprocess, PostprocessedControls};
pub use reference::{solve_kkt_reference, REFERENCE_DOF_LIMIT};

/// A scalar function of position, shareable across threads.
pub type Field = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

/// `[a, b]` with infinite ends allowed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub a: f64,
    pub b: f64,
}

impl Bounds {
    pub const UNBOUNDED: Self = Self {
        a: f64::NEG_INFINITY,
        b: f64::INFINITY,
    };

    pub fn new(a: f64, b: f64) -> Result<Self> {
        if a.is_nan() || b.is_nan() || a > b {
            return Err(Error::InvalidBounds { a, b });
        }
        Ok(Self { a, b })
    }

    #[inline]
    pub fn project(&self, s: f64) -> f64 {
        s.max(self.a).min(self.b)
    }
}

/// `P_[a,b](s) = min(b, max(a, s))`.
pub fn project_box(s: f64, a: f64, b: f64) -> Result<f64> {
    Ok(Bounds::new(a, b)?.project(s))
}

/// Cell averages `(P_M g)|_K` with the given rule on each cell's triangles.
pub fn project_pm(mesh: &PolytopalMesh, g: &dyn Fn(Point) -> f64, rule: RuleName) -> Vec<f64> {
    let rule = QuadratureRule::new(rule);
    (0..mesh.n_cells())
        .map(|k| {
            let total: f64 = mesh
                .cell_triangles(k)
                .iter()
                .map(|t| rule.integrate(t, &g))
                .sum();
            total / mesh.cells[k].area
        })
        .collect()
}

#[derive(Clone)]
pub struct OptimalControlProblem {
    pub bc: BoundaryCondition,
    pub diffusion: Diffusion,
    pub alpha: f64,
    /// Weight of the boundary control; only read when `boundary_control` is set.
    pub beta: f64,
    pub f: Field,
    /// Neumann data `f_b`.
    pub f_b: Option<Field>,
    pub y_d: Field,
    pub u_d: Field,
    pub bounds: Bounds,
    pub boundary_bounds: Bounds,
    pub distributed_control: bool,
    pub boundary_control: bool,
}

impl std::fmt::Debug for OptimalControlProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OptimalControlProblem")
            .field("bc", &self.bc)
            .field("diffusion", &self.diffusion)
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .field("bounds", &self.bounds)
            .field("boundary_bounds", &self.boundary_bounds)
            .field("distributed_control", &self.distributed_control)
            .field("boundary_control", &self.boundary_control)
            .finish_non_exhaustive()
    }
}

impl OptimalControlProblem {
    /// Distributed control with homogeneous Dirichlet conditions.
    pub fn dirichlet(f: Field, y_d: Field, u_d: Field, alpha: f64, bounds: Bounds) -> Self {
        Self {
            bc: BoundaryCondition::Dirichlet,
            diffusion: Diffusion::Identity,
            alpha,
            beta: 1.0,
            f,
            f_b: None,
            y_d,
            u_d,
            bounds,
            boundary_bounds: Bounds::UNBOUNDED,
            distributed_control: true,
            boundary_control: false,
        }
    }

    pub fn validate(&self, gd: &GradientDiscretisation) -> Result<()> {
        if self.alpha.is_nan() || self.alpha <= 0.0 {
            return Err(Error::InvalidProblem(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        Bounds::new(self.bounds.a, self.bounds.b)?;
        Bounds::new(self.boundary_bounds.a, self.boundary_bounds.b)?;
        if gd.bc != self.bc {
            return Err(Error::InvalidProblem(format!(
                "discretisation built for {:?}, problem posed with {:?}",
                gd.bc, self.bc
            )));
        }
        if !self.distributed_control && !self.boundary_control {
            return Err(Error::InvalidProblem("no control enabled".into()));
        }
        if self.boundary_control {
            if !self.bc.is_neumann() {
                return Err(Error::InvalidProblem(
                    "boundary control needs Neumann conditions".into(),
                ));
            }
            if self.beta.is_nan() || self.beta <= 0.0 {
                return Err(Error::InvalidProblem(format!(
                    "beta must be positive, got {}",
                    self.beta
                )));
            }
        }
        if self.f_b.is_some() && !self.bc.is_neumann() {
            return Err(Error::BoundaryTermUnderDirichlet);
        }
        Ok(())
    }
}

/// Piecewise-constant controls.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlVector {
    /// One value per cell (all zero when distributed control is disabled).
    pub cells: Vec<f64>,
    /// One value per boundary face, in `mesh.boundary_faces` order.
    pub boundary: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktSolution {
    /// State, full DOF vector.
    pub y: Vec<f64>,
    /// Adjoint, full DOF vector.
    pub p: Vec<f64>,
    pub u: ControlVector,
    pub iterations: usize,
    pub active_lower: Vec<bool>,
    pub active_upper: Vec<bool>,
    pub boundary_active_lower: Vec<bool>,
    pub boundary_active_upper: Vec<bool>,
}

/// Assembled discrete operators of one problem on one discretisation.
#[derive(Debug, Clone)]
pub struct KktOperators {
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    /// Free DOFs × cells.
    pub cell_coupling: CsrMatrix,
    /// Free DOFs × boundary faces; present iff boundary control is enabled.
    pub face_coupling: Option<CsrMatrix>,
    /// `∫ f Π_D w (+ ∫_∂Ω f_b T_D w)`.
    pub load: Vec<f64>,
    /// `∫ y_d Π_D w`.
    pub target: Vec<f64>,
    /// `P_M ū_d`.
    pub u_d: Vec<f64>,
    pub cell_area: Vec<f64>,
    pub face_length: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub bounds: Bounds,
    pub boundary_bounds: Bounds,
    pub distributed: bool,
}

impl KktOperators {
    pub fn assemble(problem: &OptimalControlProblem, gd: &GradientDiscretisation) -> Result<Self> {
        problem.validate(gd)?;
        let f = problem.f.clone();
        let f_b = problem.f_b.clone();
        let g: Option<&dyn Fn(Point) -> f64> =
            f_b.as_ref().map(|g| g.as_ref() as &dyn Fn(Point) -> f64);
        let y_d = problem.y_d.clone();
        let u_d = problem.u_d.clone();
        Ok(Self {
            stiffness: assemble_stiffness(gd, &problem.diffusion)?,
            mass: assemble_mass(gd),
            cell_coupling: assemble_cell_coupling(gd),
            face_coupling: problem.boundary_control.then(|| assemble_face_coupling(gd)),
            load: assemble_load(gd, f.as_ref(), g)?,
            target: assemble_load(gd, y_d.as_ref(), None)?,
            u_d: project_pm(&gd.mesh, u_d.as_ref(), RuleName::Gauss7),
            cell_area: gd.mesh.cells.iter().map(|c| c.area).collect(),
            face_length: gd
                .mesh
                .boundary_faces
                .iter()
                .map(|&f| gd.mesh.faces[f].length)
                .collect(),
            alpha: problem.alpha,
            beta: problem.beta,
            bounds: problem.bounds,
            boundary_bounds: problem.boundary_bounds,
            distributed: problem.distributed_control,
        })
    }

    pub fn n_free(&self) -> usize {
        self.stiffness.nrows
    }

    /// Unclamped cell controls `ū_{d,K} − (Bᵀp)_K / (α|K|)`.
    pub fn unclamped_cells(&self, p_free: &[f64]) -> Vec<f64> {
        let btp = self.cell_coupling.tmatvec(p_free);
        btp.iter()
            .zip(&self.u_d)
            .zip(&self.cell_area)
            .map(|((bp, ud), area)| ud - bp / (self.alpha * area))
            .collect()
    }

    /// Unclamped boundary controls `−(B_bᵀp)_σ / (β|σ|)`.
    pub fn unclamped_faces(&self, p_free: &[f64]) -> Option<Vec<f64>> {
        self.face_coupling.as_ref().map(|bb| {
            bb.tmatvec(p_free)
                .iter()
                .zip(&self.face_length)
                .map(|(bp, len)| -bp / (self.beta * len))
                .collect()
        })
    }

    /// Controls given by the projection formula for an adjoint.
    pub fn project_controls(&self, p_free: &[f64]) -> ControlVector {
        let cells = if self.distributed {
            self.unclamped_cells(p_free)
                .into_iter()
                .map(|s| self.bounds.project(s))
                .collect()
        } else {
            vec![0.0; self.cell_area.len()]
        };
        let boundary = self.unclamped_faces(p_free).map(|v| {
            v.into_iter()
                .map(|s| self.boundary_bounds.project(s))
                .collect()
        });
        ControlVector { cells, boundary }
    }

    /// `F + B u + B_b u_b`.
    pub fn state_rhs(&self, u: &ControlVector) -> Vec<f64> {
        let mut rhs = self.load.clone();
        if self.distributed {
            for (r, v) in rhs.iter_mut().zip(self.cell_coupling.matvec(&u.cells)) {
                *r += v;
            }
        }
        if let (Some(bb), Some(ub)) = (&self.face_coupling, &u.boundary) {
            for (r, v) in rhs.iter_mut().zip(bb.matvec(ub)) {
                *r += v;
            }
        }
        rhs
    }

    /// Relative residuals of the three KKT lines for free-DOF vectors.
    pub fn residuals(&self, y_free: &[f64], p_free: &[f64], u: &ControlVector) -> KktResiduals {
        let rel = |lhs: Vec<f64>, rhs: Vec<f64>| {
            let r: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
            norm(&r) / norm(&rhs).max(norm(&lhs)).max(f64::MIN_POSITIVE)
        };
        let state = rel(self.stiffness.matvec(y_free), self.state_rhs(u));
        let my = self.mass.matvec(y_free);
        let adjoint = rel(
            self.stiffness.matvec(p_free),
            my.iter().zip(&self.target).map(|(a, b)| a - b).collect(),
        );
        let projected = self.project_controls(p_free);
        let mut projection: f64 = 0.0;
        for (a, b) in projected.cells.iter().zip(&u.cells) {
            projection = projection.max((a - b).abs() / a.abs().max(1.0));
        }
        if let (Some(pa), Some(pb)) = (&projected.boundary, &u.boundary) {
            for (a, b) in pa.iter().zip(pb) {
                projection = projection.max((a - b).abs() / a.abs().max(1.0));
            }
        }
        KktResiduals {
            state,
            adjoint,
            projection,
        }
    }

    pub(crate) fn active_sets(&self, unclamped: &[f64], bounds: Bounds) -> (Vec<bool>, Vec<bool>) {
        (
            unclamped.iter().map(|&s| s < bounds.a).collect(),
            unclamped.iter().map(|&s| s > bounds.b).collect(),
        )
    }
}

/// Relative residuals of the state and adjoint equations and largest
/// scaled deviation from the projection formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    pub state: f64,
    pub adjoint: f64,
    pub projection: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.state.max(self.adjoint).max(self.projection)
    }
}

/// Relative KKT residuals of a solution.
pub fn kkt_residuals(
    problem: &OptimalControlProblem,
    gd: &GradientDiscretisation,
    sol: &KktSolution,
) -> Result<KktResiduals> {
    let ops = KktOperators::assemble(problem, gd)?;
    Ok(ops.residuals(&gd.dofs.restrict(&sol.y), &gd.dofs.restrict(&sol.p), &sol.u))
}
