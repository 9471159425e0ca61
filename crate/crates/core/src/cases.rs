//! Manufactured test cases with closed-form states, adjoints and data.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::control::{Bounds, Field, OptimalControlProblem};
use crate::gd::{BoundaryCondition, Diffusion};
use crate::mesh::Point;

pub type VectorFn = Arc<dyn Fn(Point) -> Point + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseId {
    Example1,
    Example2LShape,
    Example3Neumann,
}

impl CaseId {
    pub const ALL: [CaseId; 3] = [
        CaseId::Example1,
        CaseId::Example2LShape,
        CaseId::Example3Neumann,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Example1 => "example1",
            Self::Example2LShape => "example2-lshape",
            Self::Example3Neumann => "example3-neumann",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }

    pub fn build(&self) -> TestCase {
        match self {
            Self::Example1 => example1_dirichlet(),
            Self::Example2LShape => example2_lshape(),
            Self::Example3Neumann => example3_neumann(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// `(0,1)²`.
    UnitSquare,
    /// `(−1,1)² \ ([0,1)×(−1,0])`.
    LShape,
}

/// A case with known optimal state `ȳ`, adjoint `p̄` and control `ū`.
#[derive(Clone)]
pub struct TestCase {
    pub id: CaseId,
    pub domain: Domain,
    pub bc: BoundaryCondition,
    pub alpha: f64,
    pub bounds: Bounds,
    pub y: Field,
    pub grad_y: VectorFn,
    pub lap_y: Field,
    pub p: Field,
    pub grad_p: VectorFn,
    pub lap_p: Field,
    pub u_d: Field,
    pub u: Field,
    pub f: Field,
    pub y_d: Field,
    pub f_b: Option<Field>,
}

impl std::fmt::Debug for TestCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TestCase")
            .field("id", &self.id)
            .field("domain", &self.domain)
            .field("bc", &self.bc)
            .field("alpha", &self.alpha)
            .field("bounds", &self.bounds)
            .finish_non_exhaustive()
    }
}

impl TestCase {
    pub fn problem(&self) -> OptimalControlProblem {
        OptimalControlProblem {
            bc: self.bc,
            diffusion: Diffusion::Identity,
            alpha: self.alpha,
            beta: 1.0,
            f: self.f.clone(),
            f_b: self.f_b.clone(),
            y_d: self.y_d.clone(),
            u_d: self.u_d.clone(),
            bounds: self.bounds,
            boundary_bounds: Bounds::UNBOUNDED,
            distributed_control: true,
            boundary_control: false,
        }
    }

    /// `−Δȳ + c0 ȳ − f − ū`, zero for a consistent case.
    pub fn state_residual(&self, x: Point) -> f64 {
        -(self.lap_y)(x) + self.bc.reaction() * (self.y)(x) - (self.f)(x) - (self.u)(x)
    }

    /// `−Δp̄ + c0 p̄ − (ȳ − y_d)`, zero for a consistent case.
    pub fn adjoint_residual(&self, x: Point) -> f64 {
        -(self.lap_p)(x) + self.bc.reaction() * (self.p)(x) - ((self.y)(x) - (self.y_d)(x))
    }
}

/// Assembles `f` and `y_d` from the state/adjoint closures.
#[allow(clippy::too_many_arguments)]
fn assemble_case(
    id: CaseId,
    domain: Domain,
    bc: BoundaryCondition,
    alpha: f64,
    bounds: Bounds,
    y: Field,
    grad_y: VectorFn,
    lap_y: Field,
    u_d: Field,
    f_b: Option<Field>,
) -> TestCase {
    // Every shipped case uses p̄ = ȳ.
    let (p, grad_p, lap_p) = (y.clone(), grad_y.clone(), lap_y.clone());
    let c0 = bc.reaction();
    let u: Field = {
        let (p, u_d) = (p.clone(), u_d.clone());
        Arc::new(move |x| bounds.project(u_d(x) - p(x) / alpha))
    };
    let f: Field = {
        let (y, lap_y, u) = (y.clone(), lap_y.clone(), u.clone());
        Arc::new(move |x| -lap_y(x) + c0 * y(x) - u(x))
    };
    let y_d: Field = {
        let (y, p, lap_p) = (y.clone(), p.clone(), lap_p.clone());
        Arc::new(move |x| y(x) + lap_p(x) - c0 * p(x))
    };
    TestCase {
        id,
        domain,
        bc,
        alpha,
        bounds,
        y,
        grad_y,
        lap_y,
        p,
        grad_p,
        lap_p,
        u_d,
        u,
        f,
        y_d,
        f_b,
    }
}

/// `ȳ = p̄ = sin(πx) sin(πy)`, `ū_d = 1 − sin(πx/2) − sin(πy/2)`, `α = 1`,
/// `U_ad = [0, ∞)`, homogeneous Dirichlet.
pub fn example1_dirichlet() -> TestCase {
    let y: Field = Arc::new(|x: Point| (PI * x[0]).sin() * (PI * x[1]).sin());
    let grad_y: VectorFn = Arc::new(|x: Point| {
        [
            PI * (PI * x[0]).cos() * (PI * x[1]).sin(),
            PI * (PI * x[0]).sin() * (PI * x[1]).cos(),
        ]
    });
    let lap_y: Field = Arc::new(|x: Point| -2.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin());
    let u_d: Field = Arc::new(|x: Point| 1.0 - (0.5 * PI * x[0]).sin() - (0.5 * PI * x[1]).sin());
    assemble_case(
        CaseId::Example1,
        Domain::UnitSquare,
        BoundaryCondition::Dirichlet,
        1.0,
        Bounds {
            a: 0.0,
            b: f64::INFINITY,
        },
        y,
        grad_y,
        lap_y,
        u_d,
        None,
    )
}

/// Singular factor `s = r^{2/3} g(θ)` with `g = (1 − cos θ)(1 + sin θ)`:
/// value, gradient and Laplacian. All three vanish at the origin by
/// convention.
fn corner_factor(x: Point) -> (f64, Point, f64) {
    let r = x[0].hypot(x[1]);
    if r == 0.0 {
        return (0.0, [0.0, 0.0], 0.0);
    }
    let (c, s) = (x[0] / r, x[1] / r);
    let g = (1.0 - c) * (1.0 + s);
    let dg = s + s * s + c - c * c;
    let d2g = c - s + 4.0 * s * c;
    let lambda = 2.0 / 3.0;
    let value = r.powf(lambda) * g;
    // ∇(r^λ g) = r^{λ−1} (λ g e_r + g' e_θ), e_r = (c, s), e_θ = (−s, c).
    let scale = r.powf(lambda - 1.0);
    let grad = [
        scale * (lambda * g * c - dg * s),
        scale * (lambda * g * s + dg * c),
    ];
    // Δ(r^λ g) = r^{λ−2} (λ² g + g'').
    let lap = r.powf(lambda - 2.0) * (lambda * lambda * g + d2g);
    (value, grad, lap)
}

fn lshape_state(x: Point) -> (f64, Point, f64) {
    let q = (x[0] * x[0] - 1.0) * (x[1] * x[1] - 1.0);
    let dq = [
        2.0 * x[0] * (x[1] * x[1] - 1.0),
        2.0 * x[1] * (x[0] * x[0] - 1.0),
    ];
    let lq = 2.0 * (x[0] * x[0] - 1.0) + 2.0 * (x[1] * x[1] - 1.0);
    let (s, ds, ls) = corner_factor(x);
    let value = q * s;
    let grad = [dq[0] * s + q * ds[0], dq[1] * s + q * ds[1]];
    let lap = lq * s + 2.0 * (dq[0] * ds[0] + dq[1] * ds[1]) + q * ls;
    (value, grad, lap)
}

/// `ȳ = p̄ = (x² − 1)(y² − 1) r^{2/3} g(θ)` on the L-shape, `ū_d = 0`,
/// `α = 10⁻³`, `U_ad = [−600, −50]`, homogeneous Dirichlet.
pub fn example2_lshape() -> TestCase {
    assemble_case(
        CaseId::Example2LShape,
        Domain::LShape,
        BoundaryCondition::Dirichlet,
        1e-3,
        Bounds {
            a: -600.0,
            b: -50.0,
        },
        Arc::new(|x| lshape_state(x).0),
        Arc::new(|x| lshape_state(x).1),
        Arc::new(|x| lshape_state(x).2),
        Arc::new(|_| 0.0),
        None,
    )
}

/// Outward unit normal of the unit square at a boundary point (corners take
/// the first matching side).
fn unit_square_normal(x: Point) -> Point {
    let tol = 1e-12;
    if x[0].abs() < tol {
        [-1.0, 0.0]
    } else if (x[0] - 1.0).abs() < tol {
        [1.0, 0.0]
    } else if x[1].abs() < tol {
        [0.0, -1.0]
    } else {
        [0.0, 1.0]
    }
}

/// `ȳ = p̄ = −(cos πx + cos πy)/π`, `c0 = 1`, `α = 10⁻³`,
/// `U_ad = [−750, −50]`, `ū_d = 0`, Neumann data `f_b = ∇ȳ·n`.
pub fn example3_neumann() -> TestCase {
    let y: Field = Arc::new(|x: Point| -((PI * x[0]).cos() + (PI * x[1]).cos()) / PI);
    let grad_y: VectorFn = Arc::new(|x: Point| [(PI * x[0]).sin(), (PI * x[1]).sin()]);
    let lap_y: Field = Arc::new(|x: Point| PI * ((PI * x[0]).cos() + (PI * x[1]).cos()));
    let flux = grad_y.clone();
    let f_b: Field = Arc::new(move |x: Point| {
        let n = unit_square_normal(x);
        let g = flux(x);
        g[0] * n[0] + g[1] * n[1]
    });
    assemble_case(
        CaseId::Example3Neumann,
        Domain::UnitSquare,
        BoundaryCondition::Neumann { c0: 1.0 },
        1e-3,
        Bounds {
            a: -750.0,
            b: -50.0,
        },
        y,
        grad_y,
        lap_y,
        Arc::new(|_| 0.0),
        Some(f_b),
    )
}
