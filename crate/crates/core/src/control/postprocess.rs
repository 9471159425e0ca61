//! Post-processed controls built from the exact and the discrete adjoint.
//!
//! Piecewise-linear reconstructions (`w_T = w`):
//! `ũ = P_[a,b](P_M ū_d − p̄/α)` and `ũ_h = P_[a,b](P_M ū_d − Π_D p_D/α)`,
//! both sampled at 7-point Gauss nodes of each cell.
//!
//! Piecewise-constant reconstructions (`w_T|_K = w(x_K)`):
//! `ũ|_K = P_[a,b](P_M ū_d − p̄(x̄_K)/α)` at the centroid and
//! `ũ_h|_K = P_[a,b](P_M ū_d − p_K/α)`, which equals `ū_h`.

use crate::gd::{GradientDiscretisation, SamplingPolicy};
use crate::mesh::Point;
use crate::quadrature::{QuadratureRule, RuleName};

use super::{project_pm, KktSolution, OptimalControlProblem};

#[derive(Debug, Clone, PartialEq)]
pub struct PostprocessedControls {
    pub rule: RuleName,
    /// Physical quadrature nodes and weights of each cell.
    pub points: Vec<Vec<(Point, f64)>>,
    /// `ũ` at the nodes.
    pub exact: Vec<Vec<f64>>,
    /// `ũ_h` at the nodes.
    pub discrete: Vec<Vec<f64>>,
}

impl PostprocessedControls {
    /// `‖ũ_h − ũ‖` with the stored rule.
    pub fn l2_difference(&self) -> f64 {
        let mut sum = 0.0;
        for ((pts, e), d) in self.points.iter().zip(&self.exact).zip(&self.discrete) {
            for (((_, w), ev), dv) in pts.iter().zip(e).zip(d) {
                sum += w * (dv - ev).powi(2);
            }
        }
        sum.sqrt()
    }
}

pub fn postprocess(
    problem: &OptimalControlProblem,
    gd: &GradientDiscretisation,
    solution: &KktSolution,
    exact_adjoint: &dyn Fn(Point) -> f64,
) -> PostprocessedControls {
    let mesh = &gd.mesh;
    let ud = project_pm(mesh, problem.u_d.as_ref(), RuleName::Gauss7);
    let alpha = problem.alpha;
    let bounds = problem.bounds;
    let (rule, points): (RuleName, Vec<Vec<(Point, f64)>>) = match gd.policy {
        SamplingPolicy::Identity => {
            let rule = QuadratureRule::new(RuleName::Gauss7);
            let pts = (0..mesh.n_cells())
                .map(|k| {
                    mesh.cell_triangles(k)
                        .iter()
                        .flat_map(|t| rule.on_triangle(t).collect::<Vec<_>>())
                        .collect()
                })
                .collect();
            (RuleName::Gauss7, pts)
        }
        SamplingPolicy::CellPoint => (
            RuleName::Midpoint,
            mesh.cells
                .iter()
                .map(|c| vec![(c.centroid, c.area)])
                .collect(),
        ),
    };
    let mut exact = Vec::with_capacity(points.len());
    let mut discrete = Vec::with_capacity(points.len());
    for (k, pts) in points.iter().enumerate() {
        exact.push(
            pts.iter()
                .map(|&(p, _)| bounds.project(ud[k] - exact_adjoint(p) / alpha))
                .collect(),
        );
        discrete.push(
            pts.iter()
                .map(|&(p, _)| bounds.project(ud[k] - gd.value(k, p, &solution.p) / alpha))
                .collect(),
        );
    }
    PostprocessedControls {
        rule,
        points,
        exact,
        discrete,
    }
}
