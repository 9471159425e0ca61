//! Primal-dual active-set iteration.
//!
//! Each step fixes the controls on the current active sets, eliminates the
//! inactive ones through the projection formula and solves the symmetric
//! indefinite system
//!
//! ```text
//! [ −M   A ] [y]   [ −Y_d                   ]
//! [  A   N ] [p] = [ F + B u_fix + B_b u_fix ]
//! ```
//!
//! with `N = B_I (α D)⁻¹ B_Iᵀ + B_{b,I} (β D_b)⁻¹ B_{b,I}ᵀ` and `B u_fix`
//! including `B_I ū_{d,I}`. New active sets are read off the unclamped
//! controls; the iteration stops at the first repeated pair of sets.

use crate::assembly::{SparseSolver, TripletBuilder};
use crate::error::{Error, Result};
use crate::gd::GradientDiscretisation;

use super::{Bounds, ControlVector, KktOperators, KktSolution, OptimalControlProblem};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdasConfig {
    pub max_iter: usize,
    /// Bound on the relative state/adjoint residuals of the returned solution.
    pub tol: f64,
}

impl Default for PdasConfig {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-10,
        }
    }
}

struct Step {
    y: Vec<f64>,
    p: Vec<f64>,
}

/// Column entries of a coupling matrix, grouped by column.
fn columns(m: &crate::assembly::CsrMatrix) -> Vec<Vec<(usize, f64)>> {
    let mut cols = vec![Vec::new(); m.ncols];
    for i in 0..m.nrows {
        for (j, v) in m.row(i) {
            cols[j].push((i, v));
        }
    }
    cols
}

fn push_elimination(
    b: &mut TripletBuilder,
    offset: usize,
    cols: &[Vec<(usize, f64)>],
    inactive: impl Iterator<Item = (usize, f64)>,
) {
    for (j, scale) in inactive {
        for &(r, vr) in &cols[j] {
            for &(c, vc) in &cols[j] {
                b.push(offset + r, offset + c, vr * vc / scale);
            }
        }
    }
}

fn fixed_controls(
    unclamped_guess: &[f64],
    lower: &[bool],
    upper: &[bool],
    bounds: Bounds,
) -> Vec<f64> {
    unclamped_guess
        .iter()
        .zip(lower.iter().zip(upper))
        .map(|(&s, (&lo, &up))| {
            if lo {
                bounds.a
            } else if up {
                bounds.b
            } else {
                s
            }
        })
        .collect()
}

fn solve_step(
    ops: &KktOperators,
    cell_cols: &[Vec<(usize, f64)>],
    face_cols: Option<&[Vec<(usize, f64)>]>,
    active: &ActiveSets,
) -> Result<Step> {
    let n = ops.n_free();
    let mut b = TripletBuilder::new(2 * n, 2 * n);
    for i in 0..n {
        for (j, v) in ops.mass.row(i) {
            b.push(i, j, -v);
        }
        for (j, v) in ops.stiffness.row(i) {
            b.push(i, n + j, v);
            b.push(n + i, j, v);
        }
    }
    // Inactive cells contribute ū_d to the right-hand side and the
    // eliminated adjoint dependence to N; active ones a fixed bound.
    let mut u_fix = ControlVector {
        cells: vec![0.0; ops.cell_area.len()],
        boundary: None,
    };
    if ops.distributed {
        u_fix.cells = fixed_controls(&ops.u_d, &active.lower, &active.upper, ops.bounds);
        let inactive = (0..ops.cell_area.len())
            .filter(|&k| !active.lower[k] && !active.upper[k])
            .map(|k| (k, ops.alpha * ops.cell_area[k]));
        push_elimination(&mut b, n, cell_cols, inactive);
    }
    if let Some(face_cols) = face_cols {
        let zero = vec![0.0; ops.face_length.len()];
        u_fix.boundary = Some(fixed_controls(
            &zero,
            &active.boundary_lower,
            &active.boundary_upper,
            ops.boundary_bounds,
        ));
        let inactive = (0..ops.face_length.len())
            .filter(|&j| !active.boundary_lower[j] && !active.boundary_upper[j])
            .map(|j| (j, ops.beta * ops.face_length[j]));
        push_elimination(&mut b, n, face_cols, inactive);
    }
    let mut rhs: Vec<f64> = ops.target.iter().map(|v| -v).collect();
    rhs.extend(ops.state_rhs(&u_fix));
    let x = SparseSolver::general(b.build())?.solve(&rhs)?;
    Ok(Step {
        y: x[..n].to_vec(),
        p: x[n..].to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq)]
struct ActiveSets {
    lower: Vec<bool>,
    upper: Vec<bool>,
    boundary_lower: Vec<bool>,
    boundary_upper: Vec<bool>,
}

impl ActiveSets {
    fn from_adjoint(ops: &KktOperators, p: &[f64]) -> Self {
        let (lower, upper) = if ops.distributed {
            ops.active_sets(&ops.unclamped_cells(p), ops.bounds)
        } else {
            (
                vec![false; ops.cell_area.len()],
                vec![false; ops.cell_area.len()],
            )
        };
        let (boundary_lower, boundary_upper) = match ops.unclamped_faces(p) {
            Some(v) => ops.active_sets(&v, ops.boundary_bounds),
            None => (Vec::new(), Vec::new()),
        };
        Self {
            lower,
            upper,
            boundary_lower,
            boundary_upper,
        }
    }
}

fn assemble_solution(
    gd: &GradientDiscretisation,
    ops: &KktOperators,
    step: &Step,
    sets: ActiveSets,
    iterations: usize,
) -> KktSolution {
    KktSolution {
        y: gd.dofs.expand(&step.y),
        p: gd.dofs.expand(&step.p),
        u: ops.project_controls(&step.p),
        iterations,
        active_lower: sets.lower,
        active_upper: sets.upper,
        boundary_active_lower: sets.boundary_lower,
        boundary_active_upper: sets.boundary_upper,
    }
}

/// Solves the discrete optimality system by the primal-dual active-set method.
///
/// `iterations` counts coupled linear solves; an unconstrained problem takes
/// exactly one.
pub fn solve_kkt_pdas(
    problem: &OptimalControlProblem,
    gd: &GradientDiscretisation,
    config: PdasConfig,
) -> Result<KktSolution> {
    if config.max_iter == 0 {
        return Err(Error::InvalidProblem("max_iter must be at least 1".into()));
    }
    let ops = KktOperators::assemble(problem, gd)?;
    let cell_cols = columns(&ops.cell_coupling);
    let face_cols = ops.face_coupling.as_ref().map(columns);
    let nb = ops.face_length.len();
    let nc = ops.cell_area.len();
    let mut sets = ActiveSets {
        lower: vec![false; nc],
        upper: vec![false; nc],
        boundary_lower: if face_cols.is_some() {
            vec![false; nb]
        } else {
            Vec::new()
        },
        boundary_upper: if face_cols.is_some() {
            vec![false; nb]
        } else {
            Vec::new()
        },
    };
    let mut last = None;
    for it in 1..=config.max_iter {
        let step = solve_step(&ops, &cell_cols, face_cols.as_deref(), &sets)?;
        let next = ActiveSets::from_adjoint(&ops, &step.p);
        if next == sets {
            let sol = assemble_solution(gd, &ops, &step, next, it);
            let res = ops.residuals(&step.y, &step.p, &sol.u);
            if res.state.max(res.adjoint) > config.tol {
                return Err(Error::Inaccurate {
                    residual: res.state.max(res.adjoint),
                });
            }
            return Ok(sol);
        }
        last = Some((step, next.clone()));
        sets = next;
    }
    let (step, sets) = last.expect("max_iter ≥ 1");
    Err(Error::NonConvergence {
        iterations: config.max_iter,
        last: Box::new(assemble_solution(gd, &ops, &step, sets, config.max_iter)),
    })
}
