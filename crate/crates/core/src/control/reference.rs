//! Dense projected-gradient solver on the reduced cost, used as an oracle.
//!
//! With the control-to-state map `y(U) = y₀ + S U`, `S = A⁻¹ [B | B_b]`, the
//! reduced cost is the quadratic
//! `j(U) = ½ ‖Π_D y(U) − y_d‖² + ½ Σ_K α|K| (u_K − ū_{d,K})² + ½ Σ_σ β|σ| u_σ²`
//! with gradient `Sᵀ(M y − Y_d) + W(U − U_d)` and Hessian `H = SᵀMS + W`,
//! `W = diag(α|K|, β|σ|)`. The iteration
//! `U ← P(U − W⁻¹∇j / λ_max(W⁻¹H))` is a contraction in the `W`-norm.

use faer::Mat;

use crate::assembly::norm;
use crate::dense;
use crate::error::{Error, Result};
use crate::gd::GradientDiscretisation;

use super::{ControlVector, KktOperators, KktSolution, OptimalControlProblem};

/// Largest total DOF count accepted by [`solve_kkt_reference`].
pub const REFERENCE_DOF_LIMIT: usize = 500;

const STEP_TOL: f64 = 1e-14;
const MAX_ITER: usize = 200_000;

/// Minimises the reduced discrete cost over the box by projected gradient.
pub fn solve_kkt_reference(
    problem: &OptimalControlProblem,
    gd: &GradientDiscretisation,
) -> Result<KktSolution> {
    if gd.n_dofs() > REFERENCE_DOF_LIMIT {
        return Err(Error::TooLarge {
            size: gd.n_dofs(),
            limit: REFERENCE_DOF_LIMIT,
        });
    }
    let ops = KktOperators::assemble(problem, gd)?;
    let n = ops.n_free();
    let nc = if ops.distributed {
        ops.cell_area.len()
    } else {
        0
    };
    let nb = if ops.face_coupling.is_some() {
        ops.face_length.len()
    } else {
        0
    };
    let m = nc + nb;

    // Control columns [B | B_b] and their weights.
    let mut controls = Mat::<f64>::zeros(n, m);
    let mut weight = Vec::with_capacity(m);
    let mut lower = Vec::with_capacity(m);
    let mut upper = Vec::with_capacity(m);
    let mut target_u = Vec::with_capacity(m);
    for k in 0..nc {
        weight.push(ops.alpha * ops.cell_area[k]);
        lower.push(ops.bounds.a);
        upper.push(ops.bounds.b);
        target_u.push(ops.u_d[k]);
    }
    for j in 0..nb {
        weight.push(ops.beta * ops.face_length[j]);
        lower.push(ops.boundary_bounds.a);
        upper.push(ops.boundary_bounds.b);
        target_u.push(0.0);
    }
    if nc > 0 {
        for i in 0..n {
            for (k, v) in ops.cell_coupling.row(i) {
                controls[(i, k)] = v;
            }
        }
    }
    if let Some(bb) = ops.face_coupling.as_ref().filter(|_| nb > 0) {
        for i in 0..n {
            for (j, v) in bb.row(i) {
                controls[(i, nc + j)] = v;
            }
        }
    }

    let a = dense::from_csr(&ops.stiffness);
    let mass = dense::from_csr(&ops.mass);
    let s = dense::solve(&a, &controls);
    let y0 = dense::to_vec(&dense::solve(&a, &dense::col(&ops.load)));

    // Q = SᵀMS, linear term c = Sᵀ(M y₀ − Y_d).
    let ms = &mass * &s;
    let q = s.transpose() * &ms;
    let my0: Vec<f64> = ops
        .mass
        .matvec(&y0)
        .iter()
        .zip(&ops.target)
        .map(|(a, b)| a - b)
        .collect();
    let c = dense::to_vec(&(s.transpose() * dense::col(&my0)));

    let scaled = Mat::from_fn(m, m, |i, j| {
        q[(i, j)] / (weight[i] * weight[j]).sqrt() + if i == j { 1.0 } else { 0.0 }
    });
    let lipschitz = dense::symmetric_eigenvalues(&scaled)?
        .last()
        .copied()
        .unwrap_or(1.0);
    let step = 1.0 / lipschitz;

    let project = |u: &mut [f64]| {
        for i in 0..m {
            u[i] = u[i].max(lower[i]).min(upper[i]);
        }
    };
    let mut u = target_u.clone();
    project(&mut u);
    let mut iterations = 0;
    loop {
        iterations += 1;
        let qu = dense::to_vec(&(&q * dense::col(&u)));
        let mut next: Vec<f64> = (0..m)
            .map(|i| u[i] - step * ((qu[i] + c[i]) / weight[i] + (u[i] - target_u[i])))
            .collect();
        project(&mut next);
        let diff: Vec<f64> = (0..m)
            .map(|i| (next[i] - u[i]) * weight[i].sqrt())
            .collect();
        let size: Vec<f64> = (0..m).map(|i| next[i] * weight[i].sqrt()).collect();
        u = next;
        if norm(&diff) <= STEP_TOL * norm(&size).max(f64::MIN_POSITIVE) || iterations >= MAX_ITER {
            break;
        }
    }

    let su = dense::to_vec(&(&s * dense::col(&u)));
    let y: Vec<f64> = y0.iter().zip(&su).map(|(a, b)| a + b).collect();
    let rhs: Vec<f64> = ops
        .mass
        .matvec(&y)
        .iter()
        .zip(&ops.target)
        .map(|(a, b)| a - b)
        .collect();
    let p = dense::to_vec(&dense::solve(&a, &dense::col(&rhs)));

    let control = ControlVector {
        cells: if nc > 0 {
            u[..nc].to_vec()
        } else {
            vec![0.0; ops.cell_area.len()]
        },
        boundary: (ops.face_coupling.is_some()).then(|| u[nc..].to_vec()),
    };
    let at = |v: &[f64], lo: &[f64], hi: &[f64]| -> (Vec<bool>, Vec<bool>) {
        (
            v.iter().zip(lo).map(|(x, l)| x <= l).collect(),
            v.iter().zip(hi).map(|(x, h)| x >= h).collect(),
        )
    };
    let (active_lower, active_upper) = if nc > 0 {
        at(&u[..nc], &lower[..nc], &upper[..nc])
    } else {
        (
            vec![false; ops.cell_area.len()],
            vec![false; ops.cell_area.len()],
        )
    };
    let (boundary_active_lower, boundary_active_upper) = at(&u[nc..], &lower[nc..], &upper[nc..]);
    Ok(KktSolution {
        y: gd.dofs.expand(&y),
        p: gd.dofs.expand(&p),
        u: control,
        iterations,
        active_lower,
        active_upper,
        boundary_active_lower,
        boundary_active_upper,
    })
}
