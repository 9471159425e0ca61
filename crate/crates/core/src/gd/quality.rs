//! Quality measures of a gradient discretisation.
//!
//! * `C_D`: largest ratio `‖Π_D w‖ / ‖∇_D w‖` (Dirichlet) or
//!   `max(‖T_D w‖_∂, ‖Π_D w‖) / (‖∇_D w‖ + ‖Π_D w‖)` (Neumann).
//! * `W_D(φ)`: dual norm of `w ↦ ∫ Π_D w div φ + ∇_D w·φ (− ∫_∂Ω T_D w φ·n)`.
//! * `S_D(φ)`: reported through the least-squares upper bound, see
//!   [`compute_sd_upper`].
//!
//! The Neumann norm `‖∇_D w‖ + ‖Π_D w‖` is not Hilbertian. Both Neumann
//! quantities use `(a + b)² = min_{s>0} (1+s)a² + (1+1/s)b²`, which turns the
//! maximisation over `w` into a one-dimensional scan over `s` of Hilbertian
//! problems.

use crate::assembly::{
    assemble_gradient_gram, assemble_mass, assemble_trace_mass, norm, CsrMatrix, SparseSolver,
};
use crate::dense;
use crate::error::{Error, Result};
use crate::gd::{GradientDiscretisation, ScalarField, VectorField};
use crate::mesh::Point;
use crate::quadrature::{integrate_segment, QuadratureRule, RuleName};

/// Below this many free DOFs, eigenvalue problems are solved densely.
pub const DENSE_LIMIT: usize = 200;

/// Gauss–Legendre points per boundary face in diagnostics.
const SEGMENT_POINTS: usize = 8;

const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITER: usize = 20_000;

/// Range of `log10 s` scanned for the Neumann norm splitting.
const SCAN_LOG_RANGE: (f64, f64) = (-4.0, 6.0);
const SCAN_POINTS: usize = 21;
const GOLDEN_STEPS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdQuality {
    pub c_d: f64,
    /// `W_D` of the supplied flux.
    pub w_d: f64,
    /// Least-squares upper bound of `S_D`; within a factor `√2` (or `√3`
    /// with a trace term) of the true minimum.
    pub s_d_upper: f64,
}

impl GdQuality {
    pub fn evaluate(
        gd: &GradientDiscretisation,
        psi: &ScalarField,
        flux: &VectorField,
    ) -> Result<Self> {
        Ok(Self {
            c_d: compute_cd(gd)?,
            w_d: compute_wd(gd, flux)?,
            s_d_upper: compute_sd_upper(gd, psi)?,
        })
    }
}

/// Largest eigenvalue of the pencil `(A, B)` with `B` SPD.
///
/// Dense below [`DENSE_LIMIT`] unless `iterative` is set; otherwise power
/// iteration on `B⁻¹A` from the all-ones vector, stopped when the Rayleigh
/// quotient changes by less than `1e-12` relatively.
pub(crate) fn max_pencil_eigenvalue(a: &CsrMatrix, b: &CsrMatrix, iterative: bool) -> Result<f64> {
    let n = a.nrows;
    if n == 0 {
        return Err(Error::InvalidProblem(
            "discretisation has no free DOFs".into(),
        ));
    }
    if n < DENSE_LIMIT && !iterative {
        let ev = dense::generalized_eigenvalues(&dense::from_csr(a), &dense::from_csr(b))?;
        return Ok(*ev.last().unwrap());
    }
    let solver = SparseSolver::spd(b.clone())?;
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    let mut x = vec![1.0; n];
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITER {
        let ax = a.matvec(&x);
        let next = dot(&x, &ax) / dot(&x, &b.matvec(&x));
        let mut y = solver.solve(&ax)?;
        let scale = norm(&y);
        if scale == 0.0 {
            return Ok(0.0);
        }
        y.iter_mut().for_each(|v| *v /= scale);
        x = y;
        if (next - lambda).abs() <= POWER_TOL * next.abs() {
            return Ok(next);
        }
        lambda = next;
    }
    Ok(lambda)
}

/// Maximises `g` over `log10 s` by a grid scan refined with golden sections.
fn scan_max(mut g: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let (lo, hi) = SCAN_LOG_RANGE;
    let step = (hi - lo) / (SCAN_POINTS - 1) as f64;
    let mut values = Vec::with_capacity(SCAN_POINTS);
    for i in 0..SCAN_POINTS {
        values.push(g(lo + step * i as f64)?);
    }
    let best = (0..SCAN_POINTS).fold(0, |b, i| if values[i] > values[b] { i } else { b });
    let mut top = values[best];
    let (mut a, mut b) = (
        lo + step * best.saturating_sub(1) as f64,
        lo + step * (best + 1).min(SCAN_POINTS - 1) as f64,
    );
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (b - ratio * (b - a), a + ratio * (b - a));
    let (mut gc, mut gd) = (g(c)?, g(d)?);
    for _ in 0..GOLDEN_STEPS {
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - ratio * (b - a);
            gc = g(c)?;
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + ratio * (b - a);
            gd = g(d)?;
        }
    }
    top = top.max(gc).max(gd);
    Ok(top)
}

/// `(1+s)G + (1+1/s)M`.
fn split_norm_matrix(g: &CsrMatrix, m: &CsrMatrix, s: f64) -> CsrMatrix {
    g.add_scaled(1.0 + s, m, 1.0 + 1.0 / s)
}

/// Coercivity constant `C_D`.
pub fn compute_cd(gd: &GradientDiscretisation) -> Result<f64> {
    let m = assemble_mass(gd);
    let g = assemble_gradient_gram(gd);
    if !gd.bc.is_neumann() {
        return Ok(max_pencil_eigenvalue(&m, &g, false)?.sqrt());
    }
    // The Π part of the Neumann maximum is 1, attained by constants.
    let t = assemble_trace_mass(gd);
    let trace = scan_max(|log_s| {
        let k = split_norm_matrix(&g, &m, 10f64.powf(log_s));
        max_pencil_eigenvalue(&t, &k, false)
    })?
    .sqrt();
    // Constants give the exact lower bound sqrt(|∂Ω| / |Ω|).
    let ones = vec![1.0; m.nrows];
    let constant = (quadratic(&t, &ones) / quadratic(&m, &ones)).sqrt();
    Ok(trace.max(constant).max(1.0))
}

fn quadratic(a: &CsrMatrix, x: &[f64]) -> f64 {
    a.matvec(x).iter().zip(x).map(|(p, q)| p * q).sum()
}

/// Calls `visit(cell, piece, point, weight)` for every quadrature point of
/// every gradient piece.
fn for_each_piece_point(
    gd: &GradientDiscretisation,
    rule: &QuadratureRule,
    mut visit: impl FnMut(usize, usize, Point, f64),
) {
    for (k, cell) in gd.cells.iter().enumerate() {
        for (j, piece) in cell.pieces.iter().enumerate() {
            for (p, w) in rule.on_triangle(&piece.triangle) {
                visit(k, j, p, w);
            }
        }
    }
}

/// Residual `r_i = ∫ Π_D φ_i div φ + ∇_D φ_i·φ (− ∫_∂Ω T_D φ_i φ·n)` on the free DOFs.
fn limit_conformity_residual(gd: &GradientDiscretisation, flux: &VectorField) -> Vec<f64> {
    let rule = QuadratureRule::new(RuleName::Oracle);
    let mut r = vec![0.0; gd.dofs.n_free()];
    for_each_piece_point(gd, &rule, |k, j, p, w| {
        let cell = &gd.cells[k];
        let div = (flux.divergence)(p);
        let phi = (flux.value)(p);
        for (i, &d) in cell.dofs.iter().enumerate() {
            if let Some(fi) = gd.dofs.free_index(d) {
                let g = cell.pieces[j].gradients[i];
                r[fi] += w * (cell.values[i].eval(p) * div + g[0] * phi[0] + g[1] * phi[1]);
            }
        }
    });
    if gd.bc.is_neumann() {
        for t in &gd.traces {
            let face = &gd.mesh.faces[t.face];
            let n = outward_normal(gd, t.face);
            let (a, b) = (
                gd.mesh.vertices[face.vertices[0]],
                gd.mesh.vertices[face.vertices[1]],
            );
            for (i, &d) in t.dofs.iter().enumerate() {
                if let Some(fi) = gd.dofs.free_index(d) {
                    r[fi] -= integrate_segment(a, b, SEGMENT_POINTS, |p| {
                        let phi = (flux.value)(p);
                        t.values[i].eval(p) * (phi[0] * n[0] + phi[1] * n[1])
                    });
                }
            }
        }
    }
    r
}

fn outward_normal(gd: &GradientDiscretisation, face: usize) -> Point {
    let owner = gd.mesh.faces[face].cells[0];
    gd.mesh.cells[owner]
        .faces
        .iter()
        .find(|cf| cf.face == face)
        .map(|cf| cf.normal)
        .expect("boundary face belongs to its owner")
}

/// Limit-conformity defect `W_D(φ)`, exact up to the linear-solve tolerance
/// and the (degree ≥ 10) quadrature of the residual.
pub fn compute_wd(gd: &GradientDiscretisation, flux: &VectorField) -> Result<f64> {
    let r = limit_conformity_residual(gd, flux);
    if r.is_empty() {
        return Ok(0.0);
    }
    let g = assemble_gradient_gram(gd);
    let dual = |k: CsrMatrix| -> Result<f64> {
        let z = SparseSolver::spd(k)?.solve(&r)?;
        Ok(r.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>().max(0.0))
    };
    if !gd.bc.is_neumann() {
        return Ok(dual(g)?.sqrt());
    }
    let m = assemble_mass(gd);
    Ok(scan_max(|log_s| dual(split_norm_matrix(&g, &m, 10f64.powf(log_s))))?.sqrt())
}

/// Upper bound of the consistency error `S_D(φ)`.
///
/// Solves the least-squares problem
/// `min_w ‖Π_D w − φ‖² + ‖∇_D w − ∇φ‖² (+ ‖T_D w − φ‖²_∂)` and returns the
/// sum of the (unsquared) norms at its minimiser. Since the minimiser of a
/// sum of squares minimises the sum of norms up to a factor `√2` (`√3` with
/// a trace term), this bounds `S_D(φ)` from above within that factor.
pub fn compute_sd_upper(gd: &GradientDiscretisation, phi: &ScalarField) -> Result<f64> {
    let rule = QuadratureRule::new(RuleName::Oracle);
    let n = gd.dofs.n_free();
    let mut rhs = vec![0.0; n];
    for_each_piece_point(gd, &rule, |k, j, p, w| {
        let cell = &gd.cells[k];
        let v = (phi.value)(p);
        let dv = (phi.gradient)(p);
        for (i, &d) in cell.dofs.iter().enumerate() {
            if let Some(fi) = gd.dofs.free_index(d) {
                let g = cell.pieces[j].gradients[i];
                rhs[fi] += w * (cell.values[i].eval(p) * v + g[0] * dv[0] + g[1] * dv[1]);
            }
        }
    });
    let mut normal = assemble_mass(gd).add_scaled(1.0, &assemble_gradient_gram(gd), 1.0);
    if gd.bc.is_neumann() {
        for t in &gd.traces {
            let face = &gd.mesh.faces[t.face];
            let (a, b) = (
                gd.mesh.vertices[face.vertices[0]],
                gd.mesh.vertices[face.vertices[1]],
            );
            for (i, &d) in t.dofs.iter().enumerate() {
                if let Some(fi) = gd.dofs.free_index(d) {
                    rhs[fi] += integrate_segment(a, b, SEGMENT_POINTS, |p| {
                        t.values[i].eval(p) * (phi.value)(p)
                    });
                }
            }
        }
        normal = normal.add_scaled(1.0, &assemble_trace_mass(gd), 1.0);
    }
    let w = if n == 0 {
        Vec::new()
    } else {
        SparseSolver::spd(normal)?.solve(&rhs)?
    };
    let w = gd.dofs.expand(&w);

    let (mut value_err, mut grad_err) = (0.0, 0.0);
    for_each_piece_point(gd, &rule, |k, j, p, q| {
        value_err += q * (gd.value(k, p, &w) - (phi.value)(p)).powi(2);
        let g = gd.gradient(k, j, &w);
        let dv = (phi.gradient)(p);
        grad_err += q * ((g[0] - dv[0]).powi(2) + (g[1] - dv[1]).powi(2));
    });
    let mut total = value_err.sqrt() + grad_err.sqrt();
    if gd.bc.is_neumann() {
        let mut trace_err = 0.0;
        for (i, t) in gd.traces.iter().enumerate() {
            let face = &gd.mesh.faces[t.face];
            let (a, b) = (
                gd.mesh.vertices[face.vertices[0]],
                gd.mesh.vertices[face.vertices[1]],
            );
            trace_err += integrate_segment(a, b, SEGMENT_POINTS, |p| {
                (gd.trace(i, p, &w) - (phi.value)(p)).powi(2)
            });
        }
        total += trace_err.sqrt();
    }
    Ok(total)
}
