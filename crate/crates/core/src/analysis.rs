//! Relative errors, experimental orders of convergence and CSV reports.
//!
//! Quadrature per quantity:
//!
//! | quantity                | `w_T = w` (P1, CR)        | `w_T = w(x_K)` (HMM)        |
//! |-------------------------|---------------------------|-----------------------------|
//! | `‖Π_D y − ȳ_τ‖`         | 7-point Gauss per cell    | `Σ_K |K| (y_K − ȳ(x_K))²`   |
//! | `‖∇_D y − ∇ȳ‖`          | midpoint per cell         | midpoint per `D_{K,σ}`      |
//! | `‖ū_h − ū‖`, `‖ū‖`      | 3-point Gauss per cell    | 3-point Gauss per cell      |
//! | `‖ũ_h − ũ‖`             | 7-point Gauss per cell    | midpoint per cell           |
//!
//! Denominators are `‖ȳ_τ‖`, `‖∇ȳ‖` (same rules) and `‖ū‖`.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::control::{KktSolution, PostprocessedControls};
use crate::error::{Error, Result};
use crate::gd::{GradientDiscretisation, SamplingPolicy};
use crate::mesh::Point;
use crate::quadrature::{QuadratureRule, RuleName};

/// Relative errors of one solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub h: f64,
    pub dofs: usize,
    pub err_y: f64,
    pub err_grad_y: f64,
    pub err_p: f64,
    pub err_grad_p: f64,
    pub err_u: f64,
    pub err_u_tilde: f64,
    pub pdas_iters: usize,
}

impl ErrorReport {
    /// The six error columns, in CSV order.
    pub fn errors(&self) -> [f64; 6] {
        [
            self.err_y,
            self.err_grad_y,
            self.err_p,
            self.err_grad_p,
            self.err_u,
            self.err_u_tilde,
        ]
    }
}

/// Exact data needed to measure errors.
pub struct ExactSolution<'a> {
    pub y: &'a dyn Fn(Point) -> f64,
    pub grad_y: &'a dyn Fn(Point) -> Point,
    pub p: &'a dyn Fn(Point) -> f64,
    pub grad_p: &'a dyn Fn(Point) -> Point,
    pub u: &'a dyn Fn(Point) -> f64,
}

/// `(‖Π_D v − w_τ‖, ‖w_τ‖)`.
pub fn value_error(gd: &GradientDiscretisation, v: &[f64], w: &dyn Fn(Point) -> f64) -> (f64, f64) {
    let (mut num, mut den) = (0.0, 0.0);
    match gd.policy {
        SamplingPolicy::Identity => {
            let rule = QuadratureRule::new(RuleName::Gauss7);
            for k in 0..gd.cells.len() {
                for piece in &gd.cells[k].pieces {
                    for (p, q) in rule.on_triangle(&piece.triangle) {
                        let exact = w(p);
                        num += q * (gd.value(k, p, v) - exact).powi(2);
                        den += q * exact * exact;
                    }
                }
            }
        }
        SamplingPolicy::CellPoint => {
            for (k, cell) in gd.mesh.cells.iter().enumerate() {
                let exact = w(cell.point);
                num += cell.area * (gd.value(k, cell.point, v) - exact).powi(2);
                den += cell.area * exact * exact;
            }
        }
    }
    (num.sqrt(), den.sqrt())
}

/// `(‖∇_D v − ∇w‖, ‖∇w‖)` with the midpoint rule on every gradient piece.
pub fn gradient_error(
    gd: &GradientDiscretisation,
    v: &[f64],
    grad: &dyn Fn(Point) -> Point,
) -> (f64, f64) {
    let (mut num, mut den) = (0.0, 0.0);
    for (k, cell) in gd.cells.iter().enumerate() {
        for (j, piece) in cell.pieces.iter().enumerate() {
            let exact = grad(piece.centroid());
            let g = gd.gradient(k, j, v);
            num += piece.area * ((g[0] - exact[0]).powi(2) + (g[1] - exact[1]).powi(2));
            den += piece.area * (exact[0] * exact[0] + exact[1] * exact[1]);
        }
    }
    (num.sqrt(), den.sqrt())
}

/// `(‖u_h − ū‖, ‖ū‖)` for a cellwise-constant `u_h`, 3-point Gauss per cell.
pub fn control_error(
    gd: &GradientDiscretisation,
    cells: &[f64],
    u: &dyn Fn(Point) -> f64,
) -> (f64, f64) {
    let rule = QuadratureRule::new(RuleName::Gauss3);
    let (mut num, mut den) = (0.0, 0.0);
    for (k, &uk) in cells.iter().enumerate() {
        for t in gd.mesh.cell_triangles(k) {
            for (p, q) in rule.on_triangle(&t) {
                let exact = u(p);
                num += q * (uk - exact).powi(2);
                den += q * exact * exact;
            }
        }
    }
    (num.sqrt(), den.sqrt())
}

fn ratio(pair: (f64, f64)) -> Result<f64> {
    if pair.1 == 0.0 {
        return Err(Error::InvalidProblem(
            "vanishing norm of the exact solution".into(),
        ));
    }
    Ok(pair.0 / pair.1)
}

pub fn compute_errors(
    gd: &GradientDiscretisation,
    solution: &KktSolution,
    post: &PostprocessedControls,
    exact: &ExactSolution,
) -> Result<ErrorReport> {
    let (u_err, u_norm) = control_error(gd, &solution.u.cells, exact.u);
    Ok(ErrorReport {
        h: gd.mesh.h(),
        dofs: gd.n_dofs(),
        err_y: ratio(value_error(gd, &solution.y, exact.y))?,
        err_grad_y: ratio(gradient_error(gd, &solution.y, exact.grad_y))?,
        err_p: ratio(value_error(gd, &solution.p, exact.p))?,
        err_grad_p: ratio(gradient_error(gd, &solution.p, exact.grad_p))?,
        err_u: ratio((u_err, u_norm))?,
        err_u_tilde: ratio((post.l2_difference(), u_norm))?,
        pdas_iters: solution.iterations,
    })
}

/// `log(e₁/e₂) / log(h₁/h₂)`.
pub fn eoc(e1: f64, e2: f64, h1: f64, h2: f64) -> f64 {
    (e1 / e2).ln() / (h1 / h2).ln()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyRow {
    pub level: usize,
    pub report: ErrorReport,
}

/// Results of a sequence of mesh levels; failed levels are kept as messages.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceStudy {
    pub rows: Vec<StudyRow>,
    pub failures: Vec<(usize, String)>,
}

impl ConvergenceStudy {
    pub fn push(&mut self, level: usize, report: ErrorReport) {
        self.rows.push(StudyRow { level, report });
    }
}

/// EOC of each error column between consecutive successful rows.
pub fn compute_eoc(study: &ConvergenceStudy) -> Result<Vec<[f64; 6]>> {
    if study.rows.len() < 2 {
        return Err(Error::TooFewLevels(study.rows.len()));
    }
    Ok(study
        .rows
        .windows(2)
        .map(|w| {
            let (a, b) = (&w[0].report, &w[1].report);
            let (ea, eb) = (a.errors(), b.errors());
            std::array::from_fn(|i| eoc(ea[i], eb[i], a.h, b.h))
        })
        .collect())
}

pub const CSV_HEADER: &str = "level,h,dofs,err_y,err_grad_y,err_p,err_grad_p,err_u,err_u_tilde,\
eoc_y,eoc_grad_y,eoc_p,eoc_grad_p,eoc_u,eoc_u_tilde,pdas_iters";

pub const DIAGNOSTICS_HEADER: &str = "level,h,c_d,w_d_y,s_d_y,s_d_p";

/// Scientific notation with 10 significant digits.
pub fn format_number(x: f64) -> String {
    format!("{x:.9e}")
}

/// Renders a study; failed levels become `# level N failed: ...` lines in
/// level order.
pub fn render_csv(study: &ConvergenceStudy) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    let mut lines: Vec<(usize, String)> = Vec::new();
    for (i, row) in study.rows.iter().enumerate() {
        let r = &row.report;
        let mut line = format!("{},{},{}", row.level, format_number(r.h), r.dofs);
        for e in r.errors() {
            let _ = write!(line, ",{}", format_number(e));
        }
        if i == 0 {
            line.push_str(",,,,,,");
        } else {
            let prev = &study.rows[i - 1].report;
            let (ea, eb) = (prev.errors(), r.errors());
            for c in 0..6 {
                let _ = write!(line, ",{}", format_number(eoc(ea[c], eb[c], prev.h, r.h)));
            }
        }
        let _ = write!(line, ",{}", r.pdas_iters);
        lines.push((row.level, line));
    }
    for (level, msg) in &study.failures {
        lines.push((
            *level,
            format!("# level {level} failed: {}", msg.replace('\n', " ")),
        ));
    }
    lines.sort_by_key(|(level, _)| *level);
    for (_, line) in lines {
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn emit_csv(study: &ConvergenceStudy, path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(render_csv(study).as_bytes())?;
    Ok(())
}

/// Per-level quality measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRow {
    pub level: usize,
    pub h: f64,
    pub c_d: f64,
    pub w_d_y: f64,
    pub s_d_y: f64,
    pub s_d_p: f64,
}

pub fn render_diagnostics_csv(rows: &[DiagnosticsRow], failures: &[(usize, String)]) -> String {
    let mut lines: Vec<(usize, String)> = rows
        .iter()
        .map(|r| {
            let line = format!(
                "{},{},{},{},{},{}",
                r.level,
                format_number(r.h),
                format_number(r.c_d),
                format_number(r.w_d_y),
                format_number(r.s_d_y),
                format_number(r.s_d_p)
            );
            (r.level, line)
        })
        .collect();
    for (level, msg) in failures {
        lines.push((
            *level,
            format!("# level {level} failed: {}", msg.replace('\n', " ")),
        ));
    }
    lines.sort_by_key(|(level, _)| *level);
    let mut out = String::from(DIAGNOSTICS_HEADER);
    out.push('\n');
    for (_, line) in lines {
        out.push_str(&line);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::control::{postprocess, solve_kkt_pdas, PdasConfig};
    use crate::gd::BoundaryCondition;
    use crate::mesh::{cartesian_mesh, unit_square_triangulation};
    use crate::schemes::{make_conforming_p1, make_hmm};

    fn report(h: f64, e: f64) -> ErrorReport {
        ErrorReport {
            h,
            dofs: 10,
            err_y: e,
            err_grad_y: e,
            err_p: e,
            err_grad_p: e,
            err_u: e,
            err_u_tilde: e,
            pdas_iters: 2,
        }
    }

    #[test]
    fn eoc_examples() {
        assert!((eoc(0.1, 0.025, 0.1, 0.05) - 2.0).abs() < 1e-12);
        assert!((eoc(0.2, 0.1, 0.1, 0.05) - 1.0).abs() < 1e-12);
        assert_eq!(eoc(0.3, 0.3, 0.1, 0.05), 0.0);
    }

    #[test]
    fn eoc_of_synthetic_power_law() {
        let mut study = ConvergenceStudy::default();
        for l in 0..5 {
            let h = 0.5f64.powi(l);
            study.push(l as usize, report(h, 3.0 * h.powf(1.7)));
        }
        for row in compute_eoc(&study).unwrap() {
            for v in row {
                assert!((v - 1.7).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn eoc_needs_two_levels() {
        let mut study = ConvergenceStudy::default();
        study.push(2, report(0.25, 0.1));
        assert!(matches!(compute_eoc(&study), Err(Error::TooFewLevels(1))));
    }

    #[test]
    fn csv_layout() {
        let mut study = ConvergenceStudy::default();
        study.push(2, report(0.25, 0.1));
        let csv = render_csv(&study);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 2);
        let cells: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(cells.len(), 16);
        assert!(cells[9..15].iter().all(|c| c.is_empty()));

        study.push(3, report(0.125, 0.025));
        study.failures.push((4, "boom".into()));
        let csv = render_csv(&study);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        let cells: Vec<&str> = lines[2].split(',').collect();
        assert_eq!(cells.len(), 16);
        assert_eq!(cells[9].parse::<f64>().unwrap(), 2.0);
        assert_eq!(cells[3].parse::<f64>().unwrap(), 0.025);
        assert_eq!(lines[3], "# level 4 failed: boom");
    }

    #[test]
    fn interpolants_have_zero_error() {
        let affine = |p: Point| 1.0 + p[0] - 2.0 * p[1];
        let grad = |_: Point| [1.0, -2.0];
        let mesh = Arc::new(unit_square_triangulation(4).unwrap());
        let gd = make_conforming_p1(mesh, BoundaryCondition::Neumann { c0: 1.0 }).unwrap();
        let v = gd.interpolate(affine);
        assert!(gradient_error(&gd, &v, &grad).0 < 1e-13);
        assert!(value_error(&gd, &v, &affine).0 < 1e-13);

        let sine = |p: Point| (3.0 * p[0]).sin() * p[1];
        let mesh = Arc::new(cartesian_mesh(4, 0.2).unwrap());
        let gd = make_hmm(mesh, BoundaryCondition::Dirichlet).unwrap();
        let v = gd.interpolate(sine);
        assert_eq!(value_error(&gd, &v, &sine).0, 0.0);
    }

    #[test]
    fn control_error_of_exact_cell_values() {
        let mesh = Arc::new(unit_square_triangulation(2).unwrap());
        let gd = make_conforming_p1(mesh, BoundaryCondition::Dirichlet).unwrap();
        let (e, n) = control_error(&gd, &[2.0; 8], &|_| 2.0);
        assert_eq!(e, 0.0);
        assert!((n - 2.0).abs() < 1e-14);
    }

    #[test]
    fn errors_are_invariant_under_coordinate_scaling() {
        // Doubling every coordinate is exact in floating point, so the
        // relative errors must agree bit for bit.
        use crate::mesh::PolytopalMesh;
        let base = unit_square_triangulation(4).unwrap();
        let loops: Vec<Vec<usize>> = base.cells.iter().map(|c| c.vertices.clone()).collect();
        let scaled_vertices: Vec<Point> = base
            .vertices
            .iter()
            .map(|v| [2.0 * v[0], 2.0 * v[1]])
            .collect();
        let scaled =
            PolytopalMesh::from_cells(scaled_vertices, loops, base.kind, base.point_rule).unwrap();
        let w = |p: Point| (p[0] * 3.0).sin() + p[1] * p[1];
        let grad = |p: Point| [3.0 * (p[0] * 3.0).cos(), 2.0 * p[1]];
        let w2 = move |p: Point| w([p[0] / 2.0, p[1] / 2.0]);
        let grad2 = move |p: Point| {
            let g = grad([p[0] / 2.0, p[1] / 2.0]);
            [g[0] / 2.0, g[1] / 2.0]
        };
        let bc = BoundaryCondition::Neumann { c0: 1.0 };
        for (a, b) in [
            (
                make_conforming_p1(Arc::new(base.clone()), bc).unwrap(),
                make_conforming_p1(Arc::new(scaled.clone()), bc).unwrap(),
            ),
            (
                make_hmm(Arc::new(base.clone()), bc).unwrap(),
                make_hmm(Arc::new(scaled.clone()), bc).unwrap(),
            ),
        ] {
            let va: Vec<f64> = (0..a.n_dofs()).map(|i| (i as f64 * 0.37).cos()).collect();
            let ra = value_error(&a, &va, &w);
            let rb = value_error(&b, &va, &w2);
            assert_eq!(ra.0 / ra.1, rb.0 / rb.1);
            let ga = gradient_error(&a, &va, &grad);
            let gb = gradient_error(&b, &va, &grad2);
            assert_eq!(ga.0 / ga.1, gb.0 / gb.1);
        }
    }

    #[test]
    fn example1_errors_decrease() {
        let case = crate::cases::example1_dirichlet();
        let problem = case.problem();
        let exact = ExactSolution {
            y: case.y.as_ref(),
            grad_y: case.grad_y.as_ref(),
            p: case.p.as_ref(),
            grad_p: case.grad_p.as_ref(),
            u: case.u.as_ref(),
        };
        let mut previous: Option<ErrorReport> = None;
        for m in [4, 8, 16] {
            let gd =
                make_conforming_p1(Arc::new(unit_square_triangulation(m).unwrap()), problem.bc)
                    .unwrap();
            let sol = solve_kkt_pdas(&problem, &gd, PdasConfig::default()).unwrap();
            let pp = postprocess(&problem, &gd, &sol, case.p.as_ref());
            let r = compute_errors(&gd, &sol, &pp, &exact).unwrap();
            if let Some(prev) = previous {
                for (a, b) in prev.errors().iter().zip(r.errors()) {
                    assert!(b < *a);
                }
            }
            previous = Some(r);
        }
    }
}
