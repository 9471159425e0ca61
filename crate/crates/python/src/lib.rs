//! Python access to convergence studies and diagnostics.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use gdmopt::analysis::{eoc as eoc_of, render_csv, render_diagnostics_csv};
use gdmopt::cases::CaseId;
use gdmopt::control::PdasConfig;
use gdmopt::gd::SchemeKind;
use gdmopt::study::{run_diagnostics, run_study as study, StudyConfig};

const SCHEMES: [SchemeKind; 3] = [
    SchemeKind::ConformingP1,
    SchemeKind::NonConformingP1,
    SchemeKind::Hmm,
];

fn config(
    case: &str,
    scheme: &str,
    levels: (usize, usize),
    shift: Option<f64>,
    pdas_max_iter: usize,
    pdas_tol: f64,
) -> PyResult<StudyConfig> {
    let case = CaseId::from_name(case)
        .ok_or_else(|| PyValueError::new_err(format!("unknown case `{case}`")))?;
    let scheme = SCHEMES
        .into_iter()
        .find(|s| s.name() == scheme)
        .ok_or_else(|| PyValueError::new_err(format!("unknown scheme `{scheme}`")))?;
    let mut c = StudyConfig::new(case, scheme, levels.0, levels.1);
    c.shift = shift;
    c.pdas = PdasConfig {
        max_iter: pdas_max_iter,
        tol: pdas_tol,
    };
    Ok(c)
}

fn to_py_err(e: gdmopt::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Solves every level; returns `{"rows": [...], "failures": [(level, msg)], "csv": str}`.
#[pyfunction]
#[pyo3(signature = (case, scheme, levels = (2, 6), shift = None, pdas_max_iter = 100, pdas_tol = 1e-10))]
fn run_study<'py>(
    py: Python<'py>,
    case: &str,
    scheme: &str,
    levels: (usize, usize),
    shift: Option<f64>,
    pdas_max_iter: usize,
    pdas_tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let c = config(case, scheme, levels, shift, pdas_max_iter, pdas_tol)?;
    let result = py.detach(|| study(&c)).map_err(to_py_err)?;
    let rows = PyList::empty(py);
    for row in &result.rows {
        let r = &row.report;
        let d = PyDict::new(py);
        d.set_item("level", row.level)?;
        d.set_item("h", r.h)?;
        d.set_item("dofs", r.dofs)?;
        d.set_item("err_y", r.err_y)?;
        d.set_item("err_grad_y", r.err_grad_y)?;
        d.set_item("err_p", r.err_p)?;
        d.set_item("err_grad_p", r.err_grad_p)?;
        d.set_item("err_u", r.err_u)?;
        d.set_item("err_u_tilde", r.err_u_tilde)?;
        d.set_item("pdas_iters", r.pdas_iters)?;
        rows.append(d)?;
    }
    let out = PyDict::new(py);
    out.set_item("rows", rows)?;
    out.set_item("failures", result.failures.clone())?;
    out.set_item("csv", render_csv(&result))?;
    Ok(out)
}

/// Per-level `C_D`, `W_D(∇ȳ)` and `S_D` bounds for `ȳ` and `p̄`.
#[pyfunction]
#[pyo3(signature = (case, scheme, levels = (2, 5), shift = None))]
fn diagnose<'py>(
    py: Python<'py>,
    case: &str,
    scheme: &str,
    levels: (usize, usize),
    shift: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let c = config(case, scheme, levels, shift, 100, 1e-10)?;
    let (rows, failures) = py.detach(|| run_diagnostics(&c)).map_err(to_py_err)?;
    let list = PyList::empty(py);
    for r in &rows {
        let d = PyDict::new(py);
        d.set_item("level", r.level)?;
        d.set_item("h", r.h)?;
        d.set_item("c_d", r.c_d)?;
        d.set_item("w_d_y", r.w_d_y)?;
        d.set_item("s_d_y", r.s_d_y)?;
        d.set_item("s_d_p", r.s_d_p)?;
        list.append(d)?;
    }
    let out = PyDict::new(py);
    out.set_item("rows", list)?;
    out.set_item("csv", render_diagnostics_csv(&rows, &failures))?;
    out.set_item("failures", failures)?;
    Ok(out)
}

/// EOCs between consecutive entries of `errors` measured at mesh sizes `h`.
#[pyfunction]
fn eoc(errors: Vec<f64>, h: Vec<f64>) -> PyResult<Vec<f64>> {
    if errors.len() != h.len() || errors.len() < 2 {
        return Err(PyValueError::new_err(
            "need two or more (error, h) pairs of equal length",
        ));
    }
    Ok((1..errors.len())
        .map(|i| eoc_of(errors[i - 1], errors[i], h[i - 1], h[i]))
        .collect())
}

#[pymodule]
fn pygdmopt(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(run_study, m)?)?;
    m.add_function(wrap_pyfunction!(diagnose, m)?)?;
    m.add_function(wrap_pyfunction!(eoc, m)?)?;
    m.add(
        "CASES",
        CaseId::ALL.iter().map(|c| c.name()).collect::<Vec<_>>(),
    )?;
    m.add(
        "SCHEMES",
        SCHEMES.iter().map(|s| s.name()).collect::<Vec<_>>(),
    )?;
    Ok(())
}
