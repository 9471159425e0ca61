//! Mesh-level sweeps: solve, measure and collect one row per level.

use std::sync::Arc;

use rayon::prelude::*;

use crate::analysis::{
    compute_errors, ConvergenceStudy, DiagnosticsRow, ErrorReport, ExactSolution,
};
use crate::cases::{CaseId, Domain, TestCase};
use crate::control::{postprocess, solve_kkt_pdas, PdasConfig};
use crate::error::{Error, Result};
use crate::gd::{
    compute_cd, compute_sd_upper, compute_wd, GradientDiscretisation, ScalarField, SchemeKind,
    VectorField,
};
use crate::mesh::{cartesian_mesh, lshape_triangulation, unit_square_triangulation, PolytopalMesh};
use crate::schemes::build;

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "GDMOPT_THREADS";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyConfig {
    pub case: CaseId,
    pub scheme: SchemeKind,
    pub min_level: usize,
    pub max_level: usize,
    /// Cell-point shift of a Cartesian mesh; only meaningful for HMM.
    pub shift: Option<f64>,
    pub pdas: PdasConfig,
}

impl StudyConfig {
    pub fn new(case: CaseId, scheme: SchemeKind, min_level: usize, max_level: usize) -> Self {
        Self {
            case,
            scheme,
            min_level,
            max_level,
            shift: None,
            pdas: PdasConfig::default(),
        }
    }

    pub fn levels(&self) -> std::ops::RangeInclusive<usize> {
        self.min_level..=self.max_level
    }

    fn validate(&self) -> Result<()> {
        if self.min_level > self.max_level {
            return Err(Error::InvalidProblem(format!(
                "empty level range {}..{}",
                self.min_level, self.max_level
            )));
        }
        if let Some(s) = self.shift {
            if self.scheme != SchemeKind::Hmm {
                return Err(Error::InvalidProblem(
                    "--shift requires the hmm scheme".into(),
                ));
            }
            if self.case == CaseId::Example2LShape {
                return Err(Error::InvalidProblem(
                    "--shift requires a unit-square case".into(),
                ));
            }
            if !(0.0..0.5).contains(&s) {
                return Err(Error::InvalidProblem(format!("shift {s} outside [0, 0.5)")));
            }
        }
        Ok(())
    }
}

/// Mesh of level `ℓ`: the coarsest mesh of the domain refined `ℓ` times.
///
/// With a shift the coarsest mesh is the single Cartesian cell with the
/// shifted cell point; otherwise the two-triangle square or the
/// six-triangle L-shape.
pub fn level_mesh(domain: Domain, level: usize, shift: Option<f64>) -> Result<PolytopalMesh> {
    let base = match (domain, shift) {
        (Domain::UnitSquare, None) => unit_square_triangulation(1)?,
        (Domain::UnitSquare, Some(s)) => cartesian_mesh(1, s)?,
        (Domain::LShape, None) => lshape_triangulation(1)?,
        (Domain::LShape, Some(_)) => {
            return Err(Error::InvalidProblem(
                "shifted meshes exist only on the unit square".into(),
            ))
        }
    };
    Ok(base.refined(level)?)
}

fn discretise(
    config: &StudyConfig,
    case: &TestCase,
    level: usize,
) -> Result<GradientDiscretisation> {
    let mesh = level_mesh(case.domain, level, config.shift)?;
    build(config.scheme, Arc::new(mesh), case.bc)
}

pub fn run_level(config: &StudyConfig, case: &TestCase, level: usize) -> Result<ErrorReport> {
    let gd = discretise(config, case, level)?;
    let problem = case.problem();
    let solution = solve_kkt_pdas(&problem, &gd, config.pdas)?;
    let post = postprocess(&problem, &gd, &solution, case.p.as_ref());
    let exact = ExactSolution {
        y: case.y.as_ref(),
        grad_y: case.grad_y.as_ref(),
        p: case.p.as_ref(),
        grad_p: case.grad_p.as_ref(),
        u: case.u.as_ref(),
    };
    compute_errors(&gd, &solution, &post, &exact)
}

pub fn diagnose_level(
    config: &StudyConfig,
    case: &TestCase,
    level: usize,
) -> Result<DiagnosticsRow> {
    let gd = discretise(config, case, level)?;
    let flux = VectorField {
        value: case.grad_y.as_ref(),
        divergence: case.lap_y.as_ref(),
    };
    let y = ScalarField {
        value: case.y.as_ref(),
        gradient: case.grad_y.as_ref(),
    };
    let p = ScalarField {
        value: case.p.as_ref(),
        gradient: case.grad_p.as_ref(),
    };
    Ok(DiagnosticsRow {
        level,
        h: gd.mesh.h(),
        c_d: compute_cd(&gd)?,
        w_d_y: compute_wd(&gd, &flux)?,
        s_d_y: compute_sd_upper(&gd, &y)?,
        s_d_p: compute_sd_upper(&gd, &p)?,
    })
}

/// Worker count from [`THREADS_ENV`]; unset or invalid means rayon's default.
pub fn thread_limit() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()?
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
}

/// Runs `job` for every level on a pool capped by [`THREADS_ENV`]; results
/// come back in level order.
fn per_level<T: Send>(
    config: &StudyConfig,
    job: impl Fn(usize) -> Result<T> + Sync,
) -> Result<Vec<(usize, Result<T>)>> {
    config.validate()?;
    let levels: Vec<usize> = config.levels().collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_limit() {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidProblem(format!("thread pool: {e}")))?;
    Ok(pool.install(|| levels.par_iter().map(|&l| (l, job(l))).collect()))
}

/// Solves every level; a failing level is recorded, not propagated.
pub fn run_study(config: &StudyConfig) -> Result<ConvergenceStudy> {
    let case = config.case.build();
    let mut study = ConvergenceStudy::default();
    for (level, outcome) in per_level(config, |l| run_level(config, &case, l))? {
        match outcome {
            Ok(report) => study.push(level, report),
            Err(e) => study.failures.push((level, e.to_string())),
        }
    }
    Ok(study)
}

/// Quality measures of every level, with failures kept separately.
pub fn run_diagnostics(
    config: &StudyConfig,
) -> Result<(Vec<DiagnosticsRow>, Vec<(usize, String)>)> {
    let case = config.case.build();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (level, outcome) in per_level(config, |l| diagnose_level(config, &case, l))? {
        match outcome {
            Ok(row) => rows.push(row),
            Err(e) => failures.push((level, e.to_string())),
        }
    }
    Ok((rows, failures))
}
