use thiserror::Error;

use crate::control::KktSolution;
use crate::mesh::MeshError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("{scheme} requires a simplicial mesh")]
    NonSimplicial { scheme: &'static str },
    #[error("cell {cell} has d_K,σ = {distance:e} ≤ 0 on face {face}")]
    NotStarShaped {
        cell: usize,
        face: usize,
        distance: f64,
    },
    #[error("Neumann problems need a reaction coefficient c0 > 0, got {0}")]
    NonPositiveReaction(f64),
    #[error("boundary data supplied for a Dirichlet problem")]
    BoundaryTermUnderDirichlet,
    #[error("singular or indefinite system: {0}")]
    Singular(String),
    #[error("linear solve stalled at relative residual {residual:e}")]
    Inaccurate { residual: f64 },
    #[error("invalid box [{a}, {b}]")]
    InvalidBounds { a: f64, b: f64 },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("active-set iteration did not reach a fixpoint within {iterations} iterations")]
    NonConvergence {
        iterations: usize,
        last: Box<KktSolution>,
    },
    #[error("reference solver is limited to {limit} unknowns, got {size}")]
    TooLarge { size: usize, limit: usize },
    #[error("at least two levels are needed, got {0}")]
    TooFewLevels(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
