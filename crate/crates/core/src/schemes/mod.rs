//! Concrete gradient discretisations.

use std::sync::Arc;

use crate::error::Result;
use crate::gd::{BoundaryCondition, GradientDiscretisation, SchemeKind};
use crate::mesh::PolytopalMesh;

mod fe;
mod hmm;

pub use fe::{make_conforming_p1, make_ncp1};
pub use hmm::{make_hmm, HMM_STABILIZATION};

/// Builds the gradient discretisation of the requested kind.
pub fn build(
    kind: SchemeKind,
    mesh: Arc<PolytopalMesh>,
    bc: BoundaryCondition,
) -> Result<GradientDiscretisation> {
    match kind {
        SchemeKind::ConformingP1 => make_conforming_p1(mesh, bc),
        SchemeKind::NonConformingP1 => make_ncp1(mesh, bc),
        SchemeKind::Hmm => make_hmm(mesh, bc),
    }
}

#[cfg(test)]
mod tests;
