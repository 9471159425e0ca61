//! Hybrid mimetic mixed (HMM) gradient discretisation.
//!
//! Unknowns are one value per cell followed by one value per face.
//! On the half-diamond `D_{K,σ}` (convex hull of `x_K` and `σ`):
//!
//! ```text
//! ∇_D v = ∇̄_K v + (√2 / d_{K,σ}) (v_σ − v_K − ∇̄_K v·(x̄_σ − x_K)) n_{K,σ}
//! ∇̄_K v = (1/|K|) Σ_σ |σ| v_σ n_{K,σ}
//! ```

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gd::{
    Affine, BoundaryCondition, CellReconstruction, DofLocation, DofSpace, GradientDiscretisation,
    GradientPiece, SamplingPolicy, SchemeKind, TraceReconstruction,
};
use crate::mesh::PolytopalMesh;

/// Stabilization factor `√n` for the two-dimensional meshes handled here.
pub const HMM_STABILIZATION: f64 = std::f64::consts::SQRT_2;

pub fn make_hmm(mesh: Arc<PolytopalMesh>, bc: BoundaryCondition) -> Result<GradientDiscretisation> {
    let nc = mesh.n_cells();
    let nf = mesh.n_faces();
    let mut cells = Vec::with_capacity(nc);
    for (k, cell) in mesh.cells.iter().enumerate() {
        let n = cell.faces.len();
        let mut dofs = Vec::with_capacity(n + 1);
        dofs.push(k);
        dofs.extend(cell.faces.iter().map(|cf| nc + cf.face));

        // ∇̄_K coefficient of each face unknown.
        let consistent: Vec<[f64; 2]> = cell
            .faces
            .iter()
            .map(|cf| {
                let s = mesh.faces[cf.face].length / cell.area;
                [s * cf.normal[0], s * cf.normal[1]]
            })
            .collect();

        let mut pieces = Vec::with_capacity(n);
        for (i, cf) in cell.faces.iter().enumerate() {
            if cf.distance <= 0.0 {
                return Err(Error::NotStarShaped {
                    cell: k,
                    face: cf.face,
                    distance: cf.distance,
                });
            }
            let face = &mesh.faces[cf.face];
            let a = mesh.vertices[cell.vertices[i]];
            let b = mesh.vertices[cell.vertices[(i + 1) % n]];
            let r = [
                face.midpoint[0] - cell.point[0],
                face.midpoint[1] - cell.point[1],
            ];
            let stab = HMM_STABILIZATION / cf.distance;

            let mut gradients = Vec::with_capacity(n + 1);
            // Cell unknown only enters the stabilization.
            gradients.push([-stab * cf.normal[0], -stab * cf.normal[1]]);
            for (j, g) in consistent.iter().enumerate() {
                let delta = if i == j { 1.0 } else { 0.0 };
                let residual = delta - (g[0] * r[0] + g[1] * r[1]);
                gradients.push([
                    g[0] + stab * residual * cf.normal[0],
                    g[1] + stab * residual * cf.normal[1],
                ]);
            }
            pieces.push(GradientPiece {
                triangle: [cell.point, a, b],
                area: 0.5 * face.length * cf.distance,
                gradients,
            });
        }
        let mut values = vec![Affine::default(); n + 1];
        values[0] = Affine::constant(1.0);
        cells.push(CellReconstruction {
            dofs,
            values,
            pieces,
        });
    }

    let mut locations: Vec<DofLocation> = (0..nc).map(DofLocation::Cell).collect();
    locations.extend((0..nf).map(DofLocation::Face));
    let mut points: Vec<_> = mesh.cells.iter().map(|c| c.point).collect();
    points.extend(mesh.faces.iter().map(|f| f.midpoint));
    let mut constrained = vec![false; nc];
    constrained.extend(
        mesh.faces
            .iter()
            .map(|f| f.is_boundary() && bc == BoundaryCondition::Dirichlet),
    );

    let traces = mesh
        .boundary_faces
        .iter()
        .map(|&f| TraceReconstruction {
            face: f,
            dofs: vec![nc + f],
            values: vec![Affine::constant(1.0)],
        })
        .collect();

    Ok(GradientDiscretisation {
        scheme: SchemeKind::Hmm,
        bc,
        mesh,
        dofs: DofSpace::new(locations, points, constrained),
        cells,
        traces,
        policy: SamplingPolicy::CellPoint,
    })
}
