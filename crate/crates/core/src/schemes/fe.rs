//! Conforming and Crouzeix–Raviart P1 elements on triangles.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gd::{
    Affine, BoundaryCondition, CellReconstruction, DofLocation, DofSpace, GradientDiscretisation,
    GradientPiece, SamplingPolicy, SchemeKind, TraceReconstruction,
};
use crate::mesh::{Point, PolytopalMesh};

/// Barycentric coordinates of a counter-clockwise triangle as affine maps.
fn barycentric(t: &[Point; 3]) -> ([Affine; 3], f64) {
    let two_area =
        (t[1][0] - t[0][0]) * (t[2][1] - t[0][1]) - (t[2][0] - t[0][0]) * (t[1][1] - t[0][1]);
    let mut out = [Affine::default(); 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        let gx = (t[j][1] - t[k][1]) / two_area;
        let gy = (t[k][0] - t[j][0]) / two_area;
        out[i] = Affine {
            c: 1.0 - gx * t[i][0] - gy * t[i][1],
            gx,
            gy,
        };
    }
    (out, 0.5 * two_area)
}

fn triangle(mesh: &PolytopalMesh, cell: usize) -> [Point; 3] {
    let v = &mesh.cells[cell].vertices;
    [
        mesh.vertices[v[0]],
        mesh.vertices[v[1]],
        mesh.vertices[v[2]],
    ]
}

fn traces_from_cells(
    mesh: &PolytopalMesh,
    cells: &[CellReconstruction],
) -> Vec<TraceReconstruction> {
    mesh.boundary_faces
        .iter()
        .map(|&f| {
            let owner = mesh.faces[f].cells[0];
            TraceReconstruction {
                face: f,
                dofs: cells[owner].dofs.clone(),
                values: cells[owner].values.clone(),
            }
        })
        .collect()
}

/// Conforming P1: DOFs at vertices, `Π_D` the nodal interpolant, `∇_D` its gradient.
pub fn make_conforming_p1(
    mesh: Arc<PolytopalMesh>,
    bc: BoundaryCondition,
) -> Result<GradientDiscretisation> {
    if !mesh.is_simplicial() {
        return Err(Error::NonSimplicial {
            scheme: "conforming P1",
        });
    }
    let cells: Vec<CellReconstruction> = (0..mesh.n_cells())
        .map(|k| {
            let t = triangle(&mesh, k);
            let (lambda, area) = barycentric(&t);
            CellReconstruction {
                dofs: mesh.cells[k].vertices.clone(),
                values: lambda.to_vec(),
                pieces: vec![GradientPiece {
                    triangle: t,
                    area,
                    gradients: lambda.iter().map(|l| [l.gx, l.gy]).collect(),
                }],
            }
        })
        .collect();
    let constrained = match bc {
        BoundaryCondition::Dirichlet => mesh.boundary_vertex.clone(),
        BoundaryCondition::Neumann { .. } => vec![false; mesh.n_vertices()],
    };
    let dofs = DofSpace::new(
        (0..mesh.n_vertices()).map(DofLocation::Vertex).collect(),
        mesh.vertices.clone(),
        constrained,
    );
    let traces = traces_from_cells(&mesh, &cells);
    Ok(GradientDiscretisation {
        scheme: SchemeKind::ConformingP1,
        bc,
        mesh,
        dofs,
        cells,
        traces,
        policy: SamplingPolicy::Identity,
    })
}

/// Crouzeix–Raviart: DOFs at edge midpoints, broken affine reconstruction.
pub fn make_ncp1(
    mesh: Arc<PolytopalMesh>,
    bc: BoundaryCondition,
) -> Result<GradientDiscretisation> {
    if !mesh.is_simplicial() {
        return Err(Error::NonSimplicial {
            scheme: "non-conforming P1",
        });
    }
    let cells: Vec<CellReconstruction> = (0..mesh.n_cells())
        .map(|k| {
            let t = triangle(&mesh, k);
            let (lambda, area) = barycentric(&t);
            let cell = &mesh.cells[k];
            // Face i joins vertices i and i+1, so it is opposite vertex i+2.
            let values: Vec<Affine> = (0..3)
                .map(|i| {
                    let l = lambda[(i + 2) % 3];
                    Affine {
                        c: 1.0 - 2.0 * l.c,
                        gx: -2.0 * l.gx,
                        gy: -2.0 * l.gy,
                    }
                })
                .collect();
            CellReconstruction {
                dofs: cell.faces.iter().map(|cf| cf.face).collect(),
                pieces: vec![GradientPiece {
                    triangle: t,
                    area,
                    gradients: values.iter().map(|a| [a.gx, a.gy]).collect(),
                }],
                values,
            }
        })
        .collect();
    let constrained = mesh
        .faces
        .iter()
        .map(|f| f.is_boundary() && bc == BoundaryCondition::Dirichlet)
        .collect();
    let dofs = DofSpace::new(
        (0..mesh.n_faces()).map(DofLocation::Face).collect(),
        mesh.faces.iter().map(|f| f.midpoint).collect(),
        constrained,
    );
    let traces = traces_from_cells(&mesh, &cells);
    Ok(GradientDiscretisation {
        scheme: SchemeKind::NonConformingP1,
        bc,
        mesh,
        dofs,
        cells,
        traces,
        policy: SamplingPolicy::Identity,
    })
}
