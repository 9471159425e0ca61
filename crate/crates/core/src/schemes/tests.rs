use std::sync::Arc;

use super::*;
use crate::error::Error;
use crate::gd::GradientDiscretisation;
use crate::mesh::{cartesian_mesh, lshape_triangulation, unit_square_triangulation};

fn square(m: usize) -> Arc<PolytopalMesh> {
    Arc::new(unit_square_triangulation(m).unwrap())
}

fn affine(p: crate::mesh::Point) -> f64 {
    0.3 - 1.7 * p[0] + 2.2 * p[1]
}

fn all_schemes() -> Vec<GradientDiscretisation> {
    let bc = BoundaryCondition::Neumann { c0: 1.0 };
    vec![
        make_conforming_p1(square(3), bc).unwrap(),
        make_ncp1(square(3), bc).unwrap(),
        make_hmm(square(3), bc).unwrap(),
        make_hmm(Arc::new(cartesian_mesh(3, 0.3).unwrap()), bc).unwrap(),
        make_hmm(Arc::new(lshape_triangulation(2).unwrap()), bc).unwrap(),
    ]
}

#[test]
fn p1_free_dof_counts() {
    let gd = make_conforming_p1(square(1), BoundaryCondition::Dirichlet).unwrap();
    assert_eq!(gd.dofs.n_free(), 0);
    let gd = make_conforming_p1(square(4), BoundaryCondition::Dirichlet).unwrap();
    assert_eq!(gd.dofs.n_free(), 9);
    let gd = make_conforming_p1(square(4), BoundaryCondition::Neumann { c0: 1.0 }).unwrap();
    assert_eq!(gd.dofs.n_free(), 25);
}

#[test]
fn ncp1_free_dofs_are_interior_edges() {
    let mesh = square(2);
    let interior = mesh.faces.iter().filter(|f| !f.is_boundary()).count();
    assert_eq!(interior, 8);
    let gd = make_ncp1(mesh, BoundaryCondition::Dirichlet).unwrap();
    assert_eq!(gd.dofs.n_free(), 8);
}

#[test]
fn fe_schemes_reject_polygons() {
    let mesh = Arc::new(cartesian_mesh(2, 0.0).unwrap());
    assert!(matches!(
        make_conforming_p1(mesh.clone(), BoundaryCondition::Dirichlet),
        Err(Error::NonSimplicial { .. })
    ));
    assert!(matches!(
        make_ncp1(mesh, BoundaryCondition::Dirichlet),
        Err(Error::NonSimplicial { .. })
    ));
}

#[test]
fn affine_functions_are_reproduced() {
    for gd in all_schemes() {
        let v = gd.interpolate(affine);
        for (k, cell) in gd.cells.iter().enumerate() {
            for piece in 0..cell.pieces.len() {
                let g = gd.gradient(k, piece, &v);
                assert!(
                    (g[0] + 1.7).abs() < 1e-12 && (g[1] - 2.2).abs() < 1e-12,
                    "{:?} {g:?}",
                    gd.scheme
                );
            }
            let p = gd.mesh.cells[k].centroid;
            let expected = gd.sample(k, p, affine);
            assert!((gd.value(k, p, &v) - expected).abs() < 1e-12);
        }
    }
}

#[test]
fn constants_have_zero_gradient() {
    for gd in all_schemes() {
        let v = gd.interpolate(|_| 4.0);
        for (k, cell) in gd.cells.iter().enumerate() {
            for piece in 0..cell.pieces.len() {
                let g = gd.gradient(k, piece, &v);
                assert!(g[0].abs() < 1e-12 && g[1].abs() < 1e-12);
            }
        }
    }
}

#[test]
fn gradient_pieces_tile_cells() {
    for gd in all_schemes() {
        for (k, cell) in gd.cells.iter().enumerate() {
            let total: f64 = cell.pieces.iter().map(|p| p.area).sum();
            assert!((total - gd.mesh.cells[k].area).abs() < 1e-14);
        }
    }
}

#[test]
fn cr_functions_agree_at_interior_midpoints() {
    let gd = make_ncp1(square(3), BoundaryCondition::Neumann { c0: 1.0 }).unwrap();
    let v: Vec<f64> = (0..gd.n_dofs())
        .map(|i| ((i * 37 % 11) as f64).sin())
        .collect();
    for face in gd.mesh.faces.iter().filter(|f| !f.is_boundary()) {
        let a = gd.value(face.cells[0], face.midpoint, &v);
        let b = gd.value(face.cells[1], face.midpoint, &v);
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn hmm_stabilization_residual_vanishes_on_affine_data() {
    let mesh = Arc::new(cartesian_mesh(4, 0.2).unwrap());
    let nc = mesh.n_cells();
    for cell in &mesh.cells {
        let mut grad = [0.0, 0.0];
        for cf in &cell.faces {
            let f = &mesh.faces[cf.face];
            grad[0] += f.length * affine(f.midpoint) * cf.normal[0] / cell.area;
            grad[1] += f.length * affine(f.midpoint) * cf.normal[1] / cell.area;
        }
        assert!((grad[0] + 1.7).abs() < 1e-12 && (grad[1] - 2.2).abs() < 1e-12);
        for cf in &cell.faces {
            let f = &mesh.faces[cf.face];
            let r = affine(f.midpoint)
                - affine(cell.point)
                - grad[0] * (f.midpoint[0] - cell.point[0])
                - grad[1] * (f.midpoint[1] - cell.point[1]);
            assert!(r.abs() < 1e-12);
        }
    }
    let gd = make_hmm(mesh, BoundaryCondition::Dirichlet).unwrap();
    assert_eq!(
        gd.dofs.n_free(),
        nc + gd.mesh.faces.iter().filter(|f| !f.is_boundary()).count()
    );
}

#[test]
fn traces_follow_boundary_faces() {
    for gd in all_schemes() {
        assert_eq!(gd.traces.len(), gd.mesh.boundary_faces.len());
        let v = gd.interpolate(affine);
        for (i, t) in gd.traces.iter().enumerate() {
            let f = &gd.mesh.faces[t.face];
            assert!((gd.trace(i, f.midpoint, &v) - affine(f.midpoint)).abs() < 1e-12);
        }
    }
}

#[test]
fn build_dispatches_on_kind() {
    for kind in [
        SchemeKind::ConformingP1,
        SchemeKind::NonConformingP1,
        SchemeKind::Hmm,
    ] {
        let gd = build(kind, square(2), BoundaryCondition::Dirichlet).unwrap();
        assert_eq!(gd.scheme, kind);
    }
}

#[test]
fn masked_gram_and_stiffness_are_positive_definite() {
    use crate::assembly::{assemble_gradient_gram, assemble_stiffness};
    use crate::dense::{from_csr, symmetric_eigenvalues};
    use crate::gd::Diffusion;

    let meshes = [
        square(2),
        square(4),
        Arc::new(lshape_triangulation(1).unwrap()),
    ];
    let shifted = Arc::new(cartesian_mesh(4, 0.3).unwrap());
    for kind in [
        SchemeKind::ConformingP1,
        SchemeKind::NonConformingP1,
        SchemeKind::Hmm,
    ] {
        let mut cases: Vec<Arc<PolytopalMesh>> = meshes.to_vec();
        if kind == SchemeKind::Hmm {
            cases.push(shifted.clone());
        }
        for mesh in cases {
            let dirichlet = build(kind, mesh.clone(), BoundaryCondition::Dirichlet).unwrap();
            let neumann = build(kind, mesh, BoundaryCondition::Neumann { c0: 1.0 }).unwrap();
            if neumann.dofs.n_free() > 200 {
                continue;
            }
            let g = assemble_gradient_gram(&dirichlet);
            let a = assemble_stiffness(&neumann, &Diffusion::Identity).unwrap();
            for m in [g, a] {
                let eig = symmetric_eigenvalues(&from_csr(&m)).unwrap();
                let (lo, hi) = eig
                    .iter()
                    .fold((f64::MAX, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
                assert!(lo > 1e-10 * hi, "{kind:?}: λ_min = {lo}");
            }
        }
    }
}
