use std::sync::Arc;

use proptest::prelude::*;

use hfront::fem::basis::gauss_lobatto_points;
use hfront::fem::{
    build_dof_map, compute_error, condensed_elements, constraint_coefficients, element_stiffness_load,
    shape_functions_1d, AffineSolution, BasisOrder, EdgeHalf, ModelProblem, Norm, ProblemKind,
};
use hfront::elimination::build_tree;
use hfront::frontal::{back_substitute, forward_eliminate, CostCounters};
use hfront::mesh2d::{new_two_element_mesh, Mesh, Point2};
use hfront::oracle::{assemble_global, assemble_global_condensed, dense_lu_solve};

fn refined(mut mesh: Mesh, times: usize) -> Mesh {
    for _ in 0..times {
        mesh = mesh.refine_towards_singularities();
    }
    mesh
}

fn order(p: usize) -> BasisOrder {
    BasisOrder::new(p).unwrap()
}

#[test]
fn bilinear_stiffness_matches_closed_form() {
    // Closed form in counter-clockwise corner order SW, SE, NE, NW.
    let expected = [
        [4.0, -1.0, -2.0, -1.0],
        [-1.0, 4.0, -1.0, -2.0],
        [-2.0, -1.0, 4.0, -1.0],
        [-1.0, -2.0, -1.0, 4.0],
    ];
    let mesh = Mesh::from_rectangles(&[(Point2::new(0.0, 0.0), Point2::new(1.0, 1.0))], &[Point2::new(0.0, 0.0)]).unwrap();
    let id = mesh.active_elements()[0];
    let em = element_stiffness_load(mesh.node(id), &AffineSolution { c0: 0.0, cx: 0.0, cy: 0.0 }, order(1)).unwrap();
    // local nodes are numbered j * 2 + i: SW, SE, NW, NE
    let ccw = [0, 1, 3, 2];
    for r in 0..4 {
        for c in 0..4 {
            let got = em.k[(ccw[r], ccw[c])];
            assert!((got - expected[r][c] / 6.0).abs() < 1e-13, "({r},{c}) {got}");
        }
    }
    assert!(em.f.iter().all(|&v| v == 0.0));
}

proptest! {
    #[test]
    fn shape_functions_partition_unity(p in 1usize..=10, t in -1.0f64..=1.0) {
        let s = shape_functions_1d(p, t);
        prop_assert!((s.values.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        prop_assert!(s.derivatives.iter().sum::<f64>().abs() < 1e-10);
    }

    #[test]
    fn constraint_rows_reproduce_polynomials(
        p in 1usize..=8,
        coeffs in proptest::collection::vec(-2.0f64..2.0, 9),
        upper in any::<bool>(),
    ) {
        let q = |t: f64| coeffs[..=p].iter().rev().fold(0.0, |acc, c| acc * t + c);
        let (half, shift) = if upper { (EdgeHalf::Upper, 1.0) } else { (EdgeHalf::Lower, -1.0) };
        let c = constraint_coefficients(p, half);
        let nodes = gauss_lobatto_points(p);
        for (i, ti) in nodes.iter().enumerate() {
            let v: f64 = (0..=p).map(|j| c[(i, j)] * q(nodes[j])).sum();
            let target = q((ti + shift) / 2.0);
            prop_assert!((v - target).abs() < 1e-11 * (1.0 + target.abs()), "p={} i={} {} vs {}", p, i, v, target);
        }
    }
}

#[test]
fn linear_midpoint_rows() {
    let c = constraint_coefficients(1, EdgeHalf::Lower);
    assert_eq!((c[(0, 0)], c[(0, 1)]), (1.0, 0.0));
    assert!((c[(1, 0)] - 0.5).abs() < 1e-15 && (c[(1, 1)] - 0.5).abs() < 1e-15);
}

#[test]
fn unrefined_linear_mesh_has_no_free_dofs() {
    let mesh = new_two_element_mesh(2.0, 1.0, Point2::new(1.0, 0.0)).unwrap();
    let kind = ProblemKind::Radical1;
    assert_eq!(build_dof_map(&mesh, order(1), kind.model(0.6).as_ref()).unwrap().n_dofs(), 0);
}

#[test]
fn slave_dofs_on_second_grid() {
    let mesh = refined(ProblemKind::Radical1.initial_mesh(), 2);
    let dm = build_dof_map(&mesh, order(1), ProblemKind::Radical1.model(0.6).as_ref()).unwrap();
    // one midpoint vertex per hanging edge
    assert_eq!(dm.constraints().len(), mesh.hanging_edges().unwrap().len());
    assert_eq!(dm.constraints().len(), 4);
}

#[test]
fn unknowns_grow_by_a_constant() {
    for kind in [ProblemKind::Radical1, ProblemKind::Radical2] {
        for p in 1..=3 {
            let problem = kind.model(0.6);
            let mut mesh = kind.initial_mesh();
            let mut n = Vec::new();
            for _ in 0..8 {
                mesh = mesh.refine_towards_singularities();
                n.push(build_dof_map(&mesh, order(p), problem.as_ref()).unwrap().n_dofs());
            }
            let d: Vec<usize> = n.windows(2).skip(1).map(|w| w[1] - w[0]).collect();
            assert!(d.iter().all(|&x| x == d[0]), "{kind} p={p}: {n:?}");
        }
    }
}

#[test]
fn condensed_assembly_matches_global_condensation() {
    for kind in ProblemKind::ALL {
        for p in 1..=3 {
            let mesh = refined(kind.initial_mesh(), 3);
            let problem = kind.model(0.6);
            let dm = build_dof_map(&mesh, order(p), problem.as_ref()).unwrap();
            let elements = condensed_elements(&mesh, &dm, problem.as_ref()).unwrap();
            let a = assemble_global(&dm, &elements);
            let b = assemble_global_condensed(&mesh, &dm, problem.as_ref()).unwrap();
            let scale = a.a.max_abs();
            let diff = a.a.as_slice().iter().zip(b.a.as_slice()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            assert!(diff <= 1e-12 * scale, "{kind} p={p} matrix diff {diff}");
            let bscale = a.b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let bdiff = a.b.iter().zip(&b.b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            assert!(bdiff <= 1e-12 * bscale.max(1.0), "{kind} p={p} load diff {bdiff}");
            assert!(a.a.asymmetry() < 1e-12);
        }
    }
}

#[test]
fn condensed_element_matrices_stay_symmetric() {
    let mesh = refined(ProblemKind::Lshape.initial_mesh(), 3);
    let problem = ProblemKind::Lshape.model(0.6);
    for p in 1..=4 {
        let dm = build_dof_map(&mesh, order(p), problem.as_ref()).unwrap();
        for el in condensed_elements(&mesh, &dm, problem.as_ref()).unwrap() {
            assert!(el.k.asymmetry() < 1e-12);
        }
    }
}

fn solve_frontal(mesh: &Mesh, p: usize, problem: &dyn ModelProblem) -> (hfront::fem::DofMap, Vec<f64>) {
    let dm = build_dof_map(mesh, order(p), problem).unwrap();
    let elements = condensed_elements(mesh, &dm, problem).unwrap();
    let tree = build_tree(mesh, &dm).unwrap();
    let mut c = CostCounters::default();
    let out = forward_eliminate(&tree, |id| elements.iter().find(|e| e.element == id), &mut c).unwrap();
    let x = back_substitute(&tree, &out.factors, &dm, &mut c).unwrap();
    (dm, x)
}

#[test]
fn affine_solutions_are_reproduced() {
    let affine = AffineSolution { c0: 0.3, cx: -1.25, cy: 2.0 };
    for kind in ProblemKind::ALL {
        for p in 1..=3 {
            for l in [1, 3, 5] {
                let mesh = refined(kind.initial_mesh(), l);
                let (dm, x) = solve_frontal(&mesh, p, &affine);
                for (key, v) in dm.free_dofs().iter().zip(&x) {
                    let pt = dm.point(key).unwrap();
                    assert!((v - affine.dirichlet(&pt)).abs() < 1e-10, "{kind} p={p} l={l}");
                }
                let e = compute_error(&mesh, &dm, &x, &affine, Norm::H1Semi).unwrap();
                assert!(e < 1e-10);
            }
        }
    }
}

#[test]
fn oracle_reproduces_affine_data() {
    let affine = AffineSolution { c0: 1.0, cx: 0.5, cy: -0.75 };
    let mesh = refined(ProblemKind::Radical1.initial_mesh(), 4);
    let dm = build_dof_map(&mesh, order(2), &affine).unwrap();
    let elements = condensed_elements(&mesh, &dm, &affine).unwrap();
    let x = dense_lu_solve(&assemble_global(&dm, &elements)).unwrap();
    for (key, v) in dm.free_dofs().iter().zip(&x) {
        assert!((v - affine.dirichlet(&dm.point(key).unwrap())).abs() < 1e-10);
    }
}

#[test]
fn energy_error_decreases_along_radical_sequence() {
    let problem: Arc<dyn ModelProblem> = ProblemKind::Radical1.model(0.6);
    let mut mesh = ProblemKind::Radical1.initial_mesh();
    let mut last = f64::INFINITY;
    for l in 1..=6 {
        mesh = mesh.refine_towards_singularities();
        let (dm, x) = solve_frontal(&mesh, 2, problem.as_ref());
        let e = compute_error(&mesh, &dm, &x, problem.as_ref(), Norm::H1Semi).unwrap();
        assert!(e < last, "l={l}: {e} !< {last}");
        assert!(e >= 0.0);
        last = e;
    }
}

#[test]
fn global_nonzeros_grow_affinely() {
    let problem = ProblemKind::Radical1.model(0.6);
    let mut mesh = ProblemKind::Radical1.initial_mesh();
    let mut counts = Vec::new();
    for _ in 0..6 {
        mesh = mesh.refine_towards_singularities();
        let dm = build_dof_map(&mesh, order(2), problem.as_ref()).unwrap();
        let elements = condensed_elements(&mesh, &dm, problem.as_ref()).unwrap();
        counts.push(assemble_global(&dm, &elements).nonzeros() as f64);
    }
    let ls: Vec<f64> = (1..=6).map(f64::from).collect();
    let fit = hfront::fit::affine_fit(&ls[1..], &counts[1..]);
    assert!(fit.r2 > 0.999, "{counts:?}");
}
