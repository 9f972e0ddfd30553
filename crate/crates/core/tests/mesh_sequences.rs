use std::collections::BTreeMap;

use hfront::fem::ProblemKind;
use hfront::mesh2d::{new_lshape_mesh, new_two_element_mesh, new_two_singularity_mesh, Mesh, Point2};

fn refined(mut mesh: Mesh, times: usize) -> Mesh {
    for _ in 0..times {
        mesh = mesh.refine_towards_singularities();
    }
    mesh
}

fn radical() -> Mesh {
    new_two_element_mesh(2.0, 1.0, Point2::new(1.0, 0.0)).unwrap()
}

/// Brute-force hanging-edge count: an active edge is hanging when its
/// midpoint is a corner of some active element.
fn hanging_edges_by_scan(mesh: &Mesh) -> usize {
    let tol = 1e-9;
    let active: Vec<_> = mesh.active_elements().into_iter().map(|id| mesh.node(id).clone()).collect();
    let corners: Vec<Point2> = active.iter().flat_map(|n| n.corners()).collect();
    let mut edges: Vec<(Point2, Point2)> = Vec::new();
    for n in &active {
        let c = n.corners();
        for i in 0..4 {
            let (a, b) = (c[i], c[(i + 1) % 4]);
            let same = |e: &(Point2, Point2)| {
                (e.0.distance(&a) < tol && e.1.distance(&b) < tol) || (e.0.distance(&b) < tol && e.1.distance(&a) < tol)
            };
            if !edges.iter().any(same) {
                edges.push((a, b));
            }
        }
    }
    edges
        .iter()
        .filter(|(a, b)| {
            let m = a.midpoint(b);
            corners.iter().any(|c| c.distance(&m) < tol)
        })
        .count()
}

#[test]
fn radical_element_count_formula() {
    for l in 1..=10 {
        let mesh = refined(radical(), l);
        assert_eq!(mesh.active_elements().len(), 6 * l + 2, "l = {l}");
    }
}

#[test]
fn other_sequences_grow_linearly() {
    for l in 1..=8 {
        assert_eq!(refined(new_two_singularity_mesh(), l).active_elements().len(), 12 * l + 4);
        assert_eq!(refined(new_lshape_mesh(), l).active_elements().len(), 9 * l + 3);
    }
}

#[test]
fn second_grid_has_six_coarse_and_eight_fine_elements() {
    let mesh = refined(radical(), 2);
    let levels: Vec<u32> = mesh.active_elements().iter().map(|&id| mesh.node(id).level).collect();
    assert_eq!(levels, [vec![1; 6], vec![2; 8]].concat());
    assert_eq!(mesh.level_histogram(), BTreeMap::from([(1, 6), (2, 8)]));
}

#[test]
fn hanging_edges_match_brute_force_scan() {
    for kind in ProblemKind::ALL {
        for l in 0..=6 {
            let mesh = refined(kind.initial_mesh(), l);
            assert_eq!(mesh.hanging_edges().unwrap().len(), hanging_edges_by_scan(&mesh), "{kind} l = {l}");
        }
    }
}

#[test]
fn hanging_edge_counts_on_second_grid() {
    // level-2 block [0.5,1.5]x[0,0.5]: one hanging edge on each vertical side
    // and two along its top
    assert_eq!(refined(radical(), 2).hanging_edges().unwrap().len(), 4);
    assert_eq!(refined(new_lshape_mesh(), 2).hanging_edges().unwrap().len(), 6);
}

#[test]
fn sequences_stay_one_irregular_and_tile() {
    for kind in ProblemKind::ALL {
        let mut mesh = kind.initial_mesh();
        for _ in 0..8 {
            let (next, stats) = mesh.refine_towards_singularities_with_stats();
            assert_eq!(stats.closure, 0, "{kind}: model sequences need no closure");
            assert!(next.check_one_irregularity().is_ok());
            assert!((next.active_area() - next.domain_area()).abs() < 1e-12);
            mesh = next;
        }
    }
}

#[test]
fn singularity_adjacency() {
    let mesh = new_two_singularity_mesh();
    let near = |p: Point2| {
        let mut v: Vec<_> = mesh.elements_touching(&p).iter().map(|&id| (mesh.node(id).min.x, mesh.node(id).max.x)).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    };
    assert_eq!(near(Point2::new(1.0, 0.0)), vec![(0.0, 1.0), (1.0, 2.0)]);
    assert_eq!(near(Point2::new(3.0, 0.0)), vec![(2.0, 3.0), (3.0, 4.0)]);

    let lshape = new_lshape_mesh();
    assert_eq!(lshape.elements_touching(&Point2::new(0.0, 0.0)).len(), 3);
}

#[test]
fn dump_counts_active_records() {
    let doc = refined(radical(), 2).to_document();
    assert_eq!(doc.elements.iter().filter(|e| e.active).count(), 14);
    let doc0 = radical().to_document();
    assert_eq!(doc0.elements.len(), 2);
}
