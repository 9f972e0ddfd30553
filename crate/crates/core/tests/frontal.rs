use std::collections::HashMap;

use nalgebra::DMatrix;
use proptest::prelude::*;

use hfront::dense::DenseMatrix;
use hfront::elimination::{build_tree, Front};
use hfront::error::Error;
use hfront::fem::{build_dof_map, condensed_elements, BasisOrder, DofKey, ProblemKind};
use hfront::fit::affine_fit;
use hfront::frontal::{
    assemble_front, back_substitute, factor_flop_count, forward_eliminate, partial_factorize, CostCounters,
    DenseFront, SchurComplement,
};
use hfront::oracle::{assemble_global, dense_lu_solve};

fn keys(n: usize) -> Vec<DofKey> {
    (0..n).map(|i| DofKey { owner: i as u32, entity: 8, index: 0 }).collect()
}

fn spd(n: usize, entries: &[f64]) -> DenseMatrix {
    let m = DMatrix::from_fn(n, n, |i, j| entries[i * n + j]);
    let a = &m * m.transpose() + DMatrix::identity(n, n) * n as f64;
    DenseMatrix::from_rows(&(0..n).map(|i| (0..n).map(|j| a[(i, j)]).collect()).collect::<Vec<_>>())
}

fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

proptest! {
    #[test]
    fn schur_matches_direct_formula(
        n in 2usize..=10,
        k_frac in 0.0f64..1.0,
        entries in proptest::collection::vec(-1.0f64..1.0, 100),
        rhs in proptest::collection::vec(-1.0f64..1.0, 10),
    ) {
        let k = 1 + ((n - 1) as f64 * k_frac) as usize;
        let a = spd(n, &entries);
        let df = DenseFront { front_id: 0, dofs: keys(n), n_eliminate: k, a: a.clone(), b: rhs[..n].to_vec() };
        let mut c = CostCounters::default();
        let (lu, s) = partial_factorize(&df, k, &mut c).unwrap();

        let m = to_na(&a);
        let a11 = m.view((0, 0), (k, k)).into_owned();
        let a12 = m.view((0, k), (k, n - k)).into_owned();
        let a21 = m.view((k, 0), (n - k, k)).into_owned();
        let a22 = m.view((k, k), (n - k, n - k)).into_owned();
        let inv = a11.clone().try_inverse().unwrap();
        let expected = &a22 - &a21 * &inv * &a12;
        let got = to_na(&s.s);
        prop_assert!((&got - &expected).amax() <= 1e-10 * expected.amax().max(1.0));

        let b = nalgebra::DVector::from_column_slice(&rhs[..n]);
        let g_expected = b.rows(k, n - k) - &a21 * &inv * b.rows(0, k);
        for i in 0..n - k {
            prop_assert!((s.g[i] - g_expected[i]).abs() <= 1e-10 * (1.0 + g_expected.amax()));
        }

        prop_assert_eq!(c.factor_flops, factor_flop_count(n, k));
        prop_assert_eq!(c.nnz_factors, (k * k + 2 * k * (n - k)) as u64);
        prop_assert!(lu.reconstruction_error(&a) <= 1e-9);
        if n - k > 0 {
            prop_assert!(s.s.asymmetry() <= 1e-9);
            let eig = got.symmetric_eigen();
            prop_assert!(eig.eigenvalues.min() > 0.0);
        }
    }
}

#[test]
fn full_factorization_flops_and_solution() {
    let n = 10;
    let entries: Vec<f64> = (0..n * n).map(|i| ((i * 37 % 19) as f64 - 9.0) / 9.0).collect();
    let a = spd(n, &entries);
    let x_known: Vec<f64> = (0..n).map(|i| (i as f64 - 4.5) / 3.0).collect();
    let b = a.matvec(&x_known);
    let df = DenseFront { front_id: 0, dofs: keys(n), n_eliminate: n, a: a.clone(), b: b.clone() };
    let mut c = CostCounters::default();
    let (lu, s) = partial_factorize(&df, n, &mut c).unwrap();
    assert!(s.dofs.is_empty());
    let expected: u64 = (1..=n as u64).map(|j| (n as u64 - j) + 2 * (n as u64 - j).pow(2)).sum();
    assert_eq!(c.factor_flops, expected);

    // naive reference: textbook Doolittle LU
    let mut l = vec![vec![0.0; n]; n];
    let mut u = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            u[i][j] = a[(i, j)] - (0..i).map(|m| l[i][m] * u[m][j]).sum::<f64>();
        }
        l[i][i] = 1.0;
        for j in i + 1..n {
            l[j][i] = (a[(j, i)] - (0..i).map(|m| l[j][m] * u[m][i]).sum::<f64>()) / u[i][i];
        }
    }
    for i in 0..n {
        for j in 0..n {
            let got = lu.lu11[(i, j)];
            let want = if i > j { l[i][j] } else { u[i][j] };
            assert!((got - want).abs() < 1e-12, "({i},{j})");
        }
    }

    // back substitution against the known solution
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| lu.lu11[(i, j)] * x[j]).sum();
        x[i] = (lu.rhs_partial[i] - s) / lu.lu11[(i, i)];
    }
    for (a, b) in x.iter().zip(&x_known) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn singular_pivot_names_the_dof() {
    let a = DenseMatrix::from_rows(&[vec![1.0, 1.0, 0.0], vec![1.0, 1.0, 0.0], vec![0.0, 0.0, 2.0]]);
    let df = DenseFront { front_id: 7, dofs: keys(3), n_eliminate: 2, a, b: vec![0.0; 3] };
    match partial_factorize(&df, 2, &mut CostCounters::default()) {
        Err(Error::SingularFront { front: 7, dof, .. }) => assert_eq!(dof, keys(3)[1]),
        other => panic!("expected a singular front, got {other:?}"),
    }
}

fn setup(kind: ProblemKind, p: usize, l: usize) -> (hfront::fem::DofMap, hfront::elimination::EliminationTree, Vec<hfront::fem::CondensedElement>) {
    let mut mesh = kind.initial_mesh();
    for _ in 0..l {
        mesh = mesh.refine_towards_singularities();
    }
    let problem = kind.model(0.6);
    let dm = build_dof_map(&mesh, BasisOrder::new(p).unwrap(), problem.as_ref()).unwrap();
    let tree = build_tree(&mesh, &dm).unwrap();
    let els = condensed_elements(&mesh, &dm, problem.as_ref()).unwrap();
    (dm, tree, els)
}

#[test]
fn single_element_front_is_the_element_matrix() {
    let (dm, _, els) = setup(ProblemKind::Radical1, 2, 1);
    let el = &els[0];
    let (e, k) = hfront::elimination::classify_dofs(&[el.element], &dm, &Default::default());
    let front = Front {
        front_id: 0,
        chain: 0,
        level: 1,
        element_ids: vec![el.element],
        eliminate_dofs: e,
        keep_dofs: k,
        successor: None,
    };
    let df = assemble_front(&front, |id| els.iter().find(|x| x.element == id), &[]).unwrap();
    let pos: HashMap<_, _> = df.dofs.iter().enumerate().map(|(i, d)| (*d, i)).collect();
    for (r, dr) in el.dofs.iter().enumerate() {
        assert_eq!(df.b[pos[dr]], el.f[r]);
        for (c, dc) in el.dofs.iter().enumerate() {
            assert_eq!(df.a[(pos[dr], pos[dc])], el.k[(r, c)]);
        }
    }
}

#[test]
fn foreign_schur_dof_is_a_structural_error() {
    let (_, tree, els) = setup(ProblemKind::Radical1, 1, 2);
    let bogus = SchurComplement {
        dofs: vec![DofKey { owner: 9999, entity: 8, index: 0 }],
        s: DenseMatrix::identity(1),
        g: vec![0.0],
    };
    let r = assemble_front(&tree.fronts[1], |id| els.iter().find(|x| x.element == id), &[&bogus]);
    assert!(matches!(r, Err(Error::Structural(_))));
}

#[test]
fn missing_factor_is_reported() {
    let (dm, tree, els) = setup(ProblemKind::Radical1, 1, 3);
    let mut c = CostCounters::default();
    let mut out = forward_eliminate(&tree, |id| els.iter().find(|x| x.element == id), &mut c).unwrap();
    out.factors.pop();
    assert!(matches!(back_substitute(&tree, &out.factors, &dm, &mut c), Err(Error::MissingFactor(_))));
}

#[test]
fn first_grid_front_is_the_global_matrix() {
    let (dm, tree, els) = setup(ProblemKind::Radical1, 2, 1);
    let df = assemble_front(&tree.fronts[0], |id| els.iter().find(|x| x.element == id), &[]).unwrap();
    let global = assemble_global(&dm, &els);
    for (i, di) in df.dofs.iter().enumerate() {
        let gi = dm.index_of(di).unwrap();
        assert!((df.b[i] - global.b[gi]).abs() < 1e-14);
        for (j, dj) in df.dofs.iter().enumerate() {
            assert!((df.a[(i, j)] - global.a[(gi, dm.index_of(dj).unwrap())]).abs() < 1e-14);
        }
    }
}

#[test]
fn frontal_solution_agrees_with_oracle() {
    for kind in ProblemKind::ALL {
        for p in 1..=3 {
            let (dm, tree, els) = setup(kind, p, 4);
            let mut c = CostCounters::default();
            let out = forward_eliminate(&tree, |id| els.iter().find(|x| x.element == id), &mut c).unwrap();
            let x = back_substitute(&tree, &out.factors, &dm, &mut c).unwrap();
            let sys = assemble_global(&dm, &els);
            assert!(sys.relative_residual(&x) <= 1e-9, "{kind} p={p}");
            let xo = dense_lu_solve(&sys).unwrap();
            let scale = xo.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let diff = x.iter().zip(&xo).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(diff <= 1e-8 * scale, "{kind} p={p}: {diff}");
        }
    }
}

#[test]
fn interior_fronts_cost_the_same() {
    let levels = 8;
    let (_, tree, _) = setup(ProblemKind::Radical1, 2, levels);
    let costs: Vec<u64> = tree
        .fronts
        .iter()
        .filter(|f| f.chain > 0 && (2..levels as u32).contains(&f.level))
        .map(|f| factor_flop_count(f.size(), f.eliminate_dofs.len()))
        .collect();
    assert_eq!(costs.len(), levels - 2);
    assert!(costs.iter().all(|&c| c == costs[0]));
}

#[test]
fn counters_are_deterministic_and_grow_affinely() {
    let mut ns = Vec::new();
    let (mut nnz, mut back) = (Vec::new(), Vec::new());
    for l in 2..=10 {
        let (dm, tree, els) = setup(ProblemKind::Radical1, 2, l);
        let run = || {
            let mut c = CostCounters::default();
            let out = forward_eliminate(&tree, |id| els.iter().find(|x| x.element == id), &mut c).unwrap();
            back_substitute(&tree, &out.factors, &dm, &mut c).unwrap();
            c
        };
        let c = run();
        assert_eq!(c, run());
        ns.push(dm.n_dofs() as f64);
        nnz.push(c.nnz_factors as f64);
        back.push(c.back_flops as f64);
    }
    assert!(affine_fit(&ns, &nnz).r2 >= 0.999);
    assert!(affine_fit(&ns, &back).r2 >= 0.99);
}
