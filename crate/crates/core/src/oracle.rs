//! Reference path: full global assembly and a dense LU solve with partial
//! pivoting. Shares no elimination code with the frontal solver.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::fem::{element_stiffness_load, CondensedElement, DofKey, DofMap, ModelProblem};
use crate::mesh2d::Mesh;

/// Normwise backward error bound accepted from the dense solve.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalSystem {
    /// Row/column order, matching the DOF map's free order.
    pub dofs: Vec<DofKey>,
    pub a: DenseMatrix,
    pub b: Vec<f64>,
}

impl GlobalSystem {
    pub fn n(&self) -> usize {
        self.dofs.len()
    }

    /// `||A x - b||_inf / ||b||_inf`.
    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let ax = self.a.matvec(x);
        let r = ax.iter().zip(&self.b).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        let bn = self.b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        r / bn.max(f64::MIN_POSITIVE)
    }

    /// Entries with magnitude above `1e-14` times the largest entry.
    pub fn nonzeros(&self) -> usize {
        let cut = 1e-14 * self.a.max_abs();
        self.a.as_slice().iter().filter(|v| v.abs() > cut).count()
    }
}

/// Scatter-adds condensed element systems into the global matrix.
pub fn assemble_global(dofmap: &DofMap, elements: &[CondensedElement]) -> GlobalSystem {
    let n = dofmap.n_dofs();
    let mut a = DenseMatrix::zeros(n, n);
    let mut b = vec![0.0; n];
    for el in elements {
        let idx: Vec<usize> = el.dofs.iter().map(|k| dofmap.index_of(k).expect("free dof")).collect();
        for (r, &gi) in idx.iter().enumerate() {
            b[gi] += el.f[r];
            for (c, &gj) in idx.iter().enumerate() {
                a[(gi, gj)] += el.k[(r, c)];
            }
        }
    }
    GlobalSystem { dofs: dofmap.free_dofs().to_vec(), a, b }
}

/// Assembles the unconstrained system over every entity DOF and condenses it
/// globally with `A = T^T K T`, `b = T^T (F - K d)`.
pub fn assemble_global_condensed(
    mesh: &Mesh,
    dofmap: &DofMap,
    problem: &dyn ModelProblem,
) -> Result<GlobalSystem> {
    let active = mesh.active_elements();
    let raw: BTreeMap<usize, &[DofKey]> = active
        .iter()
        .map(|&id| (id, dofmap.raw_local_keys(id).expect("active element has raw keys")))
        .collect();
    let all: BTreeSet<DofKey> = raw.values().flat_map(|k| k.iter()).copied().collect();
    let pos: BTreeMap<DofKey, usize> = all.iter().enumerate().map(|(i, k)| (*k, i)).collect();
    let m = all.len();
    let n = dofmap.n_dofs();

    let mut k = DenseMatrix::zeros(m, m);
    let mut f = vec![0.0; m];
    for &id in &active {
        let em = element_stiffness_load(mesh.node(id), problem, dofmap.order())?;
        let idx: Vec<usize> = raw[&id].iter().map(|key| pos[key]).collect();
        for (r, &gi) in idx.iter().enumerate() {
            f[gi] += em.f[r];
            for (c, &gj) in idx.iter().enumerate() {
                k[(gi, gj)] += em.k[(r, c)];
            }
        }
    }

    // Global expansion: u_all = T u_free + d.
    let mut t = DenseMatrix::zeros(m, n);
    let mut d = vec![0.0; m];
    for &id in &active {
        let map = dofmap.element_map(id).expect("active element has a DOF map");
        for (key, r) in raw[&id].iter().zip(&map.local) {
            let row = pos[key];
            d[row] = r.offset;
            for j in 0..n {
                t[(row, j)] = 0.0;
            }
            for (master, c) in &r.terms {
                t[(row, dofmap.index_of(master).expect("free dof"))] = *c;
            }
        }
    }

    let kd = k.matvec(&d);
    let load: Vec<f64> = f.iter().zip(&kd).map(|(a, b)| a - b).collect();
    let tt = t.transpose();
    let a = tt.matmul(&k).matmul(&t);
    let b = tt.matvec(&load);
    Ok(GlobalSystem { dofs: dofmap.free_dofs().to_vec(), a, b })
}

/// Solves with nalgebra's LU (partial pivoting) and checks the normwise
/// backward error `||Ax - b|| / (||A|| ||x|| + ||b||)`.
pub fn dense_lu_solve(sys: &GlobalSystem) -> Result<Vec<f64>> {
    let n = sys.n();
    if n == 0 {
        return Ok(Vec::new());
    }
    let a = DMatrix::from_row_slice(n, n, sys.a.as_slice());
    let b = DVector::from_column_slice(&sys.b);
    let x = a.clone().lu().solve(&b).ok_or(Error::SingularMatrix)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularMatrix);
    }
    let r = &a * &x - &b;
    let a_norm = (0..n).map(|i| a.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let backward = r.amax() / (a_norm * x.amax() + b.amax()).max(f64::MIN_POSITIVE);
    if backward > RESIDUAL_TOLERANCE {
        return Err(Error::ResidualCheckFailed { residual: backward, tolerance: RESIDUAL_TOLERANCE });
    }
    Ok(x.iter().copied().collect())
}

/// Full LU flop count under the frontal solver's convention, used to report
/// oracle-mode costs.
pub fn dense_lu_flops(n: usize) -> u64 {
    crate::frontal::factor_flop_count(n, n)
}
