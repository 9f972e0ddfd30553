//! Element stiffness and load, and their condensation onto free DOFs.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::fem::basis::{gauss_legendre, BasisOrder, LagrangeBasis};
use crate::fem::dofmap::{DofKey, ElementDofMap};
use crate::fem::problem::ModelProblem;
use crate::mesh2d::{ElementId, ElementNode, Point2};

/// Unconstrained element system over the `(p + 1)^2` local nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementMatrix {
    pub k: DenseMatrix,
    pub f: Vec<f64>,
}

/// Element system after constraint and Dirichlet elimination, indexed by
/// free global DOFs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CondensedElement {
    pub element: ElementId,
    pub dofs: Vec<DofKey>,
    pub k: DenseMatrix,
    pub f: Vec<f64>,
}

/// Tensor-product Gauss quadrature with `p + 2` points per direction.
pub fn element_stiffness_load(
    node: &ElementNode,
    problem: &dyn ModelProblem,
    order: BasisOrder,
) -> Result<ElementMatrix> {
    let p = order.get();
    let (hx, hy) = (node.width(), node.height());
    let det = 0.25 * hx * hy;
    if !(det > 0.0) || !det.is_finite() {
        return Err(Error::NonPositiveJacobian(node.id));
    }
    let basis = LagrangeBasis::gauss_lobatto(p);
    let (qp, qw) = gauss_legendre(p + 2);
    let shapes: Vec<_> = qp.iter().map(|&t| basis.eval(t)).collect();
    let (sx, sy) = (2.0 / hx, 2.0 / hy);

    let n1 = p + 1;
    let n = n1 * n1;
    let mut k = DenseMatrix::zeros(n, n);
    let mut f = vec![0.0; n];
    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; n];
    let mut phi = vec![0.0; n];
    for (qy, sh_y) in shapes.iter().enumerate() {
        for (qx, sh_x) in shapes.iter().enumerate() {
            let pt = Point2::new(
                node.min.x + 0.5 * (qp[qx] + 1.0) * hx,
                node.min.y + 0.5 * (qp[qy] + 1.0) * hy,
            );
            let w = qw[qx] * qw[qy] * det;
            let a = problem.diffusion(&pt);
            let src = problem.source(&pt);
            for j in 0..n1 {
                for i in 0..n1 {
                    let l = j * n1 + i;
                    phi[l] = sh_x.values[i] * sh_y.values[j];
                    gx[l] = sh_x.derivatives[i] * sh_y.values[j] * sx;
                    gy[l] = sh_x.values[i] * sh_y.derivatives[j] * sy;
                }
            }
            for r in 0..n {
                f[r] += w * src * phi[r];
                let (gxr, gyr) = (w * a * gx[r], w * a * gy[r]);
                let row = k.row_mut(r);
                for c in 0..n {
                    row[c] += gxr * gx[c] + gyr * gy[c];
                }
            }
        }
    }
    Ok(ElementMatrix { k, f })
}

/// Condenses `K <- T^T K T`, `f <- T^T (f - K d)` where the local expansion is
/// `u_local = T u_free + d`.
pub fn apply_constraints(em: &ElementMatrix, map: &ElementDofMap) -> CondensedElement {
    let n = map.local.len();
    assert_eq!(em.k.rows(), n, "element matrix does not match its DOF map");
    let dofs = map.free_dofs();
    let col: BTreeMap<DofKey, usize> = dofs.iter().enumerate().map(|(i, k)| (*k, i)).collect();
    let m = dofs.len();

    let mut t = DenseMatrix::zeros(n, m);
    let mut d = vec![0.0; n];
    for (i, r) in map.local.iter().enumerate() {
        d[i] = r.offset;
        for (key, c) in &r.terms {
            t[(i, col[key])] += c;
        }
    }

    let kd = em.k.matvec(&d);
    let kt = em.k.matmul(&t);
    let mut k = DenseMatrix::zeros(m, m);
    let mut f = vec![0.0; m];
    for i in 0..n {
        let load = em.f[i] - kd[i];
        for a in 0..m {
            let tia = t[(i, a)];
            if tia == 0.0 {
                continue;
            }
            f[a] += tia * load;
            let row = k.row_mut(a);
            for (b, v) in kt.row(i).iter().enumerate() {
                row[b] += tia * v;
            }
        }
    }
    CondensedElement { element: map.element, dofs, k, f }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::problem::AffineSolution;

    struct Unit;
    impl ModelProblem for Unit {
        fn source(&self, _: &Point2) -> f64 {
            1.0
        }
        fn dirichlet(&self, _: &Point2) -> f64 {
            0.0
        }
    }

    fn square(w: f64, h: f64) -> ElementNode {
        ElementNode {
            id: 0,
            level: 0,
            min: Point2::new(0.0, 0.0),
            max: Point2::new(w, h),
            parent: None,
            children: None,
        }
    }

    #[test]
    fn bilinear_unit_square_stiffness() {
        let em = element_stiffness_load(&square(1.0, 1.0), &Unit, BasisOrder::new(1).unwrap()).unwrap();
        // local order SW, SE, NW, NE
        let expect = [
            [4.0, -1.0, -1.0, -2.0],
            [-1.0, 4.0, -2.0, -1.0],
            [-1.0, -2.0, 4.0, -1.0],
            [-2.0, -1.0, -1.0, 4.0],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert!((em.k[(i, j)] - expect[i][j] / 6.0).abs() < 1e-14, "({i},{j})");
            }
        }
        for v in &em.f {
            assert!((v - 0.25).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_source_gives_zero_load() {
        let pb = AffineSolution { c0: 0.0, cx: 1.0, cy: 0.0 };
        let em = element_stiffness_load(&square(0.5, 0.25), &pb, BasisOrder::new(3).unwrap()).unwrap();
        assert!(em.f.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rows_annihilate_constants_and_matrix_is_symmetric() {
        for p in 1..=5 {
            let em = element_stiffness_load(&square(0.3, 0.7), &Unit, BasisOrder::new(p).unwrap()).unwrap();
            assert!(em.k.asymmetry() < 1e-13);
            for i in 0..em.k.rows() {
                let s: f64 = em.k.row(i).iter().sum();
                assert!(s.abs() < 1e-12 * em.k.max_abs(), "p={p} row {i} sum {s}");
            }
        }
    }

    #[test]
    fn degenerate_element_rejected() {
        let e = square(0.0, 1.0);
        assert_eq!(
            element_stiffness_load(&e, &Unit, BasisOrder::new(1).unwrap()),
            Err(Error::NonPositiveJacobian(0))
        );
    }
}
