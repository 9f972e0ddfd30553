use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::basis::{gauss_legendre, LagrangeBasis};
use crate::fem::dofmap::DofMap;
use crate::fem::problem::ModelProblem;
use crate::mesh2d::{Mesh, Point2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Norm {
    L2,
    H1Semi,
}

/// `|| u_h - u ||` over the active elements, using `p + 3` Gauss points per
/// direction.
pub fn compute_error(
    mesh: &Mesh,
    dofmap: &DofMap,
    free_values: &[f64],
    problem: &dyn ModelProblem,
    norm: Norm,
) -> Result<f64> {
    let p = dofmap.p();
    let basis = LagrangeBasis::gauss_lobatto(p);
    let (qp, qw) = gauss_legendre(p + 3);
    let shapes: Vec<_> = qp.iter().map(|&t| basis.eval(t)).collect();
    let n1 = p + 1;

    let mut total = 0.0;
    for id in mesh.active_elements() {
        let node = mesh.node(id);
        let coeffs = dofmap
            .local_coefficients(id, free_values)
            .ok_or_else(|| Error::Structural(format!("element {id} missing from DOF map")))?;
        let (hx, hy) = (node.width(), node.height());
        let det = 0.25 * hx * hy;
        for (qy, sy) in shapes.iter().enumerate() {
            for (qx, sx) in shapes.iter().enumerate() {
                let pt = Point2::new(
                    node.min.x + 0.5 * (qp[qx] + 1.0) * hx,
                    node.min.y + 0.5 * (qp[qy] + 1.0) * hy,
                );
                let (u, grad) = problem.exact(&pt).ok_or(Error::MissingExactSolution)?;
                let (mut uh, mut gx, mut gy) = (0.0, 0.0, 0.0);
                for j in 0..n1 {
                    for i in 0..n1 {
                        let c = coeffs[j * n1 + i];
                        uh += c * sx.values[i] * sy.values[j];
                        gx += c * sx.derivatives[i] * sy.values[j] * 2.0 / hx;
                        gy += c * sx.values[i] * sy.derivatives[j] * 2.0 / hy;
                    }
                }
                let e2 = match norm {
                    Norm::L2 => (uh - u).powi(2),
                    Norm::H1Semi => (gx - grad[0]).powi(2) + (gy - grad[1]).powi(2),
                };
                total += qw[qx] * qw[qy] * det * e2;
            }
        }
    }
    Ok(total.sqrt())
}
