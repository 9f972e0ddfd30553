//! Nodal Gauss-Lobatto finite elements of uniform order on the refinement
//! meshes, with 1-irregular constrained approximation.

pub mod basis;
pub mod dofmap;
pub mod element;
pub mod norms;
pub mod problem;

pub use basis::{constraint_coefficients, shape_functions_1d, BasisOrder, EdgeHalf, ShapeValues};
pub use dofmap::{DofKey, DofMap, ElementDofMap, ResolvedDof};
pub use element::{apply_constraints, element_stiffness_load, CondensedElement, ElementMatrix};
pub use norms::{compute_error, Norm};
pub use problem::{AffineSolution, LShapeCorner, ModelProblem, ProblemKind, SingularPower};

use crate::error::Result;
use crate::mesh2d::Mesh;

pub fn build_dof_map(mesh: &Mesh, order: BasisOrder, problem: &dyn ModelProblem) -> Result<DofMap> {
    DofMap::build(mesh, order, problem)
}

/// Condensed element systems of all active elements, in `(level, id)` order.
pub fn condensed_elements(
    mesh: &Mesh,
    dofmap: &DofMap,
    problem: &dyn ModelProblem,
) -> Result<Vec<CondensedElement>> {
    mesh.active_elements()
        .into_iter()
        .map(|id| {
            let em = element_stiffness_load(mesh.node(id), problem, dofmap.order())?;
            let map = dofmap.element_map(id).expect("active element has a DOF map");
            Ok(apply_constraints(&em, map))
        })
        .collect()
}
