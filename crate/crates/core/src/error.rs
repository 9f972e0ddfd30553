use thiserror::Error;

use crate::fem::DofKey;
use crate::mesh2d::ElementId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("singularity ({x}, {y}) lies outside the closed domain")]
    SingularityOutsideDomain { x: f64, y: f64 },

    #[error("mesh is not 1-irregular at element {element}: {detail}")]
    Irregular { element: ElementId, detail: String },

    #[error("structural error: {0}")]
    Structural(String),

    #[error("polynomial order {0} outside supported range 1..=10")]
    InvalidOrder(usize),

    #[error("non-positive Jacobian on element {0}")]
    NonPositiveJacobian(ElementId),

    #[error("front {front}: pivot for dof {dof:?} is numerically zero ({pivot:e})")]
    SingularFront { front: usize, dof: DofKey, pivot: f64 },

    #[error("no stored factor for front {0}")]
    MissingFactor(usize),

    #[error("reuse cache does not match the elimination tree at front {front}: {detail}")]
    CacheInvalid { front: usize, detail: String },

    #[error("problem has no exact solution; error norms unavailable")]
    MissingExactSolution,

    #[error("matrix is singular")]
    SingularMatrix,

    #[error("dense solve residual {residual:e} exceeds {tolerance:e}")]
    ResidualCheckFailed { residual: f64, tolerance: f64 },

    #[error("mesh with refinement count {new} is not a single refinement of {old}")]
    NotRefinementOf { old: usize, new: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
