//! Frontal solution of h-refined finite element sequences towards point
//! singularities, with reuse of partial LU factors between grids.

pub mod cli;
pub mod dense;
pub mod elimination;
pub mod error;
pub mod fem;
pub mod fit;
pub mod frontal;
pub mod mesh2d;
pub mod oracle;
pub mod report;
pub mod reuse;
pub mod verify;

pub use error::{Error, Result};
