//! TraceFEM discretization of the surface biharmonic equation on an
//! implicitly defined surface, using continuous quadratic elements on a
//! tetrahedral background mesh with C⁰ interior penalty edge terms and
//! facet-based stabilization.

pub mod assembly;
pub mod error;
pub mod fespace;
pub mod geometry;
pub mod jet;
pub mod mesh;
pub mod quadrature;
pub mod solver;
pub mod sparse;
pub mod study;

pub use error::{AssemblyError, GeometryError, MeshError, QuadratureError, SolverError, StudyError};
