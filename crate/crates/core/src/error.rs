use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point {0:?} is outside the tubular neighbourhood of the surface")]
    OutsideBand([f64; 3]),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("degenerate box: lo = {lo}, hi = {hi}")]
    DegenerateBox { lo: f64, hi: f64 },
    #[error("at least 2 cells per axis are required, got {0}")]
    TooFewCells(usize),
    #[error("level-set value exactly zero at a tet vertex (guard not applied)")]
    ZeroLevelSet,
    #[error("surface leaves background domain (sign change on boundary face {0:?})")]
    SurfaceLeavesDomain([usize; 3]),
    #[error("the discrete surface does not intersect the background mesh")]
    EmptyCut,
    #[error("degenerate tetrahedron (volume {0:e})")]
    DegenerateTet(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("no Gauss-Legendre rule of degree {0} (supported: 0..=11)")]
    UnsupportedSegmentDegree(usize),
    #[error("no triangle rule of degree {0} (supported: 1, 2, 4, 6, 8)")]
    UnsupportedTriangleDegree(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("surface edge {0} has no polygon on one of its sides")]
    MissingNeighbor(usize),
    #[error("invalid form parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("matrix is not symmetric (max deviation {0:e})")]
    NotSymmetric(f64),
    #[error("dimension mismatch: matrix {matrix}, vector {vector}")]
    DimensionMismatch { matrix: usize, vector: usize },
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("no convergence after {} iterations (relative residual {:e})", .0.iterations, .0.residual)]
    NotConverged(crate::solver::SolveReport),
    #[error("dense factorization failed: {0}")]
    Factorization(&'static str),
}

/// Failure of one level of a convergence study.
#[derive(Debug, Error)]
pub enum StudyError {
    #[error("invalid study configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
