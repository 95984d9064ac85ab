use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cell {cell} references vertex {vertex}, but the mesh has {count} vertices")]
    InvalidVertex { cell: usize, vertex: usize, count: usize },
    #[error("cell {cell} repeats a vertex")]
    RepeatedVertex { cell: usize },
    #[error("cells {first} and {second} are duplicates")]
    DuplicateCell { first: usize, second: usize },
    #[error("face ({0}, {1}) is shared by more than two cells")]
    NonManifoldFace(usize, usize),
    #[error("cell {0} has zero area")]
    DegenerateCell(usize),
    #[error("cell index {index} out of range for a mesh with {count} cells")]
    InvalidCell { index: usize, count: usize },
    #[error("invalid refinement edge tag {tag} on cell {cell}")]
    InvalidRefinementEdge { cell: usize, tag: u8 },
    #[error("unsupported quadrature degree {degree} (max {max})")]
    UnsupportedDegree { degree: usize, max: usize },
    #[error("unsupported face degree {0}; expected 0 or 1")]
    UnsupportedFaceDegree(usize),
    #[error("dense local solve failed on cell {0}")]
    LocalSolve(usize),
    #[error("linear solver failed: {0}")]
    LinearSolve(String),
    #[error("primal-dual active set iteration did not converge: {0}")]
    PdasNotConverged(String),
    #[error("inputs belong to different meshes or levels: {0}")]
    Mismatch(String),
    #[error("problem has no exact solution")]
    MissingExactSolution,
    #[error("efficiency index undefined: energy error {0:e} is zero")]
    ZeroError(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}
