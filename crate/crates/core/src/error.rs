use thiserror::Error;

/// Errors raised while building or validating a mesh.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("mesh needs at least 4 vertices and 4 faces (got {vertices} vertices, {faces} faces)")]
    TooSmall { vertices: usize, faces: usize },
    #[error("face {face} has {len} vertices; only triangles are supported")]
    NonTriangleFace { face: usize, len: usize },
    #[error("face {face} references vertex {index} but the mesh has {count} vertices")]
    IndexOutOfRange { face: usize, index: usize, count: usize },
    #[error("face {face} repeats a vertex index")]
    RepeatedIndex { face: usize },
    #[error("edge ({0}, {1}) belongs to {2} faces; a closed surface needs exactly 2")]
    NonManifoldEdge(usize, usize, usize),
    #[error("vertex {0} is not used by any face")]
    DanglingVertex(usize),
    #[error("vertex {0} has a non-finite coordinate")]
    NonFiniteCoordinate(usize),
    #[error("surface is not orientable")]
    NotOrientable,
}

/// Errors from the per-edge geometry layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("a face adjacent to edge {edge} is degenerate")]
    DegenerateFace { edge: usize },
    #[error("both r- and s-branches are undefined on edge {edge}; trig tolerance {trig_tol} is too large")]
    BothBranchesUndefined { edge: usize, trig_tol: f64 },
    #[error("requested {branch} branch is undefined on edge {edge}")]
    BranchUndefined { edge: usize, branch: &'static str },
    #[error("velocities are not a first-order flex (max scaled edge residual {max_residual:e})")]
    NotAFirstOrderFlex { max_residual: f64 },
}

/// Errors from the flex-space layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlexError {
    #[error("flex has {got} velocities but the mesh has {expected} vertices")]
    SizeMismatch { expected: usize, got: usize },
    #[error("velocity {0} has a non-finite component")]
    NonFinite(usize),
    #[error("vertex set is collinear; rigid motions do not span 6 dimensions")]
    DegenerateVertexSet,
}

/// Errors from the Dehn-condition layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DehnError {
    #[error("length basis is invalid: {0}")]
    InvalidBasis(String),
    #[error("edge {edge} (length {length}) has no decomposition over the basis with denominators <= {max_denominator}")]
    DecompositionFailed { edge: usize, length: f64, max_denominator: i64 },
    #[error("decomposition does not match the mesh: {0}")]
    InvalidDecomposition(String),
    #[error("theorem hypothesis violated: {0}")]
    TheoremHypothesisViolated(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Flex(#[from] FlexError),
}

/// Errors from the minor layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MinorError {
    #[error("minor index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("full enumeration would visit {count} minors, above the cap of {cap}")]
    EnumerationTooLarge { count: u128, cap: u128 },
    #[error("velocities are not a first-order flex (max scaled edge residual {max_residual:e})")]
    NotAFirstOrderFlex { max_residual: f64 },
    #[error(transparent)]
    Flex(#[from] FlexError),
}

/// Errors from the numeric oracles and continuation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("dihedral angle jumped by {jump} rad between samples; step too large")]
    AngleUnwrapFailure { jump: f64 },
    #[error("continuation stalled at step {step}: {reason}")]
    ContinuationStalled { step: usize, reason: String },
    #[error("kernel dimension dropped to {dim} at step {step}; no nontrivial direction")]
    KernelCollapse { step: usize, dim: usize },
    #[error("invalid example parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Flex(#[from] FlexError),
    #[error(transparent)]
    Minor(#[from] MinorError),
}

/// Errors from the mesh/flex/basis file formats.
#[derive(Debug, Error)]
pub enum IoError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid JSON document: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Dehn(#[from] DehnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Top-level error for the certification pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertifyError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Flex(#[from] FlexError),
    #[error(transparent)]
    Dehn(#[from] DehnError),
    #[error(transparent)]
    Minor(#[from] MinorError),
}
