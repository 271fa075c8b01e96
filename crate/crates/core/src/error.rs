use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh is empty")]
    EmptyMesh,
    #[error("triangle {0} is degenerate")]
    DegenerateTriangle(usize),
    #[error("triangle {triangle} references vertex {vertex}, but the mesh has {count} vertices")]
    IndexOutOfRange {
        triangle: usize,
        vertex: usize,
        count: usize,
    },
    #[error("triangle {0} repeats a vertex index")]
    RepeatedVertex(usize),
    #[error("edge ({0}, {1}) is shared by more than two triangles")]
    NonManifoldEdge(usize, usize),
    #[error("vertex {0} is not referenced by any triangle")]
    UnreferencedVertex(usize),
    #[error("length mismatch: expected {expected} values, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("signal value {index} is not finite")]
    NonFinite { index: usize },
    #[error("unsupported exponent p = {0}")]
    BadExponent(f64),
    #[error("smoothing parameter must be positive, got {0}")]
    NonpositiveEpsilon(f64),
    #[error("normal has norm {0}, expected a unit vector")]
    NonUnitNormal(f64),
    #[error("signal does not match the mesh: {0}")]
    MeshMismatch(String),
    #[error("invalid parameter: {0}")]
    BadParams(String),
    #[error("point at distance {distance} lies outside the reach {reach} of the surface")]
    OutsideReach { distance: f64, reach: f64 },
    #[error("invalid mesh step h = {0}")]
    BadStep(f64),
    #[error("{count} surface nodes (measure {measure}) have no mesh point above them")]
    LiftMiss { count: usize, measure: f64 },
    #[error("quadrature did not converge: last relative change {change} at order {order}")]
    NoConvergence { order: usize, change: f64 },
    #[error("the BV energy is not differentiable with epsilon = 0")]
    NonsmoothEnergy,
    #[error("operation requires the {expected} model")]
    WrongModel { expected: &'static str },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("count mismatch: {0}")]
    CountMismatch(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Errors caused by the numerics rather than by the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::DegenerateTriangle(_)
                | Error::OutsideReach { .. }
                | Error::LiftMiss { .. }
                | Error::NoConvergence { .. }
                | Error::NonsmoothEnergy
        )
    }
}
