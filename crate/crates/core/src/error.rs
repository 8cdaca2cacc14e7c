use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("cannot project the pole (z = {z})")]
    PoleProjection { z: f64 },
    #[error("normal vector is not unit length (|nu| = {norm})")]
    NonUnitNormal { norm: f64 },
    #[error("degenerate boundary: {0}")]
    DegenerateBoundary(String),
    #[error("boundary sample {index} lies outside the unit disk (|q| = {radius})")]
    NotInDisk { index: usize, radius: f64 },
    #[error("boundary curve self-intersects between segments {first} and {second}")]
    SelfIntersection { first: usize, second: usize },
    #[error("domain is not convex (minimum boundary curvature {kappa_min:.6e})")]
    NotConvex { kappa_min: f64 },
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("mesh generation failed: {0}")]
    MeshFailure(String),
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("exponent p = {p} is outside the certified range; pass the experimental flag")]
    Uncertified { p: f64 },
    #[error("invalid exponent p = {0}")]
    InvalidExponent(f64),
    #[error("field value at vertex {vertex} is not positive ({value})")]
    NonPositive { vertex: usize, value: f64 },
    #[error("vertex {vertex} has only {usable} usable neighbours for the derivative fit")]
    PatchDeficient { vertex: usize, usable: usize },
    #[error("exclusion margin removed every interior vertex")]
    EmptyInterior,
    #[error("level {c} is not a regular value (min |grad u| = {grad_min:.3e})")]
    NotRegularValue { c: f64, grad_min: f64 },
    #[error("level {c} is empty (max u = {max:.6e})")]
    EmptyLevel { c: f64, max: f64 },
    #[error("boundary band holds only {count} vertices")]
    LayerTooThin { count: usize },
    #[error("invalid band: {0}")]
    InvalidBand(String),
    #[error("shooting failed: {0}")]
    ShootingFailed(String),
    #[error("mesh does not match the radial domain: {0}")]
    DomainMismatch(String),
    #[error("field does not belong to this mesh ({values} values, {vertices} vertices)")]
    FieldMismatch { values: usize, vertices: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
