use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("r = {r} lies outside the warping interval [{a}, {b})")]
    Domain { r: f64, a: f64, b: f64 },

    #[error("warping factor is not positive at r = {r} (value {value})")]
    InvalidWarping { r: f64, value: f64 },

    #[error("spacelike guard violated at node {node}: v^2 = {v2} <= {eps_v}")]
    Spacelike { node: usize, v2: f64, eps_v: f64 },

    #[error("direction {dir} out of range for a {n}-dimensional fiber")]
    Direction { dir: usize, n: usize },

    #[error("volume {volume} outside the attainable range [0, {max})")]
    VolumeRange { volume: f64, max: f64 },

    #[error("field has {got} values but the grid has {expected} nodes")]
    FieldLength { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    Invalid(String),
}
