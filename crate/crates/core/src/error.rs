use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Simpson rule needs an even positive panel count, got {0}")]
    OddPanels(usize),

    #[error("non-finite integrand sample {value} at {location}")]
    NonFiniteSample { location: String, value: f64 },

    #[error("angle {value} outside [{lo}, {hi}]")]
    AngleOutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("oseen tensor is singular at the origin")]
    SingularPoint,

    #[error("chord distance {0:e} is negative beyond round-off")]
    NegativeGamma(f64),

    #[error("CFL violated: dt * max|A1| = {courant:.4e} exceeds spacing {spacing:.4e}")]
    Cfl { courant: f64, spacing: f64 },

    #[error("surface collapsed at t = {time}: min r = {min_r:e} at node {node}")]
    Collapse { time: f64, min_r: f64, node: usize },

    #[error("particles {i} and {j} coincide and no regularization is set")]
    CoincidentParticles { i: usize, j: usize },

    #[error("non-finite position for particle {index} at t = {time}")]
    BlowUp { index: usize, time: f64 },

    #[error("eigensolver did not converge for a {dim}x{dim} matrix")]
    EigenSolver { dim: usize, dump: Option<PathBuf> },

    #[error("quadrature failure for Galerkin entry ({i}, {j}): {source}")]
    Galerkin {
        i: usize,
        j: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
