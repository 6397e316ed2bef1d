use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("neighbor capacity exceeded for atom {atom}: {count} neighbors of species {species}, capacity {capacity}")]
    Capacity {
        atom: usize,
        species: usize,
        count: usize,
        capacity: usize,
    },

    #[error(
        "stale neighbor list: atom {atom} moved {displacement:.4} A since the last rebuild \
         (limit {limit:.4} A); use a smaller rebuild interval or a larger buffer"
    )]
    StaleNeighborList {
        atom: usize,
        displacement: f64,
        limit: f64,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("table build failed at node {node} (x = {x}): {reason}")]
    TableBuild { node: usize, x: f64, reason: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than a numerical or contract failure.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Usage(_))
    }
}
