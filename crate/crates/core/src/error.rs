use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("operator is not Hermitian (max asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is singular or numerically not invertible")]
    Singular,

    #[error("flux {p}/{q} is incommensurate with {nx} sites along x")]
    IncommensurateFlux { p: i64, q: i64, nx: usize },

    #[error("total flux through the torus is {0}, which is not an integer")]
    NonIntegerFlux(f64),

    #[error("spectral gap at mu={mu} closed (gap {gap:.3e}, occupied states {before} -> {after})")]
    GapClosed {
        mu: f64,
        gap: f64,
        before: usize,
        after: usize,
    },

    #[error("symbol is not in the image of the transform (reconstruction residual {0:.3e})")]
    Reconstruction(f64),

    #[error("frequency quadrature did not converge (estimated error {0:.3e})")]
    NonConvergence(f64),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("model is not periodic under the requested supercell: {0}")]
    NotPeriodic(String),

    #[error("band crossing inside the requested band set (min separation {0:.3e})")]
    BandCrossing(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
