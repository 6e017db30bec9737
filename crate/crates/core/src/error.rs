use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("kernel evaluated at zero displacement")]
    Singular,
    #[error("spectral parameter outside the admissible domain: {0}")]
    Domain(String),
    #[error("derivative kernel is unbounded at the branch point lambda = {0}")]
    BranchPoint(f64),
    #[error("excluded coupling eta=+-2c (eta = {eta}, c = {c})")]
    ExcludedCoupling { eta: f64, c: f64 },
    #[error("I + eta M is ill-conditioned (condition number {0:.3e})")]
    IllConditioned(f64),
    #[error("assembled operator is not Hermitian (relative residual {0:.3e})")]
    NonHermitian(f64),
    #[error("target at distance {distance:.3e} from the surface, below the node spacing {h_min:.3e}")]
    NearSurface { distance: f64, h_min: f64 },
    #[error("mesh parse error: {0}")]
    Parse(String),
    #[error("non-closed mesh: edge ({0}, {1}) has a single adjacent face")]
    NonClosedMesh(usize, usize),
    #[error("degenerate triangle {0}")]
    DegenerateTriangle(usize),
    #[error("integral diverges for exponent s = {0}")]
    Divergent(f64),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("non-finite value in output: {0}")]
    NonFinite(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Errors coming from numerics rather than from malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::IllConditioned(_) | Error::NonHermitian(_) | Error::NonFinite(_)
        )
    }
}
