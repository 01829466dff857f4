use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not unitary (max |MM†-I| = {defect:.3e})")]
    NonUnitary { defect: f64 },

    #[error("eigensolver did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("reduction is singular: |det| = {det:.3e}")]
    SingularReduction { det: f64 },

    #[error("band gap {gap:.3e} at flux ({phi1:.6}, {phi2:.6}) closes on the grid")]
    GapClosure { gap: f64, phi1: f64, phi2: f64 },

    #[error("ellipses are tangent; pole preimages are not regular")]
    TangentEllipses,

    #[error("degenerate ellipse: |A||B| = {product:.3e}")]
    DegenerateEllipse { product: f64 },

    #[error("Jacobian too small to sign: {value:.3e}")]
    DegenerateJacobian { value: f64 },

    #[error("preimage at k = {k:.6} cannot be assigned to a single band")]
    AmbiguousBand { k: f64 },

    #[error("crossing sets disagree by {deviation:.3e}")]
    Inconsistent { deviation: f64 },

    #[error("|dh0/dk| = {dh0:.3e} does not dominate |dh/dk| = {dh:.3e}")]
    AssumptionViolated { dh0: f64, dh: f64 },

    #[error("singular Jacobian: det = {det:.3e}")]
    SingularJacobian { det: f64 },

    #[error("scattering matrix has imaginary parts up to {max_imag:.3e}")]
    ComplexInput { max_imag: f64 },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid scan: {0}")]
    InvalidScan(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Parse { .. } | Error::InvalidScan(_) | Error::ComplexInput { .. })
    }
}
