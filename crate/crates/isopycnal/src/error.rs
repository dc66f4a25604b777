use thiserror::Error;

/// Every failure the library reports.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter `{key}`: {reason}")]
    InvalidParameter { key: String, reason: String },
    #[error("stratification not stable: min rho' = {min_rho_prime:.3e} < c_star = {c_star:.3e} at r = {r:.4}")]
    StabilityViolation {
        min_rho_prime: f64,
        c_star: f64,
        r: f64,
    },
    #[error("density {rho:.4e} at r = {r:.4} leaves [{rho_min}, {rho_max}]")]
    CavitationViolation {
        rho: f64,
        r: f64,
        rho_min: f64,
        rho_max: f64,
    },
    #[error(
        "coordinate jacobian degenerate: min(1+eps h) = {min_jacobian:.4e} < h_star = {h_star:.4e}"
    )]
    JacobianDegenerate { min_jacobian: f64, h_star: f64 },
    #[error("pressure solver did not converge: {iterations} iterations, relative residual {residual:.3e}")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("Neumann data incompatible: relative defect {defect:.3e} > {tolerance:.1e}")]
    CompatibilityDefect { defect: f64, tolerance: f64 },
    #[error("displaced level r - eps*eta = {value:.6} leaves the profile domain [0, 1]")]
    DomainEscape { value: f64 },
    #[error("time step {dt:.4e} exceeds the CFL limit {limit:.4e}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("state blown up at t = {t:.6}: {reason}")]
    BlownUp { t: f64, reason: String },
    #[error("density column {column} is not strictly decreasing in z near z = {z:.6}")]
    MonotonicityViolation { column: usize, z: f64 },
    #[error("level search failed in column {column} for target density {target:.8}")]
    RootFindFailure { column: usize, target: f64 },
    #[error("point {value:.6} outside the interpolation range [{lo:.6}, {hi:.6}]")]
    InterpolationDomain { value: f64, lo: f64, hi: f64 },
    #[error("need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },
    #[error("snapshot format mismatch: {0}")]
    FormatMismatch(String),
    #[error("i/o failure: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
