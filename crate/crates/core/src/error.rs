use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("invalid impact: {0}")]
    InvalidImpact(String),
    #[error("decoupling matrix singular (condition estimate {0:.3e})")]
    DecouplingSingular(f64),
    #[error("degenerate phase interval: theta_plus = theta_minus = {0}")]
    DegenerateInterval(f64),
    #[error("no impact within {0} s (fall or missed touchdown)")]
    NoImpact(f64),
    #[error("phase variable not monotonic at t = {t:.4} s (dtheta = {rate:.3e})")]
    NonMonotonicPhase { t: f64, rate: f64 },
    #[error("integration failure: {0}")]
    Integration(String),
    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NewtonDiverged { iterations: usize, residual: f64 },
    #[error("reduced map is not affine: residual {0:.3e}")]
    NotAffine(f64),
    #[error("zero speed sensitivity to the modulation parameters")]
    ZeroSensitivity,
    #[error("gait design failed: {0}")]
    Design(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("destination {dst} unreachable from {src}; source component: {component:?}")]
    Unreachable { src: usize, dst: usize, component: Vec<usize> },
    #[error("constraint violated at step {step}: {reason}")]
    ConstraintViolation { step: usize, reason: String },
    #[error("missing artifact {path}: run `{command}` first")]
    MissingArtifact { path: String, command: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable snake_case identifier of the variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParams(_) => "invalid_params",
            Error::Config(_) => "config",
            Error::Singular(_) => "singular",
            Error::InvalidImpact(_) => "invalid_impact",
            Error::DecouplingSingular(_) => "decoupling_singular",
            Error::DegenerateInterval(_) => "degenerate_interval",
            Error::NoImpact(_) => "no_impact",
            Error::NonMonotonicPhase { .. } => "non_monotonic_phase",
            Error::Integration(_) => "integration",
            Error::NewtonDiverged { .. } => "newton_diverged",
            Error::NotAffine(_) => "not_affine",
            Error::ZeroSensitivity => "zero_sensitivity",
            Error::Design(_) => "design",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Unreachable { .. } => "unreachable",
            Error::ConstraintViolation { .. } => "constraint_violation",
            Error::MissingArtifact { .. } => "missing_artifact",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    /// Machine-readable form: `code`, `message` and the structured fields
    /// of variants that carry them.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::json!({ "error": self.code(), "message": self.to_string() });
        let extra = match self {
            Error::MissingArtifact { path, command } => serde_json::json!({ "path": path, "command": command }),
            Error::Unreachable { src, dst, component } => {
                serde_json::json!({ "src": src, "dst": dst, "component": component })
            }
            Error::ConstraintViolation { step, reason } => serde_json::json!({ "step": step, "reason": reason }),
            Error::NewtonDiverged { iterations, residual } => {
                serde_json::json!({ "iterations": iterations, "residual": residual })
            }
            _ => serde_json::json!({}),
        };
        if let (Some(obj), serde_json::Value::Object(extra)) = (v.as_object_mut(), extra) {
            obj.extend(extra);
        }
        v
    }
}
