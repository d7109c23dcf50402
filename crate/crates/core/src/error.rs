use std::fmt;

/// Broad failure class, used by the CLI to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Domain,
    Convergence,
    Matching,
    Io,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Io => 1,
            ErrorKind::Config => 2,
            ErrorKind::Domain => 3,
            ErrorKind::Convergence => 4,
            ErrorKind::Matching => 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("potential is singular at r = {r}: denominator vanishes")]
    Singularity { r: f64 },

    #[error("x = {x} outside tabulated range [{lo}, {hi}]; extrapolation is not performed")]
    Extrapolation { x: f64, lo: f64, hi: f64 },

    #[error("turning point (E = V) at x ≈ {x}")]
    TurningPoint { x: f64 },

    #[error("turning point bracketed in [{lo}, {hi}]")]
    TurningPointBracket { lo: f64, hi: f64 },

    #[error("classically forbidden region inside domain (segments {segments:?})")]
    ForbiddenRegion { segments: Vec<usize> },

    #[error("amplitude domain error{}: 2k - c^2 = {value} < 0", fmt_at(*.x))]
    AmplitudeDomain { x: Option<f64>, value: f64 },

    #[error("normalization error{}: h = {h} <= 0", fmt_at(*.x))]
    Normalization { x: Option<f64>, h: f64 },

    #[error("far-field matching failed: {reason} (discriminant {discriminant})")]
    Matching { reason: String, discriminant: f64 },

    #[error("fit error in segment {segment}: {reason}")]
    Fit { segment: usize, reason: String },

    #[error("no propagating mode: E = {energy} <= asymptotic height {height}")]
    NoPropagatingMode { energy: f64, height: f64 },

    #[error("did not converge: {reason}; T sequence {sequence:?}")]
    Convergence { reason: String, sequence: Vec<f64> },

    #[error("quadrature did not reach tolerance {tol} on [{a}, {b}]")]
    Quadrature { a: f64, b: f64, tol: f64 },

    #[error("config error{}: {msg}", fmt_line(*.line))]
    Config { line: Option<usize>, msg: String },

    #[error("missing config key `{0}`")]
    MissingKey(String),

    #[error("io error: {0}")]
    Io(String),
}

fn fmt_line(line: Option<usize>) -> String {
    match line {
        Some(l) => format!(" (line {l})"),
        None => String::new(),
    }
}

fn fmt_at(x: Option<f64>) -> String {
    match x {
        Some(x) => format!(" at x = {x}"),
        None => String::new(),
    }
}

impl Error {
    /// Attach a grid location to amplitude and normalization failures.
    pub fn at(self, x: f64) -> Self {
        match self {
            Error::AmplitudeDomain { value, .. } => Error::AmplitudeDomain { x: Some(x), value },
            Error::Normalization { h, .. } => Error::Normalization { x: Some(x), h },
            other => other,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config { .. } | Error::MissingKey(_) => ErrorKind::Config,
            Error::Convergence { .. } | Error::Quadrature { .. } => ErrorKind::Convergence,
            Error::Matching { .. } => ErrorKind::Matching,
            Error::Io(_) => ErrorKind::Io,
            _ => ErrorKind::Domain,
        }
    }

    pub(crate) fn domain(msg: impl fmt::Display) -> Self {
        Error::Domain(msg.to_string())
    }

    pub(crate) fn config(line: Option<usize>, msg: impl fmt::Display) -> Self {
        Error::Config {
            line,
            msg: msg.to_string(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
