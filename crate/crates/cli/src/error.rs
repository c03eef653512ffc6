use std::path::PathBuf;

use serde::Serialize;

#[derive(Debug)]
pub enum CliError {
    Core(econorder::Error),
    Config { field: String, message: String },
    Io { path: PathBuf, source: std::io::Error },
    ChecksFailed(Vec<String>),
}

impl From<econorder::Error> for CliError {
    fn from(e: econorder::Error) -> Self {
        CliError::Core(e)
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    exit_code: i32,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    failures: Option<&'a [String]>,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(econorder::Error::Infeasible(_)) => 2,
            CliError::Core(econorder::Error::NonConvergence(_)) => 3,
            CliError::Core(econorder::Error::CapExceeded { .. }) => 4,
            _ => 1,
        }
    }

    fn kind(&self) -> &'static str {
        use econorder::Error as E;
        match self {
            CliError::Core(e) => match e {
                E::LengthMismatch { .. } => "length_mismatch",
                E::InvalidGrid(_) => "invalid_grid",
                E::InvalidConfig(_) => "invalid_config",
                E::Infeasible(_) => "infeasible",
                E::CapExceeded { .. } => "cap_exceeded",
                E::Singularity { .. } => "singularity",
                E::NonConvergence(_) => "non_convergence",
                E::Domain(_) => "domain",
                E::Parse { .. } => "parse",
                E::Io(_) => "io",
            },
            CliError::Config { .. } => "config",
            CliError::Io { .. } => "io",
            CliError::ChecksFailed(_) => "checks_failed",
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Core(e) => e.to_string(),
            CliError::Config { field, message } => format!("{field}: {message}"),
            CliError::Io { path, source } => format!("{}: {source}", path.display()),
            CliError::ChecksFailed(f) => format!("{} check(s) failed", f.len()),
        }
    }

    /// One-line JSON document for stderr.
    pub fn to_json(&self) -> String {
        let body = ErrorBody {
            kind: self.kind(),
            exit_code: self.exit_code(),
            message: self.message(),
            field: match self {
                CliError::Config { field, .. } => Some(field),
                _ => None,
            },
            failures: match self {
                CliError::ChecksFailed(f) => Some(f),
                _ => None,
            },
        };
        serde_json::json!({ "error": body }).to_string()
    }
}
