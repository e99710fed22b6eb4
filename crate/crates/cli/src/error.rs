use std::process::ExitCode;

use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] nsrl_core::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: &'a str,
    exit_code: u8,
    message: String,
}

impl CliError {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 2 for configuration or validation problems, 3 for numerical failure,
    /// 4 for I/O.
    pub fn exit_code(&self) -> u8 {
        use nsrl_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(E::Io(_) | E::Format { .. } | E::UnsupportedVersion { .. }) => 4,
            CliError::Core(_) => 2,
            CliError::Io { .. } | CliError::Json(_) => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "validation",
            3 => "numerical",
            _ => "io",
        }
    }

    /// One-line JSON record for stderr.
    pub fn record(&self) -> String {
        let rec = ErrorRecord {
            error: self.kind(),
            exit_code: self.exit_code(),
            message: self.to_string(),
        };
        serde_json::to_string(&rec).unwrap_or_else(|_| format!("{{\"error\":\"{}\"}}", self.kind()))
    }

    pub fn report(&self) -> ExitCode {
        eprintln!("{}", self.record());
        ExitCode::from(self.exit_code())
    }
}
