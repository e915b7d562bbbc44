use std::fmt;
use std::path::Path;

/// Exit status contract: 0 success, 2 usage, 3 data, 4 internal.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

impl From<kazefuse::Error> for CliError {
    fn from(e: kazefuse::Error) -> Self {
        use kazefuse::Error as E;
        let hint = match &e {
            E::FingerprintMismatch { .. } => {
                "\nhint: re-extract the features with the extractor settings in the model's .config.toml, or retrain on these features"
            }
            E::VersionMismatch { .. } => "\nhint: regenerate the file with this version of kazefuse",
            E::SchemaMismatch(_) => "\nhint: files from different schemes or settings cannot be mixed",
            _ => "",
        };
        if e.is_data_error() {
            CliError::Data(format!("{e}{hint}"))
        } else {
            CliError::Usage(e.to_string())
        }
    }
}
