use spectral_relax::RelaxError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config keys, or input that fails validation.
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    /// A computation that could not produce a result for valid input.
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Numeric(_) => "numeric",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    /// `error kind=<kind> msg="<message>"` on one line.
    pub fn line(&self) -> String {
        let msg = self.to_string().replace('\\', "\\\\").replace('"', "\\\"").replace('\n', " ");
        format!("error kind={} msg=\"{}\"", self.kind(), msg)
    }
}

impl From<RelaxError> for CliError {
    fn from(e: RelaxError) -> Self {
        use RelaxError::*;
        let msg = e.to_string();
        match e {
            DimensionMismatch { .. }
            | NotSquare { .. }
            | InvalidEntry { .. }
            | RowSumError { .. }
            | NotReversible { .. }
            | Reducible { .. }
            | DegeneratePi { .. }
            | InvalidSize(_)
            | InvalidLaziness(_)
            | InvalidSpectrum(_)
            | InvalidProfile(_)
            | InvalidArguments(_)
            | OutOfRange { .. }
            | InvalidInterval { .. }
            | InvalidState { .. }
            | BadStart(_) => CliError::Config(msg),
            _ => CliError::Numeric(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            CliError::Io(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
