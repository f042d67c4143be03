use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    /// The configuration does not match the schema. `path` is the dotted
    /// path of the offending field.
    #[error("invalid configuration at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error(transparent)]
    Core(mediator_core::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code: 2 for schema violations, 3 for capacity and guard
    /// failures, 4 for anything else.
    pub fn exit_code(&self) -> u8 {
        use mediator_core::Error as E;
        match self {
            CliError::Schema { .. } => 2,
            CliError::Core(E::Argument(_) | E::Contract(_) | E::Parse(_)) => 2,
            CliError::Core(
                E::Capacity { .. } | E::GridTooSmall { .. } | E::WrapContamination { .. } | E::StepSize { .. },
            ) => 3,
            _ => 4,
        }
    }

    pub fn hint(&self) -> Option<&'static str> {
        use mediator_core::Error as E;
        match self {
            CliError::Core(E::Capacity { .. }) => Some("reduce the grid sizes or dimensions in the scenario"),
            CliError::Core(E::GridTooSmall { .. }) => Some("widen the named grid or narrow the initial packets"),
            CliError::Core(E::WrapContamination { .. }) => {
                Some("widen x_grid or narrow psi_c so the mediator stays away from the seam")
            }
            CliError::Core(E::StepSize { .. }) => Some("reduce dt"),
            _ => None,
        }
    }
}

impl From<mediator_core::Error> for CliError {
    fn from(e: mediator_core::Error) -> Self {
        CliError::Core(e)
    }
}

/// Turns argument errors raised while building a scenario into schema
/// errors located at `path`; other errors pass through.
pub(crate) fn at(path: &str) -> impl Fn(mediator_core::Error) -> CliError + '_ {
    move |e| match e {
        mediator_core::Error::Argument(m) | mediator_core::Error::Contract(m) => CliError::schema(path, m),
        other => CliError::Core(other),
    }
}
