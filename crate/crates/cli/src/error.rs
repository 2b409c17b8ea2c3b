use otinfer_core::Error as CoreError;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or flag combinations.
    Usage(String),
    /// Anything the library reports.
    Core(CoreError),
    /// Unreadable or unwritable CLI-level files (manifests, truth states).
    Data(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Core(err) => match err {
                CoreError::Io(_)
                | CoreError::Ingest(_)
                | CoreError::Corrupt(_)
                | CoreError::Version { .. }
                | CoreError::EmptyChain(_)
                | CoreError::Shape(_)
                | CoreError::Domain(_)
                | CoreError::Graph(_) => 2,
                CoreError::NotConverged { .. }
                | CoreError::DegenerateLatent(_)
                | CoreError::UnreachablePair { .. }
                | CoreError::DegenerateObservation
                | CoreError::ChainInit { .. } => 3,
                CoreError::Config(_) => 1,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Core(err) => write!(f, "{err}"),
            CliError::Data(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        CliError::Core(err)
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Core(CoreError::Io(err))
    }
}
