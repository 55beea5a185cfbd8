use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] rfpulse::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// For returning through library callbacks.
    pub fn into_core(self) -> rfpulse::Error {
        match self {
            CliError::Core(e) => e,
            CliError::Io(e) => rfpulse::Error::Io(e),
            CliError::Config(m) => rfpulse::Error::Contract(m),
        }
    }

    /// 0 success, 1 io, 2 config, 3 numerical failure, 4 infeasible.
    pub fn exit_code(&self) -> i32 {
        use rfpulse::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 1,
            CliError::Core(e) => match e {
                E::Numerical(_) => 3,
                E::Infeasible(_) => 4,
                E::Io(_) | E::Csv(_) | E::Json(_) => 1,
                E::InvalidPulse(_) | E::InvalidGrid(_) | E::Contract(_) | E::InvalidSpec(_) | E::Parse(_) => 2,
            },
        }
    }
}
