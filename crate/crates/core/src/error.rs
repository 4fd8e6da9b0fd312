use thiserror::Error;

/// Errors raised while loading panels, fitting models or running experiments.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("duplicate observation for unit {unit}, time {time}")]
    DuplicateObservation { unit: String, time: String },

    #[error("invalid data: {0}")]
    Data(String),

    #[error(
        "singular design: columns {columns:?} are collinear with the fixed effects or each other"
    )]
    SingularDesign { columns: Vec<String> },

    #[error("degenerate leverage: every unit has zero leverage at time position {position}")]
    DegenerateLeverage { position: usize },

    #[error("perfect leverage: I - H is numerically singular for unit {unit} (smallest eigenvalue {min_eigenvalue:.3e})")]
    PerfectLeverage { unit: usize, min_eigenvalue: f64 },

    #[error("insufficient degrees of freedom: {0}")]
    InsufficientDof(String),

    #[error("zero standard error with a nonzero deviation from the hypothesised value")]
    InfiniteStatistic,

    #[error("restriction matrix is collinear: R V R' is singular")]
    CollinearRestriction,

    #[error("{0} is out of the domain of the distribution function")]
    Domain(String),

    #[error("power curves require the null-statistic sample of the same experiment")]
    MissingNullSample,
}

impl Error {
    /// True for problems with the input data or configuration rather than
    /// with estimation on otherwise valid data.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io(_)
                | Error::Config(_)
                | Error::Parse { .. }
                | Error::DuplicateObservation { .. }
                | Error::Data(_)
        )
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        let row = e.position().map(|p| p.line() as usize).unwrap_or(0);
        Error::Parse {
            row,
            message: e.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
