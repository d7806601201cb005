use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema violation at {path}: {detail}")]
    Schema { path: String, detail: String },
    #[error("duplicate id `{id}` in {section}")]
    DuplicateId { section: String, id: String },
    #[error("dangling reference in {element}: {detail}")]
    DanglingReference { element: String, detail: String },
    #[error("feeder has no source bus")]
    MissingSource,
    #[error("switch configuration has {got} entries, model has {expected} switches")]
    SwitchCountMismatch { expected: usize, got: usize },
    #[error("too many switches for exhaustive enumeration ({0} > 20)")]
    TooManySwitches(usize),
    #[error("switch configuration islands load or DG buses: {0:?}")]
    Infeasible(Vec<String>),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("unknown {kind} `{id}`")]
    Unknown { kind: &'static str, id: String },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },
    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("checkpoint version {found} not supported (expected {expected})")]
    Version { expected: u32, found: u32 },
    #[error("corrupt payload: {0}")]
    Corrupt(String),
    #[error("feeder fingerprint mismatch: checkpoint {checkpoint}, dataset {actual}")]
    Fingerprint { checkpoint: String, actual: String },
    #[error("system is unobservable (rank deficiency {0})")]
    Unobservable(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-parsable class name, used by the command line front-end.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Schema { .. } => "schema",
            Error::DuplicateId { .. } => "duplicate_id",
            Error::DanglingReference { .. } => "dangling_reference",
            Error::MissingSource => "missing_source",
            Error::SwitchCountMismatch { .. } => "switch_count",
            Error::TooManySwitches(_) => "too_many_switches",
            Error::Infeasible(_) => "infeasible_topology",
            Error::Singular(_) => "singular",
            Error::Unknown { .. } => "unknown_id",
            Error::Invalid(_) => "invalid_input",
            Error::Shape { .. } => "shape",
            Error::InsufficientSamples { .. } => "insufficient_samples",
            Error::Diverged(_) => "diverged",
            Error::Version { .. } => "version",
            Error::Corrupt(_) => "corrupt",
            Error::Fingerprint { .. } => "fingerprint",
            Error::Unobservable(_) => "unobservable",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
