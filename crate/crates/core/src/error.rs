use crate::model::Diagnostic;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid problem:\n{}", render_diagnostics(.0))]
    InvalidProblem(Vec<Diagnostic>),

    #[error("no applications given")]
    EmptyApps,

    #[error("duplicate application name `{0}`")]
    DuplicateAppName(String),

    #[error("unsupported format version {0} (expected 1)")]
    UnsupportedFormat(u64),

    #[error("mapping has {actual} genes but the problem has {expected} tasks")]
    BadMappingLength { expected: usize, actual: usize },

    #[error("gene {gene}: {reason}")]
    BadMapping { gene: usize, reason: String },

    #[error("task `{task}` is not mapped on processor `{from}`")]
    NotMappedOnFrom { task: String, from: String },

    #[error("migration source and target are both `{0}`")]
    SameProcessor(String),

    #[error("roulette selection needs positive fitness, got {0}")]
    NonPositiveFitness(f64),

    #[error("tournament size {k} is invalid for a population of {pop}")]
    BadTournamentSize { k: usize, pop: usize },

    #[error("evaluator failed on mapping [{mapping}]: {message}")]
    EvaluatorFailure { mapping: String, message: String },

    #[error("mapping space has {size} points, above the cap of {cap}")]
    SpaceTooLarge { size: String, cap: u64 },

    #[error("bad benchmark shape: {0}")]
    BadShape(String),

    #[error("invalid experiment: {0}")]
    SpecInvalid(String),

    #[error("invalid configuration: {0}")]
    BadConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Machine-readable code, stable across releases.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidProblem(_) => "E_INVALID_PROBLEM",
            Error::EmptyApps => "E_EMPTY_APPS",
            Error::DuplicateAppName(_) => "E_DUPLICATE_APP_NAME",
            Error::UnsupportedFormat(_) => "E_UNSUPPORTED_FORMAT",
            Error::BadMappingLength { .. } => "E_BAD_MAPPING_LENGTH",
            Error::BadMapping { .. } => "E_BAD_MAPPING",
            Error::NotMappedOnFrom { .. } => "E_NOT_MAPPED_ON_FROM",
            Error::SameProcessor(_) => "E_SAME_PROCESSOR",
            Error::NonPositiveFitness(_) => "E_NONPOSITIVE_FITNESS",
            Error::BadTournamentSize { .. } => "E_BAD_TOURNAMENT_SIZE",
            Error::EvaluatorFailure { .. } => "E_EVALUATOR_FAILURE",
            Error::SpaceTooLarge { .. } => "E_SPACE_TOO_LARGE",
            Error::BadShape(_) => "E_BAD_SHAPE",
            Error::SpecInvalid(_) => "E_SPEC_INVALID",
            Error::BadConfig(_) => "E_BAD_CONFIG",
            Error::Io(_) => "E_IO",
            Error::Json(_) => "E_PARSE",
            Error::Csv(_) => "E_IO",
        }
    }

    /// True for errors caused by bad input files or arguments, as opposed to
    /// failures while running.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::Csv(_) | Error::EvaluatorFailure { .. })
    }
}

fn render_diagnostics(diags: &[Diagnostic]) -> String {
    diags.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n")
}

/// Reads a whole file; the error message names the path.
pub(crate) fn read_file(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())).into())
}
