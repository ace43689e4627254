use serde::Serialize;
use thiserror::Error;

use shapcausal::alignment::AlignmentError;
use shapcausal::causal::CausalError;
use shapcausal::dataset::DataError;
use shapcausal::gbdt::GbdtError;
use shapcausal::shap::ShapError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("missing artifact `{artifact}`; run `{producer}` first")]
    Prerequisite { artifact: String, producer: &'static str },
    #[error("artifact `{artifact}` does not match its recorded hash (expected {expected}, found {found}); rerun `{producer}`")]
    Integrity {
        artifact: String,
        producer: &'static str,
        expected: String,
        found: String,
    },
    #[error("artifact `{artifact}` was built from an older `{input}`; rerun `{producer}`")]
    Stale {
        artifact: String,
        input: String,
        producer: &'static str,
    },
    #[error("{0}")]
    Stage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Prerequisite { .. } | CliError::Integrity { .. } | CliError::Stale { .. } | CliError::Stage(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Data(_) => "data",
            CliError::Prerequisite { .. } => "prerequisite",
            CliError::Integrity { .. } => "integrity",
            CliError::Stale { .. } => "stale",
            CliError::Stage(_) => "stage",
        }
    }

    pub fn record(&self, command: &str) -> ErrorRecord {
        let (artifact, producer) = match self {
            CliError::Prerequisite { artifact, producer }
            | CliError::Integrity { artifact, producer, .. }
            | CliError::Stale { artifact, producer, .. } => (Some(artifact.clone()), Some(*producer)),
            _ => (None, None),
        };
        ErrorRecord {
            status: "error",
            command: command.to_string(),
            kind: self.kind(),
            exit_code: self.exit_code(),
            message: self.to_string(),
            artifact,
            producer,
        }
    }
}

/// What a failed run prints to stderr (one JSON line) and leaves in `error.json`.
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub status: &'static str,
    pub command: String,
    pub kind: &'static str,
    pub exit_code: i32,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub artifact: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub producer: Option<&'static str>,
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<GbdtError> for CliError {
    fn from(e: GbdtError) -> Self {
        CliError::Stage(e.to_string())
    }
}

impl From<ShapError> for CliError {
    fn from(e: ShapError) -> Self {
        CliError::Stage(e.to_string())
    }
}

impl From<CausalError> for CliError {
    fn from(e: CausalError) -> Self {
        match e {
            CausalError::Data(d) => d.into(),
            e => CliError::Stage(e.to_string()),
        }
    }
}

impl From<AlignmentError> for CliError {
    fn from(e: AlignmentError) -> Self {
        CliError::Stage(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Stage(format!("json: {e}"))
    }
}
