use std::fmt;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Usage,
    Data,
    Numerical,
}

impl Kind {
    pub fn exit_code(self) -> u8 {
        match self {
            Kind::Usage => 1,
            Kind::Data => 2,
            Kind::Numerical => 3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { kind: Kind::Usage, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self { kind: Kind::Data, message: message.into() }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self { kind: Kind::Numerical, message: message.into() }
    }

    /// One-line JSON written to stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": { "kind": self.kind, "code": self.kind.exit_code(), "message": self.message } }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<cpdmd::Error> for CliError {
    fn from(e: cpdmd::Error) -> Self {
        use cpdmd::Error::*;
        let kind = match e {
            InvalidParameter(_) | UnknownScenario { .. } | EmptyGrid | RankOutOfRange { .. } | OrderOutOfRange { .. } => Kind::Usage,
            NonFinite | Empty | InsufficientHistory { .. } | ShapeMismatch { .. } | NoValidRuns | DegenerateBurnIn => Kind::Data,
            ConvergenceFailure { .. } | NotSquare { .. } | DegenerateWindow | AllCandidatesFailed | NonDiagonalisable { .. } => {
                Kind::Numerical
            }
        };
        Self { kind, message: e.to_string() }
    }
}

pub type CliResult<T> = Result<T, CliError>;
