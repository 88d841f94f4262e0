use thiserror::Error;

use crate::session::Diagnostic;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("session has no keystrokes")]
    EmptyKeyStream,

    #[error("invalid session: {}", summarize(.0))]
    InvalidSession(Vec<Diagnostic>),

    #[error("thresholds cannot be derived: {within} within-word and {between} between-word intervals")]
    UnderivableThresholds { within: usize, between: usize },

    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },

    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),

    #[error("non-positive duration {0}")]
    NonPositiveDuration(f64),

    #[error("k = {k} exceeds the number of translators ({translators})")]
    TooFewTranslators { k: usize, translators: usize },

    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),

    #[error("{0}")]
    Input(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn summarize(diags: &[Diagnostic]) -> String {
    match diags.first() {
        Some(d) if diags.len() == 1 => d.to_string(),
        Some(d) => format!("{d} (and {} more)", diags.len() - 1),
        None => "no diagnostics".to_string(),
    }
}
