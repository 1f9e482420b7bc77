use serde_json::{json, Value};
use thiserror::Error;

/// Every failure the CLI reports. Exit 2 for anything the user can fix in
/// their input, 3 for failures inside a run.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}{message}", if key.is_empty() { String::new() } else { format!("{key}: ") })]
    Config { key: String, message: String },
    #[error("{message}")]
    Input { message: String, details: Value },
    #[error("{message}")]
    Engine { message: String, details: Value },
}

impl CliError {
    pub fn config(key: &str, message: impl Into<String>) -> Self {
        CliError::Config { key: key.to_string(), message: message.into() }
    }

    pub fn input(message: impl Into<String>) -> Self {
        CliError::Input { message: message.into(), details: Value::Null }
    }

    pub fn input_with(message: impl Into<String>, details: Value) -> Self {
        CliError::Input { message: message.into(), details }
    }

    pub fn engine(message: impl Into<String>) -> Self {
        CliError::Engine { message: message.into(), details: Value::Null }
    }

    pub fn engine_with(message: impl Into<String>, details: Value) -> Self {
        CliError::Engine { message: message.into(), details }
    }

    pub fn io(what: &str, e: std::io::Error) -> Self {
        CliError::engine(format!("{what}: {e}"))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Engine { .. } => 3,
            _ => 2,
        }
    }

    #[cfg(test)]
    pub fn key(&self) -> Option<&str> {
        match self {
            CliError::Config { key, .. } => Some(key),
            _ => None,
        }
    }

    pub fn to_json(&self) -> Value {
        let kind = match self {
            CliError::Usage(_) => "usage",
            CliError::Config { .. } => "config",
            CliError::Input { .. } => "input",
            CliError::Engine { .. } => "engine",
        };
        let mut v = json!({ "error": kind, "exit_code": self.exit_code(), "message": self.to_string() });
        match self {
            CliError::Config { key, .. } => v["key"] = json!(key),
            CliError::Input { details, .. } | CliError::Engine { details, .. } if !details.is_null() => {
                v["details"] = details.clone()
            }
            _ => {}
        }
        v
    }
}
