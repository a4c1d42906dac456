use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("network is disconnected into {} components: {}", .components.len(), describe_components(.components))]
    Disconnected { components: Vec<Vec<usize>> },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("model build error: {0}")]
    Build(String),

    #[error("decode error: {0}")]
    Decode(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("external solver failed: {message}\n--- output ---\n{output}")]
    External { message: String, output: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

fn describe_components(components: &[Vec<usize>]) -> String {
    components
        .iter()
        .map(|c| {
            let head: Vec<String> = c.iter().take(5).map(|b| b.to_string()).collect();
            let more = if c.len() > 5 { ", ..." } else { "" };
            format!("[{}{}] ({} buses)", head.join(", "), more, c.len())
        })
        .collect::<Vec<_>>()
        .join("; ")
}
