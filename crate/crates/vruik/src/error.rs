use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Errors surfaced by the file formats and the command line.
#[derive(Debug, Error)]
pub enum VruikError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: malformed JSON at line {line}, column {column} (byte {offset}): {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        offset: usize,
        message: String,
    },
    #[error("{path}: {} validation error(s):\n{}", issues.len(), render_issues(issues))]
    Validation { path: PathBuf, issues: Vec<Issue> },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] vruik_core::Error),
}

/// One validation problem, located by a dotted field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub field: String,
    pub message: String,
}

fn render_issues(issues: &[Issue]) -> String {
    issues
        .iter()
        .map(|i| format!("  {}: {}", i.field, i.message))
        .collect::<Vec<_>>()
        .join("\n")
}

pub type Result<T, E = VruikError> = std::result::Result<T, E>;

/// Process exit status for an error.
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_EVALUATION_IMPOSSIBLE: i32 = 3;

impl VruikError {
    pub fn io(path: impl AsRef<Path>, source: io::Error) -> Self {
        VruikError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        VruikError::Invalid(message.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            VruikError::Io { .. } => EXIT_IO,
            VruikError::Core(vruik_core::Error::EvaluationImpossible(_)) => EXIT_EVALUATION_IMPOSSIBLE,
            _ => EXIT_VALIDATION,
        }
    }
}

/// Converts a serde_json error on `text` into a located parse error.
pub(crate) fn json_error(path: &Path, text: &str, err: &serde_json::Error) -> VruikError {
    let (line, column) = (err.line(), err.column());
    VruikError::Parse {
        path: path.to_path_buf(),
        line,
        column,
        offset: byte_offset(text, line, column),
        message: err.to_string(),
    }
}

/// Byte offset of a 1-based line / column position (column counts bytes).
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line - 1)
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_from_line_and_column() {
        let text = "{\n  \"a\": x\n}";
        assert_eq!(byte_offset(text, 1, 1), 0);
        assert_eq!(byte_offset(text, 2, 8), 9);
        assert_eq!(&text[9..10], "x");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(VruikError::invalid("x").exit_code(), 1);
        assert_eq!(VruikError::io("p", io::Error::other("x")).exit_code(), 2);
        let e: VruikError = vruik_core::Error::EvaluationImpossible("x".into()).into();
        assert_eq!(e.exit_code(), 3);
    }
}
