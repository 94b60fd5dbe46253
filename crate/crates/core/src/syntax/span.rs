use std::fmt;
use std::sync::Arc;

use serde::Serialize;

/// Location of a node in its source file.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct SourceSpan {
    pub file: Arc<str>,
    /// Byte offset of the first character.
    pub start: usize,
    /// Byte offset one past the last character.
    pub end: usize,
    /// 1-based line of `start`.
    pub line: u32,
    /// 1-based column of `start`.
    pub col: u32,
}

impl SourceSpan {
    pub fn new(file: Arc<str>, start: usize, end: usize, line: u32, col: u32) -> Self {
        debug_assert!(start <= end);
        SourceSpan { file, start, end, line, col }
    }

    /// Span for nodes built outside any source text.
    pub fn synthetic() -> Self {
        SourceSpan { file: Arc::from("<synthetic>"), start: 0, end: 0, line: 0, col: 0 }
    }

    /// Smallest span covering both.
    pub fn join(&self, other: &SourceSpan) -> SourceSpan {
        let (first, _) = if self.start <= other.start { (self, other) } else { (other, self) };
        SourceSpan {
            file: self.file.clone(),
            start: self.start.min(other.start),
            end: self.end.max(other.end),
            line: first.line,
            col: first.col,
        }
    }

    pub fn contains(&self, other: &SourceSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.col)
    }
}
