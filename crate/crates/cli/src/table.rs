//! Function tables: a header line `n=<dim>` followed by `2^n` decimal values
//! in bitmask order, separated by any whitespace. Lines starting with `#`
//! are ignored.

use std::fmt;
use std::path::Path;

use hypercube::cube::{CubeFunction, MAX_DIM};

#[derive(Debug, Clone, PartialEq)]
pub enum TableErrorKind {
    MissingHeader,
    MalformedHeader(String),
    DimensionTooLarge(usize),
    BadToken(String),
    TooFewValues { expected: usize, found: usize },
    TooManyValues { expected: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableError {
    pub source_name: String,
    /// 1-based.
    pub line: usize,
    /// 1-based, in characters.
    pub column: usize,
    pub kind: TableErrorKind,
}

impl fmt::Display for TableError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}: ", self.source_name, self.line, self.column)?;
        match &self.kind {
            TableErrorKind::MissingHeader => write!(f, "missing header `n=<dim>`"),
            TableErrorKind::MalformedHeader(h) => write!(f, "malformed header `{h}`, expected `n=<dim>`"),
            TableErrorKind::DimensionTooLarge(n) => write!(f, "dimension {n} exceeds the limit {MAX_DIM}"),
            TableErrorKind::BadToken(t) => write!(f, "non-numeric token `{t}`"),
            TableErrorKind::TooFewValues { expected, found } => {
                write!(f, "expected {expected} values, found {found}")
            }
            TableErrorKind::TooManyValues { expected } => write!(f, "expected {expected} values, found more"),
        }
    }
}

impl std::error::Error for TableError {}

/// Tokens with their 1-based line and column.
fn tokens(text: &str) -> impl Iterator<Item = (usize, usize, &str)> {
    text.lines().enumerate().flat_map(|(li, line)| {
        let content = if line.trim_start().starts_with('#') { "" } else { line };
        let mut out = Vec::new();
        let mut start = None;
        for (ci, (bi, ch)) in content.char_indices().enumerate() {
            match (ch.is_whitespace(), start) {
                (false, None) => start = Some((ci, bi)),
                (true, Some((c0, b0))) => {
                    out.push((li + 1, c0 + 1, &content[b0..bi]));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some((c0, b0)) = start {
            out.push((li + 1, c0 + 1, &content[b0..]));
        }
        out
    })
}

fn parse_header(line: &str) -> Option<usize> {
    let (key, value) = line.split_once('=')?;
    if key.trim() != "n" {
        return None;
    }
    value.trim().parse().ok()
}

/// Parses a table; `source_name` labels diagnostics.
pub fn parse_function(text: &str, source_name: &str) -> Result<CubeFunction, TableError> {
    let err = |line, column, kind| TableError {
        source_name: source_name.to_string(),
        line,
        column,
        kind,
    };
    let (header_idx, header) = text
        .lines()
        .enumerate()
        .find(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .ok_or_else(|| err(1, 1, TableErrorKind::MissingHeader))?;
    let header_col = header.len() - header.trim_start().len() + 1;
    let n = parse_header(header)
        .ok_or_else(|| err(header_idx + 1, header_col, TableErrorKind::MalformedHeader(header.trim().to_string())))?;
    if n > MAX_DIM {
        return Err(err(header_idx + 1, header_col, TableErrorKind::DimensionTooLarge(n)));
    }
    let expected = 1usize << n;
    let mut values = Vec::with_capacity(expected);
    let (mut last_line, mut last_col) = (header_idx + 1, header.len() + 1);
    for (line, column, tok) in tokens(text).filter(|t| t.0 > header_idx + 1) {
        if values.len() == expected {
            return Err(err(line, column, TableErrorKind::TooManyValues { expected }));
        }
        match tok.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            _ => return Err(err(line, column, TableErrorKind::BadToken(tok.to_string()))),
        }
        last_line = line;
        last_col = column + tok.chars().count();
    }
    if values.len() < expected {
        return Err(err(
            last_line,
            last_col,
            TableErrorKind::TooFewValues {
                expected,
                found: values.len(),
            },
        ));
    }
    Ok(CubeFunction::new(n, values).expect("length checked"))
}

#[derive(Debug)]
pub enum LoadError {
    Io { path: String, source: std::io::Error },
    Table(TableError),
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadError::Io { path, source } => write!(f, "{path}: {source}"),
            LoadError::Table(e) => e.fmt(f),
        }
    }
}

impl std::error::Error for LoadError {}

pub fn load_function(path: &Path) -> Result<CubeFunction, LoadError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: name.clone(), source })?;
    parse_function(&text, &name).map_err(LoadError::Table)
}
