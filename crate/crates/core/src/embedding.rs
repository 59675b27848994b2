//! Fixed-dimension embedding tables in word2vec text format.
//!
//! Coordinates are parsed as `f64` and stored as `f32` in one contiguous
//! row-major buffer. Similarity is always accumulated in `f64`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("line 1: malformed header: {0}")]
    Header(String),
    #[error("line {line}: expected {expected} coordinates, got {got}")]
    Coordinates { line: usize, expected: usize, got: usize },
    #[error("line {line}: non-numeric coordinate {value:?}")]
    NonNumeric { line: usize, value: String },
    #[error("line {line}: non-finite coordinate {value:?}")]
    NonFinite { line: usize, value: String },
    #[error("line {line}: invalid UTF-8")]
    Utf8 { line: usize },
    #[error("line {line}: empty token")]
    EmptyToken { line: usize },
    #[error("header declares {declared} entries but {found} lines follow")]
    Count { declared: usize, found: usize },
    #[error("vector has {got} coordinates, table dimension is {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid token {0:?}: tokens must be non-empty and whitespace-free")]
    Token(String),
    #[error("{path}: {source}")]
    Open { path: String, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Returned by [`cosine`] when the two vectors differ in length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("cannot compare vectors of length {0} and {1}")]
pub struct LengthMismatch(pub usize, pub usize);

/// Outcome details of [`EmbeddingTable::read_text`] beyond the table itself.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub declared: usize,
    /// Lines whose token had already been seen; the later vector replaced
    /// the earlier one.
    pub duplicates: usize,
}

/// Token to vector map with a fixed dimension.
///
/// Insertion order is preserved so that writing a table back out is
/// deterministic and mirrors the input order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    name: String,
    dim: usize,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f32>,
}

impl EmbeddingTable {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        EmbeddingTable {
            name: name.into(),
            dim,
            tokens: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        }
    }

    pub fn with_capacity(name: impl Into<String>, dim: usize, capacity: usize) -> Self {
        let mut table = Self::new(name, dim);
        table.tokens.reserve(capacity);
        table.index.reserve(capacity);
        table.data.reserve(capacity.saturating_mul(dim));
        table
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Inserts or replaces the vector for `token`. Returns `true` when an
    /// existing entry was replaced (its position is kept).
    pub fn insert(&mut self, token: &str, vector: &[f32]) -> Result<bool, EmbeddingError> {
        if token.is_empty() || token.chars().any(char::is_whitespace) {
            return Err(EmbeddingError::Token(token.to_owned()));
        }
        if vector.len() != self.dim {
            return Err(EmbeddingError::Dimension {
                expected: self.dim,
                got: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite {
                line: 0,
                value: format!("{vector:?}"),
            });
        }
        Ok(self.insert_unchecked(token, vector))
    }

    fn insert_unchecked(&mut self, token: &str, vector: &[f32]) -> bool {
        match self.index.get(token) {
            Some(&row) => {
                self.data[row * self.dim..(row + 1) * self.dim].copy_from_slice(vector);
                true
            }
            None => {
                self.index.insert(token.to_owned(), self.tokens.len());
                self.tokens.push(token.to_owned());
                self.data.extend_from_slice(vector);
                false
            }
        }
    }

    /// Exact-match lookup. No trimming or normalization is applied.
    pub fn lookup(&self, token: &str) -> Option<&[f32]> {
        self.index
            .get(token)
            .map(|&row| &self.data[row * self.dim..(row + 1) * self.dim])
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// Entries in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> + '_ {
        self.tokens
            .iter()
            .zip(self.data.chunks_exact(self.dim))
            .map(|(t, v)| (t.as_str(), v))
    }

    /// Parses the word2vec text format: a `<count> <dimension>` header
    /// followed by one `<token> <d1> ... <dn>` line per entry.
    pub fn read_text<R: BufRead>(mut reader: R, name: impl Into<String>) -> Result<(Self, LoadReport), EmbeddingError> {
        let mut buf = Vec::new();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            return Err(EmbeddingError::Header("empty input".into()));
        }
        let header = std::str::from_utf8(&buf).map_err(|_| EmbeddingError::Utf8 { line: 1 })?;
        let (declared, dim) = parse_header(header.trim_end_matches(['\n', '\r']))?;

        let mut table = Self::with_capacity(name, dim, declared);
        let mut report = LoadReport {
            declared,
            duplicates: 0,
        };
        let mut row = vec![0f32; dim];
        let mut found = 0;
        let mut line_no = 1;
        loop {
            buf.clear();
            if reader.read_until(b'\n', &mut buf)? == 0 {
                break;
            }
            line_no += 1;
            let line = std::str::from_utf8(&buf)
                .map_err(|_| EmbeddingError::Utf8 { line: line_no })?
                .trim_end();
            if line.is_empty() {
                continue;
            }
            let (token, rest) = line.split_once(' ').unwrap_or((line, ""));
            if token.is_empty() {
                return Err(EmbeddingError::EmptyToken { line: line_no });
            }
            if token.chars().any(char::is_whitespace) {
                return Err(EmbeddingError::Token(token.to_owned()));
            }
            let mut got = 0;
            for field in rest.split_ascii_whitespace() {
                if got < dim {
                    let value: f64 = field.parse().map_err(|_| EmbeddingError::NonNumeric {
                        line: line_no,
                        value: field.to_owned(),
                    })?;
                    let stored = value as f32;
                    if !stored.is_finite() {
                        return Err(EmbeddingError::NonFinite {
                            line: line_no,
                            value: field.to_owned(),
                        });
                    }
                    row[got] = stored;
                }
                got += 1;
            }
            if got != dim {
                return Err(EmbeddingError::Coordinates {
                    line: line_no,
                    expected: dim,
                    got,
                });
            }
            if table.insert_unchecked(token, &row) {
                report.duplicates += 1;
            }
            found += 1;
        }
        if found != declared {
            return Err(EmbeddingError::Count { declared, found });
        }
        if report.duplicates > 0 {
            log::warn!(
                "{}: {} duplicate tokens, later occurrences kept",
                table.name,
                report.duplicates
            );
        }
        Ok((table, report))
    }

    /// Opens a word2vec text file, decompressing transparently when the
    /// path ends in `.gz`. The table is named after the file.
    pub fn open(path: impl AsRef<Path>) -> Result<(Self, LoadReport), EmbeddingError> {
        let path = path.as_ref();
        let reader = open_maybe_gz(path).map_err(|source| EmbeddingError::Open {
            path: path.display().to_string(),
            source,
        })?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::read_text(reader, name)
    }

    /// Writes the table in word2vec text format, in insertion order.
    /// Coordinates use the shortest representation that reads back to the
    /// same `f32`.
    pub fn write_text<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{} {}", self.len(), self.dim)?;
        for (token, vector) in self.iter() {
            write_row(&mut out, token, vector)?;
        }
        out.flush()
    }

    /// Like [`write_text`](Self::write_text) but ordered by token.
    pub fn write_text_sorted<W: Write>(&self, mut out: W) -> io::Result<()> {
        let mut rows: Vec<_> = self.iter().collect();
        rows.sort_unstable_by(|a, b| a.0.cmp(b.0));
        writeln!(out, "{} {}", self.len(), self.dim)?;
        for (token, vector) in rows {
            write_row(&mut out, token, vector)?;
        }
        out.flush()
    }
}

fn write_row<W: Write>(out: &mut W, token: &str, vector: &[f32]) -> io::Result<()> {
    out.write_all(token.as_bytes())?;
    for v in vector {
        write!(out, " {v}")?;
    }
    out.write_all(b"\n")
}

fn parse_header(header: &str) -> Result<(usize, usize), EmbeddingError> {
    let mut fields = header.split(' ');
    let (Some(count), Some(dim), None) = (fields.next(), fields.next(), fields.next()) else {
        return Err(EmbeddingError::Header(format!(
            "expected \"<count> <dimension>\", got {header:?}"
        )));
    };
    let count = count
        .parse::<usize>()
        .map_err(|_| EmbeddingError::Header(format!("bad entry count {count:?}")))?;
    let dim = dim
        .parse::<usize>()
        .map_err(|_| EmbeddingError::Header(format!("bad dimension {dim:?}")))?;
    if dim == 0 {
        return Err(EmbeddingError::Header("dimension must be positive".into()));
    }
    Ok((count, dim))
}

/// Opens `path` for buffered reading, gunzipping when it ends in `.gz`.
pub fn open_maybe_gz(path: &Path) -> io::Result<Box<dyn BufRead>> {
    let file = File::open(path)?;
    let gz = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gz"));
    Ok(if gz {
        Box::new(BufReader::with_capacity(1 << 16, MultiGzDecoder::new(file)))
    } else {
        Box::new(BufReader::with_capacity(1 << 16, file))
    })
}

/// Reads the whole of `path` into memory, gunzipping when it ends in `.gz`.
pub fn read_maybe_gz(path: &Path) -> io::Result<Vec<u8>> {
    let mut bytes = Vec::new();
    open_maybe_gz(path)?.read_to_end(&mut bytes)?;
    Ok(bytes)
}

/// Cosine similarity accumulated in `f64`.
///
/// Returns `Ok(None)` when either vector has zero norm. The result is
/// clamped to `[-1, 1]`.
pub fn cosine<T>(a: &[T], b: &[T]) -> Result<Option<f64>, LengthMismatch>
where
    T: Copy + Into<f64>,
{
    if a.len() != b.len() {
        return Err(LengthMismatch(a.len(), b.len()));
    }
    let mut dot = 0f64;
    let mut norm_a = 0f64;
    let mut norm_b = 0f64;
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x.into(), y.into());
        dot += x * y;
        norm_a += x * x;
        norm_b += y * y;
    }
    if norm_a == 0.0 || norm_b == 0.0 {
        return Ok(None);
    }
    // sqrt(a)*sqrt(b) rather than sqrt(a*b): the product can overflow.
    Ok(Some((dot / (norm_a.sqrt() * norm_b.sqrt())).clamp(-1.0, 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<(EmbeddingTable, LoadReport), EmbeddingError> {
        EmbeddingTable::read_text(text.as_bytes(), "t")
    }

    #[test]
    fn loads_minimal_table() {
        let (t, report) = load("2 3\na 1 0 0\nb 0 1 0").unwrap();
        assert_eq!(t.dim(), 3);
        assert_eq!(t.len(), 2);
        assert_eq!(t.lookup("a"), Some(&[1.0, 0.0, 0.0][..]));
        assert_eq!(t.lookup("b"), Some(&[0.0, 1.0, 0.0][..]));
        assert_eq!(report.duplicates, 0);
    }

    #[test]
    fn coordinate_count_mismatch_names_line() {
        let err = load("1 2\na 1 0 0").unwrap_err();
        assert_eq!(err.to_string(), "line 2: expected 2 coordinates, got 3");
        let err = load("1 3\na 1 0").unwrap_err();
        assert_eq!(err.to_string(), "line 2: expected 3 coordinates, got 2");
    }

    #[test]
    fn header_errors() {
        assert!(matches!(load(""), Err(EmbeddingError::Header(_))));
        assert!(matches!(load("2\na 1"), Err(EmbeddingError::Header(_))));
        assert!(matches!(load("x 2\n"), Err(EmbeddingError::Header(_))));
        assert!(matches!(load("1 0\na\n"), Err(EmbeddingError::Header(_))));
    }

    #[test]
    fn non_numeric_and_non_utf8() {
        let err = load("2 2\na 1 0\nb 1 zz\n").unwrap_err();
        assert!(matches!(err, EmbeddingError::NonNumeric { line: 3, .. }), "{err}");
        let err = load("1 2\na 1 nan\n").unwrap_err();
        assert!(matches!(err, EmbeddingError::NonFinite { line: 2, .. }), "{err}");

        let mut bytes = b"2 1\na 1\n".to_vec();
        bytes.extend_from_slice(&[0xff, 0xfe, b' ', b'1', b'\n']);
        let err = EmbeddingTable::read_text(&bytes[..], "t").unwrap_err();
        assert!(matches!(err, EmbeddingError::Utf8 { line: 3 }), "{err}");
    }

    #[test]
    fn duplicates_last_wins() {
        let (t, report) = load("3 2\na 1 0\nb 0 1\na 5 5\n").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(report.duplicates, 1);
        assert_eq!(t.lookup("a"), Some(&[5.0, 5.0][..]));
        assert_eq!(t.iter().next().unwrap().0, "a");
    }

    #[test]
    fn count_mismatch_is_an_error() {
        assert!(matches!(
            load("3 1\na 1\nb 2\n"),
            Err(EmbeddingError::Count { declared: 3, found: 2 })
        ));
    }

    #[test]
    fn tolerates_trailing_space_and_crlf() {
        let (t, _) = load("1 2\r\nشمس 0.5 -1 \r\n").unwrap();
        assert_eq!(t.lookup("شمس"), Some(&[0.5, -1.0][..]));
    }

    #[test]
    fn lookup_is_exact() {
        let (t, _) = load("1 2\na 1 0\n").unwrap();
        assert_eq!(t.lookup("a"), Some(&[1.0, 0.0][..]));
        assert_eq!(t.lookup("b"), None);
        assert_eq!(t.lookup("a "), None);
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&[1.0f64, 0.0], &[0.0, 1.0]), Ok(Some(0.0)));
        assert!((cosine(&[2.0f64, 2.0], &[1.0, 1.0]).unwrap().unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[0.0f64, 0.0], &[1.0, 1.0]), Ok(None));
        assert_eq!(cosine(&[1.0f64], &[1.0, 1.0]), Err(LengthMismatch(1, 2)));
        // 32 / sqrt(14 * 77); the reference value is 32/sqrt(1078) evaluated
        // to 20 digits independently.
        let c = cosine(&[1.0f32, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap().unwrap();
        assert!((c - 0.974_631_846_197_076_3).abs() < 1e-15, "{c}");
    }

    #[test]
    fn insert_validates() {
        let mut t = EmbeddingTable::new("t", 2);
        assert!(t.insert("a b", &[1.0, 2.0]).is_err());
        assert!(t.insert("", &[1.0, 2.0]).is_err());
        assert!(t.insert("a", &[1.0]).is_err());
        assert!(t.insert("a", &[f32::NAN, 1.0]).is_err());
        assert!(!t.insert("a", &[1.0, 2.0]).unwrap());
        assert!(t.insert("a", &[3.0, 2.0]).unwrap());
    }

    #[test]
    fn gzip_by_extension() {
        use flate2::write::GzEncoder;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.txt.gz");
        let mut enc = GzEncoder::new(File::create(&path).unwrap(), flate2::Compression::fast());
        enc.write_all(b"1 2\nx 1 2\n").unwrap();
        enc.finish().unwrap();
        let (t, _) = EmbeddingTable::open(&path).unwrap();
        assert_eq!(t.name(), "e.txt.gz");
        assert_eq!(t.lookup("x"), Some(&[1.0, 2.0][..]));
    }
}
