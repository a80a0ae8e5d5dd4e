//! Pretrained word-embedding models in the word2vec binary and text formats.
//!
//! Vectors are L2-normalized when the model is built, so similarity between
//! any two looked-up embeddings is a plain dot product. Storage is `f32`
//! (one full copy of the file's floats, roughly `4 * count * dim` bytes plus
//! the token strings); every value handed out of the model is `f64`.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Phrase means shorter than this are treated as the zero vector.
const ZERO_NORM: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("cannot read model: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("line {line}: expected {expected} components, found {found}")]
    DimensionMismatch { line: usize, expected: usize, found: usize },
    #[error("record {record}: {reason}")]
    MalformedRecord { record: usize, reason: String },
    #[error("truncated model: header declares {declared} records, only {read} present")]
    Truncated { declared: usize, read: usize },
    #[error("model has more records than the {declared} declared in its header")]
    ExtraRecords { declared: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    IncompatibleDimensions { left: usize, right: usize },
    #[error("cannot embed an empty token list")]
    EmptyPhrase,
    #[error("embedding component is not finite")]
    NonFinite,
}

/// On-disk layout of a word2vec model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFormat {
    Binary,
    Text,
}

impl FromStr for ModelFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "binary" | "binary-word2vec" | "bin" => Ok(ModelFormat::Binary),
            "text" | "text-word2vec" | "txt" => Ok(ModelFormat::Text),
            other => Err(format!("unknown model format `{other}` (expected binary or text)")),
        }
    }
}

impl fmt::Display for ModelFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelFormat::Binary => "binary",
            ModelFormat::Text => "text",
        })
    }
}

/// A dense vector in the model's space.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    /// Wraps raw components, rejecting NaN and infinities.
    pub fn new(components: Vec<f64>) -> Result<Self, EmbeddingError> {
        if components.iter().all(|c| c.is_finite()) {
            Ok(Embedding(components))
        } else {
            Err(EmbeddingError::NonFinite)
        }
    }

    /// Scales `components` to unit length; `None` for a (near) zero vector.
    pub fn normalized(components: Vec<f64>) -> Option<Self> {
        let mut components = components;
        let norm = l2_norm(&components);
        if !norm.is_finite() || norm < ZERO_NORM {
            return None;
        }
        components.iter_mut().for_each(|c| *c /= norm);
        Some(Embedding(components))
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Cosine similarity of two unit vectors, i.e. their dot product.
pub fn similarity(u: &Embedding, v: &Embedding) -> Result<f64, EmbeddingError> {
    if u.dimension() != v.dimension() {
        return Err(EmbeddingError::IncompatibleDimensions {
            left: u.dimension(),
            right: v.dimension(),
        });
    }
    Ok(dot(u.components(), v.components()))
}

#[inline]
pub(crate) fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Counters collected while building a model.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    /// Record count announced by the file header.
    pub declared: usize,
    /// Tokens kept in the vocabulary.
    pub loaded: usize,
    /// Records dropped because the token was already present.
    pub duplicates: usize,
    /// Records dropped because their vector has zero length.
    pub zero_norm: usize,
}

/// Immutable token → unit vector map.
#[derive(Debug, Clone)]
pub struct EmbeddingModel {
    dimension: usize,
    index: HashMap<String, usize>,
    tokens: Vec<String>,
    vectors: Vec<f32>,
    report: LoadReport,
}

/// Incremental construction shared by both file readers.
struct ModelBuilder {
    model: EmbeddingModel,
}

impl ModelBuilder {
    fn new(declared: usize, dimension: usize) -> Self {
        // Cap the up-front reservation so a hostile header cannot force a huge allocation.
        let reserve = declared.min(1 << 20);
        ModelBuilder {
            model: EmbeddingModel {
                dimension,
                index: HashMap::with_capacity(reserve),
                tokens: Vec::with_capacity(reserve),
                vectors: Vec::with_capacity(reserve.saturating_mul(dimension).min(1 << 26)),
                report: LoadReport {
                    declared,
                    ..LoadReport::default()
                },
            },
        }
    }

    /// Adds one record; `raw` must have exactly `dimension` finite components.
    fn push(&mut self, token: &str, raw: &[f32]) {
        let m = &mut self.model;
        debug_assert_eq!(raw.len(), m.dimension);
        if m.index.contains_key(token) {
            m.report.duplicates += 1;
            return;
        }
        let norm = raw.iter().map(|&c| f64::from(c) * f64::from(c)).sum::<f64>().sqrt();
        if norm < ZERO_NORM {
            m.report.zero_norm += 1;
            return;
        }
        m.index.insert(token.to_owned(), m.tokens.len());
        m.tokens.push(token.to_owned());
        m.vectors.extend(raw.iter().map(|&c| (f64::from(c) / norm) as f32));
        m.report.loaded += 1;
    }

    fn finish(self) -> EmbeddingModel {
        self.model
    }
}

impl EmbeddingModel {
    /// Builds a model from in-memory `(token, vector)` pairs, normalizing each vector.
    ///
    /// Duplicates keep the first occurrence and zero vectors are skipped, exactly as
    /// for file loading.
    pub fn from_vectors<I, S>(dimension: usize, entries: I) -> Result<Self, EmbeddingError>
    where
        I: IntoIterator<Item = (S, Vec<f32>)>,
        S: AsRef<str>,
    {
        if dimension == 0 {
            return Err(EmbeddingError::MalformedHeader("dimension must be positive".into()));
        }
        let entries: Vec<_> = entries.into_iter().collect();
        let mut builder = ModelBuilder::new(entries.len(), dimension);
        for (i, (token, v)) in entries.iter().enumerate() {
            if v.len() != dimension {
                return Err(EmbeddingError::DimensionMismatch {
                    line: i + 1,
                    expected: dimension,
                    found: v.len(),
                });
            }
            if v.iter().any(|c| !c.is_finite()) {
                return Err(EmbeddingError::MalformedRecord {
                    record: i + 1,
                    reason: "non-finite component".into(),
                });
            }
            builder.push(token.as_ref(), v);
        }
        Ok(builder.finish())
    }

    pub fn load(path: impl AsRef<Path>, format: ModelFormat) -> Result<Self, EmbeddingError> {
        let file = File::open(path.as_ref())?;
        let mut reader = BufReader::with_capacity(1 << 20, file);
        match format {
            ModelFormat::Binary => Self::read_binary(&mut reader),
            ModelFormat::Text => Self::read_text(&mut reader),
        }
    }

    /// Reads the whitespace-separated text format: a `count dim` header line, then
    /// one `token v1 .. vd` line per record.
    pub fn read_text<R: BufRead>(reader: &mut R) -> Result<Self, EmbeddingError> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .transpose()?
            .ok_or_else(|| EmbeddingError::MalformedHeader("empty file".into()))?;
        let (declared, dimension) = parse_header(&header)?;

        let mut builder = ModelBuilder::new(declared, dimension);
        let mut buf = Vec::with_capacity(dimension);
        let mut read = 0;
        for (i, line) in lines.enumerate() {
            let line = line?;
            let line_no = i + 2;
            let mut fields = line.split_whitespace();
            let Some(token) = fields.next() else {
                continue;
            };
            if read == declared {
                return Err(EmbeddingError::ExtraRecords { declared });
            }
            buf.clear();
            for field in fields {
                let value: f32 = field.parse().map_err(|_| EmbeddingError::MalformedRecord {
                    record: read + 1,
                    reason: format!("line {line_no}: `{field}` is not a number"),
                })?;
                if !value.is_finite() {
                    return Err(EmbeddingError::MalformedRecord {
                        record: read + 1,
                        reason: format!("line {line_no}: non-finite component"),
                    });
                }
                buf.push(value);
            }
            if buf.len() != dimension {
                return Err(EmbeddingError::DimensionMismatch {
                    line: line_no,
                    expected: dimension,
                    found: buf.len(),
                });
            }
            builder.push(token, &buf);
            read += 1;
        }
        if read < declared {
            return Err(EmbeddingError::Truncated { declared, read });
        }
        Ok(builder.finish())
    }

    /// Reads the word2vec binary format: an ASCII `count dim\n` header, then per
    /// record the token bytes, one space, and `dim` little-endian `f32`s, with an
    /// optional trailing newline.
    pub fn read_binary<R: BufRead>(reader: &mut R) -> Result<Self, EmbeddingError> {
        let mut header = Vec::new();
        reader.read_until(b'\n', &mut header)?;
        if header.last() != Some(&b'\n') {
            return Err(EmbeddingError::MalformedHeader(
                "header line is not newline-terminated".into(),
            ));
        }
        let header =
            std::str::from_utf8(&header).map_err(|_| EmbeddingError::MalformedHeader("header is not ASCII".into()))?;
        let (declared, dimension) = parse_header(header)?;

        let mut builder = ModelBuilder::new(declared, dimension);
        let mut token = Vec::new();
        let mut bytes = vec![0u8; dimension * 4];
        let mut floats = vec![0f32; dimension];
        for record in 0..declared {
            let truncated = || EmbeddingError::Truncated { declared, read: record };
            skip_newlines(reader)?;
            token.clear();
            reader.read_until(b' ', &mut token)?;
            if token.pop() != Some(b' ') {
                return Err(truncated());
            }
            if token.is_empty() {
                return Err(EmbeddingError::MalformedRecord {
                    record: record + 1,
                    reason: "empty token".into(),
                });
            }
            reader.read_exact(&mut bytes).map_err(|e| match e.kind() {
                std::io::ErrorKind::UnexpectedEof => truncated(),
                _ => EmbeddingError::Io(e),
            })?;
            for (dst, chunk) in floats.iter_mut().zip(bytes.chunks_exact(4)) {
                *dst = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
            }
            if floats.iter().any(|c| !c.is_finite()) {
                return Err(EmbeddingError::MalformedRecord {
                    record: record + 1,
                    reason: "non-finite component".into(),
                });
            }
            let token = String::from_utf8_lossy(&token);
            builder.push(&token, &floats);
        }
        Ok(builder.finish())
    }

    /// Writes the model in text format. Components are the stored (normalized) values.
    pub fn write_text<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.len(), self.dimension)?;
        for (token, v) in self.iter_raw() {
            write!(w, "{token}")?;
            for c in v {
                write!(w, " {c}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Writes the model in word2vec binary format.
    pub fn write_binary<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.len(), self.dimension)?;
        for (token, v) in self.iter_raw() {
            w.write_all(token.as_bytes())?;
            w.write_all(b" ")?;
            for c in v {
                w.write_all(&c.to_le_bytes())?;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn report(&self) -> &LoadReport {
        &self.report
    }

    /// Tokens in load order.
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    /// Stored `f32` components in load order.
    pub fn iter_raw(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.tokens
            .iter()
            .map(String::as_str)
            .zip(self.vectors.chunks_exact(self.dimension))
    }

    /// The stored `f32` vector of an exact token.
    pub fn raw(&self, token: &str) -> Option<&[f32]> {
        let i = *self.index.get(token)?;
        Some(&self.vectors[i * self.dimension..(i + 1) * self.dimension])
    }

    fn resolve(&self, token: &str) -> Option<&[f32]> {
        self.raw(token).or_else(|| {
            if token.chars().any(char::is_uppercase) {
                self.raw(&token.to_lowercase())
            } else {
                None
            }
        })
    }

    /// Exact-match lookup, falling back to the lowercased token.
    pub fn lookup(&self, token: &str) -> Option<Embedding> {
        let raw = self.resolve(token)?;
        // Renormalize in f64 so self-similarity is 1 to double precision.
        Embedding::normalized(raw.iter().map(|&c| f64::from(c)).collect())
    }

    /// Mean of the in-vocabulary token vectors, rescaled to unit length.
    ///
    /// Out-of-vocabulary tokens are skipped. Returns `Ok(None)` when nothing is in
    /// vocabulary or the mean vanishes.
    pub fn embed_phrase<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Option<Embedding>, EmbeddingError> {
        if tokens.is_empty() {
            return Err(EmbeddingError::EmptyPhrase);
        }
        let mut sum = vec![0f64; self.dimension];
        let mut hits = 0usize;
        for token in tokens {
            if let Some(e) = self.lookup(token.as_ref()) {
                sum.iter_mut().zip(e.components()).for_each(|(s, c)| *s += c);
                hits += 1;
            }
        }
        if hits == 0 {
            return Ok(None);
        }
        let n = hits as f64;
        sum.iter_mut().for_each(|s| *s /= n);
        Ok(Embedding::normalized(sum))
    }
}

fn parse_header(line: &str) -> Result<(usize, usize), EmbeddingError> {
    let bad = || EmbeddingError::MalformedHeader(format!("expected `count dim`, got `{}`", line.trim()));
    let mut fields = line.split_whitespace();
    let count = fields.next().ok_or_else(bad)?.parse::<usize>().map_err(|_| bad())?;
    let dim = fields.next().ok_or_else(bad)?.parse::<usize>().map_err(|_| bad())?;
    if fields.next().is_some() || dim == 0 {
        return Err(bad());
    }
    Ok((count, dim))
}

fn skip_newlines<R: BufRead>(reader: &mut R) -> std::io::Result<()> {
    loop {
        let buf = reader.fill_buf()?;
        let n = buf.iter().take_while(|&&b| b == b'\n' || b == b'\r').count();
        if n == 0 {
            return Ok(());
        }
        reader.consume(n);
    }
}
