//! Extraction of tokenized text from CSV files.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_ROW_CAP: usize = 1000;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: expected {expected} fields, found {found}")]
    RaggedRow { row: u64, expected: usize, found: usize },
    #[error("row cap must be at least 1")]
    ZeroRowCap,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestOptions {
    pub has_headers: bool,
    pub delimiter: u8,
    /// Maximum cells kept per data column; larger columns are sampled down.
    pub row_cap: usize,
    pub seed: u64,
    /// Optional plain-text sidecar; each non-blank line becomes one cell of an extra column.
    pub metadata: Option<PathBuf>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            has_headers: true,
            delimiter: b',',
            row_cap: DEFAULT_ROW_CAP,
            seed: 0,
            metadata: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Data,
    Header,
    Metadata,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    /// One nonempty token list per surviving cell.
    pub cells: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TableText {
    pub columns: Vec<Column>,
    /// Data columns with no textual cell.
    pub dropped_columns: Vec<String>,
}

impl TableText {
    pub fn header(&self) -> Option<&Column> {
        self.columns.iter().find(|c| c.kind == ColumnKind::Header)
    }

    pub fn data_columns(&self) -> impl Iterator<Item = &Column> {
        self.columns.iter().filter(|c| c.kind == ColumnKind::Data)
    }
}

pub const HEADER_COLUMN: &str = "<header>";
pub const METADATA_COLUMN: &str = "<metadata>";

/// Splits on non-alphanumeric characters, lowercases, and drops pure-digit pieces.
pub fn tokenize_cell(raw: &str) -> Vec<String> {
    raw.split(|c: char| !c.is_alphanumeric())
        .filter(|piece| !piece.is_empty() && !piece.chars().all(char::is_numeric))
        .map(str::to_lowercase)
        .collect()
}

pub fn is_textual(raw: &str) -> bool {
    raw.split(|c: char| !c.is_alphanumeric())
        .any(|piece| !piece.is_empty() && !piece.chars().all(char::is_numeric))
}

/// Uniform sample of `cap` indices out of `0..n`, returned in ascending order.
///
/// Reservoir sampling driven by ChaCha8 seeded with `seed` on stream `stream`,
/// so independent columns draw independent samples from one seed. When
/// `n <= cap` every index is returned.
pub fn sample_indices(n: usize, cap: usize, seed: u64, stream: u64) -> Vec<usize> {
    if n <= cap {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut reservoir: Vec<usize> = (0..cap).collect();
    for i in cap..n {
        let j = rng.gen_range(0..=i as u64) as usize;
        if j < cap {
            reservoir[j] = i;
        }
    }
    reservoir.sort_unstable();
    reservoir
}

pub fn extract_text(path: impl AsRef<Path>, options: &IngestOptions) -> Result<TableText, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut table = read_table(file, options)?;
    if let Some(meta) = &options.metadata {
        let text = std::fs::read_to_string(meta).map_err(|source| IngestError::Io {
            path: meta.clone(),
            source,
        })?;
        let cells: Vec<Vec<String>> = text.lines().map(tokenize_cell).filter(|t| !t.is_empty()).collect();
        if !cells.is_empty() {
            table.columns.push(Column {
                name: METADATA_COLUMN.to_owned(),
                kind: ColumnKind::Metadata,
                cells,
            });
        }
    }
    Ok(table)
}

/// Parses CSV from any reader. The metadata sidecar option is ignored here.
pub fn read_table<R: Read>(reader: R, options: &IngestOptions) -> Result<TableText, IngestError> {
    if options.row_cap == 0 {
        return Err(IngestError::ZeroRowCap);
    }
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(options.has_headers)
        .delimiter(options.delimiter)
        .flexible(true)
        .from_reader(reader);

    let names: Option<Vec<String>> = if options.has_headers {
        Some(
            csv.byte_headers()?
                .iter()
                .map(|f| String::from_utf8_lossy(f).into_owned())
                .collect(),
        )
    } else {
        None
    };
    let mut width = names.as_ref().map(Vec::len).filter(|&w| w > 0);

    // Per column: the source-ordered list of textual cells.
    let mut cells: Vec<Vec<Vec<String>>> = vec![Vec::new(); width.unwrap_or(0)];
    let mut record = csv::ByteRecord::new();
    while csv.read_byte_record(&mut record)? {
        let expected = *width.get_or_insert_with(|| {
            cells.resize(record.len(), Vec::new());
            record.len()
        });
        if record.len() != expected {
            return Err(IngestError::RaggedRow {
                row: record.position().map_or(0, |p| p.line()),
                expected,
                found: record.len(),
            });
        }
        for (column, field) in cells.iter_mut().zip(record.iter()) {
            let tokens = tokenize_cell(&String::from_utf8_lossy(field));
            if !tokens.is_empty() {
                column.push(tokens);
            }
        }
    }

    let mut table = TableText::default();
    if let Some(names) = &names {
        table.columns.push(Column {
            name: HEADER_COLUMN.to_owned(),
            kind: ColumnKind::Header,
            cells: names
                .iter()
                .map(|n| tokenize_cell(n))
                .filter(|t| !t.is_empty())
                .collect(),
        });
    }
    for (i, column_cells) in cells.into_iter().enumerate() {
        let name = names
            .as_ref()
            .and_then(|n| n.get(i).cloned())
            .unwrap_or_else(|| format!("column_{}", i + 1));
        if column_cells.is_empty() {
            table.dropped_columns.push(name);
            continue;
        }
        let column_cells = if column_cells.len() > options.row_cap {
            let keep = sample_indices(column_cells.len(), options.row_cap, options.seed, i as u64);
            let mut column_cells: Vec<Option<Vec<String>>> = column_cells.into_iter().map(Some).collect();
            keep.into_iter()
                .map(|k| column_cells[k].take().expect("indices are distinct"))
                .collect()
        } else {
            column_cells
        };
        table.columns.push(Column {
            name,
            kind: ColumnKind::Data,
            cells: column_cells,
        });
    }
    Ok(table)
}
