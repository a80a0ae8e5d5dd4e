//! # tabsum-core
//!
//! Abstractive subject tags for tabular datasets. The text found in a table
//! (cells and column headers) is embedded with a pretrained word2vec-style
//! model and compared against every type of a hierarchical ontology. Scores
//! are then reduced three times:
//!
//! 1. across the cells of each column ([`aggregate::aggregate_column`]),
//! 2. up the type hierarchy, so a parent type benefits from its strongest
//!    children ([`aggregate::tree_aggregate`]),
//! 3. across columns ([`aggregate::aggregate_dataset`]),
//!
//! and the best types are returned in ranked order.
//!
//! ```
//! use tabsum_core::{AggregationConfig, EmbeddingModel, IngestOptions, Summarizer, TokenTemplate, TypeOntology};
//!
//! let model = EmbeddingModel::read_text(&mut "3 2\nwine 1 0\nbeer 0.9 0.1\ncasino 0 1\n".as_bytes())?;
//! let ontology = TypeOntology::read_tsv(&mut "wine\tbeverage\nbeer\tbeverage\ncasino\n".as_bytes())?;
//! let summarizer = Summarizer::new(model, ontology, &TokenTemplate::default())?;
//!
//! let table = tabsum_core::ingest::read_table("product\nRed Wine\nWhite Wine\nLager Beer\n".as_bytes(), &IngestOptions::default())?;
//! let summary = summarizer.summarize(&table, &AggregationConfig::default(), 1)?;
//! assert_eq!(summary.prediction.tags[0].type_id, "wine");
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod aggregate;
pub mod embedding;
pub mod harness;
pub mod ingest;
pub mod ontology;
pub mod pipeline;
pub mod score;
pub mod synth;

pub use aggregate::{AggregationConfig, Reduce, ScoreVector, Tag, TagPrediction, TreeFn, TreePlacement};
pub use embedding::{Embedding, EmbeddingModel, ModelFormat};
pub use ingest::{IngestOptions, TableText};
pub use ontology::{OntologyFormat, TokenTemplate, TypeOntology};
pub use pipeline::{Diagnostics, Summarizer, Summary};
pub use score::{ColumnScoreMatrix, TypeSpace};
