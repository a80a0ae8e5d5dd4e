//! Cell × type similarity matrices.

use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::embedding::{dot, Embedding, EmbeddingModel};
use crate::ingest::{Column, TableText};
use crate::ontology::{TokenTemplate, TypeOntology, TypeVectors};

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("no ontology type has a vector in this model")]
    NoScorableTypes,
}

/// The scorable types and their unit vectors, in ontology order.
#[derive(Debug, Clone)]
pub struct TypeSpace {
    ids: Arc<[String]>,
    dimension: usize,
    vectors: Vec<f64>,
    unscorable: Vec<String>,
}

impl TypeSpace {
    pub fn new(ontology: &TypeOntology, model: &EmbeddingModel, template: &TokenTemplate) -> Result<Self, ScoreError> {
        Self::from_type_vectors(&TypeVectors::compute(ontology, model, template), model.dimension())
    }

    pub fn from_type_vectors(types: &TypeVectors, dimension: usize) -> Result<Self, ScoreError> {
        let mut ids = Vec::new();
        let mut vectors = Vec::new();
        for (id, v) in types.scorable() {
            ids.push(id.to_owned());
            vectors.extend_from_slice(v.components());
        }
        if ids.is_empty() {
            return Err(ScoreError::NoScorableTypes);
        }
        Ok(TypeSpace {
            ids: ids.into(),
            dimension,
            vectors,
            unscorable: types.unscorable().into_iter().map(str::to_owned).collect(),
        })
    }

    pub fn ids(&self) -> &Arc<[String]> {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn unscorable(&self) -> &[String] {
        &self.unscorable
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dimension..(i + 1) * self.dimension]
    }

    /// Similarity of `e` to every scorable type.
    pub fn scores(&self, e: &Embedding) -> Vec<f64> {
        debug_assert_eq!(e.dimension(), self.dimension);
        self.vectors
            .chunks_exact(self.dimension)
            .map(|t| dot(e.components(), t))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnScoreMatrix {
    pub column_name: String,
    pub type_ids: Arc<[String]>,
    /// One row per embedded cell, in column order.
    pub rows: Vec<Vec<f64>>,
    /// Cells with no in-vocabulary token.
    pub dropped_cells: usize,
}

/// Scores every cell of `column` against every type; `None` if no cell embeds.
pub fn score_column(column: &Column, space: &TypeSpace, model: &EmbeddingModel) -> Option<ColumnScoreMatrix> {
    let mut rows = Vec::with_capacity(column.cells.len());
    let mut dropped = 0;
    for cell in &column.cells {
        match model.embed_phrase(cell).ok().flatten() {
            Some(e) => rows.push(space.scores(&e)),
            None => dropped += 1,
        }
    }
    if rows.is_empty() {
        return None;
    }
    Some(ColumnScoreMatrix {
        column_name: column.name.clone(),
        type_ids: space.ids.clone(),
        rows,
        dropped_cells: dropped,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableScores {
    pub matrices: Vec<ColumnScoreMatrix>,
    /// Cells across all columns that could not be embedded.
    pub oov_cells: usize,
    /// Columns in which no cell embedded.
    pub unscored_columns: Vec<String>,
}

/// Scores all columns in parallel; output order follows `table.columns`.
pub fn score_table(table: &TableText, space: &TypeSpace, model: &EmbeddingModel) -> TableScores {
    let scored: Vec<Option<ColumnScoreMatrix>> = table
        .columns
        .par_iter()
        .map(|c| score_column(c, space, model))
        .collect();
    let mut out = TableScores {
        matrices: Vec::new(),
        oov_cells: 0,
        unscored_columns: Vec::new(),
    };
    for (column, m) in table.columns.iter().zip(scored) {
        match m {
            Some(m) => {
                out.oov_cells += m.dropped_cells;
                out.matrices.push(m);
            }
            None => {
                out.oov_cells += column.cells.len();
                out.unscored_columns.push(column.name.clone());
            }
        }
    }
    out
}
