//! A loaded model + ontology pair ready to summarize many tables.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::aggregate::{aggregate_scores, rank_types, AggregateError, AggregationConfig, TagPrediction};
use crate::embedding::EmbeddingModel;
use crate::ingest::TableText;
use crate::ontology::{TokenTemplate, TypeOntology};
use crate::score::{score_table, ScoreError, TableScores, TypeSpace};

/// Per-table counters reported alongside the tags.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub oov_cells: usize,
    /// Data columns with no textual cell, plus columns where no cell embedded.
    pub dropped_columns: Vec<String>,
    pub unscorable_types: Vec<String>,
    pub load_ms: u64,
    pub score_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub prediction: TagPrediction,
    pub diagnostics: Diagnostics,
}

pub struct Summarizer {
    model: EmbeddingModel,
    ontology: TypeOntology,
    space: TypeSpace,
}

impl Summarizer {
    /// Computes the type vectors once; fails if none of the types has a vector.
    pub fn new(model: EmbeddingModel, ontology: TypeOntology, template: &TokenTemplate) -> Result<Self, ScoreError> {
        let space = TypeSpace::new(&ontology, &model, template)?;
        Ok(Summarizer { model, ontology, space })
    }

    pub fn model(&self) -> &EmbeddingModel {
        &self.model
    }

    pub fn ontology(&self) -> &TypeOntology {
        &self.ontology
    }

    pub fn space(&self) -> &TypeSpace {
        &self.space
    }

    pub fn score(&self, table: &TableText) -> TableScores {
        score_table(table, &self.space, &self.model)
    }

    pub fn summarize(
        &self,
        table: &TableText,
        config: &AggregationConfig,
        k: usize,
    ) -> Result<Summary, AggregateError> {
        if k == 0 {
            return Err(AggregateError::ZeroK);
        }
        let start = Instant::now();
        let scores = self.score(table);
        let prediction = rank_types(&aggregate_scores(&scores, &self.ontology, config)?, k)?;
        let mut dropped_columns = table.dropped_columns.clone();
        dropped_columns.extend(scores.unscored_columns.iter().cloned());
        Ok(Summary {
            prediction,
            diagnostics: Diagnostics {
                oov_cells: scores.oov_cells,
                dropped_columns,
                unscorable_types: self.space.unscorable().to_vec(),
                load_ms: 0,
                score_ms: start.elapsed().as_millis() as u64,
            },
        })
    }
}
