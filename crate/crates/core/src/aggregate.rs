//! Column, tree and dataset aggregation of similarity scores, and ranking.
//!
//! Scores are similarities (higher is better) throughout. The tree step walks
//! the type forest bottom-up once; each parent is updated from its children's
//! already-updated scores, so a leaf's signal can reach the root.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::EmbeddingModel;
use crate::ingest::TableText;
use crate::ontology::TypeOntology;
use crate::score::{score_table, ColumnScoreMatrix, TableScores, TypeSpace};

#[derive(Debug, Error, PartialEq)]
pub enum AggregateError {
    #[error("cannot aggregate an empty score matrix")]
    EmptyMatrix,
    #[error("score row {row} has {found} entries, expected {expected}")]
    RaggedMatrix { row: usize, expected: usize, found: usize },
    #[error("cannot aggregate an empty list of score vectors")]
    NoVectors,
    #[error("score vectors disagree on type ordering")]
    OrderingMismatch,
    #[error("score vector type `{0}` is not in the ontology")]
    UnknownType(String),
    #[error("score vector lists type `{0}` twice")]
    DuplicateType(String),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("no text found: no column produced any embeddable cell")]
    NoText,
}

/// Reduction used across rows (column step) or across columns (dataset step).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduce {
    Mean,
    Max,
}

/// Hierarchy update applied to a parent from its children.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeFn {
    /// mean(own, mean(children))
    Mean,
    /// max(own, max(children))
    Max,
    /// mean(own, max(children))
    MeanMax,
    /// max(own, mean(children))
    MaxMean,
    None,
}

/// Where the tree step runs relative to the dataset step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TreePlacement {
    #[default]
    PerColumn,
    AfterDataset,
}

macro_rules! named_enum {
    ($ty:ty, $($variant:path => $name:literal / $label:literal),+ $(,)?) => {
        impl $ty {
            /// Capitalized name, as used in grid plots.
            pub fn label(&self) -> &'static str {
                match self { $($variant => $label),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($variant => $name),+ })
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s.to_ascii_lowercase().as_str() {
                    $($name => Ok($variant),)+
                    other => Err(format!(
                        "unknown function `{other}` (expected one of: {})",
                        [$($name),+].join(", ")
                    )),
                }
            }
        }
    };
}

named_enum!(Reduce, Reduce::Mean => "mean" / "Mean", Reduce::Max => "max" / "Max");
named_enum!(
    TreeFn,
    TreeFn::Mean => "mean" / "Mean",
    TreeFn::Max => "max" / "Max",
    TreeFn::MeanMax => "meanmax" / "MeanMax",
    TreeFn::MaxMean => "maxmean" / "MaxMean",
    TreeFn::None => "none" / "None",
);

impl Reduce {
    fn apply(self, values: impl Iterator<Item = f64>) -> Option<f64> {
        match self {
            Reduce::Mean => {
                let (sum, n) = values.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
                (n > 0).then(|| sum / n as f64)
            }
            Reduce::Max => values.reduce(f64::max),
        }
    }
}

impl TreeFn {
    /// Updated score for a node given its own score and its children's updated scores.
    fn combine(self, own: f64, children: &[f64]) -> f64 {
        if children.is_empty() {
            return own;
        }
        let mean = || children.iter().sum::<f64>() / children.len() as f64;
        let max = || children.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        match self {
            TreeFn::Mean => (own + mean()) / 2.0,
            TreeFn::Max => own.max(max()),
            TreeFn::MeanMax => (own + max()) / 2.0,
            TreeFn::MaxMean => own.max(mean()),
            TreeFn::None => own,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AggregationConfig {
    pub column: Reduce,
    pub tree: TreeFn,
    pub dataset: Reduce,
    #[serde(default)]
    pub placement: TreePlacement,
}

impl AggregationConfig {
    pub const fn new(column: Reduce, tree: TreeFn, dataset: Reduce) -> Self {
        AggregationConfig {
            column,
            tree,
            dataset,
            placement: TreePlacement::PerColumn,
        }
    }

    /// Plot label in column, tree, dataset order, e.g. `Mean, MeanMax, Mean`.
    pub fn label(&self) -> String {
        format!(
            "{}, {}, {}",
            self.column.label(),
            self.tree.label(),
            self.dataset.label()
        )
    }
}

impl Default for AggregationConfig {
    fn default() -> Self {
        AggregationConfig::new(Reduce::Mean, TreeFn::MeanMax, Reduce::Mean)
    }
}

impl fmt::Display for AggregationConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.column, self.tree, self.dataset)
    }
}

/// Parses `column,tree,dataset`, e.g. `mean,meanmax,mean`.
impl FromStr for AggregationConfig {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [column, tree, dataset] = parts.as_slice() else {
            return Err(format!("expected `column,tree,dataset`, got `{s}`"));
        };
        Ok(AggregationConfig::new(column.parse()?, tree.parse()?, dataset.parse()?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub type_ids: Arc<[String]>,
    pub scores: Vec<f64>,
}

impl ScoreVector {
    pub fn new(type_ids: Arc<[String]>, scores: Vec<f64>) -> Self {
        assert_eq!(type_ids.len(), scores.len(), "one score per type");
        ScoreVector { type_ids, scores }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.type_ids.iter().position(|t| t == id).map(|i| self.scores[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tag {
    #[serde(rename = "type")]
    pub type_id: String,
    pub score: f64,
}

/// Types in descending score order; ties go to the lexicographically smaller id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TagPrediction {
    pub tags: Vec<Tag>,
}

impl TagPrediction {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.tags.iter().map(|t| t.type_id.as_str())
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }
}

pub fn aggregate_column(matrix: &ColumnScoreMatrix, f: Reduce) -> Result<ScoreVector, AggregateError> {
    if matrix.rows.is_empty() {
        return Err(AggregateError::EmptyMatrix);
    }
    let width = matrix.type_ids.len();
    if let Some((row, r)) = matrix.rows.iter().enumerate().find(|(_, r)| r.len() != width) {
        return Err(AggregateError::RaggedMatrix {
            row,
            expected: width,
            found: r.len(),
        });
    }
    let scores = (0..width)
        .map(|t| f.apply(matrix.rows.iter().map(|r| r[t])).expect("nonempty"))
        .collect();
    Ok(ScoreVector::new(matrix.type_ids.clone(), scores))
}

/// Propagates scores up the type forest in one bottom-up pass.
///
/// Leaves keep their score. A type whose children are all absent from `v` is
/// treated as a leaf.
pub fn tree_aggregate(v: &ScoreVector, ontology: &TypeOntology, f: TreeFn) -> Result<ScoreVector, AggregateError> {
    // position of each ontology node within `v`
    let mut pos: Vec<Option<usize>> = vec![None; ontology.len()];
    for (k, id) in v.type_ids.iter().enumerate() {
        let i = ontology
            .index_of(id)
            .map_err(|_| AggregateError::UnknownType(id.clone()))?;
        if pos[i].replace(k).is_some() {
            return Err(AggregateError::DuplicateType(id.clone()));
        }
    }
    if f == TreeFn::None {
        return Ok(v.clone());
    }

    let mut scores = v.scores.clone();
    let mut child_scores = Vec::new();
    for i in ontology.bottom_up_order() {
        let Some(k) = pos[i] else { continue };
        child_scores.clear();
        child_scores.extend(
            ontology
                .child_indices(i)
                .iter()
                .filter_map(|&c| pos[c])
                .map(|q| scores[q]),
        );
        scores[k] = f.combine(scores[k], &child_scores);
    }
    Ok(ScoreVector::new(v.type_ids.clone(), scores))
}

pub fn aggregate_dataset(vectors: &[ScoreVector], f: Reduce) -> Result<ScoreVector, AggregateError> {
    let first = vectors.first().ok_or(AggregateError::NoVectors)?;
    if vectors
        .iter()
        .any(|v| !Arc::ptr_eq(&v.type_ids, &first.type_ids) && v.type_ids != first.type_ids)
    {
        return Err(AggregateError::OrderingMismatch);
    }
    let scores = (0..first.len())
        .map(|t| f.apply(vectors.iter().map(|v| v.scores[t])).expect("nonempty"))
        .collect();
    Ok(ScoreVector::new(first.type_ids.clone(), scores))
}

pub fn rank_types(v: &ScoreVector, k: usize) -> Result<TagPrediction, AggregateError> {
    if k == 0 {
        return Err(AggregateError::ZeroK);
    }
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| {
        v.scores[b]
            .total_cmp(&v.scores[a])
            .then_with(|| v.type_ids[a].cmp(&v.type_ids[b]))
    });
    let tags = order
        .into_iter()
        .take(k)
        .map(|i| Tag {
            type_id: v.type_ids[i].clone(),
            score: v.scores[i],
        })
        .collect();
    Ok(TagPrediction { tags })
}

/// Reduces already-scored columns to one dataset vector according to `config`.
pub fn aggregate_scores(
    scores: &TableScores,
    ontology: &TypeOntology,
    config: &AggregationConfig,
) -> Result<ScoreVector, AggregateError> {
    if scores.matrices.is_empty() {
        return Err(AggregateError::NoText);
    }
    let columns = scores
        .matrices
        .iter()
        .map(|m| {
            let v = aggregate_column(m, config.column)?;
            match config.placement {
                TreePlacement::PerColumn => tree_aggregate(&v, ontology, config.tree),
                TreePlacement::AfterDataset => Ok(v),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let dataset = aggregate_dataset(&columns, config.dataset)?;
    match config.placement {
        TreePlacement::PerColumn => Ok(dataset),
        TreePlacement::AfterDataset => tree_aggregate(&dataset, ontology, config.tree),
    }
}

/// Scores every column of `table` and returns the top `k` types.
pub fn summarize(
    table: &TableText,
    ontology: &TypeOntology,
    space: &TypeSpace,
    model: &EmbeddingModel,
    config: &AggregationConfig,
    k: usize,
) -> Result<TagPrediction, AggregateError> {
    if k == 0 {
        return Err(AggregateError::ZeroK);
    }
    let scores = score_table(table, space, model);
    rank_types(&aggregate_scores(&scores, ontology, config)?, k)
}
