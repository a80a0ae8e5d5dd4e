//! Top-k match rate over a hand-labeled corpus and the aggregation grid search.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::{
    aggregate_scores, rank_types, AggregateError, AggregationConfig, Reduce, TagPrediction, TreeFn,
};
use crate::ingest::{extract_text, IngestOptions};
use crate::ontology::TypeOntology;
use crate::pipeline::Summarizer;
use crate::score::TableScores;

pub const DEFAULT_K: usize = 3;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot read manifest {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("true type set is empty")]
    EmptyTruth,
    #[error("{path}: true type `{type_id}` is not in the ontology")]
    UnknownTrueType { path: PathBuf, type_id: String },
    #[error("no configurations to evaluate")]
    NoConfigs,
    #[error("every dataset in the corpus failed ({0} skipped)")]
    AllSkipped(usize),
    #[error(transparent)]
    Aggregate(#[from] AggregateError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub path: PathBuf,
    pub true_types: BTreeSet<String>,
}

/// Fraction of `truth` found among the first `k` predicted types.
pub fn match_rate(prediction: &TagPrediction, truth: &BTreeSet<String>, k: usize) -> Result<f64, HarnessError> {
    if truth.is_empty() {
        return Err(HarnessError::EmptyTruth);
    }
    if k == 0 {
        return Err(AggregateError::ZeroK.into());
    }
    let hits = prediction
        .ids()
        .take(k)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .filter(|id| truth.contains(*id))
        .count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Reads a JSON-lines manifest of `{"path": ..., "true_types": [...]}` records.
///
/// Relative paths are resolved against the manifest's directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<LabeledDataset>, HarnessError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| HarnessError::Io {
        path: path.to_owned(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new(""));
    parse_manifest(BufReader::new(file), base)
}

pub fn parse_manifest<R: BufRead>(reader: R, base: &Path) -> Result<Vec<LabeledDataset>, HarnessError> {
    let mut corpus = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| HarnessError::Io {
            path: base.to_owned(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let mut entry: LabeledDataset = serde_json::from_str(&line).map_err(|e| HarnessError::Manifest {
            line: i + 1,
            reason: e.to_string(),
        })?;
        if entry.true_types.is_empty() {
            return Err(HarnessError::Manifest {
                line: i + 1,
                reason: "true_types is empty".into(),
            });
        }
        if entry.path.is_relative() {
            entry.path = base.join(&entry.path);
        }
        corpus.push(entry);
    }
    Ok(corpus)
}

pub fn validate_corpus(corpus: &[LabeledDataset], ontology: &TypeOntology) -> Result<(), HarnessError> {
    for d in corpus {
        if d.true_types.is_empty() {
            return Err(HarnessError::EmptyTruth);
        }
        if let Some(t) = d.true_types.iter().find(|t| !ontology.contains(t)) {
            return Err(HarnessError::UnknownTrueType {
                path: d.path.clone(),
                type_id: t.clone(),
            });
        }
    }
    Ok(())
}

/// A corpus entry whose columns have been scored once, for reuse across configs.
#[derive(Debug, Clone)]
pub struct PreparedDataset {
    pub path: PathBuf,
    pub true_types: BTreeSet<String>,
    pub scores: TableScores,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedDataset {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct PreparedCorpus {
    pub datasets: Vec<PreparedDataset>,
    pub skipped: Vec<SkippedDataset>,
}

impl PreparedCorpus {
    /// Corpus size before skipping.
    pub fn size(&self) -> usize {
        self.datasets.len() + self.skipped.len()
    }
}

/// Ingests and scores every dataset. Datasets that fail to ingest or contain no
/// embeddable text are skipped and listed.
pub fn prepare_corpus(
    corpus: &[LabeledDataset],
    summarizer: &Summarizer,
    options: &IngestOptions,
) -> Result<PreparedCorpus, HarnessError> {
    if corpus.is_empty() {
        return Err(HarnessError::EmptyCorpus);
    }
    validate_corpus(corpus, summarizer.ontology())?;
    let results: Vec<Result<PreparedDataset, SkippedDataset>> = corpus
        .par_iter()
        .map(|d| {
            let skip = |reason: String| SkippedDataset {
                path: d.path.clone(),
                reason,
            };
            let table = extract_text(&d.path, options).map_err(|e| skip(e.to_string()))?;
            let scores = summarizer.score(&table);
            if scores.matrices.is_empty() {
                return Err(skip(AggregateError::NoText.to_string()));
            }
            Ok(PreparedDataset {
                path: d.path.clone(),
                true_types: d.true_types.clone(),
                scores,
            })
        })
        .collect();
    let mut prepared = PreparedCorpus::default();
    for r in results {
        match r {
            Ok(d) => prepared.datasets.push(d),
            Err(s) => prepared.skipped.push(s),
        }
    }
    Ok(prepared)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEvaluation {
    pub config: AggregationConfig,
    pub match_rate: f64,
    /// Datasets that contributed a rate.
    pub n: usize,
    pub skipped: usize,
}

/// Per-dataset match rates, in corpus order.
pub fn dataset_rates(
    prepared: &PreparedCorpus,
    ontology: &TypeOntology,
    config: &AggregationConfig,
    k: usize,
) -> Result<Vec<f64>, HarnessError> {
    prepared
        .datasets
        .iter()
        .map(|d| {
            let v = aggregate_scores(&d.scores, ontology, config)?;
            match_rate(&rank_types(&v, k)?, &d.true_types, k)
        })
        .collect()
}

/// Mean of the per-dataset match rates.
pub fn evaluate_prepared(
    prepared: &PreparedCorpus,
    ontology: &TypeOntology,
    config: &AggregationConfig,
    k: usize,
) -> Result<CorpusEvaluation, HarnessError> {
    if prepared.size() == 0 {
        return Err(HarnessError::EmptyCorpus);
    }
    if prepared.datasets.is_empty() {
        return Err(HarnessError::AllSkipped(prepared.skipped.len()));
    }
    let mut rates = dataset_rates(prepared, ontology, config, k)?;
    // Summing in sorted order makes the mean independent of corpus order.
    rates.sort_by(f64::total_cmp);
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    Ok(CorpusEvaluation {
        config: *config,
        match_rate: mean,
        n: rates.len(),
        skipped: prepared.skipped.len(),
    })
}

pub fn evaluate_corpus(
    corpus: &[LabeledDataset],
    summarizer: &Summarizer,
    options: &IngestOptions,
    config: &AggregationConfig,
    k: usize,
) -> Result<CorpusEvaluation, HarnessError> {
    let prepared = prepare_corpus(corpus, summarizer, options)?;
    evaluate_prepared(&prepared, summarizer.ontology(), config, k)
}

/// The eight standard column/tree/dataset combinations in a fixed reporting
/// order, starting with the default configuration.
pub fn default_grid() -> Vec<AggregationConfig> {
    use Reduce::{Max, Mean};
    use TreeFn::{Max as TMax, MeanMax};
    [
        (Mean, MeanMax, Mean),
        (Max, MeanMax, Mean),
        (Mean, TMax, Mean),
        (Max, TMax, Mean),
        (Mean, MeanMax, Max),
        (Mean, TMax, Max),
        (Max, TMax, Max),
        (Max, MeanMax, Max),
    ]
    .into_iter()
    .map(|(c, t, d)| AggregationConfig::new(c, t, d))
    .collect()
}

/// Every column × tree × dataset combination (2 × 5 × 2).
pub fn full_grid() -> Vec<AggregationConfig> {
    let mut grid = Vec::new();
    for column in [Reduce::Mean, Reduce::Max] {
        for tree in [
            TreeFn::Mean,
            TreeFn::Max,
            TreeFn::MeanMax,
            TreeFn::MaxMean,
            TreeFn::None,
        ] {
            for dataset in [Reduce::Mean, Reduce::Max] {
                grid.push(AggregationConfig::new(column, tree, dataset));
            }
        }
    }
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub config: AggregationConfig,
    pub label: String,
    pub match_rate: f64,
    pub n: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub k: usize,
    pub corpus_size: usize,
    /// Sorted by descending match rate; ties keep input order.
    pub rows: Vec<GridRow>,
}

pub fn grid_search(
    prepared: &PreparedCorpus,
    ontology: &TypeOntology,
    configs: &[AggregationConfig],
    k: usize,
) -> Result<GridResult, HarnessError> {
    if configs.is_empty() {
        return Err(HarnessError::NoConfigs);
    }
    let evals = configs
        .par_iter()
        .map(|c| evaluate_prepared(prepared, ontology, c, k))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows: Vec<GridRow> = evals
        .into_iter()
        .map(|e| GridRow {
            label: e.config.label(),
            config: e.config,
            match_rate: e.match_rate,
            n: e.n,
            skipped: e.skipped,
        })
        .collect();
    rows.sort_by(|a, b| b.match_rate.total_cmp(&a.match_rate));
    Ok(GridResult {
        k,
        corpus_size: prepared.size(),
        rows,
    })
}

impl GridResult {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("column\ttree\tdataset\tmatch_rate\tn\tskipped\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                r.config.column, r.config.tree, r.config.dataset, r.match_rate, r.n, r.skipped
            );
        }
        out
    }

    /// Two-column CSV of plot label and match rate.
    pub fn to_plot_csv(&self) -> String {
        let mut out = String::from("config,match_rate\n");
        for r in &self.rows {
            let _ = writeln!(out, "\"{}\",{}", r.label, r.match_rate);
        }
        out
    }
}
