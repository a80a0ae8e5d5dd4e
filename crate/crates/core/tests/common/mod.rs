//! Brute-force reference computations for the scoring pipeline.
//!
//! Everything here works from raw inputs (stored model floats, a plain
//! parent map, score tables) and deliberately avoids the library's
//! aggregation, ranking and ontology traversal code.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use tabsum_core::EmbeddingModel;

/// Parent map keyed by type id; roots map to `None`.
pub type Forest = BTreeMap<String, Option<String>>;

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..u.len() {
        s += u[i] * v[i];
    }
    s
}

fn normalize(v: &[f64]) -> Option<Vec<f64>> {
    let mut sq = 0.0;
    for x in v {
        sq += x * x;
    }
    let norm = f64::sqrt(sq);
    if norm.is_nan() || norm < 1e-12 {
        return None;
    }
    Some(v.iter().map(|x| x / norm).collect())
}

/// Unit vector of an in-vocabulary token, from the stored floats.
pub fn token_vector(model: &EmbeddingModel, token: &str) -> Option<Vec<f64>> {
    let raw = model.raw(token)?;
    let v: Vec<f64> = raw.iter().map(|&x| x as f64).collect();
    normalize(&v)
}

pub fn phrase_vector(model: &EmbeddingModel, tokens: &[String]) -> Option<Vec<f64>> {
    let mut sum = vec![0.0; model.dimension()];
    let mut n = 0usize;
    for t in tokens {
        if let Some(v) = token_vector(model, t) {
            for i in 0..sum.len() {
                sum[i] += v[i];
            }
            n += 1;
        }
    }
    if n == 0 {
        return None;
    }
    for x in sum.iter_mut() {
        *x /= n as f64;
    }
    normalize(&sum)
}

fn split_words(name: &str) -> Vec<String> {
    let mut words: Vec<String> = Vec::new();
    for ch in name.chars() {
        if !ch.is_alphanumeric() {
            words.push(String::new());
        } else if ch.is_uppercase() {
            words.push(ch.to_lowercase().collect());
        } else {
            match words.last_mut() {
                Some(w) => w.push(ch),
                None => words.push(ch.to_string()),
            }
        }
    }
    words.into_iter().filter(|w| !w.is_empty()).collect()
}

/// Type vector with the default `{}` template: direct token, else split-name phrase.
pub fn type_vector(model: &EmbeddingModel, id: &str) -> Option<Vec<f64>> {
    token_vector(model, id)
        .or_else(|| token_vector(model, &id.to_lowercase()))
        .or_else(|| {
            let words = split_words(id);
            if words.is_empty() {
                None
            } else {
                phrase_vector(model, &words)
            }
        })
}

pub fn reduce_mean(values: &[f64]) -> f64 {
    let mut s = 0.0;
    for v in values {
        s += v;
    }
    s / values.len() as f64
}

pub fn reduce_max(values: &[f64]) -> f64 {
    let mut m = values[0];
    for &v in &values[1..] {
        if v > m {
            m = v;
        }
    }
    m
}

pub fn reduce(name: &str, values: &[f64]) -> f64 {
    match name {
        "mean" => reduce_mean(values),
        "max" => reduce_max(values),
        other => panic!("no reducer {other}"),
    }
}

/// Column reduction: per type, across rows.
pub fn column_oracle(rows: &[Vec<f64>], f: &str) -> Vec<f64> {
    let width = rows[0].len();
    let mut out = Vec::with_capacity(width);
    for t in 0..width {
        let column: Vec<f64> = rows.iter().map(|r| r[t]).collect();
        out.push(reduce(f, &column));
    }
    out
}

/// Dataset reduction: per type, across column vectors.
pub fn dataset_oracle(vectors: &[Vec<f64>], f: &str) -> Vec<f64> {
    column_oracle(vectors, f)
}

fn children(forest: &Forest, id: &str) -> Vec<String> {
    // BTreeMap iteration is lexicographic.
    forest
        .iter()
        .filter(|(_, p)| p.as_deref() == Some(id))
        .map(|(c, _)| c.clone())
        .collect()
}

/// Recursive definition of the hierarchy update:
/// updated(t) = own(t) if no scored child, else g(own(t), h(updated(c) for scored children c)).
pub fn tree_oracle(forest: &Forest, scores: &BTreeMap<String, f64>, f: &str) -> BTreeMap<String, f64> {
    fn updated(forest: &Forest, scores: &BTreeMap<String, f64>, f: &str, id: &str) -> Option<f64> {
        let own = *scores.get(id)?;
        let kids: Vec<f64> = children(forest, id)
            .iter()
            .filter_map(|c| updated(forest, scores, f, c))
            .collect();
        if kids.is_empty() || f == "none" {
            return Some(own);
        }
        Some(match f {
            "meanmax" => (own + reduce_max(&kids)) / 2.0,
            "maxmean" => own.max(reduce_mean(&kids)),
            "mean" => (own + reduce_mean(&kids)) / 2.0,
            "max" => own.max(reduce_max(&kids)),
            other => panic!("no tree function {other}"),
        })
    }
    scores
        .keys()
        .map(|id| (id.clone(), updated(forest, scores, f, id).unwrap()))
        .collect()
}

/// Top `k` by repeated selection of the best remaining (score desc, id asc).
pub fn rank_oracle(ids: &[String], scores: &[f64], k: usize) -> Vec<(String, f64)> {
    let mut taken = vec![false; ids.len()];
    let mut out = Vec::new();
    while out.len() < k.min(ids.len()) {
        let mut best: Option<usize> = None;
        for i in 0..ids.len() {
            if taken[i] {
                continue;
            }
            best = match best {
                None => Some(i),
                Some(b) if scores[i] > scores[b] || (scores[i] == scores[b] && ids[i] < ids[b]) => Some(i),
                keep => keep,
            };
        }
        let b = best.unwrap();
        taken[b] = true;
        out.push((ids[b].clone(), scores[b]));
    }
    out
}

pub fn match_oracle(predicted: &[String], truth: &BTreeSet<String>, k: usize) -> f64 {
    let mut hits = 0;
    for t in truth {
        if predicted.iter().take(k).any(|p| p == t) {
            hits += 1;
        }
    }
    hits as f64 / truth.len() as f64
}

/// Similarity rows for one column: one row per embeddable cell, one entry per type.
pub fn score_oracle(
    model: &EmbeddingModel,
    cells: &[Vec<String>],
    type_vectors: &[(String, Vec<f64>)],
) -> Vec<Vec<f64>> {
    let mut rows = Vec::new();
    for cell in cells {
        if let Some(e) = phrase_vector(model, cell) {
            rows.push(type_vectors.iter().map(|(_, t)| dot(&e, t)).collect());
        }
    }
    rows
}

/// Scorable types in lexicographic order with their vectors.
pub fn scorable_types(model: &EmbeddingModel, forest: &Forest) -> Vec<(String, Vec<f64>)> {
    forest
        .keys()
        .filter_map(|id| type_vector(model, id).map(|v| (id.clone(), v)))
        .collect()
}

/// End-to-end: score each column, reduce rows, update up the forest, reduce columns, rank.
pub fn summarize_oracle(
    model: &EmbeddingModel,
    forest: &Forest,
    columns: &[Vec<Vec<String>>],
    config: (&str, &str, &str),
    k: usize,
) -> Vec<(String, f64)> {
    let types = scorable_types(model, forest);
    let ids: Vec<String> = types.iter().map(|(id, _)| id.clone()).collect();
    let mut per_column = Vec::new();
    for cells in columns {
        let rows = score_oracle(model, cells, &types);
        if rows.is_empty() {
            continue;
        }
        let v = column_oracle(&rows, config.0);
        let scores: BTreeMap<String, f64> = ids.iter().cloned().zip(v).collect();
        let updated = tree_oracle(forest, &scores, config.1);
        per_column.push(ids.iter().map(|id| updated[id]).collect::<Vec<f64>>());
    }
    let dataset = dataset_oracle(&per_column, config.2);
    rank_oracle(&ids, &dataset, k)
}

/// Parent map of an ontology, read through its public accessors.
pub fn forest_of(ontology: &tabsum_core::TypeOntology) -> Forest {
    ontology
        .ids()
        .map(|id| (id.to_owned(), ontology.parent_of(id).unwrap().map(str::to_owned)))
        .collect()
}
