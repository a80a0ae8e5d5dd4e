//! Seeded synthetic models, type forests and tables for tests and demos.
//!
//! Vocabulary tokens are `w000`, `w001`, ... Most types are named after a
//! vocabulary token; some are two-token CamelCase names (`W003W017`) that only
//! resolve through the split-name fallback, and one (`Zunknown`) has no vector.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embedding::EmbeddingModel;
use crate::ingest::{read_table, IngestOptions, TableText};
use crate::ontology::TypeOntology;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixtureSpec {
    pub vocab: usize,
    pub dimension: usize,
    pub types: usize,
    pub columns: usize,
    pub cells: usize,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            vocab: 100,
            dimension: 16,
            types: 15,
            columns: 3,
            cells: 20,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub model: EmbeddingModel,
    pub ontology: TypeOntology,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Paths written by [`Fixture::write_to`].
#[derive(Debug, Clone)]
pub struct FixturePaths {
    pub model_text: PathBuf,
    pub model_binary: PathBuf,
    pub ontology_tsv: PathBuf,
    pub csv: PathBuf,
}

pub fn word(i: usize) -> String {
    format!("w{i:03}")
}

/// A model with `vocab` tokens and uniformly random components in [-1, 1].
pub fn random_model(rng: &mut impl Rng, vocab: usize, dimension: usize) -> EmbeddingModel {
    let entries = (0..vocab).map(|i| {
        let v: Vec<f32> = (0..dimension).map(|_| rng.gen_range(-1.0f32..=1.0)).collect();
        (word(i), v)
    });
    EmbeddingModel::from_vectors(dimension, entries).expect("generated vectors are valid")
}

/// Random forest over `ids`: each node takes a parent among the nodes before it,
/// or none with probability 1/4. Returned as `(id, parent)` in `ids` order.
pub fn random_forest(rng: &mut impl Rng, ids: &[String]) -> Vec<(String, Option<String>)> {
    ids.iter()
        .enumerate()
        .map(|(i, id)| {
            let parent = (i > 0 && rng.gen_bool(0.75)).then(|| ids[rng.gen_range(0..i)].clone());
            (id.clone(), parent)
        })
        .collect()
}

pub fn forest_ontology(forest: &[(String, Option<String>)]) -> TypeOntology {
    let roots = forest.iter().filter(|(_, p)| p.is_none()).map(|(id, _)| id.clone());
    let edges = forest
        .iter()
        .filter_map(|(id, p)| p.as_ref().map(|p| (id.clone(), p.clone())));
    TypeOntology::from_edges(roots, edges).expect("generated forest is acyclic")
}

/// Header names and `spec.cells` rows of `spec.columns` text cells. About one
/// cell in ten is entirely out of vocabulary and another one in ten carries an
/// extra unknown token.
pub fn random_rows(rng: &mut impl Rng, spec: &FixtureSpec) -> (Vec<String>, Vec<Vec<String>>) {
    let headers = (0..spec.columns).map(|_| word(rng.gen_range(0..spec.vocab))).collect();
    let rows = (0..spec.cells)
        .map(|_| {
            (0..spec.columns)
                .map(|_| {
                    let roll: f64 = rng.gen();
                    if roll < 0.1 {
                        return "unseen token".to_owned();
                    }
                    let n = rng.gen_range(1..=3);
                    let mut cell: Vec<String> = (0..n).map(|_| word(rng.gen_range(0..spec.vocab))).collect();
                    if roll < 0.2 {
                        cell.push("oov".to_owned());
                    }
                    cell.join(" ")
                })
                .collect()
        })
        .collect();
    (headers, rows)
}

/// Renders headers and rows as CSV. Cells never contain delimiters or quotes.
pub fn to_csv(headers: &[String], rows: &[Vec<String>]) -> String {
    let mut out = headers.join(",");
    out.push('\n');
    for row in rows {
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

impl Fixture {
    pub fn generate(spec: &FixtureSpec, seed: u64) -> Fixture {
        assert!(spec.vocab >= 4 && spec.types >= 2 && spec.columns >= 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_model(&mut rng, spec.vocab, spec.dimension);

        let mut words: Vec<usize> = (0..spec.vocab).collect();
        words.shuffle(&mut rng);
        let mut ids = Vec::with_capacity(spec.types);
        ids.push("Zunknown".to_owned());
        let mut next = words.iter().cycle();
        while ids.len() < spec.types {
            let id = if ids.len() % 4 == 3 {
                let a = *next.next().unwrap();
                let b = *next.next().unwrap();
                format!("W{a:03}W{b:03}")
            } else {
                word(*next.next().unwrap())
            };
            if !ids.contains(&id) {
                ids.push(id);
            }
        }
        ids.shuffle(&mut rng);
        let ontology = forest_ontology(&random_forest(&mut rng, &ids));

        let (headers, rows) = random_rows(&mut rng, spec);

        Fixture {
            model,
            ontology,
            headers,
            rows,
        }
    }

    pub fn csv(&self) -> String {
        to_csv(&self.headers, &self.rows)
    }

    /// Another table over the same vocabulary, drawn from `seed`.
    pub fn sibling_csv(&self, spec: &FixtureSpec, seed: u64) -> String {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (headers, rows) = random_rows(&mut rng, spec);
        to_csv(&headers, &rows)
    }

    pub fn table(&self, options: &IngestOptions) -> TableText {
        read_table(self.csv().as_bytes(), options).expect("generated CSV is well-formed")
    }

    pub fn write_to(&self, dir: &Path) -> io::Result<FixturePaths> {
        let paths = FixturePaths {
            model_text: dir.join("model.txt"),
            model_binary: dir.join("model.bin"),
            ontology_tsv: dir.join("ontology.tsv"),
            csv: dir.join("table.csv"),
        };
        let mut buf = Vec::new();
        self.model.write_text(&mut buf)?;
        std::fs::write(&paths.model_text, &buf)?;
        buf.clear();
        self.model.write_binary(&mut buf)?;
        std::fs::write(&paths.model_binary, &buf)?;
        buf.clear();
        self.ontology.write_tsv(&mut buf)?;
        std::fs::write(&paths.ontology_tsv, &buf)?;
        std::fs::write(&paths.csv, self.csv())?;
        Ok(paths)
    }
}
