mod common;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tabsum_core::ontology::{OntologyFormat, TypeVectors};
use tabsum_core::synth::{forest_ontology, random_forest, Fixture, FixtureSpec};
use tabsum_core::{TokenTemplate, TypeOntology};

fn random_ids(n: usize) -> Vec<String> {
    // Non-monotone names so generation order differs from lexicographic order.
    (0..n).map(|i| format!("t{}", (i * 37) % 101)).collect()
}

#[test]
fn random_forest_survives_tsv_round_trip() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let forest = random_forest(&mut rng, &random_ids(50));
        let ontology = forest_ontology(&forest);

        let mut tsv = Vec::new();
        ontology.write_tsv(&mut tsv).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("o.tsv");
        std::fs::write(&path, &tsv).unwrap();
        let reloaded = TypeOntology::load(&path, OntologyFormat::Tsv).unwrap();

        let expected: BTreeMap<String, Option<String>> = forest.iter().cloned().collect();
        assert_eq!(common::forest_of(&reloaded), expected);
        for id in expected.keys() {
            let mut kids: Vec<&str> = expected
                .iter()
                .filter(|(_, p)| p.as_deref() == Some(id.as_str()))
                .map(|(c, _)| c.as_str())
                .collect();
            kids.sort();
            assert_eq!(reloaded.children_of(id).unwrap(), kids);
        }
    }
}

#[test]
fn forest_invariants() {
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ontology = forest_ontology(&random_forest(&mut rng, &random_ids(40)));
        let total: usize = ontology.roots().map(|r| ontology.subtree_size(r).unwrap()).sum();
        assert_eq!(total, ontology.len());
        for node in ontology.nodes() {
            match ontology.parent_of(&node.id).unwrap() {
                None => assert_eq!(node.depth, 0),
                Some(p) => {
                    assert!(ontology.children_of(p).unwrap().contains(&node.id.as_str()));
                    assert_eq!(node.depth, ontology.node(p).unwrap().depth + 1);
                }
            }
        }
    }
}

#[test]
fn ntriples_file_matches_equivalent_tsv() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let forest = random_forest(&mut rng, &random_ids(30));
    let mut nt = String::new();
    for (child, parent) in &forest {
        if let Some(parent) = parent {
            nt.push_str(&format!(
                "<http://dbpedia.org/ontology/{child}> <http://www.w3.org/2000/01/rdf-schema#subClassOf> <http://dbpedia.org/ontology/{parent}> .\n"
            ));
        }
        nt.push_str(&format!(
            "<http://dbpedia.org/ontology/{child}> <http://www.w3.org/2000/01/rdf-schema#label> \"{child}\"@en .\n"
        ));
    }
    let from_nt = TypeOntology::read_ntriples(&mut nt.as_bytes()).unwrap();
    let from_forest = forest_ontology(&forest);
    // Isolated roots have no subclass statement, so only compare typed nodes.
    for id in from_nt.ids() {
        assert_eq!(from_nt.parent_of(id).unwrap(), from_forest.parent_of(id).unwrap());
        assert_eq!(from_nt.children_of(id).unwrap(), from_forest.children_of(id).unwrap());
    }
}

#[test]
fn all_type_vectors_match_oracle_and_cache() {
    for seed in 0..10 {
        let fx = Fixture::generate(&FixtureSpec::default(), seed);
        let template = TokenTemplate::default();
        let cache = TypeVectors::compute(&fx.ontology, &fx.model, &template);
        for id in fx.ontology.ids() {
            let uncached = fx.ontology.type_vector(&fx.model, &template, id).unwrap();
            let cached = cache.get(id).unwrap().cloned();
            assert_eq!(uncached, cached, "{id}");
            let oracle = common::type_vector(&fx.model, id);
            match (uncached, oracle) {
                (None, None) => {}
                (Some(got), Some(want)) => {
                    for (x, y) in got.components().iter().zip(&want) {
                        assert!((x - y).abs() <= 1e-12, "{id}");
                    }
                }
                (got, want) => panic!("{id}: {got:?} vs {want:?}"),
            }
        }
        assert_eq!(cache.unscorable(), ["Zunknown"]);
    }
}
