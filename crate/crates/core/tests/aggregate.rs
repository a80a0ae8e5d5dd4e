mod common;

use std::collections::BTreeMap;
use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tabsum_core::aggregate::{
    aggregate_column, aggregate_dataset, aggregate_scores, rank_types, summarize, tree_aggregate,
};
use tabsum_core::score::{score_table, ColumnScoreMatrix};
use tabsum_core::synth::{forest_ontology, random_forest, Fixture, FixtureSpec};
use tabsum_core::{
    AggregationConfig, IngestOptions, Reduce, ScoreVector, TokenTemplate, TreeFn, TreePlacement, TypeSpace,
};

fn ids(n: usize) -> Arc<[String]> {
    (0..n).map(|i| format!("t{i:02}")).collect()
}

fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> ColumnScoreMatrix {
    ColumnScoreMatrix {
        column_name: "c".into(),
        type_ids: ids(cols),
        rows: (0..rows)
            .map(|_| (0..cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect(),
        dropped_cells: 0,
    }
}

#[test]
fn column_reduction_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let m = random_matrix(&mut rng, 50, 20);
        for (f, name) in [(Reduce::Mean, "mean"), (Reduce::Max, "max")] {
            let got = aggregate_column(&m, f).unwrap().scores;
            let want = common::column_oracle(&m.rows, name);
            for (x, y) in got.iter().zip(&want) {
                assert!((x - y).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn dataset_reduction_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let t = ids(30);
        let raw: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..30).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let vectors: Vec<ScoreVector> = raw.iter().map(|s| ScoreVector::new(t.clone(), s.clone())).collect();
        for (f, name) in [(Reduce::Mean, "mean"), (Reduce::Max, "max")] {
            let got = aggregate_dataset(&vectors, f).unwrap().scores;
            let want = common::dataset_oracle(&raw, name);
            for (x, y) in got.iter().zip(&want) {
                assert!((x - y).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn tree_update_matches_recursive_oracle_for_every_function() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for trial in 0..100 {
        let n = rng.gen_range(1..=50);
        let names: Vec<String> = (0..n).map(|i| format!("n{}", (i * 7919) % 1000)).collect();
        let forest = random_forest(&mut rng, &names);
        let ontology = forest_ontology(&forest);
        let parents = common::forest_of(&ontology);
        // Drop a few types from the scored set to exercise the skip rule.
        let scored: Vec<String> = parents
            .keys()
            .filter(|_| trial % 3 != 0 || rng.gen_bool(0.8))
            .cloned()
            .collect();
        if scored.is_empty() {
            continue;
        }
        let scores: Vec<f64> = scored.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v = ScoreVector::new(scored.iter().cloned().collect(), scores.clone());
        let as_map: BTreeMap<String, f64> = scored.iter().cloned().zip(scores).collect();
        for (f, name) in [
            (TreeFn::MeanMax, "meanmax"),
            (TreeFn::MaxMean, "maxmean"),
            (TreeFn::Mean, "mean"),
            (TreeFn::Max, "max"),
            (TreeFn::None, "none"),
        ] {
            let got = tree_aggregate(&v, &ontology, f).unwrap();
            let want = common::tree_oracle(&parents, &as_map, name);
            for (id, x) in got.type_ids.iter().zip(&got.scores) {
                assert!((x - want[id]).abs() <= 1e-12, "{name} {id}");
            }
        }
    }
}

#[test]
fn ranking_matches_selection_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..200 {
        let n = rng.gen_range(1..40);
        let t = ids(n);
        // Coarse scores so ties actually occur.
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..8) as f64 / 8.0).collect();
        let k = rng.gen_range(1..=n + 2);
        let got = rank_types(&ScoreVector::new(t.clone(), scores.clone()), k).unwrap();
        let want = common::rank_oracle(&t, &scores, k);
        let got: Vec<(String, f64)> = got.tags.into_iter().map(|g| (g.type_id, g.score)).collect();
        assert_eq!(got, want);
    }
}

#[test]
fn summarize_matches_composed_oracle() {
    let configs = [
        ("mean", "meanmax", "mean"),
        ("max", "max", "mean"),
        ("mean", "maxmean", "max"),
        ("max", "none", "max"),
        ("mean", "mean", "mean"),
    ];
    for seed in 0..10 {
        let fx = Fixture::generate(&FixtureSpec::default(), seed);
        let space = TypeSpace::new(&fx.ontology, &fx.model, &TokenTemplate::default()).unwrap();
        let table = fx.table(&IngestOptions::default());
        let forest = common::forest_of(&fx.ontology);
        let columns: Vec<Vec<Vec<String>>> = table.columns.iter().map(|c| c.cells.clone()).collect();
        for (c, t, d) in configs {
            let config = AggregationConfig::new(c.parse().unwrap(), t.parse().unwrap(), d.parse().unwrap());
            let got = summarize(&table, &fx.ontology, &space, &fx.model, &config, 5).unwrap();
            let want = common::summarize_oracle(&fx.model, &forest, &columns, (c, t, d), 5);
            assert_eq!(got.tags.len(), want.len());
            for (g, (id, s)) in got.tags.iter().zip(&want) {
                assert_eq!(&g.type_id, id, "seed {seed} {c},{t},{d}");
                assert!((g.score - s).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn tree_after_dataset_placement() {
    let fx = Fixture::generate(&FixtureSpec::default(), 5);
    let space = TypeSpace::new(&fx.ontology, &fx.model, &TokenTemplate::default()).unwrap();
    let scores = score_table(&fx.table(&IngestOptions::default()), &space, &fx.model);
    let config = AggregationConfig {
        placement: TreePlacement::AfterDataset,
        ..AggregationConfig::default()
    };
    let got = aggregate_scores(&scores, &fx.ontology, &config).unwrap();

    let columns: Vec<_> = scores
        .matrices
        .iter()
        .map(|m| aggregate_column(m, Reduce::Mean).unwrap())
        .collect();
    let dataset = aggregate_dataset(&columns, Reduce::Mean).unwrap();
    assert_eq!(got, tree_aggregate(&dataset, &fx.ontology, TreeFn::MeanMax).unwrap());
    // A linear tree step commutes with mean reduction, so placement is irrelevant.
    let linear = AggregationConfig::new(Reduce::Mean, TreeFn::Mean, Reduce::Mean);
    let after = AggregationConfig {
        placement: TreePlacement::AfterDataset,
        ..linear
    };
    let a = aggregate_scores(&scores, &fx.ontology, &linear).unwrap();
    let b = aggregate_scores(&scores, &fx.ontology, &after).unwrap();
    for (x, y) in a.scores.iter().zip(&b.scores) {
        assert!((x - y).abs() < 1e-12);
    }
}

fn small_forest_vector(seed: u64) -> (tabsum_core::TypeOntology, ScoreVector) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=30);
    let names: Vec<String> = (0..n).map(|i| format!("x{i:02}")).collect();
    let ontology = forest_ontology(&random_forest(&mut rng, &names));
    let t: Arc<[String]> = ontology.ids().map(str::to_owned).collect();
    let scores = (0..t.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (ontology, ScoreVector::new(t, scores))
}

proptest! {
    #[test]
    fn leaves_never_change(seed in any::<u64>()) {
        let (o, v) = small_forest_vector(seed);
        for f in [TreeFn::Mean, TreeFn::Max, TreeFn::MeanMax, TreeFn::MaxMean, TreeFn::None] {
            let out = tree_aggregate(&v, &o, f).unwrap();
            for (i, id) in v.type_ids.iter().enumerate() {
                if o.children_of(id).unwrap().is_empty() {
                    prop_assert_eq!(out.scores[i], v.scores[i]);
                }
            }
        }
    }

    #[test]
    fn max_tree_never_lowers_a_score(seed in any::<u64>()) {
        let (o, v) = small_forest_vector(seed);
        let out = tree_aggregate(&v, &o, TreeFn::Max).unwrap();
        for (a, b) in out.scores.iter().zip(&v.scores) {
            prop_assert!(a >= b);
        }
    }

    #[test]
    fn rank_prefix_is_stable(seed in any::<u64>(), k in 1usize..10) {
        let (_, v) = small_forest_vector(seed);
        let long = rank_types(&v, k + 5).unwrap();
        let short = rank_types(&v, k).unwrap();
        prop_assert_eq!(&long.tags[..short.len()], &short.tags[..]);
        prop_assert!(long.tags.windows(2).all(|w| w[0].score >= w[1].score));
    }
}
