//! Round-trip and index-consistency properties of the triple store.

use std::collections::HashSet;

use proptest::prelude::*;
use tempfile::tempdir;

use prge_core::graph::{load_graph, load_graph_with_labels, save_graph, save_noise_labels};
use prge_core::KnowledgeGraph;

fn label() -> impl Strategy<Value = String> {
    proptest::string::string_regex("[a-zA-Z0-9_#/<>'À-ÿ ]{1,10}").unwrap()
}

fn label_triples() -> impl Strategy<Value = Vec<(String, String, String, bool)>> {
    proptest::collection::vec((label(), label(), label(), any::<bool>()), 1..120)
}

fn build(triples: &[(String, String, String, bool)]) -> KnowledgeGraph {
    let mut b = KnowledgeGraph::builder();
    for (s, r, o, noise) in triples {
        b.add_triple_labels(s, r, o, *noise);
    }
    b.build()
}

fn label_set(g: &KnowledgeGraph) -> HashSet<(String, String, String)> {
    g.triples()
        .iter()
        .map(|t| {
            (
                g.entities().label(t.subject).unwrap().to_owned(),
                g.relations().label(t.relation).unwrap().to_owned(),
                g.entities().label(t.object).unwrap().to_owned(),
            )
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn save_load_round_trip_preserves_label_set(triples in label_triples()) {
        let g = build(&triples);
        let dir = tempdir().unwrap();
        let gp = dir.path().join("g.tsv");
        let lp = dir.path().join("g.labels");
        save_graph(&g, &gp).unwrap();
        save_noise_labels(&g, &lp).unwrap();
        let (g2, _) = load_graph_with_labels(&gp, &lp).unwrap();
        prop_assert_eq!(label_set(&g), label_set(&g2));
        prop_assert_eq!(g.noise_labels(), g2.noise_labels());
    }

    #[test]
    fn indexes_cover_every_triple_exactly_once(triples in label_triples()) {
        let g = build(&triples);
        let mut out_total = 0usize;
        let mut in_total = 0usize;
        for t in g.triples() {
            prop_assert!(g.objects(t.subject, t.relation).contains(&t.object));
            prop_assert!(g.subjects(t.object, t.relation).contains(&t.subject));
        }
        for e in 0..g.num_entities() as u32 {
            for &(r, _) in g.out_edges(e) {
                out_total += 1;
                let _ = r;
            }
            in_total += g.in_edges(e).len();
        }
        prop_assert_eq!(out_total, g.len());
        prop_assert_eq!(in_total, g.len());
    }

    #[test]
    fn membership_agrees_with_linear_scan(triples in label_triples(), queries in proptest::collection::vec((0u32..40, 0u32..5, 0u32..40), 20)) {
        let g = build(&triples);
        for (s, r, o) in queries {
            if (s as usize) < g.num_entities() && (r as usize) < g.num_relations() && (o as usize) < g.num_entities() {
                let scan = g.triples().iter().any(|t| t.spo() == (s, r, o));
                prop_assert_eq!(g.contains(s, r, o), scan);
            }
        }
    }
}

#[test]
fn ten_thousand_triple_round_trip() {
    let g = prge_core::synth::random_graph(300, 6, 10_000, 99);
    let dir = tempdir().unwrap();
    let gp = dir.path().join("big.tsv");
    save_graph(&g, &gp).unwrap();
    let (g2, report) = load_graph(&gp).unwrap();
    assert_eq!(report.duplicates_dropped, 0);
    assert_eq!(label_set(&g), label_set(&g2));
    assert_eq!(g2.len(), 10_000);
}

/// Checks the published WN18 statistics when the dataset is available
/// locally; set WN18_DIR to a directory containing train/valid/test files.
#[test]
#[ignore = "needs WN18_DIR pointing at local dataset files"]
fn wn18_counts_match_published_statistics() {
    let dir = std::env::var("WN18_DIR").expect("WN18_DIR not set");
    let dir = std::path::Path::new(&dir);
    let pick = |names: &[&str]| {
        names
            .iter()
            .map(|n| dir.join(n))
            .find(|p| p.exists())
            .unwrap_or_else(|| panic!("none of {names:?} found in {dir:?}"))
    };
    let train = pick(&["train.txt", "wordnet-mlj12-train.txt"]);
    let valid = pick(&["valid.txt", "wordnet-mlj12-valid.txt"]);
    let test = pick(&["test.txt", "wordnet-mlj12-test.txt"]);
    let (g, _, _) = prge_core::graph::load_split_files(train, valid, test).unwrap();
    assert_eq!(g.num_relations(), 18);
    assert_eq!(g.num_entities(), 40_943);
    assert_eq!(g.len(), 141_442);
}
