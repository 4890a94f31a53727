//! Writes a synthetic benchmark graph as a triple TSV, ready for the CLI:
//!
//! ```text
//! cargo run --example gen_synth -- echo /tmp/synth.tsv 7
//! cargo run --example gen_synth -- community /tmp/synth.tsv 7
//! ```

use prge_core::graph::save_graph;
use prge_core::synth::{community_graph, echo_graph, CommunityGraphConfig, EchoGraphConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let kind = args.next().unwrap_or_else(|| "echo".to_owned());
    let out = args.next().unwrap_or_else(|| "synth.tsv".to_owned());
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);

    let graph = match kind.as_str() {
        "echo" => echo_graph(&EchoGraphConfig {
            seed,
            ..Default::default()
        }),
        "community" => community_graph(&CommunityGraphConfig {
            seed,
            zipf_exponent: 1.0,
            ..Default::default()
        }),
        other => {
            eprintln!("unknown graph kind {other:?} (use echo or community)");
            std::process::exit(1);
        }
    };
    save_graph(&graph, &out).expect("write graph");
    println!(
        "wrote {} triples over {} entities / {} relations to {out}",
        graph.len(),
        graph.num_entities(),
        graph.num_relations()
    );
}
