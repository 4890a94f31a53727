//! Synthetic benchmark graphs.
//!
//! Three generators with known structure: a uniform random graph for
//! oracles, a community graph whose triples stay inside entity blocks (so
//! random corruptions are detectable from local connectivity), and a
//! composition graph where a target relation holds exactly when a two-step
//! relation path connects the pair.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::collections::HashSet;

use crate::graph::{KnowledgeGraph, RelationId};

/// Uniform random graph over `entities` x `relations`, exactly `triples`
/// distinct triples (self-loops excluded). All entities are interned even if
/// isolated.
pub fn random_graph(
    entities: usize,
    relations: usize,
    triples: usize,
    seed: u64,
) -> KnowledgeGraph {
    assert!(entities >= 2, "need at least two entities");
    assert!(relations >= 1);
    let max = entities * (entities - 1) * relations;
    assert!(
        triples <= max,
        "requested {triples} triples, only {max} possible"
    );
    let mut builder = KnowledgeGraph::builder();
    for i in 0..entities {
        builder.add_entity(&format!("e{i}"));
    }
    for j in 0..relations {
        builder.add_relation(&format!("r{j}"));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut seen = HashSet::with_capacity(triples);
    while seen.len() < triples {
        let s = rng.random_range(0..entities) as u32;
        let o = rng.random_range(0..entities) as u32;
        if s == o {
            continue;
        }
        let r = rng.random_range(0..relations) as u32;
        if seen.insert((s, r, o)) {
            builder
                .add_triple(crate::graph::Triple::new(s, r, o))
                .expect("ids in range");
        }
    }
    builder.build()
}

#[derive(Debug, Clone, Copy)]
pub struct CommunityGraphConfig {
    pub entities: usize,
    pub communities: usize,
    pub relations: usize,
    pub triples: usize,
    /// Degree skew inside a community: endpoints are drawn with weight
    /// `(rank + 1)^-zipf_exponent`. 0 gives uniform degrees; around 1 gives
    /// the hub-and-leaf shape of real knowledge graphs, where low-degree
    /// entities are easily displaced by noise.
    pub zipf_exponent: f64,
    pub seed: u64,
}

impl Default for CommunityGraphConfig {
    fn default() -> Self {
        Self {
            entities: 200,
            communities: 10,
            relations: 5,
            triples: 2000,
            zipf_exponent: 0.0,
            seed: 0,
        }
    }
}

/// Block-structured graph: every triple connects two entities of the same
/// community. Random corruptions usually cross communities and therefore
/// lack the short connecting paths that clean triples have.
pub fn community_graph(config: &CommunityGraphConfig) -> KnowledgeGraph {
    let CommunityGraphConfig {
        entities,
        communities,
        relations,
        triples,
        zipf_exponent,
        seed,
    } = *config;
    assert!(communities >= 1 && entities >= 2 * communities);
    let community_size = entities / communities;
    assert!(community_size >= 2);
    let per_community_max = community_size * (community_size - 1) * relations;
    assert!(
        triples <= per_community_max * communities,
        "too many triples for the block structure"
    );

    let mut builder = KnowledgeGraph::builder();
    for i in 0..entities {
        builder.add_entity(&format!("e{i:04}"));
    }
    for j in 0..relations {
        builder.add_relation(&format!("r{j}"));
    }
    // cumulative Zipf weights, reused for every full-size community
    let zipf_cdf = |size: usize| -> Vec<f64> {
        let mut acc = 0.0;
        let mut cdf = Vec::with_capacity(size);
        for rank in 0..size {
            acc += 1.0 / ((rank + 1) as f64).powf(zipf_exponent);
            cdf.push(acc);
        }
        cdf
    };
    let draw = |cdf: &[f64], rng: &mut ChaCha12Rng| -> usize {
        let total = *cdf.last().expect("nonempty community");
        let x = rng.random_range(0.0..total);
        cdf.partition_point(|&c| c <= x).min(cdf.len() - 1)
    };

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let base_cdf = zipf_cdf(community_size);
    let last_cdf = zipf_cdf(entities - (communities - 1) * community_size);
    let mut seen = HashSet::with_capacity(triples);
    while seen.len() < triples {
        let c = rng.random_range(0..communities);
        let base = c * community_size;
        // the last community absorbs the remainder entities
        let cdf = if c == communities - 1 {
            &last_cdf
        } else {
            &base_cdf
        };
        let s = (base + draw(cdf, &mut rng)) as u32;
        let o = (base + draw(cdf, &mut rng)) as u32;
        if s == o {
            continue;
        }
        let r = rng.random_range(0..relations) as u32;
        if seen.insert((s, r, o)) {
            builder
                .add_triple(crate::graph::Triple::new(s, r, o))
                .expect("ids in range");
        }
    }
    builder.build()
}

/// Community of an entity id under a [`CommunityGraphConfig`].
pub fn community_of(config: &CommunityGraphConfig, entity: u32) -> usize {
    let size = config.entities / config.communities;
    ((entity as usize) / size).min(config.communities - 1)
}

#[derive(Debug, Clone, Copy)]
pub struct EchoGraphConfig {
    pub entities: usize,
    /// Edges per base relation; echoes and the composition relation bring the
    /// total to roughly 4x this.
    pub base_edges: usize,
    /// Fraction of base pairs repeated by the echo relation.
    pub echo_coverage: f64,
    pub seed: u64,
}

impl Default for EchoGraphConfig {
    fn default() -> Self {
        Self {
            entities: 200,
            base_edges: 500,
            echo_coverage: 0.75,
            seed: 0,
        }
    }
}

/// Sparse expander with corroborating relations, five relations total.
///
/// Two base relations (`b0`, `b1`) are uniform random digraphs; two echo
/// relations repeat most of their base pairs (`e0` mirrors `b0`, `e1`
/// mirrors `b1`), and `c01` samples compositions `b0 then b1`. Every clean
/// triple is therefore corroborated by a short path (the mirrored edge, or
/// the two-step base walk) while the flat random wiring gives a translation
/// model no cluster shortcut, which is the regime where confidence weighting
/// pays off.
pub fn echo_graph(config: &EchoGraphConfig) -> KnowledgeGraph {
    let EchoGraphConfig {
        entities,
        base_edges,
        echo_coverage,
        seed,
    } = *config;
    assert!(entities >= 4);
    let mut builder = KnowledgeGraph::builder();
    for i in 0..entities {
        builder.add_entity(&format!("e{i:04}"));
    }
    let b0 = builder.add_relation("b0");
    let e0 = builder.add_relation("e0");
    let b1 = builder.add_relation("b1");
    let e1 = builder.add_relation("e1");
    let c01 = builder.add_relation("c01");

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let sample_base = |rng: &mut ChaCha12Rng| -> Vec<(u32, u32)> {
        let mut seen = HashSet::with_capacity(base_edges);
        while seen.len() < base_edges {
            let s = rng.random_range(0..entities) as u32;
            let o = rng.random_range(0..entities) as u32;
            if s != o {
                seen.insert((s, o));
            }
        }
        let mut pairs: Vec<(u32, u32)> = seen.into_iter().collect();
        pairs.sort_unstable();
        pairs
    };
    let base0 = sample_base(&mut rng);
    let base1 = sample_base(&mut rng);

    for &(s, o) in &base0 {
        builder
            .add_triple(crate::graph::Triple::new(s, b0, o))
            .expect("in range");
    }
    for &(s, o) in &base1 {
        builder
            .add_triple(crate::graph::Triple::new(s, b1, o))
            .expect("in range");
    }
    for &(s, o) in &base0 {
        if rng.random_bool(echo_coverage) {
            builder
                .add_triple(crate::graph::Triple::new(s, e0, o))
                .expect("in range");
        }
    }
    for &(s, o) in &base1 {
        if rng.random_bool(echo_coverage) {
            builder
                .add_triple(crate::graph::Triple::new(s, e1, o))
                .expect("in range");
        }
    }
    // composed pairs, sampled at echo coverage
    for &(s, mid) in &base0 {
        for &(m2, o) in &base1 {
            if mid == m2 && s != o && rng.random_bool(echo_coverage * 0.5) {
                builder
                    .add_triple(crate::graph::Triple::new(s, c01, o))
                    .expect("in range");
            }
        }
    }
    builder.build()
}

/// Composition-pattern graph: base relations `R` (x -> y) and `Q` (y -> z)
/// are random; target relation `T(x, z)` holds for a sample of pairs
/// connected by an `[R, Q]` walk. Returns the graph and `T`'s relation id.
///
/// `coverage` is the fraction of composable (x, z) pairs asserted as `T`.
pub fn composition_graph(
    nx: usize,
    ny: usize,
    nz: usize,
    edge_prob: f64,
    coverage: f64,
    seed: u64,
) -> (KnowledgeGraph, RelationId) {
    let mut builder = KnowledgeGraph::builder();
    let xs: Vec<u32> = (0..nx)
        .map(|i| builder.add_entity(&format!("x{i}")))
        .collect();
    let ys: Vec<u32> = (0..ny)
        .map(|i| builder.add_entity(&format!("y{i}")))
        .collect();
    let zs: Vec<u32> = (0..nz)
        .map(|i| builder.add_entity(&format!("z{i}")))
        .collect();
    let r = builder.add_relation("R");
    let q = builder.add_relation("Q");
    let t = builder.add_relation("T");

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut r_edges: Vec<(u32, u32)> = Vec::new();
    for &x in &xs {
        for &y in &ys {
            if rng.random_bool(edge_prob) {
                r_edges.push((x, y));
            }
        }
    }
    let mut q_edges: Vec<(u32, u32)> = Vec::new();
    for &y in &ys {
        for &z in &zs {
            if rng.random_bool(edge_prob) {
                q_edges.push((y, z));
            }
        }
    }
    for &(x, y) in &r_edges {
        builder
            .add_triple(crate::graph::Triple::new(x, r, y))
            .expect("ids in range");
    }
    for &(y, z) in &q_edges {
        builder
            .add_triple(crate::graph::Triple::new(y, q, z))
            .expect("ids in range");
    }
    let mut composed: Vec<(u32, u32)> = Vec::new();
    for &x in &xs {
        for &z in &zs {
            let connected = r_edges
                .iter()
                .filter(|&&(xe, _)| xe == x)
                .any(|&(_, y)| q_edges.iter().any(|&(ye, ze)| ye == y && ze == z));
            if connected {
                composed.push((x, z));
            }
        }
    }
    for &(x, z) in &composed {
        if rng.random_bool(coverage) {
            builder
                .add_triple(crate::graph::Triple::new(x, t, z))
                .expect("ids in range");
        }
    }
    (builder.build(), t)
}
