//! Controlled error imputation.
//!
//! Produces a noisy copy of a graph: all original triples plus
//! `round(ratio * |G|)` corrupted ones flagged `is_noise = true`. A corruption
//! replaces either the subject or the object (fair coin) of a source triple
//! with another entity. Under [`Protocol::Random`] the replacement is any
//! entity; under [`Protocol::SameRelation`] it must already appear with the
//! triple's relation on the corrupted side, which yields harder, more
//! confusable errors. Noisy triples never collide with original triples or
//! with each other.

use std::collections::HashSet;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::graph::{EntityId, KnowledgeGraph, Triple};

/// Attempts per source triple before it is checked exhaustively.
const RETRY_BUDGET: usize = 100;

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("graph has no triples")]
    EmptyGraph,
    #[error("noise ratio {0} outside (0, 1]")]
    BadRatio(f64),
    #[error("no legal corruption exists for any remaining triple (e.g. relation {relation:?})")]
    Unsatisfiable { relation: String },
    #[error("triple not present in graph")]
    TripleNotInGraph,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    /// Replacement entity drawn uniformly from all entities.
    Random,
    /// Replacement entity must occur with the same relation on the corrupted
    /// side somewhere in the original graph.
    SameRelation,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Random => "random",
            Protocol::SameRelation => "same-relation",
        }
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(Protocol::Random),
            "same-relation" | "same_relation" => Ok(Protocol::SameRelation),
            other => Err(format!("unknown noise protocol {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NoiseConfig {
    /// Fraction of the original triple count added as noise, in (0, 1].
    pub ratio: f64,
    pub protocol: Protocol,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn new(ratio: f64, protocol: Protocol, seed: u64) -> Self {
        Self {
            ratio,
            protocol,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return Err(NoiseError::BadRatio(self.ratio));
        }
        Ok(())
    }
}

/// Number of noisy triples for a given ratio: round half-up.
pub fn expected_noise_count(ratio: f64, triples: usize) -> usize {
    (ratio * triples as f64).round() as usize
}

#[derive(Clone, Copy)]
enum Side {
    Subject,
    Object,
}

/// Candidate replacement pool for one (triple, side) under a protocol.
fn candidate_pool<'g>(
    graph: &'g KnowledgeGraph,
    triple: &Triple,
    side: Side,
    protocol: Protocol,
) -> CandidatePool<'g> {
    match protocol {
        Protocol::Random => CandidatePool::All(graph.num_entities() as EntityId),
        Protocol::SameRelation => match side {
            Side::Subject => CandidatePool::List(graph.subjects_of_relation(triple.relation)),
            Side::Object => CandidatePool::List(graph.objects_of_relation(triple.relation)),
        },
    }
}

enum CandidatePool<'g> {
    /// Ids 0..n.
    All(EntityId),
    List(&'g [EntityId]),
}

impl CandidatePool<'_> {
    fn len(&self) -> usize {
        match self {
            CandidatePool::All(n) => *n as usize,
            CandidatePool::List(l) => l.len(),
        }
    }

    fn get(&self, idx: usize) -> EntityId {
        match self {
            CandidatePool::All(_) => idx as EntityId,
            CandidatePool::List(l) => l[idx],
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> Option<EntityId> {
        if self.len() == 0 {
            return None;
        }
        Some(self.get(rng.random_range(0..self.len())))
    }
}

fn apply(triple: &Triple, side: Side, entity: EntityId) -> Triple {
    let mut t = Triple::noisy(triple.subject, triple.relation, triple.object);
    match side {
        Side::Subject => t.subject = entity,
        Side::Object => t.object = entity,
    }
    t
}

fn is_legal(
    graph: &KnowledgeGraph,
    original: &Triple,
    candidate: &Triple,
    side: Side,
    pending: Option<&HashSet<(EntityId, u32, EntityId)>>,
) -> bool {
    let replaced = match side {
        Side::Subject => candidate.subject != original.subject,
        Side::Object => candidate.object != original.object,
    };
    replaced
        && !graph.contains_triple(candidate)
        && pending.is_none_or(|p| !p.contains(&candidate.spo()))
}

/// One corruption attempt on a fixed side, by uniform sampling from the pool.
fn try_side(
    graph: &KnowledgeGraph,
    triple: &Triple,
    side: Side,
    protocol: Protocol,
    rng: &mut impl Rng,
    pending: Option<&HashSet<(EntityId, u32, EntityId)>>,
) -> Option<Triple> {
    let pool = candidate_pool(graph, triple, side, protocol);
    let entity = pool.sample(rng)?;
    let candidate = apply(triple, side, entity);
    is_legal(graph, triple, &candidate, side, pending).then_some(candidate)
}

/// All legal corruptions of `triple` on both sides, in deterministic order.
fn enumerate_legal(
    graph: &KnowledgeGraph,
    triple: &Triple,
    protocol: Protocol,
    pending: Option<&HashSet<(EntityId, u32, EntityId)>>,
) -> Vec<Triple> {
    let mut out = Vec::new();
    for side in [Side::Subject, Side::Object] {
        let pool = candidate_pool(graph, triple, side, protocol);
        for idx in 0..pool.len() {
            let candidate = apply(triple, side, pool.get(idx));
            if is_legal(graph, triple, &candidate, side, pending) {
                out.push(candidate);
            }
        }
    }
    out
}

/// Corrupts subject or object (fair coin) of `triple`, returning a triple
/// absent from the graph. Returns `None` when the chosen side admits no legal
/// corruption, signalling the caller to resample.
pub fn corrupt_triple(
    graph: &KnowledgeGraph,
    triple: &Triple,
    protocol: Protocol,
    rng: &mut impl Rng,
) -> Option<Triple> {
    let side = if rng.random_bool(0.5) {
        Side::Subject
    } else {
        Side::Object
    };
    // A few cheap sampling attempts, then decide the side exhaustively.
    for _ in 0..RETRY_BUDGET {
        if let Some(t) = try_side(graph, triple, side, protocol, rng, None) {
            return Some(t);
        }
    }
    let pool = candidate_pool(graph, triple, side, protocol);
    let legal: Vec<Triple> = (0..pool.len())
        .map(|i| apply(triple, side, pool.get(i)))
        .filter(|c| is_legal(graph, triple, c, side, None))
        .collect();
    if legal.is_empty() {
        None
    } else {
        Some(legal[rng.random_range(0..legal.len())])
    }
}

/// Builds a noisy copy of `graph`: all original triples plus exactly
/// `round(ratio * |G|)` distinct noisy ones.
///
/// Source triples are sampled uniformly with replacement. Each sampled source
/// gets [`RETRY_BUDGET`] random corruption attempts; if all collide, its legal
/// corruptions are enumerated outright — an empty enumeration marks the
/// source dead and a new one is drawn. When every triple is dead the request
/// is unsatisfiable.
pub fn impute_noise(
    graph: &KnowledgeGraph,
    config: &NoiseConfig,
) -> Result<KnowledgeGraph, NoiseError> {
    config.validate()?;
    if graph.is_empty() {
        return Err(NoiseError::EmptyGraph);
    }
    let target = expected_noise_count(config.ratio, graph.len());
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut pending: HashSet<(EntityId, u32, EntityId)> = HashSet::with_capacity(target);
    let mut noisy: Vec<Triple> = Vec::with_capacity(target);
    let mut dead: HashSet<usize> = HashSet::new();

    'outer: while noisy.len() < target {
        if dead.len() == graph.len() {
            let first_dead = graph.triple(0).expect("nonempty");
            let relation = graph
                .relations()
                .label(first_dead.relation)
                .unwrap_or("?")
                .to_owned();
            return Err(NoiseError::Unsatisfiable { relation });
        }
        let src_idx = rng.random_range(0..graph.len());
        if dead.contains(&src_idx) {
            continue;
        }
        let source = graph.triple(src_idx).expect("index in range");

        for _ in 0..RETRY_BUDGET {
            let side = if rng.random_bool(0.5) {
                Side::Subject
            } else {
                Side::Object
            };
            if let Some(t) = try_side(
                graph,
                source,
                side,
                config.protocol,
                &mut rng,
                Some(&pending),
            ) {
                pending.insert(t.spo());
                noisy.push(t);
                continue 'outer;
            }
        }
        // Random attempts exhausted: settle this source exactly.
        let legal = enumerate_legal(graph, source, config.protocol, Some(&pending));
        if legal.is_empty() {
            dead.insert(src_idx);
        } else {
            let t = legal[rng.random_range(0..legal.len())];
            pending.insert(t.spo());
            noisy.push(t);
        }
    }

    let mut builder = KnowledgeGraph::builder();
    for label in graph.entities().labels() {
        builder.add_entity(label);
    }
    for label in graph.relations().labels() {
        builder.add_relation(label);
    }
    for t in graph.triples() {
        builder.add_triple(*t).expect("ids copied from same graph");
    }
    for t in &noisy {
        builder.add_triple(*t).expect("ids valid by construction");
    }
    Ok(builder.build())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::KnowledgeGraph;

    fn chain_graph(n: usize) -> KnowledgeGraph {
        let mut b = KnowledgeGraph::builder();
        for i in 0..n {
            b.add_triple_labels(&format!("e{i}"), "R", &format!("e{}", i + 1), false);
        }
        b.build()
    }

    #[test]
    fn count_is_round_half_up() {
        assert_eq!(expected_noise_count(0.10, 1000), 100);
        assert_eq!(expected_noise_count(0.5, 5), 3); // 2.5 rounds up
        assert_eq!(expected_noise_count(0.4, 3), 1); // 1.2 rounds down
    }

    #[test]
    fn impute_adds_exactly_the_requested_noise() {
        let g = chain_graph(1000);
        let cfg = NoiseConfig::new(0.10, Protocol::Random, 7);
        let noisy = impute_noise(&g, &cfg).unwrap();
        assert_eq!(noisy.len(), 1100);
        assert_eq!(noisy.num_noisy(), 100);
        // originals keep their flag and order
        for (i, t) in g.triples().iter().enumerate() {
            assert_eq!(noisy.triple(i).unwrap().spo(), t.spo());
            assert!(!noisy.triple(i).unwrap().is_noise);
        }
    }

    #[test]
    fn noisy_triples_never_collide() {
        let g = chain_graph(200);
        let cfg = NoiseConfig::new(0.4, Protocol::Random, 3);
        let noisy = impute_noise(&g, &cfg).unwrap();
        let mut seen = HashSet::new();
        for t in noisy.triples() {
            assert!(seen.insert(t.spo()), "duplicate triple {t:?}");
            if t.is_noise {
                assert!(!g.contains_triple(t));
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let g = chain_graph(120);
        let cfg = NoiseConfig::new(0.25, Protocol::SameRelation, 99);
        let a = impute_noise(&g, &cfg).unwrap();
        let b = impute_noise(&g, &cfg).unwrap();
        let spo = |g: &KnowledgeGraph| -> Vec<_> { g.triples().iter().map(Triple::spo).collect() };
        assert_eq!(spo(&a), spo(&b));
        let other = impute_noise(&g, &NoiseConfig::new(0.25, Protocol::SameRelation, 100)).unwrap();
        assert_ne!(spo(&a), spo(&other));
    }

    #[test]
    fn same_relation_constraint_holds_for_all_noise() {
        // two relations with disjoint entity ranges, so violations would show
        let mut b = KnowledgeGraph::builder();
        for i in 0..30 {
            b.add_triple_labels(&format!("a{i}"), "R", &format!("b{i}"), false);
            b.add_triple_labels(&format!("c{i}"), "Q", &format!("d{i}"), false);
        }
        let g = b.build();
        let cfg = NoiseConfig::new(0.5, Protocol::SameRelation, 11);
        let noisy = impute_noise(&g, &cfg).unwrap();
        for t in noisy.triples().iter().filter(|t| t.is_noise) {
            let subj_ok = g.subjects_of_relation(t.relation).contains(&t.subject);
            let obj_ok = g.objects_of_relation(t.relation).contains(&t.object);
            assert!(
                subj_ok && obj_ok,
                "corrupted entity not seen with relation: {t:?}"
            );
        }
    }

    #[test]
    fn corrupt_differs_in_exactly_one_position() {
        let g = chain_graph(50);
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for idx in 0..g.len() {
            let t = g.triple(idx).unwrap();
            let c = corrupt_triple(&g, t, Protocol::Random, &mut rng).unwrap();
            let subj_changed = c.subject != t.subject;
            let obj_changed = c.object != t.object;
            assert!(subj_changed ^ obj_changed);
            assert_eq!(c.relation, t.relation);
            assert!(!g.contains_triple(&c));
        }
    }

    #[test]
    fn two_entity_graph_matches_enumeration() {
        let mut b = KnowledgeGraph::builder();
        b.add_triple_labels("a", "R", "b", false);
        let g = b.build();
        let t = *g.triple(0).unwrap();
        // legal corruptions: subject -> (b,R,b), object -> (a,R,a)
        let legal: HashSet<_> = enumerate_legal(&g, &t, Protocol::Random, None)
            .into_iter()
            .map(|t| t.spo())
            .collect();
        let a = g.entities().id("a").unwrap();
        let bb = g.entities().id("b").unwrap();
        let r = 0;
        assert_eq!(
            legal,
            HashSet::from([(bb, r, bb), (a, r, a)]),
            "exhaustive 2-entity corruption set"
        );
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let mut seen = HashSet::new();
        for _ in 0..100 {
            let c = corrupt_triple(&g, &t, Protocol::Random, &mut rng).unwrap();
            assert!(legal.contains(&c.spo()));
            seen.insert(c.spo());
        }
        assert_eq!(seen, legal, "both corruptions reachable");
    }

    #[test]
    fn object_corruption_candidates_verified_exhaustively() {
        let mut b = KnowledgeGraph::builder();
        b.add_triple_labels("a", "R", "b", false);
        b.add_triple_labels("c", "R", "d", false);
        let g = b.build();
        let t = *g.triple(0).unwrap(); // (a, R, b)
        let a = g.entities().id("a").unwrap();
        let c = g.entities().id("c").unwrap();
        let d = g.entities().id("d").unwrap();
        let legal_objects: HashSet<_> = enumerate_legal(&g, &t, Protocol::Random, None)
            .into_iter()
            .filter(|x| x.subject == t.subject)
            .map(|x| x.object)
            .collect();
        assert_eq!(legal_objects, HashSet::from([a, c, d]));
    }

    #[test]
    fn side_choice_is_a_fair_coin() {
        let g = chain_graph(400);
        let mut rng = ChaCha12Rng::seed_from_u64(2024);
        let mut subject_side = 0usize;
        let total = 10_000;
        for i in 0..total {
            let t = g.triple(i % g.len()).unwrap();
            let c = corrupt_triple(&g, t, Protocol::Random, &mut rng).unwrap();
            if c.subject != t.subject {
                subject_side += 1;
            }
        }
        let frac = subject_side as f64 / total as f64;
        assert!((0.47..=0.53).contains(&frac), "subject fraction {frac}");
    }

    #[test]
    fn unsatisfiable_same_relation_names_the_relation() {
        let mut b = KnowledgeGraph::builder();
        b.add_triple_labels("a", "R", "b", false);
        let g = b.build();
        let cfg = NoiseConfig::new(1.0, Protocol::SameRelation, 0);
        match impute_noise(&g, &cfg) {
            Err(NoiseError::Unsatisfiable { relation }) => assert_eq!(relation, "R"),
            other => panic!("expected unsatisfiable, got {other:?}"),
        }
    }

    #[test]
    fn bad_ratio_rejected() {
        let g = chain_graph(3);
        for ratio in [0.0, -0.1, 1.5, f64::NAN] {
            let cfg = NoiseConfig::new(ratio, Protocol::Random, 0);
            assert!(matches!(
                impute_noise(&g, &cfg),
                Err(NoiseError::BadRatio(_))
            ));
        }
    }
}
