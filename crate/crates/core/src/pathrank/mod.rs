//! Path-ranking confidence scorer.
//!
//! Triples are judged by the relation-sequence paths connecting their
//! endpoints: a path is a sequence of relations, each traversed forward or
//! inverse, realized by at least one walk from subject to object. For every
//! sufficiently supported relation we select the paths that best distinguish
//! its true (subject, object) pairs from locally corrupted ones, train a
//! logistic classifier on path-count features, and emit a confidence in
//! [0, 1] for each triple — low values indicate probable noise.
//!
//! When a triple is scored, the edge formed by the triple itself is excluded
//! from every walk; otherwise each triple, noise included, would carry a
//! perfect length-1 path.

mod logistic;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::graph::{DirectedRelation, EntityId, KnowledgeGraph, RelationId, Triple};
use logistic::{sigmoid, train_logistic, Logistic};

/// Walk multiplicity is capped per feature per pair to bound hub blowup.
pub const MULTIPLICITY_CAP: u32 = 255;

#[derive(Debug, Error)]
pub enum PathRankError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("score {score} at index {index} outside [0, 1]")]
    ScoreRange { index: usize, score: f64 },
    #[error("confidence table has {found} scores, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("k-fold scoring needs k >= 2, got {0}")]
    BadFoldCount(usize),
}

/// A relation sequence of length 1..=max_len; signs carry traversal
/// direction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PathFeature(Vec<DirectedRelation>);

impl PathFeature {
    pub fn new(steps: Vec<DirectedRelation>) -> Self {
        debug_assert!(!steps.is_empty());
        Self(steps)
    }

    pub fn steps(&self) -> &[DirectedRelation] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The trivial path: the target relation itself as a single forward step.
    fn is_trivial_for(&self, relation: RelationId) -> bool {
        self.0.len() == 1 && self.0[0] == DirectedRelation::forward(relation)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PathRankParams {
    /// Maximum path length L.
    pub max_len: usize,
    /// Features kept per relation (m).
    pub features_per_relation: usize,
    /// Corrupted pairs sampled per positive pair for scorer training.
    pub negatives_per_positive: usize,
    /// Relations with fewer triples fall back to the prior.
    pub min_support: usize,
    /// Use feature presence instead of walk counts.
    pub binarize: bool,
    pub seed: u64,
}

impl Default for PathRankParams {
    fn default() -> Self {
        Self {
            max_len: 2,
            features_per_relation: 50,
            negatives_per_positive: 2,
            min_support: 5,
            binarize: false,
            seed: 0,
        }
    }
}

type Spo = (EntityId, RelationId, EntityId);

fn excluded(exclude: Option<Spo>, s: EntityId, r: RelationId, o: EntityId) -> bool {
    exclude == Some((s, r, o))
}

/// Every relation sequence of length <= max_len realized by a walk from `s`
/// to `o`, with multiplicity = number of realizing walks capped at
/// [`MULTIPLICITY_CAP`].
pub fn enumerate_paths(
    graph: &KnowledgeGraph,
    s: EntityId,
    o: EntityId,
    max_len: usize,
) -> BTreeMap<PathFeature, u32> {
    enumerate_paths_excluding(graph, s, o, max_len, None)
}

fn enumerate_paths_excluding(
    graph: &KnowledgeGraph,
    s: EntityId,
    o: EntityId,
    max_len: usize,
    exclude: Option<Spo>,
) -> BTreeMap<PathFeature, u32> {
    let mut out = BTreeMap::new();
    let mut frontier = HashMap::new();
    frontier.insert(s, 1u32);
    let mut prefix = Vec::new();
    walk(graph, &frontier, o, max_len, exclude, &mut prefix, &mut out);
    out
}

fn walk(
    graph: &KnowledgeGraph,
    frontier: &HashMap<EntityId, u32>,
    target: EntityId,
    remaining: usize,
    exclude: Option<Spo>,
    prefix: &mut Vec<DirectedRelation>,
    out: &mut BTreeMap<PathFeature, u32>,
) {
    if !prefix.is_empty() {
        if let Some(&count) = frontier.get(&target) {
            out.insert(
                PathFeature::new(prefix.clone()),
                count.min(MULTIPLICITY_CAP),
            );
        }
    }
    if remaining == 0 {
        return;
    }
    // Group successors by directed relation. Saturating accumulation keeps
    // counts order-independent.
    let mut next: BTreeMap<DirectedRelation, HashMap<EntityId, u32>> = BTreeMap::new();
    for (&u, &count) in frontier {
        for &(r, v) in graph.out_edges(u) {
            if excluded(exclude, u, r, v) {
                continue;
            }
            let slot = next
                .entry(DirectedRelation::forward(r))
                .or_default()
                .entry(v)
                .or_insert(0);
            *slot = (*slot + count).min(MULTIPLICITY_CAP);
        }
        for &(r, v) in graph.in_edges(u) {
            if excluded(exclude, v, r, u) {
                continue;
            }
            let slot = next
                .entry(DirectedRelation::inverse(r))
                .or_default()
                .entry(v)
                .or_insert(0);
            *slot = (*slot + count).min(MULTIPLICITY_CAP);
        }
    }
    for (step, frontier) in &next {
        prefix.push(*step);
        walk(graph, frontier, target, remaining - 1, exclude, prefix, out);
        prefix.pop();
    }
}

/// Number of walks from `s` to `o` realizing exactly this relation sequence,
/// capped at [`MULTIPLICITY_CAP`].
fn count_feature(
    graph: &KnowledgeGraph,
    s: EntityId,
    o: EntityId,
    feature: &PathFeature,
    exclude: Option<Spo>,
) -> u32 {
    let mut frontier = HashMap::new();
    frontier.insert(s, 1u32);
    for step in feature.steps() {
        let r = step.relation();
        let mut next: HashMap<EntityId, u32> = HashMap::new();
        for (&u, &count) in &frontier {
            let targets = if step.is_inverse() {
                graph.subjects(u, r)
            } else {
                graph.objects(u, r)
            };
            for &v in targets {
                let edge_ok = if step.is_inverse() {
                    !excluded(exclude, v, r, u)
                } else {
                    !excluded(exclude, u, r, v)
                };
                if edge_ok {
                    let slot = next.entry(v).or_insert(0);
                    *slot = (*slot + count).min(MULTIPLICITY_CAP);
                }
            }
        }
        if next.is_empty() {
            return 0;
        }
        frontier = next;
    }
    frontier.get(&o).copied().unwrap_or(0)
}

fn relation_rng(seed: u64, relation: RelationId, purpose: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream((relation as u64).wrapping_mul(0x100_0193) + purpose);
    rng
}

/// Samples a locally corrupted non-pair of `relation`: subject or object
/// replaced by another entity seen with the relation on that side.
fn sample_negative_pair(
    graph: &KnowledgeGraph,
    relation: RelationId,
    pair: (EntityId, EntityId),
    known: &HashSet<(EntityId, EntityId)>,
    rng: &mut impl Rng,
) -> Option<(EntityId, EntityId)> {
    for _ in 0..50 {
        let corrupt_subject = rng.random_bool(0.5);
        let pool = if corrupt_subject {
            graph.subjects_of_relation(relation)
        } else {
            graph.objects_of_relation(relation)
        };
        if pool.is_empty() {
            return None;
        }
        let e = pool[rng.random_range(0..pool.len())];
        let candidate = if corrupt_subject {
            (e, pair.1)
        } else {
            (pair.0, e)
        };
        if candidate != pair && !known.contains(&candidate) {
            return Some(candidate);
        }
    }
    None
}

fn negative_pairs(
    graph: &KnowledgeGraph,
    relation: RelationId,
    positives: &[(EntityId, EntityId)],
    per_positive: usize,
    rng: &mut impl Rng,
) -> Vec<(EntityId, EntityId)> {
    let known: HashSet<(EntityId, EntityId)> = graph.rel_pairs(relation).iter().copied().collect();
    let mut out = Vec::with_capacity(positives.len() * per_positive);
    for &pair in positives {
        for _ in 0..per_positive {
            if let Some(neg) = sample_negative_pair(graph, relation, pair, &known, rng) {
                out.push(neg);
            }
        }
    }
    out
}

fn rank_features(
    graph: &KnowledgeGraph,
    relation: RelationId,
    positives: &[(EntityId, EntityId)],
    negatives: &[(EntityId, EntityId)],
    params: &PathRankParams,
) -> Vec<PathFeature> {
    let mut pos_hits: BTreeMap<PathFeature, u32> = BTreeMap::new();
    for &(s, o) in positives {
        for (feature, _) in
            enumerate_paths_excluding(graph, s, o, params.max_len, Some((s, relation, o)))
        {
            if feature.is_trivial_for(relation) {
                continue;
            }
            *pos_hits.entry(feature).or_insert(0) += 1;
        }
    }
    if pos_hits.is_empty() {
        return Vec::new();
    }
    let mut neg_hits: BTreeMap<&PathFeature, u32> = BTreeMap::new();
    for &(s, o) in negatives {
        for feature in enumerate_paths_excluding(graph, s, o, params.max_len, None).keys() {
            if let Some((stored, _)) = pos_hits.get_key_value(feature) {
                *neg_hits.entry(stored).or_insert(0) += 1;
            }
        }
    }
    let n_pos = positives.len() as f64;
    let n_neg = negatives.len() as f64;
    // Occurrence-rate difference between positive and corrupted pairs; ties
    // broken by shorter path, then signed-relation order.
    let mut ranked: Vec<(&PathFeature, f64)> = pos_hits
        .iter()
        .map(|(feature, &hits)| {
            let pos_rate = hits as f64 / n_pos;
            let neg_rate = if n_neg > 0.0 {
                neg_hits.get(feature).copied().unwrap_or(0) as f64 / n_neg
            } else {
                0.0
            };
            (feature, pos_rate - neg_rate)
        })
        .collect();
    ranked.sort_by(|(fa, ra), (fb, rb)| {
        rb.partial_cmp(ra)
            .expect("rates are finite")
            .then_with(|| fa.len().cmp(&fb.len()))
            .then_with(|| fa.cmp(fb))
    });
    ranked
        .into_iter()
        .take(params.features_per_relation)
        .map(|(f, _)| f.clone())
        .collect()
}

/// Selects up to `m` path features for `relation`, ranked by how much more
/// often they connect true pairs than corrupted ones.
pub fn select_features(
    graph: &KnowledgeGraph,
    relation: RelationId,
    params: &PathRankParams,
) -> Vec<PathFeature> {
    let positives = graph.rel_pairs(relation);
    if positives.len() < params.min_support || params.features_per_relation == 0 {
        return Vec::new();
    }
    let mut rng = relation_rng(params.seed, relation, 0);
    let negatives = negative_pairs(
        graph,
        relation,
        positives,
        params.negatives_per_positive,
        &mut rng,
    );
    rank_features(graph, relation, positives, &negatives, params)
}

/// Per-relation binary classifier over path-count features.
#[derive(Debug, Clone)]
pub struct RelationScorer {
    relation: RelationId,
    features: Vec<PathFeature>,
    weights: Vec<f64>,
    bias: f64,
    binarize: bool,
    /// Training-set composition, for inspection.
    pub positives: usize,
    pub negatives: usize,
}

impl RelationScorer {
    pub fn relation(&self) -> RelationId {
        self.relation
    }

    pub fn features(&self) -> &[PathFeature] {
        &self.features
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    fn feature_vector(
        &self,
        graph: &KnowledgeGraph,
        s: EntityId,
        o: EntityId,
        exclude: Option<Spo>,
    ) -> Vec<f64> {
        self.features
            .iter()
            .map(|f| {
                let count = count_feature(graph, s, o, f, exclude);
                if self.binarize {
                    (count > 0) as u32 as f64
                } else {
                    count as f64
                }
            })
            .collect()
    }

    /// Classifier probability for an explicit feature-count vector.
    pub fn score_vector(&self, counts: &[f64]) -> f64 {
        let z = self.bias
            + counts
                .iter()
                .zip(&self.weights)
                .map(|(x, w)| x * w)
                .sum::<f64>();
        sigmoid(z)
    }

    fn score_pair(&self, graph: &KnowledgeGraph, s: EntityId, o: EntityId) -> f64 {
        let counts = self.feature_vector(graph, s, o, Some((s, self.relation, o)));
        self.score_vector(&counts)
    }
}

/// All trained relation scorers plus the prior returned for unscored
/// relations.
#[derive(Debug, Clone)]
pub struct ScorerSet {
    scorers: BTreeMap<RelationId, RelationScorer>,
    pub fallback_prior: f64,
}

impl ScorerSet {
    pub fn get(&self, relation: RelationId) -> Option<&RelationScorer> {
        self.scorers.get(&relation)
    }

    pub fn len(&self) -> usize {
        self.scorers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scorers.is_empty()
    }

    pub fn relations(&self) -> impl Iterator<Item = RelationId> + '_ {
        self.scorers.keys().copied()
    }
}

fn train_scorer_from_pairs(
    graph: &KnowledgeGraph,
    relation: RelationId,
    positives: &[(EntityId, EntityId)],
    params: &PathRankParams,
    rng: &mut impl Rng,
) -> Option<RelationScorer> {
    let features = {
        let negatives = negative_pairs(
            graph,
            relation,
            positives,
            params.negatives_per_positive,
            rng,
        );
        rank_features(graph, relation, positives, &negatives, params)
    };
    if features.is_empty() {
        return None;
    }
    let negatives = negative_pairs(
        graph,
        relation,
        positives,
        params.negatives_per_positive,
        rng,
    );
    let mut scorer = RelationScorer {
        relation,
        features,
        weights: Vec::new(),
        bias: 0.0,
        binarize: params.binarize,
        positives: positives.len(),
        negatives: negatives.len(),
    };
    let mut samples = Vec::with_capacity(positives.len() + negatives.len());
    let mut labels = Vec::with_capacity(samples.capacity());
    for &(s, o) in positives {
        samples.push(scorer.feature_vector(graph, s, o, Some((s, relation, o))));
        labels.push(true);
    }
    for &(s, o) in &negatives {
        samples.push(scorer.feature_vector(graph, s, o, None));
        labels.push(false);
    }
    let Logistic { weights, bias } = train_logistic(&samples, &labels);
    scorer.weights = weights;
    scorer.bias = bias;
    Some(scorer)
}

/// Trains one scorer per relation meeting `min_support`. Deterministic per
/// seed; relations are independent, so results do not depend on ordering.
pub fn train_scorers(graph: &KnowledgeGraph, params: &PathRankParams) -> ScorerSet {
    let mut scorers = BTreeMap::new();
    for relation in 0..graph.num_relations() as RelationId {
        let positives = graph.rel_pairs(relation);
        if positives.len() < params.min_support || params.features_per_relation == 0 {
            continue;
        }
        let mut rng = relation_rng(params.seed, relation, 1);
        if let Some(scorer) = train_scorer_from_pairs(graph, relation, positives, params, &mut rng)
        {
            scorers.insert(relation, scorer);
        }
    }
    ScorerSet {
        scorers,
        fallback_prior: 0.5,
    }
}

/// Confidence for one triple: classifier probability of its path features,
/// or the fallback prior when the relation has no scorer. The triple's own
/// edge never contributes evidence.
pub fn score_triple(scorers: &ScorerSet, graph: &KnowledgeGraph, triple: &Triple) -> f64 {
    match scorers.get(triple.relation) {
        Some(scorer) => scorer.score_pair(graph, triple.subject, triple.object),
        None => scorers.fallback_prior,
    }
}

/// Scores every graph triple, in triple-id order.
pub fn score_graph(scorers: &ScorerSet, graph: &KnowledgeGraph) -> ConfidenceTable {
    let scores = graph
        .triples()
        .iter()
        .map(|t| score_triple(scorers, graph, t))
        .collect();
    ConfidenceTable { scores }
}

/// Cross-validated alternative to in-sample scoring: each relation's triples
/// are split into `k` folds and every fold is scored by a scorer trained on
/// the other folds. Relations with fewer than `max(min_support, k)` triples
/// fall back to the prior.
pub fn score_graph_kfold(
    graph: &KnowledgeGraph,
    params: &PathRankParams,
    k: usize,
) -> Result<ConfidenceTable, PathRankError> {
    if k < 2 {
        return Err(PathRankError::BadFoldCount(k));
    }
    let fallback = 0.5;
    let mut scores = vec![fallback; graph.len()];
    let mut by_relation: BTreeMap<RelationId, Vec<usize>> = BTreeMap::new();
    for (id, t) in graph.triples().iter().enumerate() {
        by_relation.entry(t.relation).or_default().push(id);
    }
    for (relation, triple_ids) in by_relation {
        if triple_ids.len() < params.min_support.max(k) || params.features_per_relation == 0 {
            continue;
        }
        for fold in 0..k {
            let held_out: Vec<usize> = triple_ids.iter().copied().skip(fold).step_by(k).collect();
            let train_pairs: Vec<(EntityId, EntityId)> = triple_ids
                .iter()
                .enumerate()
                .filter(|(i, _)| i % k != fold)
                .map(|(_, &id)| {
                    let t = &graph.triples()[id];
                    (t.subject, t.object)
                })
                .collect();
            let mut rng = relation_rng(params.seed, relation, 2 + fold as u64);
            if let Some(scorer) =
                train_scorer_from_pairs(graph, relation, &train_pairs, params, &mut rng)
            {
                for id in held_out {
                    let t = &graph.triples()[id];
                    scores[id] = scorer.score_pair(graph, t.subject, t.object);
                }
            }
        }
    }
    ConfidenceTable::from_scores(scores)
}

/// One confidence score per graph triple, all in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceTable {
    scores: Vec<f64>,
}

impl ConfidenceTable {
    pub fn from_scores(scores: Vec<f64>) -> Result<Self, PathRankError> {
        for (index, &score) in scores.iter().enumerate() {
            if !(score.is_finite() && (0.0..=1.0).contains(&score)) {
                return Err(PathRankError::ScoreRange { index, score });
            }
        }
        Ok(Self { scores })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn get(&self, triple_id: usize) -> Option<f64> {
        self.scores.get(triple_id).copied()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn check_len(&self, expected: usize) -> Result<(), PathRankError> {
        if self.scores.len() != expected {
            return Err(PathRankError::LengthMismatch {
                expected,
                found: self.scores.len(),
            });
        }
        Ok(())
    }

    /// Writes `triple-index<TAB>score` lines, scores at 6 decimals.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PathRankError> {
        let path = path.as_ref();
        let io_err = |source| PathRankError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
        for (idx, score) in self.scores.iter().enumerate() {
            writeln!(w, "{idx}\t{score:.6}").map_err(io_err)?;
        }
        w.flush().map_err(io_err)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PathRankError> {
        let path = path.as_ref();
        let io_err = |source| PathRankError::Io {
            path: path.to_path_buf(),
            source,
        };
        let reader = BufReader::new(File::open(path).map_err(io_err)?);
        let mut scores = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(io_err)?;
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| PathRankError::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message,
            };
            let (idx, score) = line
                .split_once('\t')
                .ok_or_else(|| parse_err("expected index<TAB>score".into()))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_err(format!("bad index {idx:?}")))?;
            if idx != scores.len() {
                return Err(parse_err(format!(
                    "indexes must be dense, expected {} found {idx}",
                    scores.len()
                )));
            }
            let score: f64 = score
                .parse()
                .map_err(|_| parse_err(format!("bad score {score:?}")))?;
            scores.push(score);
        }
        Self::from_scores(scores)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Direction;

    fn labeled(graph_edges: &[(&str, &str, &str)]) -> KnowledgeGraph {
        let mut b = KnowledgeGraph::builder();
        for &(s, r, o) in graph_edges {
            b.add_triple_labels(s, r, o, false);
        }
        b.build()
    }

    #[test]
    fn direct_edge_is_a_length_one_path() {
        let g = labeled(&[("a", "R", "b")]);
        let a = g.entities().id("a").unwrap();
        let b = g.entities().id("b").unwrap();
        let r = g.relations().id("R").unwrap();
        let paths = enumerate_paths(&g, a, b, 1);
        assert_eq!(paths.len(), 1);
        assert_eq!(
            paths.get(&PathFeature::new(vec![DirectedRelation::forward(r)])),
            Some(&1)
        );
    }

    #[test]
    fn composition_path_found() {
        let g = labeled(&[("a", "R", "b"), ("b", "Q", "c")]);
        let a = g.entities().id("a").unwrap();
        let c = g.entities().id("c").unwrap();
        let r = g.relations().id("R").unwrap();
        let q = g.relations().id("Q").unwrap();
        let paths = enumerate_paths(&g, a, c, 2);
        assert_eq!(
            paths.get(&PathFeature::new(vec![
                DirectedRelation::forward(r),
                DirectedRelation::forward(q)
            ])),
            Some(&1)
        );
        // length-1 sequences cannot reach c
        assert!(paths.keys().all(|f| f.len() == 2));
    }

    #[test]
    fn inverse_steps_are_distinct_features() {
        // a R b, c R b: a -> b -> c realizes [R, R^-1]
        let g = labeled(&[("a", "R", "b"), ("c", "R", "b")]);
        let a = g.entities().id("a").unwrap();
        let c = g.entities().id("c").unwrap();
        let r = g.relations().id("R").unwrap();
        let paths = enumerate_paths(&g, a, c, 2);
        let feature = PathFeature::new(vec![
            DirectedRelation::forward(r),
            DirectedRelation::inverse(r),
        ]);
        assert_eq!(paths.get(&feature), Some(&1));
    }

    #[test]
    fn multiplicity_counts_parallel_walks() {
        // two intermediate nodes realize [R, Q] twice
        let g = labeled(&[
            ("a", "R", "m1"),
            ("a", "R", "m2"),
            ("m1", "Q", "z"),
            ("m2", "Q", "z"),
        ]);
        let a = g.entities().id("a").unwrap();
        let z = g.entities().id("z").unwrap();
        let r = g.relations().id("R").unwrap();
        let q = g.relations().id("Q").unwrap();
        let paths = enumerate_paths(&g, a, z, 2);
        let feature = PathFeature::new(vec![
            DirectedRelation::forward(r),
            DirectedRelation::forward(q),
        ]);
        assert_eq!(paths.get(&feature), Some(&2));
        assert_eq!(count_feature(&g, a, z, &feature, None), 2);
    }

    #[test]
    fn count_feature_respects_exclusion() {
        let g = labeled(&[("a", "R", "b")]);
        let a = g.entities().id("a").unwrap();
        let b = g.entities().id("b").unwrap();
        let r = g.relations().id("R").unwrap();
        let direct = PathFeature::new(vec![DirectedRelation::forward(r)]);
        assert_eq!(count_feature(&g, a, b, &direct, None), 1);
        assert_eq!(count_feature(&g, a, b, &direct, Some((a, r, b))), 0);
    }

    #[test]
    fn m_zero_yields_no_features() {
        let g = labeled(&[
            ("a", "R", "b"),
            ("c", "R", "d"),
            ("e", "R", "f"),
            ("g", "R", "h"),
            ("i", "R", "j"),
        ]);
        let params = PathRankParams {
            features_per_relation: 0,
            ..Default::default()
        };
        assert!(select_features(&g, 0, &params).is_empty());
    }

    #[test]
    fn low_support_relation_gets_no_features_and_prior_score() {
        let g = labeled(&[("a", "R", "b"), ("c", "R", "d")]);
        let params = PathRankParams::default();
        assert!(select_features(&g, 0, &params).is_empty());
        let scorers = train_scorers(&g, &params);
        assert!(scorers.is_empty());
        let t = g.triple(0).unwrap();
        assert_eq!(score_triple(&scorers, &g, t), 0.5);
    }

    #[test]
    fn training_set_size_follows_negative_ratio() {
        // 100 positives of R, each echoed by Q so R has a usable feature
        let mut b = KnowledgeGraph::builder();
        for i in 0..100 {
            let s = format!("a{i}");
            let o = format!("b{i}");
            b.add_triple_labels(&s, "R", &o, false);
            b.add_triple_labels(&s, "Q", &o, false);
        }
        let g = b.build();
        let r = g.relations().id("R").unwrap();
        let params = PathRankParams {
            negatives_per_positive: 1,
            ..Default::default()
        };
        let scorers = train_scorers(&g, &params);
        let scorer = scorers.get(r).expect("R is scored");
        assert_eq!(scorer.positives, 100);
        assert_eq!(scorer.negatives, 100);
    }

    #[test]
    fn neighbors_direction_signs_round_trip() {
        let g = labeled(&[("a", "R", "b")]);
        let a = g.entities().id("a").unwrap();
        let b = g.entities().id("b").unwrap();
        let fwd = g.neighbors(a, Direction::Forward).unwrap();
        let inv = g.neighbors(b, Direction::Inverse).unwrap();
        assert!(!fwd[0].0.is_inverse());
        assert!(inv[0].0.is_inverse());
        assert_eq!(fwd[0].0.relation(), inv[0].0.relation());
    }

    #[test]
    fn score_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("scores.tsv");
        let table = ConfidenceTable::from_scores(vec![0.0, 0.123456, 1.0, 0.5]).unwrap();
        table.save(&p).unwrap();
        let loaded = ConfidenceTable::load(&p).unwrap();
        assert_eq!(loaded, table);
        loaded.save(dir.path().join("scores2.tsv")).unwrap();
        assert_eq!(
            std::fs::read(&p).unwrap(),
            std::fs::read(dir.path().join("scores2.tsv")).unwrap()
        );
    }

    #[test]
    fn score_range_is_validated() {
        assert!(ConfidenceTable::from_scores(vec![0.5, 1.2]).is_err());
        assert!(ConfidenceTable::from_scores(vec![f64::NAN]).is_err());
    }
}
