//! Triple-store representation: interned labels, adjacency indexes, splits
//! and the plain-text file formats shared by every other module.

mod dictionary;
mod io;

pub use dictionary::Dictionary;
pub use io::{
    load_graph, load_graph_with_labels, load_noise_labels, load_split_assignment, load_split_files,
    save_graph, save_noise_labels, save_split_assignment, LoadReport,
};

use std::collections::{HashMap, HashSet};
use std::path::PathBuf;

use thiserror::Error;

pub type EntityId = u32;
pub type RelationId = u32;

#[derive(Debug, Error)]
pub enum KgError {
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
    #[error("empty triple file: {0}")]
    EmptyFile(PathBuf),
    #[error("entity id {id} out of bounds ({len} entities)")]
    EntityOutOfBounds { id: EntityId, len: usize },
    #[error("relation id {id} out of bounds ({len} relations)")]
    RelationOutOfBounds { id: RelationId, len: usize },
    #[error("invalid label {label:?}: {reason}")]
    InvalidLabel { label: String, reason: String },
    #[error("noise label file {path} has {found} lines, graph has {expected} triples")]
    LabelCount {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("split lists overlap or reference invalid triple ids: {0}")]
    InvalidSplit(String),
}

/// One (subject, relation, object) fact.
///
/// `is_noise` marks imputed triples; it is hidden from training and only used
/// by evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Triple {
    pub subject: EntityId,
    pub relation: RelationId,
    pub object: EntityId,
    pub is_noise: bool,
}

impl Triple {
    pub fn new(subject: EntityId, relation: RelationId, object: EntityId) -> Self {
        Self {
            subject,
            relation,
            object,
            is_noise: false,
        }
    }

    pub fn noisy(subject: EntityId, relation: RelationId, object: EntityId) -> Self {
        Self {
            subject,
            relation,
            object,
            is_noise: true,
        }
    }

    /// Identity of the fact, ignoring the noise flag.
    pub fn spo(&self) -> (EntityId, RelationId, EntityId) {
        (self.subject, self.relation, self.object)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// A relation traversed in a given direction.
///
/// Encoded as a nonzero signed id, `+(r+1)` forward and `-(r+1)` inverse, so
/// path features order deterministically and hash cheaply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DirectedRelation(i32);

impl DirectedRelation {
    pub fn forward(relation: RelationId) -> Self {
        Self(relation as i32 + 1)
    }

    pub fn inverse(relation: RelationId) -> Self {
        Self(-(relation as i32 + 1))
    }

    pub fn relation(self) -> RelationId {
        (self.0.abs() - 1) as RelationId
    }

    pub fn direction(self) -> Direction {
        if self.0 > 0 {
            Direction::Forward
        } else {
            Direction::Inverse
        }
    }

    pub fn is_inverse(self) -> bool {
        self.0 < 0
    }
}

/// Train/validation/test partition, stored as triple indexes into one graph.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Everything in train, nothing held out.
    pub fn all_train(len: usize) -> Self {
        Self {
            train: (0..len).collect(),
            validation: Vec::new(),
            test: Vec::new(),
        }
    }

    /// Checks that the three lists are disjoint and reference valid ids.
    pub fn validate(&self, graph: &KnowledgeGraph) -> Result<(), KgError> {
        let mut seen = HashSet::with_capacity(self.train.len() + self.validation.len());
        for (name, ids) in [
            ("train", &self.train),
            ("validation", &self.validation),
            ("test", &self.test),
        ] {
            for &id in ids {
                if id >= graph.len() {
                    return Err(KgError::InvalidSplit(format!(
                        "{name} references triple {id}, graph has {}",
                        graph.len()
                    )));
                }
                if !seen.insert(id) {
                    return Err(KgError::InvalidSplit(format!(
                        "triple {id} appears in more than one part"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Immutable interned triple set with the adjacency indexes used for path
/// enumeration, negative sampling and membership tests.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    triples: Vec<Triple>,
    entities: Dictionary,
    relations: Dictionary,
    // (subject, relation) -> sorted objects; (object, relation) -> sorted subjects
    out_index: HashMap<(EntityId, RelationId), Vec<EntityId>>,
    in_index: HashMap<(EntityId, RelationId), Vec<EntityId>>,
    // per-entity adjacency, sorted by (relation, neighbor)
    out_edges: Vec<Vec<(RelationId, EntityId)>>,
    in_edges: Vec<Vec<(RelationId, EntityId)>>,
    // per-relation (subject, object) pairs, sorted
    rel_pairs: Vec<Vec<(EntityId, EntityId)>>,
    // per-relation distinct subjects / objects, sorted
    rel_subjects: Vec<Vec<EntityId>>,
    rel_objects: Vec<Vec<EntityId>>,
    membership: HashSet<(EntityId, RelationId, EntityId)>,
}

impl KnowledgeGraph {
    pub fn builder() -> GraphBuilder {
        GraphBuilder::new()
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn triple(&self, id: usize) -> Option<&Triple> {
        self.triples.get(id)
    }

    pub fn entities(&self) -> &Dictionary {
        &self.entities
    }

    pub fn relations(&self) -> &Dictionary {
        &self.relations
    }

    pub fn contains(&self, subject: EntityId, relation: RelationId, object: EntityId) -> bool {
        self.membership.contains(&(subject, relation, object))
    }

    pub fn contains_triple(&self, triple: &Triple) -> bool {
        self.contains(triple.subject, triple.relation, triple.object)
    }

    /// All edges leaving (or entering) `entity`, tagged with the traversal
    /// direction.
    ///
    /// Forward returns `(r, o)` for every `(entity, r, o)` in the graph;
    /// inverse returns `(r⁻¹, s)` for every `(s, r, entity)`.
    pub fn neighbors(
        &self,
        entity: EntityId,
        direction: Direction,
    ) -> Result<Vec<(DirectedRelation, EntityId)>, KgError> {
        if entity as usize >= self.entities.len() {
            return Err(KgError::EntityOutOfBounds {
                id: entity,
                len: self.entities.len(),
            });
        }
        let edges = match direction {
            Direction::Forward => &self.out_edges[entity as usize],
            Direction::Inverse => &self.in_edges[entity as usize],
        };
        Ok(edges
            .iter()
            .map(|&(r, e)| {
                let signed = match direction {
                    Direction::Forward => DirectedRelation::forward(r),
                    Direction::Inverse => DirectedRelation::inverse(r),
                };
                (signed, e)
            })
            .collect())
    }

    /// Unsorted-on-demand raw adjacency; callers on hot paths use these
    /// instead of [`Self::neighbors`].
    pub fn out_edges(&self, entity: EntityId) -> &[(RelationId, EntityId)] {
        &self.out_edges[entity as usize]
    }

    pub fn in_edges(&self, entity: EntityId) -> &[(RelationId, EntityId)] {
        &self.in_edges[entity as usize]
    }

    /// Objects `o` with `(subject, relation, o)` in the graph, sorted.
    pub fn objects(&self, subject: EntityId, relation: RelationId) -> &[EntityId] {
        self.out_index
            .get(&(subject, relation))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Subjects `s` with `(s, relation, object)` in the graph, sorted.
    pub fn subjects(&self, object: EntityId, relation: RelationId) -> &[EntityId] {
        self.in_index
            .get(&(object, relation))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// All (subject, object) pairs of `relation`, sorted.
    pub fn rel_pairs(&self, relation: RelationId) -> &[(EntityId, EntityId)] {
        &self.rel_pairs[relation as usize]
    }

    /// Distinct entities appearing as subject of `relation`, sorted.
    pub fn subjects_of_relation(&self, relation: RelationId) -> &[EntityId] {
        &self.rel_subjects[relation as usize]
    }

    /// Distinct entities appearing as object of `relation`, sorted.
    pub fn objects_of_relation(&self, relation: RelationId) -> &[EntityId] {
        &self.rel_objects[relation as usize]
    }

    pub fn relation_support(&self, relation: RelationId) -> usize {
        self.rel_pairs[relation as usize].len()
    }

    pub fn noise_labels(&self) -> Vec<bool> {
        self.triples.iter().map(|t| t.is_noise).collect()
    }

    pub fn num_noisy(&self) -> usize {
        self.triples.iter().filter(|t| t.is_noise).count()
    }
}

/// Accumulates triples and builds the indexed graph. Duplicate (s, r, o)
/// lines are dropped and counted.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    entities: Dictionary,
    relations: Dictionary,
    triples: Vec<Triple>,
    seen: HashSet<(EntityId, RelationId, EntityId)>,
    duplicates: usize,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_entity(&mut self, label: &str) -> EntityId {
        self.entities.intern(label)
    }

    pub fn add_relation(&mut self, label: &str) -> RelationId {
        self.relations.intern(label)
    }

    /// Interns the labels and stores the triple. Returns false if it was a
    /// duplicate.
    pub fn add_triple_labels(
        &mut self,
        subject: &str,
        relation: &str,
        object: &str,
        is_noise: bool,
    ) -> bool {
        let s = self.entities.intern(subject);
        let r = self.relations.intern(relation);
        let o = self.entities.intern(object);
        self.push(Triple {
            subject: s,
            relation: r,
            object: o,
            is_noise,
        })
    }

    /// Stores a triple over already-interned ids.
    pub fn add_triple(&mut self, triple: Triple) -> Result<bool, KgError> {
        if triple.subject as usize >= self.entities.len() {
            return Err(KgError::EntityOutOfBounds {
                id: triple.subject,
                len: self.entities.len(),
            });
        }
        if triple.object as usize >= self.entities.len() {
            return Err(KgError::EntityOutOfBounds {
                id: triple.object,
                len: self.entities.len(),
            });
        }
        if triple.relation as usize >= self.relations.len() {
            return Err(KgError::RelationOutOfBounds {
                id: triple.relation,
                len: self.relations.len(),
            });
        }
        Ok(self.push(triple))
    }

    fn push(&mut self, triple: Triple) -> bool {
        if !self.seen.insert(triple.spo()) {
            self.duplicates += 1;
            return false;
        }
        self.triples.push(triple);
        true
    }

    pub fn duplicates_dropped(&self) -> usize {
        self.duplicates
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn build(self) -> KnowledgeGraph {
        let n_ent = self.entities.len();
        let n_rel = self.relations.len();
        let mut out_index: HashMap<(EntityId, RelationId), Vec<EntityId>> = HashMap::new();
        let mut in_index: HashMap<(EntityId, RelationId), Vec<EntityId>> = HashMap::new();
        let mut out_edges = vec![Vec::new(); n_ent];
        let mut in_edges = vec![Vec::new(); n_ent];
        let mut rel_pairs = vec![Vec::new(); n_rel];

        for t in &self.triples {
            out_index
                .entry((t.subject, t.relation))
                .or_default()
                .push(t.object);
            in_index
                .entry((t.object, t.relation))
                .or_default()
                .push(t.subject);
            out_edges[t.subject as usize].push((t.relation, t.object));
            in_edges[t.object as usize].push((t.relation, t.subject));
            rel_pairs[t.relation as usize].push((t.subject, t.object));
        }
        for v in out_index.values_mut() {
            v.sort_unstable();
        }
        for v in in_index.values_mut() {
            v.sort_unstable();
        }
        for v in out_edges.iter_mut().chain(in_edges.iter_mut()) {
            v.sort_unstable();
        }
        let mut rel_subjects = vec![Vec::new(); n_rel];
        let mut rel_objects = vec![Vec::new(); n_rel];
        for (r, pairs) in rel_pairs.iter_mut().enumerate() {
            pairs.sort_unstable();
            let mut subjects: Vec<EntityId> = pairs.iter().map(|&(s, _)| s).collect();
            subjects.sort_unstable();
            subjects.dedup();
            let mut objects: Vec<EntityId> = pairs.iter().map(|&(_, o)| o).collect();
            objects.sort_unstable();
            objects.dedup();
            rel_subjects[r] = subjects;
            rel_objects[r] = objects;
        }

        KnowledgeGraph {
            triples: self.triples,
            entities: self.entities,
            relations: self.relations,
            out_index,
            in_index,
            out_edges,
            in_edges,
            rel_pairs,
            rel_subjects,
            rel_objects,
            membership: self.seen,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> KnowledgeGraph {
        let mut b = KnowledgeGraph::builder();
        b.add_triple_labels("a", "R", "b", false);
        b.add_triple_labels("c", "R", "a", false);
        b.build()
    }

    #[test]
    fn neighbors_forward_and_inverse() {
        let g = tiny();
        let a = g.entities().id("a").unwrap();
        let b = g.entities().id("b").unwrap();
        let c = g.entities().id("c").unwrap();
        let r = g.relations().id("R").unwrap();

        let fwd = g.neighbors(a, Direction::Forward).unwrap();
        assert_eq!(fwd, vec![(DirectedRelation::forward(r), b)]);

        let inv = g.neighbors(a, Direction::Inverse).unwrap();
        assert_eq!(inv, vec![(DirectedRelation::inverse(r), c)]);

        assert!(g.neighbors(b, Direction::Forward).unwrap().is_empty());
        assert!(g.neighbors(99, Direction::Forward).is_err());
    }

    #[test]
    fn neighbors_single_edge_graph() {
        let mut b = KnowledgeGraph::builder();
        b.add_triple_labels("a", "R", "b", false);
        let g = b.build();
        let a = g.entities().id("a").unwrap();
        let r = g.relations().id("R").unwrap();
        let b_id = g.entities().id("b").unwrap();
        assert_eq!(
            g.neighbors(a, Direction::Forward).unwrap(),
            vec![(DirectedRelation::forward(r), b_id)]
        );
        assert!(g.neighbors(a, Direction::Inverse).unwrap().is_empty());
    }

    #[test]
    fn duplicate_triples_are_dropped() {
        let mut b = KnowledgeGraph::builder();
        assert!(b.add_triple_labels("a", "R", "b", false));
        assert!(!b.add_triple_labels("a", "R", "b", false));
        assert_eq!(b.duplicates_dropped(), 1);
        let g = b.build();
        assert_eq!(g.len(), 1);
    }

    #[test]
    fn membership_and_indexes_agree() {
        let g = tiny();
        let a = g.entities().id("a").unwrap();
        let b = g.entities().id("b").unwrap();
        let c = g.entities().id("c").unwrap();
        let r = g.relations().id("R").unwrap();
        assert!(g.contains(a, r, b));
        assert!(!g.contains(b, r, a));
        assert_eq!(g.objects(a, r), &[b]);
        assert_eq!(g.subjects(a, r), &[c]);
        assert_eq!(g.rel_pairs(r).len(), 2);
        assert_eq!(g.subjects_of_relation(r), &[a, c]);
        assert_eq!(g.objects_of_relation(r), &[a, b]);
    }

    #[test]
    fn directed_relation_encoding() {
        let f = DirectedRelation::forward(3);
        let i = DirectedRelation::inverse(3);
        assert_eq!(f.relation(), 3);
        assert_eq!(i.relation(), 3);
        assert!(!f.is_inverse());
        assert!(i.is_inverse());
        assert!(matches!(f.direction(), Direction::Forward));
        assert!(matches!(i.direction(), Direction::Inverse));
        assert_ne!(f, i);
    }

    #[test]
    fn split_validation_rejects_overlap() {
        let g = tiny();
        let ok = Split {
            train: vec![0],
            validation: vec![1],
            test: vec![],
        };
        assert!(ok.validate(&g).is_ok());
        let overlap = Split {
            train: vec![0, 1],
            validation: vec![1],
            test: vec![],
        };
        assert!(overlap.validate(&g).is_err());
        let oob = Split {
            train: vec![5],
            validation: vec![],
            test: vec![],
        };
        assert!(oob.validate(&g).is_err());
    }
}
