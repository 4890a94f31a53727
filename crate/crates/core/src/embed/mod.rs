//! Translation embeddings with margin loss.
//!
//! Every entity and relation is a d-dimensional vector and a triple's energy
//! is `||s + r - o||` (L2); low energy means plausible. Training minimizes
//! the pairwise hinge `[gamma + E(positive) - E(corrupted)]_+` by SGD with
//! uniform negative sampling. When a confidence table is supplied, each
//! positive triple's term is multiplied by `P(s, r, o)^lambda`, which
//! discounts low-confidence (likely noisy) triples; `lambda = 0` recovers the
//! unweighted objective exactly.

mod io;
mod trainer;

pub use io::ModelFormat;

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::graph::{KnowledgeGraph, Split, Triple};
use crate::pathrank::ConfidenceTable;
use trainer::{
    accumulate_pair, apply_gradients, energy_of, normalize_entities, GradBuffer, Params,
};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("model file {path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("training split is empty")]
    EmptyTrainSplit,
    #[error("invalid split: {0}")]
    Split(String),
    #[error("confidence {0} outside [0, 1]")]
    ConfidenceRange(f64),
    #[error("confidence table has {found} scores, graph has {expected} triples")]
    ConfidenceLength { expected: usize, found: usize },
    #[error("non-finite loss at epoch {epoch}; learning rate may be too high")]
    NonFiniteLoss { epoch: usize },
    #[error(
        "model shape (|E|={model_entities}, |R|={model_relations}, d={model_dim}) does not match \
         expectation (|E|={expected_entities}, |R|={expected_relations})"
    )]
    ShapeMismatch {
        model_entities: usize,
        model_relations: usize,
        model_dim: usize,
        expected_entities: usize,
        expected_relations: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NegativeSampling {
    /// Corrupt subject or object with an entity drawn uniformly.
    Uniform,
}

impl NegativeSampling {
    fn name(self) -> &'static str {
        match self {
            NegativeSampling::Uniform => "uniform",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub dim: usize,
    pub margin: f64,
    /// Confidence exponent; 0 makes weighted training coincide with the
    /// unweighted objective.
    pub lambda: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Epochs without validation improvement before stopping. Only active
    /// when the split has validation triples.
    pub patience: usize,
    pub seed: u64,
    pub negative_sampling: NegativeSampling,
    /// Reserved switch: this build always trains single-threaded and
    /// reproducibly, so the flag does not change behavior.
    pub deterministic: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            dim: 50,
            margin: 1.0,
            lambda: 5.0,
            epochs: 1000,
            learning_rate: 0.01,
            batch_size: 1024,
            patience: 50,
            seed: 0,
            negative_sampling: NegativeSampling::Uniform,
            deterministic: true,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), EmbedError> {
        let err = |m: &str| Err(EmbedError::Config(m.into()));
        if self.dim == 0 {
            return err("dim must be positive");
        }
        if !(self.margin.is_finite() && self.margin > 0.0) {
            return err("margin must be positive");
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return err("lambda must be non-negative");
        }
        if self.epochs == 0 {
            return err("epochs must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return err("learning rate must be positive");
        }
        if self.batch_size == 0 {
            return err("batch size must be positive");
        }
        Ok(())
    }

    /// Fixed-order key=value rendering; digested into model headers.
    pub fn canonical_string(&self) -> String {
        format!(
            "dim={}\nmargin={}\nlambda={}\nepochs={}\nlearning_rate={}\nbatch_size={}\npatience={}\nseed={}\nnegative_sampling={}\ndeterministic={}\n",
            self.dim,
            self.margin,
            self.lambda,
            self.epochs,
            self.learning_rate,
            self.batch_size,
            self.patience,
            self.seed,
            self.negative_sampling.name(),
            self.deterministic,
        )
    }

    pub fn from_canonical_string(text: &str) -> Result<Self, EmbedError> {
        let mut config = Self::default();
        for line in text.lines() {
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| EmbedError::Config(format!("bad config line {line:?}")))?;
            let bad = || EmbedError::Config(format!("bad value for {key}: {value:?}"));
            match key {
                "dim" => config.dim = value.parse().map_err(|_| bad())?,
                "margin" => config.margin = value.parse().map_err(|_| bad())?,
                "lambda" => config.lambda = value.parse().map_err(|_| bad())?,
                "epochs" => config.epochs = value.parse().map_err(|_| bad())?,
                "learning_rate" => config.learning_rate = value.parse().map_err(|_| bad())?,
                "batch_size" => config.batch_size = value.parse().map_err(|_| bad())?,
                "patience" => config.patience = value.parse().map_err(|_| bad())?,
                "seed" => config.seed = value.parse().map_err(|_| bad())?,
                "negative_sampling" => match value {
                    "uniform" => config.negative_sampling = NegativeSampling::Uniform,
                    _ => return Err(bad()),
                },
                "deterministic" => config.deterministic = value.parse().map_err(|_| bad())?,
                _ => return Err(EmbedError::Config(format!("unknown config key {key:?}"))),
            }
        }
        Ok(config)
    }
}

/// Hinge penalty `[gamma + e_pos - e_neg]_+`.
pub fn hinge(gamma: f64, e_pos: f64, e_neg: f64) -> f64 {
    (gamma + e_pos - e_neg).max(0.0)
}

/// Loss multiplier `confidence^lambda`; `lambda = 0` gives 1 for every
/// confidence (0^0 is taken as 1).
pub fn prge_weight(confidence: f64, lambda: f64) -> Result<f64, EmbedError> {
    if !(confidence.is_finite() && (0.0..=1.0).contains(&confidence)) {
        return Err(EmbedError::ConfidenceRange(confidence));
    }
    Ok(confidence.powf(lambda))
}

/// Corrupts subject or object (fair coin) of `triple` with a uniform random
/// entity, rejecting candidates present in the graph. After 100 rejected
/// attempts the last structurally valid candidate is accepted.
pub fn sample_negative(graph: &KnowledgeGraph, triple: &Triple, rng: &mut impl Rng) -> Triple {
    let n = graph.num_entities() as u32;
    let mut last_valid: Option<Triple> = None;
    for _ in 0..100 {
        let corrupt_subject = rng.random_bool(0.5);
        let entity = rng.random_range(0..n);
        let mut candidate = *triple;
        if corrupt_subject {
            if entity == triple.subject {
                continue;
            }
            candidate.subject = entity;
        } else {
            if entity == triple.object {
                continue;
            }
            candidate.object = entity;
        }
        if !graph.contains_triple(&candidate) {
            return candidate;
        }
        last_valid = Some(candidate);
    }
    // Dense corner: tolerate a colliding negative rather than livelock.
    last_valid.unwrap_or(*triple)
}

/// Entity and relation embeddings plus training metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    dim: usize,
    entities: Vec<f32>,
    relations: Vec<f32>,
    config: TrainingConfig,
    epochs_trained: usize,
    best_validation: Option<f64>,
}

impl EmbeddingModel {
    /// Freshly initialized model: rows uniform in [-6/sqrt(d), 6/sqrt(d)],
    /// entity rows normalized to unit length.
    pub fn init(num_entities: usize, num_relations: usize, config: &TrainingConfig) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
        rng.set_stream(0);
        let d = config.dim;
        let bound = 6.0 / (d as f32).sqrt();
        let mut entities = vec![0f32; num_entities * d];
        for v in entities.iter_mut() {
            *v = rng.random_range(-bound..bound);
        }
        let mut relations = vec![0f32; num_relations * d];
        for v in relations.iter_mut() {
            *v = rng.random_range(-bound..bound);
        }
        let mut params = Params {
            dim: d,
            entities,
            relations,
        };
        normalize_entities(&mut params);
        Self {
            dim: d,
            entities: params.entities,
            relations: params.relations,
            config: config.clone(),
            epochs_trained: 0,
            best_validation: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len() / self.dim
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len() / self.dim
    }

    pub fn entity(&self, id: u32) -> &[f32] {
        &self.entities[id as usize * self.dim..(id as usize + 1) * self.dim]
    }

    pub fn relation(&self, id: u32) -> &[f32] {
        &self.relations[id as usize * self.dim..(id as usize + 1) * self.dim]
    }

    pub fn config(&self) -> &TrainingConfig {
        &self.config
    }

    pub fn epochs_trained(&self) -> usize {
        self.epochs_trained
    }

    pub fn best_validation(&self) -> Option<f64> {
        self.best_validation
    }

    /// `||s + r - o||`, accumulated in f64.
    pub fn energy(&self, triple: &Triple) -> f64 {
        self.energy_ids(triple.subject, triple.relation, triple.object)
    }

    pub fn energy_ids(&self, subject: u32, relation: u32, object: u32) -> f64 {
        let s = self.entity(subject);
        let r = self.relation(relation);
        let o = self.entity(object);
        let mut sum = 0f64;
        for k in 0..self.dim {
            let d = s[k] as f64 + r[k] as f64 - o[k] as f64;
            sum += d * d;
        }
        sum.sqrt()
    }

    pub fn check_graph(&self, graph: &KnowledgeGraph) -> Result<(), EmbedError> {
        if self.num_entities() != graph.num_entities()
            || self.num_relations() != graph.num_relations()
        {
            return Err(EmbedError::ShapeMismatch {
                model_entities: self.num_entities(),
                model_relations: self.num_relations(),
                model_dim: self.dim,
                expected_entities: graph.num_entities(),
                expected_relations: graph.num_relations(),
            });
        }
        Ok(())
    }

    /// Largest deviation of any entity row norm from 1.
    pub fn max_entity_norm_error(&self) -> f64 {
        self.entities
            .chunks(self.dim)
            .map(|row| {
                let norm = row.iter().map(|&v| v as f64 * v as f64).sum::<f64>().sqrt();
                (norm - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Trains embeddings on `split.train` by mini-batch SGD.
///
/// With `confidences` present, each training triple's hinge terms are scaled
/// by `P^lambda`; absent, all weights are 1 (plain margin training). Entity
/// rows are renormalized after every epoch. If the split has validation
/// triples, the mean validation hinge (fresh negatives each epoch) drives
/// early stopping and the best-epoch parameters are returned.
pub fn train(
    graph: &KnowledgeGraph,
    split: &Split,
    confidences: Option<&ConfidenceTable>,
    config: &TrainingConfig,
) -> Result<EmbeddingModel, EmbedError> {
    config.validate()?;
    if split.train.is_empty() {
        return Err(EmbedError::EmptyTrainSplit);
    }
    split
        .validate(graph)
        .map_err(|e| EmbedError::Split(e.to_string()))?;
    if let Some(table) = confidences {
        if table.len() != graph.len() {
            return Err(EmbedError::ConfidenceLength {
                expected: graph.len(),
                found: table.len(),
            });
        }
    }

    // Per-triple weights, fixed for the whole run.
    let mut weights = vec![0f32; graph.len()];
    for &id in &split.train {
        let confidence = match confidences {
            Some(table) => table.get(id).expect("length checked"),
            None => 1.0,
        };
        weights[id] = prge_weight(confidence, config.lambda)? as f32;
    }

    let initial = EmbeddingModel::init(graph.num_entities(), graph.num_relations(), config);
    let mut params = Params {
        dim: config.dim,
        entities: initial.entities,
        relations: initial.relations,
    };

    let mut train_rng = ChaCha12Rng::seed_from_u64(config.seed);
    train_rng.set_stream(1);
    let mut val_rng = ChaCha12Rng::seed_from_u64(config.seed);
    val_rng.set_stream(2);

    let gamma = config.margin as f32;
    let lr = config.learning_rate as f32;
    let mut order: Vec<usize> = split.train.clone();
    let mut grads = GradBuffer::new(config.dim);

    let mut best_val = f64::INFINITY;
    let mut best_snapshot: Option<(Vec<f32>, Vec<f32>)> = None;
    let mut since_best = 0usize;
    let mut epochs_run = 0usize;

    for epoch in 1..=config.epochs {
        epochs_run = epoch;
        order.shuffle(&mut train_rng);
        for chunk in order.chunks(config.batch_size) {
            grads.clear();
            let mut batch_loss = 0f64;
            for &id in chunk {
                let positive = graph.triple(id).expect("validated split");
                let negative = sample_negative(graph, positive, &mut train_rng);
                let term =
                    accumulate_pair(&params, gamma, positive, &negative, weights[id], &mut grads);
                batch_loss += term as f64;
            }
            if !batch_loss.is_finite() {
                return Err(EmbedError::NonFiniteLoss { epoch });
            }
            apply_gradients(&mut params, &grads, lr);
        }
        normalize_entities(&mut params);

        if !split.validation.is_empty() {
            let mut total = 0f64;
            for &id in &split.validation {
                let positive = graph.triple(id).expect("validated split");
                let negative = sample_negative(graph, positive, &mut val_rng);
                let e_pos = energy_of(
                    params.entity(positive.subject),
                    params.relation(positive.relation),
                    params.entity(positive.object),
                ) as f64;
                let e_neg = energy_of(
                    params.entity(negative.subject),
                    params.relation(negative.relation),
                    params.entity(negative.object),
                ) as f64;
                total += hinge(config.margin, e_pos, e_neg);
            }
            let val_loss = total / split.validation.len() as f64;
            if !val_loss.is_finite() {
                return Err(EmbedError::NonFiniteLoss { epoch });
            }
            if val_loss < best_val {
                best_val = val_loss;
                best_snapshot = Some((params.entities.clone(), params.relations.clone()));
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= config.patience {
                    break;
                }
            }
        }
    }

    let (entities, relations, best_validation) = match best_snapshot {
        Some((e, r)) => (e, r, Some(best_val)),
        None => (params.entities, params.relations, None),
    };
    Ok(EmbeddingModel {
        dim: config.dim,
        entities,
        relations,
        config: config.clone(),
        epochs_trained: epochs_run,
        best_validation,
    })
}

/// 64-bit loss and gradient of the weighted batch objective, for
/// finite-difference verification. Shares the gradient code with the f32
/// trainer.
pub mod gradcheck {
    use super::trainer::{accumulate_pair, GradBuffer, Params};
    use crate::graph::Triple;

    /// Dense f64 parameters: row-major entity and relation matrices.
    #[derive(Debug, Clone)]
    pub struct Params64 {
        pub dim: usize,
        pub entities: Vec<f64>,
        pub relations: Vec<f64>,
    }

    /// One aligned (positive, negative) pair and the positive's loss weight.
    #[derive(Debug, Clone)]
    pub struct WeightedPair {
        pub positive: Triple,
        pub negative: Triple,
        pub weight: f64,
    }

    fn as_params(p: &Params64) -> Params<f64> {
        Params {
            dim: p.dim,
            entities: p.entities.clone(),
            relations: p.relations.clone(),
        }
    }

    /// `sum_i w_i * [gamma + E(pos_i) - E(neg_i)]_+`
    pub fn batch_loss(params: &Params64, gamma: f64, pairs: &[WeightedPair]) -> f64 {
        let p = as_params(params);
        let mut grads = GradBuffer::new(params.dim);
        pairs
            .iter()
            .map(|pair| {
                accumulate_pair(
                    &p,
                    gamma,
                    &pair.positive,
                    &pair.negative,
                    pair.weight,
                    &mut grads,
                )
            })
            .sum()
    }

    /// Analytic gradient of [`batch_loss`], densified to match `Params64`
    /// layout.
    pub fn batch_gradient(
        params: &Params64,
        gamma: f64,
        pairs: &[WeightedPair],
    ) -> (Vec<f64>, Vec<f64>) {
        let p = as_params(params);
        let mut grads = GradBuffer::new(params.dim);
        for pair in pairs {
            accumulate_pair(
                &p,
                gamma,
                &pair.positive,
                &pair.negative,
                pair.weight,
                &mut grads,
            );
        }
        let mut ent = vec![0.0; params.entities.len()];
        let mut rel = vec![0.0; params.relations.len()];
        let d = params.dim;
        for (&id, grad) in &grads.entities {
            ent[id as usize * d..(id as usize + 1) * d].copy_from_slice(grad);
        }
        for (&id, grad) in &grads.relations {
            rel[id as usize * d..(id as usize + 1) * d].copy_from_slice(grad);
        }
        (ent, rel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn energy_zero_vectors() {
        let config = TrainingConfig {
            dim: 2,
            ..Default::default()
        };
        let mut model = EmbeddingModel::init(2, 1, &config);
        model.entities = vec![0.0; 4];
        model.relations = vec![0.0; 2];
        assert_eq!(model.energy_ids(0, 0, 1), 0.0);
    }

    #[test]
    fn energy_exact_translation() {
        let config = TrainingConfig {
            dim: 2,
            ..Default::default()
        };
        let mut model = EmbeddingModel::init(2, 1, &config);
        // s=(1,0), r=(0,1), o=(1,1)
        model.entities = vec![1.0, 0.0, 1.0, 1.0];
        model.relations = vec![0.0, 1.0];
        assert_eq!(model.energy_ids(0, 0, 1), 0.0);
    }

    #[test]
    fn energy_direct_norm() {
        let config = TrainingConfig {
            dim: 2,
            ..Default::default()
        };
        let mut model = EmbeddingModel::init(2, 1, &config);
        // s=(1,2), r=(3,4), o=(0,0) -> sqrt(16+36)
        model.entities = vec![1.0, 2.0, 0.0, 0.0];
        model.relations = vec![3.0, 4.0];
        assert!((model.energy_ids(0, 0, 1) - 52f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn hinge_examples() {
        assert_eq!(hinge(1.0, 0.0, 5.0), 0.0);
        assert_eq!(hinge(1.0, 2.0, 1.0), 2.0);
        assert_eq!(hinge(1.0, 0.0, 1.0), 0.0); // boundary
    }

    #[test]
    fn prge_weight_examples() {
        assert_eq!(prge_weight(1.0, 5.0).unwrap(), 1.0);
        assert_eq!(prge_weight(0.5, 5.0).unwrap(), 0.03125);
        assert_eq!(prge_weight(0.3, 0.0).unwrap(), 1.0);
        assert_eq!(prge_weight(0.0, 0.0).unwrap(), 1.0);
        assert!(prge_weight(1.5, 5.0).is_err());
        assert!(prge_weight(-0.1, 5.0).is_err());
        assert!(prge_weight(f64::NAN, 5.0).is_err());
    }

    #[test]
    fn config_canonical_round_trip() {
        let config = TrainingConfig {
            dim: 32,
            margin: 2.5,
            lambda: 0.75,
            epochs: 123,
            learning_rate: 0.005,
            batch_size: 64,
            patience: 7,
            seed: 99,
            negative_sampling: NegativeSampling::Uniform,
            deterministic: true,
        };
        let text = config.canonical_string();
        let parsed = TrainingConfig::from_canonical_string(&text).unwrap();
        assert_eq!(parsed, config);
    }
}
