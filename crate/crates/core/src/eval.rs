//! Error-detection metrics and triple classification.
//!
//! Triples are ranked by descending energy, most suspicious first. A noisy
//! triple's filtered rank is its 1-based position after removing all *other*
//! noisy triples from the list; fMR and fMRR are the mean and mean reciprocal
//! of those ranks. AUC is the tie-aware Mann–Whitney statistic over
//! min-max-normalized scores: the probability that a random noisy triple
//! scores above a random clean one. Classification fits one energy threshold
//! per relation on validation data and reports test accuracy alongside the
//! threshold-free ROC-AUC.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::embed::EmbeddingModel;
use crate::graph::{KnowledgeGraph, RelationId};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("non-finite energy for triple {0}")]
    NonFiniteEnergy(String),
    #[error("non-finite score at index {0}")]
    NonFiniteScore(usize),
    #[error("scores and labels have different lengths ({scores} vs {labels})")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("no noisy triples to rank")]
    NoNoisyTriples,
    #[error("both classes required, got only one")]
    SingleClass,
    #[error("scores are all equal; normalization undefined")]
    DegenerateScores,
    #[error("need at least 2 values, got {0}")]
    TooFewScores(usize),
    #[error("validation set is empty")]
    EmptyValidation,
    #[error("report file {path}: {message}")]
    Report { path: PathBuf, message: String },
}

/// Triple ids ordered by descending energy; ties break toward the smaller id.
#[derive(Debug, Clone)]
pub struct RankedList {
    order: Vec<usize>,
    energies: Vec<f64>,
}

impl RankedList {
    pub fn from_energies(energies: &[f64]) -> Result<Self, EvalError> {
        for (i, e) in energies.iter().enumerate() {
            if !e.is_finite() {
                return Err(EvalError::NonFiniteScore(i));
            }
        }
        let mut order: Vec<usize> = (0..energies.len()).collect();
        order.sort_by(|&a, &b| {
            energies[b]
                .partial_cmp(&energies[a])
                .expect("finite")
                .then_with(|| a.cmp(&b))
        });
        let sorted = order.iter().map(|&i| energies[i]).collect();
        Ok(Self {
            order,
            energies: sorted,
        })
    }

    /// Triple ids, most suspicious first.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Energies aligned with [`Self::order`], non-increasing.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Energy of every graph triple under the model, in triple-id order.
pub fn model_energies(
    model: &EmbeddingModel,
    graph: &KnowledgeGraph,
) -> Result<Vec<f64>, EvalError> {
    let mut energies = Vec::with_capacity(graph.len());
    for t in graph.triples() {
        let e = model.energy(t);
        if !e.is_finite() {
            let name = format!(
                "({}, {}, {})",
                graph.entities().label(t.subject).unwrap_or("?"),
                graph.relations().label(t.relation).unwrap_or("?"),
                graph.entities().label(t.object).unwrap_or("?"),
            );
            return Err(EvalError::NonFiniteEnergy(name));
        }
        energies.push(e);
    }
    Ok(energies)
}

/// Ranks all graph triples by model energy, descending.
pub fn rank_triples(
    model: &EmbeddingModel,
    graph: &KnowledgeGraph,
) -> Result<RankedList, EvalError> {
    RankedList::from_energies(&model_energies(model, graph)?)
}

/// Filtered mean rank and mean reciprocal rank of the noisy triples.
///
/// Each noisy triple is ranked against the clean triples only (all other
/// noisy triples removed), 1-based, rank 1 = most suspicious.
pub fn filtered_mean_rank(ranked: &RankedList, labels: &[bool]) -> Result<(f64, f64), EvalError> {
    if ranked.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            scores: ranked.len(),
            labels: labels.len(),
        });
    }
    let mut rank_sum = 0f64;
    let mut reciprocal_sum = 0f64;
    let mut noisy = 0usize;
    let mut clean_before = 0usize;
    for &id in ranked.order() {
        if labels[id] {
            let rank = (clean_before + 1) as f64;
            rank_sum += rank;
            reciprocal_sum += 1.0 / rank;
            noisy += 1;
        } else {
            clean_before += 1;
        }
    }
    if noisy == 0 {
        return Err(EvalError::NoNoisyTriples);
    }
    Ok((rank_sum / noisy as f64, reciprocal_sum / noisy as f64))
}

/// Min-max normalization to [0, 1]. Requires at least two distinct values.
pub fn normalize_scores(scores: &[f64]) -> Result<Vec<f64>, EvalError> {
    if scores.len() < 2 {
        return Err(EvalError::TooFewScores(scores.len()));
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for (i, &s) in scores.iter().enumerate() {
        if !s.is_finite() {
            return Err(EvalError::NonFiniteScore(i));
        }
        min = min.min(s);
        max = max.max(s);
    }
    if min == max {
        return Err(EvalError::DegenerateScores);
    }
    let span = max - min;
    Ok(scores.iter().map(|&s| (s - min) / span).collect())
}

/// Tie-aware Mann–Whitney AUC: probability that a random positive-labeled
/// score exceeds a random negative-labeled one, ties counted half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    for (i, &s) in scores.iter().enumerate() {
        if !s.is_finite() {
            return Err(EvalError::NonFiniteScore(i));
        }
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::SingleClass);
    }
    // Average ranks over the pooled sample; tied scores share their rank.
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite"));
    let mut rank_sum_pos = 0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j + 1) as f64 / 2.0;
        for &idx in &order[i..j] {
            if labels[idx] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let p = positives as f64;
    let n = negatives as f64;
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

/// Per-relation energy thresholds for triple classification; positive
/// prediction means `energy < threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTable {
    per_relation: BTreeMap<RelationId, f64>,
    pub global: f64,
}

impl ThresholdTable {
    pub fn threshold_for(&self, relation: RelationId) -> f64 {
        self.per_relation
            .get(&relation)
            .copied()
            .unwrap_or(self.global)
    }

    pub fn relations(&self) -> impl Iterator<Item = (RelationId, f64)> + '_ {
        self.per_relation.iter().map(|(&r, &t)| (r, t))
    }

    pub fn len(&self) -> usize {
        self.per_relation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_relation.is_empty()
    }
}

/// Sweeps midpoints between consecutive sorted scores (plus the two one-class
/// extremes) and returns the threshold maximizing accuracy; ties pick the
/// smaller threshold.
fn best_threshold(items: &[(f64, bool)]) -> (f64, f64) {
    debug_assert!(!items.is_empty());
    let mut sorted: Vec<(f64, bool)> = items.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
    let n = sorted.len();
    let total_pos = sorted.iter().filter(|(_, p)| *p).count();

    let mut candidates = Vec::with_capacity(n + 1);
    candidates.push(sorted[0].0 - 1.0);
    for w in sorted.windows(2) {
        if w[0].0 < w[1].0 {
            candidates.push((w[0].0 + w[1].0) / 2.0);
        }
    }
    candidates.push(sorted[n - 1].0 + 1.0);

    let mut best = (f64::NEG_INFINITY, 0.0);
    for &tau in &candidates {
        // predict positive iff score < tau
        let pos_below = sorted
            .iter()
            .take_while(|(s, _)| *s < tau)
            .filter(|(_, p)| *p)
            .count();
        let below = sorted.partition_point(|(s, _)| *s < tau);
        let correct = pos_below + ((n - below) - (total_pos - pos_below));
        let accuracy = correct as f64 / n as f64;
        if accuracy > best.0 {
            best = (accuracy, tau);
        }
    }
    (best.1, best.0)
}

/// Fits per-relation thresholds on validation energies.
///
/// `positives[i]` is true for genuine triples. Relations absent from the
/// validation set fall back to the global threshold fit on everything.
pub fn fit_thresholds(
    scores: &[f64],
    positives: &[bool],
    relations: &[RelationId],
) -> Result<ThresholdTable, EvalError> {
    if scores.is_empty() {
        return Err(EvalError::EmptyValidation);
    }
    if scores.len() != positives.len() || scores.len() != relations.len() {
        return Err(EvalError::LengthMismatch {
            scores: scores.len(),
            labels: positives.len().min(relations.len()),
        });
    }
    for (i, &s) in scores.iter().enumerate() {
        if !s.is_finite() {
            return Err(EvalError::NonFiniteScore(i));
        }
    }
    let all: Vec<(f64, bool)> = scores
        .iter()
        .copied()
        .zip(positives.iter().copied())
        .collect();
    let (global, _) = best_threshold(&all);

    let mut grouped: BTreeMap<RelationId, Vec<(f64, bool)>> = BTreeMap::new();
    for i in 0..scores.len() {
        grouped
            .entry(relations[i])
            .or_default()
            .push((scores[i], positives[i]));
    }
    let per_relation = grouped
        .into_iter()
        .map(|(r, items)| (r, best_threshold(&items).0))
        .collect();
    Ok(ThresholdTable {
        per_relation,
        global,
    })
}

/// Accuracy of [`fit_thresholds`]'s rule evaluated on the same data it was
/// fit on (self-consistency hook for tests and reports).
pub fn threshold_accuracy(
    thresholds: &ThresholdTable,
    scores: &[f64],
    positives: &[bool],
    relations: &[RelationId],
) -> f64 {
    let correct = scores
        .iter()
        .zip(positives)
        .zip(relations)
        .filter(|((&s, &p), &r)| (s < thresholds.threshold_for(r)) == p)
        .count();
    correct as f64 / scores.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationOutcome {
    /// Accuracy under the per-relation threshold rule.
    pub accuracy: f64,
    /// Threshold-free ROC-AUC of the energies (corrupted triples should score
    /// higher).
    pub roc_auc: f64,
    /// Items evaluated.
    pub evaluated: usize,
    /// Items skipped because their relation is unknown to the model.
    pub skipped: usize,
}

/// Classifies test triples by per-relation energy threshold. Items whose
/// relation id falls outside the model's dictionary (`known_relations`) are
/// skipped and counted.
pub fn classify(
    scores: &[f64],
    positives: &[bool],
    relations: &[RelationId],
    thresholds: &ThresholdTable,
    known_relations: u32,
) -> Result<ClassificationOutcome, EvalError> {
    if scores.len() != positives.len() || scores.len() != relations.len() {
        return Err(EvalError::LengthMismatch {
            scores: scores.len(),
            labels: positives.len().min(relations.len()),
        });
    }
    let mut kept_scores = Vec::with_capacity(scores.len());
    let mut kept_pos = Vec::with_capacity(scores.len());
    let mut correct = 0usize;
    let mut skipped = 0usize;
    for i in 0..scores.len() {
        if relations[i] >= known_relations {
            skipped += 1;
            continue;
        }
        if !scores[i].is_finite() {
            return Err(EvalError::NonFiniteScore(i));
        }
        let predicted = scores[i] < thresholds.threshold_for(relations[i]);
        if predicted == positives[i] {
            correct += 1;
        }
        kept_scores.push(scores[i]);
        // for ROC direction: corrupted (negative) triples should score higher
        kept_pos.push(!positives[i]);
    }
    if kept_scores.is_empty() {
        return Err(EvalError::EmptyValidation);
    }
    let roc_auc = auc(&kept_scores, &kept_pos)?;
    Ok(ClassificationOutcome {
        accuracy: correct as f64 / kept_scores.len() as f64,
        roc_auc,
        evaluated: kept_scores.len(),
        skipped,
    })
}

/// Metrics for one experiment cell, serialized as a key-value file and
/// printable as an aligned table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub dataset: String,
    pub method: String,
    pub noise_ratio: f64,
    pub seed: u64,
    pub fmr: f64,
    pub fmrr: f64,
    pub auc: f64,
    pub classification: Option<ClassificationOutcome>,
}

/// How ranks were produced, recorded in every report so numbers stay
/// comparable across runs.
pub const RANKING_CONVENTION: &str =
    "descending-energy; filtered=other-noise-removed; pool=all-graph-triples";

impl MetricsReport {
    pub fn validate(&self) -> Result<(), EvalError> {
        let ok = self.fmr >= 1.0
            && self.fmrr > 0.0
            && self.fmrr <= 1.0
            && (0.0..=1.0).contains(&self.auc);
        if !ok {
            return Err(EvalError::Report {
                path: PathBuf::new(),
                message: format!(
                    "metric invariants violated: fmr={} fmrr={} auc={}",
                    self.fmr, self.fmrr, self.auc
                ),
            });
        }
        Ok(())
    }

    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("dataset\t{}\n", self.dataset));
        out.push_str(&format!("method\t{}\n", self.method));
        out.push_str(&format!("noise_ratio\t{}\n", self.noise_ratio));
        out.push_str(&format!("seed\t{}\n", self.seed));
        out.push_str(&format!("fmr\t{}\n", self.fmr));
        out.push_str(&format!("fmrr\t{}\n", self.fmrr));
        out.push_str(&format!("auc\t{}\n", self.auc));
        if let Some(c) = &self.classification {
            out.push_str(&format!("classification_accuracy\t{}\n", c.accuracy));
            out.push_str(&format!("classification_roc_auc\t{}\n", c.roc_auc));
            out.push_str(&format!("classification_evaluated\t{}\n", c.evaluated));
            out.push_str(&format!("classification_skipped\t{}\n", c.skipped));
        }
        out.push_str(&format!("convention\t{RANKING_CONVENTION}\n"));
        out
    }

    pub fn from_kv_str(text: &str) -> Result<Self, EvalError> {
        let report_err = |message: String| EvalError::Report {
            path: PathBuf::new(),
            message,
        };
        let mut map = HashMap::new();
        for line in text.lines() {
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('\t')
                .ok_or_else(|| report_err(format!("bad line {line:?}")))?;
            map.insert(k.to_owned(), v.to_owned());
        }
        let get = |k: &str| {
            map.get(k)
                .cloned()
                .ok_or_else(|| report_err(format!("missing key {k}")))
        };
        let parse_f64 = |k: &str| -> Result<f64, EvalError> {
            get(k)?
                .parse()
                .map_err(|_| report_err(format!("bad value for {k}")))
        };
        let classification = if map.contains_key("classification_accuracy") {
            Some(ClassificationOutcome {
                accuracy: parse_f64("classification_accuracy")?,
                roc_auc: parse_f64("classification_roc_auc")?,
                evaluated: get("classification_evaluated")?
                    .parse()
                    .map_err(|_| report_err("bad evaluated count".into()))?,
                skipped: get("classification_skipped")?
                    .parse()
                    .map_err(|_| report_err("bad skipped count".into()))?,
            })
        } else {
            None
        };
        Ok(Self {
            dataset: get("dataset")?,
            method: get("method")?,
            noise_ratio: parse_f64("noise_ratio")?,
            seed: get("seed")?
                .parse()
                .map_err(|_| report_err("bad seed".into()))?,
            fmr: parse_f64("fmr")?,
            fmrr: parse_f64("fmrr")?,
            auc: parse_f64("auc")?,
            classification,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EvalError> {
        let path = path.as_ref();
        fs::write(path, self.to_kv_string()).map_err(|source| EvalError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| EvalError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_kv_str(&text).map_err(|e| match e {
            EvalError::Report { message, .. } => EvalError::Report {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    /// Single-report table in the result-table layout.
    pub fn table_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<12} {:>10} {:>8} {:>8}\n",
            format!("{}-{}%", self.dataset, (self.noise_ratio * 100.0).round()),
            "fMR",
            "fMRR",
            "AUC"
        ));
        out.push_str(&format!(
            "{:<12} {:>10.1} {:>8.4} {:>8.4}\n",
            self.method, self.fmr, self.fmrr, self.auc
        ));
        out
    }
}
