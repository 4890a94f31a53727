//! Cached experiment pipeline: impute -> score -> train -> evaluate for every
//! (noise ratio, method) cell, plus a cross-cell comparison table.
//!
//! Every stage is keyed by a digest of its parameters and input digests;
//! re-runs verify the recorded output digests and skip work that is already
//! on disk. The manifest lists every file the pipeline wrote (paths relative
//! to the output directory) and contains no timestamps or absolute output
//! paths, so identical configs produce byte-identical manifests.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use prge_core::embed::{train, EmbeddingModel, ModelFormat};
use prge_core::eval::{
    auc, classify, filtered_mean_rank, fit_thresholds, model_energies, normalize_scores,
    threshold_accuracy, ClassificationOutcome, MetricsReport, RankedList,
};
use prge_core::graph::{
    load_graph, load_graph_with_labels, save_graph, save_noise_labels, KnowledgeGraph, Split,
};
use prge_core::noise::{corrupt_triple, impute_noise, NoiseConfig, Protocol};
use prge_core::pathrank::{score_graph, score_graph_kfold, train_scorers, ConfidenceTable};

use crate::compare::emit_comparison;
use crate::config::{ExperimentConfig, Method};
use crate::digest::{sha256_bytes, sha256_file};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub cell: String,
    pub key: String,
    pub params: String,
    pub inputs: Vec<(String, String)>,
    pub outputs: Vec<(String, String)>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: Vec<(String, String)>,
    pub stages: Vec<StageRecord>,
}

impl Manifest {
    pub fn load(path: &Path) -> Option<Manifest> {
        let text = fs::read_to_string(path).ok()?;
        serde_json::from_str(&text).ok()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    fn stage(&self, key: &str) -> Option<&StageRecord> {
        self.stages
            .iter()
            .find(|s| s.key == key && s.error.is_none())
    }
}

#[derive(Debug)]
pub struct PipelineOutcome {
    pub manifest_path: PathBuf,
    pub reports: Vec<MetricsReport>,
    pub failed_cells: Vec<(String, String)>,
    pub cache_hits: usize,
    pub stages_run: usize,
}

struct StageRunner {
    out_dir: PathBuf,
    previous: Option<Manifest>,
    version: String,
    cache_hits: usize,
    stages_run: usize,
}

impl StageRunner {
    fn stage_key(
        &self,
        name: &str,
        cell: &str,
        params: &str,
        inputs: &[(String, String)],
    ) -> String {
        let mut text = format!("{}\n{name}\n{cell}\n{params}\n", self.version);
        for (path, digest) in inputs {
            text.push_str(path);
            text.push('\t');
            text.push_str(digest);
            text.push('\n');
        }
        sha256_bytes(text.as_bytes())
    }

    /// Runs (or reuses) one stage producing `outputs` (paths relative to the
    /// output directory).
    fn run(
        &mut self,
        name: &str,
        cell: &str,
        params: &str,
        inputs: Vec<(String, String)>,
        outputs: &[String],
        body: impl FnOnce(&Path) -> Result<()>,
    ) -> Result<StageRecord> {
        let key = self.stage_key(name, cell, params, &inputs);
        if let Some(prev) = self.previous.as_ref().and_then(|m| m.stage(&key)) {
            let verified = prev.outputs.iter().all(|(rel, digest)| {
                sha256_file(self.out_dir.join(rel))
                    .map(|d| d == *digest)
                    .unwrap_or(false)
            });
            let same_outputs: Vec<&String> = prev.outputs.iter().map(|(rel, _)| rel).collect();
            if verified && same_outputs.len() == outputs.len() {
                self.cache_hits += 1;
                return Ok(prev.clone());
            }
        }
        body(&self.out_dir)?;
        let mut recorded = Vec::with_capacity(outputs.len());
        for rel in outputs {
            let digest = sha256_file(self.out_dir.join(rel))
                .with_context(|| format!("stage {name} did not produce {rel}"))?;
            recorded.push((rel.clone(), digest));
        }
        self.stages_run += 1;
        Ok(StageRecord {
            name: name.to_owned(),
            cell: cell.to_owned(),
            key,
            params: params.to_owned(),
            inputs,
            outputs: recorded,
            error: None,
        })
    }
}

fn ratio_dir(ratio: f64) -> String {
    format!("noise{}", crate::compare::trim_float(ratio * 100.0))
}

fn failed_record(name: &str, cell: &str, error: &anyhow::Error) -> StageRecord {
    StageRecord {
        name: name.to_owned(),
        cell: cell.to_owned(),
        key: String::new(),
        params: String::new(),
        inputs: Vec::new(),
        outputs: Vec::new(),
        error: Some(format!("{error:#}")),
    }
}

/// Training parameters that actually influence a cell's model; TransE ignores
/// lambda and the score file.
fn train_params(config: &ExperimentConfig, method: Method) -> String {
    let mut canonical = config.training.canonical_string();
    if method == Method::TransE {
        canonical = canonical
            .lines()
            .filter(|l| !l.starts_with("lambda="))
            .collect::<Vec<_>>()
            .join("\n");
        canonical.push('\n');
    }
    format!("method={}\n{canonical}", method.name())
}

pub fn run_pipeline(config: &ExperimentConfig) -> Result<PipelineOutcome> {
    fs::create_dir_all(&config.out_dir)
        .with_context(|| format!("creating {}", config.out_dir.display()))?;
    let manifest_path = config.out_dir.join(MANIFEST_FILE);
    let mut runner = StageRunner {
        out_dir: config.out_dir.clone(),
        previous: Manifest::load(&manifest_path),
        version: env!("CARGO_PKG_VERSION").to_owned(),
        cache_hits: 0,
        stages_run: 0,
    };

    let dataset_digest = sha256_file(&config.dataset)
        .with_context(|| format!("reading {}", config.dataset.display()))?;
    let dataset_input = (config.dataset.display().to_string(), dataset_digest);

    let mut stages: Vec<StageRecord> = Vec::new();
    let mut reports: Vec<MetricsReport> = Vec::new();
    let mut failed: Vec<(String, String)> = Vec::new();

    for &ratio in &config.ratios {
        let rdir = ratio_dir(ratio);
        let noisy_rel = format!("{rdir}/noisy.tsv");
        let labels_rel = format!("{rdir}/noisy.labels");
        let scores_rel = format!("{rdir}/scores.tsv");

        // impute (shared across methods)
        let impute_params = format!(
            "ratio={ratio}\nprotocol={}\nseed={}\n",
            config.protocol.name(),
            config.seed
        );
        let impute = runner.run(
            "impute",
            &rdir,
            &impute_params,
            vec![dataset_input.clone()],
            &[noisy_rel.clone(), labels_rel.clone()],
            |out| {
                fs::create_dir_all(out.join(&rdir))?;
                let (graph, report) = load_graph(&config.dataset)?;
                if report.duplicates_dropped > 0 {
                    eprintln!(
                        "warning: dropped {} duplicate triples from {}",
                        report.duplicates_dropped,
                        config.dataset.display()
                    );
                }
                let noisy = impute_noise(
                    &graph,
                    &NoiseConfig::new(ratio, config.protocol, config.seed),
                )?;
                save_graph(&noisy, out.join(&noisy_rel))?;
                save_noise_labels(&noisy, out.join(&labels_rel))?;
                Ok(())
            },
        );
        let impute = match impute {
            Ok(record) => record,
            Err(e) => {
                for &method in &config.methods {
                    failed.push((format!("{rdir}/{}", method.name()), format!("{e:#}")));
                }
                stages.push(failed_record("impute", &rdir, &e));
                continue;
            }
        };
        let noisy_digest = impute
            .outputs
            .iter()
            .find(|(rel, _)| rel == &noisy_rel)
            .map(|(_, d)| d.clone())
            .expect("impute records its outputs");
        let labels_digest = impute
            .outputs
            .iter()
            .find(|(rel, _)| rel == &labels_rel)
            .map(|(_, d)| d.clone())
            .expect("impute records its outputs");
        stages.push(impute);

        // score (shared by prge and pathrank cells)
        let needs_scores = config.methods.iter().any(|m| m.needs_scores());
        let mut scores_digest: Option<String> = None;
        let mut score_error: Option<String> = None;
        if needs_scores {
            let score_params = format!(
                "max_len={}\nfeatures_per_relation={}\nnegatives_per_positive={}\nmin_support={}\nbinarize={}\nkfold={}\nseed={}\n",
                config.pathrank.max_len,
                config.pathrank.features_per_relation,
                config.pathrank.negatives_per_positive,
                config.pathrank.min_support,
                config.pathrank.binarize,
                config.kfold,
                config.seed,
            );
            let score = runner.run(
                "score",
                &rdir,
                &score_params,
                vec![(noisy_rel.clone(), noisy_digest.clone())],
                std::slice::from_ref(&scores_rel),
                |out| {
                    let (noisy, _) = load_graph(out.join(&noisy_rel))?;
                    let table = if config.kfold >= 2 {
                        score_graph_kfold(&noisy, &config.pathrank, config.kfold)?
                    } else {
                        score_graph(&train_scorers(&noisy, &config.pathrank), &noisy)
                    };
                    table.save(out.join(&scores_rel))?;
                    Ok(())
                },
            );
            match score {
                Ok(record) => {
                    scores_digest = record
                        .outputs
                        .iter()
                        .find(|(rel, _)| rel == &scores_rel)
                        .map(|(_, d)| d.clone());
                    stages.push(record);
                }
                Err(e) => {
                    score_error = Some(format!("{e:#}"));
                    stages.push(failed_record("score", &rdir, &e));
                }
            }
        }

        for &method in &config.methods {
            let cell = format!("{rdir}/{}", method.name());
            if method.needs_scores() {
                if let Some(err) = &score_error {
                    failed.push((cell, err.clone()));
                    continue;
                }
            }
            let result = run_method_cell(
                config,
                &mut runner,
                method,
                ratio,
                &cell,
                (&noisy_rel, &noisy_digest),
                (&labels_rel, &labels_digest),
                (&scores_rel, scores_digest.as_deref()),
                &mut stages,
            );
            match result {
                Ok(report) => reports.push(report),
                Err(e) => {
                    stages.push(failed_record("cell", &cell, &e));
                    failed.push((cell, format!("{e:#}")));
                }
            }
        }
    }

    // comparison across the grid
    if !reports.is_empty() {
        let comparison = emit_comparison(&reports)?;
        let text_rel = "comparison.txt".to_owned();
        let tsv_rel = "comparison.tsv".to_owned();
        fs::write(config.out_dir.join(&text_rel), &comparison.text)?;
        fs::write(config.out_dir.join(&tsv_rel), &comparison.tsv)?;
        let report_inputs: Vec<(String, String)> = reports
            .iter()
            .map(|r| {
                let rel = report_rel(r);
                let digest = sha256_file(config.out_dir.join(&rel)).unwrap_or_default();
                (rel, digest)
            })
            .collect();
        let key = runner.stage_key("compare", "", "", &report_inputs);
        stages.push(StageRecord {
            name: "compare".into(),
            cell: String::new(),
            key,
            params: String::new(),
            inputs: report_inputs,
            outputs: vec![
                (
                    text_rel.clone(),
                    sha256_file(config.out_dir.join(&text_rel))?,
                ),
                (tsv_rel.clone(), sha256_file(config.out_dir.join(&tsv_rel))?),
            ],
            error: None,
        });
    }

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_owned(),
        config: config.canonical(),
        stages,
    };
    manifest.save(&manifest_path)?;

    Ok(PipelineOutcome {
        manifest_path,
        reports,
        failed_cells: failed,
        cache_hits: runner.cache_hits,
        stages_run: runner.stages_run,
    })
}

fn report_rel(report: &MetricsReport) -> String {
    format!(
        "{}/{}/report.kv",
        ratio_dir(report.noise_ratio),
        report.method
    )
}

#[allow(clippy::too_many_arguments)]
fn run_method_cell(
    config: &ExperimentConfig,
    runner: &mut StageRunner,
    method: Method,
    ratio: f64,
    cell: &str,
    (noisy_rel, noisy_digest): (&str, &str),
    (labels_rel, labels_digest): (&str, &str),
    (scores_rel, scores_digest): (&str, Option<&str>),
    stages: &mut Vec<StageRecord>,
) -> Result<MetricsReport> {
    let report_rel = format!("{cell}/report.kv");
    let model_rel = format!("{cell}/model.bin");

    let mut eval_inputs = vec![
        (noisy_rel.to_owned(), noisy_digest.to_owned()),
        (labels_rel.to_owned(), labels_digest.to_owned()),
    ];

    match method {
        Method::PathrankOnly => {
            let scores_digest = scores_digest.ok_or_else(|| anyhow!("scores missing"))?;
            eval_inputs.push((scores_rel.to_owned(), scores_digest.to_owned()));
            let record = runner.run(
                "evaluate",
                cell,
                "source=confidence\n",
                eval_inputs,
                std::slice::from_ref(&report_rel),
                |out| {
                    fs::create_dir_all(out.join(cell))?;
                    let (noisy, _) =
                        load_graph_with_labels(out.join(noisy_rel), out.join(labels_rel))?;
                    let table = ConfidenceTable::load(out.join(scores_rel))?;
                    table.check_len(noisy.len())?;
                    // low confidence = suspicious; rank by 1 - P
                    let suspicion: Vec<f64> = table.scores().iter().map(|s| 1.0 - s).collect();
                    let report = detection_report(config, method, ratio, &noisy, &suspicion)?;
                    report.save(out.join(&report_rel))?;
                    Ok(())
                },
            )?;
            stages.push(record);
        }
        Method::TransE | Method::Prge => {
            let mut train_inputs = vec![(noisy_rel.to_owned(), noisy_digest.to_owned())];
            if method == Method::Prge {
                let scores_digest = scores_digest.ok_or_else(|| anyhow!("scores missing"))?;
                train_inputs.push((scores_rel.to_owned(), scores_digest.to_owned()));
            }
            let record = runner.run(
                "train",
                cell,
                &train_params(config, method),
                train_inputs,
                std::slice::from_ref(&model_rel),
                |out| {
                    fs::create_dir_all(out.join(cell))?;
                    let (noisy, _) = load_graph(out.join(noisy_rel))?;
                    let confidences = if method == Method::Prge {
                        let table = ConfidenceTable::load(out.join(scores_rel))?;
                        table.check_len(noisy.len())?;
                        Some(table)
                    } else {
                        None
                    };
                    let split = Split::all_train(noisy.len());
                    let model = train(&noisy, &split, confidences.as_ref(), &config.training)?;
                    model.save(out.join(&model_rel), ModelFormat::Binary)?;
                    Ok(())
                },
            )?;
            let model_digest = record
                .outputs
                .iter()
                .find(|(rel, _)| rel == &model_rel)
                .map(|(_, d)| d.clone())
                .expect("train records its outputs");
            stages.push(record);

            eval_inputs.push((model_rel.clone(), model_digest));
            let record = runner.run(
                "evaluate",
                cell,
                "source=energy\n",
                eval_inputs,
                std::slice::from_ref(&report_rel),
                |out| {
                    let (noisy, _) =
                        load_graph_with_labels(out.join(noisy_rel), out.join(labels_rel))?;
                    let model = EmbeddingModel::load(out.join(&model_rel))?;
                    model.check_graph(&noisy)?;
                    let energies = model_energies(&model, &noisy)?;
                    let report = detection_report(config, method, ratio, &noisy, &energies)?;
                    report.save(out.join(&report_rel))?;
                    Ok(())
                },
            )?;
            stages.push(record);
        }
    }

    MetricsReport::load(config.out_dir.join(&report_rel)).map_err(Into::into)
}

/// Error-detection metrics for one suspicion scoring of a noisy graph
/// (energies, or inverted confidences).
pub fn detection_report(
    config: &ExperimentConfig,
    method: Method,
    ratio: f64,
    noisy: &KnowledgeGraph,
    suspicion: &[f64],
) -> Result<MetricsReport> {
    let labels = noisy.noise_labels();
    let ranked = RankedList::from_energies(suspicion)?;
    let (fmr, fmrr) = filtered_mean_rank(&ranked, &labels)?;
    let normalized = normalize_scores(suspicion)?;
    let auc_value = auc(&normalized, &labels)?;
    let report = MetricsReport {
        dataset: config.dataset_name.clone(),
        method: method.name().to_owned(),
        noise_ratio: ratio,
        seed: config.seed,
        fmr,
        fmrr,
        auc: auc_value,
        classification: None,
    };
    report.validate()?;
    Ok(report)
}

/// Held-out triple classification: corrupts each validation and test positive
/// once (noise protocol), fits per-relation thresholds on validation, and
/// evaluates on test.
pub fn classification_outcome(
    model: &EmbeddingModel,
    graph: &KnowledgeGraph,
    split: &Split,
    protocol: Protocol,
    seed: u64,
) -> Result<(ClassificationOutcome, f64)> {
    if split.validation.is_empty() || split.test.is_empty() {
        return Err(anyhow!("classification needs validation and test triples"));
    }
    let build_set = |ids: &[usize], stream: u64| -> Result<(Vec<f64>, Vec<bool>, Vec<u32>)> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut scores = Vec::with_capacity(ids.len() * 2);
        let mut positives = Vec::with_capacity(ids.len() * 2);
        let mut relations = Vec::with_capacity(ids.len() * 2);
        let mut dropped = 0usize;
        for &id in ids {
            let t = graph
                .triple(id)
                .ok_or_else(|| anyhow!("triple {id} out of range"))?;
            let Some(negative) = corrupt_triple(graph, t, protocol, &mut rng) else {
                dropped += 1;
                continue;
            };
            scores.push(model.energy(t));
            positives.push(true);
            relations.push(t.relation);
            scores.push(model.energy(&negative));
            positives.push(false);
            relations.push(negative.relation);
        }
        if dropped > 0 {
            eprintln!("warning: no legal corruption for {dropped} positives; skipped");
        }
        Ok((scores, positives, relations))
    };

    let (val_scores, val_pos, val_rel) = build_set(&split.validation, 101)?;
    let thresholds = fit_thresholds(&val_scores, &val_pos, &val_rel)?;
    let val_accuracy = threshold_accuracy(&thresholds, &val_scores, &val_pos, &val_rel);

    let (test_scores, test_pos, test_rel) = build_set(&split.test, 102)?;
    let outcome = classify(
        &test_scores,
        &test_pos,
        &test_rel,
        &thresholds,
        model.num_relations() as u32,
    )?;
    Ok((outcome, val_accuracy))
}
