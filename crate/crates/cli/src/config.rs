//! Experiment configuration: a flat key=value file plus command-line
//! overrides, flags winning over file values.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use prge_core::embed::TrainingConfig;
use prge_core::noise::Protocol;
use prge_core::pathrank::PathRankParams;

pub const OUT_ROOT_ENV: &str = "PRGE_OUT_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    TransE,
    Prge,
    PathrankOnly,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::TransE => "transe",
            Method::Prge => "prge",
            Method::PathrankOnly => "pathrank",
        }
    }

    pub fn needs_scores(self) -> bool {
        matches!(self, Method::Prge | Method::PathrankOnly)
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "transe" => Ok(Method::TransE),
            "prge" => Ok(Method::Prge),
            "pathrank-only" | "pathrank_only" | "pathrank" => Ok(Method::PathrankOnly),
            other => Err(format!("unknown method {other:?}")),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    pub dataset_name: String,
    pub ratios: Vec<f64>,
    pub protocol: Protocol,
    pub methods: Vec<Method>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub training: TrainingConfig,
    pub pathrank: PathRankParams,
    /// 0 scores in-sample; k >= 2 cross-validates the confidence table.
    pub kfold: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::new(),
            dataset_name: String::new(),
            ratios: vec![0.10, 0.20, 0.40],
            protocol: Protocol::Random,
            methods: vec![Method::TransE, Method::Prge],
            out_dir: PathBuf::new(),
            seed: 0,
            training: TrainingConfig::default(),
            pathrank: PathRankParams::default(),
            kfold: 0,
        }
    }
}

/// Flag-level overrides; every field beats the config file when set.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub dataset: Option<PathBuf>,
    pub ratios: Option<Vec<f64>>,
    pub protocol: Option<Protocol>,
    pub methods: Option<Vec<Method>>,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub dim: Option<usize>,
    pub lambda: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("line {}: expected key = value", lineno + 1))?;
            let key = key.trim();
            let value = value.trim();
            config
                .set(key, value)
                .with_context(|| format!("line {}: key {key:?}", lineno + 1))?;
        }
        Ok(config)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "dataset" => self.dataset = PathBuf::from(value),
            "dataset_name" => self.dataset_name = value.to_owned(),
            "ratios" => self.ratios = parse_ratios(value)?,
            "protocol" => self.protocol = value.parse().map_err(anyhow::Error::msg)?,
            "methods" => self.methods = parse_methods(value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "seed" => self.seed = value.parse().context("bad seed")?,
            "dim" => self.training.dim = value.parse().context("bad dim")?,
            "margin" => self.training.margin = value.parse().context("bad margin")?,
            "lambda" => self.training.lambda = value.parse().context("bad lambda")?,
            "epochs" => self.training.epochs = value.parse().context("bad epochs")?,
            "learning_rate" | "lr" => {
                self.training.learning_rate = value.parse().context("bad learning rate")?
            }
            "batch_size" | "batch" => {
                self.training.batch_size = value.parse().context("bad batch size")?
            }
            "patience" => self.training.patience = value.parse().context("bad patience")?,
            "max_len" => self.pathrank.max_len = value.parse().context("bad max_len")?,
            "features_per_relation" => {
                self.pathrank.features_per_relation =
                    value.parse().context("bad features_per_relation")?
            }
            "negatives_per_positive" | "neg_ratio" => {
                self.pathrank.negatives_per_positive =
                    value.parse().context("bad negatives_per_positive")?
            }
            "min_support" => {
                self.pathrank.min_support = value.parse().context("bad min_support")?
            }
            "binarize" => self.pathrank.binarize = value.parse().context("bad binarize")?,
            "kfold" => self.kfold = value.parse().context("bad kfold")?,
            other => bail!("unknown config key {other:?}"),
        }
        Ok(())
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(v) = &overrides.dataset {
            self.dataset = v.clone();
        }
        if let Some(v) = &overrides.ratios {
            self.ratios = v.clone();
        }
        if let Some(v) = overrides.protocol {
            self.protocol = v;
        }
        if let Some(v) = &overrides.methods {
            self.methods = v.clone();
        }
        if let Some(v) = &overrides.out_dir {
            self.out_dir = v.clone();
        }
        if let Some(v) = overrides.seed {
            self.seed = v;
        }
        if let Some(v) = overrides.epochs {
            self.training.epochs = v;
        }
        if let Some(v) = overrides.dim {
            self.training.dim = v;
        }
        if let Some(v) = overrides.lambda {
            self.training.lambda = v;
        }
    }

    /// Fills derived defaults and checks invariants. Call once after
    /// overrides are applied.
    pub fn finalize(&mut self) -> Result<()> {
        if self.dataset.as_os_str().is_empty() {
            bail!("no dataset configured (key `dataset` or --dataset)");
        }
        if !self.dataset.exists() {
            bail!("dataset {} does not exist", self.dataset.display());
        }
        if self.dataset_name.is_empty() {
            self.dataset_name = self
                .dataset
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".to_owned());
        }
        if self.out_dir.as_os_str().is_empty() {
            let root = std::env::var(OUT_ROOT_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|_| PathBuf::from("prge-runs"));
            self.out_dir = root.join(&self.dataset_name);
        }
        if self.ratios.is_empty() {
            bail!("ratio list is empty");
        }
        for &r in &self.ratios {
            if !(r > 0.0 && r <= 1.0) {
                bail!("noise ratio {r} outside (0, 1]");
            }
        }
        if self.methods.is_empty() {
            bail!("method list is empty");
        }
        let mut deduped = Vec::new();
        for &m in &self.methods {
            if !deduped.contains(&m) {
                deduped.push(m);
            }
        }
        self.methods = deduped;
        if self.kfold == 1 {
            bail!("kfold must be 0 (in-sample) or >= 2");
        }
        self.training.seed = self.seed;
        self.pathrank.seed = self.seed;
        self.training
            .validate()
            .map_err(|e| anyhow::anyhow!(e.to_string()))?;
        Ok(())
    }

    /// Canonical key=value rendering, also used for cache keys and the
    /// manifest.
    pub fn canonical(&self) -> Vec<(String, String)> {
        let ratios = self
            .ratios
            .iter()
            .map(f64::to_string)
            .collect::<Vec<_>>()
            .join(",");
        let methods = self
            .methods
            .iter()
            .map(|m| m.name().to_owned())
            .collect::<Vec<_>>()
            .join(",");
        vec![
            ("dataset".into(), self.dataset.display().to_string()),
            ("dataset_name".into(), self.dataset_name.clone()),
            ("ratios".into(), ratios),
            ("protocol".into(), self.protocol.name().into()),
            ("methods".into(), methods),
            ("seed".into(), self.seed.to_string()),
            ("dim".into(), self.training.dim.to_string()),
            ("margin".into(), self.training.margin.to_string()),
            ("lambda".into(), self.training.lambda.to_string()),
            ("epochs".into(), self.training.epochs.to_string()),
            (
                "learning_rate".into(),
                self.training.learning_rate.to_string(),
            ),
            ("batch_size".into(), self.training.batch_size.to_string()),
            ("patience".into(), self.training.patience.to_string()),
            ("max_len".into(), self.pathrank.max_len.to_string()),
            (
                "features_per_relation".into(),
                self.pathrank.features_per_relation.to_string(),
            ),
            (
                "negatives_per_positive".into(),
                self.pathrank.negatives_per_positive.to_string(),
            ),
            ("min_support".into(), self.pathrank.min_support.to_string()),
            ("binarize".into(), self.pathrank.binarize.to_string()),
            ("kfold".into(), self.kfold.to_string()),
        ]
    }
}

pub fn parse_ratios(value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .with_context(|| format!("bad ratio {p:?}"))
        })
        .collect()
}

pub fn parse_methods(value: &str) -> Result<Vec<Method>> {
    value
        .split(',')
        .map(|p| p.trim().parse::<Method>().map_err(anyhow::Error::msg))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_override() {
        let text = "\
            # experiment\n\
            dataset = data/graph.tsv\n\
            ratios = 0.1, 0.2\n\
            methods = transe,prge\n\
            protocol = same-relation\n\
            seed = 11\n\
            lambda = 3\n\
            lr = 0.02\n";
        let mut config = ExperimentConfig::parse(text).unwrap();
        assert_eq!(config.ratios, vec![0.1, 0.2]);
        assert_eq!(config.protocol, Protocol::SameRelation);
        assert_eq!(config.training.lambda, 3.0);
        assert_eq!(config.training.learning_rate, 0.02);

        let overrides = Overrides {
            seed: Some(99),
            lambda: Some(5.0),
            ..Default::default()
        };
        config.apply(&overrides);
        assert_eq!(config.seed, 99);
        assert_eq!(config.training.lambda, 5.0);
    }

    #[test]
    fn unknown_key_is_rejected() {
        assert!(ExperimentConfig::parse("no_such_key = 1\n").is_err());
    }

    #[test]
    fn finalize_requires_existing_dataset() {
        let mut config = ExperimentConfig::parse("dataset = /definitely/missing.tsv\n").unwrap();
        assert!(config.finalize().is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in [Method::TransE, Method::Prge, Method::PathrankOnly] {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
    }
}
