//! Model persistence.
//!
//! Two variants share one header vocabulary and round-trip losslessly.
//!
//! Binary layout (all integers little-endian):
//!
//! ```text
//! magic            8 bytes  b"PRGEMB1\n"
//! dim              u32
//! num_entities     u64
//! num_relations    u64
//! config_digest    u64      FNV-1a 64 of the canonical config string
//! epochs_trained   u32
//! has_best         u8       1 if best_validation present
//! best_validation  f64      0.0 when absent
//! config_len       u32
//! config           config_len bytes, canonical config UTF-8
//! entities         num_entities * dim * f32, row-major
//! relations        num_relations * dim * f32, row-major
//! ```
//!
//! The text variant is line-oriented: a header of `key<TAB>value` lines
//! (config keys prefixed `config.`), then one `e<TAB>...` line per entity row
//! and one `r<TAB>...` line per relation row with space-separated floats in
//! shortest round-trip notation.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{EmbedError, EmbeddingModel, TrainingConfig};

const MAGIC: &[u8; 8] = b"PRGEMB1\n";
const TEXT_MAGIC: &str = "prge-model\t1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelFormat {
    Binary,
    Text,
}

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> EmbedError + '_ {
    move |source| EmbedError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> EmbedError {
    EmbedError::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

impl EmbeddingModel {
    pub fn save(&self, path: impl AsRef<Path>, format: ModelFormat) -> Result<(), EmbedError> {
        match format {
            ModelFormat::Binary => self.save_binary(path.as_ref()),
            ModelFormat::Text => self.save_text(path.as_ref()),
        }
    }

    /// Reads either variant, detected from the leading bytes.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, EmbedError> {
        let path = path.as_ref();
        let mut file = File::open(path).map_err(io_err(path))?;
        let mut magic = [0u8; 8];
        let n = file.read(&mut magic).map_err(io_err(path))?;
        drop(file);
        if n == 8 && &magic == MAGIC {
            Self::load_binary(path)
        } else {
            Self::load_text(path)
        }
    }

    fn save_binary(&self, path: &Path) -> Result<(), EmbedError> {
        let err = io_err(path);
        let mut w = BufWriter::new(File::create(path).map_err(&err)?);
        let config = self.config().canonical_string();
        w.write_all(MAGIC).map_err(&err)?;
        w.write_all(&(self.dim() as u32).to_le_bytes())
            .map_err(&err)?;
        w.write_all(&(self.num_entities() as u64).to_le_bytes())
            .map_err(&err)?;
        w.write_all(&(self.num_relations() as u64).to_le_bytes())
            .map_err(&err)?;
        w.write_all(&fnv1a64(config.as_bytes()).to_le_bytes())
            .map_err(&err)?;
        w.write_all(&(self.epochs_trained() as u32).to_le_bytes())
            .map_err(&err)?;
        w.write_all(&[self.best_validation().is_some() as u8])
            .map_err(&err)?;
        w.write_all(&self.best_validation().unwrap_or(0.0).to_le_bytes())
            .map_err(&err)?;
        w.write_all(&(config.len() as u32).to_le_bytes())
            .map_err(&err)?;
        w.write_all(config.as_bytes()).map_err(&err)?;
        for id in 0..self.num_entities() {
            for &v in self.entity(id as u32) {
                w.write_all(&v.to_le_bytes()).map_err(&err)?;
            }
        }
        for id in 0..self.num_relations() {
            for &v in self.relation(id as u32) {
                w.write_all(&v.to_le_bytes()).map_err(&err)?;
            }
        }
        w.flush().map_err(&err)
    }

    fn load_binary(path: &Path) -> Result<Self, EmbedError> {
        let err = io_err(path);
        let mut r = BufReader::new(File::open(path).map_err(&err)?);
        let mut buf8 = [0u8; 8];
        let mut buf4 = [0u8; 4];
        let mut buf1 = [0u8; 1];

        r.read_exact(&mut buf8).map_err(&err)?;
        if &buf8 != MAGIC {
            return Err(format_err(path, "bad magic"));
        }
        r.read_exact(&mut buf4).map_err(&err)?;
        let dim = u32::from_le_bytes(buf4) as usize;
        r.read_exact(&mut buf8).map_err(&err)?;
        let num_entities = u64::from_le_bytes(buf8) as usize;
        r.read_exact(&mut buf8).map_err(&err)?;
        let num_relations = u64::from_le_bytes(buf8) as usize;
        r.read_exact(&mut buf8).map_err(&err)?;
        let digest = u64::from_le_bytes(buf8);
        r.read_exact(&mut buf4).map_err(&err)?;
        let epochs_trained = u32::from_le_bytes(buf4) as usize;
        r.read_exact(&mut buf1).map_err(&err)?;
        let has_best = buf1[0] == 1;
        r.read_exact(&mut buf8).map_err(&err)?;
        let best = f64::from_le_bytes(buf8);
        r.read_exact(&mut buf4).map_err(&err)?;
        let config_len = u32::from_le_bytes(buf4) as usize;
        let mut config_bytes = vec![0u8; config_len];
        r.read_exact(&mut config_bytes).map_err(&err)?;
        if fnv1a64(&config_bytes) != digest {
            return Err(format_err(path, "config digest mismatch"));
        }
        let config_text =
            String::from_utf8(config_bytes).map_err(|_| format_err(path, "config is not UTF-8"))?;
        let config = TrainingConfig::from_canonical_string(&config_text)?;
        if config.dim != dim {
            return Err(format_err(
                path,
                format!("header dim {dim} != config dim {}", config.dim),
            ));
        }

        let read_matrix = |r: &mut BufReader<File>, rows: usize| -> Result<Vec<f32>, EmbedError> {
            let mut data = vec![0f32; rows * dim];
            let mut buf = [0u8; 4];
            for v in data.iter_mut() {
                r.read_exact(&mut buf).map_err(&err)?;
                *v = f32::from_le_bytes(buf);
            }
            Ok(data)
        };
        let entities = read_matrix(&mut r, num_entities)?;
        let relations = read_matrix(&mut r, num_relations)?;
        let mut rest = [0u8; 1];
        if r.read(&mut rest).map_err(&err)? != 0 {
            return Err(format_err(path, "trailing bytes after matrices"));
        }

        Ok(EmbeddingModel {
            dim,
            entities,
            relations,
            config,
            epochs_trained,
            best_validation: has_best.then_some(best),
        })
    }

    fn save_text(&self, path: &Path) -> Result<(), EmbedError> {
        let err = io_err(path);
        let mut w = BufWriter::new(File::create(path).map_err(&err)?);
        writeln!(w, "{TEXT_MAGIC}").map_err(&err)?;
        writeln!(w, "dim\t{}", self.dim()).map_err(&err)?;
        writeln!(w, "entities\t{}", self.num_entities()).map_err(&err)?;
        writeln!(w, "relations\t{}", self.num_relations()).map_err(&err)?;
        writeln!(w, "epochs_trained\t{}", self.epochs_trained()).map_err(&err)?;
        match self.best_validation() {
            Some(v) => writeln!(w, "best_validation\t{v}").map_err(&err)?,
            None => writeln!(w, "best_validation\tnone").map_err(&err)?,
        }
        for line in self.config().canonical_string().lines() {
            let (key, value) = line.split_once('=').expect("canonical form");
            writeln!(w, "config.{key}\t{value}").map_err(&err)?;
        }
        for id in 0..self.num_entities() {
            let row: Vec<String> = self.entity(id as u32).iter().map(f32::to_string).collect();
            writeln!(w, "e\t{}", row.join(" ")).map_err(&err)?;
        }
        for id in 0..self.num_relations() {
            let row: Vec<String> = self
                .relation(id as u32)
                .iter()
                .map(f32::to_string)
                .collect();
            writeln!(w, "r\t{}", row.join(" ")).map_err(&err)?;
        }
        w.flush().map_err(&err)
    }

    fn load_text(path: &Path) -> Result<Self, EmbedError> {
        let err = io_err(path);
        let reader = BufReader::new(File::open(path).map_err(&err)?);
        let mut lines = reader.lines();
        let first = lines
            .next()
            .ok_or_else(|| format_err(path, "empty file"))?
            .map_err(&err)?;
        if first != TEXT_MAGIC {
            return Err(format_err(path, "not a model file"));
        }

        let mut dim = None;
        let mut num_entities = None;
        let mut num_relations = None;
        let mut epochs_trained = 0usize;
        let mut best_validation = None;
        let mut config_lines = String::new();
        let mut entities: Vec<f32> = Vec::new();
        let mut relations: Vec<f32> = Vec::new();

        for line in lines {
            let line = line.map_err(&err)?;
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('\t')
                .ok_or_else(|| format_err(path, format!("bad line {line:?}")))?;
            let parse_row = |value: &str| -> Result<Vec<f32>, EmbedError> {
                value
                    .split(' ')
                    .map(|v| {
                        v.parse::<f32>()
                            .map_err(|_| format_err(path, format!("bad float {v:?}")))
                    })
                    .collect()
            };
            match key {
                "dim" => {
                    dim = Some(
                        value
                            .parse::<usize>()
                            .map_err(|_| format_err(path, format!("bad dim {value:?}")))?,
                    )
                }
                "entities" => {
                    num_entities = Some(
                        value
                            .parse::<usize>()
                            .map_err(|_| format_err(path, format!("bad entity count {value:?}")))?,
                    )
                }
                "relations" => {
                    num_relations =
                        Some(value.parse::<usize>().map_err(|_| {
                            format_err(path, format!("bad relation count {value:?}"))
                        })?)
                }
                "epochs_trained" => {
                    epochs_trained = value
                        .parse()
                        .map_err(|_| format_err(path, format!("bad epoch count {value:?}")))?
                }
                "best_validation" => {
                    best_validation = match value {
                        "none" => None,
                        v => Some(v.parse::<f64>().map_err(|_| {
                            format_err(path, format!("bad validation value {v:?}"))
                        })?),
                    }
                }
                k if k.starts_with("config.") => {
                    config_lines.push_str(&k["config.".len()..]);
                    config_lines.push('=');
                    config_lines.push_str(value);
                    config_lines.push('\n');
                }
                "e" => entities.extend(parse_row(value)?),
                "r" => relations.extend(parse_row(value)?),
                other => return Err(format_err(path, format!("unknown key {other:?}"))),
            }
        }

        let dim = dim.ok_or_else(|| format_err(path, "missing dim"))?;
        let num_entities = num_entities.ok_or_else(|| format_err(path, "missing entity count"))?;
        let num_relations =
            num_relations.ok_or_else(|| format_err(path, "missing relation count"))?;
        let config = TrainingConfig::from_canonical_string(&config_lines)?;
        if config.dim != dim {
            return Err(format_err(
                path,
                format!("header dim {dim} != config dim {}", config.dim),
            ));
        }
        if entities.len() != num_entities * dim {
            return Err(format_err(
                path,
                format!(
                    "expected {} entity values, found {}",
                    num_entities * dim,
                    entities.len()
                ),
            ));
        }
        if relations.len() != num_relations * dim {
            return Err(format_err(
                path,
                format!(
                    "expected {} relation values, found {}",
                    num_relations * dim,
                    relations.len()
                ),
            ));
        }

        Ok(EmbeddingModel {
            dim,
            entities,
            relations,
            config,
            epochs_trained,
            best_validation,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_model() -> EmbeddingModel {
        let config = TrainingConfig {
            dim: 3,
            seed: 21,
            ..Default::default()
        };
        EmbeddingModel::init(5, 2, &config)
    }

    #[test]
    fn binary_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("model.bin");
        let model = sample_model();
        model.save(&p, ModelFormat::Binary).unwrap();
        let loaded = EmbeddingModel::load(&p).unwrap();
        assert_eq!(loaded, model);
    }

    #[test]
    fn text_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("model.txt");
        let model = sample_model();
        model.save(&p, ModelFormat::Text).unwrap();
        let loaded = EmbeddingModel::load(&p).unwrap();
        assert_eq!(loaded, model);
    }

    #[test]
    fn truncated_binary_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("model.bin");
        let model = sample_model();
        model.save(&p, ModelFormat::Binary).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 5]).unwrap();
        assert!(EmbeddingModel::load(&p).is_err());
    }

    #[test]
    fn corrupted_config_digest_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("model.bin");
        let model = sample_model();
        model.save(&p, ModelFormat::Binary).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        // flip a bit inside the digest field (offset 28)
        bytes[28] ^= 0xff;
        std::fs::write(&p, &bytes).unwrap();
        let err = EmbeddingModel::load(&p).unwrap_err();
        assert!(matches!(err, EmbedError::Format { .. }));
    }

    #[test]
    fn wn18_sized_dictionary_stores_all_entity_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("model.bin");
        let config = TrainingConfig {
            dim: 50,
            ..Default::default()
        };
        let model = EmbeddingModel::init(40_943, 18, &config);
        model.save(&p, ModelFormat::Binary).unwrap();
        let loaded = EmbeddingModel::load(&p).unwrap();
        assert_eq!(loaded.num_entities(), 40_943);
        assert_eq!(loaded.num_relations(), 18);
        assert_eq!(loaded.dim(), 50);
        let expected = 8
            + 4
            + 8
            + 8
            + 8
            + 4
            + 1
            + 8
            + 4
            + model.config().canonical_string().len()
            + (40_943 + 18) * 50 * 4;
        assert_eq!(std::fs::read(&p).unwrap().len(), expected);
    }
}
