//! Plain-text file formats.
//!
//! Triple files are UTF-8, one `subject<TAB>relation<TAB>object` per line.
//! Noise labels live in a sidecar file with one `0`/`1` line per triple, so
//! the main file stays consumable by third-party tools. Splits are either
//! three triple files interned together or a single assignment file with
//! `triple-index<TAB>{train|valid|test}` lines.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{GraphBuilder, KgError, KnowledgeGraph, Split};

/// Ingestion statistics for one load.
#[derive(Debug, Clone, Copy, Default)]
pub struct LoadReport {
    pub lines_read: usize,
    pub duplicates_dropped: usize,
}

fn io_err(path: &Path, source: std::io::Error) -> KgError {
    KgError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> KgError {
    KgError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn check_label(label: &str) -> Result<(), KgError> {
    if label.is_empty() {
        return Err(KgError::InvalidLabel {
            label: label.to_owned(),
            reason: "empty label".into(),
        });
    }
    if label.contains('\t') || label.contains('\n') || label.contains('\r') {
        return Err(KgError::InvalidLabel {
            label: label.to_owned(),
            reason: "label contains tab or newline".into(),
        });
    }
    Ok(())
}

fn read_triples_into(builder: &mut GraphBuilder, path: &Path) -> Result<usize, KgError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut lines_read = 0;
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(parse_err(
                path,
                idx + 1,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        for f in &fields {
            if f.is_empty() {
                return Err(parse_err(path, idx + 1, "empty field"));
            }
        }
        builder.add_triple_labels(fields[0], fields[1], fields[2], false);
        lines_read += 1;
    }
    Ok(lines_read)
}

/// Loads one triple file. All triples get `is_noise = false`; duplicate lines
/// are dropped and counted in the report.
pub fn load_graph(path: impl AsRef<Path>) -> Result<(KnowledgeGraph, LoadReport), KgError> {
    let path = path.as_ref();
    let mut builder = KnowledgeGraph::builder();
    let lines_read = read_triples_into(&mut builder, path)?;
    if builder.is_empty() {
        return Err(KgError::EmptyFile(path.to_path_buf()));
    }
    let report = LoadReport {
        lines_read,
        duplicates_dropped: builder.duplicates_dropped(),
    };
    Ok((builder.build(), report))
}

/// Loads a triple file plus its noise-label sidecar.
pub fn load_graph_with_labels(
    graph_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<(KnowledgeGraph, LoadReport), KgError> {
    let graph_path = graph_path.as_ref();
    let (graph, report) = load_graph(graph_path)?;
    let labels = load_noise_labels(labels_path, graph.len())?;
    let mut builder = KnowledgeGraph::builder();
    for e in graph.entities().labels() {
        builder.add_entity(e);
    }
    for r in graph.relations().labels() {
        builder.add_relation(r);
    }
    for (t, &noisy) in graph.triples().iter().zip(labels.iter()) {
        let mut t = *t;
        t.is_noise = noisy;
        builder
            .add_triple(t)
            .expect("ids valid: copied from a built graph");
    }
    Ok((builder.build(), report))
}

/// Loads train/valid/test triple files into one graph with shared interning
/// (train first, then valid, then test).
pub fn load_split_files(
    train: impl AsRef<Path>,
    valid: impl AsRef<Path>,
    test: impl AsRef<Path>,
) -> Result<(KnowledgeGraph, Split, LoadReport), KgError> {
    let mut builder = KnowledgeGraph::builder();
    let mut report = LoadReport::default();
    let mut boundaries = Vec::with_capacity(3);
    for path in [train.as_ref(), valid.as_ref(), test.as_ref()] {
        report.lines_read += read_triples_into(&mut builder, path)?;
        boundaries.push(builder.len());
    }
    if builder.is_empty() {
        return Err(KgError::EmptyFile(train.as_ref().to_path_buf()));
    }
    report.duplicates_dropped = builder.duplicates_dropped();
    let split = Split {
        train: (0..boundaries[0]).collect(),
        validation: (boundaries[0]..boundaries[1]).collect(),
        test: (boundaries[1]..boundaries[2]).collect(),
    };
    Ok((builder.build(), split, report))
}

/// Writes the graph as a label TSV. Round-trips through [`load_graph`]:
/// labels, not ids, are the identity.
pub fn save_graph(graph: &KnowledgeGraph, path: impl AsRef<Path>) -> Result<(), KgError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for t in graph.triples() {
        let s = graph.entities().label(t.subject).expect("interned");
        let r = graph.relations().label(t.relation).expect("interned");
        let o = graph.entities().label(t.object).expect("interned");
        check_label(s)?;
        check_label(r)?;
        check_label(o)?;
        writeln!(w, "{s}\t{r}\t{o}").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Writes the noise-label sidecar: one `0`/`1` line per triple, same order as
/// the triple file.
pub fn save_noise_labels(graph: &KnowledgeGraph, path: impl AsRef<Path>) -> Result<(), KgError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for t in graph.triples() {
        writeln!(w, "{}", if t.is_noise { 1 } else { 0 }).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn load_noise_labels(path: impl AsRef<Path>, expected: usize) -> Result<Vec<bool>, KgError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut labels = Vec::with_capacity(expected);
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.is_empty() {
            continue;
        }
        match line.trim() {
            "0" => labels.push(false),
            "1" => labels.push(true),
            other => {
                return Err(parse_err(
                    path,
                    idx + 1,
                    format!("expected 0 or 1, found {other:?}"),
                ))
            }
        }
    }
    if labels.len() != expected {
        return Err(KgError::LabelCount {
            path: path.to_path_buf(),
            expected,
            found: labels.len(),
        });
    }
    Ok(labels)
}

/// Parses a split-assignment file: `triple-index<TAB>{train|valid|test}`.
pub fn load_split_assignment(
    path: impl AsRef<Path>,
    graph: &KnowledgeGraph,
) -> Result<Split, KgError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut split = Split::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.is_empty() {
            continue;
        }
        let (id, part) = line
            .split_once('\t')
            .ok_or_else(|| parse_err(path, idx + 1, "expected triple-index<TAB>part"))?;
        let id: usize = id
            .parse()
            .map_err(|_| parse_err(path, idx + 1, format!("bad triple index {id:?}")))?;
        match part {
            "train" => split.train.push(id),
            "valid" => split.validation.push(id),
            "test" => split.test.push(id),
            other => {
                return Err(parse_err(
                    path,
                    idx + 1,
                    format!("expected train/valid/test, found {other:?}"),
                ))
            }
        }
    }
    split.validate(graph)?;
    Ok(split)
}

pub fn save_split_assignment(split: &Split, path: impl AsRef<Path>) -> Result<(), KgError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for (name, ids) in [
        ("train", &split.train),
        ("valid", &split.validation),
        ("test", &split.test),
    ] {
        for &id in ids {
            writeln!(w, "{id}\t{name}").map_err(|e| io_err(path, e))?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}
