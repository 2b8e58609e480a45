//! File loading with the path attached to every failure.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use sha2::{Digest, Sha256};

use kgreason_core::embed::{EmbeddingModel, TrainConfig};
use kgreason_core::graph::load_triples;
use kgreason_core::paths::{load_path_types, DEFAULT_MAX_PATH_LEN};
use kgreason_core::reasons::{load_objective, ObjectiveSpec};
use kgreason_core::{EntityId, KnowledgeGraph, PathType, RelationId};

use crate::error::{CliError, CliResult};

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::in_file(path, e))
}

pub fn read_graph(path: &Path) -> CliResult<KnowledgeGraph> {
    load_triples(open(path)?).map_err(|e| CliError::in_file(path, e))
}

pub fn read_paths(path: &Path, g: &KnowledgeGraph) -> CliResult<Vec<PathType>> {
    load_path_types(open(path)?, g, DEFAULT_MAX_PATH_LEN).map_err(|e| CliError::in_file(path, e))
}

/// Loads a model and checks that it was trained on `g`'s vocabulary.
pub fn read_model(path: &Path, g: &KnowledgeGraph) -> CliResult<EmbeddingModel> {
    let m = EmbeddingModel::load(open(path)?).map_err(|e| CliError::in_file(path, e))?;
    m.check_matches(g).map_err(|e| CliError::in_file(path, e))?;
    Ok(m)
}

pub fn read_objective(path: &Path, g: &KnowledgeGraph) -> CliResult<ObjectiveSpec> {
    load_objective(open(path)?, g).map_err(|e| CliError::in_file(path, e))
}

pub fn read_train_config(path: &Path) -> CliResult<TrainConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::in_file(path, e))?;
    toml::from_str(&text).map_err(|e| CliError::Config {
        path: path.to_owned(),
        message: e.message().to_owned(),
    })
}

/// One entity label per line; blank lines and `#` comments skipped.
pub fn read_label_list(path: &Path, g: &KnowledgeGraph) -> CliResult<Vec<EntityId>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::in_file(path, e))?;
    let labels = text
        .lines()
        .map(|l| l.trim_end_matches('\r'))
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    resolve_labels(labels, g).map_err(|e| CliError::in_file(path, e))
}

/// Comma-separated entity labels.
pub fn parse_label_csv(list: &str, g: &KnowledgeGraph) -> CliResult<Vec<EntityId>> {
    Ok(resolve_labels(list.split(',').map(str::trim), g)?)
}

fn resolve_labels<'a>(
    labels: impl Iterator<Item = &'a str>,
    g: &KnowledgeGraph,
) -> kgreason_core::Result<Vec<EntityId>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for l in labels {
        let id = g.require_entity(l)?;
        if seen.insert(id) {
            out.push(id);
        }
    }
    Ok(out)
}

/// Distinct heads of `relation`, in id order.
pub fn heads_of(g: &KnowledgeGraph, relation: RelationId) -> Vec<EntityId> {
    g.triples()
        .iter()
        .filter(|t| t.relation == relation)
        .map(|t| t.head)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Distinct tails of `relation`, in id order.
pub fn tails_of(g: &KnowledgeGraph, relation: RelationId) -> Vec<EntityId> {
    g.triples()
        .iter()
        .filter(|t| t.relation == relation)
        .map(|t| t.tail)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let mut f = open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 8192];
    loop {
        let n = f.read(&mut buf).map_err(|e| CliError::in_file(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}
