//! Decoding instances, the JSON-lines corpus format, and exact-match deduplication.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{MbrError, Result};

/// One decoding problem: a hypothesis set and the pseudo-reference pool it is
/// decoded against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    /// Gold target, only used for scoring predictions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    pub hypotheses: Vec<String>,
    pub pool: Vec<String>,
}

impl Instance {
    pub fn validate(&self) -> Result<()> {
        if self.hypotheses.is_empty() {
            return Err(MbrError::validation(format!(
                "instance `{}` has no hypotheses",
                self.id
            )));
        }
        if self.pool.is_empty() {
            return Err(MbrError::validation(format!(
                "instance `{}` has an empty pseudo-reference pool",
                self.id
            )));
        }
        Ok(())
    }
}

/// Parse a JSON-lines corpus from memory. `origin` is used in error messages.
pub fn parse_corpus(text: &str, origin: &str) -> Result<Vec<Instance>> {
    let mut instances = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let inst: Instance = serde_json::from_str(line).map_err(|e| MbrError::Parse {
            path: origin.to_string(),
            line: lineno,
            message: e.to_string(),
        })?;
        inst.validate().map_err(|e| match e {
            MbrError::Validation(m) => MbrError::Validation(format!("{origin}:{lineno}: {m}")),
            e => e,
        })?;
        if !seen.insert(inst.id.clone()) {
            return Err(MbrError::validation(format!(
                "{origin}:{lineno}: duplicate instance id `{}`",
                inst.id
            )));
        }
        instances.push(inst);
    }
    Ok(instances)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Instance>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| MbrError::io(path, e))?;
    parse_corpus(&text, &path.display().to_string())
}

pub fn corpus_to_string(instances: &[Instance]) -> String {
    let mut out = String::new();
    for inst in instances {
        out.push_str(&serde_json::to_string(inst).expect("instance serializes"));
        out.push('\n');
    }
    out
}

pub fn write_corpus(path: impl AsRef<Path>, instances: &[Instance]) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| MbrError::io(path, e))?;
    f.write_all(corpus_to_string(instances).as_bytes())
        .map_err(|e| MbrError::io(path, e))
}

/// Exact-match deduplication of a string list, first occurrence kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DedupView {
    pub unique_items: Vec<String>,
    /// Original position -> unique index.
    pub index_of: Vec<usize>,
    /// Occurrence count per unique item.
    pub multiplicity: Vec<usize>,
    /// Unique index -> first original position.
    pub first_position: Vec<usize>,
}

impl DedupView {
    pub fn len(&self) -> usize {
        self.unique_items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unique_items.is_empty()
    }

    pub fn original_len(&self) -> usize {
        self.index_of.len()
    }

    pub fn reconstruct(&self) -> Vec<String> {
        self.index_of
            .iter()
            .map(|&u| self.unique_items[u].clone())
            .collect()
    }
}

pub fn dedup<S: AsRef<str>>(items: &[S]) -> DedupView {
    let mut lookup: HashMap<&str, usize> = HashMap::with_capacity(items.len());
    let mut view = DedupView {
        unique_items: Vec::new(),
        index_of: Vec::with_capacity(items.len()),
        multiplicity: Vec::new(),
        first_position: Vec::new(),
    };
    for (pos, item) in items.iter().enumerate() {
        let s = item.as_ref();
        let idx = *lookup.entry(s).or_insert_with(|| {
            view.unique_items.push(s.to_string());
            view.multiplicity.push(0);
            view.first_position.push(pos);
            view.unique_items.len() - 1
        });
        view.multiplicity[idx] += 1;
        view.index_of.push(idx);
    }
    view
}
