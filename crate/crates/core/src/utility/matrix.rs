//! Offline utility scores supplied as matrices.
//!
//! File format: one or more JSON objects (whitespace or newline separated),
//! each `{"id": optional string, "hypotheses": n, "references": m,
//! "scores": [n*m numbers, row-major]}`. Rows follow the instance's
//! hypothesis list and columns its pool, both in original (pre-dedup) order.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::{ScorePair, UtilityBackend};
use crate::corpus::Instance;
use crate::error::{MbrError, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct UtilityMatrix {
    #[serde(default)]
    pub id: Option<String>,
    pub hypotheses: usize,
    pub references: usize,
    // Deserialized through Option so JSON `null` (how NaN is usually
    // written) surfaces as a validation error rather than a parse error.
    scores: Vec<Option<f64>>,
}

impl UtilityMatrix {
    pub fn new(id: Option<String>, hypotheses: usize, references: usize, scores: Vec<f64>) -> Result<Self> {
        let m = UtilityMatrix {
            id,
            hypotheses,
            references,
            scores: scores.into_iter().map(Some).collect(),
        };
        m.validate()?;
        Ok(m)
    }

    fn label(&self) -> String {
        self.id.clone().unwrap_or_else(|| "<unnamed>".into())
    }

    pub fn validate(&self) -> Result<()> {
        if self.scores.len() != self.hypotheses * self.references {
            return Err(MbrError::validation(format!(
                "matrix `{}`: expected {}x{} = {} scores, found {}",
                self.label(),
                self.hypotheses,
                self.references,
                self.hypotheses * self.references,
                self.scores.len()
            )));
        }
        if let Some(k) = self.scores.iter().position(|s| !s.is_some_and(f64::is_finite)) {
            return Err(MbrError::validation(format!(
                "matrix `{}`: non-finite score at row {}, column {}",
                self.label(),
                k / self.references,
                k % self.references
            )));
        }
        Ok(())
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.scores[row * self.references + col].expect("validated")
    }

    pub fn to_json(&self) -> serde_json::Value {
        let scores: Vec<f64> = self.scores.iter().map(|s| s.expect("validated")).collect();
        let mut v = serde_json::json!({
            "hypotheses": self.hypotheses,
            "references": self.references,
            "scores": scores,
        });
        if let Some(id) = &self.id {
            v["id"] = serde_json::Value::String(id.clone());
        }
        v
    }
}

pub fn parse_utility_matrices(text: &str, origin: &str) -> Result<Vec<UtilityMatrix>> {
    let mut out = Vec::new();
    for (k, item) in serde_json::Deserializer::from_str(text)
        .into_iter::<UtilityMatrix>()
        .enumerate()
    {
        let m = item.map_err(|e| MbrError::Parse {
            path: origin.to_string(),
            line: e.line(),
            message: format!("matrix #{k}: {e}"),
        })?;
        m.validate()?;
        out.push(m);
    }
    if out.is_empty() {
        return Err(MbrError::validation(format!("{origin}: no matrices found")));
    }
    Ok(out)
}

pub fn load_utility_matrices(path: impl AsRef<Path>) -> Result<Vec<UtilityMatrix>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| MbrError::io(path, e))?;
    parse_utility_matrices(&text, &path.display().to_string())
}

/// Looks pairs up in one instance's matrix. Duplicate strings resolve to
/// their first row or column.
#[derive(Debug, Clone)]
pub struct MatrixBackend {
    matrix: UtilityMatrix,
    rows: HashMap<String, usize>,
    cols: HashMap<String, usize>,
}

impl MatrixBackend {
    pub fn new(matrix: UtilityMatrix, instance: &Instance) -> Result<Self> {
        if matrix.hypotheses != instance.hypotheses.len() || matrix.references != instance.pool.len() {
            return Err(MbrError::validation(format!(
                "instance `{}`: utility matrix is {}x{} but the instance has {} hypotheses and {} pool entries",
                instance.id,
                matrix.hypotheses,
                matrix.references,
                instance.hypotheses.len(),
                instance.pool.len()
            )));
        }
        let mut rows = HashMap::new();
        for (i, h) in instance.hypotheses.iter().enumerate() {
            rows.entry(h.clone()).or_insert(i);
        }
        let mut cols = HashMap::new();
        for (j, r) in instance.pool.iter().enumerate() {
            cols.entry(r.clone()).or_insert(j);
        }
        Ok(MatrixBackend { matrix, rows, cols })
    }

    /// Pick this instance's matrix from a loaded set: by `id` when the
    /// matrices carry ids, otherwise by position in the corpus.
    pub fn select(matrices: &[UtilityMatrix], position: usize, instance: &Instance) -> Result<Self> {
        let m = if matrices.iter().any(|m| m.id.is_some()) {
            matrices
                .iter()
                .find(|m| m.id.as_deref() == Some(instance.id.as_str()))
        } else {
            matrices.get(position)
        };
        let m = m.ok_or_else(|| {
            MbrError::validation(format!("no utility matrix for instance `{}`", instance.id))
        })?;
        MatrixBackend::new(m.clone(), instance)
    }
}

impl UtilityBackend for MatrixBackend {
    fn name(&self) -> &str {
        "matrix"
    }

    fn score_pairs(&self, pairs: &[ScorePair<'_>]) -> Result<Vec<f64>> {
        pairs
            .iter()
            .map(|p| match (self.rows.get(p.hypothesis), self.cols.get(p.reference)) {
                (Some(&i), Some(&j)) => Ok(self.matrix.get(i, j)),
                _ => Err(MbrError::Backend {
                    backend: "matrix".into(),
                    message: format!(
                        "pair ({:?}, {:?}) is not in the matrix's instance",
                        p.hypothesis, p.reference
                    ),
                }),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst() -> Instance {
        Instance {
            id: "m".into(),
            source: None,
            reference: None,
            hypotheses: vec!["h0".into(), "h1".into()],
            pool: vec!["r0".into(), "r1".into()],
        }
    }

    #[test]
    fn lookup() {
        let m = parse_utility_matrices(r#"{"hypotheses":2,"references":2,"scores":[1,0,0,1]}"#, "t")
            .unwrap()
            .remove(0);
        let b = MatrixBackend::new(m, &inst()).unwrap();
        let s = b
            .score_pairs(&[ScorePair {
                hypothesis: "h0",
                reference: "r1",
                source: None,
            }])
            .unwrap();
        assert_eq!(s, vec![0.0]);
    }

    #[test]
    fn nan_rejected() {
        // JSON has no NaN literal; producers typically write null.
        let r = parse_utility_matrices(r#"{"hypotheses":1,"references":2,"scores":[0.5,null]}"#, "t");
        assert!(matches!(r, Err(MbrError::Validation(m)) if m.contains("non-finite")));
        assert!(UtilityMatrix::new(None, 1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn dimension_mismatch_names_instance() {
        let m = UtilityMatrix::new(None, 1, 2, vec![0.0, 1.0]).unwrap();
        match MatrixBackend::new(m, &inst()) {
            Err(MbrError::Validation(msg)) => assert!(msg.contains("`m`")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn select_by_id_or_position() {
        let text = r#"{"id":"x","hypotheses":2,"references":2,"scores":[0,0,0,0]}
{"id":"m","hypotheses":2,"references":2,"scores":[1,2,3,4]}"#;
        let ms = parse_utility_matrices(text, "t").unwrap();
        let b = MatrixBackend::select(&ms, 0, &inst()).unwrap();
        assert_eq!(b.matrix.get(1, 1), 4.0);
    }
}
