//! Expected utility over pseudo-reference lists, the per-decode pair cache
//! with utility-call accounting, and the scoring backends.

mod matrix;
mod remote;

use std::sync::Arc;

use std::collections::HashMap;

use crate::chrf::{chrf_pp, chrf_profiles, ChrfParams, ChrfProfile, NgramInterner};
use crate::corpus::{dedup, DedupView, Instance};
use crate::error::{MbrError, Result};

pub use matrix::{load_utility_matrices, MatrixBackend, UtilityMatrix};
pub use remote::{RemoteBackend, RemoteOptions};

/// One (hypothesis, pseudo-reference) pair sent to a backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScorePair<'a> {
    pub hypothesis: &'a str,
    pub reference: &'a str,
    pub source: Option<&'a str>,
}

/// The utility function u. Implementations must be deterministic: the same
/// pair always gets the same score.
pub trait UtilityBackend: Send + Sync {
    fn name(&self) -> &str;

    fn requires_source(&self) -> bool {
        false
    }

    /// Scores in the order of `pairs`.
    fn score_pairs(&self, pairs: &[ScorePair<'_>]) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, Default)]
pub struct ChrfBackend {
    pub params: ChrfParams,
}

impl ChrfBackend {
    pub fn new(params: ChrfParams) -> Self {
        ChrfBackend { params }
    }
}

impl UtilityBackend for ChrfBackend {
    fn name(&self) -> &str {
        "chrf++"
    }

    fn score_pairs(&self, pairs: &[ScorePair<'_>]) -> Result<Vec<f64>> {
        if pairs.len() == 1 {
            return Ok(vec![chrf_pp(pairs[0].hypothesis, pairs[0].reference, &self.params)]);
        }
        // Each distinct string is profiled once per batch.
        let mut interner = NgramInterner::default();
        let mut profiles: HashMap<&str, ChrfProfile> = HashMap::new();
        for p in pairs {
            for s in [p.hypothesis, p.reference] {
                if !profiles.contains_key(s) {
                    let prof = ChrfProfile::new(s, &self.params, &mut interner);
                    profiles.insert(s, prof);
                }
            }
        }
        Ok(pairs
            .iter()
            .map(|p| chrf_profiles(&profiles[p.hypothesis], &profiles[p.reference], &self.params))
            .collect())
    }
}

/// Token-level F1 over whitespace tokens, in [0, 1]; 1 when both sides are
/// empty. The bridge service's `mock-token-f1` metric computes the same
/// function, so it doubles as a local stand-in for remote scoring.
pub fn token_f1(hypothesis: &str, reference: &str) -> f64 {
    use std::collections::HashMap;
    let h: Vec<&str> = hypothesis.split_whitespace().collect();
    let r: Vec<&str> = reference.split_whitespace().collect();
    if h.is_empty() && r.is_empty() {
        return 1.0;
    }
    if h.is_empty() || r.is_empty() {
        return 0.0;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &r {
        *counts.entry(t).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in &h {
        if let Some(c) = counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / h.len() as f64;
    let rc = overlap as f64 / r.len() as f64;
    2.0 * p * rc / (p + rc)
}

#[derive(Debug, Clone, Default)]
pub struct TokenF1Backend;

impl UtilityBackend for TokenF1Backend {
    fn name(&self) -> &str {
        "mock-token-f1"
    }

    fn score_pairs(&self, pairs: &[ScorePair<'_>]) -> Result<Vec<f64>> {
        Ok(pairs
            .iter()
            .map(|p| token_f1(p.hypothesis, p.reference))
            .collect())
    }
}

/// Where each instance's backend comes from.
#[derive(Clone)]
pub enum UtilitySource {
    /// One backend for every instance.
    Shared(Arc<dyn UtilityBackend>),
    /// One offline matrix per instance.
    Matrices(Arc<Vec<UtilityMatrix>>),
}

impl UtilitySource {
    pub fn chrf(params: ChrfParams) -> Self {
        UtilitySource::Shared(Arc::new(ChrfBackend::new(params)))
    }

    /// Backend for the instance at `position` in the corpus.
    pub fn backend_for(&self, position: usize, instance: &Instance) -> Result<Arc<dyn UtilityBackend>> {
        match self {
            UtilitySource::Shared(b) => Ok(Arc::clone(b)),
            UtilitySource::Matrices(ms) => Ok(Arc::new(MatrixBackend::select(ms, position, instance)?)),
        }
    }

    pub fn name(&self) -> String {
        match self {
            UtilitySource::Shared(b) => b.name().to_string(),
            UtilitySource::Matrices(_) => "matrix".into(),
        }
    }

    /// Whether the backend can score pairs outside an instance's own lists
    /// (needed to score predictions against gold references).
    pub fn scores_any_pair(&self) -> bool {
        matches!(self, UtilitySource::Shared(_))
    }
}

/// An instance with its hypotheses and pool deduplicated.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub instance: &'a Instance,
    pub hyps: DedupView,
    pub pool: DedupView,
}

impl<'a> Problem<'a> {
    pub fn new(instance: &'a Instance) -> Self {
        Problem {
            instance,
            hyps: dedup(&instance.hypotheses),
            pool: dedup(&instance.pool),
        }
    }

    pub fn id(&self) -> &str {
        &self.instance.id
    }

    /// All unique hypothesis indices, in first-occurrence order.
    pub fn all_hypotheses(&self) -> Vec<usize> {
        (0..self.hyps.len()).collect()
    }
}

/// Scores of unique (hypothesis, reference) pairs for one decode. Entries are
/// written once and never change; `call_count` is the number of entries.
#[derive(Debug, Clone)]
pub struct UtilityCache {
    n_refs: usize,
    table: Vec<Option<f64>>,
    call_count: usize,
}

impl UtilityCache {
    pub fn new(n_hyps: usize, n_refs: usize) -> Self {
        UtilityCache {
            n_refs,
            table: vec![None; n_hyps * n_refs],
            call_count: 0,
        }
    }

    pub fn get(&self, hyp: usize, reference: usize) -> Option<f64> {
        self.table[hyp * self.n_refs + reference]
    }

    fn insert(&mut self, hyp: usize, reference: usize, score: f64) -> Result<()> {
        let slot = &mut self.table[hyp * self.n_refs + reference];
        if slot.is_some() {
            return Err(MbrError::Internal(format!(
                "pair ({hyp}, {reference}) scored twice"
            )));
        }
        *slot = Some(score);
        self.call_count += 1;
        Ok(())
    }

    pub fn call_count(&self) -> usize {
        self.call_count
    }

    /// Number of occupied entries, counted from the table itself.
    pub fn occupancy(&self) -> usize {
        self.table.iter().filter(|s| s.is_some()).count()
    }
}

/// Mean in list order. Every expected-utility value goes through this so
/// equal score lists always produce bit-equal means.
pub fn ordered_mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut s = 0.0;
    let mut n = 0usize;
    for v in values {
        s += v;
        n += 1;
    }
    s / n as f64
}

/// A backend plus the cache it fills during one decode.
pub struct Scorer<'p, 'a> {
    problem: &'p Problem<'a>,
    backend: &'p dyn UtilityBackend,
    cache: UtilityCache,
}

impl<'p, 'a> Scorer<'p, 'a> {
    pub fn new(problem: &'p Problem<'a>, backend: &'p dyn UtilityBackend) -> Self {
        Scorer {
            problem,
            backend,
            cache: UtilityCache::new(problem.hyps.len(), problem.pool.len()),
        }
    }

    pub fn problem(&self) -> &'p Problem<'a> {
        self.problem
    }

    pub fn cache(&self) -> &UtilityCache {
        &self.cache
    }

    pub fn call_count(&self) -> usize {
        self.cache.call_count()
    }

    /// Score every missing (hypothesis, reference) pair for the given unique
    /// hypotheses and pool positions. Returns the number of new calls.
    pub fn ensure(&mut self, hyps: &[usize], positions: &[usize]) -> Result<usize> {
        let mut refs: Vec<usize> = positions.iter().map(|&p| self.problem.pool.index_of[p]).collect();
        refs.sort_unstable();
        refs.dedup();

        let source = self.problem.instance.source.as_deref();
        if self.backend.requires_source() && source.is_none() {
            return Err(MbrError::validation(format!(
                "instance `{}`: utility `{}` requires a source sentence",
                self.problem.id(),
                self.backend.name()
            )));
        }
        let mut missing = Vec::new();
        for &h in hyps {
            for &r in &refs {
                if self.cache.get(h, r).is_none() {
                    missing.push((h, r));
                }
            }
        }
        if missing.is_empty() {
            return Ok(0);
        }
        let pairs: Vec<ScorePair<'_>> = missing
            .iter()
            .map(|&(h, r)| ScorePair {
                hypothesis: &self.problem.hyps.unique_items[h],
                reference: &self.problem.pool.unique_items[r],
                source,
            })
            .collect();
        let scores = self
            .backend
            .score_pairs(&pairs)
            .map_err(|e| e.in_instance(self.problem.id()))?;
        if scores.len() != pairs.len() {
            return Err(MbrError::Protocol(format!(
                "instance `{}`: backend `{}` returned {} scores for {} pairs",
                self.problem.id(),
                self.backend.name(),
                scores.len(),
                pairs.len()
            )));
        }
        for (&(h, r), &s) in missing.iter().zip(&scores) {
            if !s.is_finite() {
                return Err(MbrError::Backend {
                    backend: self.backend.name().to_string(),
                    message: format!(
                        "instance `{}`: non-finite score {s} for pair ({:?}, {:?})",
                        self.problem.id(),
                        self.problem.hyps.unique_items[h],
                        self.problem.pool.unique_items[r]
                    ),
                });
            }
            self.cache.insert(h, r, s)?;
        }
        Ok(missing.len())
    }

    /// Cached score of unique hypothesis `hyp` against pool position `pos`.
    pub fn cached(&self, hyp: usize, pos: usize) -> Result<f64> {
        let r = self.problem.pool.index_of[pos];
        self.cache.get(hyp, r).ok_or_else(|| {
            MbrError::Internal(format!(
                "instance `{}`: pair (hyp {hyp}, pool position {pos}) is not cached",
                self.problem.id()
            ))
        })
    }

    /// U(y, R): mean of u(y, r) over the positions of R, duplicates counted
    /// by occurrence. Scores missing pairs first.
    pub fn expected_utility(&mut self, hyp: usize, positions: &[usize]) -> Result<f64> {
        if positions.is_empty() {
            return Err(MbrError::validation("expected utility over an empty reference list"));
        }
        self.ensure(&[hyp], positions)?;
        self.cached_expected_utility(hyp, positions)
    }

    /// U(y, R) from cached scores only.
    pub fn cached_expected_utility(&self, hyp: usize, positions: &[usize]) -> Result<f64> {
        let row = self.row(hyp, positions)?;
        Ok(ordered_mean(row.into_iter()))
    }

    /// Scores of `hyp` against each position, in list order.
    pub fn row(&self, hyp: usize, positions: &[usize]) -> Result<Vec<f64>> {
        positions.iter().map(|&p| self.cached(hyp, p)).collect()
    }

    /// (U(y, R̂), U(incumbent, R̂)) where R̂ picks entries of `positions` by
    /// the indices in `resample`. Never scores anything new.
    pub fn expected_utility_on_resample(
        &self,
        hyp: usize,
        incumbent: usize,
        positions: &[usize],
        resample: &[u32],
    ) -> Result<(f64, f64)> {
        let y = self.row(hyp, positions)?;
        let inc = self.row(incumbent, positions)?;
        Ok((
            ordered_mean(resample.iter().map(|&i| y[i as usize])),
            ordered_mean(resample.iter().map(|&i| inc[i as usize])),
        ))
    }
}

/// Scores for every unique pair of a problem, computed once and served back
/// by string lookup. Used by the evaluation harness so the oracle pass and
/// every subsequent decode of the same instance share one set of scores.
pub struct PrecomputedBackend {
    name: String,
    hyp_index: std::collections::HashMap<String, usize>,
    ref_index: std::collections::HashMap<String, usize>,
    n_refs: usize,
    scores: Vec<f64>,
}

impl PrecomputedBackend {
    /// Builds from a scorer whose cache covers every unique pair.
    pub fn from_full_cache(scorer: &Scorer<'_, '_>) -> Result<Self> {
        let p = scorer.problem();
        let n_refs = p.pool.len();
        let mut scores = Vec::with_capacity(p.hyps.len() * n_refs);
        for h in 0..p.hyps.len() {
            for r in 0..n_refs {
                scores.push(scorer.cache().get(h, r).ok_or_else(|| {
                    MbrError::Internal("precomputed table is incomplete".into())
                })?);
            }
        }
        Ok(PrecomputedBackend {
            name: scorer.backend.name().to_string(),
            hyp_index: p
                .hyps
                .unique_items
                .iter()
                .enumerate()
                .map(|(i, s)| (s.clone(), i))
                .collect(),
            ref_index: p
                .pool
                .unique_items
                .iter()
                .enumerate()
                .map(|(i, s)| (s.clone(), i))
                .collect(),
            n_refs,
            scores,
        })
    }
}

impl UtilityBackend for PrecomputedBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn score_pairs(&self, pairs: &[ScorePair<'_>]) -> Result<Vec<f64>> {
        pairs
            .iter()
            .map(|p| {
                match (self.hyp_index.get(p.hypothesis), self.ref_index.get(p.reference)) {
                    (Some(&h), Some(&r)) => Ok(self.scores[h * self.n_refs + r]),
                    _ => Err(MbrError::Internal(format!(
                        "pair ({:?}, {:?}) is outside the precomputed table",
                        p.hypothesis, p.reference
                    ))),
                }
            })
            .collect()
    }
}
