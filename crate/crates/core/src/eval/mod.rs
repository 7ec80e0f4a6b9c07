//! Measurement harness: full-pool oracle rankings, accuracy and reciprocal
//! rank, speed-accuracy sweeps, false-pruning rates, survival traces and
//! per-configuration summary tables.

mod false_prune;
mod sweep;
mod synth;

use std::sync::Arc;

use serde::Serialize;

use crate::corpus::Instance;
use crate::error::{MbrError, Result};
use crate::utility::{PrecomputedBackend, Problem, ScorePair, Scorer, UtilityBackend, UtilitySource};

pub use false_prune::{false_pruning_rate, FalsePruneCell, FalsePruneReport};
pub use sweep::{
    run_grid, summarize, survival_trace, trace_from_records, tradeoff_sweep, GridSpec, RunRecord, ScoreMode, SummaryTable,
    SweepReport, SweepRow, TraceRow,
};
pub use synth::{generate_synthetic, SynthParams};

/// Expected utility of every unique hypothesis against the whole pool.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRanking {
    pub utilities: Vec<f64>,
    /// Full-pool winner (ties to the earliest hypothesis).
    pub winner: usize,
    pub max: f64,
}

/// Scores every hypothesis against every pool entry (the |H|·|R*| pass).
pub fn oracle_ranking(scorer: &mut Scorer<'_, '_>) -> Result<OracleRanking> {
    let problem = scorer.problem();
    let hyps = problem.all_hypotheses();
    let positions: Vec<usize> = (0..problem.pool.original_len()).collect();
    scorer.ensure(&hyps, &positions)?;
    let utilities = hyps
        .iter()
        .map(|&h| scorer.cached_expected_utility(h, &positions))
        .collect::<Result<Vec<_>>>()?;
    let mut winner = 0;
    for (i, &u) in utilities.iter().enumerate() {
        if u > utilities[winner] {
            winner = i;
        }
    }
    Ok(OracleRanking {
        max: utilities[winner],
        winner,
        utilities,
    })
}

impl OracleRanking {
    /// Hypotheses whose full-pool utility is at least that of `hyp`.
    pub fn rank_of(&self, hyp: usize) -> usize {
        let u = self.utilities[hyp];
        self.utilities.iter().filter(|&&v| v >= u).count()
    }
}

/// 1 if the prediction attains the maximum full-pool expected utility (any
/// co-maximizer counts).
pub fn exact_accuracy(prediction: usize, oracle: &OracleRanking) -> f64 {
    if oracle.utilities[prediction] == oracle.max {
        1.0
    } else {
        0.0
    }
}

pub fn reciprocal_rank(prediction: usize, oracle: &OracleRanking) -> f64 {
    1.0 / oracle.rank_of(prediction) as f64
}

/// An instance ready for repeated decoding: deduplicated, fully scored once,
/// with its oracle ranking.
pub struct Prepared<'a> {
    pub position: usize,
    pub problem: Problem<'a>,
    pub table: PrecomputedBackend,
    pub oracle: OracleRanking,
    base: Arc<dyn UtilityBackend>,
}

impl<'a> Prepared<'a> {
    pub fn new(position: usize, instance: &'a Instance, source: &UtilitySource) -> Result<Self> {
        let problem = Problem::new(instance);
        let base = source.backend_for(position, instance)?;
        let (table, oracle) = {
            let mut scorer = Scorer::new(&problem, base.as_ref());
            let oracle = oracle_ranking(&mut scorer)?;
            (PrecomputedBackend::from_full_cache(&scorer)?, oracle)
        };
        Ok(Prepared {
            position,
            problem,
            table,
            oracle,
            base,
        })
    }

    /// Fresh scorer (empty cache) over the precomputed scores.
    pub fn scorer(&self) -> Scorer<'_, 'a> {
        Scorer::new(&self.problem, &self.table)
    }

    /// The instance's own utility backend, uncached.
    pub fn backend(&self) -> &dyn UtilityBackend {
        self.base.as_ref()
    }
}

/// Score `prediction` against the instance's gold reference.
pub(crate) fn score_prediction(
    backend: &dyn UtilityBackend,
    instance: &Instance,
    prediction: &str,
) -> Result<f64> {
    let gold = instance
        .reference
        .as_deref()
        .ok_or_else(|| MbrError::validation(format!("instance `{}` has no gold reference", instance.id)))?;
    let s = backend
        .score_pairs(&[ScorePair {
            hypothesis: prediction,
            reference: gold,
            source: instance.source.as_deref(),
        }])
        .map_err(|e| e.in_instance(&instance.id))?;
    s.first()
        .copied()
        .filter(|v| v.is_finite())
        .ok_or_else(|| MbrError::Protocol(format!("instance `{}`: bad score for prediction", instance.id)))
}

/// Fail fast if any instance's pool is smaller than `needed`.
pub(crate) fn check_pools(corpus: &[Instance], needed: usize) -> Result<()> {
    for inst in corpus {
        if inst.pool.len() < needed {
            return Err(MbrError::validation(format!(
                "instance `{}`: {needed} pseudo-references needed but the pool has {}",
                inst.id,
                inst.pool.len()
            )));
        }
    }
    Ok(())
}
