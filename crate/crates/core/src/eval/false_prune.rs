use rayon::prelude::*;
use serde::Serialize;

use super::{check_pools, Prepared};
use crate::corpus::Instance;
use crate::error::{MbrError, Result};
use crate::mbr::{argmax_utility, bootstrap_win_rates, instance_stream, trial_permutation};
use crate::rng::Resamples;
use crate::stats::mean;
use crate::utility::UtilitySource;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FalsePruneCell {
    pub alpha: f64,
    pub size: usize,
    /// `None` in the aggregated view.
    pub trial: Option<usize>,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FalsePruneReport {
    pub utility: String,
    pub n_boot: usize,
    pub trials: usize,
    pub seed: u64,
    pub instances: usize,
    pub rows: Vec<FalsePruneCell>,
    pub aggregate: Vec<FalsePruneCell>,
}

impl FalsePruneReport {
    pub fn rate(&self, alpha: f64, size: usize) -> Option<f64> {
        self.aggregate
            .iter()
            .find(|c| c.alpha == alpha && c.size == size)
            .map(|c| c.rate)
    }
}

/// For each (instance, trial, size) sample R as a permutation prefix, take
/// the incumbent over the full hypothesis set, and record the full-pool
/// winner's bootstrap win rate. The winner counts as falsely pruned at
/// `alpha` when that rate is <= 1 - alpha. All alphas share the resamples.
#[allow(clippy::too_many_arguments)]
pub fn false_pruning_rate(
    corpus: &[Instance],
    alphas: &[f64],
    sizes: &[usize],
    n_boot: usize,
    trials: usize,
    source: &UtilitySource,
    seed: u64,
) -> Result<FalsePruneReport> {
    if alphas.is_empty() || sizes.is_empty() {
        return Err(MbrError::validation("alpha and size grids must be non-empty"));
    }
    if let Some(a) = alphas.iter().find(|&&a| !(a > 0.0 && a <= 1.0)) {
        return Err(MbrError::validation(format!("alpha must be in (0, 1], got {a}")));
    }
    if sizes.contains(&0) {
        return Err(MbrError::validation("sizes must be positive"));
    }
    if n_boot == 0 || trials == 0 {
        return Err(MbrError::validation("n_boot and trials must be >= 1"));
    }
    check_pools(corpus, *sizes.iter().max().unwrap())?;

    // win[instance][trial][size]
    let wins: Vec<Vec<Vec<f64>>> = corpus
        .par_iter()
        .enumerate()
        .map(|(pos, inst)| -> Result<Vec<Vec<f64>>> {
            let prep = Prepared::new(pos, inst, source)?;
            let hyps = prep.problem.all_hypotheses();
            let winner = prep.oracle.winner;
            (0..trials)
                .map(|trial| {
                    let stream = instance_stream(seed, trial, &inst.id);
                    let mut scorer = prep.scorer();
                    let perm = trial_permutation(&scorer, &stream);
                    sizes
                        .iter()
                        .map(|&s| {
                            let positions = &perm[..s];
                            let incumbent = argmax_utility(&mut scorer, &hyps, positions)?;
                            let resamples =
                                Resamples::draw(s, n_boot, &stream.derive("false-prune").derive(s));
                            let w = bootstrap_win_rates(&scorer, &[winner, incumbent], positions, incumbent, &resamples)?;
                            Ok(w[0])
                        })
                        .collect()
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut aggregate = Vec::new();
    for &alpha in alphas {
        for (k, &size) in sizes.iter().enumerate() {
            let per_trial: Vec<f64> = (0..trials)
                .map(|t| {
                    let pruned: Vec<f64> = wins
                        .iter()
                        .map(|w| if w[t][k] <= 1.0 - alpha { 1.0 } else { 0.0 })
                        .collect();
                    mean(&pruned)
                })
                .collect();
            for (t, &rate) in per_trial.iter().enumerate() {
                rows.push(FalsePruneCell {
                    alpha,
                    size,
                    trial: Some(t),
                    rate,
                });
            }
            aggregate.push(FalsePruneCell {
                alpha,
                size,
                trial: None,
                rate: mean(&per_trial),
            });
        }
    }
    Ok(FalsePruneReport {
        utility: source.name(),
        n_boot,
        trials,
        seed,
        instances: corpus.len(),
        rows,
        aggregate,
    })
}
