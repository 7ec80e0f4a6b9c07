//! MBR decision rules: standard MBR, iterative pruning MBR, and the two
//! pruning functions (bootstrap confidence and rank-proportion).
//!
//! Hypotheses are identified by their unique index (first-occurrence order
//! in the instance's hypothesis list), so "smallest index" is the same as
//! "earliest position in the file". Every argmax breaks ties that way.

use serde::Serialize;

use crate::config::{DecodeConfig, Method, Schedule};
use crate::error::{MbrError, Result};
use crate::rng::{permute_pool, Resamples, RngStream};
use crate::utility::{ordered_mean, Scorer};

/// Largest list the exact win-probability enumeration accepts (8^8 resamples).
pub const EXACT_ENUMERATION_LIMIT: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StepTrace {
    /// 1-based step index.
    pub t: usize,
    /// Pseudo-reference list size r_t.
    pub refs: usize,
    /// Hypotheses entering the step, |H_t|.
    pub hypotheses: usize,
    /// Hypotheses kept, |H_{t+1}|.
    pub surviving: usize,
    pub new_calls: usize,
    /// Unique index of the step's incumbent.
    pub incumbent: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecodeResult {
    pub prediction: String,
    /// Unique hypothesis index of the prediction.
    pub prediction_index: usize,
    pub steps: Vec<StepTrace>,
    pub total_calls: usize,
    pub pseudo_refs_used: usize,
    pub terminated_early: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pruned {
    /// Kept unique indices, ascending.
    pub kept: Vec<usize>,
    pub incumbent: usize,
}

/// Index of the largest value; ties go to the smallest hypothesis index.
fn argmax_by_value(hyps: &[usize], values: &[f64]) -> usize {
    let mut best = 0;
    for k in 1..hyps.len() {
        if values[k] > values[best] || (values[k] == values[best] && hyps[k] < hyps[best]) {
            best = k;
        }
    }
    hyps[best]
}

/// argmax_{y in H} U(y, R), scoring any missing pairs first.
pub fn argmax_utility(scorer: &mut Scorer<'_, '_>, hyps: &[usize], positions: &[usize]) -> Result<usize> {
    scorer.ensure(hyps, positions)?;
    argmax_cached(scorer, hyps, positions)
}

fn argmax_cached(scorer: &Scorer<'_, '_>, hyps: &[usize], positions: &[usize]) -> Result<usize> {
    if hyps.is_empty() || positions.is_empty() {
        return Err(MbrError::Internal("argmax over an empty set".into()));
    }
    let utils = hyps
        .iter()
        .map(|&h| scorer.cached_expected_utility(h, positions))
        .collect::<Result<Vec<_>>>()?;
    Ok(argmax_by_value(hyps, &utils))
}

/// Win rate of each row against row `incumbent`: the fraction of resamples
/// in which the row's mean is >= the incumbent's mean. `rows[i][j]` is the
/// score of hypothesis i against list position j; all resamples are shared
/// across rows.
pub fn win_rates(rows: &[Vec<f64>], incumbent: usize, resamples: &Resamples) -> Vec<f64> {
    let n = resamples.count();
    let mut wins = vec![0usize; rows.len()];
    for sample in resamples.iter() {
        let inc = ordered_mean(sample.iter().map(|&j| rows[incumbent][j as usize]));
        for (row, w) in rows.iter().zip(wins.iter_mut()) {
            let u = ordered_mean(sample.iter().map(|&j| row[j as usize]));
            if u >= inc {
                *w += 1;
            }
        }
    }
    wins.into_iter().map(|w| w as f64 / n as f64).collect()
}

/// Exact expectation of the win indicator over all |R|^|R| equally likely
/// with-replacement resamples.
pub fn exact_win_prob(scores: &[Vec<f64>], incumbent: usize) -> Result<Vec<f64>> {
    let m = scores
        .get(incumbent)
        .ok_or_else(|| MbrError::validation("incumbent row out of range"))?
        .len();
    if m == 0 || m > EXACT_ENUMERATION_LIMIT {
        return Err(MbrError::validation(format!(
            "exact enumeration needs 1 <= |R| <= {EXACT_ENUMERATION_LIMIT}, got {m}"
        )));
    }
    if scores.iter().any(|r| r.len() != m) {
        return Err(MbrError::validation("score rows differ in length"));
    }
    let total = m.pow(m as u32);
    let mut wins = vec![0usize; scores.len()];
    let mut digits = vec![0usize; m];
    for _ in 0..total {
        let inc = ordered_mean(digits.iter().map(|&j| scores[incumbent][j]));
        for (row, w) in scores.iter().zip(wins.iter_mut()) {
            if ordered_mean(digits.iter().map(|&j| row[j])) >= inc {
                *w += 1;
            }
        }
        for d in digits.iter_mut() {
            *d += 1;
            if *d < m {
                break;
            }
            *d = 0;
        }
    }
    Ok(wins.into_iter().map(|w| w as f64 / total as f64).collect())
}

/// Bootstrap win rates of every hypothesis in `hyps` against `incumbent`
/// over the list `positions`. Reads cached scores only.
pub fn bootstrap_win_rates(
    scorer: &Scorer<'_, '_>,
    hyps: &[usize],
    positions: &[usize],
    incumbent: usize,
    resamples: &Resamples,
) -> Result<Vec<f64>> {
    if resamples.list_len() != positions.len() {
        return Err(MbrError::Internal(format!(
            "resamples are over {} positions but the list has {}",
            resamples.list_len(),
            positions.len()
        )));
    }
    let inc_at = hyps
        .iter()
        .position(|&h| h == incumbent)
        .ok_or_else(|| MbrError::Internal("incumbent is not in the hypothesis set".into()))?;
    let rows = hyps
        .iter()
        .map(|&h| scorer.row(h, positions))
        .collect::<Result<Vec<_>>>()?;
    Ok(win_rates(&rows, inc_at, resamples))
}

/// Keep hypotheses whose bootstrap chance of matching or beating the
/// incumbent exceeds `1 - alpha`. Makes no utility calls.
pub fn prune_confidence(
    scorer: &Scorer<'_, '_>,
    hyps: &[usize],
    positions: &[usize],
    alpha: f64,
    resamples: &Resamples,
) -> Result<Pruned> {
    let incumbent = argmax_cached(scorer, hyps, positions)?;
    let w = bootstrap_win_rates(scorer, hyps, positions, incumbent, resamples)?;
    let threshold = 1.0 - alpha;
    let kept = hyps
        .iter()
        .zip(&w)
        .filter(|(_, &w)| w > threshold)
        .map(|(&h, _)| h)
        .collect();
    Ok(Pruned { kept, incumbent })
}

/// Number of hypotheses `prune_rank` keeps out of `n`.
pub fn rank_keep_count(n: usize, beta: f64) -> usize {
    let dropped = (beta * n as f64).floor() as usize;
    n.saturating_sub(dropped).max(1)
}

/// Drop the bottom `beta` proportion by U(y, R) (at least one survives).
pub fn prune_rank(scorer: &Scorer<'_, '_>, hyps: &[usize], positions: &[usize], beta: f64) -> Result<Pruned> {
    let utils = hyps
        .iter()
        .map(|&h| scorer.cached_expected_utility(h, positions))
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..hyps.len()).collect();
    order.sort_by(|&a, &b| utils[b].total_cmp(&utils[a]).then(hyps[a].cmp(&hyps[b])));
    let keep = rank_keep_count(hyps.len(), beta);
    let incumbent = hyps[order[0]];
    let mut kept: Vec<usize> = order[..keep].iter().map(|&k| hyps[k]).collect();
    kept.sort_unstable();
    Ok(Pruned { kept, incumbent })
}

fn finish(scorer: &Scorer<'_, '_>, prediction_index: usize, steps: Vec<StepTrace>, pseudo_refs_used: usize, terminated_early: bool) -> DecodeResult {
    DecodeResult {
        prediction: scorer.problem().hyps.unique_items[prediction_index].clone(),
        prediction_index,
        total_calls: steps.iter().map(|s| s.new_calls).sum(),
        steps,
        pseudo_refs_used,
        terminated_early,
    }
}

/// The trial's pool permutation; R_t is its first r_t entries.
pub fn trial_permutation(scorer: &Scorer<'_, '_>, stream: &RngStream) -> Vec<usize> {
    permute_pool(scorer.problem().pool.original_len(), &stream.derive("pool"))
}

/// Standard MBR: argmax over all hypotheses with the first `r_size` entries
/// of the trial permutation. `stream` is the (trial, instance) stream.
pub fn standard_mbr(scorer: &mut Scorer<'_, '_>, r_size: usize, stream: &RngStream) -> Result<DecodeResult> {
    let problem = scorer.problem();
    let pool_len = problem.pool.original_len();
    if r_size == 0 || r_size > pool_len {
        return Err(MbrError::validation(format!(
            "instance `{}`: {r_size} pseudo-references requested but the pool has {pool_len}",
            problem.id()
        )));
    }
    let perm = trial_permutation(scorer, stream);
    let positions = &perm[..r_size];
    let hyps = problem.all_hypotheses();
    let new_calls = scorer.ensure(&hyps, positions)?;
    let prediction = argmax_cached(scorer, &hyps, positions)?;
    let step = StepTrace {
        t: 1,
        refs: r_size,
        hypotheses: hyps.len(),
        surviving: hyps.len(),
        new_calls,
        incumbent: prediction,
    };
    Ok(finish(scorer, prediction, vec![step], r_size, false))
}

/// Iterative pruning MBR: grow the reference list along `schedule`, prune
/// after each growth, stop early once a single hypothesis remains, and
/// return the argmax under the last list built.
pub fn pruning_mbr(
    scorer: &mut Scorer<'_, '_>,
    method: Method,
    schedule: &Schedule,
    n_boot: usize,
    stream: &RngStream,
) -> Result<DecodeResult> {
    method.validate()?;
    let problem = scorer.problem();
    schedule.check_pool(problem.pool.original_len(), problem.id())?;
    if n_boot == 0 {
        return Err(MbrError::validation("n_boot must be >= 1"));
    }

    let mut hyps = problem.all_hypotheses();
    if hyps.len() == 1 {
        return Ok(finish(scorer, hyps[0], Vec::new(), 0, true));
    }
    let perm = trial_permutation(scorer, stream);
    let boot_stream = stream.derive("bootstrap");
    let mut steps = Vec::with_capacity(schedule.len());
    let mut last_size = 0;

    for (k, &r_t) in schedule.sizes().iter().enumerate() {
        if hyps.len() <= 1 {
            break;
        }
        let t = k + 1;
        let positions = &perm[..r_t];
        let new_calls = scorer.ensure(&hyps, positions)?;
        let pruned = match method {
            Method::Confidence { alpha } => {
                let resamples = Resamples::draw(r_t, n_boot, &boot_stream.derive(t));
                prune_confidence(scorer, &hyps, positions, alpha, &resamples)?
            }
            Method::Rank { beta } => prune_rank(scorer, &hyps, positions, beta)?,
            Method::Standard => Pruned {
                incumbent: argmax_cached(scorer, &hyps, positions)?,
                kept: hyps.clone(),
            },
        };
        debug_assert!(pruned.kept.contains(&pruned.incumbent));
        steps.push(StepTrace {
            t,
            refs: r_t,
            hypotheses: hyps.len(),
            surviving: pruned.kept.len(),
            new_calls,
            incumbent: pruned.incumbent,
        });
        hyps = pruned.kept;
        last_size = r_t;
    }

    let prediction = argmax_cached(scorer, &hyps, &perm[..last_size])?;
    let early = steps.len() < schedule.len();
    Ok(finish(scorer, prediction, steps, last_size, early))
}

/// Decode one instance for one trial according to `config` (its seed and
/// trial count are ignored; `stream` already identifies the trial).
pub fn decode(scorer: &mut Scorer<'_, '_>, config: &DecodeConfig, stream: &RngStream) -> Result<DecodeResult> {
    config.validate()?;
    match config.method {
        Method::Standard => standard_mbr(scorer, config.schedule.last(), stream),
        m => pruning_mbr(scorer, m, &config.schedule, config.n_boot, stream),
    }
}

/// The per-(trial, instance) stream every decoder expects.
pub fn instance_stream(base_seed: u64, trial: usize, instance_id: &str) -> RngStream {
    RngStream::for_trial(base_seed, trial).derive(instance_id)
}
