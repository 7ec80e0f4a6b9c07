use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::{check_pools, exact_accuracy, reciprocal_rank, score_prediction, Prepared};
use crate::config::{DecodeConfig, Method, Schedule};
use crate::corpus::Instance;
use crate::error::{MbrError, Result};
use crate::mbr::{decode, instance_stream};
use crate::stats::{mean, quantile};
use crate::utility::{UtilityBackend, UtilitySource};

/// How predictions are scored against gold references.
#[derive(Clone)]
pub enum ScoreMode {
    /// With the utility itself (when it can score arbitrary pairs).
    Utility,
    /// With a dedicated metric.
    Metric(Arc<dyn UtilityBackend>),
    Off,
}

/// Everything a grid run needs besides the corpus and utility.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub methods: Vec<Method>,
    pub schedule: Schedule,
    pub n_boot: usize,
    pub trials: usize,
    pub seed: u64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(MbrError::validation("no decoding configurations given"));
        }
        for m in &self.methods {
            DecodeConfig {
                method: *m,
                n_boot: self.n_boot,
                schedule: self.schedule.clone(),
                seed: self.seed,
                trials: self.trials,
            }
            .validate()?;
        }
        Ok(())
    }
}

/// One decode of one instance under one configuration and trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub instance: usize,
    pub trial: usize,
    pub config: usize,
    pub prediction_index: usize,
    pub calls: usize,
    /// Cache occupancy after the decode; equals `calls`.
    pub cache_entries: usize,
    pub pseudo_refs: usize,
    pub accuracy: f64,
    pub rr: f64,
    pub score: Option<f64>,
    /// |H_{t+1}| for each executed step.
    pub surviving: Vec<usize>,
    pub terminated_early: bool,
}

/// Resolved scoring backend per instance, or the reason scores are omitted.
fn resolve_scoring(
    corpus: &[Instance],
    source: &UtilitySource,
    mode: &ScoreMode,
) -> std::result::Result<Option<ScoreMode>, String> {
    if matches!(mode, ScoreMode::Off) {
        return Err("scoring disabled".into());
    }
    if let Some(inst) = corpus.iter().find(|i| i.reference.is_none()) {
        return Err(format!("instance `{}` has no gold reference", inst.id));
    }
    if matches!(mode, ScoreMode::Utility) && !source.scores_any_pair() {
        return Err(format!("utility `{}` cannot score gold references", source.name()));
    }
    Ok(Some(mode.clone()))
}

/// Decode every instance under every method and trial. Instances run in
/// parallel; the returned records are ordered by (instance, trial, config)
/// regardless of scheduling. Returns the records and, if scores were
/// omitted, why.
pub fn run_grid(
    corpus: &[Instance],
    source: &UtilitySource,
    spec: &GridSpec,
    score: &ScoreMode,
) -> Result<(Vec<RunRecord>, Option<String>)> {
    spec.validate()?;
    check_pools(corpus, spec.schedule.last())?;
    let scoring = resolve_scoring(corpus, source, score);
    let note = scoring.as_ref().err().cloned();
    let scoring = scoring.ok().flatten();

    let per_instance: Vec<Vec<RunRecord>> = corpus
        .par_iter()
        .enumerate()
        .map(|(pos, inst)| run_instance(pos, inst, source, spec, scoring.as_ref()))
        .collect::<Result<_>>()?;
    Ok((per_instance.into_iter().flatten().collect(), note))
}

fn run_instance(
    pos: usize,
    inst: &Instance,
    source: &UtilitySource,
    spec: &GridSpec,
    scoring: Option<&ScoreMode>,
) -> Result<Vec<RunRecord>> {
    let prep = Prepared::new(pos, inst, source)?;
    let mut score_cache: HashMap<usize, f64> = HashMap::new();
    let mut out = Vec::with_capacity(spec.trials * spec.methods.len());
    for trial in 0..spec.trials {
        let stream = instance_stream(spec.seed, trial, &inst.id);
        for (c, &method) in spec.methods.iter().enumerate() {
            let config = DecodeConfig {
                method,
                n_boot: spec.n_boot,
                schedule: spec.schedule.clone(),
                seed: spec.seed,
                trials: spec.trials,
            };
            let mut scorer = prep.scorer();
            let r = decode(&mut scorer, &config, &stream)?;
            let score = match scoring {
                None | Some(ScoreMode::Off) => None,
                Some(mode) => {
                    let s = match score_cache.get(&r.prediction_index) {
                        Some(&s) => s,
                        None => {
                            let s = match mode {
                                ScoreMode::Metric(b) => score_prediction(b.as_ref(), inst, &r.prediction)?,
                                _ => score_prediction(prep.backend(), inst, &r.prediction)?,
                            };
                            score_cache.insert(r.prediction_index, s);
                            s
                        }
                    };
                    Some(s)
                }
            };
            out.push(RunRecord {
                instance: pos,
                trial,
                config: c,
                prediction_index: r.prediction_index,
                calls: r.total_calls,
                cache_entries: scorer.cache().occupancy(),
                pseudo_refs: r.pseudo_refs_used,
                accuracy: exact_accuracy(r.prediction_index, &prep.oracle),
                rr: reciprocal_rank(r.prediction_index, &prep.oracle),
                score,
                surviving: r.steps.iter().map(|s| s.surviving).collect(),
                terminated_early: r.terminated_early,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub config: String,
    pub method: String,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    /// `None` in the aggregated view.
    pub trial: Option<usize>,
    pub mean_calls: f64,
    pub mean_pseudo_refs: f64,
    pub score: Option<f64>,
    pub accuracy: f64,
    pub rr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub utility: String,
    pub schedule: Vec<usize>,
    pub n_boot: usize,
    pub trials: usize,
    pub seed: u64,
    pub instances: usize,
    /// Why the score column is empty, if it is.
    pub score_note: Option<String>,
    /// One row per (config, trial).
    pub rows: Vec<SweepRow>,
    /// One row per config, averaged over trials.
    pub aggregate: Vec<SweepRow>,
}

fn row_for(method: &Method, trial: Option<usize>, recs: &[&RunRecord]) -> SweepRow {
    let col = |f: &dyn Fn(&RunRecord) -> f64| mean(&recs.iter().map(|r| f(r)).collect::<Vec<_>>());
    let score = if recs.iter().all(|r| r.score.is_some()) {
        Some(col(&|r| r.score.unwrap()))
    } else {
        None
    };
    SweepRow {
        config: method.to_string(),
        method: method.family().to_string(),
        alpha: method.alpha(),
        beta: method.beta(),
        trial,
        mean_calls: col(&|r| r.calls as f64),
        mean_pseudo_refs: col(&|r| r.pseudo_refs as f64),
        score,
        accuracy: col(&|r| r.accuracy),
        rr: col(&|r| r.rr),
    }
}

fn mean_rows(method: &Method, rows: &[&SweepRow]) -> SweepRow {
    let col = |f: &dyn Fn(&SweepRow) -> f64| mean(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
    SweepRow {
        config: method.to_string(),
        method: method.family().to_string(),
        alpha: method.alpha(),
        beta: method.beta(),
        trial: None,
        mean_calls: col(&|r| r.mean_calls),
        mean_pseudo_refs: col(&|r| r.mean_pseudo_refs),
        score: if rows.iter().all(|r| r.score.is_some()) {
            Some(col(&|r| r.score.unwrap()))
        } else {
            None
        },
        accuracy: col(&|r| r.accuracy),
        rr: col(&|r| r.rr),
    }
}

impl SweepReport {
    /// Averages over instances within each trial, then over trials.
    pub fn from_records(
        records: &[RunRecord],
        spec: &GridSpec,
        utility: String,
        instances: usize,
        score_note: Option<String>,
    ) -> Self {
        let mut rows = Vec::new();
        let mut aggregate = Vec::new();
        for (c, method) in spec.methods.iter().enumerate() {
            let mut per_trial = Vec::new();
            for trial in 0..spec.trials {
                let recs: Vec<&RunRecord> = records
                    .iter()
                    .filter(|r| r.config == c && r.trial == trial)
                    .collect();
                per_trial.push(row_for(method, Some(trial), &recs));
            }
            aggregate.push(mean_rows(method, &per_trial.iter().collect::<Vec<_>>()));
            rows.extend(per_trial);
        }
        SweepReport {
            utility,
            schedule: spec.schedule.sizes().to_vec(),
            n_boot: spec.n_boot,
            trials: spec.trials,
            seed: spec.seed,
            instances,
            score_note,
            rows,
            aggregate,
        }
    }

    pub fn aggregate_for(&self, config: &str) -> Option<&SweepRow> {
        self.aggregate.iter().find(|r| r.config == config)
    }
}

/// Speed-accuracy sweep over confidence thresholds and rank proportions,
/// with standard MBR prepended as the anchor row.
#[allow(clippy::too_many_arguments)]
pub fn tradeoff_sweep(
    corpus: &[Instance],
    alphas: &[f64],
    betas: &[f64],
    schedule: &Schedule,
    n_boot: usize,
    trials: usize,
    source: &UtilitySource,
    seed: u64,
    score: &ScoreMode,
) -> Result<SweepReport> {
    let mut methods = vec![Method::Standard];
    methods.extend(alphas.iter().map(|&alpha| Method::Confidence { alpha }));
    methods.extend(betas.iter().filter(|&&b| b != 0.0).map(|&beta| Method::Rank { beta }));
    let spec = GridSpec {
        methods,
        schedule: schedule.clone(),
        n_boot,
        trials,
        seed,
    };
    let (records, note) = run_grid(corpus, source, &spec, score)?;
    Ok(SweepReport::from_records(&records, &spec, source.name(), corpus.len(), note))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: usize,
    pub refs: usize,
    pub mean: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub runs: usize,
}

/// Distribution of surviving-hypothesis counts after each step, over
/// instances and trials. A run that stopped early contributes its final
/// count to later steps; runs that never entered the loop contribute
/// nothing, and the trace ends at the last step any run executed.
pub fn trace_from_records(records: &[RunRecord], schedule: &Schedule) -> Vec<TraceRow> {
    let max_steps = records.iter().map(|r| r.surviving.len()).max().unwrap_or(0);
    (0..max_steps)
        .map(|k| {
            let vals: Vec<f64> = records
                .iter()
                .filter_map(|r| r.surviving.get(k).or(r.surviving.last()).map(|&s| s as f64))
                .collect();
            TraceRow {
                t: k + 1,
                refs: schedule.sizes()[k],
                mean: mean(&vals),
                q25: quantile(&vals, 0.25),
                median: quantile(&vals, 0.5),
                q75: quantile(&vals, 0.75),
                runs: vals.len(),
            }
        })
        .collect()
}

pub fn survival_trace(
    corpus: &[Instance],
    config: &DecodeConfig,
    source: &UtilitySource,
) -> Result<Vec<TraceRow>> {
    let spec = GridSpec {
        methods: vec![config.method],
        schedule: config.schedule.clone(),
        n_boot: config.n_boot,
        trials: config.trials,
        seed: config.seed,
    };
    let (records, _) = run_grid(corpus, source, &spec, &ScoreMode::Off)?;
    Ok(trace_from_records(&records, &config.schedule))
}

/// Rows Score / Accuracy / RR / # Pseudo-refs / # Utility calls, one column
/// per configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryTable {
    pub configs: Vec<String>,
    pub score: Option<Vec<f64>>,
    pub accuracy: Vec<f64>,
    pub rr: Vec<f64>,
    pub pseudo_refs: Vec<f64>,
    pub utility_calls: Vec<f64>,
    /// Mean cache occupancy per column (cross-check for `utility_calls`).
    pub cache_entries: Vec<f64>,
    pub score_note: Option<String>,
}

impl SummaryTable {
    pub const ROW_NAMES: [&'static str; 5] = ["Score", "Accuracy", "RR", "# Pseudo-refs", "# Utility calls"];

    pub fn rows(&self) -> Vec<(&'static str, Option<&[f64]>)> {
        vec![
            ("Score", self.score.as_deref()),
            ("Accuracy", Some(&self.accuracy[..])),
            ("RR", Some(&self.rr[..])),
            ("# Pseudo-refs", Some(&self.pseudo_refs[..])),
            ("# Utility calls", Some(&self.utility_calls[..])),
        ]
    }
}

pub fn summarize(
    corpus: &[Instance],
    spec: &GridSpec,
    source: &UtilitySource,
    score: &ScoreMode,
) -> Result<SummaryTable> {
    let (records, note) = run_grid(corpus, source, spec, score)?;
    let report = SweepReport::from_records(&records, spec, source.name(), corpus.len(), note.clone());
    let cache_entries = (0..spec.methods.len())
        .map(|c| {
            let per_trial: Vec<f64> = (0..spec.trials)
                .map(|t| {
                    let v: Vec<f64> = records
                        .iter()
                        .filter(|r| r.config == c && r.trial == t)
                        .map(|r| r.cache_entries as f64)
                        .collect();
                    mean(&v)
                })
                .collect();
            mean(&per_trial)
        })
        .collect();
    let agg = &report.aggregate;
    Ok(SummaryTable {
        configs: agg.iter().map(|r| r.config.clone()).collect(),
        score: agg.iter().map(|r| r.score).collect::<Option<Vec<_>>>(),
        accuracy: agg.iter().map(|r| r.accuracy).collect(),
        rr: agg.iter().map(|r| r.rr).collect(),
        pseudo_refs: agg.iter().map(|r| r.mean_pseudo_refs).collect(),
        utility_calls: agg.iter().map(|r| r.mean_calls).collect(),
        cache_entries,
        score_note: note,
    })
}
