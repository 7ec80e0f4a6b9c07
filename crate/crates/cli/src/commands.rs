use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use prune_mbr::chart::{chart_from_csv, ChartSpec};
use prune_mbr::chrf::ChrfParams;
use prune_mbr::config::{parse_float_grid, parse_usize_list, DecodeConfig, Method, Schedule};
use prune_mbr::corpus::{load_corpus, write_corpus, Instance};
use prune_mbr::eval::{
    false_pruning_rate, generate_synthetic, summarize, survival_trace, tradeoff_sweep, GridSpec, ScoreMode,
    SynthParams,
};
use prune_mbr::mbr::{decode, instance_stream};
use prune_mbr::report;
use prune_mbr::utility::{
    load_utility_matrices, ChrfBackend, Problem, RemoteBackend, RemoteOptions, Scorer, TokenF1Backend, UtilitySource,
};
use prune_mbr::{MbrError, Result};
use rayon::prelude::*;
use serde_json::json;

use crate::args::*;

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Decode(a) => with_jobs(a.run.jobs, || cmd_decode(&a)),
        Command::Sweep(a) => with_jobs(a.run.jobs, || cmd_sweep(&a)),
        Command::FalsePrune(a) => with_jobs(a.run.jobs, || cmd_false_prune(&a)),
        Command::Report(a) => with_jobs(a.run.jobs, || cmd_report(&a)),
        Command::Trace(a) => with_jobs(a.run.jobs, || cmd_trace(&a)),
        Command::Chart(a) => cmd_chart(&a),
        Command::Synth(a) => cmd_synth(&a),
    }
}

fn with_jobs<T>(jobs: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T>
where
    T: Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| MbrError::Internal(format!("thread pool: {e}")))?;
    pool.install(f)
}

fn chrf_params(u: &UtilityArgs) -> Result<ChrfParams> {
    let params = ChrfParams {
        char_order: u.chrf_char_order,
        word_order: u.chrf_word_order,
        beta: u.chrf_beta,
    };
    params.validate()?;
    Ok(params)
}

fn utility_source(u: &UtilityArgs) -> Result<UtilitySource> {
    let spec = u.utility.trim();
    match spec.split_once(':') {
        None if spec == "chrf" => Ok(UtilitySource::chrf(chrf_params(u)?)),
        None if spec == "mock" => Ok(UtilitySource::Shared(Arc::new(TokenF1Backend))),
        Some(("matrix", path)) => Ok(UtilitySource::Matrices(Arc::new(load_utility_matrices(path)?))),
        Some(("remote", url)) => {
            if !(u.remote_timeout > 0.0 && u.remote_timeout.is_finite()) {
                return Err(MbrError::validation("--remote-timeout must be positive"));
            }
            let options = RemoteOptions {
                timeout: Duration::from_secs_f64(u.remote_timeout),
                batch_size: u.remote_batch_size,
                attempts: u.remote_attempts,
                ..RemoteOptions::default()
            };
            Ok(UtilitySource::Shared(Arc::new(RemoteBackend::connect(url, options)?)))
        }
        _ => Err(MbrError::validation(format!(
            "--utility: unknown utility `{spec}` (expected chrf, mock, matrix:PATH or remote:URL)"
        ))),
    }
}

fn score_mode(s: &ScoreArgs, u: &UtilityArgs) -> Result<ScoreMode> {
    match s.score_metric.trim() {
        "utility" => Ok(ScoreMode::Utility),
        "chrf" => Ok(ScoreMode::Metric(Arc::new(ChrfBackend::new(chrf_params(u)?)))),
        "mock" => Ok(ScoreMode::Metric(Arc::new(TokenF1Backend))),
        "none" => Ok(ScoreMode::Off),
        other => Err(MbrError::validation(format!(
            "--score-metric: unknown metric `{other}` (expected utility, chrf, mock or none)"
        ))),
    }
}

fn flag<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        MbrError::Validation(m) => MbrError::Validation(format!("--{name}: {m}")),
        other => other,
    })
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s: OsString = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| MbrError::io(path, e))
}

fn load(run: &RunArgs) -> Result<(Vec<Instance>, UtilitySource)> {
    let corpus = load_corpus(&run.input)?;
    let source = utility_source(&run.utility)?;
    Ok((corpus, source))
}

fn cmd_decode(a: &DecodeArgs) -> Result<()> {
    let schedule = match a.refs {
        Some(n) => flag("refs", Schedule::new(vec![n]))?,
        None => a.schedule.clone(),
    };
    let config = DecodeConfig {
        method: a.method,
        n_boot: a.run.n_boot,
        schedule,
        seed: a.run.seed,
        trials: a.trials,
    };
    config.validate()?;
    let (corpus, source) = load(&a.run)?;
    for inst in &corpus {
        config.schedule.check_pool(inst.pool.len(), &inst.id)?;
    }

    let lines: Vec<Vec<String>> = corpus
        .par_iter()
        .enumerate()
        .map(|(pos, inst)| -> Result<Vec<String>> {
            let problem = Problem::new(inst);
            let backend = source.backend_for(pos, inst)?;
            (0..config.trials)
                .map(|trial| {
                    let mut scorer = Scorer::new(&problem, backend.as_ref());
                    let stream = instance_stream(config.seed, trial, &inst.id);
                    let result = decode(&mut scorer, &config, &stream).map_err(|e| e.in_instance(&inst.id))?;
                    let line = json!({
                        "id": inst.id,
                        "trial": trial,
                        "prediction": result.prediction,
                        "prediction_index": result.prediction_index,
                        "total_calls": result.total_calls,
                        "pseudo_refs_used": result.pseudo_refs_used,
                        "terminated_early": result.terminated_early,
                        "steps": result.steps,
                    });
                    Ok(line.to_string())
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut text = String::new();
    for line in lines.iter().flatten() {
        text.push_str(line);
        text.push('\n');
    }
    match &a.output {
        Some(path) => write(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let alphas = flag("alphas", parse_float_grid(&a.alphas))?;
    let betas = flag("betas", parse_float_grid(&a.betas))?;
    let score = score_mode(&a.score, &a.run.utility)?;
    let (corpus, source) = load(&a.run)?;
    let report = tradeoff_sweep(
        &corpus,
        &alphas,
        &betas,
        &a.schedule,
        a.run.n_boot,
        a.trials,
        &source,
        a.run.seed,
        &score,
    )?;
    write(&with_suffix(&a.out, ".csv"), &report::sweep_aggregate_csv(&report))?;
    write(&with_suffix(&a.out, ".trials.csv"), &report::sweep_trials_csv(&report))?;
    write(&with_suffix(&a.out, ".json"), &report::to_json(&report)?)?;
    if let Some(note) = &report.score_note {
        eprintln!("note: score column left empty: {note}");
    }
    Ok(())
}

fn cmd_false_prune(a: &FalsePruneArgs) -> Result<()> {
    let alphas = flag("alphas", parse_float_grid(&a.alphas))?;
    let sizes = flag("sizes", parse_usize_list(&a.sizes))?;
    let (corpus, source) = load(&a.run)?;
    let report = false_pruning_rate(&corpus, &alphas, &sizes, a.run.n_boot, a.trials, &source, a.run.seed)?;
    write(&with_suffix(&a.out, ".csv"), &report::false_prune_aggregate_csv(&report))?;
    write(&with_suffix(&a.out, ".trials.csv"), &report::false_prune_trials_csv(&report))?;
    write(&with_suffix(&a.out, ".json"), &report::to_json(&report)?)?;
    Ok(())
}

fn cmd_report(a: &ReportArgs) -> Result<()> {
    let methods = a
        .configs
        .split(',')
        .map(|s| flag("configs", s.parse::<Method>()))
        .collect::<Result<Vec<_>>>()?;
    let score = score_mode(&a.score, &a.run.utility)?;
    let spec = GridSpec {
        methods,
        schedule: a.schedule.clone(),
        n_boot: a.run.n_boot,
        trials: a.trials,
        seed: a.run.seed,
    };
    let (corpus, source) = load(&a.run)?;
    let table = summarize(&corpus, &spec, &source, &score)?;
    if let Some(out) = &a.out {
        write(&with_suffix(out, ".csv"), &report::summary_csv(&table))?;
        write(&with_suffix(out, ".json"), &report::to_json(&table)?)?;
    }
    print!("{}", report::summary_text(&table));
    Ok(())
}

fn cmd_trace(a: &TraceArgs) -> Result<()> {
    let config = DecodeConfig {
        method: a.method,
        n_boot: a.run.n_boot,
        schedule: a.schedule.clone(),
        seed: a.run.seed,
        trials: a.trials,
    };
    let (corpus, source) = load(&a.run)?;
    let rows = survival_trace(&corpus, &config, &source)?;
    write(&with_suffix(&a.out, ".csv"), &report::trace_csv(&rows))?;
    write(&with_suffix(&a.out, ".json"), &report::to_json(&rows)?)?;
    Ok(())
}

fn cmd_chart(a: &ChartArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.input).map_err(|e| MbrError::io(&a.input, e))?;
    let spec = ChartSpec {
        x: a.x.clone(),
        y: a.y.clone(),
        series: a.series.clone(),
        title: a.title.clone(),
    };
    let svg = chart_from_csv(&text, &spec)?;
    write(&a.output, &svg)
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let corpus = generate_synthetic(&SynthParams {
        seed: a.seed,
        n_instances: a.n_instances,
        n_hypotheses: a.n_hypotheses,
        pool_size: a.pool_size,
        vocab_size: a.vocab_size,
        edit_rate: a.edit_rate,
    })?;
    write_corpus(&a.output, &corpus)
}
