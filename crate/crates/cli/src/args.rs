use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use prune_mbr::config::{Method, Schedule};
use prune_mbr::{MbrError, Result};
use serde_json::Value;

/// MBR decoding with confidence-based pruning, plus the sweeps and reports
/// used to evaluate it.
///
/// Every flag can also be set through an environment variable named
/// PRUNE_MBR_<FLAG> (e.g. PRUNE_MBR_SEED), or through a JSON object passed
/// with --config whose keys are flag names. Command-line flags win over the
/// config file, which wins over the environment.
#[derive(Debug, Parser)]
#[command(name = "prune-mbr", version, args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decode a corpus and write one JSON line per instance and trial.
    Decode(DecodeArgs),
    /// Speed-accuracy sweep over confidence thresholds and rank proportions.
    Sweep(SweepArgs),
    /// Rate at which the full-pool winner would be pruned, per threshold and sample size.
    FalsePrune(FalsePruneArgs),
    /// Score / Accuracy / RR / pseudo-reference / utility-call table for a few configurations.
    Report(ReportArgs),
    /// Distribution of surviving hypotheses after each pruning step.
    Trace(TraceArgs),
    /// Render an SVG line chart from a CSV report.
    Chart(ChartArgs),
    /// Write a seeded synthetic corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
pub struct UtilityArgs {
    /// Utility function: chrf, mock, matrix:PATH or remote:URL.
    #[arg(long, env = "PRUNE_MBR_UTILITY", default_value = "chrf")]
    pub utility: String,
    #[arg(long, env = "PRUNE_MBR_CHRF_CHAR_ORDER", default_value_t = 6)]
    pub chrf_char_order: usize,
    #[arg(long, env = "PRUNE_MBR_CHRF_WORD_ORDER", default_value_t = 2)]
    pub chrf_word_order: usize,
    #[arg(long, env = "PRUNE_MBR_CHRF_BETA", default_value_t = 2.0)]
    pub chrf_beta: f64,
    /// Per-request timeout for a remote utility, in seconds.
    #[arg(long, env = "PRUNE_MBR_REMOTE_TIMEOUT", default_value_t = 60.0)]
    pub remote_timeout: f64,
    /// Pairs per request for a remote utility.
    #[arg(long, env = "PRUNE_MBR_REMOTE_BATCH_SIZE", default_value_t = 256)]
    pub remote_batch_size: usize,
    /// Attempts per request for a remote utility, including the first.
    #[arg(long, env = "PRUNE_MBR_REMOTE_ATTEMPTS", default_value_t = 3)]
    pub remote_attempts: usize,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Corpus in JSON-lines form.
    #[arg(long, short, env = "PRUNE_MBR_INPUT")]
    pub input: PathBuf,
    #[arg(long, env = "PRUNE_MBR_SEED", default_value_t = 1)]
    pub seed: u64,
    #[arg(long, env = "PRUNE_MBR_N_BOOT", default_value_t = prune_mbr::config::DEFAULT_N_BOOT)]
    pub n_boot: usize,
    /// Worker threads; 0 uses every core. Output does not depend on it.
    #[arg(long, env = "PRUNE_MBR_JOBS", default_value_t = 0)]
    pub jobs: usize,
    #[command(flatten)]
    pub utility: UtilityArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ScoreArgs {
    /// Metric for scoring predictions against gold references: utility
    /// (the decoding utility), chrf, mock or none.
    #[arg(long, env = "PRUNE_MBR_SCORE_METRIC", default_value = "utility")]
    pub score_metric: String,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// standard, confidence:<alpha> or rank:<beta>.
    #[arg(long, env = "PRUNE_MBR_METHOD", default_value = "confidence:0.99")]
    pub method: Method,
    /// Pseudo-reference sample sizes, comma separated and increasing.
    #[arg(long, env = "PRUNE_MBR_SCHEDULE", default_value = "16,32,64,128,256", conflicts_with = "refs")]
    pub schedule: Schedule,
    /// Single sample size; shorthand for a one-step schedule.
    #[arg(long, env = "PRUNE_MBR_REFS")]
    pub refs: Option<usize>,
    #[arg(long, env = "PRUNE_MBR_TRIALS", default_value_t = 1)]
    pub trials: usize,
    /// Output file; standard output when omitted.
    #[arg(long, short, env = "PRUNE_MBR_OUTPUT")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub score: ScoreArgs,
    /// Confidence thresholds: comma list or start:stop:step.
    #[arg(long, env = "PRUNE_MBR_ALPHAS", default_value = "0.8,0.9,0.95,0.98,0.99")]
    pub alphas: String,
    /// Rank proportions: comma list or start:stop:step. Standard MBR is always included.
    #[arg(long, env = "PRUNE_MBR_BETAS", default_value = "0.05:0.95:0.05")]
    pub betas: String,
    #[arg(long, env = "PRUNE_MBR_SCHEDULE", default_value = "16,32,64,128,256")]
    pub schedule: Schedule,
    #[arg(long, env = "PRUNE_MBR_TRIALS", default_value_t = 10)]
    pub trials: usize,
    /// Writes PREFIX.csv (aggregated), PREFIX.trials.csv and PREFIX.json.
    #[arg(long, env = "PRUNE_MBR_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FalsePruneArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, env = "PRUNE_MBR_ALPHAS", default_value = "0.8,0.9,0.99")]
    pub alphas: String,
    /// Pseudo-reference sample sizes, comma separated.
    #[arg(long, env = "PRUNE_MBR_SIZES", default_value = "8,16,32,64,128,256")]
    pub sizes: String,
    #[arg(long, env = "PRUNE_MBR_TRIALS", default_value_t = 10)]
    pub trials: usize,
    /// Writes PREFIX.csv (aggregated), PREFIX.trials.csv and PREFIX.json.
    #[arg(long, env = "PRUNE_MBR_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub score: ScoreArgs,
    /// Method specs, comma separated; one table column each.
    #[arg(long, env = "PRUNE_MBR_CONFIGS", default_value = "standard,confidence:0.99,confidence:0.9")]
    pub configs: String,
    #[arg(long, env = "PRUNE_MBR_SCHEDULE", default_value = "16,32,64,128,256")]
    pub schedule: Schedule,
    #[arg(long, env = "PRUNE_MBR_TRIALS", default_value_t = 10)]
    pub trials: usize,
    /// Writes PREFIX.csv and PREFIX.json; the table is also printed.
    #[arg(long, env = "PRUNE_MBR_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, env = "PRUNE_MBR_METHOD", default_value = "confidence:0.99")]
    pub method: Method,
    #[arg(long, env = "PRUNE_MBR_SCHEDULE", default_value = "16,32,64,128,256")]
    pub schedule: Schedule,
    #[arg(long, env = "PRUNE_MBR_TRIALS", default_value_t = 10)]
    pub trials: usize,
    /// Writes PREFIX.csv and PREFIX.json.
    #[arg(long, env = "PRUNE_MBR_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ChartArgs {
    /// CSV report written by this tool.
    #[arg(long, short, env = "PRUNE_MBR_INPUT")]
    pub input: PathBuf,
    #[arg(long, short, env = "PRUNE_MBR_OUTPUT")]
    pub output: PathBuf,
    #[arg(long, env = "PRUNE_MBR_X", default_value = "mean_calls")]
    pub x: String,
    #[arg(long, env = "PRUNE_MBR_Y", default_value = "accuracy")]
    pub y: String,
    /// Column that names each point's series.
    #[arg(long, env = "PRUNE_MBR_SERIES", default_value = "method")]
    pub series: String,
    #[arg(long, env = "PRUNE_MBR_TITLE", default_value = "")]
    pub title: String,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, short, env = "PRUNE_MBR_OUTPUT")]
    pub output: PathBuf,
    #[arg(long, env = "PRUNE_MBR_SEED", default_value_t = 1)]
    pub seed: u64,
    #[arg(long, env = "PRUNE_MBR_N_INSTANCES", default_value_t = 50)]
    pub n_instances: usize,
    #[arg(long, env = "PRUNE_MBR_N_HYPOTHESES", default_value_t = 64)]
    pub n_hypotheses: usize,
    #[arg(long, env = "PRUNE_MBR_POOL_SIZE", default_value_t = 256)]
    pub pool_size: usize,
    #[arg(long, env = "PRUNE_MBR_VOCAB_SIZE", default_value_t = 1000)]
    pub vocab_size: usize,
    #[arg(long, env = "PRUNE_MBR_EDIT_RATE", default_value_t = 0.15)]
    pub edit_rate: f64,
}

/// Replaces `--config FILE` with the flags it holds, placed right after the
/// subcommand so that flags given on the command line override them.
pub fn expand_config(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(pos) = argv.iter().position(|a| a == "--config" || a.to_string_lossy().starts_with("--config=")) else {
        return Ok(argv);
    };
    let arg = argv[pos].to_string_lossy().into_owned();
    let (path, consumed) = match arg.strip_prefix("--config=") {
        Some(p) => (p.to_string(), 1),
        None => match argv.get(pos + 1) {
            Some(p) => (p.to_string_lossy().into_owned(), 2),
            None => return Err(MbrError::validation("--config needs a file path")),
        },
    };
    let text = std::fs::read_to_string(&path).map_err(|e| MbrError::io(&path, e))?;
    let flags = config_flags(&text, &path)?;

    let mut rest: Vec<OsString> = argv;
    rest.drain(pos..pos + consumed);
    // argv[0] is the program; argv[1] the subcommand.
    let split = rest.len().min(2);
    let mut out: Vec<OsString> = rest[..split].to_vec();
    out.extend(flags.into_iter().map(OsString::from));
    out.extend(rest[split..].iter().cloned());
    Ok(out)
}

fn config_flags(text: &str, path: &str) -> Result<Vec<String>> {
    let value: Value = serde_json::from_str(text).map_err(|e| MbrError::Parse {
        path: path.into(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let Value::Object(map) = value else {
        return Err(MbrError::validation(format!("{path}: config must be a JSON object")));
    };
    let mut flags = Vec::new();
    for (key, v) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        let rendered = match v {
            Value::Bool(true) => {
                flags.push(flag);
                continue;
            }
            Value::Bool(false) | Value::Null => continue,
            Value::String(s) => s,
            Value::Number(n) => n.to_string(),
            Value::Array(items) => items
                .iter()
                .map(|i| match i {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect::<Vec<_>>()
                .join(","),
            Value::Object(_) => {
                return Err(MbrError::validation(format!("{path}: `{key}` must not be an object")));
            }
        };
        flags.push(format!("{flag}={rendered}"));
    }
    Ok(flags)
}
