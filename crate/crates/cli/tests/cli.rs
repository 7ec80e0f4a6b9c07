#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn prune_mbr(args: &[&str]) -> Output {
    prune_mbr_env(args, &[])
}

fn prune_mbr_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_prune-mbr"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn prune-mbr")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn synth(dir: &Path, extra: &[&str]) -> String {
    let corpus = path(dir, "corpus.jsonl");
    let mut args = vec!["synth", "--output", corpus.as_str(), "--n-instances", "4", "--n-hypotheses", "12"];
    args.extend(["--pool-size", "64", "--edit-rate", "0.3"]);
    args.extend(extra);
    ok(&prune_mbr(&args));
    corpus
}

fn read_lines(p: &str) -> Vec<Value> {
    std::fs::read_to_string(p)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn synth_defaults_and_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let a = path(dir.path(), "a.jsonl");
    let b = path(dir.path(), "b.jsonl");
    ok(&prune_mbr(&["synth", "-o", &a]));
    ok(&prune_mbr(&["synth", "-o", &b]));
    let lines = read_lines(&a);
    assert_eq!(lines.len(), 50);
    assert_eq!(lines[0]["hypotheses"].as_array().unwrap().len(), 64);
    assert_eq!(lines[0]["pool"].as_array().unwrap().len(), 256);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let c = path(dir.path(), "c.jsonl");
    ok(&prune_mbr(&["synth", "-o", &c, "--seed", "2"]));
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn synth_with_zero_edit_rate_copies_gold() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), &["--edit-rate", "0"]);
    for inst in read_lines(&corpus) {
        let gold = &inst["reference"];
        assert!(inst["hypotheses"].as_array().unwrap().iter().all(|h| h == gold));
    }
}

#[test]
fn synth_rejects_bad_edit_rate() {
    let dir = tempfile::tempdir().unwrap();
    let out = prune_mbr(&["synth", "-o", &path(dir.path(), "x.jsonl"), "--edit-rate", "1.5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("edit rate"));
}

#[test]
fn standard_decode_scores_every_unique_pair() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), &[]);
    let out = path(dir.path(), "decode.jsonl");
    ok(&prune_mbr(&["decode", "-i", &corpus, "--utility", "chrf", "--method", "standard", "--refs", "64", "-o", &out]));
    let instances = read_lines(&corpus);
    for (line, inst) in read_lines(&out).iter().zip(&instances) {
        let unique = |key: &str| {
            let mut v: Vec<&str> = inst[key].as_array().unwrap().iter().map(|s| s.as_str().unwrap()).collect();
            v.sort();
            v.dedup();
            v.len() as u64
        };
        assert_eq!(line["id"], inst["id"]);
        assert_eq!(line["total_calls"].as_u64().unwrap(), unique("hypotheses") * unique("pool"));
        assert_eq!(line["pseudo_refs_used"], 64);
        assert_eq!(line["steps"].as_array().unwrap().len(), 1);
    }
}

#[test]
fn decode_writes_one_line_per_instance_and_trial() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), &[]);
    let out = prune_mbr(&["decode", "-i", &corpus, "--schedule", "8,16,32,64", "--trials", "3"]);
    ok(&out);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 12);
    assert_eq!(lines[1]["trial"], 1);
    assert_eq!(lines[3]["id"], "synth-0001");
    for l in &lines {
        let steps = l["steps"].as_array().unwrap();
        let sum: u64 = steps.iter().map(|s| s["new_calls"].as_u64().unwrap()).sum();
        assert_eq!(sum, l["total_calls"].as_u64().unwrap());
    }
}

#[test]
fn schedule_larger_than_pool_names_the_instance() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), &[]);
    let out = prune_mbr(&["decode", "-i", &corpus, "--schedule", "16,128"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("synth-0000"));
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), &[]);
    let bad_method = prune_mbr(&["decode", "-i", &corpus, "--method", "confidence:1.5"]);
    assert_eq!(bad_method.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad_method.stderr).contains("--method"));
    let bad_utility = prune_mbr(&["decode", "-i", &corpus, "--utility", "bleu"]);
    assert_eq!(bad_utility.status.code(), Some(1));
    let missing = prune_mbr(&["decode", "-i", &path(dir.path(), "missing.jsonl")]);
    assert_eq!(missing.status.code(), Some(2));
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let url = format!("remote:http://127.0.0.1:{port}");
    let unreachable = prune_mbr(&["decode", "-i", &corpus, "--utility", &url, "--remote-attempts", "1"]);
    assert_eq!(unreachable.status.code(), Some(3));
    let malformed = path(dir.path(), "bad.jsonl");
    std::fs::write(&malformed, "{\"id\": \"x\"\n").unwrap();
    let parse = prune_mbr(&["decode", "-i", &malformed]);
    assert_eq!(parse.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&parse.stderr).contains("line 1"));
}

#[test]
fn sweep_grid_has_twenty_five_rows_per_trial() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), &[]);
    let prefix = path(dir.path(), "sweep");
    ok(&prune_mbr(&[
        "sweep", "-i", &corpus, "--alphas", "0.8,0.9,0.95,0.98,0.99", "--betas", "0.05:0.95:0.05", "--schedule",
        "8,16,32,64", "--trials", "2", "--n-boot", "100", "--out", &prefix,
    ]));
    let agg = std::fs::read_to_string(format!("{prefix}.csv")).unwrap();
    let trials = std::fs::read_to_string(format!("{prefix}.trials.csv")).unwrap();
    assert_eq!(agg.lines().count(), 1 + 25);
    assert_eq!(trials.lines().count(), 1 + 50);
    assert_eq!(
        agg.lines().next().unwrap(),
        "config,method,alpha,beta,trial,mean_calls,mean_pseudo_refs,score,accuracy,rr"
    );
    assert!(agg.lines().nth(1).unwrap().starts_with("standard,standard,"));
    let json: Value = serde_json::from_str(&std::fs::read_to_string(format!("{prefix}.json")).unwrap()).unwrap();
    assert_eq!(json["aggregate"].as_array().unwrap().len(), 25);
    assert_eq!(json["rows"].as_array().unwrap().len(), 50);
}

#[test]
fn false_prune_grid_has_twelve_cells() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), &[]);
    let prefix = path(dir.path(), "fp");
    ok(&prune_mbr(&[
        "false-prune", "-i", &corpus, "--alphas", "0.8,0.9,0.99", "--sizes", "8,16,32,64", "--trials", "2", "--out",
        &prefix,
    ]));
    let agg = std::fs::read_to_string(format!("{prefix}.csv")).unwrap();
    assert_eq!(agg.lines().count(), 1 + 12);
    assert_eq!(
        std::fs::read_to_string(format!("{prefix}.trials.csv")).unwrap().lines().count(),
        1 + 24
    );
}

#[test]
fn report_prints_five_by_three_table() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), &[]);
    let prefix = path(dir.path(), "table");
    let out = prune_mbr(&[
        "report", "-i", &corpus, "--configs", "standard,confidence:0.99,confidence:0.9", "--schedule", "8,16,32,64",
        "--trials", "2", "--out", &prefix,
    ]);
    ok(&out);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("# Utility calls"));
    let csv = std::fs::read_to_string(format!("{prefix}.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[0], "metric,standard,confidence:0.99,confidence:0.9");
    assert!(rows[1..].iter().all(|r| r.split(',').count() == 4));
    let names: Vec<&str> = rows[1..].iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(names, ["Score", "Accuracy", "RR", "# Pseudo-refs", "# Utility calls"]);
}

#[test]
fn trace_rows_follow_the_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), &[]);
    let prefix = path(dir.path(), "trace");
    ok(&prune_mbr(&[
        "trace", "-i", &corpus, "--method", "rank:0.5", "--schedule", "8,16,32,64", "--trials", "2", "--out", &prefix,
    ]));
    let csv = std::fs::read_to_string(format!("{prefix}.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("t,refs,mean"));
    // 12 hypotheses halve each step: 6, 3, 2, 1.
    let means: Vec<f64> = lines[1..].iter().map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert!(means[0] <= 6.0);
    assert!(means.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn chart_renders_and_reports_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let csv = path(dir.path(), "two.csv");
    std::fs::write(&csv, "method,mean_calls,accuracy\nconfidence,10,0.5\nconfidence,20,0.9\n").unwrap();
    let svg = path(dir.path(), "two.svg");
    ok(&prune_mbr(&["chart", "-i", &csv, "-o", &svg]));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("<polyline").count(), 1);
    let points = text.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
    assert_eq!(points.split_whitespace().count(), 2);

    let unknown = prune_mbr(&["chart", "-i", &csv, "-o", &svg, "--y", "nope"]);
    assert_eq!(unknown.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("mean_calls"));

    let empty = path(dir.path(), "empty.csv");
    std::fs::write(&empty, "method,mean_calls,accuracy\n").unwrap();
    let out_svg = path(dir.path(), "empty.svg");
    let out = prune_mbr(&["chart", "-i", &empty, "-o", &out_svg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!Path::new(&out_svg).exists());
}

#[test]
fn sweep_chart_puts_confidence_above_rank_at_matched_budgets() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = path(dir.path(), "c.jsonl");
    ok(&prune_mbr(&["synth", "-o", &corpus, "--n-instances", "10", "--edit-rate", "0.45"]));
    let prefix = path(dir.path(), "s");
    ok(&prune_mbr(&[
        "sweep", "-i", &corpus, "--alphas", "0.5,0.8,0.9,0.99", "--betas", "0.5,0.8,0.9", "--trials", "2", "--out",
        &prefix,
    ]));
    let csv = std::fs::read_to_string(format!("{prefix}.csv")).unwrap();
    let rows: Vec<(String, f64, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].to_string(), f[5].parse().unwrap(), f[8].parse().unwrap())
        })
        .collect();
    let conf: Vec<&(String, f64, f64)> = rows.iter().filter(|r| r.0 == "confidence").collect();
    let rank: Vec<&(String, f64, f64)> = rows.iter().filter(|r| r.0 == "rank").collect();
    // For each rank point, the confidence point with the nearest budget
    // at or below it should be at least as accurate.
    let mut better = 0;
    for r in &rank {
        let best = conf
            .iter()
            .filter(|c| c.1 <= r.1)
            .map(|c| c.2)
            .fold(f64::NEG_INFINITY, f64::max);
        if best >= r.2 {
            better += 1;
        }
    }
    assert!(2 * better > rank.len(), "confidence {conf:?} vs rank {rank:?}");
    let svg = path(dir.path(), "s.svg");
    ok(&prune_mbr(&["chart", "-i", &format!("{prefix}.csv"), "-o", &svg]));
    assert_eq!(std::fs::read_to_string(&svg).unwrap().matches("<polyline").count(), 3);
}

#[test]
fn env_vars_and_config_file_set_flags() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), &[]);
    let base = prune_mbr(&["decode", "-i", &corpus, "--schedule", "8,16,32,64", "--seed", "9"]);
    ok(&base);
    let via_env = prune_mbr_env(
        &["decode", "-i", &corpus],
        &[("PRUNE_MBR_SCHEDULE", "8,16,32,64"), ("PRUNE_MBR_SEED", "9")],
    );
    ok(&via_env);
    assert_eq!(base.stdout, via_env.stdout);

    let config = path(dir.path(), "config.json");
    std::fs::write(&config, r#"{"schedule": [8, 16, 32, 64], "seed": 9, "n_boot": 500}"#).unwrap();
    let via_config = prune_mbr(&["decode", "--config", &config, "-i", &corpus]);
    ok(&via_config);
    assert_eq!(base.stdout, via_config.stdout);

    // Flags on the command line beat the config file.
    let overridden = prune_mbr(&["decode", "--config", &config, "-i", &corpus, "--seed", "1"]);
    let seed1 = prune_mbr(&["decode", "-i", &corpus, "--schedule", "8,16,32,64", "--seed", "1"]);
    assert_eq!(overridden.stdout, seed1.stdout);
}

#[test]
fn remote_and_matrix_utilities_agree() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), &[]);
    let matrices = path(dir.path(), "mock.json");
    let mut text = String::new();
    for inst in read_lines(&corpus) {
        let hyps = inst["hypotheses"].as_array().unwrap();
        let pool = inst["pool"].as_array().unwrap();
        let scores: Vec<f64> = hyps
            .iter()
            .flat_map(|h| pool.iter().map(move |r| prune_mbr::utility::token_f1(h.as_str().unwrap(), r.as_str().unwrap())))
            .collect();
        let m = prune_mbr::utility::UtilityMatrix::new(Some(inst["id"].as_str().unwrap().into()), hyps.len(), pool.len(), scores)
            .unwrap();
        text.push_str(&m.to_json().to_string());
        text.push('\n');
    }
    std::fs::write(&matrices, text).unwrap();

    let server = support::MockServer::token_f1();
    let run = |utility: &str, out: &str| {
        let prefix = path(dir.path(), out);
        ok(&prune_mbr(&[
            "sweep", "-i", &corpus, "--utility", utility, "--alphas", "0.9", "--betas", "0.5", "--schedule",
            "8,16,32,64", "--trials", "2", "--n-boot", "100", "--score-metric", "mock", "--remote-batch-size", "100",
            "--out", &prefix,
        ]));
        std::fs::read_to_string(format!("{prefix}.trials.csv")).unwrap()
    };
    let local = run(&format!("matrix:{matrices}"), "matrix");
    let remote = run(&format!("remote:{}", server.url), "remote");
    let mock = run("mock", "mock");
    assert_eq!(local, remote);
    assert_eq!(local, mock);
    assert!(server.score_requests().len() > 1);
}
