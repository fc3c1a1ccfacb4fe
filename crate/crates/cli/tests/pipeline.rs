mod support;

use std::path::{Path, PathBuf};

use codecause_core::llm_eval::{ClientConfig, EvalRecord, TreatmentSpec};
use codecause_core::testbeds::write_testbed;
use serde_json::json;
use support::*;

fn write_config(dir: &Path, output: &str, size: usize) -> PathBuf {
    let cfg = json!({
        "seed": 7,
        "paths": {"clones": "clones", "cache": "cache.jsonl", "output": output},
        "tokenizer": {"vocab_size": 400},
        "testbeds": {"size": size},
    });
    let p = dir.join(format!("{output}.json"));
    std::fs::write(&p, serde_json::to_vec_pretty(&cfg).unwrap()).unwrap();
    p
}

fn read_evals(path: &Path) -> Vec<EvalRecord> {
    codecause_core::jsonl::read_records(std::io::BufReader::new(std::fs::File::open(path).unwrap())).unwrap()
}

#[test]
fn stages_chain_through_replay() {
    let dir = tempfile::tempdir().unwrap();
    build_fixture_repo(&dir.path().join("clones"), "toolkit", 3, 40, 8);
    let config = write_config(dir.path(), "out", 60);
    for step in ["mine", "extract", "validate", "dedup", "build-testbeds", "prompt"] {
        run_ok(&config, &[step]);
    }
    let out = dir.path().join("out");
    let tb = read_with_docstring(&out.join("testbeds/WithDocstring.jsonl"));
    assert!(tb.len() >= 50, "{} points", tb.len());
    let dedup = std::fs::read_to_string(out.join("reports/dedup.csv")).unwrap();
    assert!(dedup.starts_with("task,testbed,io,before,dupes,rate,after\n"));
    assert_eq!(dedup.lines().count(), 6);

    let model = read_tokenizer(&out.join("work/tokenizer.json"));
    record_responses(&tb, &TreatmentSpec::defaults(), &model, &dir.path().join("cache.jsonl"), &ClientConfig::default());
    for step in ["eval", "correlate", "ate", "report"] {
        run_ok(&config, &[step]);
    }
    assert_eq!(read_evals(&out.join("work/eval.jsonl")).len(), 3 * tb.len());
    for f in [
        "reports/descriptive.csv",
        "reports/results.csv",
        "reports/results.md",
        "figures/taxonomy_counts.csv",
        "figures/token_dist.csv",
        "figures/token_dist.meta.json",
        "figures/similarity_proportion.csv",
        "figures/similarity_proportion.svg",
        "manifests/report.json",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let descriptive = std::fs::read_to_string(out.join("reports/descriptive.csv")).unwrap();
    assert_eq!(descriptive.lines().count(), 8, "{descriptive}");
}

#[test]
fn missing_predecessor_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "out", 10);
    let out = cli().arg("--config").arg(&config).arg("ate").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("eval.jsonl") && err.contains("run eval first"), "{err}");
}

#[test]
fn unknown_subcommand_exits_one() {
    let out = cli().arg("bogus").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn replay_cache_miss_fails_eval() {
    let dir = tempfile::tempdir().unwrap();
    let config = stage_replay_fixture(dir.path());
    std::fs::write(dir.path().join("cache.jsonl"), "").unwrap();
    run_ok(&config, &["prompt"]);
    let out = cli().arg("--config").arg(&config).arg("eval").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no recorded response"));
}

#[test]
fn unchanged_step_is_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let config = stage_replay_fixture(dir.path());
    run_ok(&config, &["prompt"]);
    let prompts = dir.path().join("out/work/prompts.jsonl");
    let before = std::fs::metadata(&prompts).unwrap().modified().unwrap();
    std::thread::sleep(std::time::Duration::from_millis(20));
    run_ok(&config, &["prompt"]);
    assert_eq!(std::fs::metadata(&prompts).unwrap().modified().unwrap(), before);
}

/// Rebuild tests/fixtures/replay from a generated repository, then run
/// `python3 oracle.py` there to refresh the expected correlations.
#[test]
#[ignore]
fn regenerate_replay_fixture() {
    let dir = tempfile::tempdir().unwrap();
    build_fixture_repo(&dir.path().join("clones"), "toolkit", 11, 40, 8);
    let config = write_config(dir.path(), "out", 56);
    for step in ["mine", "extract", "validate", "dedup", "build-testbeds"] {
        run_ok(&config, &[step]);
    }
    let out = dir.path().join("out");
    let mut tb = read_with_docstring(&out.join("testbeds/WithDocstring.jsonl"));
    assert!(tb.len() >= 50, "{} points", tb.len());
    tb.points.truncate(50);

    let fx = fixture_dir();
    let mut buf = Vec::new();
    write_testbed(&tb, &mut buf).unwrap();
    std::fs::write(fx.join("testbed.jsonl"), buf).unwrap();
    std::fs::copy(out.join("work/tokenizer.json"), fx.join("tokenizer.json")).unwrap();
    let cfg = json!({
        "seed": 7,
        "paths": {"cache": "cache.jsonl", "output": "out"},
        "tokenizer": {"vocab_size": 400},
        "testbeds": {"size": 50},
    });
    std::fs::write(fx.join("config.json"), serde_json::to_string_pretty(&cfg).unwrap() + "\n").unwrap();
    let _ = std::fs::remove_file(fx.join("cache.jsonl"));
    let model = read_tokenizer(&fx.join("tokenizer.json"));
    record_responses(&tb, &TreatmentSpec::defaults(), &model, &fx.join("cache.jsonl"), &ClientConfig::default());

    let work = tempfile::tempdir().unwrap();
    let config = stage_replay_fixture(work.path());
    run_ok(&config, &["prompt"]);
    run_ok(&config, &["eval"]);
    let mut w = csv::Writer::from_path(fx.join("prompt_sizes.csv")).unwrap();
    w.write_record(["point_id", "treatment", "prompt_size"]).unwrap();
    for r in read_evals(&work.path().join("out/work/eval.jsonl")) {
        w.write_record([r.point_id, r.treatment.to_string(), r.prompt_size.to_string()]).unwrap();
    }
    w.flush().unwrap();
}
