#![allow(dead_code)]

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use chrono::{NaiveDate, TimeZone, Utc};
use codecause_core::llm_eval::{
    evaluate_testbed, render_prompts, ChatMessage, ChatTransport, ClientConfig, EvalError, GenerationParams,
    LlmClient, PromptInput, ReplayCache, TreatmentSpec, DEFAULT_WEIGHTS,
};
use codecause_core::testbeds::Testbed;
use codecause_core::tokenization::BpeModel;
use rand::seq::IndexedRandom;
use rand::Rng;
use sha2::{Digest, Sha256};

const WORDS: &[&str] = &[
    "alpha", "beta", "count", "delta", "entry", "frame", "group", "handle", "index", "joint", "key", "label",
    "matrix", "node", "offset", "packet", "query", "record", "score", "token", "unit", "value", "width",
    "buffer", "cache", "depth", "event", "field", "graph", "header", "image", "layer", "model", "name",
    "order", "path", "queue", "range", "state", "table", "user", "vector", "window", "batch", "chunk",
    "digest", "epoch", "filter", "grid", "hash", "item", "kernel", "limit", "mask", "number", "option",
    "price", "ratio", "sample", "target", "update", "weight", "yield_", "zone", "total", "level", "point",
];

fn ident<R: Rng>(rng: &mut R) -> String {
    format!("{}_{}", WORDS.choose(rng).unwrap(), WORDS.choose(rng).unwrap())
}

fn statement<R: Rng>(rng: &mut R, arg: &str) -> String {
    let v = ident(rng);
    let w = ident(rng);
    let n = rng.random_range(2..90);
    match rng.random_range(0..12) {
        0 => format!("    {v} = {arg} + {n}\n"),
        1 => format!("    {v} = 0\n    for {w} in range({n}):\n        {v} += {w} * {arg}\n"),
        2 => format!("    if {arg} > {n}:\n        {v} = {arg} * {n}\n    else:\n        {v} = {n} - {arg}\n"),
        3 => format!("    {v} = {arg}\n    while {v} < {n}:\n        {v} += 1\n"),
        4 => format!("    {v} = [{w} for {w} in range({n}) if {w} % 3 == 0]\n"),
        5 => format!("    try:\n        {v} = int({arg})\n    except ValueError:\n        {v} = {n}\n"),
        6 => format!("    {v} = {{'{w}': {arg}, 'size': {n}}}\n"),
        7 => format!("    {v} = str({arg}).strip().lower()\n"),
        8 => format!("    assert {arg} is not None, '{w}'\n"),
        9 => format!("    {v} = max({arg}, {n}) if {arg} else min({n}, {w}_default)\n"),
        10 => format!("    # adjust {w}\n    {v} = abs({arg} - {n}) // 2\n"),
        _ => format!("    {v} = sorted([{arg}, {n}, len('{w}')])\n"),
    }
}

const DOC_PHRASES: &[&str] = &[
    "Compute the running total of the provided values and return the adjusted result",
    "Normalize the incoming record so that every field uses the canonical representation",
    "Build a lookup table from the given entries and report how many keys were stored",
    "Clamp the value into the configured range before passing it to the next stage",
    "Parse the raw input, falling back to a default whenever the conversion fails badly",
    "Collect matching items from the sequence and keep only the ones divisible by three",
    "Estimate the ratio between the two measurements and round it for display purposes",
    "Walk the structure once and accumulate the weighted score of every visited node",
];

/// A random but syntactically varied Python function.
pub fn random_method<R: Rng>(rng: &mut R, name: &str, docstring: Option<&str>, broken: bool) -> String {
    let arg = ident(rng);
    let mut code = format!("def {name}({arg}, {}=None):\n", ident(rng));
    if let Some(d) = docstring {
        code.push_str(&format!("    \"\"\"{d}\"\"\"\n"));
    }
    for _ in 0..rng.random_range(2..7) {
        code.push_str(&statement(rng, &arg));
    }
    if broken {
        code.push_str(&format!("    {} = ({arg} +\n", ident(rng)));
    }
    code.push_str(&format!("    return {arg}\n"));
    code
}

/// Create a git repository under `dir` whose commits (all inside the
/// default date window) add `files` Python modules of `per_file` methods.
pub fn build_fixture_repo(dir: &Path, name: &str, seed: u64, files: usize, per_file: usize) -> PathBuf {
    let mut rng = codecause_core::seeded_rng(seed);
    let path = dir.join(name);
    let repo = git2::Repository::init(&path).unwrap();
    repo.remote("origin", &format!("https://example.com/fixture/{name}.git")).unwrap();
    let mut parent: Option<git2::Oid> = None;
    for f in 0..files {
        let mut text = String::new();
        for m in 0..per_file {
            let doc = match rng.random_range(0..10) {
                0 => None,
                1 => Some("Short doc.".to_owned()),
                _ => Some(format!(
                    "{} for {} and {}.",
                    DOC_PHRASES.choose(&mut rng).unwrap(),
                    ident(&mut rng),
                    ident(&mut rng)
                )),
            };
            let broken = rng.random_range(0..8) == 0;
            let fun = format!("{}_{f}_{m}", ident(&mut rng));
            text.push_str(&random_method(&mut rng, &fun, doc.as_deref(), broken));
            text.push('\n');
        }
        let file = format!("pkg/module_{f}.py");
        std::fs::create_dir_all(path.join("pkg")).unwrap();
        std::fs::write(path.join(&file), text).unwrap();
        let mut index = repo.index().unwrap();
        index.add_path(Path::new(&file)).unwrap();
        index.write().unwrap();
        let tree = repo.find_tree(index.write_tree().unwrap()).unwrap();
        let day = NaiveDate::from_ymd_opt(2022, 3, 1).unwrap() + chrono::Days::new(f as u64 * 3);
        let when = Utc.from_utc_datetime(&day.and_hms_opt(12, 0, 0).unwrap());
        let sig = git2::Signature::new("Fixture", "fixture@example.com", &git2::Time::new(when.timestamp(), 0)).unwrap();
        let message = if f % 5 == 4 {
            format!("Add module {f}")
        } else {
            format!("Add module {f} with helpers that compute totals, parse inputs and normalize records for the pipeline")
        };
        let parents: Vec<git2::Commit> = parent.iter().map(|p| repo.find_commit(*p).unwrap()).collect();
        let refs: Vec<&git2::Commit> = parents.iter().collect();
        parent = Some(repo.commit(Some("HEAD"), &sig, &sig, &message, &tree, &refs).unwrap());
    }
    path
}

fn digest(text: &str) -> u64 {
    let d = Sha256::digest(text.as_bytes());
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

/// Deterministic stand-in for the model: answers with a degraded copy of
/// the reference method, degrading T1 most and T2 least.
pub struct FakeModel {
    /// First user prompt → reference method.
    pub references: HashMap<String, String>,
}

impl FakeModel {
    pub fn for_testbed(tb: &Testbed, specs: &[TreatmentSpec]) -> Self {
        let mut references = HashMap::new();
        for p in &tb.points {
            for s in specs {
                let prompts = render_prompts(s, &PromptInput::from_point(p)).unwrap();
                references.insert(prompts[0].clone(), p.point.raw.code.clone());
            }
        }
        FakeModel { references }
    }
}

impl ChatTransport for FakeModel {
    fn chat(&self, _model: &str, _params: &GenerationParams, messages: &[ChatMessage]) -> Result<String, EvalError> {
        let first = &messages[0].content;
        let reference = self.references.get(first).expect("prompt of a fixture point");
        let two_step = first.starts_with("You are given");
        if two_step && messages.len() == 1 {
            return Ok("Understood, I have the description and the beginning of the code.".into());
        }
        let h = digest(first);
        let lines: Vec<&str> = reference.lines().collect();
        let drop = match (two_step, first.contains("return only code")) {
            (true, _) => (h % 2) as usize,
            (false, true) => 1 + (h % 4) as usize,
            (false, false) => (h % 3) as usize,
        };
        let keep = lines.len().saturating_sub(drop).max(1);
        let mut body = lines[..keep].join("\n");
        if h.is_multiple_of(5) {
            body = body.replace("return", "return  ");
        }
        Ok(format!("Here is the completed method:\n```python\n{body}\n```\n"))
    }
}

/// Fill `cache` with fake responses for every (point, treatment) pair.
pub fn record_responses(tb: &Testbed, specs: &[TreatmentSpec], model: &BpeModel, cache: &Path, client: &ClientConfig) {
    let fake = FakeModel::for_testbed(tb, specs);
    let llm = LlmClient::live(ReplayCache::open(cache).unwrap(), client.clone(), Box::new(fake));
    evaluate_testbed(tb, specs, &llm, model, DEFAULT_WEIGHTS, 1).unwrap();
}

pub fn cli() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_codecause"));
    c.env("RUST_LOG", "warn");
    c
}

/// Run the CLI, panicking with its stderr on failure.
pub fn run_ok(config: &Path, args: &[&str]) {
    let out = cli().arg("--config").arg(config).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "codecause {args:?} failed ({:?}):\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// sha256 of every file below `root`, keyed by relative path.
pub fn tree_hashes(root: &Path) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.push((rel, hex::encode(Sha256::digest(std::fs::read(&p).unwrap()))));
            }
        }
    }
    out.sort();
    out
}

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/replay")
}

/// Lay the checked-in replay fixture out as a workspace under `dir`, as if
/// `build-testbeds` had run. Returns the config path.
pub fn stage_replay_fixture(dir: &Path) -> PathBuf {
    let src = fixture_dir();
    let out = dir.join("out");
    std::fs::create_dir_all(out.join("testbeds")).unwrap();
    std::fs::create_dir_all(out.join("work")).unwrap();
    std::fs::copy(src.join("config.json"), dir.join("config.json")).unwrap();
    std::fs::copy(src.join("cache.jsonl"), dir.join("cache.jsonl")).unwrap();
    std::fs::copy(src.join("testbed.jsonl"), out.join("testbeds/WithDocstring.jsonl")).unwrap();
    std::fs::copy(src.join("tokenizer.json"), out.join("work/tokenizer.json")).unwrap();
    dir.join("config.json")
}

pub fn read_with_docstring(path: &Path) -> Testbed {
    codecause_core::testbeds::read_testbed(
        std::io::BufReader::new(std::fs::File::open(path).unwrap()),
        codecause_core::testbeds::TestbedName::WithDocstring,
    )
    .unwrap()
}

pub fn read_tokenizer(path: &Path) -> BpeModel {
    BpeModel::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}
