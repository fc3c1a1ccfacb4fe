//! Prompt treatments, LLM completions through a replay cache, and the
//! similarity metrics used as outcomes.

mod bleu;
mod client;
mod codebleu;
mod extract;
mod levenshtein;
mod treatment;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::jsonl::JsonlError;
use crate::testbeds::{Testbed, TestbedPoint};
use crate::tokenization::BpeModel;

pub use bleu::{bleu, bleu_tokens, MAX_N};
pub use client::{
    request_hash, CacheEntry, ChatMessage, ChatTransport, ClientConfig, ClientMode, Completion,
    GenerationParams, HttpTransport, LlmClient, ReplayCache, API_KEY_ENV, ENDPOINT_ENV,
};
pub use codebleu::{
    codebleu, codebleu_components, dataflow_edges, dataflow_match, subtree_shapes, syntax_match,
    weighted_bleu, CodeBleu, DataflowEdge, DEFAULT_WEIGHTS,
};
pub use extract::extract_code;
pub use levenshtein::{edit_distance, levenshtein};
pub use treatment::{render_prompts, PromptInput, TreatmentId, TreatmentSpec};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("reference has no tokens")]
    EmptyReference,
    #[error("CodeBLEU weights {0:?} must be non-negative and sum to 1")]
    InvalidWeights([f64; 4]),
    #[error("treatment {treatment} needs {expected} prompt step(s), got {found}")]
    StepCount {
        treatment: TreatmentId,
        expected: usize,
        found: usize,
    },
    #[error("treatment {treatment} needs `{field}`, which the point does not have")]
    MissingField {
        treatment: TreatmentId,
        field: &'static str,
    },
    #[error("no recorded response for request {request_hash} (replay mode)")]
    CacheMiss { request_hash: String },
    #[error("request to {url} failed: {message}")]
    Http {
        url: String,
        message: String,
        retriable: bool,
    },
    #[error("endpoint {0} rejected the credentials")]
    Auth(String),
    #[error("live mode needs the endpoint URL in ${}", ENDPOINT_ENV)]
    MissingEndpoint,
    #[error("point {point_id}, treatment {treatment}: {source}")]
    Point {
        point_id: String,
        treatment: TreatmentId,
        #[source]
        source: Box<EvalError>,
    },
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl EvalError {
    pub fn is_retriable(&self) -> bool {
        match self {
            EvalError::Http { retriable, .. } => *retriable,
            EvalError::Point { source, .. } => source.is_retriable(),
            _ => false,
        }
    }
}

/// Outcome of one treatment on one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub point_id: String,
    pub treatment: TreatmentId,
    pub prompt_size: usize,
    pub generated: String,
    pub y_bleu: f64,
    pub y_codebleu: f64,
    pub y_lev_distance: usize,
    pub y_lev_similarity: f64,
}

impl EvalRecord {
    /// Outcome by column name.
    pub fn outcome(&self, name: &str) -> Option<f64> {
        Some(match name {
            "y_bleu" => self.y_bleu,
            "y_codebleu" => self.y_codebleu,
            "y_lev_distance" => self.y_lev_distance as f64,
            "y_lev_similarity" => self.y_lev_similarity,
            "prompt_size" => self.prompt_size as f64,
            _ => return None,
        })
    }
}

pub const OUTCOMES: [&str; 4] = ["y_lev_distance", "y_lev_similarity", "y_bleu", "y_codebleu"];

/// Score generated code against the reference.
pub fn score(generated: &str, reference: &str, weights: [f64; 4]) -> Result<(f64, f64, usize, f64), EvalError> {
    let b = bleu(generated, reference)?;
    let cb = codebleu(generated, reference, weights)?;
    let (d, s) = levenshtein(generated, reference);
    Ok((b, cb, d, s))
}

/// Render, complete and score one (point, treatment) pair. The reference is
/// the full original method.
pub fn evaluate_point(
    point: &TestbedPoint,
    spec: &TreatmentSpec,
    client: &LlmClient,
    tokenizer: &BpeModel,
    weights: [f64; 4],
) -> Result<EvalRecord, EvalError> {
    let point_id = point.point_id();
    let wrap = |e: EvalError| EvalError::Point {
        point_id: point_id.clone(),
        treatment: spec.id,
        source: Box::new(e),
    };
    let prompts = render_prompts(spec, &PromptInput::from_point(point)).map_err(wrap)?;
    let prompt_size = prompts.iter().map(|p| tokenizer.encode(p).len()).sum::<usize>().max(1);
    let completion = client.complete(&prompts).map_err(wrap)?;
    let generated = extract_code(completion.text());
    let (y_bleu, y_codebleu, y_lev_distance, y_lev_similarity) =
        score(&generated, &point.point.raw.code, weights).map_err(wrap)?;
    Ok(EvalRecord {
        point_id: point_id.clone(),
        treatment: spec.id,
        prompt_size,
        generated,
        y_bleu,
        y_codebleu,
        y_lev_distance,
        y_lev_similarity,
    })
}

/// Evaluate every point under every treatment with at most `jobs` workers.
/// Records come back in (point, treatment) order.
pub fn evaluate_testbed(
    testbed: &Testbed,
    specs: &[TreatmentSpec],
    client: &LlmClient,
    tokenizer: &BpeModel,
    weights: [f64; 4],
    jobs: usize,
) -> Result<Vec<EvalRecord>, EvalError> {
    for s in specs {
        s.validate()?;
    }
    let work: Vec<(&TestbedPoint, &TreatmentSpec)> = testbed
        .points
        .iter()
        .flat_map(|p| specs.iter().map(move |s| (p, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| EvalError::Io(std::io::Error::other(e)))?;
    pool.install(|| {
        work.par_iter()
            .map(|(p, s)| evaluate_point(p, s, client, tokenizer, weights))
            .collect()
    })
}

pub const CSV_COLUMNS: [&str; 7] = [
    "point_id",
    "treatment",
    "prompt_size",
    "y_bleu",
    "y_codebleu",
    "y_lev_distance",
    "y_lev_similarity",
];

/// Scores as CSV (generated text omitted).
pub fn write_eval_csv<W: Write>(records: &[EvalRecord], out: W) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in records {
        w.write_record([
            r.point_id.clone(),
            r.treatment.to_string(),
            r.prompt_size.to_string(),
            r.y_bleu.to_string(),
            r.y_codebleu.to_string(),
            r.y_lev_distance.to_string(),
            r.y_lev_similarity.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn similarity_invariant_holds() {
        let reference = "def f(x):\n    return x + 1\n";
        let generated = "def f(x):\n    return x\n";
        let (_, _, d, s) = score(generated, reference, DEFAULT_WEIGHTS).unwrap();
        let longest = generated.chars().count().max(reference.chars().count());
        assert!((s - (1.0 - d as f64 / longest as f64)).abs() < 1e-15);
    }

    #[test]
    fn csv_header() {
        let mut buf = Vec::new();
        write_eval_csv(
            &[EvalRecord {
                point_id: "p".into(),
                treatment: TreatmentId::T2,
                prompt_size: 12,
                generated: "x".into(),
                y_bleu: 0.5,
                y_codebleu: 0.25,
                y_lev_distance: 3,
                y_lev_similarity: 0.75,
            }],
            &mut buf,
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "point_id,treatment,prompt_size,y_bleu,y_codebleu,y_lev_distance,y_lev_similarity\np,T2,12,0.5,0.25,3,0.75\n"
        );
    }
}
