//! Method-level features: syntactic counts, software metrics and
//! documentation statistics computed from an error-tolerant parse.

mod docstring;
mod functions;
pub mod lexer;
mod metrics;
mod parse;

use serde::{Deserialize, Deserializer, Serialize};

use crate::ingest::RawSample;

pub use docstring::{
    clean_docstring, detect_language, extract_docstring_features, is_valid_docstring,
    DocstringFeatures, MIN_DOCSTRING_WORDS,
};
pub use functions::{extract_functions, leading_docstring, FunctionDef};
pub use metrics::{
    compute_software_metrics, compute_syntactic_features, count_whitespace, SoftwareMetrics,
    SyntacticFeatures, DECISION_KINDS,
};
pub use parse::{parse_method, parse_source, visit_all, visit_named, ParsedMethod};

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("source is not valid UTF-8: {0}")]
    NotUtf8(#[source] std::str::Utf8Error),
}

/// Every per-method feature, keyed exactly as in the feature-augmented JSONL.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub n_whitespaces: usize,
    pub nloc: usize,
    pub token_count: usize,
    pub n_identifiers: usize,
    pub complexity: usize,
    pub n_ast_errors: usize,
    pub n_ast_levels: usize,
    pub n_ast_nodes: usize,
    pub n_words: usize,
    pub vocab_size: usize,
    pub language: String,
}

impl FeatureVector {
    /// JSON keys owned by the feature vector.
    pub const KEYS: &'static [&'static str] = &[
        "n_whitespaces",
        "nloc",
        "token_count",
        "n_identifiers",
        "complexity",
        "n_ast_errors",
        "n_ast_levels",
        "n_ast_nodes",
        "n_words",
        "vocab_size",
        "language",
    ];

    /// Numeric feature by name, for causal variables and reports.
    pub fn get(&self, name: &str) -> Option<f64> {
        let v = match name {
            "n_whitespaces" => self.n_whitespaces,
            "nloc" => self.nloc,
            "token_count" => self.token_count,
            "n_identifiers" => self.n_identifiers,
            "complexity" => self.complexity,
            "n_ast_errors" => self.n_ast_errors,
            "n_ast_levels" => self.n_ast_levels,
            "n_ast_nodes" => self.n_ast_nodes,
            "n_words" => self.n_words,
            "vocab_size" => self.vocab_size,
            _ => return None,
        };
        Some(v as f64)
    }
}

/// Compute all features of one method.
pub fn extract_features(code: &str, docstring: Option<&str>) -> FeatureVector {
    let parsed = parse_source(code);
    let syn = compute_syntactic_features(&parsed, code);
    let sw = compute_software_metrics(&parsed, code);
    let doc = extract_docstring_features(docstring);
    FeatureVector {
        n_whitespaces: syn.n_whitespaces,
        nloc: sw.nloc,
        token_count: syn.token_count,
        n_identifiers: sw.n_identifiers,
        complexity: sw.complexity,
        n_ast_errors: syn.n_ast_errors,
        n_ast_levels: syn.n_ast_levels,
        n_ast_nodes: syn.n_ast_nodes,
        n_words: doc.n_words,
        vocab_size: doc.vocab_size,
        language: doc.language,
    }
}

/// A mined method together with its features.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataPoint {
    #[serde(flatten)]
    pub raw: RawSample,
    #[serde(flatten)]
    pub features: FeatureVector,
}

impl DataPoint {
    pub fn from_raw(mut raw: RawSample) -> Self {
        for key in FeatureVector::KEYS {
            raw.extras.remove(*key);
        }
        let features = extract_features(&raw.code, raw.docstring.as_deref());
        DataPoint { raw, features }
    }

    /// Stable identifier derived from the method's identity and source.
    pub fn point_id(&self) -> String {
        self.raw.point_id()
    }

    /// Rebuild from a JSON object, splitting feature keys from sample keys.
    pub fn from_json(mut value: serde_json::Value) -> Result<Self, String> {
        let features = FeatureVector::deserialize(&value).map_err(|e| e.to_string())?;
        if let Some(obj) = value.as_object_mut() {
            for key in FeatureVector::KEYS {
                obj.remove(*key);
            }
        }
        let raw = RawSample::deserialize(value).map_err(|e| e.to_string())?;
        Ok(DataPoint { raw, features })
    }
}

impl<'de> Deserialize<'de> for DataPoint {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(deserializer)?;
        DataPoint::from_json(value).map_err(serde::de::Error::custom)
    }
}
