//! Acquire candidate methods from git history and move them to and from JSONL.
//!
//! Anti-contamination rests on two filters: repositories are selected with a
//! popularity/size query ([`RepoQuery`]) and only methods added or changed by
//! commits inside a [`DateWindow`] are kept.

mod harvest;
mod search;

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::features::is_valid_docstring;
use crate::jsonl::{self, JsonlError};

pub use harvest::{harvest_many, harvest_methods, repository_name};
pub use search::{query_string, HttpGet, RepoSearchClient, UreqGet, TOKEN_ENV};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read repository {repo}: {message}")]
    Repository { repo: String, message: String },
    #[error("invalid date window: start {start} is after end {end}")]
    InvalidWindow { start: NaiveDate, end: NaiveDate },
    #[error("request to {url} failed: {message}")]
    Http {
        url: String,
        message: String,
        retriable: bool,
    },
    #[error("malformed search response from {url}: {message}")]
    SearchResponse { url: String, message: String },
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Repository search predicate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RepoQuery {
    pub language: String,
    pub fork_allowed: bool,
    /// Minimum repository size in KB (inclusive).
    pub min_size_kb: u64,
    /// Last push must be strictly after this day.
    pub pushed_after: NaiveDate,
    /// Star count must be strictly greater.
    pub min_stars: u64,
}

impl Default for RepoQuery {
    fn default() -> Self {
        RepoQuery {
            language: "Python".into(),
            fork_allowed: false,
            min_size_kb: 30_000,
            pushed_after: NaiveDate::from_ymd_opt(2021, 12, 31).expect("valid date"),
            min_stars: 1_000,
        }
    }
}

impl RepoQuery {
    pub fn matches(&self, repo: &RepoMeta) -> bool {
        let language_ok = repo
            .language
            .as_deref()
            .is_some_and(|l| l.eq_ignore_ascii_case(&self.language));
        language_ok
            && (self.fork_allowed || !repo.fork)
            && repo.size_kb >= self.min_size_kb
            && repo.pushed_at.date_naive() > self.pushed_after
            && repo.stars > self.min_stars
    }
}

/// Repository metadata as found in a catalog or a search response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoMeta {
    pub full_name: String,
    #[serde(default)]
    pub clone_url: Option<String>,
    #[serde(default)]
    pub language: Option<String>,
    #[serde(default)]
    pub fork: bool,
    #[serde(alias = "size")]
    pub size_kb: u64,
    pub pushed_at: DateTime<Utc>,
    #[serde(alias = "stargazers_count")]
    pub stars: u64,
}

/// Entries of `catalog` satisfying every predicate of `query`, in input order.
pub fn select_repositories<'a>(query: &RepoQuery, catalog: &'a [RepoMeta]) -> Vec<&'a RepoMeta> {
    catalog.iter().filter(|r| query.matches(r)).collect()
}

/// Inclusive calendar-day window on commit timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "WindowRepr")]
pub struct DateWindow {
    start: NaiveDate,
    end: NaiveDate,
}

#[derive(Deserialize)]
struct WindowRepr {
    start: NaiveDate,
    end: NaiveDate,
}

impl TryFrom<WindowRepr> for DateWindow {
    type Error = IngestError;
    fn try_from(r: WindowRepr) -> Result<Self, Self::Error> {
        DateWindow::new(r.start, r.end)
    }
}

impl Default for DateWindow {
    /// The post-training-cutoff window: 2022-01-02 through 2023-01-01.
    fn default() -> Self {
        DateWindow {
            start: NaiveDate::from_ymd_opt(2022, 1, 2).expect("valid date"),
            end: NaiveDate::from_ymd_opt(2023, 1, 1).expect("valid date"),
        }
    }
}

impl DateWindow {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self, IngestError> {
        if start > end {
            return Err(IngestError::InvalidWindow { start, end });
        }
        Ok(DateWindow { start, end })
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn end(&self) -> NaiveDate {
        self.end
    }

    pub fn contains(&self, at: DateTime<Utc>) -> bool {
        let day = at.date_naive();
        self.start <= day && day <= self.end
    }
}

/// One mined method with its identification and documentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSample {
    pub commit_id: String,
    #[serde(rename = "repo")]
    pub repository: String,
    pub path: String,
    pub file_name: String,
    pub fun_name: String,
    pub commit_message: String,
    #[serde(default)]
    pub docstring: Option<String>,
    pub code: String,
    pub committed_at: DateTime<Utc>,
    /// Unknown keys, preserved through import/export.
    #[serde(flatten)]
    pub extras: BTreeMap<String, serde_json::Value>,
}

impl RawSample {
    pub fn point_id(&self) -> String {
        let mut h = Sha256::new();
        for part in [
            &self.commit_id,
            &self.repository,
            &self.path,
            &self.fun_name,
            &self.code,
        ] {
            h.update(part.as_bytes());
            h.update([0u8]);
        }
        hex::encode(&h.finalize()[..8])
    }
}

/// True for a full 40-hex commit hash or an abbreviated one (≥ 4 hex digits).
pub fn is_commit_hash(id: &str) -> bool {
    (4..=40).contains(&id.len()) && id.bytes().all(|b| b.is_ascii_hexdigit())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationIssue {
    OutsideWindow,
    EmptyCode,
    ShortDocstring,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValidationIssue::OutsideWindow => "outside window",
            ValidationIssue::EmptyCode => "empty code",
            ValidationIssue::ShortDocstring => "docstring not larger than 3 words",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub reasons: Vec<ValidationIssue>,
}

/// Check one sample against the window, code and docstring rules.
pub fn validate_sample(sample: &RawSample, window: &DateWindow) -> ValidationReport {
    let mut reasons = Vec::new();
    if !window.contains(sample.committed_at) {
        reasons.push(ValidationIssue::OutsideWindow);
    }
    if sample.code.trim().is_empty() {
        reasons.push(ValidationIssue::EmptyCode);
    }
    if let Some(doc) = &sample.docstring {
        if !is_valid_docstring(doc) {
            reasons.push(ValidationIssue::ShortDocstring);
        }
    }
    ValidationReport {
        passed: reasons.is_empty(),
        reasons,
    }
}

pub fn export_jsonl<W: Write>(samples: &[RawSample], out: W) -> Result<(), IngestError> {
    Ok(jsonl::write_records(samples, out)?)
}

/// Read samples, one JSON object per line. Errors carry the line number and
/// name a missing required field.
pub fn import_jsonl<R: BufRead>(input: R) -> Result<Vec<RawSample>, IngestError> {
    Ok(jsonl::read_with(input, |value| {
        let sample: RawSample = serde_json::from_value(value).map_err(|e| e.to_string())?;
        if !is_commit_hash(&sample.commit_id) {
            return Err(format!("commit_id {:?} is not a hex commit hash", sample.commit_id));
        }
        Ok(sample)
    })?)
}
