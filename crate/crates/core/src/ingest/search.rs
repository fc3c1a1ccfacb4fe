//! Optional repository-search client. Every response is cached on disk keyed
//! by the request URL, so a second run replays without network access.

use std::fs;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use super::{select_repositories, IngestError, RepoMeta, RepoQuery};

/// Environment variable holding the search API token.
pub const TOKEN_ENV: &str = "GITHUB_TOKEN";

const PER_PAGE: usize = 100;

pub trait HttpGet: Send + Sync {
    fn get(&self, url: &str, headers: &[(&str, String)]) -> Result<String, IngestError>;
}

/// Blocking HTTPS transport.
#[derive(Debug, Default, Clone, Copy)]
pub struct UreqGet;

impl HttpGet for UreqGet {
    fn get(&self, url: &str, headers: &[(&str, String)]) -> Result<String, IngestError> {
        let mut req = ureq::get(url);
        for (k, v) in headers {
            req = req.header(*k, v.as_str());
        }
        let mut resp = req.call().map_err(|e| IngestError::Http {
            url: url.to_owned(),
            retriable: !matches!(e, ureq::Error::StatusCode(400..=499)),
            message: e.to_string(),
        })?;
        resp.body_mut()
            .read_to_string()
            .map_err(|e| IngestError::Http {
                url: url.to_owned(),
                message: e.to_string(),
                retriable: true,
            })
    }
}

/// `language:Python fork:false size:>=30000 pushed:>2021-12-31 stars:>1000`
pub fn query_string(q: &RepoQuery) -> String {
    let mut parts = vec![format!("language:{}", q.language)];
    if !q.fork_allowed {
        parts.push("fork:false".into());
    }
    parts.push(format!("size:>={}", q.min_size_kb));
    parts.push(format!("pushed:>{}", q.pushed_after.format("%Y-%m-%d")));
    parts.push(format!("stars:>{}", q.min_stars));
    parts.join(" ")
}

fn percent_encode(s: &str) -> String {
    let mut out = String::with_capacity(s.len() * 3);
    for b in s.bytes() {
        match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => out.push(b as char),
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out
}

pub struct RepoSearchClient<H: HttpGet> {
    http: H,
    cache_dir: PathBuf,
    base_url: String,
    token: Option<String>,
}

impl<H: HttpGet> RepoSearchClient<H> {
    pub fn new(http: H, cache_dir: impl Into<PathBuf>) -> Self {
        RepoSearchClient {
            http,
            cache_dir: cache_dir.into(),
            base_url: "https://api.github.com".into(),
            token: std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty()),
        }
    }

    pub fn with_base_url(mut self, base_url: impl Into<String>) -> Self {
        self.base_url = base_url.into();
        self
    }

    pub fn with_token(mut self, token: Option<String>) -> Self {
        self.token = token;
        self
    }

    pub fn page_url(&self, query: &RepoQuery, page: usize) -> String {
        format!(
            "{}/search/repositories?q={}&sort=stars&order=desc&per_page={PER_PAGE}&page={page}",
            self.base_url.trim_end_matches('/'),
            percent_encode(&query_string(query))
        )
    }

    fn fetch(&self, url: &str) -> Result<String, IngestError> {
        let key = hex::encode(Sha256::digest(url.as_bytes()));
        let path = self.cache_dir.join(format!("{key}.json"));
        if let Ok(body) = fs::read_to_string(&path) {
            return Ok(body);
        }
        let mut headers = vec![
            ("Accept", "application/vnd.github+json".to_owned()),
            ("User-Agent", "codecause".to_owned()),
        ];
        if let Some(t) = &self.token {
            headers.push(("Authorization", format!("Bearer {t}")));
        }
        let body = self.http.get(url, &headers)?;
        fs::create_dir_all(&self.cache_dir)?;
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, &body)?;
        fs::rename(&tmp, &path)?;
        Ok(body)
    }

    /// Search up to `max_pages` pages and re-apply the query locally.
    pub fn search(&self, query: &RepoQuery, max_pages: usize) -> Result<Vec<RepoMeta>, IngestError> {
        let mut found = Vec::new();
        for page in 1..=max_pages {
            let url = self.page_url(query, page);
            let body = self.fetch(&url)?;
            let value: serde_json::Value =
                serde_json::from_str(&body).map_err(|e| IngestError::SearchResponse {
                    url: url.clone(),
                    message: e.to_string(),
                })?;
            let items = value
                .get("items")
                .and_then(|v| v.as_array())
                .ok_or_else(|| IngestError::SearchResponse {
                    url: url.clone(),
                    message: "missing `items` array".into(),
                })?;
            for item in items {
                let meta: RepoMeta = serde_json::from_value(item.clone()).map_err(|e| {
                    IngestError::SearchResponse {
                        url: url.clone(),
                        message: e.to_string(),
                    }
                })?;
                found.push(meta);
            }
            if items.len() < PER_PAGE {
                break;
            }
        }
        Ok(select_repositories(query, &found).into_iter().cloned().collect())
    }
}
