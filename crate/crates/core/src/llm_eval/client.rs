//! Chat-completion client with a content-addressed record/replay cache.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex, RwLock};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::EvalError;
use crate::jsonl;

/// Base URL of an OpenAI-compatible endpoint.
pub const ENDPOINT_ENV: &str = "LLM_ENDPOINT";
pub const API_KEY_ENV: &str = "LLM_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationParams {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            temperature: 0.0,
            max_tokens: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "user".into(),
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "assistant".into(),
            content: content.into(),
        }
    }
}

/// sha256 of the canonical (key-sorted) JSON of model, params and messages.
pub fn request_hash(model: &str, params: &GenerationParams, messages: &[ChatMessage]) -> String {
    let canonical = serde_json::json!({
        "model": model,
        "params": params,
        "messages": messages,
    });
    hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub request_hash: String,
    pub model: String,
    pub params: GenerationParams,
    /// User turns of the conversation up to and including this request.
    pub prompts: Vec<String>,
    pub response: String,
    pub timestamp: String,
}

/// Append-only JSONL cache. Reads are concurrent; appends are serialised.
pub struct ReplayCache {
    path: PathBuf,
    entries: RwLock<HashMap<String, CacheEntry>>,
    writer: Mutex<()>,
}

impl ReplayCache {
    /// Load `path`; a missing file is an empty cache.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, EvalError> {
        let path = path.into();
        let mut entries = HashMap::new();
        if path.exists() {
            let file = File::open(&path)?;
            let rows: Vec<CacheEntry> = jsonl::read_records(BufReader::new(file))?;
            for e in rows {
                entries.entry(e.request_hash.clone()).or_insert(e);
            }
        }
        Ok(ReplayCache {
            path,
            entries: RwLock::new(entries),
            writer: Mutex::new(()),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, hash: &str) -> Option<String> {
        self.entries
            .read()
            .expect("cache lock")
            .get(hash)
            .map(|e| e.response.clone())
    }

    pub fn insert(&self, entry: CacheEntry) -> Result<(), EvalError> {
        let _guard = self.writer.lock().expect("cache writer lock");
        if self.entries.read().expect("cache lock").contains_key(&entry.request_hash) {
            return Ok(());
        }
        if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let mut line = serde_json::to_vec(&entry).map_err(|source| jsonl::JsonlError::Serialize { index: 0, source })?;
        line.push(b'\n');
        let mut file = OpenOptions::new().create(true).append(true).open(&self.path)?;
        file.write_all(&line)?;
        file.flush()?;
        self.entries
            .write()
            .expect("cache lock")
            .insert(entry.request_hash.clone(), entry);
        Ok(())
    }
}

/// Something that answers a chat conversation.
pub trait ChatTransport: Send + Sync {
    fn chat(&self, model: &str, params: &GenerationParams, messages: &[ChatMessage]) -> Result<String, EvalError>;
}

/// OpenAI-compatible `POST {base}/chat/completions`.
#[derive(Debug, Clone)]
pub struct HttpTransport {
    pub base_url: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl HttpTransport {
    /// Endpoint and key from [`ENDPOINT_ENV`] and [`API_KEY_ENV`].
    pub fn from_env() -> Result<Self, EvalError> {
        let base_url = std::env::var(ENDPOINT_ENV).map_err(|_| EvalError::MissingEndpoint)?;
        Ok(HttpTransport {
            base_url,
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            timeout: Duration::from_secs(120),
        })
    }
}

impl ChatTransport for HttpTransport {
    fn chat(&self, model: &str, params: &GenerationParams, messages: &[ChatMessage]) -> Result<String, EvalError> {
        let url = format!("{}/chat/completions", self.base_url.trim_end_matches('/'));
        let body = serde_json::json!({
            "model": model,
            "messages": messages,
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        });
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .build()
            .into();
        let mut req = agent.post(&url).header("Content-Type", "application/json");
        if let Some(k) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {k}"));
        }
        let http_err = |message: String, retriable: bool| EvalError::Http {
            url: url.clone(),
            message,
            retriable,
        };
        let mut resp = req.send(body.to_string()).map_err(|e| match e {
            ureq::Error::StatusCode(401 | 403) => EvalError::Auth(url.clone()),
            ureq::Error::StatusCode(code) => http_err(e.to_string(), code == 429 || code >= 500),
            other => http_err(other.to_string(), true),
        })?;
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| http_err(e.to_string(), true))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| http_err(format!("bad JSON: {e}"), false))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| http_err("response has no choices[0].message.content".into(), false))
    }
}

/// Blocks callers once `capacity` requests are in flight.
struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut free = self.free.lock().expect("semaphore lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("semaphore lock");
        }
        *free -= 1;
        SemaphoreGuard(self)
    }
}

struct SemaphoreGuard<'a>(&'a Semaphore);

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("semaphore lock") += 1;
        self.0.cv.notify_one();
    }
}

/// Token bucket: `rate` requests per second, bursts up to `burst`.
struct TokenBucket {
    rate: f64,
    burst: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    fn acquire(&self) {
        loop {
            let wait = {
                let mut st = self.state.lock().expect("bucket lock");
                let now = Instant::now();
                st.0 = (st.0 + now.duration_since(st.1).as_secs_f64() * self.rate).min(self.burst);
                st.1 = now;
                if st.0 >= 1.0 {
                    st.0 -= 1.0;
                    return;
                }
                (1.0 - st.0) / self.rate
            };
            std::thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClientMode {
    /// Serve only from the cache; a miss is an error.
    Replay,
    /// Serve from the cache, calling the endpoint and recording on a miss.
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClientConfig {
    pub model: String,
    pub params: GenerationParams,
    pub max_concurrent: usize,
    /// Requests per second; `None` disables rate limiting.
    pub requests_per_second: Option<f64>,
    pub max_retries: u32,
    pub retry_backoff_ms: u64,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            model: "gpt-3.5-turbo".into(),
            params: GenerationParams::default(),
            max_concurrent: 4,
            requests_per_second: None,
            max_retries: 3,
            retry_backoff_ms: 500,
        }
    }
}

/// Every response of a conversation; the last one is the completion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub responses: Vec<String>,
}

impl Completion {
    pub fn text(&self) -> &str {
        self.responses.last().map(String::as_str).unwrap_or("")
    }
}

pub struct LlmClient {
    mode: ClientMode,
    config: ClientConfig,
    cache: ReplayCache,
    transport: Option<Box<dyn ChatTransport>>,
    slots: Semaphore,
    bucket: Option<TokenBucket>,
}

impl LlmClient {
    pub fn replay(cache: ReplayCache, config: ClientConfig) -> Self {
        Self::build(ClientMode::Replay, cache, config, None)
    }

    pub fn live(cache: ReplayCache, config: ClientConfig, transport: Box<dyn ChatTransport>) -> Self {
        Self::build(ClientMode::Live, cache, config, Some(transport))
    }

    fn build(
        mode: ClientMode,
        cache: ReplayCache,
        config: ClientConfig,
        transport: Option<Box<dyn ChatTransport>>,
    ) -> Self {
        let bucket = config
            .requests_per_second
            .filter(|r| *r > 0.0)
            .map(|rate| TokenBucket {
                rate,
                burst: rate.max(1.0),
                state: Mutex::new((rate.max(1.0), Instant::now())),
            });
        LlmClient {
            mode,
            slots: Semaphore {
                free: Mutex::new(config.max_concurrent.max(1)),
                cv: Condvar::new(),
            },
            config,
            cache,
            transport,
            bucket,
        }
    }

    pub fn mode(&self) -> ClientMode {
        self.mode
    }

    pub fn config(&self) -> &ClientConfig {
        &self.config
    }

    pub fn cache(&self) -> &ReplayCache {
        &self.cache
    }

    fn request(&self, messages: &[ChatMessage]) -> Result<String, EvalError> {
        let model = &self.config.model;
        let params = &self.config.params;
        let hash = request_hash(model, params, messages);
        if let Some(hit) = self.cache.get(&hash) {
            return Ok(hit);
        }
        let transport = match (self.mode, &self.transport) {
            (ClientMode::Live, Some(t)) => t,
            _ => return Err(EvalError::CacheMiss { request_hash: hash }),
        };
        let mut attempt = 0;
        let response = loop {
            let result = {
                let _slot = self.slots.acquire();
                if let Some(b) = &self.bucket {
                    b.acquire();
                }
                transport.chat(model, params, messages)
            };
            match result {
                Ok(r) => break r,
                Err(e) if e.is_retriable() && attempt < self.config.max_retries => {
                    attempt += 1;
                    let backoff = self.config.retry_backoff_ms.saturating_mul(1 << attempt.min(10));
                    log::warn!("retrying request {hash} after error: {e}");
                    std::thread::sleep(Duration::from_millis(backoff));
                }
                Err(e) => return Err(e),
            }
        };
        self.cache.insert(CacheEntry {
            request_hash: hash,
            model: model.clone(),
            params: params.clone(),
            prompts: messages
                .iter()
                .filter(|m| m.role == "user")
                .map(|m| m.content.clone())
                .collect(),
            response: response.clone(),
            timestamp: chrono::Utc::now().to_rfc3339(),
        })?;
        Ok(response)
    }

    /// Send the prompts in order within one conversation.
    pub fn complete(&self, prompts: &[String]) -> Result<Completion, EvalError> {
        let mut messages = Vec::with_capacity(prompts.len() * 2);
        let mut responses = Vec::with_capacity(prompts.len());
        for p in prompts {
            messages.push(ChatMessage::user(p.clone()));
            let r = self.request(&messages)?;
            messages.push(ChatMessage::assistant(r.clone()));
            responses.push(r);
        }
        Ok(Completion { responses })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    struct Echo {
        calls: Arc<AtomicUsize>,
        seen: Arc<Mutex<Vec<usize>>>,
    }

    impl ChatTransport for Echo {
        fn chat(&self, _: &str, _: &GenerationParams, messages: &[ChatMessage]) -> Result<String, EvalError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.seen.lock().unwrap().push(messages.len());
            Ok(format!("reply to {}", messages.last().unwrap().content))
        }
    }

    fn echo() -> (Box<Echo>, Arc<AtomicUsize>, Arc<Mutex<Vec<usize>>>) {
        let calls = Arc::new(AtomicUsize::new(0));
        let seen = Arc::new(Mutex::new(Vec::new()));
        (
            Box::new(Echo {
                calls: calls.clone(),
                seen: seen.clone(),
            }),
            calls,
            seen,
        )
    }

    #[test]
    fn live_records_then_replay_serves() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let (t, calls, _) = echo();
        let live = LlmClient::live(ReplayCache::open(&path).unwrap(), ClientConfig::default(), t);
        let prompts = vec!["hello".to_string()];
        let a = live.complete(&prompts).unwrap();
        let b = live.complete(&prompts).unwrap();
        assert_eq!(a, b);
        assert_eq!(calls.load(Ordering::SeqCst), 1);

        let replay = LlmClient::replay(ReplayCache::open(&path).unwrap(), ClientConfig::default());
        assert_eq!(replay.complete(&prompts).unwrap(), a);
        let miss = replay.complete(&["other".to_string()]).unwrap_err();
        assert!(matches!(miss, EvalError::CacheMiss { .. }));
    }

    #[test]
    fn two_steps_share_conversation() {
        let dir = tempfile::tempdir().unwrap();
        let (t, calls, seen) = echo();
        let c = LlmClient::live(
            ReplayCache::open(dir.path().join("c.jsonl")).unwrap(),
            ClientConfig::default(),
            t,
        );
        let out = c.complete(&["one".into(), "two".into()]).unwrap();
        assert_eq!(calls.load(Ordering::SeqCst), 2);
        assert_eq!(*seen.lock().unwrap(), vec![1, 3]);
        assert_eq!(out.text(), "reply to two");
    }

    #[test]
    fn hash_depends_on_params() {
        let m = [ChatMessage::user("x")];
        let p = GenerationParams::default();
        let q = GenerationParams {
            temperature: 0.5,
            ..p.clone()
        };
        assert_ne!(request_hash("m", &p, &m), request_hash("m", &q, &m));
        assert_eq!(request_hash("m", &p, &m), request_hash("m", &p, &m));
    }
}
