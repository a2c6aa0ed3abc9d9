//! Completion and embedding backends: fixture replay for tests and CI, and
//! HTTP clients with bounded retries for live endpoints.

use std::cell::{Cell, RefCell};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Duration;

use pinnforge_core::provider::{CompletionParams, CompletionProvider, ProviderError};
use pinnforge_core::semantic::{clamped_cosine, SemanticSummary, SimilarityProvider};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const ENV_ENDPOINT: &str = "PINNFORGE_ENDPOINT";
pub const ENV_TOKEN: &str = "PINNFORGE_TOKEN";
pub const ENV_EMBED_ENDPOINT: &str = "PINNFORGE_EMBED_ENDPOINT";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Fixture id of a completion request.
pub fn fixture_key(prompt: &str, params: &CompletionParams) -> String {
    let canonical = serde_json::json!({
        "prompt": prompt,
        "temperature": params.temperature,
        "max_length": params.max_length,
    });
    sha256_hex(canonical.to_string().as_bytes())
}

/// One fixture: successive calls with the same key return successive
/// texts, and the last text repeats once the script runs out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub key: String,
    /// Informational copy of the prompt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    pub texts: Vec<String>,
}

/// Replay provider over a fixture table.
#[derive(Debug, Default)]
pub struct MockProvider {
    fixtures: BTreeMap<String, Fixture>,
    cursor: RefCell<BTreeMap<String, usize>>,
}

impl MockProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, prompt: &str, params: &CompletionParams, text: impl Into<String>) -> String {
        self.insert_script(prompt, params, vec![text.into()])
    }

    pub fn insert_script(&mut self, prompt: &str, params: &CompletionParams, texts: Vec<String>) -> String {
        let key = fixture_key(prompt, params);
        self.fixtures.insert(
            key.clone(),
            Fixture {
                key: key.clone(),
                prompt: Some(prompt.to_string()),
                texts,
            },
        );
        key
    }

    pub fn add(&mut self, fixture: Fixture) {
        self.fixtures.insert(fixture.key.clone(), fixture);
    }

    pub fn contains(&self, key: &str) -> bool {
        self.fixtures.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.fixtures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixtures.is_empty()
    }

    pub fn fixtures(&self) -> impl Iterator<Item = &Fixture> {
        self.fixtures.values()
    }

    /// Restart every script from its first text.
    pub fn rewind(&self) {
        self.cursor.borrow_mut().clear();
    }

    pub fn to_jsonl(&self) -> String {
        self.fixtures
            .values()
            .map(|f| serde_json::to_string(f).expect("fixture serializes") + "\n")
            .collect()
    }

    pub fn from_jsonl(text: &str) -> Result<Self, String> {
        let mut p = Self::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Fixture = serde_json::from_str(line).map_err(|e| format!("line {}: {e}", i + 1))?;
            if f.texts.is_empty() {
                return Err(format!("line {}: fixture {} has no texts", i + 1, f.key));
            }
            p.add(f);
        }
        Ok(p)
    }

    /// Loads every `*.jsonl` file in `dir`, in file-name order.
    pub fn load_dir(dir: &Path) -> Result<Self, String> {
        let mut files: Vec<_> = fs::read_dir(dir)
            .map_err(|e| format!("{}: {e}", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        files.sort();
        let mut all = Self::new();
        for f in files {
            let text = fs::read_to_string(&f).map_err(|e| format!("{}: {e}", f.display()))?;
            let part = Self::from_jsonl(&text).map_err(|e| format!("{}: {e}", f.display()))?;
            all.fixtures.extend(part.fixtures);
        }
        Ok(all)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, self.to_jsonl())
    }
}

impl CompletionProvider for MockProvider {
    fn complete(&self, prompt: &str, params: &CompletionParams) -> Result<String, ProviderError> {
        let key = fixture_key(prompt, params);
        let f = self
            .fixtures
            .get(&key)
            .ok_or_else(|| ProviderError::FixtureMissing(key.clone()))?;
        let mut cursor = self.cursor.borrow_mut();
        let i = cursor.entry(key).or_insert(0);
        let text = f.texts[(*i).min(f.texts.len() - 1)].clone();
        *i += 1;
        Ok(text)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpConfig {
    pub endpoint: String,
    pub token: Option<String>,
    pub timeout: Duration,
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub backoff_base: Duration,
    pub backoff_cap: Duration,
}

impl HttpConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        HttpConfig {
            endpoint: endpoint.into(),
            token: None,
            timeout: Duration::from_secs(60),
            max_retries: 3,
            backoff_base: Duration::from_millis(500),
            backoff_cap: Duration::from_secs(8),
        }
    }

    /// Endpoint from `var`, token from `PINNFORGE_TOKEN`.
    pub fn from_env(var: &str) -> Result<Self, ProviderError> {
        let endpoint = std::env::var(var).map_err(|_| ProviderError::Unavailable(format!("{var} is not set")))?;
        let mut cfg = Self::new(endpoint);
        cfg.token = std::env::var(ENV_TOKEN).ok().filter(|t| !t.is_empty());
        Ok(cfg)
    }

    /// Delay before retry number `attempt` (1-based): base · 2^(attempt-1), capped.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.saturating_sub(1)).unwrap_or(u32::MAX);
        self.backoff_base.saturating_mul(factor).min(self.backoff_cap)
    }
}

/// JSON-over-HTTP transport shared by the completion and embedding clients.
#[derive(Debug)]
struct Transport {
    cfg: HttpConfig,
    agent: ureq::Agent,
    calls: Cell<u64>,
    retries: Cell<u64>,
}

impl Transport {
    fn new(cfg: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Transport {
            cfg,
            agent,
            calls: Cell::new(0),
            retries: Cell::new(0),
        }
    }

    /// Retries transport failures, 429 and 5xx; other statuses fail at once.
    fn post(&self, body: &serde_json::Value) -> Result<serde_json::Value, ProviderError> {
        self.calls.set(self.calls.get() + 1);
        let payload = body.to_string();
        let mut last = String::new();
        for attempt in 0..=self.cfg.max_retries {
            if attempt > 0 {
                self.retries.set(self.retries.get() + 1);
                std::thread::sleep(self.cfg.backoff(attempt));
            }
            let mut req = self
                .agent
                .post(&self.cfg.endpoint)
                .header("content-type", "application/json");
            if let Some(t) = &self.cfg.token {
                req = req.header("authorization", &format!("Bearer {t}"));
            }
            let mut resp = match req.send(payload.as_str()) {
                Ok(r) => r,
                Err(e) => {
                    last = e.to_string();
                    continue;
                }
            };
            let status = resp.status().as_u16();
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            if status == 429 || status >= 500 {
                last = format!("HTTP {status}");
                continue;
            }
            if !(200..300).contains(&status) {
                return Err(ProviderError::Unavailable(format!("HTTP {status}: {}", text.trim())));
            }
            return serde_json::from_str(&text)
                .map_err(|e| ProviderError::Unavailable(format!("malformed response body: {e}")));
        }
        Err(ProviderError::Unavailable(format!(
            "{} after {} attempts: {last}",
            self.cfg.endpoint,
            self.cfg.max_retries + 1
        )))
    }
}

/// Live completion backend: POST `{"prompt", "temperature"}`, reply `{"text"}`.
#[derive(Debug)]
pub struct HttpProvider {
    transport: Transport,
}

impl HttpProvider {
    pub fn new(cfg: HttpConfig) -> Self {
        HttpProvider {
            transport: Transport::new(cfg),
        }
    }

    pub fn from_env() -> Result<Self, ProviderError> {
        Ok(Self::new(HttpConfig::from_env(ENV_ENDPOINT)?))
    }

    pub fn calls(&self) -> u64 {
        self.transport.calls.get()
    }

    pub fn retries(&self) -> u64 {
        self.transport.retries.get()
    }
}

impl CompletionProvider for HttpProvider {
    fn complete(&self, prompt: &str, params: &CompletionParams) -> Result<String, ProviderError> {
        let reply = self.transport.post(&serde_json::json!({
            "prompt": prompt,
            "temperature": params.temperature,
        }))?;
        reply
            .get("text")
            .and_then(|t| t.as_str())
            .map(str::to_string)
            .ok_or_else(|| ProviderError::Unavailable("response has no `text` field".into()))
    }
}

/// Embedding similarity: POST `{"texts": [..]}`, reply `{"vectors": [[..], ..]}`;
/// the score is the clamped cosine of the two summary renderings.
#[derive(Debug)]
pub struct HttpEmbedding {
    transport: Transport,
}

impl HttpEmbedding {
    pub fn new(cfg: HttpConfig) -> Self {
        HttpEmbedding {
            transport: Transport::new(cfg),
        }
    }

    pub fn from_env() -> Result<Self, ProviderError> {
        Ok(Self::new(HttpConfig::from_env(ENV_EMBED_ENDPOINT)?))
    }

    pub fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        let reply = self.transport.post(&serde_json::json!({ "texts": texts }))?;
        let vectors: Vec<Vec<f64>> = reply
            .get("vectors")
            .cloned()
            .and_then(|v| serde_json::from_value(v).ok())
            .ok_or_else(|| ProviderError::Unavailable("response has no `vectors` array".into()))?;
        if vectors.len() != texts.len() {
            return Err(ProviderError::Unavailable(format!(
                "expected {} vectors, got {}",
                texts.len(),
                vectors.len()
            )));
        }
        Ok(vectors)
    }

    pub fn retries(&self) -> u64 {
        self.transport.retries.get()
    }
}

impl SimilarityProvider for HttpEmbedding {
    fn similarity(&self, a: &SemanticSummary, b: &SemanticSummary) -> Result<f64, ProviderError> {
        let v = self.embed(&[a.render(), b.render()])?;
        Ok(clamped_cosine(&v[0], &v[1]))
    }
}

/// One provider exchange as recorded in a run report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub key: String,
    /// sha256 of the reply; absent when the call failed.
    pub reply: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ProviderSummary {
    pub kind: String,
    pub calls: u64,
    pub retries: u64,
    pub transcript: Vec<Exchange>,
}

/// The configured completion backend, with an exchange log.
#[derive(Debug)]
pub enum Backend {
    Mock(MockProvider),
    Http(HttpProvider),
}

#[derive(Debug)]
pub struct Recorded {
    pub backend: Backend,
    log: RefCell<Vec<Exchange>>,
}

impl Recorded {
    pub fn new(backend: Backend) -> Self {
        Recorded {
            backend,
            log: RefCell::new(Vec::new()),
        }
    }

    pub fn summary(&self) -> ProviderSummary {
        let transcript = self.log.borrow().clone();
        match &self.backend {
            Backend::Mock(_) => ProviderSummary {
                kind: "mock".into(),
                calls: transcript.len() as u64,
                retries: 0,
                transcript,
            },
            Backend::Http(h) => ProviderSummary {
                kind: "http".into(),
                calls: h.calls(),
                retries: h.retries(),
                transcript,
            },
        }
    }
}

impl CompletionProvider for Recorded {
    fn complete(&self, prompt: &str, params: &CompletionParams) -> Result<String, ProviderError> {
        let out = match &self.backend {
            Backend::Mock(m) => m.complete(prompt, params),
            Backend::Http(h) => h.complete(prompt, params),
        };
        self.log.borrow_mut().push(Exchange {
            key: fixture_key(prompt, params),
            reply: out.as_ref().ok().map(|t| sha256_hex(t.as_bytes())),
        });
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mock_returns_fixture_verbatim() {
        let params = CompletionParams::default();
        let mut m = MockProvider::new();
        m.insert("hello", &params, "  world\n");
        assert_eq!(m.complete("hello", &params).unwrap(), "  world\n");
    }

    #[test]
    fn missing_fixture_names_the_key() {
        let params = CompletionParams::default();
        let m = MockProvider::new();
        let err = m.complete("nope", &params).unwrap_err();
        assert_eq!(err, ProviderError::FixtureMissing(fixture_key("nope", &params)));
        assert!(err.to_string().contains(&fixture_key("nope", &params)));
    }

    #[test]
    fn key_depends_on_params() {
        let a = CompletionParams::default();
        let b = CompletionParams {
            temperature: 0.0,
            ..a
        };
        assert_ne!(fixture_key("p", &a), fixture_key("p", &b));
        assert_eq!(fixture_key("p", &a).len(), 64);
    }

    #[test]
    fn scripts_advance_then_stick() {
        let params = CompletionParams::default();
        let mut m = MockProvider::new();
        m.insert_script("p", &params, vec!["one".into(), "two".into()]);
        let got: Vec<_> = (0..3).map(|_| m.complete("p", &params).unwrap()).collect();
        assert_eq!(got, ["one", "two", "two"]);
        m.rewind();
        assert_eq!(m.complete("p", &params).unwrap(), "one");
    }

    #[test]
    fn jsonl_round_trip() {
        let params = CompletionParams::default();
        let mut m = MockProvider::new();
        m.insert("a", &params, "x");
        m.insert_script("b", &params, vec!["y".into(), "z".into()]);
        let back = MockProvider::from_jsonl(&m.to_jsonl()).unwrap();
        assert_eq!(back.fixtures().collect::<Vec<_>>(), m.fixtures().collect::<Vec<_>>());
    }

    #[test]
    fn backoff_doubles_up_to_cap() {
        let mut c = HttpConfig::new("http://localhost:1");
        c.backoff_base = Duration::from_millis(100);
        c.backoff_cap = Duration::from_millis(350);
        let d: Vec<_> = (1..=4).map(|a| c.backoff(a).as_millis()).collect();
        assert_eq!(d, [100, 200, 350, 350]);
    }
}
