//! HTTP backend: `POST {base_url}/v1/tasks/{task}` with a JSON body
//! `{"task": ..., "request": ...}`; the reply body is the response payload.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Provider, Task};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteConfig {
    pub base_url: String,
    /// Name of the environment variable holding the bearer credential.
    pub credential_env: String,
    pub timeout_secs: f64,
    pub retry_budget: u32,
    pub backoff_ms: u64,
    pub max_in_flight: usize,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            base_url: String::new(),
            credential_env: "INQUIRY_API_KEY".into(),
            timeout_secs: 30.0,
            retry_budget: 3,
            backoff_ms: 250,
            max_in_flight: 4,
        }
    }
}

impl RemoteConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            out.push(format!("remote.base_url {:?} is not an http(s) URL", self.base_url));
        }
        if self.credential_env.trim().is_empty() {
            out.push("remote.credential_env is empty".into());
        }
        if !self.timeout_secs.is_finite() || self.timeout_secs <= 0.0 {
            out.push("remote.timeout_secs must be positive".into());
        }
        if self.max_in_flight == 0 {
            out.push("remote.max_in_flight must be at least 1".into());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

/// The network boundary; swapped out in tests.
pub trait Transport: Send + Sync {
    fn post(&self, url: &str, credential: &str, body: &str, timeout: Duration) -> std::result::Result<HttpReply, String>;
}

#[cfg(feature = "remote")]
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

#[cfg(feature = "remote")]
impl HttpTransport {
    pub fn new() -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(Self { client })
    }
}

#[cfg(feature = "remote")]
impl Transport for HttpTransport {
    fn post(&self, url: &str, credential: &str, body: &str, timeout: Duration) -> std::result::Result<HttpReply, String> {
        let resp = self
            .client
            .post(url)
            .bearer_auth(credential)
            .header("content-type", "application/json")
            .timeout(timeout)
            .body(body.to_string())
            .send()
            .map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| e.to_string())?;
        Ok(HttpReply { status, body })
    }
}

/// Counting semaphore bounding in-flight requests.
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Slots);

impl Slots {
    fn new(n: usize) -> Self {
        Self { free: Mutex::new(n), cv: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|p| p.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|p| p.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|p| p.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

pub struct RemoteProvider {
    config: RemoteConfig,
    credential: String,
    transport: Box<dyn Transport>,
    slots: Slots,
    retries: AtomicU64,
}

#[derive(Serialize)]
struct Envelope<'a> {
    task: Task,
    request: &'a serde_json::Value,
}

impl RemoteProvider {
    #[cfg(feature = "remote")]
    pub fn from_config(config: RemoteConfig) -> Result<Self> {
        let credential = std::env::var(&config.credential_env)
            .map_err(|_| Error::Config(format!("environment variable {} is not set", config.credential_env)))?;
        Self::with_transport(config, credential, Box::new(HttpTransport::new()?))
    }

    #[cfg(not(feature = "remote"))]
    pub fn from_config(_config: RemoteConfig) -> Result<Self> {
        Err(Error::Config("built without the `remote` feature".into()))
    }

    pub fn with_transport(config: RemoteConfig, credential: String, transport: Box<dyn Transport>) -> Result<Self> {
        let problems = config.problems();
        if !problems.is_empty() {
            return Err(Error::Config(problems.join("; ")));
        }
        Ok(Self {
            slots: Slots::new(config.max_in_flight),
            config,
            credential,
            transport,
            retries: AtomicU64::new(0),
        })
    }

    /// Retries performed so far, across all calls.
    pub fn retries(&self) -> u64 {
        self.retries.load(Ordering::Relaxed)
    }

    fn url(&self, task: Task) -> String {
        format!("{}/v1/tasks/{}", self.config.base_url.trim_end_matches('/'), task)
    }
}

impl Provider for RemoteProvider {
    fn complete(&self, task: Task, request: &serde_json::Value) -> Result<serde_json::Value> {
        let body = serde_json::to_string(&Envelope { task, request }).expect("json value serializes");
        let url = self.url(task);
        let timeout = Duration::from_secs_f64(self.config.timeout_secs);
        let mut last = String::new();
        for attempt in 0..=self.config.retry_budget {
            if attempt > 0 {
                self.retries.fetch_add(1, Ordering::Relaxed);
                tracing::warn!(%task, attempt, error = %last, "retrying provider request");
                let wait = self.config.backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                std::thread::sleep(Duration::from_millis(wait));
            }
            let reply = {
                let _permit = self.slots.acquire();
                self.transport.post(&url, &self.credential, &body, timeout)
            };
            match reply {
                Ok(r) if (200..300).contains(&r.status) => {
                    return serde_json::from_str(&r.body).map_err(|e| Error::SchemaViolation {
                        task: task.to_string(),
                        path: ".".into(),
                        detail: format!("response is not JSON: {e}"),
                    });
                }
                Ok(r) if r.status == 429 || r.status >= 500 => last = format!("HTTP {}", r.status),
                Ok(r) => return Err(Error::provider(task.as_str(), format!("HTTP {}: {}", r.status, r.body))),
                Err(e) => last = e,
            }
        }
        Err(Error::provider(
            task.as_str(),
            format!("gave up after {} attempts: {last}", self.config.retry_budget + 1),
        ))
    }

    fn backend(&self) -> &'static str {
        "remote"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    struct Flaky {
        failures: Mutex<u32>,
        seen: Arc<Mutex<Vec<String>>>,
    }

    impl Transport for Flaky {
        fn post(&self, url: &str, _: &str, body: &str, _: Duration) -> std::result::Result<HttpReply, String> {
            self.seen.lock().unwrap().push(format!("{url} {body}"));
            let mut left = self.failures.lock().unwrap();
            if *left > 0 {
                *left -= 1;
                return Ok(HttpReply { status: 503, body: String::new() });
            }
            Ok(HttpReply { status: 200, body: r#"{"confidence":0.7}"#.into() })
        }
    }

    fn config() -> RemoteConfig {
        RemoteConfig {
            base_url: "http://model.invalid".into(),
            backoff_ms: 0,
            ..Default::default()
        }
    }

    fn provider(failures: u32) -> (RemoteProvider, Arc<Mutex<Vec<String>>>) {
        let seen = Arc::new(Mutex::new(Vec::new()));
        let t = Flaky { failures: Mutex::new(failures), seen: seen.clone() };
        (RemoteProvider::with_transport(config(), "k".into(), Box::new(t)).unwrap(), seen)
    }

    #[test]
    fn recovers_after_two_failures() {
        let (p, seen) = provider(2);
        let out = p.complete(Task::DescriptorScore, &serde_json::json!({})).unwrap();
        assert_eq!(out["confidence"], 0.7);
        assert_eq!(p.retries(), 2);
        let seen = seen.lock().unwrap();
        assert_eq!(seen.len(), 3);
        assert!(seen[0].starts_with("http://model.invalid/v1/tasks/descriptor_score "));
    }

    #[test]
    fn exhausted_budget_is_a_provider_failure() {
        let (p, _) = provider(10);
        let err = p.complete(Task::ErrorRanking, &serde_json::json!({})).unwrap_err();
        assert!(matches!(err, Error::ProviderFailure { .. }));
        assert_eq!(p.retries(), 3);
    }

    #[test]
    fn rejects_bad_config() {
        let bad = RemoteConfig { base_url: "ftp://x".into(), ..Default::default() };
        let t = Flaky { failures: Mutex::new(0), seen: Default::default() };
        assert!(RemoteProvider::with_transport(bad, "k".into(), Box::new(t)).is_err());
    }

    #[test]
    fn in_flight_requests_are_bounded() {
        use std::sync::atomic::AtomicUsize;
        struct Slow {
            now: AtomicUsize,
            peak: AtomicUsize,
        }
        impl Transport for Slow {
            fn post(&self, _: &str, _: &str, _: &str, _: Duration) -> std::result::Result<HttpReply, String> {
                let n = self.now.fetch_add(1, Ordering::SeqCst) + 1;
                self.peak.fetch_max(n, Ordering::SeqCst);
                std::thread::sleep(Duration::from_millis(5));
                self.now.fetch_sub(1, Ordering::SeqCst);
                Ok(HttpReply { status: 200, body: "{}".into() })
            }
        }
        let cfg = RemoteConfig { max_in_flight: 2, ..config() };
        let t = Arc::new(Slow { now: AtomicUsize::new(0), peak: AtomicUsize::new(0) });
        struct Shared(Arc<Slow>);
        impl Transport for Shared {
            fn post(&self, u: &str, c: &str, b: &str, d: Duration) -> std::result::Result<HttpReply, String> {
                self.0.post(u, c, b, d)
            }
        }
        let p = RemoteProvider::with_transport(cfg, "k".into(), Box::new(Shared(t.clone()))).unwrap();
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| p.complete(Task::SemanticCheck, &serde_json::json!({})).unwrap());
            }
        });
        assert!(t.peak.load(Ordering::SeqCst) <= 2);
    }
}
