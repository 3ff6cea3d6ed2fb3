//! HTTP fetching behind a small synchronous trait, with per-host politeness.
//!
//! Harvesting and crawling only ever see [`Fetcher`], so tests substitute
//! the in-process fixture world and instrument every request.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use parking_lot::Mutex;

/// User agent sent with every request and matched against robots groups.
pub const USER_AGENT: &str = concat!("trialkb/", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchResponse {
    pub url: String,
    pub status: u16,
    pub body: Vec<u8>,
    pub content_type: Option<String>,
}

impl FetchResponse {
    pub fn ok(url: impl Into<String>, body: impl Into<Vec<u8>>) -> Self {
        FetchResponse {
            url: url.into(),
            status: 200,
            body: body.into(),
            content_type: None,
        }
    }

    pub fn status(url: impl Into<String>, status: u16) -> Self {
        FetchResponse {
            url: url.into(),
            status,
            body: Vec::new(),
            content_type: None,
        }
    }

    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FetchError {
    #[error("timeout fetching {0}")]
    Timeout(String),
    #[error("transport error fetching {url}: {reason}")]
    Transport { url: String, reason: String },
}

pub trait Fetcher: Send + Sync {
    fn fetch(&self, url: &str) -> Result<FetchResponse, FetchError>;
}

impl<F: Fetcher + ?Sized> Fetcher for Arc<F> {
    fn fetch(&self, url: &str) -> Result<FetchResponse, FetchError> {
        (**self).fetch(url)
    }
}

impl<F: Fetcher + ?Sized> Fetcher for &F {
    fn fetch(&self, url: &str) -> Result<FetchResponse, FetchError> {
        (**self).fetch(url)
    }
}

/// Host key used for politeness accounting (`host[:port]`).
pub fn host_key(url: &str) -> String {
    match url::Url::parse(url) {
        Ok(u) => match (u.host_str(), u.port()) {
            (Some(h), Some(p)) => format!("{h}:{p}"),
            (Some(h), None) => h.to_string(),
            _ => String::new(),
        },
        Err(_) => String::new(),
    }
}

/// Serializes requests per host and waits `delay` after each response before
/// the next request to that host.
///
/// Holding the host's lock across the request keeps a single request in
/// flight per host; different hosts proceed in parallel.
pub struct PoliteFetcher<F> {
    inner: F,
    delay: Duration,
    hosts: Mutex<HashMap<String, Arc<Mutex<Option<Instant>>>>>,
}

impl<F: Fetcher> PoliteFetcher<F> {
    pub fn new(inner: F, delay: Duration) -> Self {
        PoliteFetcher {
            inner,
            delay,
            hosts: Mutex::new(HashMap::new()),
        }
    }

    pub fn inner(&self) -> &F {
        &self.inner
    }

    fn slot(&self, host: &str) -> Arc<Mutex<Option<Instant>>> {
        self.hosts.lock().entry(host.to_string()).or_default().clone()
    }
}

impl<F: Fetcher> Fetcher for PoliteFetcher<F> {
    fn fetch(&self, url: &str) -> Result<FetchResponse, FetchError> {
        let slot = self.slot(&host_key(url));
        let mut last = slot.lock();
        if let Some(prev) = *last {
            let ready = prev + self.delay;
            let now = Instant::now();
            if ready > now {
                std::thread::sleep(ready - now);
            }
        }
        // The host stays locked for the whole request and the delay counts
        // from its completion, so request starts are at least `delay` apart
        // however long each request takes.
        let result = self.inner.fetch(url);
        *last = Some(Instant::now());
        result
    }
}

/// One observed request.
#[derive(Debug, Clone)]
pub struct FetchRecord {
    pub url: String,
    pub host: String,
    pub at: Instant,
}

/// Records every request before delegating; used to check politeness and
/// duplicate-fetch properties.
pub struct RecordingFetcher<F> {
    inner: F,
    log: Mutex<Vec<FetchRecord>>,
}

impl<F: Fetcher> RecordingFetcher<F> {
    pub fn new(inner: F) -> Self {
        RecordingFetcher {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn records(&self) -> Vec<FetchRecord> {
        self.log.lock().clone()
    }

    pub fn urls(&self) -> Vec<String> {
        self.log.lock().iter().map(|r| r.url.clone()).collect()
    }

    pub fn count(&self) -> usize {
        self.log.lock().len()
    }

    /// Smallest gap between consecutive request starts on the same host.
    pub fn min_gap_per_host(&self) -> Option<Duration> {
        let log = self.log.lock();
        let mut last: HashMap<&str, Instant> = HashMap::new();
        let mut min: Option<Duration> = None;
        for r in log.iter() {
            if let Some(prev) = last.insert(r.host.as_str(), r.at) {
                let gap = r.at.saturating_duration_since(prev);
                min = Some(min.map_or(gap, |m| m.min(gap)));
            }
        }
        min
    }
}

impl<F: Fetcher> Fetcher for RecordingFetcher<F> {
    fn fetch(&self, url: &str) -> Result<FetchResponse, FetchError> {
        self.log.lock().push(FetchRecord {
            url: url.to_string(),
            host: host_key(url),
            at: Instant::now(),
        });
        self.inner.fetch(url)
    }
}

#[derive(Debug, Clone)]
pub struct HttpConfig {
    pub timeout: Duration,
    /// Route every request through this HTTP proxy (used to point real
    /// hostnames at the local fixture server).
    pub proxy: Option<String>,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            timeout: Duration::from_secs(20),
            proxy: None,
        }
    }
}

/// Blocking HTTP client. Must not be used from inside an async runtime.
pub struct HttpFetcher {
    client: reqwest::blocking::Client,
}

impl HttpFetcher {
    pub fn new(config: &HttpConfig) -> Result<Self, FetchError> {
        let mut builder = reqwest::blocking::Client::builder()
            .user_agent(USER_AGENT)
            .timeout(config.timeout)
            .redirect(reqwest::redirect::Policy::limited(5));
        if let Some(proxy) = &config.proxy {
            let p = reqwest::Proxy::all(proxy).map_err(|e| FetchError::Transport {
                url: proxy.clone(),
                reason: e.to_string(),
            })?;
            builder = builder.proxy(p);
        } else {
            builder = builder.no_proxy();
        }
        let client = builder.build().map_err(|e| FetchError::Transport {
            url: String::new(),
            reason: e.to_string(),
        })?;
        Ok(HttpFetcher { client })
    }
}

impl Fetcher for HttpFetcher {
    fn fetch(&self, url: &str) -> Result<FetchResponse, FetchError> {
        let map_err = |e: reqwest::Error| {
            if e.is_timeout() {
                FetchError::Timeout(url.to_string())
            } else {
                FetchError::Transport {
                    url: url.to_string(),
                    reason: e.to_string(),
                }
            }
        };
        let resp = self.client.get(url).send().map_err(map_err)?;
        let status = resp.status().as_u16();
        let content_type = resp
            .headers()
            .get(reqwest::header::CONTENT_TYPE)
            .and_then(|v| v.to_str().ok())
            .map(str::to_string);
        let body = resp.bytes().map_err(map_err)?.to_vec();
        Ok(FetchResponse {
            url: url.to_string(),
            status,
            body,
            content_type,
        })
    }
}
