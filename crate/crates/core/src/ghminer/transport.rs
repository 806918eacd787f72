//! HTTP boundary, recorded-response fixtures and request rate budgeting.

use std::cell::{Cell, RefCell};
use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpRequest {
    pub method: String,
    pub url: String,
    pub headers: Vec<(String, String)>,
}

impl HttpRequest {
    pub fn get(url: impl Into<String>) -> Self {
        HttpRequest {
            method: "GET".into(),
            url: url.into(),
            headers: Vec::new(),
        }
    }

    pub fn header(mut self, name: &str, value: impl Into<String>) -> Self {
        self.headers.push((name.to_string(), value.into()));
        self
    }

    /// Path and query of the URL, e.g. `/repos/o/r/pulls?state=all`.
    pub fn path_and_query(&self) -> String {
        match url::Url::parse(&self.url) {
            Ok(u) => match u.query() {
                Some(q) => format!("{}?{q}", u.path()),
                None => u.path().to_string(),
            },
            Err(_) => self.url.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TransportError {
    #[error("network error: {0}")]
    Network(String),
    #[error("no recorded response for {0}")]
    NoRecording(String),
    #[error("malformed recorded response: {0}")]
    Malformed(String),
}

impl HttpResponse {
    pub fn new(status: u16, body: impl Into<String>) -> Self {
        HttpResponse {
            status,
            headers: Vec::new(),
            body: body.into(),
        }
    }

    pub fn with_header(mut self, name: &str, value: impl Into<String>) -> Self {
        self.headers.push((name.to_string(), value.into()));
        self
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    /// Parses a recorded response: status line, header lines, blank line, body.
    pub fn parse_recorded(text: &str) -> Result<Self, TransportError> {
        let text = text.replace("\r\n", "\n");
        let (head, body) = text.split_once("\n\n").unwrap_or((text.as_str(), ""));
        let mut lines = head.lines();
        let status_line = lines
            .next()
            .ok_or_else(|| TransportError::Malformed("missing status line".into()))?;
        let status = status_line
            .split_whitespace()
            .nth(1)
            .and_then(|s| s.parse::<u16>().ok())
            .ok_or_else(|| TransportError::Malformed(format!("bad status line `{status_line}`")))?;
        let mut headers = Vec::new();
        for line in lines {
            let (k, v) = line
                .split_once(':')
                .ok_or_else(|| TransportError::Malformed(format!("bad header line `{line}`")))?;
            headers.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(HttpResponse {
            status,
            headers,
            body: body.to_string(),
        })
    }

    pub fn to_recorded(&self) -> String {
        let mut out = format!("HTTP/1.1 {}\n", self.status);
        for (k, v) in &self.headers {
            out.push_str(&format!("{k}: {v}\n"));
        }
        out.push('\n');
        out.push_str(&self.body);
        out
    }
}

pub trait HttpTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError>;
}

impl<T: HttpTransport + ?Sized> HttpTransport for &T {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        (**self).send(request)
    }
}

/// File name a request's recording is stored under.
pub fn recording_name(request: &HttpRequest) -> String {
    let key = format!("{} {}", request.method, request.path_and_query());
    let mut name: String = key
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect();
    name.push_str(".http");
    name
}

/// Replays responses recorded one per file in a directory.
#[derive(Debug, Clone)]
pub struct ReplayTransport {
    dir: PathBuf,
}

impl ReplayTransport {
    pub fn new(dir: impl AsRef<Path>) -> Self {
        ReplayTransport {
            dir: dir.as_ref().to_path_buf(),
        }
    }

    pub fn record(&self, request: &HttpRequest, response: &HttpResponse) -> std::io::Result<()> {
        fs::create_dir_all(&self.dir)?;
        fs::write(
            self.dir.join(recording_name(request)),
            response.to_recorded(),
        )
    }
}

impl HttpTransport for ReplayTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let path = self.dir.join(recording_name(request));
        let text = fs::read_to_string(&path)
            .map_err(|_| TransportError::NoRecording(request.path_and_query()))?;
        HttpResponse::parse_recorded(&text)
    }
}

/// In-memory transport keyed by path and query; records every request.
#[derive(Debug, Default)]
pub struct MockTransport {
    responses: HashMap<String, HttpResponse>,
    log: RefCell<Vec<HttpRequest>>,
}

impl MockTransport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn respond(mut self, path_and_query: &str, response: HttpResponse) -> Self {
        self.responses.insert(path_and_query.to_string(), response);
        self
    }

    pub fn requests(&self) -> Vec<HttpRequest> {
        self.log.borrow().clone()
    }
}

impl HttpTransport for MockTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        self.log.borrow_mut().push(request.clone());
        let key = request.path_and_query();
        self.responses
            .get(&key)
            .cloned()
            .ok_or(TransportError::NoRecording(key))
    }
}

pub trait Clock {
    fn now_ms(&self) -> i64;
    fn sleep_ms(&self, ms: u64);
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> i64 {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis() as i64)
            .unwrap_or(0)
    }

    fn sleep_ms(&self, ms: u64) {
        std::thread::sleep(std::time::Duration::from_millis(ms));
    }
}

/// Deterministic clock for tests: sleeping advances time instantly.
#[derive(Debug, Default)]
pub struct ManualClock {
    now: Cell<i64>,
}

impl ManualClock {
    pub fn starting_at(ms: i64) -> Self {
        ManualClock { now: Cell::new(ms) }
    }

    pub fn advance(&self, ms: i64) {
        self.now.set(self.now.get() + ms);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> i64 {
        self.now.get()
    }

    fn sleep_ms(&self, ms: u64) {
        self.advance(ms as i64);
    }
}

/// Client-side view of the platform's request quota.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RateBudget {
    /// Requests left in the current window; `u64::MAX` until the platform reports one.
    pub remaining: u64,
    /// Window reset, UTC seconds.
    pub reset_at: i64,
    pub min_interval_ms: u64,
    last_request_ms: Option<i64>,
}

impl RateBudget {
    pub fn new(min_interval_ms: u64) -> Self {
        RateBudget {
            remaining: u64::MAX,
            reset_at: 0,
            min_interval_ms,
            last_request_ms: None,
        }
    }

    /// Reserves one request slot, sleeping to honor `min_interval_ms`.
    /// Returns the reset time when the quota is exhausted.
    pub fn acquire(&mut self, clock: &dyn Clock) -> Result<(), i64> {
        let mut now = clock.now_ms();
        if self.remaining == 0 {
            if now < self.reset_at * 1000 {
                return Err(self.reset_at);
            }
            self.remaining = u64::MAX;
        }
        if let Some(last) = self.last_request_ms {
            let wait = last + self.min_interval_ms as i64 - now;
            if wait > 0 {
                clock.sleep_ms(wait as u64);
                now = clock.now_ms();
            }
        }
        self.last_request_ms = Some(now);
        self.remaining = self.remaining.saturating_sub(1);
        Ok(())
    }

    /// Updates the budget from `x-ratelimit-*` / `retry-after` headers.
    pub fn observe(&mut self, response: &HttpResponse, clock: &dyn Clock) {
        if let Some(remaining) = response
            .header("x-ratelimit-remaining")
            .and_then(|v| v.parse::<u64>().ok())
        {
            self.remaining = remaining;
        }
        if let Some(reset) = response
            .header("x-ratelimit-reset")
            .and_then(|v| v.parse::<i64>().ok())
        {
            self.reset_at = reset;
        }
        if matches!(response.status, 403 | 429) {
            self.remaining = 0;
            if let Some(secs) = response
                .header("retry-after")
                .and_then(|v| v.parse::<i64>().ok())
            {
                self.reset_at = self.reset_at.max(clock.now_ms() / 1000 + secs);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recorded_format_round_trip() {
        let resp = HttpResponse::new(200, "{\"total_count\": 3}")
            .with_header("x-ratelimit-remaining", "9")
            .with_header("link", "<https://api.github.com/x?page=2>; rel=\"next\"");
        let parsed = HttpResponse::parse_recorded(&resp.to_recorded()).unwrap();
        assert_eq!(parsed, resp);
        assert_eq!(parsed.header("X-RateLimit-Remaining"), Some("9"));
    }

    #[test]
    fn recorded_crlf_and_errors() {
        let r = HttpResponse::parse_recorded("HTTP/1.1 404 Not Found\r\nA: b\r\n\r\n{}").unwrap();
        assert_eq!((r.status, r.body.as_str()), (404, "{}"));
        assert!(HttpResponse::parse_recorded("garbage").is_err());
    }

    #[test]
    fn replay_reads_recordings() {
        let dir = tempfile::tempdir().unwrap();
        let t = ReplayTransport::new(dir.path());
        let req = HttpRequest::get("https://api.github.com/search/code?q=x&per_page=1");
        assert!(matches!(t.send(&req), Err(TransportError::NoRecording(_))));
        t.record(&req, &HttpResponse::new(200, "{}")).unwrap();
        assert_eq!(t.send(&req).unwrap().status, 200);
        assert_eq!(recording_name(&req), "GET__search_code_q_x_per_page_1.http");
    }

    #[test]
    fn budget_spacing_and_exhaustion() {
        let clock = ManualClock::starting_at(1_000_000);
        let mut b = RateBudget::new(250);
        b.acquire(&clock).unwrap();
        b.acquire(&clock).unwrap();
        assert_eq!(clock.now_ms(), 1_000_250);
        b.observe(
            &HttpResponse::new(403, "").with_header("x-ratelimit-reset", "2000"),
            &clock,
        );
        assert_eq!(b.acquire(&clock), Err(2000));
        clock.advance(1_000_000);
        assert!(b.acquire(&clock).is_ok());
    }

    #[test]
    fn retry_after_sets_reset() {
        let clock = ManualClock::starting_at(10_000);
        let mut b = RateBudget::new(0);
        b.observe(
            &HttpResponse::new(429, "").with_header("retry-after", "30"),
            &clock,
        );
        assert_eq!(b.remaining, 0);
        assert_eq!(b.reset_at, 40);
    }
}
