use std::path::PathBuf;
use std::time::Duration;

use agentscan::ghminer::{
    HttpRequest, HttpResponse, HttpTransport, ReplayTransport, TransportError,
};

/// Live HTTPS transport. Non-2xx responses are returned, not raised, so the
/// client can read rate-limit headers.
pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new() -> Self {
        UreqTransport {
            agent: ureq::AgentBuilder::new()
                .timeout(Duration::from_secs(60))
                .build(),
        }
    }
}

impl HttpTransport for UreqTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let mut req = self.agent.request(&request.method, &request.url);
        for (k, v) in &request.headers {
            req = req.set(k, v);
        }
        let resp = match req.call() {
            Ok(r) => r,
            Err(ureq::Error::Status(_, r)) => r,
            Err(e) => return Err(TransportError::Network(e.to_string())),
        };
        let status = resp.status();
        let headers = resp
            .headers_names()
            .into_iter()
            .filter_map(|n| resp.header(&n).map(|v| (n.clone(), v.to_string())))
            .collect();
        let body = resp
            .into_string()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        Ok(HttpResponse {
            status,
            headers,
            body,
        })
    }
}

/// Forwards to another transport and saves every response for later replay.
pub struct RecordingTransport<T> {
    inner: T,
    store: ReplayTransport,
}

impl<T: HttpTransport> RecordingTransport<T> {
    pub fn new(inner: T, dir: PathBuf) -> Self {
        RecordingTransport {
            inner,
            store: ReplayTransport::new(dir),
        }
    }
}

impl<T: HttpTransport> HttpTransport for RecordingTransport<T> {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let resp = self.inner.send(request)?;
        // only interesting headers are kept so recordings stay reviewable
        let mut kept = HttpResponse::new(resp.status, resp.body.clone());
        for name in [
            "link",
            "retry-after",
            "x-ratelimit-remaining",
            "x-ratelimit-reset",
        ] {
            if let Some(v) = resp.header(name) {
                kept = kept.with_header(name, v);
            }
        }
        self.store
            .record(request, &kept)
            .map_err(|e| TransportError::Network(format!("could not save recording: {e}")))?;
        Ok(resp)
    }
}
