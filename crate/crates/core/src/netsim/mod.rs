//! In-process simulated network with fault injection.
//!
//! Name resolution, TCP-style connections and HTTP GET run against
//! registered in-memory endpoints. Every [`NetError`] reports its creation
//! to the sanitiser's [`EventRegistry`] in the creating thread's context,
//! whether or not the caller ever propagates it.

mod state;

use std::collections::BTreeMap;
use std::fmt;
use std::net::Ipv4Addr;
use std::sync::{Arc, RwLock};

use thiserror::Error;
use url::Url;

use crate::context::ContextId;
use crate::model::{ErrorDescriptor, TestSignal};
use crate::sanitiser::{EventRegistry, NetworkErrorKind};

pub use state::{HostOverride, NetworkMode, NetworkState};

pub const TAG_CONNECTION_REFUSED: &str = "SocketFailure.ConnectionRefused";
pub const TAG_CONNECTION_RESET: &str = "SocketFailure.ConnectionReset";

const READ_CHUNK: usize = 64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetsimError {
    #[error("endpoint {0}:{1} is already registered")]
    DuplicateEndpoint(String, u16),
    #[error("network config: {0}")]
    Config(String),
}

/// A simulated network error.
///
/// The only constructor records a creation event, so every value in
/// existence has exactly one matching event in its registry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetError {
    kind: NetworkErrorKind,
    tag: String,
    message: String,
    context: ContextId,
    event_seq: u64,
}

impl NetError {
    /// Creates an error of `kind`. `tag` is the cause-chain kind tag, which
    /// is either the kind's name or a refinement of it.
    pub fn new(
        registry: &EventRegistry,
        kind: NetworkErrorKind,
        tag: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        let context = ContextId::current();
        let event_seq = registry.record_creation(kind.clone(), context);
        Self {
            kind,
            tag: tag.into(),
            message: message.into(),
            context,
            event_seq,
        }
    }

    pub fn kind(&self) -> &NetworkErrorKind {
        &self.kind
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn message(&self) -> &str {
        &self.message
    }

    pub fn context(&self) -> ContextId {
        self.context
    }

    /// Sequence number of the creation event.
    pub fn event_seq(&self) -> u64 {
        self.event_seq
    }

    pub fn descriptor(&self) -> ErrorDescriptor {
        ErrorDescriptor::new(self.tag.clone(), self.message.clone())
    }
}

impl fmt::Display for NetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.tag, self.message)
    }
}

impl std::error::Error for NetError {}

impl From<NetError> for TestSignal {
    fn from(e: NetError) -> Self {
        TestSignal::unhandled(vec![e.descriptor()])
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HttpGetError {
    #[error(transparent)]
    Network(#[from] NetError),
    #[error("malformed url `{0}`")]
    MalformedUrl(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
}

impl From<HttpGetError> for TestSignal {
    fn from(e: HttpGetError) -> Self {
        match e {
            HttpGetError::Network(n) => n.into(),
            HttpGetError::MalformedUrl(u) => TestSignal::error("MalformedUrl", u),
            HttpGetError::MalformedResponse(m) => TestSignal::error("MalformedResponse", m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Address {
    pub host: String,
    pub ip: Ipv4Addr,
}

impl Address {
    fn synthetic(host: &str) -> Self {
        // FNV-1a, folded into 10.0.0.0/8
        let h = host
            .bytes()
            .fold(0x811c_9dc5u32, |h, b| (h ^ u32::from(b)).wrapping_mul(0x0100_0193));
        let [_, b, c, d] = h.to_be_bytes();
        Self {
            host: host.to_string(),
            ip: Ipv4Addr::new(10, b, c, d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: Vec<u8>,
}

impl HttpResponse {
    pub fn new(status: u16, body: impl Into<Vec<u8>>) -> Self {
        Self {
            status,
            body: body.into(),
        }
    }

    pub fn ok(body: impl Into<Vec<u8>>) -> Self {
        Self::new(200, body)
    }

    pub fn not_found() -> Self {
        Self::new(404, "not found")
    }

    pub fn body_text(&self) -> String {
        String::from_utf8_lossy(&self.body).into_owned()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = format!(
            "HTTP/1.1 {} {}\r\nContent-Length: {}\r\n\r\n",
            self.status,
            reason(self.status),
            self.body.len()
        )
        .into_bytes();
        out.extend_from_slice(&self.body);
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, HttpGetError> {
        let split = bytes
            .windows(4)
            .position(|w| w == b"\r\n\r\n")
            .ok_or_else(|| HttpGetError::MalformedResponse("missing header terminator".into()))?;
        let head = std::str::from_utf8(&bytes[..split])
            .map_err(|_| HttpGetError::MalformedResponse("non-utf8 header".into()))?;
        let status_line = head.lines().next().unwrap_or_default();
        let mut parts = status_line.split_whitespace();
        let status = match (parts.next(), parts.next()) {
            (Some(v), Some(code)) if v.starts_with("HTTP/") => code
                .parse()
                .map_err(|_| HttpGetError::MalformedResponse(format!("bad status `{code}`")))?,
            _ => return Err(HttpGetError::MalformedResponse(format!("bad status line `{status_line}`"))),
        };
        Ok(Self::new(status, &bytes[split + 4..]))
    }
}

fn reason(status: u16) -> &'static str {
    match status {
        200 => "OK",
        404 => "Not Found",
        500 => "Internal Server Error",
        503 => "Service Unavailable",
        _ => "Unknown",
    }
}

type Handler = Arc<dyn Fn(&[u8]) -> Vec<u8> + Send + Sync>;

/// A simulated service listening on `host:port`.
#[derive(Clone)]
pub struct Endpoint {
    pub host: String,
    pub port: u16,
    handler: Handler,
}

impl Endpoint {
    /// An endpoint answering raw request bytes with raw response bytes.
    pub fn new<F>(host: impl Into<String>, port: u16, handler: F) -> Self
    where
        F: Fn(&[u8]) -> Vec<u8> + Send + Sync + 'static,
    {
        Self {
            host: host.into(),
            port,
            handler: Arc::new(handler),
        }
    }

    /// An HTTP endpoint routing GET requests by path.
    pub fn http<F>(host: impl Into<String>, port: u16, route: F) -> Self
    where
        F: Fn(&str) -> HttpResponse + Send + Sync + 'static,
    {
        Self::new(host, port, move |req| {
            let text = String::from_utf8_lossy(req);
            let mut parts = text.split_whitespace();
            match (parts.next(), parts.next()) {
                (Some("GET"), Some(path)) => route(path).to_bytes(),
                _ => HttpResponse::new(400, "bad request").to_bytes(),
            }
        })
    }
}

impl fmt::Debug for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Endpoint({}:{})", self.host, self.port)
    }
}

/// An open simulated connection.
pub struct Connection<'a> {
    net: &'a Network,
    host: String,
    handler: Handler,
    drop_after: Option<usize>,
    response: Vec<u8>,
    delivered: usize,
}

impl Connection<'_> {
    pub fn host(&self) -> &str {
        &self.host
    }

    fn check_link(&self) -> Result<(), NetError> {
        if self.net.mode() == NetworkMode::Off {
            return Err(self.net.error(
                NetworkErrorKind::SocketFailure,
                TAG_CONNECTION_RESET,
                format!("connection to {} lost: network down", self.host),
            ));
        }
        Ok(())
    }

    /// Sends a request; the endpoint's response becomes readable.
    pub fn send(&mut self, request: &[u8]) -> Result<(), NetError> {
        self.check_link()?;
        self.response = (self.handler)(request);
        self.delivered = 0;
        Ok(())
    }

    /// Reads response bytes; `Ok(0)` signals the end of the response.
    pub fn read(&mut self, buf: &mut [u8]) -> Result<usize, NetError> {
        self.check_link()?;
        let mut n = (self.response.len() - self.delivered).min(buf.len());
        if let Some(limit) = self.drop_after {
            if self.delivered >= limit {
                return Err(self.net.error(
                    NetworkErrorKind::SocketFailure,
                    TAG_CONNECTION_RESET,
                    format!("connection to {} reset after {} bytes", self.host, self.delivered),
                ));
            }
            n = n.min(limit - self.delivered);
        }
        buf[..n].copy_from_slice(&self.response[self.delivered..self.delivered + n]);
        self.delivered += n;
        Ok(n)
    }
}

/// The simulated network.
pub struct Network {
    state: RwLock<NetworkState>,
    endpoints: RwLock<BTreeMap<(String, u16), Endpoint>>,
    registry: Arc<EventRegistry>,
}

impl fmt::Debug for Network {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Network")
            .field("state", &self.state())
            .field("endpoints", &self.endpoints.read().expect("endpoints poisoned").len())
            .finish()
    }
}

impl Network {
    pub fn new(registry: Arc<EventRegistry>, state: NetworkState) -> Self {
        Self {
            state: RwLock::new(state),
            endpoints: RwLock::new(BTreeMap::new()),
            registry,
        }
    }

    pub fn registry(&self) -> &Arc<EventRegistry> {
        &self.registry
    }

    /// Replaces the network state; operations already in flight keep the
    /// snapshot they started with, open connections see the new mode on
    /// their next read or write.
    pub fn set_state(&self, state: NetworkState) {
        *self.state.write().expect("state poisoned") = state;
    }

    pub fn state(&self) -> NetworkState {
        self.state.read().expect("state poisoned").clone()
    }

    pub fn mode(&self) -> NetworkMode {
        self.state.read().expect("state poisoned").mode
    }

    pub fn set_mode(&self, mode: NetworkMode) {
        self.state.write().expect("state poisoned").mode = mode;
    }

    pub fn register_endpoint(&self, endpoint: Endpoint) -> Result<(), NetsimError> {
        let mut endpoints = self.endpoints.write().expect("endpoints poisoned");
        let key = (endpoint.host.clone(), endpoint.port);
        if endpoints.contains_key(&key) {
            return Err(NetsimError::DuplicateEndpoint(key.0, key.1));
        }
        endpoints.insert(key, endpoint);
        Ok(())
    }

    /// Builds a network error in the calling thread's context.
    pub fn error(&self, kind: NetworkErrorKind, tag: &str, message: impl Into<String>) -> NetError {
        NetError::new(&self.registry, kind, tag, message)
    }

    fn known_host(&self, host: &str) -> bool {
        self.endpoints
            .read()
            .expect("endpoints poisoned")
            .keys()
            .any(|(h, _)| h == host)
    }

    fn snapshot(&self) -> NetworkState {
        let state = self.state();
        if let Some(latency) = state.latency {
            std::thread::sleep(latency);
        }
        state
    }

    pub fn resolve(&self, host: &str) -> Result<Address, NetError> {
        let state = self.snapshot();
        let failure = match (state.mode, state.override_for(host)) {
            (NetworkMode::Off, _) => Some("network is down"),
            (NetworkMode::On, Some(HostOverride::Unreachable)) => Some("name server unreachable"),
            _ if !self.known_host(host) => Some("no such host"),
            _ => None,
        };
        match failure {
            Some(why) => Err(self.error(NetworkErrorKind::UnknownHost, "UnknownHost", format!("{host}: {why}"))),
            None => Ok(Address::synthetic(host)),
        }
    }

    pub fn connect(&self, address: &Address, port: u16) -> Result<Connection<'_>, NetError> {
        let state = self.snapshot();
        let host = &address.host;
        let target = format!("{host}:{port}");
        if state.mode == NetworkMode::Off {
            return Err(self.error(NetworkErrorKind::SocketFailure, "SocketFailure", format!("{target}: network is down")));
        }
        let override_ = state.override_for(host);
        match override_ {
            Some(HostOverride::NoRoute) | Some(HostOverride::Unreachable) => {
                return Err(self.error(NetworkErrorKind::NoRouteToHost, "NoRouteToHost", format!("{target}: no route to host")));
            }
            Some(HostOverride::RefuseConnect) => {
                return Err(self.error(NetworkErrorKind::SocketFailure, TAG_CONNECTION_REFUSED, format!("{target}: connection refused")));
            }
            _ => {}
        }
        let handler = self
            .endpoints
            .read()
            .expect("endpoints poisoned")
            .get(&(host.clone(), port))
            .map(|e| Arc::clone(&e.handler));
        let Some(handler) = handler else {
            return Err(self.error(NetworkErrorKind::SocketFailure, TAG_CONNECTION_REFUSED, format!("{target}: connection refused")));
        };
        Ok(Connection {
            net: self,
            host: host.clone(),
            handler,
            drop_after: match override_ {
                Some(HostOverride::DropAfterBytes(n)) => Some(n),
                _ => None,
            },
            response: Vec::new(),
            delivered: 0,
        })
    }

    /// Fetches `url` (`http://host[:port]/path`).
    pub fn http_get(&self, url: &str) -> Result<HttpResponse, HttpGetError> {
        let parsed = Url::parse(url).map_err(|_| HttpGetError::MalformedUrl(url.to_string()))?;
        if !matches!(parsed.scheme(), "http" | "https") {
            return Err(HttpGetError::MalformedUrl(url.to_string()));
        }
        let host = parsed
            .host_str()
            .ok_or_else(|| HttpGetError::MalformedUrl(url.to_string()))?
            .to_string();
        let port = parsed.port_or_known_default().unwrap_or(80);
        let mut path = parsed.path().to_string();
        if let Some(q) = parsed.query() {
            path.push('?');
            path.push_str(q);
        }

        let address = self.resolve(&host)?;
        let mut conn = self.connect(&address, port)?;
        conn.send(format!("GET {path} HTTP/1.1\r\nHost: {host}\r\n\r\n").as_bytes())?;
        let mut raw = Vec::new();
        let mut buf = [0u8; READ_CHUNK];
        loop {
            let n = conn.read(&mut buf)?;
            if n == 0 {
                break;
            }
            raw.extend_from_slice(&buf[..n]);
        }
        HttpResponse::parse(&raw)
    }

    /// Reachability check in the style of a native lookup: failures are
    /// reported as `false` and no error value is ever constructed, so
    /// nothing is recorded in the registry.
    pub fn ping(&self, host: &str) -> bool {
        let state = self.snapshot();
        state.mode == NetworkMode::On
            && !matches!(
                state.override_for(host),
                Some(HostOverride::Unreachable | HostOverride::NoRoute | HostOverride::RefuseConnect)
            )
            && self.known_host(host)
    }
}
