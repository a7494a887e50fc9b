//! Byte-exact codec for the GET and BURST exchanges.
//!
//! A BURST request is a single HTTP/1.1 message:
//!
//! ```text
//! BURST / HTTP/1.1\r\n
//! Host: <host>\r\n
//! Burst-Count: <k>\r\n
//! Content-Length: <n>\r\n
//! \r\n
//! /path/one\n
//! /path/two\n
//! ```
//!
//! and its response is `k` complete HTTP/1.1 responses written back to back,
//! one per requested path and in request order, each carrying a `Burst-Path`
//! header. All bodies are framed by `Content-Length`; chunked transfer coding
//! is rejected.
//!
//! Decoding is split in two layers: [`decode_request_frame`] and
//! [`decode_response_frame`] cut one message off the front of a buffer (and
//! report `None` when more bytes are needed), then the typed decoders check
//! the BURST-specific rules.

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

/// Revision of the BURST framing implemented here.
pub const PROTOCOL_REVISION: u32 = 1;

pub const BURST_METHOD: &str = "BURST";
pub const BURST_COUNT: &str = "Burst-Count";
pub const BURST_PATH: &str = "Burst-Path";

/// Upper bound on a message head (request/status line plus headers).
pub const MAX_HEAD_BYTES: usize = 64 * 1024;
const MAX_HEADERS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("invalid object path {path:?}: {reason}")]
    InvalidPath { path: String, reason: &'static str },
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("message head exceeds {MAX_HEAD_BYTES} bytes")]
    HeadTooLarge,
    #[error("unsupported framing: {0}")]
    Unsupported(&'static str),
    #[error("response has no Content-Length")]
    MissingContentLength,
    #[error("Burst-Count says {declared} paths but the body lists {actual}")]
    CountMismatch { declared: usize, actual: usize },
    #[error("Content-Length says {declared} bytes but {actual} are present")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("BURST request lists no paths")]
    EmptyBurst,
    #[error("BURST request lists {0} more than once")]
    DuplicatePath(String),
    #[error("incomplete frame: stream ended before the message was complete")]
    IncompleteFrame,
    #[error("{0} unexpected bytes after the last message")]
    TrailingBytes(usize),
    #[error("part {index} is for {actual:?}, expected {expected:?}")]
    PathMismatch {
        index: usize,
        expected: String,
        actual: String,
    },
    #[error("server rejected the request with status {0}")]
    Rejected(u16),
    #[error("invalid part: {0}")]
    InvalidPart(String),
}

/// A server-relative object path, always rooted at `/` and lexically
/// normalised so it never contains `.` or `..` segments.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjectRef(String);

impl ObjectRef {
    pub fn new(path: &str) -> Result<Self, WireError> {
        let invalid = |reason| WireError::InvalidPath {
            path: path.to_owned(),
            reason,
        };
        if !path.starts_with('/') {
            return Err(invalid("must start with '/'"));
        }
        if path.bytes().any(|b| b == 0) {
            return Err(invalid("contains NUL"));
        }
        if path.chars().any(|c| c.is_ascii_control() || c == ' ') {
            return Err(invalid("contains whitespace or control characters"));
        }
        normalize_path(path)
            .map(ObjectRef)
            .ok_or_else(|| invalid("escapes the root"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Directory part of the path, always ending in `/`.
    pub fn parent_dir(&self) -> &str {
        match self.0.rfind('/') {
            Some(i) => &self.0[..=i],
            None => "/",
        }
    }
}

impl fmt::Display for ObjectRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::str::FromStr for ObjectRef {
    type Err = WireError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ObjectRef::new(s)
    }
}

/// Resolves `.` and `..` segments and collapses repeated slashes.
///
/// Returns `None` when a `..` would climb above the root. A trailing slash
/// is preserved.
pub fn normalize_path(path: &str) -> Option<String> {
    let mut segments: Vec<&str> = Vec::new();
    for seg in path.split('/') {
        match seg {
            "" | "." => {}
            ".." => {
                segments.pop()?;
            }
            s => segments.push(s),
        }
    }
    let mut out = String::with_capacity(path.len());
    for seg in &segments {
        out.push('/');
        out.push_str(seg);
    }
    if out.is_empty() || (path.ends_with('/') || path.ends_with("/.") || path.ends_with("/..")) {
        out.push('/');
    }
    Some(out)
}

/// Ordered header list with case-insensitive lookup.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Headers(Vec<(String, String)>);

impl Headers {
    pub fn get(&self, name: &str) -> Option<&str> {
        self.0
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    fn content_length(&self) -> Result<Option<usize>, WireError> {
        match self.get("Content-Length") {
            None => Ok(None),
            Some(v) => v
                .trim()
                .parse()
                .map(Some)
                .map_err(|_| WireError::Malformed(format!("bad Content-Length {v:?}"))),
        }
    }

    fn reject_chunked(&self) -> Result<(), WireError> {
        if self.get("Transfer-Encoding").is_some() {
            return Err(WireError::Unsupported("Transfer-Encoding"));
        }
        Ok(())
    }

    /// True when the peer asked to close the connection after this message.
    pub fn wants_close(&self) -> bool {
        self.get("Connection")
            .map(|v| v.split(',').any(|t| t.trim().eq_ignore_ascii_case("close")))
            .unwrap_or(false)
    }
}

fn collect_headers(raw: &[httparse::Header<'_>]) -> Result<Headers, WireError> {
    raw.iter()
        .map(|h| {
            std::str::from_utf8(h.value)
                .map(|v| (h.name.to_owned(), v.to_owned()))
                .map_err(|_| WireError::Malformed(format!("non-UTF-8 value for {}", h.name)))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Headers)
}

fn map_parse_error(e: httparse::Error) -> WireError {
    match e {
        httparse::Error::TooManyHeaders => WireError::HeadTooLarge,
        other => WireError::Malformed(other.to_string()),
    }
}

/// One HTTP/1.1 request cut from the front of a byte stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestFrame {
    pub method: String,
    pub target: String,
    pub headers: Headers,
    pub body: Vec<u8>,
}

/// One HTTP/1.1 response cut from the front of a byte stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseFrame {
    pub status: u16,
    pub reason: String,
    pub headers: Headers,
    pub body: Vec<u8>,
}

/// Tries to take one complete request off the front of `buf`.
///
/// Returns the frame and the number of bytes it occupied, or `None` if the
/// buffer does not yet hold a whole message. A request without
/// `Content-Length` has an empty body.
pub fn decode_request_frame(buf: &[u8]) -> Result<Option<(RequestFrame, usize)>, WireError> {
    let mut raw = [httparse::EMPTY_HEADER; MAX_HEADERS];
    let mut req = httparse::Request::new(&mut raw);
    let head_len = match req.parse(buf).map_err(map_parse_error)? {
        httparse::Status::Complete(n) => n,
        httparse::Status::Partial if buf.len() > MAX_HEAD_BYTES => return Err(WireError::HeadTooLarge),
        httparse::Status::Partial => return Ok(None),
    };
    if req.version != Some(1) {
        return Err(WireError::Malformed("only HTTP/1.1 is supported".into()));
    }
    let headers = collect_headers(req.headers)?;
    headers.reject_chunked()?;
    let body_len = headers.content_length()?.unwrap_or(0);
    let total = head_len + body_len;
    if buf.len() < total {
        return Ok(None);
    }
    let frame = RequestFrame {
        method: req.method.unwrap_or_default().to_owned(),
        target: req.path.unwrap_or_default().to_owned(),
        headers,
        body: buf[head_len..total].to_vec(),
    };
    Ok(Some((frame, total)))
}

/// Parsed response head plus the declared body length, used by readers that
/// stream the body instead of buffering it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseHead {
    pub status: u16,
    pub reason: String,
    pub headers: Headers,
    pub head_len: usize,
    pub content_length: usize,
}

/// Tries to parse a response head at the front of `buf`.
pub fn decode_response_head(buf: &[u8]) -> Result<Option<ResponseHead>, WireError> {
    let mut raw = [httparse::EMPTY_HEADER; MAX_HEADERS];
    let mut resp = httparse::Response::new(&mut raw);
    let head_len = match resp.parse(buf).map_err(map_parse_error)? {
        httparse::Status::Complete(n) => n,
        httparse::Status::Partial if buf.len() > MAX_HEAD_BYTES => return Err(WireError::HeadTooLarge),
        httparse::Status::Partial => return Ok(None),
    };
    if resp.version != Some(1) {
        return Err(WireError::Malformed("only HTTP/1.1 is supported".into()));
    }
    let headers = collect_headers(resp.headers)?;
    headers.reject_chunked()?;
    let content_length = headers.content_length()?.ok_or(WireError::MissingContentLength)?;
    Ok(Some(ResponseHead {
        status: resp.code.unwrap_or_default(),
        reason: resp.reason.unwrap_or_default().to_owned(),
        headers,
        head_len,
        content_length,
    }))
}

/// Tries to take one complete response off the front of `buf`.
pub fn decode_response_frame(buf: &[u8]) -> Result<Option<(ResponseFrame, usize)>, WireError> {
    let Some(head) = decode_response_head(buf)? else {
        return Ok(None);
    };
    let total = head.head_len + head.content_length;
    if buf.len() < total {
        return Ok(None);
    }
    let frame = ResponseFrame {
        status: head.status,
        reason: head.reason,
        headers: head.headers,
        body: buf[head.head_len..total].to_vec(),
    };
    Ok(Some((frame, total)))
}

pub fn reason_phrase(status: u16) -> &'static str {
    match status {
        200 => "OK",
        400 => "Bad Request",
        403 => "Forbidden",
        404 => "Not Found",
        405 => "Method Not Allowed",
        413 => "Payload Too Large",
        500 => "Internal Server Error",
        501 => "Not Implemented",
        503 => "Service Unavailable",
        _ => "Unknown",
    }
}

fn valid_header_value(v: &str) -> bool {
    !v.is_empty() && !v.chars().any(|c| c.is_control())
}

// ---------------------------------------------------------------- GET

/// `GET <path> HTTP/1.1` with keep-alive.
pub fn encode_get_request(path: &ObjectRef, host: &str) -> Vec<u8> {
    format!("GET {path} HTTP/1.1\r\nHost: {host}\r\nConnection: keep-alive\r\n\r\n").into_bytes()
}

/// A decoded GET request. The target is left raw; the server canonicalises
/// it against its document root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GetRequest {
    pub target: String,
    pub host: Option<String>,
    pub close: bool,
}

impl TryFrom<&RequestFrame> for GetRequest {
    type Error = WireError;

    fn try_from(frame: &RequestFrame) -> Result<Self, Self::Error> {
        if frame.method != "GET" {
            return Err(WireError::Malformed(format!("expected GET, got {}", frame.method)));
        }
        Ok(GetRequest {
            target: frame.target.clone(),
            host: frame.headers.get("Host").map(str::to_owned),
            close: frame.headers.wants_close(),
        })
    }
}

/// Decodes exactly one complete GET request.
pub fn decode_get_request(bytes: &[u8]) -> Result<GetRequest, WireError> {
    let frame = decode_exactly_one_request(bytes)?;
    GetRequest::try_from(&frame)
}

/// Head of a single-object response; the body follows separately.
pub fn encode_response_head(status: u16, content_type: &str, content_length: usize) -> Vec<u8> {
    format!(
        "HTTP/1.1 {status} {}\r\nContent-Type: {content_type}\r\nContent-Length: {content_length}\r\nConnection: keep-alive\r\n\r\n",
        reason_phrase(status)
    )
    .into_bytes()
}

pub fn encode_get_response(status: u16, content_type: &str, body: &[u8]) -> Vec<u8> {
    let mut out = encode_response_head(status, content_type, body.len());
    out.extend_from_slice(body);
    out
}

/// Decodes exactly one complete GET response.
pub fn decode_get_response(bytes: &[u8]) -> Result<ResponseFrame, WireError> {
    match decode_response_frame(bytes)? {
        None => Err(WireError::IncompleteFrame),
        Some((frame, used)) if used == bytes.len() => Ok(frame),
        Some((_, used)) => Err(WireError::TrailingBytes(bytes.len() - used)),
    }
}

fn decode_exactly_one_request(bytes: &[u8]) -> Result<RequestFrame, WireError> {
    match decode_request_frame(bytes)? {
        None => {
            // A head that parsed but whose body is short is a length error,
            // not merely an incomplete read.
            if let Some(head_end) = find_head_end(bytes) {
                let mut raw = [httparse::EMPTY_HEADER; MAX_HEADERS];
                let mut req = httparse::Request::new(&mut raw);
                if req.parse(bytes).is_ok() {
                    let headers = collect_headers(req.headers)?;
                    if let Some(declared) = headers.content_length()? {
                        return Err(WireError::LengthMismatch {
                            declared,
                            actual: bytes.len() - head_end,
                        });
                    }
                }
            }
            Err(WireError::IncompleteFrame)
        }
        Some((frame, used)) if used == bytes.len() => Ok(frame),
        Some((frame, used)) => {
            let declared = frame.body.len();
            Err(WireError::LengthMismatch {
                declared,
                actual: declared + bytes.len() - used,
            })
        }
    }
}

fn find_head_end(bytes: &[u8]) -> Option<usize> {
    bytes.windows(4).position(|w| w == b"\r\n\r\n").map(|i| i + 4)
}

// ---------------------------------------------------------------- BURST request

/// The set of objects requested in one BURST exchange.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BurstRequest {
    paths: Vec<ObjectRef>,
}

impl BurstRequest {
    pub fn new(paths: Vec<ObjectRef>) -> Result<Self, WireError> {
        if paths.is_empty() {
            return Err(WireError::EmptyBurst);
        }
        let mut seen = HashSet::with_capacity(paths.len());
        for p in &paths {
            if !seen.insert(p.as_str()) {
                return Err(WireError::DuplicatePath(p.to_string()));
            }
        }
        Ok(Self { paths })
    }

    pub fn paths(&self) -> &[ObjectRef] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Checks a decoded request frame against the BURST framing rules.
    ///
    /// `Content-Length` has already delimited the body, so only the path
    /// list and the `Burst-Count` cross-check are validated here.
    pub fn from_frame(frame: &RequestFrame) -> Result<Self, WireError> {
        if frame.method != BURST_METHOD {
            return Err(WireError::Malformed(format!(
                "expected {BURST_METHOD}, got {}",
                frame.method
            )));
        }
        if frame.target != "/" {
            return Err(WireError::Malformed(format!(
                "BURST target must be '/', got {:?}",
                frame.target
            )));
        }
        let declared: usize = frame
            .headers
            .get(BURST_COUNT)
            .ok_or_else(|| WireError::Malformed("missing Burst-Count".into()))?
            .trim()
            .parse()
            .map_err(|_| WireError::Malformed("bad Burst-Count".into()))?;
        if frame.headers.get("Content-Length").is_none() {
            return Err(WireError::Malformed("BURST request without Content-Length".into()));
        }
        let body =
            std::str::from_utf8(&frame.body).map_err(|_| WireError::Malformed("BURST body is not UTF-8".into()))?;
        if !body.is_empty() && !body.ends_with('\n') {
            return Err(WireError::Malformed("BURST body must end with a newline".into()));
        }
        let lines: Vec<&str> = body.split_terminator('\n').collect();
        if lines.len() != declared {
            return Err(WireError::CountMismatch {
                declared,
                actual: lines.len(),
            });
        }
        let paths = lines.into_iter().map(ObjectRef::new).collect::<Result<Vec<_>, _>>()?;
        BurstRequest::new(paths)
    }
}

fn burst_request_body(req: &BurstRequest) -> String {
    let mut body = String::with_capacity(req.paths.iter().map(|p| p.0.len() + 1).sum());
    for p in &req.paths {
        body.push_str(p.as_str());
        body.push('\n');
    }
    body
}

pub fn encode_burst_request(req: &BurstRequest, host: &str) -> Vec<u8> {
    let body = burst_request_body(req);
    let mut out = format!(
        "{BURST_METHOD} / HTTP/1.1\r\nHost: {host}\r\n{BURST_COUNT}: {}\r\nContent-Length: {}\r\n\r\n",
        req.len(),
        body.len()
    )
    .into_bytes();
    out.extend_from_slice(body.as_bytes());
    out
}

/// Decodes exactly one complete BURST request.
pub fn decode_burst_request(bytes: &[u8]) -> Result<BurstRequest, WireError> {
    let frame = decode_exactly_one_request(bytes)?;
    BurstRequest::from_frame(&frame)
}

// ---------------------------------------------------------------- BURST response

/// One object inside a BURST response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BurstPart {
    pub path: ObjectRef,
    pub status: u16,
    pub content_type: String,
    pub body: Vec<u8>,
}

impl BurstPart {
    pub fn found(path: ObjectRef, content_type: impl Into<String>, body: Vec<u8>) -> Self {
        Self {
            path,
            status: 200,
            content_type: content_type.into(),
            body,
        }
    }

    pub fn not_found(path: ObjectRef) -> Self {
        Self {
            path,
            status: 404,
            content_type: "text/plain".into(),
            body: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), WireError> {
        match self.status {
            200 => {}
            404 if self.body.is_empty() => {}
            404 => return Err(WireError::InvalidPart("404 part with a body".into())),
            s => return Err(WireError::InvalidPart(format!("status {s} not allowed in a part"))),
        }
        if !valid_header_value(&self.content_type) {
            return Err(WireError::InvalidPart(format!(
                "bad content type {:?}",
                self.content_type
            )));
        }
        Ok(())
    }

    /// Converts a decoded frame into a part, checking it answers `expected`.
    pub fn from_frame(frame: ResponseFrame, index: usize, expected: &ObjectRef) -> Result<Self, WireError> {
        let Some(path) = frame.headers.get(BURST_PATH) else {
            if frame.status >= 400 {
                return Err(WireError::Rejected(frame.status));
            }
            return Err(WireError::Malformed("part without Burst-Path".into()));
        };
        if path != expected.as_str() {
            return Err(WireError::PathMismatch {
                index,
                expected: expected.to_string(),
                actual: path.to_owned(),
            });
        }
        let content_type = frame
            .headers
            .get("Content-Type")
            .ok_or_else(|| WireError::Malformed("part without Content-Type".into()))?
            .to_owned();
        let part = BurstPart {
            path: expected.clone(),
            status: frame.status,
            content_type,
            body: frame.body,
        };
        part.validate()?;
        Ok(part)
    }
}

/// Head of one part; the body bytes follow it directly on the wire.
pub fn encode_part_head(path: &ObjectRef, status: u16, content_type: &str, len: usize) -> Vec<u8> {
    format!(
        "HTTP/1.1 {status} {}\r\n{BURST_PATH}: {path}\r\nContent-Type: {content_type}\r\nContent-Length: {len}\r\n\r\n",
        reason_phrase(status)
    )
    .into_bytes()
}

pub fn encode_burst_part(part: &BurstPart) -> Result<Vec<u8>, WireError> {
    part.validate()?;
    let mut out = encode_part_head(&part.path, part.status, &part.content_type, part.body.len());
    out.extend_from_slice(&part.body);
    Ok(out)
}

/// All parts answering one BURST request, in request order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BurstResponse {
    pub parts: Vec<BurstPart>,
}

pub fn encode_burst_response(resp: &BurstResponse) -> Result<Vec<u8>, WireError> {
    if resp.parts.is_empty() {
        return Err(WireError::InvalidPart(
            "a BURST response needs at least one part".into(),
        ));
    }
    let mut out = Vec::new();
    for part in &resp.parts {
        out.extend(encode_burst_part(part)?);
    }
    Ok(out)
}

/// Decodes the full response stream to `expected`.
pub fn decode_burst_response(bytes: &[u8], expected: &BurstRequest) -> Result<BurstResponse, WireError> {
    let mut parts = Vec::with_capacity(expected.len());
    let mut rest = bytes;
    for (index, path) in expected.paths().iter().enumerate() {
        let Some((frame, used)) = decode_response_frame(rest)? else {
            return Err(WireError::IncompleteFrame);
        };
        parts.push(BurstPart::from_frame(frame, index, path)?);
        rest = &rest[used..];
    }
    if !rest.is_empty() {
        return Err(WireError::TrailingBytes(rest.len()));
    }
    Ok(BurstResponse { parts })
}
