//! Mapping request targets onto files under the document root.

use std::path::{Path, PathBuf};

use burst_core::wire::normalize_path;
use percent_encoding::percent_decode_str;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lookup {
    BadRequest,
    Forbidden,
    NotFound,
    Unreadable,
}

impl Lookup {
    pub fn status(self) -> u16 {
        match self {
            Lookup::BadRequest => 400,
            Lookup::Forbidden => 403,
            Lookup::NotFound => 404,
            Lookup::Unreadable => 500,
        }
    }
}

/// Turns a request target into a path under `docroot`.
///
/// The query string is dropped, the path is percent-decoded once and
/// resolved lexically; anything that climbs out of the root is forbidden.
/// A directory maps to its `index.html`.
pub fn resolve(docroot: &Path, target: &str) -> Result<PathBuf, Lookup> {
    let path = target.split(['?', '#']).next().unwrap_or_default();
    if !path.starts_with('/') {
        return Err(Lookup::BadRequest);
    }
    let decoded = percent_decode_str(path).decode_utf8().map_err(|_| Lookup::BadRequest)?;
    if decoded.contains('\0') || decoded.contains('\\') {
        return Err(Lookup::BadRequest);
    }
    let normal = normalize_path(&decoded).ok_or(Lookup::Forbidden)?;
    let mut full = docroot.join(normal.trim_start_matches('/'));
    if normal.ends_with('/') || full.is_dir() {
        full.push("index.html");
    }
    // Symlinks may still point outside the root.
    match std::fs::canonicalize(&full) {
        Ok(real) if real.starts_with(docroot) => Ok(real),
        Ok(_) => Err(Lookup::Forbidden),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Lookup::NotFound),
        Err(_) => Err(Lookup::Unreadable),
    }
}

pub fn content_type(path: &Path) -> &'static str {
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("html" | "htm") => "text/html",
        Some("css") => "text/css",
        Some("js") => "application/javascript",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("png") => "image/png",
        Some("woff2") => "font/woff2",
        _ => "application/octet-stream",
    }
}
