//! Inlined-object discovery for HTML pages.
//!
//! A small tolerant tokenizer walks the markup and collects the URLs of the
//! resources a browser fetches for the page: `img`, `script`, `source`,
//! `video` and `audio` `src` attributes, and `link` `href` when `rel`
//! contains `stylesheet` or `preload`. Comments, `<noscript>` content and the
//! raw text of `script`/`style`/`textarea`/`title` are skipped. Nothing is
//! rejected: unparseable markup is stepped over.

use std::collections::HashSet;

use url::Url;

use crate::wire::ObjectRef;

/// Stand-in origin used when the page's real origin is unknown. The
/// `.invalid` TLD is reserved, so no real reference can name it.
const PLACEHOLDER_ORIGIN: &str = "http://page.origin.invalid";

/// The inlined objects of one page, deduplicated, in document order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageManifest {
    pub source_path: ObjectRef,
    pub objects: Vec<ObjectRef>,
}

impl PageManifest {
    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }
}

/// Extracts same-origin inlined objects. Every absolute URL counts as
/// another origin.
pub fn extract_manifest(html: &[u8], base_path: &ObjectRef) -> PageManifest {
    extract_with(html, base_path, &base_url(base_path, None))
}

/// Like [`extract_manifest`], but absolute URLs on `origin` (`host[:port]`)
/// are kept.
pub fn extract_manifest_for_origin(html: &[u8], base_path: &ObjectRef, origin: &str) -> PageManifest {
    extract_with(html, base_path, &base_url(base_path, Some(origin)))
}

fn extract_with(html: &[u8], base_path: &ObjectRef, base: &Option<Url>) -> PageManifest {
    let text = String::from_utf8_lossy(html);
    let mut seen = HashSet::new();
    let mut objects = Vec::new();
    for raw in Tokenizer::new(&text).filter_map(|tag| tag.inlined_ref()) {
        if let Some(obj) = base.as_ref().and_then(|b| resolve_against(&raw, b)) {
            if seen.insert(obj.clone()) {
                objects.push(obj);
            }
        }
    }
    PageManifest {
        source_path: base_path.clone(),
        objects,
    }
}

fn base_url(base_path: &ObjectRef, origin: Option<&str>) -> Option<Url> {
    let root = match origin {
        Some(o) => Url::parse(&format!("http://{o}/")).ok()?,
        None => Url::parse(PLACEHOLDER_ORIGIN).ok()?,
    };
    root.join(base_path.as_str()).ok()
}

/// Resolves one attribute value against the page path.
///
/// Returns `None` for empty values, non-HTTP schemes and other hosts.
/// Query strings and fragments are dropped.
pub fn resolve_ref(raw: &str, base_path: &ObjectRef) -> Option<ObjectRef> {
    resolve_against(raw, &base_url(base_path, None)?)
}

fn resolve_against(raw: &str, base: &Url) -> Option<ObjectRef> {
    let raw = raw.trim();
    if raw.is_empty() {
        return None;
    }
    let joined = base.join(raw).ok()?;
    if joined.origin() != base.origin() {
        return None;
    }
    ObjectRef::new(joined.path()).ok()
}

#[derive(Debug)]
struct StartTag {
    name: String,
    attrs: Vec<(String, String)>,
}

impl StartTag {
    fn attr(&self, name: &str) -> Option<&str> {
        self.attrs.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }

    fn inlined_ref(&self) -> Option<String> {
        match self.name.as_str() {
            "img" | "script" | "source" | "video" | "audio" => self.attr("src").map(str::to_owned),
            "link" => {
                let rel = self.attr("rel")?;
                let fetched = rel
                    .split_ascii_whitespace()
                    .any(|t| t.eq_ignore_ascii_case("stylesheet") || t.eq_ignore_ascii_case("preload"));
                if fetched {
                    self.attr("href").map(str::to_owned)
                } else {
                    None
                }
            }
            _ => None,
        }
    }
}

/// Yields start tags outside comments and raw-text regions.
struct Tokenizer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Tokenizer<'a> {
    fn new(src: &'a str) -> Self {
        Self { src, pos: 0 }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_past(&mut self, needle: &str) {
        match find_ci(self.rest(), needle) {
            Some(i) => self.pos += i + needle.len(),
            None => self.pos = self.src.len(),
        }
    }

    /// Skips the content of a raw-text element up to its end tag.
    fn skip_raw_text(&mut self, name: &str) {
        let close = format!("</{name}");
        self.skip_past(&close);
        self.skip_past(">");
    }

    fn start_tag(&mut self) -> Option<StartTag> {
        let bytes = self.src.as_bytes();
        let name_start = self.pos;
        while self.pos < bytes.len() && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'-') {
            self.pos += 1;
        }
        let name = self.src[name_start..self.pos].to_ascii_lowercase();
        let mut attrs: Vec<(String, String)> = Vec::new();
        loop {
            while self.pos < bytes.len() && (bytes[self.pos].is_ascii_whitespace() || bytes[self.pos] == b'/') {
                self.pos += 1;
            }
            if self.pos >= bytes.len() {
                break;
            }
            if bytes[self.pos] == b'>' {
                self.pos += 1;
                break;
            }
            let attr_start = self.pos;
            while self.pos < bytes.len()
                && !bytes[self.pos].is_ascii_whitespace()
                && !matches!(bytes[self.pos], b'=' | b'>' | b'/')
            {
                self.pos += 1;
            }
            let attr_name = self.src[attr_start..self.pos].to_ascii_lowercase();
            while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            let mut value = String::new();
            if self.pos < bytes.len() && bytes[self.pos] == b'=' {
                self.pos += 1;
                while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
                    self.pos += 1;
                }
                value = self.attr_value();
            }
            if !attr_name.is_empty() && !attrs.iter().any(|(k, _)| *k == attr_name) {
                attrs.push((attr_name, decode_entities(&value)));
            }
        }
        Some(StartTag { name, attrs })
    }

    fn attr_value(&mut self) -> String {
        let bytes = self.src.as_bytes();
        if self.pos >= bytes.len() {
            return String::new();
        }
        let quote = bytes[self.pos];
        if quote == b'"' || quote == b'\'' {
            self.pos += 1;
            let start = self.pos;
            while self.pos < bytes.len() && bytes[self.pos] != quote {
                self.pos += 1;
            }
            let value = self.src[start..self.pos].to_owned();
            self.pos = (self.pos + 1).min(bytes.len());
            value
        } else {
            let start = self.pos;
            while self.pos < bytes.len() && !bytes[self.pos].is_ascii_whitespace() && bytes[self.pos] != b'>' {
                self.pos += 1;
            }
            self.src[start..self.pos].to_owned()
        }
    }
}

impl Iterator for Tokenizer<'_> {
    type Item = StartTag;

    fn next(&mut self) -> Option<StartTag> {
        loop {
            let lt = self.rest().find('<')?;
            self.pos += lt;
            let rest = self.rest();
            if rest.starts_with("<!--") {
                self.pos += 4;
                self.skip_past("-->");
                continue;
            }
            if rest.starts_with("<!") || rest.starts_with("<?") || rest.starts_with("</") {
                self.pos += 1;
                self.skip_past(">");
                continue;
            }
            self.pos += 1;
            if !self.rest().starts_with(|c: char| c.is_ascii_alphabetic()) {
                continue;
            }
            let tag = self.start_tag()?;
            match tag.name.as_str() {
                "noscript" => {
                    self.skip_raw_text("noscript");
                    continue;
                }
                "script" | "style" | "textarea" | "title" => {
                    let name = tag.name.clone();
                    self.skip_raw_text(&name);
                }
                _ => {}
            }
            return Some(tag);
        }
    }
}

fn find_ci(haystack: &str, needle: &str) -> Option<usize> {
    let h = haystack.as_bytes();
    let n = needle.as_bytes();
    if n.is_empty() {
        return Some(0);
    }
    h.windows(n.len()).position(|w| w.eq_ignore_ascii_case(n))
}

fn decode_entities(value: &str) -> String {
    if !value.contains('&') {
        return value.to_owned();
    }
    let mut out = String::with_capacity(value.len());
    let mut rest = value;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        rest = &rest[amp..];
        let decoded = rest.find(';').filter(|&semi| semi <= 10).and_then(|semi| {
            let entity = &rest[1..semi];
            let ch = match entity {
                "amp" => Some('&'),
                "quot" => Some('"'),
                "apos" => Some('\''),
                "lt" => Some('<'),
                "gt" => Some('>'),
                _ => entity.strip_prefix('#').and_then(|num| {
                    let code = match num.strip_prefix(['x', 'X']) {
                        Some(hex) => u32::from_str_radix(hex, 16).ok(),
                        None => num.parse().ok(),
                    };
                    code.and_then(char::from_u32)
                }),
            };
            ch.map(|c| (c, semi + 1))
        });
        match decoded {
            Some((c, used)) => {
                out.push(c);
                rest = &rest[used..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}
