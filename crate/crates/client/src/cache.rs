use std::collections::HashMap;
use std::io;
use std::path::Path;
use std::sync::{Arc, RwLock};

use burst_core::ObjectRef;
use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};

/// Everything except `[A-Za-z0-9._-]` is escaped in cache file names.
const FILENAME: &AsciiSet = &NON_ALPHANUMERIC.remove(b'.').remove(b'-').remove(b'_');

/// Local store of inlined objects, shared between connection workers.
#[derive(Debug, Default, Clone)]
pub struct ObjectCache {
    entries: Arc<RwLock<HashMap<ObjectRef, Arc<[u8]>>>>,
}

impl ObjectCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&self, path: ObjectRef, bytes: impl Into<Arc<[u8]>>) {
        self.entries
            .write()
            .expect("cache lock poisoned")
            .insert(path, bytes.into());
    }

    pub fn get(&self, path: &ObjectRef) -> Option<Arc<[u8]>> {
        self.entries.read().expect("cache lock poisoned").get(path).cloned()
    }

    pub fn contains(&self, path: &ObjectRef) -> bool {
        self.entries.read().expect("cache lock poisoned").contains_key(path)
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.entries.write().expect("cache lock poisoned").clear();
    }

    /// Loads every file of `dir` whose name decodes to a valid object path.
    pub fn load_dir(dir: &Path) -> io::Result<Self> {
        let cache = Self::new();
        if !dir.exists() {
            return Ok(cache);
        }
        for entry in std::fs::read_dir(dir)? {
            let entry = entry?;
            if !entry.file_type()?.is_file() {
                continue;
            }
            let name = entry.file_name();
            let Some(path) = name.to_str().and_then(decode_file_name) else {
                continue;
            };
            cache.insert(path, std::fs::read(entry.path())?);
        }
        Ok(cache)
    }

    /// Writes one file per entry, named by the percent-encoded path.
    pub fn save_dir(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let entries = self.entries.read().expect("cache lock poisoned");
        for (path, bytes) in entries.iter() {
            std::fs::write(dir.join(file_name(path)), bytes)?;
        }
        Ok(())
    }
}

pub fn file_name(path: &ObjectRef) -> String {
    utf8_percent_encode(path.as_str(), FILENAME).to_string()
}

fn decode_file_name(name: &str) -> Option<ObjectRef> {
    let decoded = percent_decode_str(name).decode_utf8().ok()?;
    let path = ObjectRef::new(&decoded).ok()?;
    // Only names this cache could have written.
    (file_name(&path) == name).then_some(path)
}
