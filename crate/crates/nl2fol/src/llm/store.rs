//! Content-addressed fixture store: one `<hash>.json` file per request.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub request: Value,
    pub response: Value,
    /// Seconds since the Unix epoch at recording time.
    pub timestamp: u64,
}

/// Hex SHA-256 of the request's JSON encoding.
pub fn request_hash<T: Serialize>(request: &T) -> String {
    let bytes = serde_json::to_vec(request).expect("requests serialize");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Debug, Clone)]
pub struct FixtureStore {
    dir: PathBuf,
}

impl FixtureStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FixtureStore { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, hash: &str) -> PathBuf {
        self.dir.join(format!("{hash}.json"))
    }

    pub fn get(&self, hash: &str) -> io::Result<Option<FixtureEntry>> {
        match fs::read(self.path(hash)) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map(Some)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn get_response<R: DeserializeOwned>(&self, hash: &str) -> io::Result<Option<R>> {
        match self.get(hash)? {
            Some(entry) => serde_json::from_value(entry.response)
                .map(Some)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e)),
            None => Ok(None),
        }
    }

    /// Writes the entry unless one exists already. The file appears
    /// atomically (temp file + rename), so concurrent recorders of the same
    /// request cannot leave a torn file behind.
    pub fn put<Q: Serialize, R: Serialize>(&self, request: &Q, response: &R) -> io::Result<String> {
        let hash = request_hash(request);
        let path = self.path(&hash);
        if path.exists() {
            return Ok(hash);
        }
        fs::create_dir_all(&self.dir)?;
        let entry = FixtureEntry {
            request: serde_json::to_value(request).map_err(io::Error::other)?,
            response: serde_json::to_value(response).map_err(io::Error::other)?,
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        serde_json::to_writer_pretty(&mut tmp, &entry).map_err(io::Error::other)?;
        tmp.write_all(b"\n")?;
        tmp.persist_noclobber(&path)
            .map(|_| ())
            .or_else(|e| if path.exists() { Ok(()) } else { Err(e.error) })?;
        Ok(hash)
    }

    pub fn len(&self) -> usize {
        fs::read_dir(&self.dir)
            .map(|rd| {
                rd.filter_map(Result::ok)
                    .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
                    .count()
            })
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn put_then_get() {
        let dir = tempfile::tempdir().unwrap();
        let store = FixtureStore::new(dir.path().join("llm"));
        let req = json!({"prompt": "hi", "model": "m"});
        let hash = store.put(&req, &json!({"text": "hello"})).unwrap();
        assert_eq!(hash, request_hash(&req));
        let entry = store.get(&hash).unwrap().unwrap();
        assert_eq!(entry.request, req);
        assert_eq!(entry.response["text"], "hello");
        // append-only: a second put keeps the first response
        store.put(&req, &json!({"text": "other"})).unwrap();
        assert_eq!(store.get(&hash).unwrap().unwrap().response["text"], "hello");
        assert_eq!(store.len(), 1);
        assert!(store.get("00").unwrap().is_none());
    }
}
