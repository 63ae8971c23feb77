//! Content-addressed blob storage for papers and review reports.
//!
//! The ledger stores only hashes; the bytes live in a flat directory
//! keyed by lowercase hex digest. Writing is idempotent and reading
//! verifies the digest, so a corrupted blob can never masquerade as
//! its name.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::identity::{content_hash, ContentHash};

#[derive(Debug, Clone)]
pub struct BlobStore {
    root: PathBuf,
}

impl BlobStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn path_of(&self, hash: &ContentHash) -> PathBuf {
        self.root.join(hash.to_hex())
    }

    /// Store bytes under their own digest; returns the digest.
    pub fn put(&self, bytes: &[u8]) -> io::Result<ContentHash> {
        let hash = content_hash(bytes);
        fs::create_dir_all(&self.root)?;
        let path = self.path_of(&hash);
        if !path.exists() {
            fs::write(&path, bytes)?;
        }
        Ok(hash)
    }

    pub fn put_file(&self, file: &Path) -> io::Result<ContentHash> {
        self.put(&fs::read(file)?)
    }

    pub fn get(&self, hash: &ContentHash) -> io::Result<Vec<u8>> {
        let bytes = fs::read(self.path_of(hash))?;
        if content_hash(&bytes) != *hash {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("blob {} does not match its digest", hash),
            ));
        }
        Ok(bytes)
    }

    pub fn contains(&self, hash: &ContentHash) -> bool {
        self.path_of(hash).exists()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn put_get_round_trip_and_idempotence() {
        let dir = tempfile::tempdir().unwrap();
        let store = BlobStore::new(dir.path());
        let h1 = store.put(b"report text").unwrap();
        let h2 = store.put(b"report text").unwrap();
        assert_eq!(h1, h2);
        assert_eq!(store.get(&h1).unwrap(), b"report text");
        assert!(store.contains(&h1));
    }

    #[test]
    fn corrupted_blob_is_rejected_on_read() {
        let dir = tempfile::tempdir().unwrap();
        let store = BlobStore::new(dir.path());
        let h = store.put(b"original").unwrap();
        fs::write(store.path_of(&h), b"tampered").unwrap();
        assert!(store.get(&h).is_err());
    }
}
