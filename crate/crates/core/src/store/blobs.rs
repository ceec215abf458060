use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::StoreError;
use crate::domain::BlobKey;

/// Content-addressed file store keyed by SHA-256.
#[derive(Debug, Clone)]
pub struct BlobStore {
    root: PathBuf,
}

pub fn blob_key(bytes: &[u8]) -> BlobKey {
    BlobKey::new(hex::encode(Sha256::digest(bytes))).expect("sha-256 hex is a valid key")
}

impl BlobStore {
    pub fn open(root: &Path) -> Result<Self, StoreError> {
        fs::create_dir_all(root).map_err(|source| StoreError::Io {
            path: root.to_path_buf(),
            source,
        })?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    fn path(&self, key: &BlobKey) -> PathBuf {
        let hex = key.as_str();
        self.root.join(&hex[..2]).join(&hex[2..])
    }

    pub fn contains(&self, key: &BlobKey) -> bool {
        self.path(key).is_file()
    }

    /// Idempotent: storing the same bytes twice yields the same key and one file.
    pub fn put(&self, bytes: &[u8]) -> Result<BlobKey, StoreError> {
        let key = blob_key(bytes);
        let path = self.path(&key);
        if path.is_file() {
            return Ok(key);
        }
        let dir = path.parent().expect("blob paths have a shard directory");
        let io = |source| StoreError::Io {
            path: path.clone(),
            source,
        };
        fs::create_dir_all(dir).map_err(io)?;
        // Write to a temp file and rename so readers never see a partial blob.
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
        tmp.write_all(bytes).map_err(io)?;
        tmp.as_file().sync_all().map_err(io)?;
        tmp.persist(&path).map_err(|err| io(err.error))?;
        Ok(key)
    }

    pub fn get(&self, key: &BlobKey) -> Result<Vec<u8>, StoreError> {
        match fs::read(self.path(key)) {
            Ok(bytes) => Ok(bytes),
            Err(err) if err.kind() == std::io::ErrorKind::NotFound => {
                Err(StoreError::UnknownKey(key.to_string()))
            }
            Err(source) => Err(StoreError::Io {
                path: self.path(key),
                source,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;

    #[test]
    fn store_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let blobs = BlobStore::open(dir.path()).unwrap();
        let key = blobs.put(b"hello").unwrap();
        assert_eq!(blobs.get(&key).unwrap(), b"hello");
        assert_eq!(
            key.as_str(),
            "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824"
        );
    }

    #[test]
    fn storing_twice_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let blobs = BlobStore::open(dir.path()).unwrap();
        let a = blobs.put(b"same").unwrap();
        let b = blobs.put(b"same").unwrap();
        assert_eq!(a, b);
        let shard = dir.path().join(&a.as_str()[..2]);
        assert_eq!(fs::read_dir(shard).unwrap().count(), 1);
    }

    #[test]
    fn distinct_bytes_get_distinct_keys() {
        let keys: HashSet<_> = (0..500u32).map(|i| blob_key(&i.to_le_bytes())).collect();
        assert_eq!(keys.len(), 500);
    }

    #[test]
    fn unknown_key() {
        let dir = tempfile::tempdir().unwrap();
        let blobs = BlobStore::open(dir.path()).unwrap();
        let key = blob_key(b"never stored");
        assert!(matches!(blobs.get(&key), Err(StoreError::UnknownKey(_))));
    }
}
