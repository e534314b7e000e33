//! The project state file.
//!
//! One JSON document holding a format tag and version, the manifest path and
//! content hash, the engine as built (`baseline`, restored by `reset`) and
//! the engine after all committed conditioning steps (`current`). Each
//! engine carries its world table, variable provenance (value-index maps),
//! U-relations, synthesized schemes and history.
//!
//! Writers hold an exclusive advisory lock on `<state>.lock` and replace the
//! file atomically; readers hold a shared lock while reading.

use std::fs::{File, OpenOptions, TryLockError};
use std::io::Write;
use std::path::{Path, PathBuf};

use hypodb_core::Engine;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const FORMAT: &str = "hypodb-state";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub format: String,
    pub version: u32,
    pub manifest: PathBuf,
    pub manifest_hash: String,
    pub baseline: Engine,
    pub current: Engine,
}

impl State {
    pub fn new(manifest: PathBuf, manifest_hash: String, engine: Engine) -> Self {
        Self { format: FORMAT.to_string(), version: VERSION, manifest, manifest_hash, baseline: engine.clone(), current: engine }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut v = serde_json::to_vec_pretty(self).expect("state serializes");
        v.push(b'\n');
        v
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self, CliError> {
        #[derive(Deserialize)]
        struct Header {
            format: String,
            version: u32,
        }
        let bad = |e: serde_json::Error| CliError::Failed(format!("{}: not a state file: {e}", path.display()));
        let h: Header = serde_json::from_slice(bytes).map_err(bad)?;
        if h.format != FORMAT || h.version != VERSION {
            return Err(CliError::Failed(format!("{}: unsupported state format {} version {}", path.display(), h.format, h.version)));
        }
        serde_json::from_slice(bytes).map_err(bad)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Failed(format!("cannot read state {}: {e} (run `hypodb build` first)", path.display())))?;
        Self::from_bytes(&bytes, path)
    }

    /// Replaces `path` atomically.
    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => Path::new("."),
        };
        let io = |e: std::io::Error| CliError::Failed(format!("cannot write state {}: {e}", path.display()));
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
        tmp.write_all(&self.to_bytes()).map_err(io)?;
        tmp.as_file().sync_all().map_err(io)?;
        tmp.persist(path).map_err(|e| io(e.error))?;
        Ok(())
    }
}

/// Advisory lock on the state file, released on drop.
pub struct StateLock {
    _file: File,
}

fn lock_path(state: &Path) -> PathBuf {
    let mut p = state.as_os_str().to_owned();
    p.push(".lock");
    PathBuf::from(p)
}

fn open_lock(state: &Path) -> Result<File, CliError> {
    let path = lock_path(state);
    OpenOptions::new()
        .create(true)
        .truncate(false)
        .write(true)
        .open(&path)
        .map_err(|e| CliError::Failed(format!("cannot open lock {}: {e}", path.display())))
}

impl StateLock {
    pub fn exclusive(state: &Path) -> Result<Self, CliError> {
        let file = open_lock(state)?;
        file.lock().map_err(|e| CliError::Failed(format!("cannot lock state: {e}")))?;
        Ok(Self { _file: file })
    }

    pub fn shared(state: &Path) -> Result<Self, CliError> {
        let file = open_lock(state)?;
        file.lock_shared().map_err(|e| CliError::Failed(format!("cannot lock state: {e}")))?;
        Ok(Self { _file: file })
    }

    /// `Ok(None)` when another writer holds the lock.
    pub fn try_exclusive(state: &Path) -> Result<Option<Self>, CliError> {
        let file = open_lock(state)?;
        match file.try_lock() {
            Ok(()) => Ok(Some(Self { _file: file })),
            Err(TryLockError::WouldBlock) => Ok(None),
            Err(TryLockError::Error(e)) => Err(CliError::Failed(format!("cannot lock state: {e}"))),
        }
    }
}
