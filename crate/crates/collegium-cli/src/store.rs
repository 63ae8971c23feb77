//! Where the CLI keeps its working files.
//!
//! ```text
//! <data>/
//!   ledger.log     framed binary event log
//!   ledger.lock    exclusive-lock guard for mutating commands
//!   config.cfg     optional protocol config (same format as scenarios)
//!   keys/<name>.key    "scheme seed_hex" per locally held key
//!   blobs/<hex>        content-addressed papers and reports
//! ```
//!
//! One process owns the ledger at a time: mutating commands take a
//! non-blocking `flock` on `ledger.lock` and fail fast when it is held.

use std::fs;
use std::os::unix::io::AsRawFd;
use std::path::{Path, PathBuf};

use collegium::blob::BlobStore;
use collegium::identity::{keygen, KeyPair, PersonId, Scheme};
use collegium::ledger::{Ledger, LedgerError};
use collegium::sim::parse_protocol_sections;
use collegium::state::ProtocolConfig;
use collegium::textdoc::Document;

pub struct Store {
    pub data_dir: PathBuf,
    pub config: ProtocolConfig,
}

pub struct LedgerLock {
    _file: fs::File,
}

impl Store {
    pub fn open(data_dir: PathBuf, config_path: Option<PathBuf>) -> Result<Store, String> {
        fs::create_dir_all(&data_dir)
            .map_err(|e| format!("cannot create data dir {}: {e}", data_dir.display()))?;
        let config_file = config_path.unwrap_or_else(|| data_dir.join("config.cfg"));
        let config = if config_file.exists() {
            let text = fs::read_to_string(&config_file)
                .map_err(|e| format!("cannot read {}: {e}", config_file.display()))?;
            let doc = Document::parse(&text).map_err(|e| e.to_string())?;
            parse_protocol_sections(&doc).map_err(|e| e.to_string())?
        } else {
            ProtocolConfig::default()
        };
        Ok(Store { data_dir, config })
    }

    pub fn ledger_path(&self) -> PathBuf {
        self.data_dir.join("ledger.log")
    }

    pub fn blobs(&self) -> BlobStore {
        BlobStore::new(self.data_dir.join("blobs"))
    }

    pub fn load_ledger(&self) -> Result<Ledger, LedgerError> {
        let path = self.ledger_path();
        if path.exists() {
            Ledger::load(&path, self.config.clone())
        } else {
            Ok(Ledger::new(self.config.clone()))
        }
    }

    pub fn save_ledger(&self, ledger: &Ledger) -> Result<(), LedgerError> {
        ledger.save(&self.ledger_path())?;
        // Companion text rendering for diffing.
        fs::write(self.data_dir.join("ledger.txt"), ledger.render_text())?;
        Ok(())
    }

    /// Take the exclusive ledger lock or fail fast.
    pub fn lock(&self) -> Result<LedgerLock, String> {
        let path = self.data_dir.join("ledger.lock");
        let file = fs::OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&path)
            .map_err(|e| format!("cannot open lock file: {e}"))?;
        let rc = unsafe { libc::flock(file.as_raw_fd(), libc::LOCK_EX | libc::LOCK_NB) };
        if rc != 0 {
            return Err("ledger is locked by another process".into());
        }
        Ok(LedgerLock { _file: file })
    }

    // -- keys ----------------------------------------------------------

    fn keys_dir(&self) -> PathBuf {
        self.data_dir.join("keys")
    }

    pub fn key_path(&self, name: &str) -> PathBuf {
        self.keys_dir().join(format!("{name}.key"))
    }

    pub fn save_key(&self, name: &str, key: &KeyPair) -> Result<(), String> {
        if name.contains(['/', '.']) {
            return Err(format!("invalid key name `{name}`"));
        }
        fs::create_dir_all(self.keys_dir()).map_err(|e| e.to_string())?;
        let path = self.key_path(name);
        if path.exists() {
            return Err(format!("key `{name}` already exists"));
        }
        fs::write(&path, format!("{} {}\n", key.scheme, hex::encode(&key.secret)))
            .map_err(|e| e.to_string())?;
        Ok(())
    }

    pub fn load_key(&self, name: &str) -> Result<KeyPair, String> {
        let path = self.key_path(name);
        let text = fs::read_to_string(&path)
            .map_err(|_| format!("no local key named `{name}` (looked at {})", path.display()))?;
        let mut parts = text.split_whitespace();
        let (Some(scheme), Some(seed_hex)) = (parts.next(), parts.next()) else {
            return Err(format!("malformed key file {}", path.display()));
        };
        let scheme: Scheme = scheme.parse().map_err(|e| format!("{e}"))?;
        let seed: [u8; 32] = hex::decode(seed_hex)
            .ok()
            .and_then(|v| v.try_into().ok())
            .ok_or_else(|| format!("malformed seed in {}", path.display()))?;
        Ok(keygen(scheme, seed))
    }

    /// Accept either a local key name or a full hex fingerprint.
    pub fn resolve_person(&self, who: &str) -> Result<PersonId, String> {
        if let Ok(id) = PersonId::from_hex(who) {
            return Ok(id);
        }
        Ok(self.load_key(who)?.person_id())
    }

    pub fn write_registry_file(&self, ledger: &Ledger) -> std::io::Result<PathBuf> {
        let path = self.data_dir.join("registry.txt");
        fs::write(&path, ledger.state().registry.to_text())?;
        Ok(path)
    }
}

/// Comma-separated list splitter that tolerates spaces.
pub fn split_list(raw: &str) -> Vec<String> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Parse a 32-byte hex seed.
pub fn parse_seed(raw: &str) -> Result<[u8; 32], String> {
    hex::decode(raw)
        .ok()
        .and_then(|v| v.try_into().ok())
        .ok_or_else(|| "seed must be 64 hex characters".to_string())
}

pub fn default_data_dir() -> PathBuf {
    std::env::var_os("COLLEGIUM_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(".collegium").to_path_buf())
}
