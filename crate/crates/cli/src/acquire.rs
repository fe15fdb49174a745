use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Duration;

use thiserror::Error;
use vmspos_core::ivtff::sha256_hex;

use crate::config::InputConfig;

/// Overrides the on-disk cache directory for downloaded inputs.
pub const CACHE_ENV: &str = "VMSPOS_CACHE_DIR";

#[derive(Debug, Error)]
pub enum AcquireError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("checksum mismatch for {origin}: expected {expected}, got {actual}")]
    ChecksumMismatch {
        origin: String,
        expected: String,
        actual: String,
    },
    #[error("fetching {url} failed: {reason}. {hint}")]
    Network {
        url: String,
        reason: String,
        hint: String,
    },
    #[error("{url} is not cached and --offline forbids fetching it. {hint}")]
    Offline { url: String, hint: String },
    #[error("input config names neither a path nor a URL")]
    NoSource,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Acquired {
    pub bytes: Vec<u8>,
    pub checksum: String,
    /// Human-readable origin: a path, or a URL plus whether it came from cache.
    pub origin: String,
    pub from_cache: bool,
}

pub fn cache_dir() -> PathBuf {
    if let Some(d) = std::env::var_os(CACHE_ENV).filter(|d| !d.is_empty()) {
        return PathBuf::from(d);
    }
    if let Some(d) = std::env::var_os("XDG_CACHE_HOME").filter(|d| !d.is_empty()) {
        return PathBuf::from(d).join("vmspos");
    }
    match std::env::var_os("HOME") {
        Some(h) => PathBuf::from(h).join(".cache").join("vmspos"),
        None => std::env::temp_dir().join("vmspos-cache"),
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> AcquireError + '_ {
    move |source| AcquireError::Io {
        path: path.to_owned(),
        source,
    }
}

fn verify(bytes: &[u8], expected: Option<&str>, origin: &str) -> Result<String, AcquireError> {
    let actual = sha256_hex(bytes);
    match expected {
        Some(e) if e != actual => Err(AcquireError::ChecksumMismatch {
            origin: origin.to_string(),
            expected: e.to_string(),
            actual,
        }),
        _ => Ok(actual),
    }
}

fn hint(cached: &Path) -> String {
    format!(
        "Place a verified copy at {} (or point {CACHE_ENV} at a directory holding one), or use input.path",
        cached.display()
    )
}

/// Reads the transliteration from a local path or a checksum-keyed URL
/// cache, fetching on a cache miss unless `offline`.
pub fn acquire_input(input: &InputConfig, offline: bool) -> Result<Acquired, AcquireError> {
    let expected = input.expected_checksum.as_deref();
    if let Some(path) = &input.path {
        let bytes = std::fs::read(path).map_err(io(path))?;
        let origin = path.display().to_string();
        let checksum = verify(&bytes, expected, &origin)?;
        return Ok(Acquired {
            bytes,
            checksum,
            origin,
            from_cache: false,
        });
    }
    let url = input.url.as_deref().ok_or(AcquireError::NoSource)?;
    let expected = expected.ok_or(AcquireError::NoSource)?;
    let dir = cache_dir();
    let cached = dir.join(format!("{expected}.ivtff"));
    if cached.is_file() {
        let bytes = std::fs::read(&cached).map_err(io(&cached))?;
        if sha256_hex(&bytes) == expected {
            log::info!("serving {url} from cache {}", cached.display());
            return Ok(Acquired {
                bytes,
                checksum: expected.to_string(),
                origin: format!("{url} (cache {})", cached.display()),
                from_cache: true,
            });
        }
        log::warn!("discarding corrupt cache entry {}", cached.display());
    }
    if offline {
        return Err(AcquireError::Offline {
            url: url.to_string(),
            hint: hint(&cached),
        });
    }
    let net = |reason: String| AcquireError::Network {
        url: url.to_string(),
        reason,
        hint: hint(&cached),
    };
    let agent = ureq::AgentBuilder::new()
        .timeout(Duration::from_secs(60))
        .build();
    let resp = agent.get(url).call().map_err(|e| net(e.to_string()))?;
    let mut bytes = Vec::new();
    resp.into_reader()
        .take(256 << 20)
        .read_to_end(&mut bytes)
        .map_err(|e| net(e.to_string()))?;
    verify(&bytes, Some(expected), url)?;
    std::fs::create_dir_all(&dir).map_err(io(&dir))?;
    let tmp = dir.join(format!("{expected}.part{}", std::process::id()));
    std::fs::write(&tmp, &bytes).map_err(io(&tmp))?;
    std::fs::rename(&tmp, &cached).map_err(io(&cached))?;
    Ok(Acquired {
        bytes,
        checksum: expected.to_string(),
        origin: url.to_string(),
        from_cache: false,
    })
}
