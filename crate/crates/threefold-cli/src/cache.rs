//! Content-addressed cache of JSON reports: one file per key under the
//! cache directory, written atomically (temp file then rename). The key
//! hashes the input file bytes together with the subcommand and the
//! engine configuration, so a cached report is exactly reproducible.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

pub fn cache_key(parts: &[&[u8]]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

pub fn sha256_hex(data: &[u8]) -> String {
    cache_key(&[data])
}

fn entry_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("{key}.json"))
}

pub fn lookup(dir: &Path, key: &str) -> Option<String> {
    fs::read_to_string(entry_path(dir, key)).ok()
}

pub fn store(dir: &Path, key: &str, contents: &str) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let target = entry_path(dir, key);
    let tmp = dir.join(format!(".{key}.tmp"));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, &target)
}
