//! Write-once, content-addressed output files.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use sparsegrid::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
pub struct Envelope {
    pub artifact: String,
    pub config_hash: String,
    pub seed: u64,
    pub body: Value,
}

fn digest(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    parts.iter().for_each(|p| h.update(p));
    hex::encode(h.finalize())[..16].to_string()
}

/// Stores `bytes` as `<dir>/<kind>-<hash>.<ext>`. An existing file with the
/// same name is left untouched; it must hold the same bytes.
pub fn write_bytes(dir: &Path, kind: &str, ext: &str, bytes: &[u8]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{kind}-{}.{ext}", digest(&[bytes])));
    place(&path, bytes)?;
    Ok(path)
}

fn place(path: &Path, bytes: &[u8]) -> Result<()> {
    if path.exists() {
        if std::fs::read(path)? != bytes {
            return Err(Error::Corrupt(format!("{} exists with different content", path.display())));
        }
        return Ok(());
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize>(dir: &Path, kind: &str, config_hash: &str, seed: u64, body: &T) -> Result<PathBuf> {
    let env = Envelope { artifact: kind.into(), config_hash: config_hash.into(), seed, body: serde_json::to_value(body)? };
    let mut bytes = serde_json::to_vec_pretty(&env)?;
    bytes.push(b'\n');
    write_bytes(dir, kind, "json", &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<T> {
    let env: Envelope = serde_json::from_slice(&std::fs::read(path)?)?;
    if env.artifact != kind {
        return Err(Error::Invalid(format!("{} is a `{}` artifact, expected `{kind}`", path.display(), env.artifact)));
    }
    Ok(serde_json::from_value(env.body)?)
}

/// A data file plus its sidecar (for example a dataset and its manifest),
/// named by the hash of both.
pub fn write_pair(dir: &Path, kind: &str, ext: &str, data: &[u8], sidecar_suffix: &str, sidecar: &[u8]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{kind}-{}.{ext}", digest(&[data, sidecar])));
    let side = PathBuf::from(format!("{}{sidecar_suffix}", path.display()));
    place(&side, sidecar)?;
    place(&path, data)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_content_same_name_and_no_overwrite() {
        let dir = std::env::temp_dir().join(format!("sparsegrid-art-{}", std::process::id()));
        let a = write_json(&dir, "demo", "abc", 1, &vec![1, 2, 3]).unwrap();
        let b = write_json(&dir, "demo", "abc", 1, &vec![1, 2, 3]).unwrap();
        assert_eq!(a, b);
        let c = write_json(&dir, "demo", "abc", 2, &vec![1, 2, 3]).unwrap();
        assert_ne!(a, c);
        std::fs::write(&a, b"tampered").unwrap();
        assert!(write_json(&dir, "demo", "abc", 1, &vec![1, 2, 3]).is_err());
        let v: Vec<i32> = read_json(&c, "demo").unwrap();
        assert_eq!(v, vec![1, 2, 3]);
        assert!(read_json::<Vec<i32>>(&c, "other").is_err());
        std::fs::remove_dir_all(dir).unwrap();
    }
}
