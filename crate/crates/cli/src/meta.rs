//! `run.meta`: the command, seed, resolved config and a SHA-256 of every
//! artifact a run wrote.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliResult;

pub const META_FILE: &str = "run.meta";

#[derive(Debug, Serialize)]
struct Meta<'a> {
    command: &'a str,
    seed: u64,
    /// Artifact path relative to the output directory, to hex digest.
    artifacts: BTreeMap<String, String>,
    config: &'a RunConfig,
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// Writes `run.meta` into `out` listing `artifacts` (paths inside `out`).
pub fn write_meta(out: &Path, command: &str, cfg: &RunConfig, artifacts: &[PathBuf]) -> CliResult<PathBuf> {
    let mut hashes = BTreeMap::new();
    for a in artifacts {
        let rel = a.strip_prefix(out).unwrap_or(a);
        hashes.insert(rel.to_string_lossy().replace('\\', "/"), sha256_file(a)?);
    }
    let meta = Meta {
        command,
        seed: cfg.seed,
        artifacts: hashes,
        config: cfg,
    };
    let text = toml::to_string(&meta).map_err(|e| crate::CliError::Runtime(e.into()))?;
    let path = out.join(META_FILE);
    fs::write(&path, text)?;
    Ok(path)
}

/// Every regular file under `dir`, sorted, except `run.meta` itself.
pub fn files_under(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d)? {
            let p = e?.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n != META_FILE) {
                out.push(p);
            }
        }
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_known_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        fs::write(&p, b"abc").unwrap();
        assert_eq!(
            sha256_file(&p).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn meta_lists_artifacts_and_config() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("x.csv");
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(&p, "h\n").unwrap();
        let cfg = RunConfig::default();
        write_meta(dir.path(), "fly", &cfg, &files_under(dir.path()).unwrap()).unwrap();
        let text = fs::read_to_string(dir.path().join(META_FILE)).unwrap();
        let v: toml::Table = toml::from_str(&text).unwrap();
        assert_eq!(v["command"].as_str(), Some("fly"));
        assert!(v["artifacts"].as_table().unwrap().contains_key("sub/x.csv"));
        let back: RunConfig = v["config"].clone().try_into().unwrap();
        assert_eq!(back, cfg);
    }
}
