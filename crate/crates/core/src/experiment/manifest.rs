//! Run manifests: the resolved configuration, code version, timings,
//! effective sample sizes and a SHA-256 checksum of every output file.
//!
//! A manifest is itself a valid settings file, so passing it back through
//! `--config` repeats the run and checks the recorded checksums.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::config::ExperimentConfig;

pub const MANIFEST_SUFFIX: &str = "manifest.txt";

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub wall_clock_seconds: f64,
    /// Extra diagnostics such as effective sample sizes, keyed without prefix.
    pub ess: BTreeMap<String, f64>,
    pub resampled_paths: u64,
    /// Output file name (relative to the output directory) to checksum.
    pub checksums: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(config: ExperimentConfig) -> Self {
        Self {
            config,
            wall_clock_seconds: 0.0,
            ess: BTreeMap::new(),
            resampled_paths: 0,
            checksums: BTreeMap::new(),
        }
    }

    /// Records the checksum of an output written into the output directory.
    pub fn add_output(&mut self, path: &Path) -> Result<()> {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        self.checksums.insert(name, sha256_file(path)?);
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("command = {}\n", self.config.command.name()));
        for (k, v) in self.config.echo() {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s.push_str(&format!("code_version = {}\n", env!("CARGO_PKG_VERSION")));
        s.push_str(&format!("wall_clock_seconds = {:.3}\n", self.wall_clock_seconds));
        s.push_str(&format!("resampled_paths = {}\n", self.resampled_paths));
        for (k, v) in &self.ess {
            s.push_str(&format!("ess.{k} = {v:.1}\n"));
        }
        for (k, v) in &self.checksums {
            s.push_str(&format!("checksum.{k} = {v}\n"));
        }
        s
    }

    pub fn write(&self) -> Result<PathBuf> {
        let path = self
            .config
            .out
            .join(format!("{}_{}", self.config.command.name().replace('-', "_"), MANIFEST_SUFFIX));
        let mut f = std::fs::File::create(&path)?;
        f.write_all(self.render().as_bytes())?;
        Ok(path)
    }

    /// Compares the recorded checksums against `expected` (from an earlier
    /// manifest). Files absent from either side are ignored.
    pub fn verify(&self, expected: &BTreeMap<String, String>) -> Result<usize> {
        let mut matched = 0;
        let mut mismatched = Vec::new();
        for (name, want) in expected {
            if let Some(got) = self.checksums.get(name) {
                if got == want {
                    matched += 1;
                } else {
                    mismatched.push(name.clone());
                }
            }
        }
        if mismatched.is_empty() {
            Ok(matched)
        } else {
            Err(Error::Schema {
                source_name: "manifest".into(),
                message: format!("checksum mismatch for {}", mismatched.join(", ")),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::{Command, Settings};

    #[test]
    fn manifest_is_a_settings_file() {
        let mut s = Settings::new();
        s.set("trials", "123").unwrap();
        let cfg = ExperimentConfig::resolve(Command::Calibrate, &s).unwrap();
        let mut m = RunManifest::new(cfg.clone());
        m.checksums.insert("thresholds.csv".into(), "abc".into());
        m.ess.insert("lr.0.05.u=1".into(), 99.0);
        let back = Settings::from_text(&m.render(), "manifest").unwrap();
        assert_eq!(ExperimentConfig::resolve(Command::Calibrate, &back).unwrap(), cfg);
        assert_eq!(back.expected_checksums()["thresholds.csv"], "abc");
        assert_eq!(m.verify(back.expected_checksums()).unwrap(), 1);
        let mut other = BTreeMap::new();
        other.insert("thresholds.csv".to_string(), "abd".to_string());
        assert!(m.verify(&other).is_err());
    }

    #[test]
    fn sha_of_known_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.txt");
        std::fs::write(&p, b"abc").unwrap();
        assert_eq!(
            sha256_file(&p).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
