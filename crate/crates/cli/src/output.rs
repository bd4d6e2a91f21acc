//! Atomic file output and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::CliResult;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_NAME: &str = "manifest.json";

/// Files written by one run. Dropping it without [`OutputSet::commit`]
/// removes everything it wrote.
pub struct OutputSet {
    dir: PathBuf,
    written: Vec<String>,
    committed: bool,
}

impl OutputSet {
    pub fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir)?;
        Ok(OutputSet { dir: dir.to_path_buf(), written: Vec::new(), committed: false })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[String] {
        &self.written
    }

    /// Writes `name` through a temporary file and a rename.
    pub fn write(&mut self, name: &str, contents: &str) -> CliResult<()> {
        write_atomic(&self.dir.join(name), contents.as_bytes())?;
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable output");
        text.push('\n');
        self.write(name, &text)
    }

    pub fn commit(mut self) -> Vec<String> {
        self.committed = true;
        std::mem::take(&mut self.written)
    }
}

impl Drop for OutputSet {
    fn drop(&mut self) {
        if !self.committed {
            for name in &self.written {
                let _ = fs::remove_file(self.dir.join(name));
            }
        }
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let file_name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{file_name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub artifact_version: String,
    /// Seconds since the Unix epoch.
    pub started_at: u64,
    pub finished_at: u64,
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uncommitted_outputs_are_removed() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut out = OutputSet::create(dir.path()).unwrap();
            out.write("a.csv", "x\n").unwrap();
            assert!(dir.path().join("a.csv").exists());
        }
        assert!(!dir.path().join("a.csv").exists());

        let mut out = OutputSet::create(dir.path()).unwrap();
        out.write("b.csv", "y\n").unwrap();
        assert_eq!(out.commit(), vec!["b.csv".to_string()]);
        assert_eq!(fs::read_to_string(dir.path().join("b.csv")).unwrap(), "y\n");
        assert!(!dir.path().join(".b.csv.tmp").exists());
    }
}
