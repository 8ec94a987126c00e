//! Run orchestration shared by every CLI command: key=value config files,
//! seeded reproducibility, and run manifests with artifact checksums.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    /// Bad flags/config/paths; maps to exit code 1.
    #[error("validation: {0}")]
    Validation(String),
    /// Failure while running; maps to exit code 2.
    #[error("runtime: {0}")]
    Runtime(#[from] anyhow::Error),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Validation(_) => 1,
            PipelineError::Runtime(_) => 2,
        }
    }
}

pub fn validation(msg: impl Into<String>) -> PipelineError {
    PipelineError::Validation(msg.into())
}

/// key=value file; `#` comments and blank lines are ignored. Flags override
/// file values, which override defaults.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    map: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path)
            .map_err(|e| validation(format!("config {}: {e}", path.display())))?;
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| validation(format!("config line {}: missing '='", i + 1)))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self { map })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, PipelineError>
    where
        T::Err: std::fmt::Display,
    {
        match self.map.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|e| validation(format!("config key {key}={raw}: {e}"))),
        }
    }
}

/// Resolves an option as flag > config file > default.
pub fn resolve<T: FromStr + Clone>(
    flag: Option<T>,
    cfg: &ConfigFile,
    key: &str,
    default: T,
) -> Result<T, PipelineError>
where
    T::Err: std::fmt::Display,
{
    Ok(flag.or(cfg.get(key)?).unwrap_or(default))
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let bytes = fs::read(path)?;
    Ok(hex_digest(&bytes))
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let mut out = String::with_capacity(64);
    for b in hasher.finalize() {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Collects what a command did; flushed to `<out>/<command>.manifest.txt`
/// even when the command fails.
pub struct RunManifest {
    command: String,
    out_dir: PathBuf,
    config: BTreeMap<String, String>,
    artifacts: Vec<PathBuf>,
    notes: Vec<(String, String)>,
    started: Instant,
}

impl RunManifest {
    pub fn new(command: &str, out_dir: &Path) -> Self {
        Self {
            command: command.to_string(),
            out_dir: out_dir.to_path_buf(),
            config: BTreeMap::new(),
            artifacts: Vec::new(),
            notes: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn config(&mut self, key: &str, value: impl ToString) {
        self.config.insert(key.to_string(), value.to_string());
    }

    pub fn artifact(&mut self, path: &Path) {
        self.artifacts.push(path.to_path_buf());
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.push((key.to_string(), value.to_string()));
    }

    fn config_hash(&self) -> String {
        let mut joined = String::new();
        for (k, v) in &self.config {
            let _ = writeln!(joined, "{k}={v}");
        }
        hex_digest(joined.as_bytes())
    }

    /// Writes the manifest, recording the error code on failure.
    pub fn finish(&self, status: Result<(), &PipelineError>) -> std::io::Result<PathBuf> {
        fs::create_dir_all(&self.out_dir)?;
        let mut out = String::new();
        let _ = writeln!(out, "command={}", self.command);
        let _ = writeln!(
            out,
            "status={}",
            match status {
                Ok(()) => "ok".to_string(),
                Err(e) => format!("error({})", e.exit_code()),
            }
        );
        if let Err(e) = status {
            let _ = writeln!(out, "error={e}");
        }
        let _ = writeln!(out, "config_hash={}", self.config_hash());
        for (k, v) in &self.config {
            let _ = writeln!(out, "config.{k}={v}");
        }
        let _ = writeln!(
            out,
            "started_unix={}",
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs().saturating_sub(self.started.elapsed().as_secs()))
                .unwrap_or_default()
        );
        let _ = writeln!(out, "duration_ms={}", self.started.elapsed().as_millis());
        for (k, v) in &self.notes {
            let _ = writeln!(out, "note.{k}={v}");
        }
        for path in &self.artifacts {
            let digest = sha256_file(path).unwrap_or_else(|_| "missing".to_string());
            let name = path.strip_prefix(&self.out_dir).unwrap_or(path);
            let _ = writeln!(out, "artifact.{}={digest}", name.display());
        }
        let path = self.out_dir.join(format!("{}.manifest.txt", self.command));
        fs::write(&path, out)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_parsing_and_resolution() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "# comment\nd = 9\nstride=10\n").unwrap();
        let cfg = ConfigFile::load(&path).unwrap();
        assert_eq!(resolve(None, &cfg, "d", 3usize).unwrap(), 9);
        assert_eq!(resolve(Some(4usize), &cfg, "d", 3).unwrap(), 4);
        assert_eq!(resolve(None, &cfg, "missing", 7usize).unwrap(), 7);
        assert!(cfg.get::<usize>("nope").unwrap().is_none());
        fs::write(&path, "bad line\n").unwrap();
        assert!(ConfigFile::load(&path).is_err());
    }

    #[test]
    fn manifest_written_on_failure_with_code() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new("train", dir.path());
        m.config("seed", 7);
        let err = validation("missing input");
        let path = m.finish(Err(&err)).unwrap();
        let text = fs::read_to_string(path).unwrap();
        assert!(text.contains("status=error(1)"));
        assert!(text.contains("error=validation: missing input"));
        assert!(text.contains("config_hash="));
    }

    #[test]
    fn manifest_checksums_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let art = dir.path().join("a.bin");
        fs::write(&art, b"hello").unwrap();
        let mut m = RunManifest::new("encode", dir.path());
        m.artifact(&art);
        let path = m.finish(Ok(())).unwrap();
        let text = fs::read_to_string(path).unwrap();
        assert!(text.contains(&format!("artifact.a.bin={}", hex_digest(b"hello"))));
    }
}
