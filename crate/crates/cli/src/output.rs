//! Output files, their digests and the run manifest.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Where a run's artifacts go.
#[derive(Debug, Clone)]
pub enum Target {
    /// Primary artifact on stdout, everything else skipped.
    Stdout,
    /// Every artifact under its default name in this directory.
    Dir(PathBuf),
    /// Primary artifact at this path, the rest beside it as `<stem>.<name>`.
    File(PathBuf),
    /// Hash only; nothing is written.
    Discard,
}

impl Target {
    /// A path with an extension names the primary file, anything else a
    /// directory.
    pub fn from_out(out: Option<&Path>) -> Self {
        match out {
            None => Target::Stdout,
            Some(p) if p.extension().is_some() && !p.is_dir() => Target::File(p.to_path_buf()),
            Some(p) => Target::Dir(p.to_path_buf()),
        }
    }

    fn path_for(&self, name: &str, primary: bool) -> Option<PathBuf> {
        match self {
            Target::Dir(dir) => Some(dir.join(name)),
            Target::File(path) if primary => Some(path.clone()),
            Target::File(path) => {
                let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                let dir = path.parent().unwrap_or(Path::new(""));
                Some(dir.join(format!("{stem}.{name}")))
            }
            Target::Stdout | Target::Discard => None,
        }
    }

    pub fn manifest_path(&self) -> Option<PathBuf> {
        self.path_for("manifest.json", false)
    }

    fn ensure_dir(&self) -> Result<()> {
        let dir = match self {
            Target::Dir(d) => d.as_path(),
            Target::File(p) => match p.parent() {
                Some(d) if !d.as_os_str().is_empty() => d,
                _ => return Ok(()),
            },
            _ => return Ok(()),
        };
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
    }
}

/// One artifact in the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub name: String,
    /// Where it was written, if anywhere.
    pub path: Option<String>,
    pub sha256: String,
    pub bytes: u64,
}

struct Hashing<W: Write> {
    inner: W,
    hasher: Sha256,
    bytes: u64,
}

impl<W: Write> Write for Hashing<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        self.bytes += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects artifacts of one run.
pub struct Outputs {
    target: Target,
    records: Vec<OutputRecord>,
    skipped: Vec<String>,
}

impl Outputs {
    pub fn new(target: Target) -> Result<Self> {
        target.ensure_dir()?;
        Ok(Self { target, records: Vec::new(), skipped: Vec::new() })
    }

    pub fn target(&self) -> &Target {
        &self.target
    }

    /// Writes artifact `name` through `fill`. Secondary artifacts are skipped
    /// when the primary one goes to stdout.
    pub fn emit<F>(&mut self, name: &str, primary: bool, fill: F) -> Result<()>
    where
        F: FnOnce(&mut dyn Write) -> Result<()>,
    {
        let (sink, path): (Box<dyn Write>, Option<PathBuf>) = match (&self.target, primary) {
            (Target::Stdout, true) => (Box::new(io::stdout().lock()), None),
            (Target::Stdout, false) => {
                self.skipped.push(name.to_string());
                return Ok(());
            }
            (Target::Discard, _) => (Box::new(io::sink()), None),
            (t, _) => {
                let path = t.path_for(name, primary).expect("file targets have paths");
                let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                (Box::new(f), Some(path))
            }
        };
        let mut w = Hashing { inner: BufWriter::with_capacity(1 << 16, sink), hasher: Sha256::new(), bytes: 0 };
        fill(&mut w)?;
        w.flush()?;
        self.records.push(OutputRecord {
            name: name.to_string(),
            path: path.map(|p| p.display().to_string()),
            sha256: hex(&w.hasher.finalize()),
            bytes: w.bytes,
        });
        Ok(())
    }

    pub fn records(&self) -> &[OutputRecord] {
        &self.records
    }

    pub fn skipped(&self) -> &[String] {
        &self.skipped
    }
}
