//! Run directory: a manifest plus JSON and JSON-lines artifacts, each
//! stamped with the schema version and the run hash.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::manifest::RunManifest;

pub const SCHEMA_VERSION: u32 = 1;

pub const MANIFEST: &str = "manifest.json";
pub const PROBLEMS: &str = "problems.jsonl";
pub const RECORDS: &str = "records.jsonl";
pub const VERDICTS: &str = "verdicts.jsonl";
pub const FIT: &str = "fit.json";
pub const INTERVALS: &str = "intervals.json";
pub const RANGES: &str = "ranges.json";
pub const REPORT: &str = "report.json";
pub const LEADERBOARD_MD: &str = "leaderboard.md";
pub const LEADERBOARD_JSON: &str = "leaderboard.json";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: missing artifact", .0.display())]
    Missing(PathBuf),
    #[error("{}: field {field} is {found}, expected {expected}", path.display())]
    Schema {
        path: PathBuf,
        field: &'static str,
        found: String,
        expected: String,
    },
    #[error("{} line {line}: {message}", path.display())]
    Corrupt { path: PathBuf, line: usize, message: String },
    #[error("{}: belongs to run {found}, not {expected}", path.display())]
    HashMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },
}

/// First line of every JSON-lines artifact.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub schema_version: u32,
    pub run_hash: String,
    pub kind: String,
}

/// Envelope of every JSON artifact.
#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    schema_version: u32,
    run_hash: String,
    kind: String,
    data: T,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes via a temporary sibling and a rename.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    {
        let mut f = File::create(&tmp).map_err(io(&tmp))?;
        f.write_all(bytes).map_err(io(&tmp))?;
        f.sync_all().map_err(io(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io(path))
}

#[derive(Clone, Debug)]
pub struct RunStore {
    dir: PathBuf,
    manifest: RunManifest,
    run_hash: String,
}

impl RunStore {
    /// Creates `dir` if needed and records the manifest. An existing
    /// directory must belong to the same run.
    pub fn create(dir: &Path, manifest: &RunManifest) -> Result<Self, StoreError> {
        fs::create_dir_all(dir).map_err(io(dir))?;
        let run_hash = manifest.run_hash();
        let path = dir.join(MANIFEST);
        if path.exists() {
            let existing = Self::open(dir)?;
            if existing.run_hash != run_hash {
                return Err(StoreError::HashMismatch {
                    path,
                    expected: run_hash,
                    found: existing.run_hash,
                });
            }
        }
        let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
        write_atomic(&path, format!("{text}\n").as_bytes())?;
        Ok(RunStore {
            dir: dir.to_path_buf(),
            manifest: manifest.clone(),
            run_hash,
        })
    }

    pub fn open(dir: &Path) -> Result<Self, StoreError> {
        let path = dir.join(MANIFEST);
        if !path.exists() {
            return Err(StoreError::Missing(path));
        }
        let text = fs::read_to_string(&path).map_err(io(&path))?;
        let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| StoreError::Corrupt {
            path: path.clone(),
            line: e.line(),
            message: e.to_string(),
        })?;
        Ok(RunStore {
            dir: dir.to_path_buf(),
            run_hash: manifest.run_hash(),
            manifest,
        })
    }

    /// Same directory, with ranking settings replaced. The run hash ignores
    /// those settings, so existing artifacts stay readable.
    pub fn with_manifest(&self, manifest: RunManifest) -> Result<Self, StoreError> {
        let run_hash = manifest.run_hash();
        if run_hash != self.run_hash {
            return Err(StoreError::HashMismatch {
                path: self.dir.join(MANIFEST),
                expected: self.run_hash.clone(),
                found: run_hash,
            });
        }
        Ok(RunStore {
            dir: self.dir.clone(),
            manifest,
            run_hash,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    pub fn run_hash(&self) -> &str {
        &self.run_hash
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn exists(&self, name: &str) -> bool {
        self.path(name).exists()
    }

    fn header(&self, kind: &str) -> Header {
        Header {
            schema_version: SCHEMA_VERSION,
            run_hash: self.run_hash.clone(),
            kind: kind.to_string(),
        }
    }

    fn check_stamp(&self, path: &Path, version: u32, hash: &str, kind: &str, want_kind: &str) -> Result<(), StoreError> {
        if version != SCHEMA_VERSION {
            return Err(StoreError::Schema {
                path: path.to_path_buf(),
                field: "schema_version",
                found: version.to_string(),
                expected: SCHEMA_VERSION.to_string(),
            });
        }
        if kind != want_kind {
            return Err(StoreError::Schema {
                path: path.to_path_buf(),
                field: "kind",
                found: kind.to_string(),
                expected: want_kind.to_string(),
            });
        }
        if hash != self.run_hash {
            return Err(StoreError::HashMismatch {
                path: path.to_path_buf(),
                expected: self.run_hash.clone(),
                found: hash.to_string(),
            });
        }
        Ok(())
    }

    pub fn write_jsonl<T: Serialize>(&self, name: &str, kind: &str, items: &[T]) -> Result<(), StoreError> {
        let mut out = serde_json::to_string(&self.header(kind)).expect("header serializes");
        out.push('\n');
        for item in items {
            out.push_str(&serde_json::to_string(item).expect("artifact serializes"));
            out.push('\n');
        }
        write_atomic(&self.path(name), out.as_bytes())
    }

    pub fn read_jsonl<T: DeserializeOwned>(&self, name: &str, kind: &str) -> Result<Vec<T>, StoreError> {
        self.read_lines(&self.path(name), kind, false)
    }

    fn read_lines<T: DeserializeOwned>(&self, path: &Path, kind: &str, tolerant: bool) -> Result<Vec<T>, StoreError> {
        if !path.exists() {
            return Err(StoreError::Missing(path.to_path_buf()));
        }
        let text = fs::read_to_string(path).map_err(io(path))?;
        let mut lines = text.split_inclusive('\n').enumerate();
        let (_, first) = lines.next().ok_or_else(|| StoreError::Corrupt {
            path: path.to_path_buf(),
            line: 1,
            message: "empty file, expected a header".into(),
        })?;
        let header: Header = serde_json::from_str(first).map_err(|e| StoreError::Corrupt {
            path: path.to_path_buf(),
            line: 1,
            message: format!("bad header: {e}"),
        })?;
        self.check_stamp(path, header.schema_version, &header.run_hash, &header.kind, kind)?;
        let mut items = Vec::new();
        for (i, line) in lines {
            let complete = line.ends_with('\n');
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(line) {
                Ok(item) if complete || !tolerant => items.push(item),
                Err(e) if !tolerant => {
                    return Err(StoreError::Corrupt {
                        path: path.to_path_buf(),
                        line: i + 1,
                        message: e.to_string(),
                    })
                }
                // A crash can leave a half-written checkpoint line.
                _ => tracing::warn!(path = %path.display(), line = i + 1, "dropping torn checkpoint line"),
            }
        }
        Ok(items)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, kind: &str, data: &T) -> Result<(), StoreError> {
        let env = Envelope {
            schema_version: SCHEMA_VERSION,
            run_hash: self.run_hash.clone(),
            kind: kind.to_string(),
            data,
        };
        let text = serde_json::to_string_pretty(&env).expect("artifact serializes");
        write_atomic(&self.path(name), format!("{text}\n").as_bytes())
    }

    pub fn read_json<T: DeserializeOwned>(&self, name: &str, kind: &str) -> Result<T, StoreError> {
        let path = self.path(name);
        if !path.exists() {
            return Err(StoreError::Missing(path));
        }
        let text = fs::read_to_string(&path).map_err(io(&path))?;
        let corrupt = |e: serde_json::Error| StoreError::Corrupt {
            path: path.clone(),
            line: e.line(),
            message: e.to_string(),
        };
        let raw: Envelope<Value> = serde_json::from_str(&text).map_err(corrupt)?;
        self.check_stamp(&path, raw.schema_version, &raw.run_hash, &raw.kind, kind)?;
        serde_json::from_value(raw.data).map_err(corrupt)
    }

    /// Writes a plain file (not stamped), atomically.
    pub fn write_text(&self, name: &str, text: &str) -> Result<(), StoreError> {
        write_atomic(&self.path(name), text.as_bytes())
    }

    fn partial_path(&self, name: &str) -> PathBuf {
        self.path(&name.replace(".jsonl", ".partial.jsonl"))
    }

    /// Items checkpointed so far for `name`; empty when none.
    pub fn read_partial<T: DeserializeOwned>(&self, name: &str, kind: &str) -> Result<Vec<T>, StoreError> {
        let path = self.partial_path(name);
        if !path.exists() {
            return Ok(Vec::new());
        }
        self.read_lines(&path, kind, true)
    }

    /// Appender for the checkpoint of `name`, creating it with a header.
    pub fn checkpoint(&self, name: &str, kind: &str) -> Result<Checkpoint, StoreError> {
        let path = self.partial_path(name);
        let fresh = !path.exists();
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io(&path))?;
        if fresh {
            let line = serde_json::to_string(&self.header(kind)).expect("header serializes");
            writeln!(file, "{line}").map_err(io(&path))?;
        } else {
            // Terminate a line cut short by a crash so appends stay parseable.
            let text = fs::read(&path).map_err(io(&path))?;
            if text.last().is_some_and(|b| *b != b'\n') {
                writeln!(file).map_err(io(&path))?;
            }
        }
        Ok(Checkpoint { path, file })
    }

    pub fn checkpoint_path(&self, name: &str) -> PathBuf {
        self.partial_path(name)
    }

    /// Drops the checkpoint once the final artifact is written.
    pub fn clear_checkpoint(&self, name: &str) -> Result<(), StoreError> {
        let path = self.partial_path(name);
        if path.exists() {
            fs::remove_file(&path).map_err(io(&path))?;
        }
        Ok(())
    }
}

/// Append-only checkpoint file.
pub struct Checkpoint {
    path: PathBuf,
    file: File,
}

impl Checkpoint {
    pub fn append<T: Serialize>(&mut self, item: &T) -> Result<(), StoreError> {
        let line = serde_json::to_string(item).expect("artifact serializes");
        writeln!(self.file, "{line}").map_err(io(&self.path))?;
        self.file.flush().map_err(io(&self.path))
    }
}
