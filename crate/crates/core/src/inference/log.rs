use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use super::{InferenceError, RunKey, RunRecord};

/// Parses a JSONL run log. A missing file is an empty log. More than one
/// `ok` record for the same key makes the log malformed.
pub fn read_log(path: &Path) -> Result<Vec<RunRecord>, InferenceError> {
    let io_err = |source| InferenceError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(e)),
    };
    let mut records = Vec::new();
    let mut ok_keys = HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RunRecord =
            serde_json::from_str(&line).map_err(|e| InferenceError::MalformedLog {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
        if record.is_ok() && !ok_keys.insert(record.key.clone()) {
            return Err(InferenceError::MalformedLog {
                path: path.to_path_buf(),
                line: i + 1,
                message: "duplicate ok record for one key".into(),
            });
        }
        records.push(record);
    }
    Ok(records)
}

/// Append-only handle on a run log.
pub struct RunLog {
    path: PathBuf,
    file: File,
    completed: HashSet<RunKey>,
}

impl RunLog {
    pub fn open(path: &Path) -> Result<Self, InferenceError> {
        let records = read_log(path)?;
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|source| InferenceError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|source| InferenceError::Io {
                path: path.to_path_buf(),
                source,
            })?;
        let completed = records
            .into_iter()
            .filter(RunRecord::is_ok)
            .map(|r| r.key)
            .collect();
        Ok(RunLog {
            path: path.to_path_buf(),
            file,
            completed,
        })
    }

    pub fn is_completed(&self, key: &RunKey) -> bool {
        self.completed.contains(key)
    }

    pub fn completed_count(&self) -> usize {
        self.completed.len()
    }

    pub fn append(&mut self, record: &RunRecord) -> Result<(), InferenceError> {
        let mut line = serde_json::to_string(record).expect("records serialize");
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|source| InferenceError::Io {
                path: self.path.clone(),
                source,
            })?;
        if record.is_ok() {
            self.completed.insert(record.key.clone());
        }
        Ok(())
    }
}
