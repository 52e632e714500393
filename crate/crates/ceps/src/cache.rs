//! The persistent memo of solver runs.
//!
//! On disk the cache is a JSON-lines file, one `{config, instance, seed,
//! outcome}` record per line, only ever appended to.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, LineWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use ceps_core::{Fingerprint, RunKey, RunOutcome};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    config: Fingerprint,
    instance: Fingerprint,
    seed: u64,
    outcome: RunOutcome,
}

#[derive(Debug)]
pub struct RunCache {
    entries: RwLock<HashMap<RunKey, RunOutcome>>,
    log: Option<(PathBuf, Mutex<LineWriter<File>>)>,
}

impl Default for RunCache {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl RunCache {
    pub fn in_memory() -> Self {
        RunCache {
            entries: RwLock::new(HashMap::new()),
            log: None,
        }
    }

    /// Loads `path` if it exists and appends every new entry to it.
    pub fn open(path: &Path) -> Result<Self> {
        let mut entries = HashMap::new();
        if path.exists() {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: Record = serde_json::from_str(&line).map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: e.to_string(),
                })?;
                let key = RunKey {
                    config: rec.config,
                    instance: rec.instance,
                    seed: rec.seed,
                };
                merge(&mut entries, key, rec.outcome)?;
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(RunCache {
            entries: RwLock::new(entries),
            log: Some((path.to_path_buf(), Mutex::new(LineWriter::new(file)))),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.log.as_ref().map(|(p, _)| p.as_path())
    }

    pub fn get(&self, key: &RunKey) -> Option<RunOutcome> {
        self.entries.read().expect("cache lock").get(key).cloned()
    }

    pub fn contains(&self, key: &RunKey) -> bool {
        self.entries.read().expect("cache lock").contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Returns whether the entry was new. Re-inserting an identical outcome
    /// is a no-op; a different outcome for a known key is an error.
    pub fn insert(&self, key: RunKey, outcome: RunOutcome) -> Result<bool> {
        let mut entries = self.entries.write().expect("cache lock");
        if !merge(&mut entries, key, outcome.clone())? {
            return Ok(false);
        }
        if let Some((path, log)) = &self.log {
            let rec = Record {
                config: key.config,
                instance: key.instance,
                seed: key.seed,
                outcome,
            };
            let line = serde_json::to_string(&rec).map_err(|e| Error::json(path, e))?;
            let mut w = log.lock().expect("cache log lock");
            writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
        }
        Ok(true)
    }

    /// All entries, sorted by key.
    pub fn snapshot(&self) -> Vec<(RunKey, RunOutcome)> {
        let mut all: Vec<_> = self
            .entries
            .read()
            .expect("cache lock")
            .iter()
            .map(|(k, v)| (*k, v.clone()))
            .collect();
        all.sort_by_key(|(k, _)| *k);
        all
    }
}

fn merge(
    entries: &mut HashMap<RunKey, RunOutcome>,
    key: RunKey,
    outcome: RunOutcome,
) -> Result<bool> {
    match entries.get(&key) {
        Some(old) if old.bit_eq(&outcome) => Ok(false),
        Some(_) => Err(ceps_core::Error::CacheConflict {
            config: key.config,
            instance: key.instance,
            seed: key.seed,
        }
        .into()),
        None => {
            entries.insert(key, outcome);
            Ok(true)
        }
    }
}
