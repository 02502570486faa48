use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{CallKey, ChatModel, Message, TrialSeed};
use crate::error::{Error, Result};

/// One stored reply, addressed by the hash of its call coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub key: String,
    pub seed: TrialSeed,
    pub call: String,
    /// Final user message of the prompt, kept for auditing.
    pub question: String,
    pub answer: String,
}

/// Write-once JSONL store of model replies.
#[derive(Debug, Default)]
pub struct ReplayStore {
    path: Option<PathBuf>,
    entries: Mutex<BTreeMap<String, ReplayEntry>>,
    writer: Mutex<Option<BufWriter<File>>>,
}

impl ReplayStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads existing entries from a store file. The file (and its directory)
    /// is created on the first recorded reply.
    pub fn open(path: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        if path.exists() {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: ReplayEntry = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: e.to_string(),
                })?;
                if let Some(prev) = entries.get(&entry.key) {
                    if prev != &entry {
                        return Err(Error::ReplayConflict(entry.key));
                    }
                }
                entries.insert(entry.key.clone(), entry);
            }
        }
        Ok(Self {
            path: Some(path.to_path_buf()),
            entries: Mutex::new(entries),
            writer: Mutex::new(None),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("replay lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lookup(&self, key: &str) -> Option<String> {
        self.entries
            .lock()
            .expect("replay lock")
            .get(key)
            .map(|e| e.answer.clone())
    }

    /// Stores an entry. Re-recording an identical answer is a no-op; a
    /// different answer under an existing key is a conflict.
    pub fn record(&self, entry: ReplayEntry) -> Result<()> {
        let mut entries = self.entries.lock().expect("replay lock");
        if let Some(prev) = entries.get(&entry.key) {
            return if prev.answer == entry.answer {
                Ok(())
            } else {
                Err(Error::ReplayConflict(entry.key))
            };
        }
        if let Some(path) = &self.path {
            let mut writer = self.writer.lock().expect("replay lock");
            if writer.is_none() {
                *writer = Some(append_to(path)?);
            }
            let w = writer.as_mut().expect("writer just opened");
            let line = serde_json::to_string(&entry)?;
            writeln!(w, "{line}").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))?;
        }
        entries.insert(entry.key.clone(), entry);
        Ok(())
    }

    /// Rewrites the backing file sorted by key so its bytes do not depend on
    /// the order in which replies arrived.
    pub fn compact(&self) -> Result<()> {
        let Some(path) = &self.path else { return Ok(()) };
        let entries = self.entries.lock().expect("replay lock");
        let mut writer = self.writer.lock().expect("replay lock");
        *writer = None;
        let mut out = String::new();
        for e in entries.values() {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

fn append_to(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    Ok(BufWriter::new(file))
}

/// Serves replies from a store, falling back to (and recording) an inner
/// model on a miss when one is configured.
#[derive(Clone)]
pub struct ReplayModel {
    store: Arc<ReplayStore>,
    inner: Option<Arc<dyn ChatModel>>,
}

impl ReplayModel {
    pub fn replay_only(store: Arc<ReplayStore>) -> Self {
        Self { store, inner: None }
    }

    pub fn recording(store: Arc<ReplayStore>, inner: Arc<dyn ChatModel>) -> Self {
        Self {
            store,
            inner: Some(inner),
        }
    }

    pub fn store(&self) -> &Arc<ReplayStore> {
        &self.store
    }
}

impl ChatModel for ReplayModel {
    fn complete(&self, messages: &[Message], call: &CallKey) -> Result<String> {
        let key = call.key();
        if let Some(answer) = self.store.lookup(&key) {
            return Ok(answer);
        }
        let Some(inner) = &self.inner else {
            return Err(Error::ReplayMiss(format!("{key} ({} / {})", call.label, call.seed.question)));
        };
        let answer = inner.complete(messages, call)?;
        self.store.record(ReplayEntry {
            key,
            seed: call.seed.clone(),
            call: call.label.clone(),
            question: messages.last().map(|m| m.content.clone()).unwrap_or_default(),
            answer: answer.clone(),
        })?;
        Ok(answer)
    }
}
