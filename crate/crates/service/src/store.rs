//! In-memory session store with optional JSON file persistence.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};

use gradleak_core::Session;
use serde::{Deserialize, Serialize};

use crate::experiment::EpochSummary;

/// 128-bit random token rendered as 32 lowercase hex digits.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionId(String);

impl SessionId {
    pub fn random() -> Self {
        Self(format!("{:032x}", rand::random::<u128>()))
    }

    pub fn parse(s: &str) -> Option<Self> {
        let valid = s.len() == 32 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'));
        valid.then(|| Self(s.to_owned()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A session plus the per-epoch summaries accumulated by the service.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionEntry {
    pub session: Session,
    #[serde(default)]
    pub epochs: Vec<EpochSummary>,
}

impl SessionEntry {
    pub fn new(session: Session) -> Self {
        Self {
            session,
            epochs: Vec::new(),
        }
    }
}

pub type SharedEntry = Arc<Mutex<SessionEntry>>;

#[derive(Default)]
pub struct SessionStore {
    sessions: RwLock<HashMap<SessionId, SharedEntry>>,
}

impl SessionStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&self, entry: SessionEntry) -> SessionId {
        let mut map = self.sessions.write().unwrap();
        let id = loop {
            let id = SessionId::random();
            if !map.contains_key(&id) {
                break id;
            }
        };
        map.insert(id.clone(), Arc::new(Mutex::new(entry)));
        id
    }

    pub fn get(&self, id: &SessionId) -> Option<SharedEntry> {
        self.sessions.read().unwrap().get(id).cloned()
    }

    pub fn remove(&self, id: &SessionId) -> bool {
        self.sessions.write().unwrap().remove(id).is_some()
    }

    pub fn len(&self) -> usize {
        self.sessions.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn snapshot(&self) -> BTreeMap<SessionId, SessionEntry> {
        let map = self.sessions.read().unwrap();
        map.iter()
            .map(|(id, entry)| (id.clone(), entry.lock().unwrap().clone()))
            .collect()
    }

    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        let json = serde_json::to_vec_pretty(&self.snapshot())?;
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, json)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let bytes = std::fs::read(path)?;
        let saved: BTreeMap<SessionId, SessionEntry> = serde_json::from_slice(&bytes)?;
        let sessions = saved
            .into_iter()
            .map(|(id, entry)| (id, Arc::new(Mutex::new(entry))))
            .collect();
        Ok(Self {
            sessions: RwLock::new(sessions),
        })
    }
}
