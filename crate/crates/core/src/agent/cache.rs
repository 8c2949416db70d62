use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use super::prompts::AgentRequest;

/// Response cache keyed by (model, request). Safe to share across workers.
///
/// With a directory configured, entries persist as `<dir>/<key>.txt` so a
/// second process run is served without touching the provider.
#[derive(Debug, Default)]
pub struct ResponseCache {
    memory: Mutex<HashMap<String, String>>,
    dir: Option<PathBuf>,
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl ResponseCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn with_dir(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { memory: Mutex::default(), dir: Some(dir) })
    }

    pub fn key(request: &AgentRequest<'_>, model_id: &str) -> String {
        let mut h = Sha256::new();
        for part in [model_id, request.stage.as_str(), &request.role_header, &request.user_text] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part.as_bytes());
        }
        match request.attached_frames {
            Some(frames) => h.update(frames.content_digest().as_bytes()),
            None => h.update(b"no-frames"),
        }
        hex::encode(h.finalize())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        if let Some(hit) = self.memory.lock().expect("cache lock").get(key) {
            return Some(hit.clone());
        }
        let dir = self.dir.as_ref()?;
        let text = std::fs::read_to_string(dir.join(format!("{key}.txt"))).ok()?;
        self.memory.lock().expect("cache lock").insert(key.to_string(), text.clone());
        Some(text)
    }

    pub fn put(&self, key: &str, text: &str) -> std::io::Result<()> {
        self.memory.lock().expect("cache lock").insert(key.to_string(), text.to_string());
        if let Some(dir) = &self.dir {
            let n = TMP_COUNTER.fetch_add(1, Ordering::Relaxed);
            let tmp = dir.join(format!(".{key}.{}.{n}.tmp", std::process::id()));
            std::fs::write(&tmp, text)?;
            std::fs::rename(tmp, dir.join(format!("{key}.txt")))?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.memory.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
