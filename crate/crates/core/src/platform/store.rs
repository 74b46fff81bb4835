use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{now_secs, PlatformError};
use crate::extract::write_atomic;
use crate::spec::{parse_spec, serialize_spec, validate_spec, SpecError};

pub const APPS_DIR: &str = "apps";
pub const INDEX_FILE: &str = "index.json";
pub const REQUESTS_FILE: &str = "requests.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Visibility {
    #[default]
    Public,
    Unlisted,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PublishMeta {
    #[serde(default)]
    pub author: String,
    #[serde(default)]
    pub visibility: Visibility,
}

/// Published application. The spec bytes live beside the index in
/// `apps/<id>.mowa.xml`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppRecord {
    pub id: String,
    pub name: String,
    pub author: String,
    pub uploaded_at: u64,
    pub visibility: Visibility,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestStatus {
    Open,
    Fulfilled,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RequestMeta {
    pub title: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub requester: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppRequest {
    pub id: String,
    pub title: String,
    pub description: String,
    pub requester: String,
    pub status: RequestStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fulfilled_by: Option<String>,
}

/// Content address of canonical spec bytes.
pub fn app_id(canonical: &[u8]) -> String {
    hex::encode(Sha256::digest(canonical))
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> PlatformError {
    PlatformError::Io { path: path.display().to_string(), detail: e.to_string() }
}

/// Directory store. Writers hold `lock` across read-modify-write cycles and
/// every file is replaced atomically.
#[derive(Debug)]
pub struct Store {
    dir: PathBuf,
    lock: Mutex<()>,
}

impl Store {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, PlatformError> {
        let dir = dir.into();
        let apps = dir.join(APPS_DIR);
        fs::create_dir_all(&apps).map_err(|e| io_err(&apps, e))?;
        Ok(Store { dir, lock: Mutex::new(()) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn read_json<T: DeserializeOwned + Default>(&self, name: &str) -> Result<T, PlatformError> {
        let path = self.dir.join(name);
        match fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| io_err(&path, e)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(T::default()),
            Err(e) => Err(io_err(&path, e)),
        }
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), PlatformError> {
        let path = self.dir.join(name);
        let mut bytes = serde_json::to_vec_pretty(value).expect("store records serialize");
        bytes.push(b'\n');
        write_atomic(&path, &bytes).map_err(|e| io_err(&path, e))
    }

    fn app_path(&self, id: &str) -> PathBuf {
        self.dir.join(APPS_DIR).join(format!("{id}.mowa.xml"))
    }

    fn guard(&self) -> std::sync::MutexGuard<'_, ()> {
        self.lock.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Validates, canonicalizes and stores a spec. Publishing the same
    /// application again returns the existing record untouched.
    pub fn publish(&self, bytes: &[u8], meta: &PublishMeta) -> Result<AppRecord, PlatformError> {
        let spec = parse_spec(bytes).map_err(PlatformError::Spec)?;
        let report = validate_spec(&spec);
        if !report.ok {
            return Err(PlatformError::Spec(SpecError::InvalidSpec(report)));
        }
        let canonical = serialize_spec(&spec).map_err(PlatformError::Spec)?;
        let id = app_id(&canonical);

        let _g = self.guard();
        let mut index: Vec<AppRecord> = self.read_json(INDEX_FILE)?;
        if let Some(existing) = index.iter().find(|r| r.id == id) {
            return Ok(existing.clone());
        }
        let path = self.app_path(&id);
        write_atomic(&path, &canonical).map_err(|e| io_err(&path, e))?;
        let record = AppRecord {
            id,
            name: spec.name.clone(),
            author: meta.author.clone(),
            uploaded_at: now_secs(),
            visibility: meta.visibility,
        };
        index.push(record.clone());
        self.write_json(INDEX_FILE, &index)?;
        Ok(record)
    }

    /// Public records in upload order.
    pub fn list_apps(&self) -> Result<Vec<AppRecord>, PlatformError> {
        let index: Vec<AppRecord> = self.read_json(INDEX_FILE)?;
        Ok(index.into_iter().filter(|r| r.visibility == Visibility::Public).collect())
    }

    pub fn app(&self, id: &str) -> Result<AppRecord, PlatformError> {
        let index: Vec<AppRecord> = self.read_json(INDEX_FILE)?;
        index.into_iter().find(|r| r.id == id).ok_or_else(|| PlatformError::AppNotFound(id.to_string()))
    }

    /// Canonical bytes of a published application.
    pub fn download(&self, id: &str) -> Result<Vec<u8>, PlatformError> {
        self.app(id)?;
        let path = self.app_path(id);
        fs::read(&path).map_err(|e| io_err(&path, e))
    }

    pub fn create_request(&self, meta: &RequestMeta) -> Result<AppRequest, PlatformError> {
        if meta.title.trim().is_empty() {
            return Err(PlatformError::TitleEmpty);
        }
        let request = AppRequest {
            id: uuid::Uuid::new_v4().to_string(),
            title: meta.title.clone(),
            description: meta.description.clone(),
            requester: meta.requester.clone(),
            status: RequestStatus::Open,
            fulfilled_by: None,
        };
        let _g = self.guard();
        let mut all: Vec<AppRequest> = self.read_json(REQUESTS_FILE)?;
        all.push(request.clone());
        self.write_json(REQUESTS_FILE, &all)?;
        Ok(request)
    }

    pub fn list_requests(&self) -> Result<Vec<AppRequest>, PlatformError> {
        self.read_json(REQUESTS_FILE)
    }

    pub fn fulfill_request(&self, request_id: &str, app_id: &str) -> Result<AppRequest, PlatformError> {
        let _g = self.guard();
        let mut all: Vec<AppRequest> = self.read_json(REQUESTS_FILE)?;
        let idx = all
            .iter()
            .position(|r| r.id == request_id)
            .ok_or_else(|| PlatformError::RequestNotFound(request_id.to_string()))?;
        if all[idx].status == RequestStatus::Fulfilled {
            return Err(PlatformError::AlreadyFulfilled(request_id.to_string()));
        }
        self.app(app_id)?;
        all[idx].status = RequestStatus::Fulfilled;
        all[idx].fulfilled_by = Some(app_id.to_string());
        self.write_json(REQUESTS_FILE, &all)?;
        Ok(all[idx].clone())
    }
}
