//! Application repository, app requests and staged authoring sessions.
//! Framework-free; the HTTP layer maps [`PlatformError`] to status codes.

mod authoring;
mod store;

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

pub use authoring::{
    all_pairs, export_session, preview, submit_stage, AuthoringSession, PreviewRequest,
    PreviewResponse, SessionRegistry, SessionView, StageOutcome, STAGES,
};
pub use store::{
    app_id, AppRecord, AppRequest, PublishMeta, RequestMeta, RequestStatus, Store, Visibility,
    APPS_DIR, INDEX_FILE, REQUESTS_FILE,
};

use crate::extract::ExtractCache;
use crate::i18n;
use crate::spec::{parse_spec, SpecError, ValidationReport};
use crate::weaver::PageCorpus;

pub(crate) fn now_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlatformError {
    #[error(transparent)]
    Spec(SpecError),
    #[error("unknown application {0}")]
    AppNotFound(String),
    #[error("unknown request {0}")]
    RequestNotFound(String),
    #[error("request {0} already fulfilled")]
    AlreadyFulfilled(String),
    #[error("request title is empty")]
    TitleEmpty,
    #[error("unknown session {0}")]
    SessionNotFound(String),
    #[error("no stage {0}")]
    StageUnknown(u32),
    #[error("stage {stage} needs stages {missing:?}")]
    StageOrder { stage: u8, missing: Vec<u8> },
    #[error("session {0} is busy")]
    Busy(String),
    #[error("stages {missing:?} incomplete")]
    Incomplete { missing: Vec<u8> },
    #[error("stage {stage} payload: {detail}")]
    PayloadInvalid { stage: u8, detail: String },
    #[error("nothing to preview yet")]
    NotPreviewable { missing: Vec<u8> },
    #[error("page {0} not in corpus")]
    PageNotInCorpus(String),
    #[error("{path}: {detail}")]
    Io { path: String, detail: String },
}

fn join(stages: &[u8]) -> String {
    stages.iter().map(u8::to_string).collect::<Vec<_>>().join(", ")
}

impl PlatformError {
    pub fn key(&self) -> &'static str {
        match self {
            PlatformError::Spec(e) => e.key(),
            PlatformError::AppNotFound(_) => "app.not-found",
            PlatformError::RequestNotFound(_) => "request.not-found",
            PlatformError::AlreadyFulfilled(_) => "request.already-fulfilled",
            PlatformError::TitleEmpty => "request.title-empty",
            PlatformError::SessionNotFound(_) => "session.not-found",
            PlatformError::StageUnknown(_) => "session.stage-unknown",
            PlatformError::StageOrder { .. } => "session.stage-order",
            PlatformError::Busy(_) => "session.busy",
            PlatformError::Incomplete { .. } => "session.incomplete",
            PlatformError::PayloadInvalid { .. } => "session.payload-invalid",
            PlatformError::NotPreviewable { .. } => "preview.not-previewable",
            PlatformError::PageNotInCorpus(_) => "preview.page-missing",
            PlatformError::Io { .. } => "cli.io",
        }
    }

    pub fn status(&self) -> u16 {
        match self {
            PlatformError::Spec(_) | PlatformError::TitleEmpty | PlatformError::PayloadInvalid { .. } => 422,
            PlatformError::AppNotFound(_)
            | PlatformError::RequestNotFound(_)
            | PlatformError::SessionNotFound(_)
            | PlatformError::StageUnknown(_)
            | PlatformError::PageNotInCorpus(_) => 404,
            PlatformError::AlreadyFulfilled(_)
            | PlatformError::StageOrder { .. }
            | PlatformError::Busy(_)
            | PlatformError::Incomplete { .. } => 409,
            PlatformError::NotPreviewable { .. } => 412,
            PlatformError::Io { .. } => 500,
        }
    }

    pub fn args(&self) -> Vec<(&'static str, String)> {
        match self {
            PlatformError::Spec(e) => e.args(),
            PlatformError::AppNotFound(id)
            | PlatformError::RequestNotFound(id)
            | PlatformError::AlreadyFulfilled(id)
            | PlatformError::SessionNotFound(id)
            | PlatformError::Busy(id) => vec![("id", id.clone())],
            PlatformError::TitleEmpty => vec![],
            PlatformError::StageUnknown(n) => vec![("stage", n.to_string())],
            PlatformError::StageOrder { stage, missing } => {
                vec![("stage", stage.to_string()), ("missing", join(missing))]
            }
            PlatformError::Incomplete { missing } | PlatformError::NotPreviewable { missing } => {
                vec![("stages", join(missing))]
            }
            PlatformError::PayloadInvalid { stage, detail } => {
                vec![("stage", stage.to_string()), ("detail", detail.clone())]
            }
            PlatformError::PageNotInCorpus(url) => vec![("url", url.clone())],
            PlatformError::Io { path, detail } => vec![("path", path.clone()), ("detail", detail.clone())],
        }
    }

    pub fn report(&self) -> Option<&ValidationReport> {
        match self {
            PlatformError::Spec(SpecError::InvalidSpec(r)) => Some(r),
            _ => None,
        }
    }

    pub fn stages(&self) -> Option<&[u8]> {
        match self {
            PlatformError::StageOrder { missing, .. }
            | PlatformError::Incomplete { missing }
            | PlatformError::NotPreviewable { missing } => Some(missing),
            _ => None,
        }
    }

    pub fn body(&self, locale: &str) -> ErrorBody {
        let args = self.args();
        let borrowed: Vec<(&str, &str)> = args.iter().map(|(k, v)| (*k, v.as_str())).collect();
        ErrorBody {
            error: self.key().to_string(),
            message: i18n::message(locale, self.key(), &borrowed),
            args: args.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            report: self.report().cloned(),
            stages: self.stages().map(<[u8]>::to_vec),
        }
    }
}

/// JSON body of every failed request.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    #[serde(default)]
    pub args: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ValidationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stages: Option<Vec<u8>>,
}

/// The repository plus authoring sessions over one offline corpus.
pub struct Platform {
    pub store: Store,
    pub corpus: PageCorpus,
    pub cache: ExtractCache,
    pub sessions: SessionRegistry,
    pub locale: String,
}

impl Platform {
    pub fn new(store: Store, corpus: PageCorpus, cache: ExtractCache, locale: &str) -> Self {
        Platform { store, corpus, cache, sessions: SessionRegistry::default(), locale: locale.to_string() }
    }

    /// Opens the store; the corpus and extraction cache are optional.
    pub fn open(store: &Path, corpus: Option<&Path>, cache: Option<&Path>, locale: &str) -> Result<Self, PlatformError> {
        let io = |p: &Path, e: &dyn std::fmt::Display| PlatformError::Io { path: p.display().to_string(), detail: e.to_string() };
        let corpus = match corpus {
            Some(dir) => PageCorpus::load(dir).map_err(|e| io(dir, &e))?,
            None => PageCorpus::default(),
        };
        let cache = match cache {
            Some(dir) => ExtractCache::open(dir, crate::extract::CachePolicy::CacheOnly).map_err(|e| io(dir, &e))?,
            None => ExtractCache::empty(),
        };
        Ok(Platform::new(Store::open(store)?, corpus, cache, locale))
    }

    /// URLs an extraction may legitimately point at.
    pub fn known_urls(&self) -> HashSet<String> {
        let mut urls = self.corpus.urls();
        urls.extend(self.cache.urls());
        urls
    }

    pub fn create_session(&self, from_app: Option<&str>) -> Result<SessionView, PlatformError> {
        let id = uuid::Uuid::new_v4().to_string();
        let session = match from_app {
            None => AuthoringSession::new(id),
            Some(app) => {
                let bytes = self.store.download(app)?;
                AuthoringSession::imported(id, parse_spec(&bytes).map_err(PlatformError::Spec)?)
            }
        };
        Ok(self.sessions.insert(session))
    }

    pub fn session(&self, id: &str) -> Result<SessionView, PlatformError> {
        let handle = self.sessions.handle(id)?;
        let guard = authoring::try_lock(id, &handle)?;
        Ok(SessionView::from(&*guard))
    }

    pub fn submit_stage(&self, id: &str, stage: u32, payload: &Value) -> Result<StageOutcome, PlatformError> {
        let handle = self.sessions.handle(id)?;
        let mut guard = authoring::try_lock(id, &handle)?;
        let report = submit_stage(&mut guard, stage, payload, &self.known_urls())?;
        Ok(StageOutcome { report, session: SessionView::from(&*guard) })
    }

    pub fn preview(&self, id: &str, request: &PreviewRequest) -> Result<PreviewResponse, PlatformError> {
        let handle = self.sessions.handle(id)?;
        let guard = authoring::try_lock(id, &handle)?;
        preview(&guard, &self.corpus, &self.cache, request)
    }

    pub fn export(&self, id: &str) -> Result<Vec<u8>, PlatformError> {
        let handle = self.sessions.handle(id)?;
        let guard = authoring::try_lock(id, &handle)?;
        export_session(&guard)
    }
}
