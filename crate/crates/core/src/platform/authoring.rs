use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::{Arc, Mutex, MutexGuard, TryLockError};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{now_secs, PlatformError};
use crate::extract::ExtractCache;
use crate::sensor::SimEvent;
use crate::spec::{
    parse_spec, serialize_spec, validate_spec_against, write_canonical, ContextRule, ContextTypeKind,
    DimensionalSpace, Layer, MobileAppSpec, SensorDecl, Severity, ValidationIssue, ValidationReport,
};
use crate::weaver::{PageCorpus, Session};

pub const STAGES: u8 = 6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuthoringSession {
    pub id: String,
    /// First incomplete stage, or 6 once everything is complete.
    pub stage: u8,
    pub complete: [bool; STAGES as usize],
    pub spec: MobileAppSpec,
    pub created_at: u64,
}

impl AuthoringSession {
    pub fn new(id: String) -> Self {
        AuthoringSession {
            id,
            stage: 1,
            complete: [false; STAGES as usize],
            spec: MobileAppSpec::named(""),
            created_at: now_secs(),
        }
    }

    /// Session seeded from an existing application, every stage complete.
    pub fn imported(id: String, spec: MobileAppSpec) -> Self {
        let mut s = AuthoringSession::new(id);
        s.spec = spec;
        s.complete = [true; STAGES as usize];
        s.stage = STAGES;
        s
    }

    pub fn is_complete(&self, stage: u8) -> bool {
        (1..=STAGES).contains(&stage) && self.complete[stage as usize - 1]
    }

    /// Incomplete stages among `1..=upto`.
    pub fn missing(&self, upto: u8) -> Vec<u8> {
        (1..=upto.min(STAGES)).filter(|&s| !self.is_complete(s)).collect()
    }

    /// The partial spec in canonical XML form, valid or not.
    pub fn spec_xml(&self) -> String {
        write_canonical(&self.spec)
    }

    fn refresh_stage(&mut self) {
        self.stage = self.missing(STAGES).first().copied().unwrap_or(STAGES);
    }
}

/// JSON view served to clients.
#[derive(Debug, Clone, Serialize)]
pub struct SessionView {
    #[serde(flatten)]
    pub session: AuthoringSession,
    pub xml: String,
}

impl From<&AuthoringSession> for SessionView {
    fn from(s: &AuthoringSession) -> Self {
        SessionView { session: s.clone(), xml: s.spec_xml() }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AppStage {
    name: String,
    #[serde(default)]
    namespace: Option<String>,
    #[serde(default)]
    filename: Option<String>,
    #[serde(default)]
    locale: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContextStage {
    context_types: BTreeSet<ContextTypeKind>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SensorStage {
    sensors: Vec<SensorDecl>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpaceStage {
    space: DimensionalSpace,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerStage {
    layers: Vec<Layer>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleStage {
    #[serde(default)]
    rules: Vec<ContextRule>,
}

fn decode<T: serde::de::DeserializeOwned>(stage: u8, payload: &Value) -> Result<T, PlatformError> {
    T::deserialize(payload).map_err(|e| PlatformError::PayloadInvalid { stage, detail: e.to_string() })
}

/// Every layer observes every sensor.
pub fn all_pairs(spec: &MobileAppSpec) -> Vec<ContextRule> {
    spec.sensors
        .iter()
        .flat_map(|s| spec.layers.iter().map(move |l| ContextRule::new(&s.id, &l.id)))
        .collect()
}

/// Applies a stage payload to a copy of `spec`.
fn merge(stage: u8, spec: &MobileAppSpec, payload: &Value) -> Result<MobileAppSpec, PlatformError> {
    let mut next = spec.clone();
    match stage {
        1 => {
            let p: AppStage = decode(stage, payload)?;
            let defaults = MobileAppSpec::named(&p.name);
            next.name = p.name;
            next.namespace = p.namespace.unwrap_or(defaults.namespace);
            next.filename = p.filename.unwrap_or(defaults.filename);
            next.locale = p.locale.unwrap_or(defaults.locale);
        }
        2 => next.context_types = decode::<ContextStage>(stage, payload)?.context_types,
        3 => {
            let mut sensors = decode::<SensorStage>(stage, payload)?.sensors;
            for s in &mut sensors {
                if s.kind == crate::spec::SensorKind::Gps && s.radius_m.is_none() {
                    s.radius_m = Some(s.radius());
                }
            }
            next.sensors = sensors;
        }
        4 => next.space = decode::<SpaceStage>(stage, payload)?.space,
        5 => next.layers = decode::<LayerStage>(stage, payload)?.layers,
        6 => {
            let rules = decode::<RuleStage>(stage, payload)?.rules;
            next.rules = if rules.is_empty() && next.sensors.len() == 1 { all_pairs(&next) } else { rules };
        }
        _ => return Err(PlatformError::StageUnknown(stage as u32)),
    }
    Ok(next)
}

/// Completeness checks that only make sense once a stage is submitted.
fn builder_issues(stage: u8, spec: &MobileAppSpec) -> Vec<ValidationIssue> {
    let (empty, path, key) = match stage {
        2 => (spec.context_types.is_empty(), "context-types", "context-type.none"),
        3 => (spec.sensors.is_empty(), "sensors", "sensor.none"),
        5 => (spec.layers.is_empty(), "layers", "layer.none"),
        6 => (spec.rules.is_empty(), "rules", "rule.none"),
        _ => (false, "", ""),
    };
    if !empty {
        return Vec::new();
    }
    vec![ValidationIssue {
        severity: Severity::Error,
        path: path.to_string(),
        key: key.to_string(),
        message: crate::i18n::message(&spec.locale, key, &[]),
        args: Default::default(),
    }]
}

#[derive(Debug, Clone, Serialize)]
pub struct StageOutcome {
    pub report: ValidationReport,
    pub session: SessionView,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreviewRequest {
    pub page_url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reading: Option<SimEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PreviewResponse {
    pub url: String,
    pub html: String,
    pub warnings: Vec<String>,
}

/// In-memory authoring sessions. A session that is already being mutated
/// reports busy instead of queueing.
#[derive(Debug, Default)]
pub struct SessionRegistry {
    sessions: Mutex<HashMap<String, Arc<Mutex<AuthoringSession>>>>,
}

impl SessionRegistry {
    pub fn insert(&self, session: AuthoringSession) -> SessionView {
        let view = SessionView::from(&session);
        let mut map = self.sessions.lock().unwrap_or_else(|p| p.into_inner());
        map.insert(session.id.clone(), Arc::new(Mutex::new(session)));
        view
    }

    pub fn handle(&self, id: &str) -> Result<Arc<Mutex<AuthoringSession>>, PlatformError> {
        let map = self.sessions.lock().unwrap_or_else(|p| p.into_inner());
        map.get(id).cloned().ok_or_else(|| PlatformError::SessionNotFound(id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().unwrap_or_else(|p| p.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub(crate) fn try_lock<'a>(
    id: &str,
    handle: &'a Mutex<AuthoringSession>,
) -> Result<MutexGuard<'a, AuthoringSession>, PlatformError> {
    match handle.try_lock() {
        Ok(g) => Ok(g),
        Err(TryLockError::Poisoned(p)) => Ok(p.into_inner()),
        Err(TryLockError::WouldBlock) => Err(PlatformError::Busy(id.to_string())),
    }
}

/// Gates, merges and validates one stage. Submitting stage n reopens every
/// later stage, since it may have been completed against older data.
pub fn submit_stage(
    session: &mut AuthoringSession,
    stage: u32,
    payload: &Value,
    known_urls: &HashSet<String>,
) -> Result<ValidationReport, PlatformError> {
    if !(1..=STAGES as u32).contains(&stage) {
        return Err(PlatformError::StageUnknown(stage));
    }
    let stage = stage as u8;
    let missing = session.missing(stage - 1);
    if !missing.is_empty() {
        return Err(PlatformError::StageOrder { stage, missing });
    }
    let next = merge(stage, &session.spec, payload)?;
    if let Err(e) = parse_spec(write_canonical(&next).as_bytes()) {
        return Err(PlatformError::PayloadInvalid { stage, detail: e.to_string() });
    }
    let report = validate_spec_against(&next, known_urls)
        .for_stage(stage)
        .merge(ValidationReport::from_issues(builder_issues(stage, &next)));

    session.spec = next;
    session.complete[stage as usize - 1] = report.ok;
    for later in stage + 1..=STAGES {
        session.complete[later as usize - 1] = false;
    }
    session.refresh_stage();
    Ok(report)
}

/// Canonical bytes of a finished session.
pub fn export_session(session: &AuthoringSession) -> Result<Vec<u8>, PlatformError> {
    let missing = session.missing(STAGES);
    if !missing.is_empty() {
        return Err(PlatformError::Incomplete { missing });
    }
    serialize_spec(&session.spec).map_err(PlatformError::Spec)
}

/// Renders `page_url` with the partial spec after feeding `reading`. Until
/// rules exist every layer is treated as observing every sensor.
pub fn preview(
    session: &AuthoringSession,
    corpus: &PageCorpus,
    cache: &ExtractCache,
    request: &PreviewRequest,
) -> Result<PreviewResponse, PlatformError> {
    let not_previewable = || PlatformError::NotPreviewable { missing: session.missing(5) };
    if session.spec.layers.is_empty() {
        return Err(not_previewable());
    }
    if !corpus.contains(&request.page_url) {
        return Err(PlatformError::PageNotInCorpus(request.page_url.clone()));
    }
    let mut spec = session.spec.clone();
    if !session.is_complete(6) {
        spec.rules = all_pairs(&spec);
    }
    let mut weave = Session::new(&spec, corpus, cache).map_err(|_| not_previewable())?;
    weave.handle_nav(0, &request.page_url);
    if let Some(ev) = &request.reading {
        weave.feed(ev);
    }
    let url = weave.current_url().unwrap_or(&request.page_url).to_string();
    let html = weave.current_html().unwrap_or_default();
    let warnings = weave.log().warnings().map(|(k, _)| k.to_string()).collect();
    Ok(PreviewResponse { url, html, warnings })
}
