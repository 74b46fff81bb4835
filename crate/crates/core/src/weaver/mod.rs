//! The weaver: loads pages, fires context rules, applies layers, keeps the
//! tour state, and logs everything.

mod corpus;
mod tour;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use corpus::{CorpusError, PageCorpus, MANIFEST_FILE};
pub use tour::{tour_order, TourMode, TourState, TourStop};

use crate::augment::{apply_layer, BindingContext, LayerError};
use crate::extract::ExtractCache;
use crate::html::{serialize_html, Document};
use crate::i18n;
use crate::sensor::{step, ContextChange, Reading, Semantic, SensorState, SimEvent};
use crate::spec::{
    validate_spec, Layer, LayerTarget, MobileAppSpec, ValidationReport, POI_TARGET_TOKEN,
};
use crate::urls::{glob_match, normalize_url};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEntry {
    NavLoaded { t: u64, url: String },
    RuleFired { t: u64, sensor: String, layer: String, semantic: Semantic },
    LayerApplied { t: u64, layer: String, url: String, augmenters: usize, warnings: usize },
    Warning { t: u64, key: String, detail: String },
    Snapshot { t: u64, path: String },
}

/// Append-only session journal.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub entries: Vec<LogEntry>,
}

impl SessionLog {
    pub fn push(&mut self, e: LogEntry) {
        self.entries.push(e);
    }

    pub fn to_jsonl(&self) -> String {
        self.entries.iter().map(|e| serde_json::to_string(e).expect("entry serializes") + "\n").collect()
    }

    pub fn warnings(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().filter_map(|e| match e {
            LogEntry::Warning { key, detail, .. } => Some((key.as_str(), detail.as_str())),
            _ => None,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// The augmented page right after one layer application.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageSnapshot {
    pub t_ms: u64,
    pub layer: String,
    pub url: String,
    pub tour_mode: TourMode,
    pub html: String,
}

impl PageSnapshot {
    pub fn file_name(&self) -> String {
        format!("{}-{}.html", self.t_ms, self.layer)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WeaveError {
    #[error("spec does not validate: {}", .0.error_keys().join(", "))]
    InvalidSpec(ValidationReport),
}

impl WeaveError {
    pub fn key(&self) -> &'static str {
        match self {
            WeaveError::InvalidSpec(_) => "spec.invalid",
        }
    }
}

pub struct Session<'a> {
    spec: &'a MobileAppSpec,
    corpus: &'a PageCorpus,
    cache: &'a ExtractCache,
    current_url: Option<String>,
    current_doc: Option<Document>,
    sensor_state: SensorState,
    tour: TourState,
    log: SessionLog,
    snapshots: Vec<PageSnapshot>,
}

impl<'a> Session<'a> {
    pub fn new(spec: &'a MobileAppSpec, corpus: &'a PageCorpus, cache: &'a ExtractCache) -> Result<Self, WeaveError> {
        let report = validate_spec(spec);
        if !report.ok {
            return Err(WeaveError::InvalidSpec(report));
        }
        let tour = TourState::from_spec(spec).map_err(|_| WeaveError::InvalidSpec(report))?;
        Ok(Session {
            spec,
            corpus,
            cache,
            current_url: None,
            current_doc: None,
            sensor_state: SensorState::default(),
            tour,
            log: SessionLog::default(),
            snapshots: Vec::new(),
        })
    }

    pub fn current_url(&self) -> Option<&str> {
        self.current_url.as_deref()
    }

    pub fn current_doc(&self) -> Option<&Document> {
        self.current_doc.as_ref()
    }

    pub fn current_html(&self) -> Option<String> {
        self.current_doc.as_ref().map(serialize_html)
    }

    pub fn tour(&self) -> &TourState {
        &self.tour
    }

    pub fn sensor_state(&self) -> &SensorState {
        &self.sensor_state
    }

    pub fn log(&self) -> &SessionLog {
        &self.log
    }

    pub fn snapshots(&self) -> &[PageSnapshot] {
        &self.snapshots
    }

    pub fn into_parts(self) -> (SessionLog, Vec<PageSnapshot>, TourState) {
        (self.log, self.snapshots, self.tour)
    }

    fn warn(&mut self, t: u64, key: &str, args: &[(&str, &str)]) {
        let detail = i18n::message(&self.spec.locale, key, args);
        self.log.push(LogEntry::Warning { t, key: key.into(), detail });
    }

    fn load(&mut self, t: u64, url: &str) -> bool {
        let Some(doc) = self.corpus.page(url) else {
            self.warn(t, "nav.miss", &[("url", url)]);
            return false;
        };
        let key = normalize_url(url).expect("corpus hit implies absolute URL");
        self.current_doc = Some(Arc::unwrap_or_clone(doc));
        self.current_url = Some(key.clone());
        self.log.push(LogEntry::NavLoaded { t, url: key });
        true
    }

    /// Feeds one trace event.
    pub fn feed(&mut self, ev: &SimEvent) {
        if let Reading::Nav { url } = &ev.reading {
            self.handle_nav(ev.t_ms, url);
            return;
        }
        match step(&mut self.sensor_state, self.spec, ev) {
            Ok(Some(change)) => self.handle_context(&change),
            Ok(None) => {}
            Err(e) => self.warn(ev.t_ms, "sensor.unknown", &[("detail", &e.0)]),
        }
    }

    fn is_value_of_interest(&self, sem: &Semantic) -> bool {
        match sem {
            Semantic::AtPoi(p) => self.spec.poi(p).is_some(),
            Semantic::InBand(b) => self.spec.band(b).is_some(),
            Semantic::OrientationMode(_) => true,
            Semantic::LeftPois | Semantic::OutOfBands => false,
        }
    }

    /// Navigates to `url` and applies every matching pattern layer that is
    /// unconditioned or whose sensor currently holds a value of interest.
    pub fn handle_nav(&mut self, t: u64, url: &str) {
        if !self.load(t, url) {
            return;
        }
        let current = self.current_url.clone().expect("just loaded");
        let spec = self.spec;
        for layer in &spec.layers {
            let LayerTarget::Pattern(glob) = &layer.target else { continue };
            if !glob_match(glob, &current) {
                continue;
            }
            let mut rules = spec.rules.iter().filter(|r| r.layer_id == layer.id).peekable();
            if rules.peek().is_none() {
                self.apply(t, layer, None);
                continue;
            }
            let active = rules
                .filter_map(|r| self.sensor_state.last.get(&r.sensor_id))
                .find(|sem| self.is_value_of_interest(sem))
                .cloned();
            if let Some(sem) = active {
                self.apply(t, layer, Some(&sem));
            }
        }
    }

    /// Fires the rules observing the change's sensor, in spec order.
    pub fn handle_context(&mut self, change: &ContextChange) {
        let t = change.t_ms;
        if let Semantic::AtPoi(p) = &change.semantic {
            self.tour.sense(p);
        }
        if !self.is_value_of_interest(&change.semantic) {
            return;
        }
        let spec = self.spec;
        for rule in spec.rules.iter().filter(|r| r.sensor_id == change.sensor_id) {
            let Some(layer) = spec.layer(&rule.layer_id) else { continue };
            self.log.push(LogEntry::RuleFired {
                t,
                sensor: rule.sensor_id.clone(),
                layer: layer.id.clone(),
                semantic: change.semantic.clone(),
            });
            match &layer.target {
                LayerTarget::Concrete(u) => {
                    let url = if u == POI_TARGET_TOKEN {
                        match &change.semantic {
                            Semantic::AtPoi(p) => spec.poi(p).map(|p| p.target_url.clone()),
                            _ => None,
                        }
                    } else {
                        Some(u.clone())
                    };
                    let Some(url) = url else {
                        self.warn(t, "nav.miss", &[("url", u)]);
                        continue;
                    };
                    if self.load(t, &url) {
                        self.apply(t, layer, Some(&change.semantic));
                    }
                }
                LayerTarget::Pattern(glob) => {
                    if self.current_url.as_deref().is_some_and(|c| glob_match(glob, c)) {
                        self.apply(t, layer, Some(&change.semantic));
                    }
                }
            }
        }
    }

    fn apply(&mut self, t: u64, layer: &Layer, sem: Option<&Semantic>) {
        let Some(mut doc) = self.current_doc.take() else { return };
        let spec = self.spec;
        let mut ctx = BindingContext::new(spec, self.cache);
        ctx.tour = Some(&self.tour);
        let orientation;
        match sem {
            Some(Semantic::AtPoi(p)) => ctx.poi = Some(p),
            Some(Semantic::InBand(b)) => {
                ctx.band = Some(b);
                ctx.value_label = spec.band(b).map(|b| b.label.as_str());
            }
            Some(Semantic::OrientationMode(o)) => {
                orientation = o.as_str();
                ctx.value_label = Some(orientation);
            }
            _ => {}
        }
        let result = apply_layer(&mut doc, layer, &ctx);
        let url = self.current_url.clone().unwrap_or_default();
        match result {
            Ok(outcome) => {
                for miss in &outcome.misses {
                    let index = miss.index.to_string();
                    self.warn(
                        t,
                        "layer.anchor-miss",
                        &[("index", &index), ("layer", &layer.id), ("anchor", &miss.anchor)],
                    );
                }
                self.log.push(LogEntry::LayerApplied {
                    t,
                    layer: layer.id.clone(),
                    url: url.clone(),
                    augmenters: outcome.applied,
                    warnings: outcome.misses.len(),
                });
                let snap = PageSnapshot {
                    t_ms: t,
                    layer: layer.id.clone(),
                    url,
                    tour_mode: self.tour.mode,
                    html: serialize_html(&doc),
                };
                self.log.push(LogEntry::Snapshot { t, path: snap.file_name() });
                self.snapshots.push(snap);
            }
            Err(e) => {
                let key = match e {
                    LayerError::Binding { .. } | LayerError::Render { .. } => "layer.binding-failed",
                    LayerError::Insert { .. } => "layer.insert-failed",
                };
                self.warn(t, key, &[("layer", &layer.id), ("detail", &e.to_string())]);
            }
        }
        self.current_doc = Some(doc);
    }
}

/// Result of replaying a whole trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRun {
    pub log: SessionLog,
    pub snapshots: Vec<PageSnapshot>,
    pub tour: TourState,
}

/// Replays `trace` in a fresh session. Deterministic.
pub fn run_trace(
    spec: &MobileAppSpec,
    corpus: &PageCorpus,
    cache: &ExtractCache,
    trace: &[SimEvent],
) -> Result<TraceRun, WeaveError> {
    let mut session = Session::new(spec, corpus, cache)?;
    for ev in trace {
        session.feed(ev);
    }
    let (log, snapshots, tour) = session.into_parts();
    Ok(TraceRun { log, snapshots, tour })
}
