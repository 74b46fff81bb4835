//! Headless Mobile Web Augmentation engine.
//!
//! An application is a declarative [`spec::MobileAppSpec`]: sensors observing
//! context types, a dimensional space holding points of interest or value
//! bands, augmentation layers made of XPath-anchored augmenters, and context
//! rules wiring sensors to layers. The [`weaver`] replays simulated sensor
//! readings against an offline page corpus and produces augmented pages.

pub mod augment;
pub mod eval;
pub mod extract;
pub mod html;
pub mod i18n;
pub mod platform;
pub mod sensor;
pub mod spec;
pub mod urls;
pub mod weaver;

pub use augment::{apply_layer, catalog, render, suggest, AugmenterKind, BindingContext};
pub use extract::{extract, CachePolicy, ExtractCache, ExtractError};
pub use html::{parse_html, serialize_html, Document, NodeId, XPathExpr};
pub use sensor::{parse_trace, ContextChange, Semantic, SensorState, SimEvent};
pub use spec::{
    parse_spec, serialize_spec, validate_spec, Binding, ContextTypeKind, MobileAppSpec,
    ValidationReport,
};
pub use weaver::{run_trace, PageCorpus, Session, SessionLog, TourMode, TourState};
