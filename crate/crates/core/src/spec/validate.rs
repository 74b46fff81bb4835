use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::model::*;
use crate::augment::{self, lookup_kind};
use crate::i18n;
use crate::urls::{is_absolute_url, normalize_url};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub severity: Severity,
    /// Slash-separated component path, e.g. `space/pois/p3`.
    pub path: String,
    pub key: String,
    pub message: String,
    #[serde(default)]
    pub args: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn from_issues(issues: Vec<ValidationIssue>) -> Self {
        let ok = issues.iter().all(|i| i.severity != Severity::Error);
        ValidationReport { ok, issues }
    }

    pub fn errors(&self) -> impl Iterator<Item = &ValidationIssue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &ValidationIssue> {
        self.issues.iter().filter(|i| i.severity == Severity::Warning)
    }

    pub fn error_keys(&self) -> Vec<&str> {
        self.errors().map(|i| i.key.as_str()).collect()
    }

    pub fn has_key(&self, key: &str) -> bool {
        self.issues.iter().any(|i| i.key == key)
    }

    /// Issues that belong to authoring stage `stage`.
    pub fn for_stage(&self, stage: u8) -> ValidationReport {
        ValidationReport::from_issues(
            self.issues.iter().filter(|i| stage_of_path(&i.path) == stage).cloned().collect(),
        )
    }

    pub fn merge(mut self, other: ValidationReport) -> Self {
        self.issues.extend(other.issues);
        ValidationReport::from_issues(self.issues)
    }
}

/// Authoring stage owning a component path.
pub fn stage_of_path(path: &str) -> u8 {
    match path.split('/').next().unwrap_or_default() {
        "context-types" => 2,
        "sensors" => 3,
        "space" => 4,
        "layers" => 5,
        "rules" => 6,
        _ => 1,
    }
}

struct Checker<'a> {
    locale: &'a str,
    issues: Vec<ValidationIssue>,
}

impl Checker<'_> {
    fn push(&mut self, severity: Severity, path: String, key: &str, args: &[(&str, String)]) {
        let refs: Vec<(&str, &str)> = args.iter().map(|(k, v)| (*k, v.as_str())).collect();
        self.issues.push(ValidationIssue {
            severity,
            path,
            key: key.to_string(),
            message: i18n::message(self.locale, key, &refs),
            args: args.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        });
    }

    fn error(&mut self, path: impl Into<String>, key: &str, args: &[(&str, String)]) {
        self.push(Severity::Error, path.into(), key, args);
    }

    fn warn(&mut self, path: impl Into<String>, key: &str, args: &[(&str, String)]) {
        self.push(Severity::Warning, path.into(), key, args);
    }
}

/// Checks every model invariant. Pure and total.
pub fn validate_spec(spec: &MobileAppSpec) -> ValidationReport {
    run(spec, None)
}

/// Like [`validate_spec`], additionally warning about extraction URLs that
/// no known page snapshot covers.
pub fn validate_spec_against(spec: &MobileAppSpec, known_urls: &HashSet<String>) -> ValidationReport {
    run(spec, Some(known_urls))
}

fn run(spec: &MobileAppSpec, known: Option<&HashSet<String>>) -> ValidationReport {
    let mut c = Checker { locale: &spec.locale, issues: Vec::new() };
    check_app(&mut c, spec);
    check_sensors(&mut c, spec);
    check_space(&mut c, spec, known);
    check_layers(&mut c, spec, known);
    check_rules(&mut c, spec);
    ValidationReport::from_issues(c.issues)
}

fn is_reverse_domain(ns: &str) -> bool {
    let parts: Vec<&str> = ns.split('.').collect();
    parts.len() >= 2
        && parts.iter().all(|p| {
            let mut chars = p.chars();
            chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        })
}

fn is_language_tag(tag: &str) -> bool {
    let mut parts = tag.split('-');
    let primary = parts.next().unwrap_or_default();
    (2..=3).contains(&primary.len())
        && primary.chars().all(|c| c.is_ascii_alphabetic())
        && parts.all(|p| (2..=8).contains(&p.len()) && p.chars().all(|c| c.is_ascii_alphanumeric()))
}

fn check_app(c: &mut Checker<'_>, spec: &MobileAppSpec) {
    if spec.name.trim().is_empty() {
        c.error("app/name", "app.name-empty", &[]);
    }
    if !is_reverse_domain(&spec.namespace) {
        c.error("app/namespace", "app.namespace-invalid", &[("value", spec.namespace.clone())]);
    }
    if spec.filename.trim().is_empty() {
        c.error("app/filename", "app.filename-empty", &[]);
    }
    if spec.version != 1 {
        c.error("app/version", "app.version-unsupported", &[("value", spec.version.to_string())]);
    }
    if !is_language_tag(&spec.locale) {
        c.error("app/locale", "app.locale-invalid", &[("value", spec.locale.clone())]);
    }
}

fn check_sensors(c: &mut Checker<'_>, spec: &MobileAppSpec) {
    let mut seen = HashSet::new();
    for s in &spec.sensors {
        let path = format!("sensors/{}", s.id);
        if !seen.insert(s.id.as_str()) {
            c.error(&path, "sensor.duplicate-id", &[("id", s.id.clone())]);
        }
        let expected = s.kind.context_type();
        if s.context_type != expected {
            c.error(
                &path,
                "sensor.kind-mismatch",
                &[
                    ("kind", s.kind.to_string()),
                    ("expected", expected.to_string()),
                    ("found", s.context_type.to_string()),
                ],
            );
        } else if !spec.context_types.contains(&s.context_type) {
            c.error(
                &path,
                "sensor.context-type-unselected",
                &[("id", s.id.clone()), ("context", s.context_type.to_string())],
            );
        }
        match s.radius_m {
            Some(_) if s.kind != SensorKind::Gps => {
                c.error(&path, "sensor.radius-not-gps", &[("id", s.id.clone())]);
            }
            Some(r) if !(r.is_finite() && r > 0.0) => {
                c.error(&path, "sensor.radius-invalid", &[("id", s.id.clone())]);
            }
            _ => {}
        }
    }
}

fn positive(v: Option<f64>) -> bool {
    v.is_some_and(|v| v.is_finite() && v > 0.0)
}

fn check_space(c: &mut Checker<'_>, spec: &MobileAppSpec, known: Option<&HashSet<String>>) {
    let space = &spec.space;
    let kind = space.kind.to_string();
    if space.kind.is_location() {
        if !space.bands.is_empty() {
            c.error("space", "space.kind-mismatch", &[("kind", kind.clone()), ("what", "bands".into())]);
        }
    } else if !space.pois.is_empty() || !space.links.is_empty() {
        c.error(
            "space",
            "space.kind-mismatch",
            &[("kind", kind.clone()), ("what", "points of interest".into())],
        );
    }
    let sized = positive(space.width) && positive(space.height);
    let any_size = space.width.is_some() || space.height.is_some();
    if (space.kind == SpaceKind::Floorplan && !sized) || (any_size && !sized) {
        c.error("space", "space.size-invalid", &[]);
    }
    if space.kind == SpaceKind::Floorplan && space.image_url.as_deref().is_none_or(|u| u.trim().is_empty()) {
        c.warn("space", "space.image-missing", &[]);
    }
    check_pois(c, spec, known);
    check_links(c, spec);
    check_bands(c, spec);
}

fn check_pois(c: &mut Checker<'_>, spec: &MobileAppSpec, known: Option<&HashSet<String>>) {
    let space = &spec.space;
    let mut ids = HashSet::new();
    let mut orders: HashMap<u32, usize> = HashMap::new();
    let mut codes: HashMap<&str, usize> = HashMap::new();
    for p in &space.pois {
        let path = format!("space/pois/{}", p.id);
        let id = || ("id", p.id.clone());
        if !ids.insert(p.id.as_str()) {
            c.error(&path, "poi.duplicate-id", &[id()]);
        }
        if p.name.trim().is_empty() {
            c.error(&path, "poi.name-empty", &[id()]);
        }
        if !p.position.is_finite() {
            c.error(&path, "poi.non-finite", &[id()]);
        } else if space.kind == SpaceKind::Floorplan {
            if let (Some(w), Some(h)) = (space.width, space.height) {
                let (x, y) = (p.position.x, p.position.y);
                if !(0.0..=w).contains(&x) || !(0.0..=h).contains(&y) {
                    c.error(&path, "poi.out-of-bounds", &[id()]);
                }
            }
        }
        if !is_absolute_url(&p.target_url) {
            c.error(&path, "poi.url-invalid", &[id(), ("value", p.target_url.clone())]);
        }
        match p.order {
            Some(0) => c.error(&path, "poi.order-invalid", &[id()]),
            Some(o) => {
                *orders.entry(o).or_default() += 1;
                if orders[&o] == 2 {
                    c.error(&path, "poi.duplicate-order", &[("order", o.to_string())]);
                }
            }
            None if !space.links.is_empty() => c.warn(&path, "poi.order-missing", &[id()]),
            None => {}
        }
        if let Some(code) = &p.code {
            *codes.entry(code.as_str()).or_default() += 1;
            if codes[code.as_str()] == 2 {
                c.error(&path, "poi.duplicate-code", &[("code", code.clone())]);
            }
        }
        for (name, src) in &p.props {
            if let PropertySource::Extract(e) = src {
                let ppath = format!("{path}/props/{name}");
                match normalize_url(&e.url) {
                    None => c.error(&ppath, "prop.url-invalid", &[("name", name.clone())]),
                    Some(u) => {
                        if known.is_some_and(|k| !k.contains(&u)) {
                            c.warn(&ppath, "prop.unknown-source", &[("url", e.url.clone())]);
                        }
                    }
                }
            }
        }
    }
}

fn check_links(c: &mut Checker<'_>, spec: &MobileAppSpec) {
    let links = &spec.space.links;
    let mut seen = HashSet::new();
    let mut out: HashMap<&str, &str> = HashMap::new();
    let mut inbound: HashMap<&str, usize> = HashMap::new();
    let mut shape_ok = true;
    for (i, l) in links.iter().enumerate() {
        let path = format!("space/links/{}", i + 1);
        let ends = || [("from", l.from.clone()), ("to", l.to.clone())];
        if spec.poi(&l.from).is_none() || spec.poi(&l.to).is_none() {
            c.error(&path, "link.unknown-poi", &ends());
            shape_ok = false;
            continue;
        }
        if l.from == l.to {
            c.error(&path, "link.self", &[("id", l.from.clone())]);
            shape_ok = false;
            continue;
        }
        if !seen.insert((l.from.as_str(), l.to.as_str())) {
            c.error(&path, "link.duplicate", &ends());
            shape_ok = false;
            continue;
        }
        if out.insert(&l.from, &l.to).is_some() {
            shape_ok = false;
        }
        *inbound.entry(&l.to).or_default() += 1;
    }
    if !shape_ok {
        if !c.issues.iter().any(|i| i.key.starts_with("link.")) {
            c.error("space/links", "links.not-a-chain", &[]);
        }
        return;
    }
    if inbound.values().any(|n| *n > 1) {
        c.error("space/links", "links.not-a-chain", &[]);
        return;
    }
    // Each node now has at most one successor and one predecessor, so the
    // graph is a union of simple paths and cycles.
    let mut on_cycle: BTreeSet<&str> = BTreeSet::new();
    for start in out.keys() {
        let mut cur = *start;
        let mut steps = 0;
        while let Some(next) = out.get(cur) {
            cur = next;
            steps += 1;
            if cur == *start {
                on_cycle.insert(start);
                break;
            }
            if steps > out.len() {
                break;
            }
        }
    }
    if let Some(first) = on_cycle.first() {
        c.error("space/links", "link.cycle", &[("id", first.to_string())]);
        return;
    }
    let roots = out.keys().filter(|n| !inbound.contains_key(*n)).count();
    if roots > 1 {
        c.error("space/links", "links.not-a-chain", &[]);
    }
}

fn check_bands(c: &mut Checker<'_>, spec: &MobileAppSpec) {
    let bands = &spec.space.bands;
    let mut ids = HashSet::new();
    for b in bands {
        let path = format!("space/bands/{}", b.id);
        if !ids.insert(b.id.as_str()) {
            c.error(&path, "band.duplicate-id", &[("id", b.id.clone())]);
        }
        if !b.min.is_finite() || !b.max.is_finite() {
            c.error(&path, "band.non-finite", &[("id", b.id.clone())]);
        } else if b.min >= b.max {
            c.error(&path, "band.empty-range", &[("id", b.id.clone())]);
        }
    }
    for (i, a) in bands.iter().enumerate() {
        for b in &bands[i + 1..] {
            let valid = |x: &Band| x.min.is_finite() && x.max.is_finite() && x.min < x.max;
            if valid(a) && valid(b) && a.min < b.max && b.min < a.max {
                c.error(
                    format!("space/bands/{}", b.id),
                    "band.overlap",
                    &[("a", a.id.clone()), ("b", b.id.clone())],
                );
            }
        }
    }
}

fn check_layers(c: &mut Checker<'_>, spec: &MobileAppSpec, known: Option<&HashSet<String>>) {
    let mut ids = HashSet::new();
    let props: HashSet<&str> =
        spec.space.pois.iter().flat_map(|p| p.props.keys().map(String::as_str)).collect();
    for layer in &spec.layers {
        let path = format!("layers/{}", layer.id);
        let id = || ("id", layer.id.clone());
        if !ids.insert(layer.id.as_str()) {
            c.error(&path, "layer.duplicate-id", &[id()]);
        }
        match &layer.target {
            LayerTarget::Pattern(p) if p.trim().is_empty() => c.error(&path, "layer.pattern-empty", &[id()]),
            LayerTarget::Concrete(u) if u != POI_TARGET_TOKEN && !is_absolute_url(u) => {
                c.error(&path, "layer.url-invalid", &[id()])
            }
            _ => {}
        }
        if layer.augmenters.is_empty() {
            c.warn(&path, "layer.empty", &[id()]);
        }
        for (i, aug) in layer.augmenters.iter().enumerate() {
            let apath = format!("{path}/augmenters/{}", i + 1);
            let kind_arg = || ("kind", aug.kind.clone());
            let Some(kind) = lookup_kind(&aug.kind) else {
                c.error(&apath, "augmenter.unknown-kind", &[kind_arg()]);
                continue;
            };
            for param in augment::required_params(kind, spec) {
                if !aug.params.contains_key(&param) {
                    c.error(&apath, "augmenter.missing-param", &[kind_arg(), ("param", param)]);
                }
            }
            for name in aug.params.keys() {
                if !augment::accepts_param(kind, spec, name) {
                    c.error(&apath, "augmenter.unknown-param", &[kind_arg(), ("param", name.clone())]);
                }
            }
            if !spec.context_types.is_empty() && kind.compatible.is_disjoint(&spec.context_types) {
                c.warn(&apath, "augmenter.incompatible", &[kind_arg()]);
            }
            for (name, b) in &aug.params {
                let ppath = format!("{apath}/params/{name}");
                let param = || ("param", name.clone());
                match b {
                    Binding::Literal(_) => {}
                    Binding::PoiField(_) | Binding::PoiProp(_) if spec.space.pois.is_empty() => {
                        c.error(&ppath, "binding.no-poi", &[param()]);
                    }
                    Binding::PoiField(_) => {}
                    Binding::PoiProp(p) => {
                        if !props.contains(p.as_str()) {
                            c.error(&ppath, "binding.unknown-prop", &[("name", p.clone())]);
                        }
                    }
                    Binding::ExtractRef(e) => match normalize_url(&e.url) {
                        None => c.error(&ppath, "binding.url-invalid", &[param()]),
                        Some(u) => {
                            if known.is_some_and(|k| !k.contains(&u)) {
                                c.warn(&ppath, "prop.unknown-source", &[("url", e.url.clone())]);
                            }
                        }
                    },
                }
            }
        }
    }
}

fn check_rules(c: &mut Checker<'_>, spec: &MobileAppSpec) {
    let mut seen = HashSet::new();
    for (i, r) in spec.rules.iter().enumerate() {
        let path = format!("rules/{}", i + 1);
        if spec.sensor(&r.sensor_id).is_none() {
            c.error(&path, "rule.unknown-sensor", &[("id", r.sensor_id.clone())]);
        }
        if spec.layer(&r.layer_id).is_none() {
            c.error(&path, "rule.unknown-layer", &[("id", r.layer_id.clone())]);
        }
        if !seen.insert((r.sensor_id.as_str(), r.layer_id.as_str())) {
            c.error(
                &path,
                "rule.duplicate",
                &[("sensor", r.sensor_id.clone()), ("layer", r.layer_id.clone())],
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poi(id: &str, x: f64, order: Option<u32>) -> PointOfInterest {
        PointOfInterest {
            id: id.into(),
            name: id.to_uppercase(),
            position: PointInSpace::new(x, 10.0),
            target_url: format!("https://example.org/{id}"),
            order,
            code: None,
            props: BTreeMap::new(),
        }
    }

    fn floorplan(pois: Vec<PointOfInterest>, links: &[(&str, &str)]) -> MobileAppSpec {
        let mut s = MobileAppSpec::named("T");
        s.space = DimensionalSpace {
            kind: SpaceKind::Floorplan,
            image_url: Some("plan.png".into()),
            width: Some(100.0),
            height: Some(100.0),
            pois,
            bands: vec![],
            links: links.iter().map(|(a, b)| Link::new(a, b)).collect(),
        };
        s
    }

    fn band(id: &str, min: f64, max: f64) -> Band {
        Band { id: id.into(), label: id.into(), min, max, units: "dB".into() }
    }

    #[test]
    fn minimal_spec_is_ok() {
        let r = validate_spec(&MobileAppSpec::named("T"));
        assert!(r.ok, "{r:?}");
        assert!(r.issues.is_empty());
    }

    #[test]
    fn empty_band_range() {
        let mut s = MobileAppSpec::named("N");
        s.space.kind = SpaceKind::ScalarScale;
        s.space.bands = vec![band("b", 50.0, 50.0)];
        let r = validate_spec(&s);
        assert!(!r.ok);
        assert_eq!(r.error_keys(), vec!["band.empty-range"]);
        assert_eq!(r.issues[0].message, "Band \"b\" must have a minimum lower than its maximum.");
    }

    #[test]
    fn overlapping_bands() {
        let mut s = MobileAppSpec::named("N");
        s.space.kind = SpaceKind::ScalarScale;
        s.space.bands = vec![band("a", 0.0, 40.0), band("b", 40.0, 70.0), band("c", 60.0, 80.0)];
        assert_eq!(validate_spec(&s).error_keys(), vec!["band.overlap"]);
    }

    #[test]
    fn duplicate_order() {
        let s = floorplan(vec![poi("a", 1.0, Some(3)), poi("b", 2.0, Some(3))], &[]);
        assert_eq!(validate_spec(&s).error_keys(), vec!["poi.duplicate-order"]);
    }

    #[test]
    fn out_of_bounds_and_stage() {
        let s = floorplan(vec![poi("a", 101.0, None)], &[]);
        let r = validate_spec(&s);
        assert_eq!(r.error_keys(), vec!["poi.out-of-bounds"]);
        assert_eq!(stage_of_path(&r.issues[0].path), 4);
        assert!(r.for_stage(3).ok);
        assert!(!r.for_stage(4).ok);
    }

    #[test]
    fn link_shapes() {
        let pois = || vec![poi("a", 1.0, Some(1)), poi("b", 2.0, Some(2)), poi("c", 3.0, Some(3))];
        assert!(validate_spec(&floorplan(pois(), &[("a", "b"), ("b", "c")])).ok);
        let cyc = validate_spec(&floorplan(pois(), &[("a", "b"), ("b", "a")]));
        assert_eq!(cyc.error_keys(), vec!["link.cycle"]);
        let branch = validate_spec(&floorplan(pois(), &[("a", "b"), ("a", "c")]));
        assert_eq!(branch.error_keys(), vec!["links.not-a-chain"]);
        let join = validate_spec(&floorplan(pois(), &[("a", "c"), ("b", "c")]));
        assert_eq!(join.error_keys(), vec!["links.not-a-chain"]);
        let mut more = pois();
        more.push(poi("d", 4.0, Some(4)));
        let two = validate_spec(&floorplan(more, &[("a", "b"), ("c", "d")]));
        assert_eq!(two.error_keys(), vec!["links.not-a-chain"]);
        let selfy = validate_spec(&floorplan(pois(), &[("a", "a")]));
        assert_eq!(selfy.error_keys(), vec!["link.self"]);
    }

    #[test]
    fn order_missing_is_a_warning() {
        let s = floorplan(vec![poi("a", 1.0, None), poi("b", 2.0, Some(2))], &[("a", "b")]);
        let r = validate_spec(&s);
        assert!(r.ok);
        assert_eq!(r.warnings().map(|w| w.key.as_str()).collect::<Vec<_>>(), vec!["poi.order-missing"]);
    }

    #[test]
    fn sensor_context_must_be_selected() {
        let mut s = MobileAppSpec::named("T");
        s.sensors.push(SensorDecl::new("d", SensorKind::Db));
        assert_eq!(validate_spec(&s).error_keys(), vec!["sensor.context-type-unselected"]);
        s.context_types.insert(ContextTypeKind::Noise);
        assert!(validate_spec(&s).ok);
        s.sensors[0].context_type = ContextTypeKind::Light;
        assert_eq!(validate_spec(&s).error_keys(), vec!["sensor.kind-mismatch"]);
    }

    #[test]
    fn unknown_source_warning_only_with_known_set() {
        let mut p = poi("a", 1.0, None);
        p.props.insert(
            "d".into(),
            PropertySource::Extract(ExtractSource {
                url: "https://museum.example/a".into(),
                xpath: crate::html::XPathExpr::parse("//p").unwrap(),
                mode: ExtractMode::Text,
            }),
        );
        let s = floorplan(vec![p], &[]);
        assert!(validate_spec(&s).issues.is_empty());
        let r = validate_spec_against(&s, &HashSet::new());
        assert!(r.ok);
        assert!(r.has_key("prop.unknown-source"));
    }

    #[test]
    fn namespace_and_locale_shapes() {
        assert!(is_reverse_domain("org.mowa.tour"));
        assert!(!is_reverse_domain("tour"));
        assert!(!is_reverse_domain("org..x"));
        assert!(is_language_tag("es-AR"));
        assert!(!is_language_tag("english"));
    }
}
