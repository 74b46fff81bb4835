//! The `mowa-app` XML format: strict parsing and canonical serialization.

use std::collections::{BTreeMap, BTreeSet};

use roxmltree::Node;

use super::model::*;
use super::{validate_spec, SpecError};
use crate::html::{InsertPosition, XPathExpr};

pub fn parse_spec(bytes: &[u8]) -> Result<MobileAppSpec, SpecError> {
    let text = std::str::from_utf8(bytes).map_err(|e| SpecError::XmlSyntax {
        line: 1,
        column: 1,
        detail: format!("invalid UTF-8: {e}"),
    })?;
    let doc = roxmltree::Document::parse(text).map_err(|e| {
        let pos = e.pos();
        SpecError::XmlSyntax { line: pos.row, column: pos.col, detail: e.to_string() }
    })?;
    let root = doc.root_element();
    if root.tag_name().name() != "mowa-app" || root.tag_name().namespace().is_some() {
        return Err(SpecError::SchemaViolation(root.tag_name().name().to_string()));
    }
    let spec = read_app(root)?;
    check_references(&spec)?;
    Ok(spec)
}

struct Ctx<'a, 'i> {
    node: Node<'a, 'i>,
    path: String,
}

impl<'a, 'i> Ctx<'a, 'i> {
    fn new(node: Node<'a, 'i>, path: String) -> Self {
        Ctx { node, path }
    }

    fn violation(&self, what: &str) -> SpecError {
        SpecError::SchemaViolation(format!("{}{}", self.path, what))
    }

    fn allow_attrs(&self, allowed: &[&str]) -> Result<(), SpecError> {
        for a in self.node.attributes() {
            if a.namespace().is_some() || !allowed.contains(&a.name()) {
                return Err(self.violation(&format!("/@{}", a.name())));
            }
        }
        Ok(())
    }

    fn opt(&self, name: &str) -> Option<&'a str> {
        self.node.attribute(name)
    }

    fn req(&self, name: &str) -> Result<&'a str, SpecError> {
        self.opt(name).ok_or_else(|| self.violation(&format!("/@{name}")))
    }

    fn float(&self, name: &str) -> Result<Option<f64>, SpecError> {
        match self.opt(name) {
            None => Ok(None),
            Some(v) => match v.trim().parse::<f64>() {
                Ok(f) if f.is_finite() => Ok(Some(f)),
                _ => Err(self.violation(&format!("/@{name}"))),
            },
        }
    }

    fn req_float(&self, name: &str) -> Result<f64, SpecError> {
        self.float(name)?.ok_or_else(|| self.violation(&format!("/@{name}")))
    }

    /// Element children; any non-whitespace text is a violation.
    fn elements(&self) -> Result<Vec<Node<'a, 'i>>, SpecError> {
        let mut out = Vec::new();
        for c in self.node.children() {
            if c.is_element() {
                if c.tag_name().namespace().is_some() {
                    return Err(self.violation(&format!("/{}", c.tag_name().name())));
                }
                out.push(c);
            } else if c.is_text() && !c.text().unwrap_or_default().trim().is_empty() {
                return Err(self.violation("/text()"));
            }
        }
        Ok(out)
    }

    fn only_children(&self, name: &str) -> Result<Vec<Ctx<'a, 'i>>, SpecError> {
        self.elements()?
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                if c.tag_name().name() == name {
                    Ok(Ctx::new(c, format!("{}/{}[{}]", self.path, name, i + 1)))
                } else {
                    Err(self.violation(&format!("/{}", c.tag_name().name())))
                }
            })
            .collect()
    }
}

const ROOT_CHILDREN: &[&str] = &["context-types", "sensors", "space", "layers", "rules"];

fn read_app(root: Node<'_, '_>) -> Result<MobileAppSpec, SpecError> {
    let app = Ctx::new(root, "mowa-app".into());
    app.allow_attrs(&["name", "ns", "filename", "version", "locale"])?;
    let name = app.req("name")?.to_string();
    let mut spec = MobileAppSpec::named(&name);
    if let Some(ns) = app.opt("ns") {
        spec.namespace = ns.to_string();
    }
    if let Some(f) = app.opt("filename") {
        spec.filename = f.to_string();
    }
    if let Some(v) = app.opt("version") {
        spec.version = match v.trim().parse::<u32>() {
            Ok(1) => 1,
            _ => return Err(app.violation("/@version")),
        };
    }
    if let Some(l) = app.opt("locale") {
        spec.locale = l.to_string();
    }

    let mut last_index: Option<usize> = None;
    for child in app.elements()? {
        let tag = child.tag_name().name();
        let idx = ROOT_CHILDREN
            .iter()
            .position(|c| *c == tag)
            .ok_or_else(|| app.violation(&format!("/{tag}")))?;
        if last_index.is_some_and(|l| l >= idx) {
            return Err(app.violation(&format!("/{tag}")));
        }
        last_index = Some(idx);
        let ctx = Ctx::new(child, format!("mowa-app/{tag}"));
        ctx.allow_attrs(if tag == "space" { &["kind", "image", "width", "height"] } else { &[] })?;
        match tag {
            "context-types" => spec.context_types = read_context_types(&ctx)?,
            "sensors" => spec.sensors = read_sensors(&ctx)?,
            "space" => spec.space = read_space(&ctx)?,
            "layers" => spec.layers = read_layers(&ctx)?,
            "rules" => spec.rules = read_rules(&ctx)?,
            _ => unreachable!(),
        }
    }
    Ok(spec)
}

fn read_context_types(ctx: &Ctx<'_, '_>) -> Result<BTreeSet<ContextTypeKind>, SpecError> {
    let mut out = BTreeSet::new();
    for c in ctx.only_children("context-type")? {
        c.allow_attrs(&["kind"])?;
        let kind = ContextTypeKind::parse(c.req("kind")?).ok_or_else(|| c.violation("/@kind"))?;
        out.insert(kind);
    }
    Ok(out)
}

fn read_sensors(ctx: &Ctx<'_, '_>) -> Result<Vec<SensorDecl>, SpecError> {
    let mut out = Vec::new();
    for c in ctx.only_children("sensor")? {
        c.allow_attrs(&["id", "kind", "context-type", "radius-m"])?;
        let kind = SensorKind::parse(c.req("kind")?).ok_or_else(|| c.violation("/@kind"))?;
        let context_type = match c.opt("context-type") {
            Some(ct) => ContextTypeKind::parse(ct).ok_or_else(|| c.violation("/@context-type"))?,
            None => kind.context_type(),
        };
        let mut radius_m = c.float("radius-m")?;
        if kind == SensorKind::Gps && radius_m.is_none() {
            radius_m = Some(DEFAULT_GPS_RADIUS_M);
        }
        out.push(SensorDecl { id: c.req("id")?.to_string(), kind, context_type, radius_m });
    }
    Ok(out)
}

fn read_space(ctx: &Ctx<'_, '_>) -> Result<DimensionalSpace, SpecError> {
    let kind = SpaceKind::parse(ctx.req("kind")?).ok_or_else(|| ctx.violation("/@kind"))?;
    let mut space = DimensionalSpace {
        kind,
        image_url: ctx.opt("image").map(str::to_string),
        width: ctx.float("width")?,
        height: ctx.float("height")?,
        ..DimensionalSpace::default()
    };
    for (i, child) in ctx.elements()?.into_iter().enumerate() {
        let tag = child.tag_name().name();
        let c = Ctx::new(child, format!("{}/{}[{}]", ctx.path, tag, i + 1));
        match tag {
            "poi" => space.pois.push(read_poi(&c)?),
            "link" => {
                c.allow_attrs(&["from", "to"])?;
                c.elements()?.first().map_or(Ok(()), |_| Err(c.violation("/*")))?;
                space.links.push(Link::new(c.req("from")?, c.req("to")?));
            }
            "band" => {
                c.allow_attrs(&["id", "label", "min", "max", "units"])?;
                c.elements()?.first().map_or(Ok(()), |_| Err(c.violation("/*")))?;
                space.bands.push(Band {
                    id: c.req("id")?.to_string(),
                    label: c.req("label")?.to_string(),
                    min: c.req_float("min")?,
                    max: c.req_float("max")?,
                    units: c.req("units")?.to_string(),
                });
            }
            other => return Err(ctx.violation(&format!("/{other}"))),
        }
    }
    Ok(space)
}

fn read_poi(c: &Ctx<'_, '_>) -> Result<PointOfInterest, SpecError> {
    c.allow_attrs(&["id", "name", "x", "y", "z", "order", "target-url", "code"])?;
    let order = match c.opt("order") {
        None => None,
        Some(o) => Some(o.trim().parse::<u32>().map_err(|_| c.violation("/@order"))?),
    };
    let mut props = BTreeMap::new();
    for p in c.only_children("prop")? {
        p.allow_attrs(&["name", "source", "value", "url", "xpath", "mode"])?;
        let name = p.req("name")?.to_string();
        let source = match p.req("source")? {
            "literal" => PropertySource::Literal { value: p.opt("value").unwrap_or_default().to_string() },
            "extract" => PropertySource::Extract(ExtractSource {
                url: p.req("url")?.to_string(),
                xpath: XPathExpr::parse(p.req("xpath")?).map_err(|_| p.violation("/@xpath"))?,
                mode: ExtractMode::parse(p.opt("mode").unwrap_or("text"))
                    .ok_or_else(|| p.violation("/@mode"))?,
            }),
            _ => return Err(p.violation("/@source")),
        };
        if props.insert(name, source).is_some() {
            return Err(p.violation("/@name"));
        }
    }
    Ok(PointOfInterest {
        id: c.req("id")?.to_string(),
        name: c.req("name")?.to_string(),
        position: PointInSpace { x: c.req_float("x")?, y: c.req_float("y")?, z: c.float("z")? },
        target_url: c.req("target-url")?.to_string(),
        order,
        code: c.opt("code").map(str::to_string),
        props,
    })
}

fn read_layers(ctx: &Ctx<'_, '_>) -> Result<Vec<Layer>, SpecError> {
    let mut out = Vec::new();
    for l in ctx.only_children("layer")? {
        l.allow_attrs(&["id", "target", "value"])?;
        let value = l.req("value")?.to_string();
        let target = match l.req("target")? {
            "pattern" => LayerTarget::Pattern(value),
            "url" => LayerTarget::Concrete(value),
            _ => return Err(l.violation("/@target")),
        };
        let mut augmenters = Vec::new();
        for a in l.only_children("augmenter")? {
            a.allow_attrs(&["kind", "anchor", "position"])?;
            let anchor = XPathExpr::parse(a.req("anchor")?).map_err(|_| a.violation("/@anchor"))?;
            let position =
                InsertPosition::parse(a.req("position")?).ok_or_else(|| a.violation("/@position"))?;
            let mut params = BTreeMap::new();
            for p in a.only_children("param")? {
                p.allow_attrs(&["name", "bind", "value"])?;
                let binding = Binding::from_bind(p.opt("bind"), p.opt("value"))
                    .map_err(|_| p.violation("/@bind"))?;
                if params.insert(p.req("name")?.to_string(), binding).is_some() {
                    return Err(p.violation("/@name"));
                }
            }
            augmenters.push(AugmenterInstance { kind: a.req("kind")?.to_string(), anchor, position, params });
        }
        out.push(Layer { id: l.req("id")?.to_string(), target, augmenters });
    }
    Ok(out)
}

fn read_rules(ctx: &Ctx<'_, '_>) -> Result<Vec<ContextRule>, SpecError> {
    ctx.only_children("rule")?
        .into_iter()
        .map(|r| {
            r.allow_attrs(&["sensor", "layer"])?;
            Ok(ContextRule::new(r.req("sensor")?, r.req("layer")?))
        })
        .collect()
}

fn check_references(spec: &MobileAppSpec) -> Result<(), SpecError> {
    for rule in &spec.rules {
        if spec.sensor(&rule.sensor_id).is_none() {
            return Err(SpecError::DanglingReference(rule.sensor_id.clone()));
        }
        if spec.layer(&rule.layer_id).is_none() {
            return Err(SpecError::DanglingReference(rule.layer_id.clone()));
        }
    }
    for link in &spec.space.links {
        for id in [&link.from, &link.to] {
            if spec.poi(id).is_none() {
                return Err(SpecError::DanglingReference(id.clone()));
            }
        }
    }
    Ok(())
}

/// Canonical bytes: fixed element order, attributes sorted by name, UTF-8,
/// two-space indentation. Refuses specs with validation errors.
pub fn serialize_spec(spec: &MobileAppSpec) -> Result<Vec<u8>, SpecError> {
    let report = validate_spec(spec);
    if !report.ok {
        return Err(SpecError::InvalidSpec(report));
    }
    Ok(write_canonical(spec).into_bytes())
}

pub(crate) fn write_canonical(spec: &MobileAppSpec) -> String {
    let mut w = Writer::default();
    w.out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let version = spec.version.to_string();
    w.open(
        0,
        "mowa-app",
        vec![
            ("filename", Some(spec.filename.clone())),
            ("locale", Some(spec.locale.clone())),
            ("name", Some(spec.name.clone())),
            ("ns", Some(spec.namespace.clone())),
            ("version", Some(version)),
        ],
        false,
    );

    w.container(1, "context-types", spec.context_types.is_empty(), |w| {
        for ct in &spec.context_types {
            w.open(2, "context-type", vec![("kind", Some(ct.as_str().into()))], true);
        }
    });

    w.container(1, "sensors", spec.sensors.is_empty(), |w| {
        for s in &spec.sensors {
            w.open(
                2,
                "sensor",
                vec![
                    ("context-type", Some(s.context_type.as_str().into())),
                    ("id", Some(s.id.clone())),
                    ("kind", Some(s.kind.as_str().into())),
                    ("radius-m", s.radius_m.map(fmt_f64)),
                ],
                true,
            );
        }
    });

    let space = &spec.space;
    let space_attrs = vec![
        ("height", space.height.map(fmt_f64)),
        ("image", space.image_url.clone()),
        ("kind", Some(space.kind.as_str().into())),
        ("width", space.width.map(fmt_f64)),
    ];
    let space_empty = space.pois.is_empty() && space.links.is_empty() && space.bands.is_empty();
    w.open(1, "space", space_attrs, space_empty);
    if !space_empty {
        for p in &space.pois {
            let attrs = vec![
                ("code", p.code.clone()),
                ("id", Some(p.id.clone())),
                ("name", Some(p.name.clone())),
                ("order", p.order.map(|o| o.to_string())),
                ("target-url", Some(p.target_url.clone())),
                ("x", Some(fmt_f64(p.position.x))),
                ("y", Some(fmt_f64(p.position.y))),
                ("z", p.position.z.map(fmt_f64)),
            ];
            w.open(2, "poi", attrs, p.props.is_empty());
            if !p.props.is_empty() {
                for (name, src) in &p.props {
                    let attrs = match src {
                        PropertySource::Literal { value } => vec![
                            ("name", Some(name.clone())),
                            ("source", Some("literal".into())),
                            ("value", Some(value.clone())),
                        ],
                        PropertySource::Extract(e) => vec![
                            ("mode", Some(e.mode.to_string())),
                            ("name", Some(name.clone())),
                            ("source", Some("extract".into())),
                            ("url", Some(e.url.clone())),
                            ("xpath", Some(e.xpath.to_string())),
                        ],
                    };
                    w.open(3, "prop", attrs, true);
                }
                w.close(2, "poi");
            }
        }
        for l in &space.links {
            w.open(2, "link", vec![("from", Some(l.from.clone())), ("to", Some(l.to.clone()))], true);
        }
        for b in &space.bands {
            w.open(
                2,
                "band",
                vec![
                    ("id", Some(b.id.clone())),
                    ("label", Some(b.label.clone())),
                    ("max", Some(fmt_f64(b.max))),
                    ("min", Some(fmt_f64(b.min))),
                    ("units", Some(b.units.clone())),
                ],
                true,
            );
        }
        w.close(1, "space");
    }

    w.container(1, "layers", spec.layers.is_empty(), |w| {
        for l in &spec.layers {
            let (target, value) = match &l.target {
                LayerTarget::Pattern(p) => ("pattern", p.clone()),
                LayerTarget::Concrete(u) => ("url", u.clone()),
            };
            let attrs =
                vec![("id", Some(l.id.clone())), ("target", Some(target.into())), ("value", Some(value))];
            w.open(2, "layer", attrs, l.augmenters.is_empty());
            if l.augmenters.is_empty() {
                continue;
            }
            for a in &l.augmenters {
                let attrs = vec![
                    ("anchor", Some(a.anchor.to_string())),
                    ("kind", Some(a.kind.clone())),
                    ("position", Some(a.position.as_str().into())),
                ];
                w.open(3, "augmenter", attrs, a.params.is_empty());
                if a.params.is_empty() {
                    continue;
                }
                for (name, b) in &a.params {
                    let value = match b {
                        Binding::Literal(v) => Some(v.clone()),
                        _ => None,
                    };
                    w.open(
                        4,
                        "param",
                        vec![("bind", b.bind_text()), ("name", Some(name.clone())), ("value", value)],
                        true,
                    );
                }
                w.close(3, "augmenter");
            }
            w.close(2, "layer");
        }
    });

    w.container(1, "rules", spec.rules.is_empty(), |w| {
        for r in &spec.rules {
            w.open(
                2,
                "rule",
                vec![("layer", Some(r.layer_id.clone())), ("sensor", Some(r.sensor_id.clone()))],
                true,
            );
        }
    });
    w.close(0, "mowa-app");
    w.out
}

/// Shortest representation that parses back to the same value.
fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

#[derive(Default)]
struct Writer {
    out: String,
}

impl Writer {
    fn indent(&mut self, depth: usize) {
        for _ in 0..depth {
            self.out.push_str("  ");
        }
    }

    fn open(&mut self, depth: usize, tag: &str, attrs: Vec<(&str, Option<String>)>, empty: bool) {
        self.indent(depth);
        self.out.push('<');
        self.out.push_str(tag);
        debug_assert!(attrs.windows(2).all(|w| w[0].0 < w[1].0), "attributes must be sorted");
        for (k, v) in attrs {
            if let Some(v) = v {
                self.out.push(' ');
                self.out.push_str(k);
                self.out.push_str("=\"");
                escape_xml_attr(&v, &mut self.out);
                self.out.push('"');
            }
        }
        self.out.push_str(if empty { "/>\n" } else { ">\n" });
    }

    fn close(&mut self, depth: usize, tag: &str) {
        self.indent(depth);
        self.out.push_str("</");
        self.out.push_str(tag);
        self.out.push_str(">\n");
    }

    fn container(&mut self, depth: usize, tag: &str, empty: bool, body: impl FnOnce(&mut Self)) {
        self.open(depth, tag, Vec::new(), empty);
        if !empty {
            body(self);
            self.close(depth, tag);
        }
    }
}

fn escape_xml_attr(s: &str, out: &mut String) {
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            '\t' => out.push_str("&#9;"),
            c => out.push(c),
        }
    }
}
