use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::html::{InsertPosition, XPathExpr};

/// Concrete-target token resolved to the matched PoI's `target_url`.
pub const POI_TARGET_TOKEN: &str = "poi:target-url";
pub const DEFAULT_GPS_RADIUS_M: f64 = 20.0;
pub const DEFAULT_LOCALE: &str = "en";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobileAppSpec {
    pub name: String,
    pub namespace: String,
    pub filename: String,
    pub version: u32,
    #[serde(default)]
    pub context_types: BTreeSet<ContextTypeKind>,
    #[serde(default)]
    pub sensors: Vec<SensorDecl>,
    #[serde(default)]
    pub space: DimensionalSpace,
    #[serde(default)]
    pub layers: Vec<Layer>,
    #[serde(default)]
    pub rules: Vec<ContextRule>,
    #[serde(default = "default_locale")]
    pub locale: String,
}

fn default_locale() -> String {
    DEFAULT_LOCALE.to_string()
}

impl MobileAppSpec {
    /// A spec carrying only a name; every other field takes its default.
    pub fn named(name: &str) -> Self {
        let slug = slug(name);
        MobileAppSpec {
            name: name.to_string(),
            namespace: default_namespace(&slug),
            filename: default_filename(&slug),
            version: 1,
            context_types: BTreeSet::new(),
            sensors: Vec::new(),
            space: DimensionalSpace::default(),
            layers: Vec::new(),
            rules: Vec::new(),
            locale: default_locale(),
        }
    }

    pub fn sensor(&self, id: &str) -> Option<&SensorDecl> {
        self.sensors.iter().find(|s| s.id == id)
    }

    pub fn layer(&self, id: &str) -> Option<&Layer> {
        self.layers.iter().find(|l| l.id == id)
    }

    pub fn poi(&self, id: &str) -> Option<&PointOfInterest> {
        self.space.pois.iter().find(|p| p.id == id)
    }

    pub fn band(&self, id: &str) -> Option<&Band> {
        self.space.bands.iter().find(|b| b.id == id)
    }
}

pub(crate) fn slug(name: &str) -> String {
    let mut out = String::new();
    for ch in name.trim().chars().flat_map(char::to_lowercase) {
        if ch.is_ascii_alphanumeric() {
            out.push(ch);
        } else if !out.ends_with('-') && !out.is_empty() {
            out.push('-');
        }
    }
    out.trim_end_matches('-').to_string()
}

pub(crate) fn default_namespace(slug: &str) -> String {
    let seg: String = slug.chars().filter(char::is_ascii_alphanumeric).collect();
    let seg = match seg.chars().next() {
        None => "app".to_string(),
        Some(c) if c.is_ascii_digit() => format!("app{seg}"),
        Some(_) => seg,
    };
    format!("org.mowa.{seg}")
}

pub(crate) fn default_filename(slug: &str) -> String {
    let base = if slug.is_empty() { "app" } else { slug };
    format!("{base}.mowa.xml")
}

macro_rules! string_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }

            pub fn parse(s: &str) -> Option<Self> {
                match s { $($text => Some($name::$variant),)+ _ => None }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

string_enum!(
    /// Category of environmental information a sensor observes.
    ContextTypeKind {
        Location => "location",
        Orientation => "orientation",
        Light => "light",
        Noise => "noise",
        Time => "time",
    }
);

string_enum!(
    SensorKind {
        Gps => "gps",
        Qr => "qr",
        Lux => "lux",
        Db => "db",
        Orientation => "orientation",
        Clock => "clock",
    }
);

impl SensorKind {
    /// The fixed context type each sensor kind observes.
    pub fn context_type(self) -> ContextTypeKind {
        match self {
            SensorKind::Gps | SensorKind::Qr => ContextTypeKind::Location,
            SensorKind::Lux => ContextTypeKind::Light,
            SensorKind::Db => ContextTypeKind::Noise,
            SensorKind::Orientation => ContextTypeKind::Orientation,
            SensorKind::Clock => ContextTypeKind::Time,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorDecl {
    pub id: String,
    pub kind: SensorKind,
    pub context_type: ContextTypeKind,
    /// Match radius for GPS sensors; filled with the default on parse.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_m: Option<f64>,
}

impl SensorDecl {
    pub fn new(id: &str, kind: SensorKind) -> Self {
        SensorDecl {
            id: id.to_string(),
            kind,
            context_type: kind.context_type(),
            radius_m: (kind == SensorKind::Gps).then_some(DEFAULT_GPS_RADIUS_M),
        }
    }

    pub fn radius(&self) -> f64 {
        self.radius_m.unwrap_or(DEFAULT_GPS_RADIUS_M)
    }
}

string_enum!(
    SpaceKind {
        Map2d => "map2d",
        Floorplan => "floorplan",
        ScalarScale => "scalar_scale",
        AngleScale => "angle_scale",
        TimeScale => "time_scale",
    }
);

impl SpaceKind {
    pub fn is_location(self) -> bool {
        matches!(self, SpaceKind::Map2d | SpaceKind::Floorplan)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionalSpace {
    pub kind: SpaceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
    #[serde(default)]
    pub pois: Vec<PointOfInterest>,
    #[serde(default)]
    pub bands: Vec<Band>,
    #[serde(default)]
    pub links: Vec<Link>,
}

impl Default for DimensionalSpace {
    fn default() -> Self {
        DimensionalSpace {
            kind: SpaceKind::Map2d,
            image_url: None,
            width: None,
            height: None,
            pois: Vec::new(),
            bands: Vec::new(),
            links: Vec::new(),
        }
    }
}

impl DimensionalSpace {
    /// Length of the space diagonal, when both extents are known.
    pub fn diagonal(&self) -> Option<f64> {
        Some(self.width?.hypot(self.height?))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Link {
    pub from: String,
    pub to: String,
}

impl Link {
    pub fn new(from: &str, to: &str) -> Self {
        Link { from: from.to_string(), to: to.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointInSpace {
    pub x: f64,
    pub y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
}

impl PointInSpace {
    pub fn new(x: f64, y: f64) -> Self {
        PointInSpace { x, y, z: None }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_none_or(f64::is_finite)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointOfInterest {
    pub id: String,
    pub name: String,
    pub position: PointInSpace,
    pub target_url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<String>,
    #[serde(default)]
    pub props: BTreeMap<String, PropertySource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub id: String,
    pub label: String,
    /// Inclusive lower bound.
    pub min: f64,
    /// Exclusive upper bound.
    pub max: f64,
    pub units: String,
}

impl Band {
    pub fn contains(&self, value: f64) -> bool {
        self.min <= value && value < self.max
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ExtractMode {
    Text,
    Attribute(String),
}

impl ExtractMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "text" => Some(ExtractMode::Text),
            _ => s
                .strip_prefix("attr:")
                .filter(|n| !n.is_empty() && !n.contains(char::is_whitespace))
                .map(|n| ExtractMode::Attribute(n.to_string())),
        }
    }
}

impl fmt::Display for ExtractMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtractMode::Text => f.write_str("text"),
            ExtractMode::Attribute(n) => write!(f, "attr:{n}"),
        }
    }
}

impl Serialize for ExtractMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ExtractMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        ExtractMode::parse(&s).ok_or_else(|| serde::de::Error::custom(format!("bad mode `{s}`")))
    }
}

/// An `(url, xpath, mode)` triple resolved by the content extractor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractSource {
    pub url: String,
    pub xpath: XPathExpr,
    pub mode: ExtractMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum PropertySource {
    Literal { value: String },
    Extract(ExtractSource),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerTarget {
    #[serde(rename = "pattern")]
    Pattern(String),
    #[serde(rename = "url")]
    Concrete(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layer {
    pub id: String,
    pub target: LayerTarget,
    #[serde(default)]
    pub augmenters: Vec<AugmenterInstance>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmenterInstance {
    pub kind: String,
    pub anchor: XPathExpr,
    pub position: InsertPosition,
    #[serde(default)]
    pub params: BTreeMap<String, Binding>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoiField {
    Name,
    TargetUrl,
    Code,
}

/// Where an augmenter parameter takes its value from.
///
/// Textual form (used in XML `bind` attributes and JSON payloads):
/// `poi.name`, `poi.target_url`, `poi.code`, `poi.prop:<name>`,
/// `extract:<url>#<xpath>#<mode>`; literals carry no `bind` and put the
/// string in `value`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BindingRepr", into = "BindingRepr")]
pub enum Binding {
    Literal(String),
    PoiField(PoiField),
    PoiProp(String),
    ExtractRef(ExtractSource),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BindingRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
}

impl Binding {
    pub fn literal(s: &str) -> Self {
        Binding::Literal(s.to_string())
    }

    /// The `bind` attribute text; `None` for literals.
    pub fn bind_text(&self) -> Option<String> {
        match self {
            Binding::Literal(_) => None,
            Binding::PoiField(PoiField::Name) => Some("poi.name".into()),
            Binding::PoiField(PoiField::TargetUrl) => Some("poi.target_url".into()),
            Binding::PoiField(PoiField::Code) => Some("poi.code".into()),
            Binding::PoiProp(p) => Some(format!("poi.prop:{p}")),
            Binding::ExtractRef(src) => Some(format!("extract:{}#{}#{}", src.url, src.xpath, src.mode)),
        }
    }

    pub fn from_bind(bind: Option<&str>, value: Option<&str>) -> Result<Self, String> {
        let Some(bind) = bind else {
            return Ok(Binding::Literal(value.unwrap_or_default().to_string()));
        };
        match bind {
            "poi.name" => return Ok(Binding::PoiField(PoiField::Name)),
            "poi.target_url" => return Ok(Binding::PoiField(PoiField::TargetUrl)),
            "poi.code" => return Ok(Binding::PoiField(PoiField::Code)),
            _ => {}
        }
        if let Some(prop) = bind.strip_prefix("poi.prop:") {
            if prop.is_empty() {
                return Err("empty property name".into());
            }
            return Ok(Binding::PoiProp(prop.to_string()));
        }
        if let Some(rest) = bind.strip_prefix("extract:") {
            let (url, rest) = rest.split_once('#').ok_or("missing xpath")?;
            let (xpath, mode) = rest.rsplit_once('#').ok_or("missing mode")?;
            let xpath = XPathExpr::parse(xpath).map_err(|e| e.to_string())?;
            let mode = ExtractMode::parse(mode).ok_or_else(|| format!("bad mode `{mode}`"))?;
            return Ok(Binding::ExtractRef(ExtractSource { url: url.to_string(), xpath, mode }));
        }
        Err(format!("unknown binding `{bind}`"))
    }
}

impl TryFrom<BindingRepr> for Binding {
    type Error = String;

    fn try_from(r: BindingRepr) -> Result<Self, Self::Error> {
        Binding::from_bind(r.bind.as_deref(), r.value.as_deref())
    }
}

impl From<Binding> for BindingRepr {
    fn from(b: Binding) -> Self {
        match b {
            Binding::Literal(v) => BindingRepr { bind: None, value: Some(v) },
            other => BindingRepr { bind: other.bind_text(), value: None },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContextRule {
    pub sensor_id: String,
    pub layer_id: String,
}

impl ContextRule {
    pub fn new(sensor: &str, layer: &str) -> Self {
        ContextRule { sensor_id: sensor.to_string(), layer_id: layer.to_string() }
    }
}
