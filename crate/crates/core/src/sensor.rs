//! Simulated sensor traces and their reduction to semantic context changes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spec::{Band, DimensionalSpace, MobileAppSpec, SensorDecl, SensorKind, SpaceKind};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;
/// Landscape iff |gamma| exceeds this many degrees.
pub const LANDSCAPE_GAMMA_DEG: f64 = 45.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reading {
    Nav { url: String },
    Gps { lat: f64, lon: f64 },
    Qr { payload: String },
    Scalar { sensor: String, value: f64 },
    Orientation { alpha: f64, beta: f64, gamma: f64 },
    Clock { minutes: f64 },
}

impl Reading {
    fn is_finite(&self) -> bool {
        match self {
            Reading::Gps { lat, lon } => lat.is_finite() && lon.is_finite(),
            Reading::Scalar { value, .. } => value.is_finite(),
            Reading::Orientation { alpha, beta, gamma } => {
                alpha.is_finite() && beta.is_finite() && gamma.is_finite()
            }
            Reading::Clock { minutes } => minutes.is_finite(),
            Reading::Nav { .. } | Reading::Qr { .. } => true,
        }
    }
}

/// One timestamped trace line: `{"t":<ms>,"kind":…,…}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    #[serde(rename = "t")]
    pub t_ms: u64,
    #[serde(flatten)]
    pub reading: Reading,
}

impl SimEvent {
    pub fn new(t_ms: u64, reading: Reading) -> Self {
        SimEvent { t_ms, reading }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Portrait,
    Landscape,
}

impl Orientation {
    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::Portrait => "portrait",
            Orientation::Landscape => "landscape",
        }
    }
}

/// The meaning of a reading for the rules.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum Semantic {
    AtPoi(String),
    LeftPois,
    InBand(String),
    /// A scalar value outside every declared band.
    OutOfBands,
    OrientationMode(Orientation),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextChange {
    pub sensor_id: String,
    pub t_ms: u64,
    pub semantic: Semantic,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("trace line {line}: {detail}")]
    TraceSyntax { line: usize, detail: String },
    #[error("trace line {line} goes back in time")]
    UnsortedTrace { line: usize },
}

impl TraceError {
    pub fn key(&self) -> &'static str {
        match self {
            TraceError::TraceSyntax { .. } => "trace.syntax",
            TraceError::UnsortedTrace { .. } => "trace.unsorted",
        }
    }
}

/// Parses JSONL; blank lines are skipped, line numbers are 1-based.
pub fn parse_trace(bytes: &[u8]) -> Result<Vec<SimEvent>, TraceError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| TraceError::TraceSyntax { line: 1, detail: e.to_string() })?;
    let mut out: Vec<SimEvent> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let ev: SimEvent = serde_json::from_str(raw)
            .map_err(|e| TraceError::TraceSyntax { line, detail: e.to_string() })?;
        if !ev.reading.is_finite() {
            return Err(TraceError::TraceSyntax { line, detail: "non-finite number".into() });
        }
        if out.last().is_some_and(|prev| prev.t_ms > ev.t_ms) {
            return Err(TraceError::UnsortedTrace { line });
        }
        out.push(ev);
    }
    Ok(out)
}

pub fn write_trace(events: &[SimEvent]) -> String {
    events.iter().map(|e| serde_json::to_string(e).expect("event serializes") + "\n").collect()
}

/// Great-circle distance in meters.
pub fn haversine_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * a.sqrt().min(1.0).asin()
}

/// Distance from a reading to a PoI position in the units of the space:
/// meters on a map, space units on a floor plan.
pub fn location_distance(space: &DimensionalSpace, lat: f64, lon: f64, x: f64, y: f64) -> f64 {
    match space.kind {
        SpaceKind::Map2d => haversine_m(lat, lon, y, x),
        _ => (lon - x).hypot(lat - y),
    }
}

/// PoI sensed by a location reading. QR payloads match `code` exactly; GPS
/// picks the nearest PoI within the sensor radius, ties going to the
/// smallest `order`, then the smallest id.
pub fn match_location<'s>(reading: &Reading, space: &'s DimensionalSpace, sensor: &SensorDecl) -> Option<&'s str> {
    match reading {
        Reading::Qr { payload } => {
            space.pois.iter().find(|p| p.code.as_deref() == Some(payload.as_str())).map(|p| p.id.as_str())
        }
        Reading::Gps { lat, lon } => {
            let radius = sensor.radius();
            space
                .pois
                .iter()
                .map(|p| (location_distance(space, *lat, *lon, p.position.x, p.position.y), p))
                .filter(|(d, _)| *d <= radius)
                .min_by(|(da, a), (db, b)| {
                    da.total_cmp(db)
                        .then_with(|| a.order.unwrap_or(u32::MAX).cmp(&b.order.unwrap_or(u32::MAX)))
                        .then_with(|| a.id.cmp(&b.id))
                })
                .map(|(_, p)| p.id.as_str())
        }
        _ => None,
    }
}

/// The band with `min <= value < max`.
pub fn match_band(value: f64, bands: &[Band]) -> Option<&str> {
    bands.iter().find(|b| b.contains(value)).map(|b| b.id.as_str())
}

pub fn orientation_of(gamma: f64) -> Orientation {
    if gamma.abs() > LANDSCAPE_GAMMA_DEG {
        Orientation::Landscape
    } else {
        Orientation::Portrait
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no declared sensor handles reading: {0}")]
pub struct UnknownSensor(pub String);

/// Last semantic value per sensor.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorState {
    pub last: BTreeMap<String, Semantic>,
}

/// Declared sensor that handles `reading`. Kind-addressed readings go to
/// the first sensor of that kind.
pub fn sensor_for<'s>(spec: &'s MobileAppSpec, reading: &Reading) -> Result<Option<&'s SensorDecl>, UnknownSensor> {
    let by_kind = |kind: SensorKind| {
        spec.sensors
            .iter()
            .find(|s| s.kind == kind)
            .ok_or_else(|| UnknownSensor(format!("no {kind} sensor")))
    };
    Ok(Some(match reading {
        Reading::Nav { .. } => return Ok(None),
        Reading::Gps { .. } => by_kind(SensorKind::Gps)?,
        Reading::Qr { .. } => by_kind(SensorKind::Qr)?,
        Reading::Orientation { .. } => by_kind(SensorKind::Orientation)?,
        Reading::Clock { .. } => by_kind(SensorKind::Clock)?,
        Reading::Scalar { sensor, .. } => spec
            .sensor(sensor)
            .filter(|s| matches!(s.kind, SensorKind::Lux | SensorKind::Db | SensorKind::Clock))
            .ok_or_else(|| UnknownSensor(format!("no scalar sensor `{sensor}`")))?,
    }))
}

/// Semantic value of a non-navigation reading.
pub fn semantic_of(spec: &MobileAppSpec, sensor: &SensorDecl, reading: &Reading) -> Option<Semantic> {
    let band = |v: f64| match match_band(v, &spec.space.bands) {
        Some(b) => Semantic::InBand(b.to_string()),
        None => Semantic::OutOfBands,
    };
    Some(match reading {
        Reading::Nav { .. } => return None,
        Reading::Gps { .. } | Reading::Qr { .. } => match match_location(reading, &spec.space, sensor) {
            Some(p) => Semantic::AtPoi(p.to_string()),
            None => Semantic::LeftPois,
        },
        Reading::Scalar { value, .. } => band(*value),
        Reading::Clock { minutes } => band(*minutes),
        Reading::Orientation { gamma, .. } => Semantic::OrientationMode(orientation_of(*gamma)),
    })
}

/// Advances `state` by one event, returning a change only when the sensor's
/// semantic value differs from its previous one. Leaving every PoI or band
/// counts as a change only after something was sensed.
pub fn step(state: &mut SensorState, spec: &MobileAppSpec, ev: &SimEvent) -> Result<Option<ContextChange>, UnknownSensor> {
    let Some(sensor) = sensor_for(spec, &ev.reading)? else {
        return Ok(None);
    };
    let Some(sem) = semantic_of(spec, sensor, &ev.reading) else {
        return Ok(None);
    };
    let prev = state.last.insert(sensor.id.clone(), sem.clone());
    let changed = match &prev {
        Some(p) => *p != sem,
        None => !matches!(sem, Semantic::LeftPois | Semantic::OutOfBands),
    };
    Ok(changed.then(|| ContextChange { sensor_id: sensor.id.clone(), t_ms: ev.t_ms, semantic: sem }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::{ContextTypeKind, PointInSpace, PointOfInterest};

    fn poi(id: &str, x: f64, y: f64, order: Option<u32>, code: Option<&str>) -> PointOfInterest {
        PointOfInterest {
            id: id.into(),
            name: id.into(),
            position: PointInSpace::new(x, y),
            target_url: format!("https://example.org/{id}"),
            order,
            code: code.map(str::to_string),
            props: Default::default(),
        }
    }

    fn band(id: &str, min: f64, max: f64) -> Band {
        Band { id: id.into(), label: id.into(), min, max, units: "dB".into() }
    }

    #[test]
    fn parse_trace_cases() {
        let evs = parse_trace(br#"{"t":0,"kind":"qr","payload":"http://en.qrwp.org/Toxodon"}"#).unwrap();
        assert_eq!(evs, vec![SimEvent::new(0, Reading::Qr { payload: "http://en.qrwp.org/Toxodon".into() })]);
        assert!(parse_trace(b"").unwrap().is_empty());
        let unsorted = b"{\"t\":5,\"kind\":\"nav\",\"url\":\"https://a.b/\"}\n{\"t\":4,\"kind\":\"clock\",\"minutes\":3}";
        assert_eq!(parse_trace(unsorted), Err(TraceError::UnsortedTrace { line: 2 }));
        assert!(matches!(parse_trace(b"{\"t\":1,\"kind\":\"sonar\"}"), Err(TraceError::TraceSyntax { line: 1, .. })));
        assert!(matches!(parse_trace(b"{\"t\":-1,\"kind\":\"clock\",\"minutes\":3}"), Err(TraceError::TraceSyntax { .. })));
    }

    #[test]
    fn trace_round_trip() {
        let evs = vec![
            SimEvent::new(0, Reading::Nav { url: "https://a.b/".into() }),
            SimEvent::new(1, Reading::Gps { lat: -34.9, lon: -57.9 }),
            SimEvent::new(2, Reading::Scalar { sensor: "d".into(), value: 80.5 }),
            SimEvent::new(3, Reading::Orientation { alpha: 0.0, beta: 1.0, gamma: 60.0 }),
        ];
        assert_eq!(parse_trace(write_trace(&evs).as_bytes()).unwrap(), evs);
    }

    #[test]
    fn gps_ties_and_radius() {
        let space = DimensionalSpace {
            kind: SpaceKind::Floorplan,
            pois: vec![poi("p2", 10.0, 0.0, Some(2), None), poi("p1", -10.0, 0.0, Some(1), None)],
            ..Default::default()
        };
        let gps = SensorDecl::new("g", SensorKind::Gps);
        let at = |lon: f64, lat: f64| match_location(&Reading::Gps { lat, lon }, &space, &gps);
        assert_eq!(at(0.0, 0.0), Some("p1"));
        assert_eq!(at(9.0, 0.0), Some("p2"));
        assert_eq!(at(500.0, 500.0), None);
    }

    #[test]
    fn map_radius_in_meters() {
        let space = DimensionalSpace {
            kind: SpaceKind::Map2d,
            pois: vec![poi("p1", -57.9545, -34.9093, Some(1), None)],
            ..Default::default()
        };
        let gps = SensorDecl::new("g", SensorKind::Gps);
        // 0.0001 degrees of latitude is about 11 m.
        assert_eq!(match_location(&Reading::Gps { lat: -34.9092, lon: -57.9545 }, &space, &gps), Some("p1"));
        // 0.0045 degrees is about 500 m.
        assert_eq!(match_location(&Reading::Gps { lat: -34.9048, lon: -57.9545 }, &space, &gps), None);
        let d = haversine_m(0.0, 0.0, 1.0, 0.0);
        assert!((d - 111_194.9).abs() < 1.0, "{d}");
    }

    #[test]
    fn band_boundaries() {
        let bands = [band("quiet", 0.0, 40.0), band("normal", 40.0, 70.0)];
        assert_eq!(match_band(40.0, &bands), Some("normal"));
        assert_eq!(match_band(39.999, &bands), Some("quiet"));
        assert_eq!(match_band(-5.0, &bands), None);
        assert_eq!(match_band(70.0, &bands), None);
    }

    #[test]
    fn step_dedups() {
        let mut spec = MobileAppSpec::named("T");
        spec.context_types.insert(ContextTypeKind::Location);
        spec.sensors.push(SensorDecl::new("q", SensorKind::Qr));
        spec.space.pois = vec![poi("p1", 0.0, 0.0, Some(1), Some("c1")), poi("p2", 1.0, 0.0, Some(2), Some("c2"))];
        let mut st = SensorState::default();
        let qr = |t, c: &str| SimEvent::new(t, Reading::Qr { payload: c.into() });
        let sem = |c: Option<ContextChange>| c.map(|c| c.semantic);
        assert_eq!(sem(step(&mut st, &spec, &qr(0, "zz")).unwrap()), None);
        assert_eq!(sem(step(&mut st, &spec, &qr(1, "c1")).unwrap()), Some(Semantic::AtPoi("p1".into())));
        assert_eq!(sem(step(&mut st, &spec, &qr(2, "c1")).unwrap()), None);
        assert_eq!(sem(step(&mut st, &spec, &qr(3, "c2")).unwrap()), Some(Semantic::AtPoi("p2".into())));
        assert_eq!(sem(step(&mut st, &spec, &qr(4, "zz")).unwrap()), Some(Semantic::LeftPois));
        let gps = SimEvent::new(5, Reading::Gps { lat: 0.0, lon: 0.0 });
        assert!(step(&mut st, &spec, &gps).is_err());
        let nav = SimEvent::new(6, Reading::Nav { url: "https://a.b/".into() });
        assert_eq!(step(&mut st, &spec, &nav).unwrap(), None);
    }

    #[test]
    fn orientation_rule() {
        assert_eq!(orientation_of(45.0), Orientation::Portrait);
        assert_eq!(orientation_of(-45.1), Orientation::Landscape);
    }
}
