//! Property checks shared by the property tests and the acceptance run.
//! Each check takes its case count and reports the first counterexample.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use proptest::prelude::*;
use proptest::test_runner::{TestCaseResult, TestRunner};

use mowa_core::augment::{apply_layer, BindingContext};
use mowa_core::html::{isomorphic, NodeKind};
use mowa_core::html::{parse_html, serialize_html, strip_augmentations, Document, InsertPosition, NodeId, XPathExpr};
use mowa_core::sensor::{match_band, match_location, Reading};
use mowa_core::spec::*;
use mowa_core::{parse_trace, run_trace, CachePolicy, ExtractCache, PageCorpus, SimEvent};

pub type Check = Result<(), String>;

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

fn run<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> TestCaseResult) -> Check {
    let config = ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() };
    TestRunner::new(config).run(&strategy, test).map_err(|e| e.to_string())
}

fn ensure(ok: bool, what: impl FnOnce() -> String) -> Check {
    if ok { Ok(()) } else { Err(what()) }
}

// ---------------------------------------------------------------- documents

const TAGS: [&str; 3] = ["sec", "item", "note"];

#[derive(Debug, Clone)]
enum Tree {
    Text(String),
    El { tag: usize, class: Option<usize>, children: Vec<Tree> },
}

fn tree() -> impl Strategy<Value = Tree> {
    let leaf = prop_oneof![
        "[a-z]{1,3}".prop_map(Tree::Text),
        (0..3usize, prop::option::of(0..2usize)).prop_map(|(tag, class)| Tree::El { tag, class, children: vec![] }),
    ];
    leaf.prop_recursive(4, 40, 4, |inner| {
        (0..3usize, prop::option::of(0..2usize), prop::collection::vec(inner, 0..4))
            .prop_map(|(tag, class, children)| Tree::El { tag, class, children })
    })
}

fn markup(t: &Tree, out: &mut String) {
    match t {
        Tree::Text(s) => out.push_str(s),
        Tree::El { tag, class, children } => {
            out.push('<');
            out.push_str(TAGS[*tag]);
            if let Some(c) = class {
                out.push_str(&format!(" class=\"{}\"", ["x", "y"][*c]));
            }
            out.push('>');
            for c in children {
                markup(c, out);
            }
            out.push_str(&format!("</{}>", TAGS[*tag]));
        }
    }
}

fn document(children: &[Tree]) -> Document {
    let mut body = String::new();
    for c in children {
        markup(c, &mut body);
    }
    parse_html(format!("<html><body>{body}</body></html>").as_bytes(), None)
}

// ------------------------------------------------------------ xpath oracle

#[derive(Debug, Clone)]
struct GenStep {
    descendant: bool,
    test: usize, // 0..3 tag, 3 = *, 4 = text(), 5 = html
    preds: Vec<(bool, usize)>, // (is_position, value)
}

fn render_expr(steps: &[GenStep], attr: bool) -> String {
    let mut s = String::new();
    for st in steps {
        s.push_str(if st.descendant { "//" } else { "/" });
        s.push_str(match st.test {
            0..=2 => TAGS[st.test],
            3 => "*",
            4 => "text()",
            _ => "html",
        });
        for (pos, v) in &st.preds {
            if *pos {
                s.push_str(&format!("[{}]", v + 1));
            } else {
                s.push_str(&format!("[@class='{}']", ["x", "y"][*v % 2]));
            }
        }
    }
    if attr {
        s.push_str("/@class");
    }
    s
}

fn expr() -> impl Strategy<Value = String> {
    let step = (any::<bool>(), 0..4usize, prop::collection::vec((any::<bool>(), 0..3usize), 0..3))
        .prop_map(|(descendant, test, preds)| GenStep { descendant, test, preds });
    (prop::collection::vec(step, 1..4), any::<bool>(), any::<bool>(), any::<bool>()).prop_map(
        |(mut steps, text_last, attr, root)| {
            if root {
                // Anchor some expressions at the real document structure.
                steps.insert(0, GenStep { descendant: false, test: 5, preds: vec![] });
            }
            if text_last {
                steps.last_mut().unwrap().test = 4;
            }
            render_expr(&steps, attr && !text_last)
        },
    )
}

fn matches_test(doc: &Document, n: NodeId, test: &str) -> bool {
    match (doc.kind(n), test) {
        (NodeKind::Text(_), "text()") => true,
        (NodeKind::Element(_), "*") => true,
        (NodeKind::Element(e), name) => e.name == name,
        _ => false,
    }
}

struct OracleStep {
    descendant: bool,
    test: String,
    preds: Vec<String>,
}

/// Splits the generated expression text back into steps by hand.
fn split(expr: &str) -> (Vec<OracleStep>, Option<String>) {
    let mut steps = Vec::new();
    let mut attr = None;
    let mut rest = expr;
    while !rest.is_empty() {
        let descendant = rest.starts_with("//");
        rest = &rest[if descendant { 2 } else { 1 }..];
        if let Some(a) = rest.strip_prefix('@') {
            attr = Some(a.to_string());
            break;
        }
        let end = rest.find('/').unwrap_or(rest.len());
        let (body, tail) = rest.split_at(end);
        let mut parts = body.split('[');
        let test = parts.next().unwrap().to_string();
        let preds = parts.map(|p| p.trim_end_matches(']').to_string()).collect();
        steps.push(OracleStep { descendant, test, preds });
        rest = tail;
    }
    (steps, attr)
}

fn is_ancestor_or_self(doc: &Document, a: NodeId, mut n: NodeId) -> bool {
    loop {
        if n == a {
            return true;
        }
        match doc.parent(n) {
            Some(p) => n = p,
            None => return false,
        }
    }
}

/// Per node: is `n` selected, given the previous context set? Positions
/// count among the parent's children that passed the earlier filters.
fn oracle(doc: &Document, expr: &str) -> Vec<NodeId> {
    let (steps, attr) = split(expr);
    let all = doc.preorder();
    let mut ctx = vec![doc.document_node()];
    for st in &steps {
        let mut next = Vec::new();
        for &n in &all {
            let Some(p) = doc.parent(n) else { continue };
            let reachable = ctx.iter().any(|&c| if st.descendant { is_ancestor_or_self(doc, c, p) } else { c == p });
            if !reachable || !matches_test(doc, n, &st.test) {
                continue;
            }
            let mut siblings: Vec<NodeId> =
                doc.children(p).iter().copied().filter(|&s| matches_test(doc, s, &st.test)).collect();
            for pred in &st.preds {
                siblings = match pred.strip_prefix("@class='") {
                    Some(v) => {
                        let v = v.trim_end_matches('\'');
                        siblings.into_iter().filter(|&s| doc.attr(s, "class") == Some(v)).collect()
                    }
                    None => {
                        let k: usize = pred.parse().unwrap();
                        siblings.get(k - 1).copied().into_iter().collect()
                    }
                };
            }
            if siblings.contains(&n) {
                next.push(n);
            }
        }
        ctx = next;
    }
    if let Some(a) = attr {
        ctx.retain(|&n| doc.attr(n, &a).is_some());
    }
    ctx
}

pub fn xpath_agrees_with_brute_force(cases: u32) -> Check {
    run(cases, (prop::collection::vec(tree(), 1..4), expr()), |(body, src)| {
        let doc = document(&body);
        let parsed = XPathExpr::parse(&src).unwrap();
        prop_assert_eq!(parsed.eval(&doc), oracle(&doc, &src), "{}", src);
        Ok(())
    })
}

// -------------------------------------------------------- nearest-PoI oracle

fn space_with(points: &[(f64, f64, Option<u32>)]) -> DimensionalSpace {
    DimensionalSpace {
        kind: SpaceKind::Floorplan,
        width: Some(100.0),
        height: Some(100.0),
        pois: points
            .iter()
            .enumerate()
            .map(|(i, &(x, y, order))| PointOfInterest {
                id: format!("p{i:02}"),
                name: format!("P{i}"),
                position: PointInSpace::new(x, y),
                target_url: format!("https://example.org/{i}"),
                order,
                code: None,
                props: BTreeMap::new(),
            })
            .collect(),
        ..Default::default()
    }
}

pub fn nearest_poi_agrees_with_sorting(cases: u32) -> Check {
    // Integer grid coordinates make exact distance ties common.
    let points = prop::collection::vec((0..20u8, 0..20u8, prop::option::of(1..5u32)), 0..12);
    run(cases, (points, (0..20u8, 0..20u8), 0..8u8), |(points, at, radius)| {
        let pts: Vec<(f64, f64, Option<u32>)> = points.iter().map(|&(x, y, o)| (x as f64, y as f64, o)).collect();
        let space = space_with(&pts);
        let mut sensor = SensorDecl::new("gps", SensorKind::Gps);
        sensor.radius_m = Some(radius as f64);
        let reading = Reading::Gps { lat: at.1 as f64, lon: at.0 as f64 };
        let got = match_location(&reading, &space, &sensor);

        let mut ranked: Vec<(i64, u32, &str)> = space
            .pois
            .iter()
            .map(|p| {
                let (dx, dy) = (p.position.x as i64 - at.0 as i64, p.position.y as i64 - at.1 as i64);
                (dx * dx + dy * dy, p.order.unwrap_or(u32::MAX), p.id.as_str())
            })
            .filter(|(d2, _, _)| *d2 <= (radius as i64).pow(2))
            .collect();
        ranked.sort();
        prop_assert_eq!(got, ranked.first().map(|r| r.2));
        Ok(())
    })
}

// ---------------------------------------------------------- band partition

pub fn bands_partition_their_range(cases: u32) -> Check {
    run(cases, (prop::collection::btree_set(-100i32..100, 2..8), -150.0f64..150.0), |(cuts, value)| {
        let cuts: Vec<f64> = cuts.into_iter().map(f64::from).collect();
        let bands: Vec<Band> = cuts
            .windows(2)
            .enumerate()
            .map(|(i, w)| Band { id: format!("b{i}"), label: format!("B{i}"), min: w[0], max: w[1], units: "u".into() })
            .collect();
        let mut spec = MobileAppSpec::named("Bands");
        spec.context_types.insert(ContextTypeKind::Light);
        spec.sensors.push(SensorDecl::new("lux", SensorKind::Lux));
        spec.space = DimensionalSpace { kind: SpaceKind::ScalarScale, bands: bands.clone(), ..Default::default() };
        prop_assert!(validate_spec(&spec).ok);

        let containing: Vec<&Band> = bands.iter().filter(|b| b.min <= value && value < b.max).collect();
        let inside = cuts[0] <= value && value < *cuts.last().unwrap();
        prop_assert_eq!(containing.len(), usize::from(inside));
        prop_assert_eq!(match_band(value, &bands), containing.first().map(|b| b.id.as_str()));
        for b in &bands {
            prop_assert_eq!(match_band(b.min, &bands), Some(b.id.as_str()));
        }
        Ok(())
    })
}

// ------------------------------------------------- augmentation invariants

fn injector(anchor: &str, position: InsertPosition, text: &str) -> Layer {
    Layer {
        id: "l1".into(),
        target: LayerTarget::Pattern("*".into()),
        augmenters: vec![AugmenterInstance {
            kind: "text-injector".into(),
            anchor: XPathExpr::parse(anchor).unwrap(),
            position,
            params: BTreeMap::from([("text".into(), Binding::literal(text))]),
        }],
    }
}

fn position() -> impl Strategy<Value = InsertPosition> {
    prop::sample::select(InsertPosition::ALL.to_vec())
}

pub fn applying_twice_equals_once_and_strip_restores(cases: u32) -> Check {
    let anchors = prop::sample::select(vec!["//sec", "//item[1]", "//note[@class='x']", "/html/body/*[2]", "//body"]);
    let inputs = (prop::collection::vec(tree(), 1..4), anchors, position(), "[ -~]{0,12}");
    run(cases, inputs, |(body, anchor, pos, text)| {
        let spec = MobileAppSpec::named("P");
        let cache = ExtractCache::empty();
        let ctx = BindingContext::new(&spec, &cache);
        let layer = injector(anchor, pos, &text);
        let original = document(&body);

        let mut once = original.clone();
        apply_layer(&mut once, &layer, &ctx).unwrap();
        let mut twice = once.clone();
        apply_layer(&mut twice, &layer, &ctx).unwrap();
        prop_assert_eq!(serialize_html(&once), serialize_html(&twice));

        let mut stripped = twice;
        strip_augmentations(&mut stripped, Some("l1"));
        prop_assert!(isomorphic(&stripped, &original));
        prop_assert_eq!(serialize_html(&stripped), serialize_html(&original));
        Ok(())
    })
}

pub fn volume_patch_is_idempotent_and_reversible() -> Check {
    let spec = parse_spec(&fs::read(fixture("noise/noise.mowa.xml")).unwrap()).unwrap();
    let corpus = PageCorpus::load(fixture("noise/corpus")).unwrap();
    let cache = ExtractCache::empty();
    let original = (*corpus.page("https://www.youtube.com/watch?v=mowa-demo").unwrap()).clone();
    for band in ["quiet", "normal", "noisy"] {
        let mut ctx = BindingContext::new(&spec, &cache);
        ctx.band = Some(band);
        ctx.value_label = spec.band(band).map(|b| b.label.as_str());
        let mut once = original.clone();
        apply_layer(&mut once, &spec.layers[0], &ctx).unwrap();
        let mut twice = once.clone();
        apply_layer(&mut twice, &spec.layers[0], &ctx).unwrap();
        ensure(serialize_html(&once) == serialize_html(&twice), || format!("{band}: second application changed the page"))?;
        strip_augmentations(&mut twice, None);
        ensure(serialize_html(&twice) == serialize_html(&original), || format!("{band}: strip left residue"))?;
    }
    Ok(())
}

// ------------------------------------------------------------- round trip

fn literal_text() -> impl Strategy<Value = String> {
    // Quotes, markup characters, tabs and newlines all need escaping.
    "[a-zA-Z0-9 <>&\"'\t\n\r=/]{0,16}"
}

prop_compose! {
    fn museum_like()(
        name in "[A-Za-z][A-Za-z0-9 ]{0,12}",
        n in 1..8usize,
        xs in prop::collection::vec(0.0f64..1000.0, 8),
        ys in prop::collection::vec(0.0f64..600.0, 8),
        chained in any::<bool>(),
        texts in prop::collection::vec(literal_text(), 3),
        pos in position(),
        gps_radius in prop::option::of(1.0f64..50.0),
    ) -> MobileAppSpec {
        let mut s = MobileAppSpec::named(&name);
        s.context_types.insert(ContextTypeKind::Location);
        s.sensors.push(SensorDecl::new("qr", SensorKind::Qr));
        let mut gps = SensorDecl::new("gps", SensorKind::Gps);
        gps.radius_m = gps_radius.or(gps.radius_m);
        s.sensors.push(gps);
        s.space = DimensionalSpace {
            kind: SpaceKind::Floorplan,
            image_url: Some("plan.png".into()),
            width: Some(1000.0),
            height: Some(600.0),
            ..Default::default()
        };
        for i in 0..n {
            let mut props = BTreeMap::new();
            props.insert("note".to_string(), PropertySource::Literal { value: texts[i % 3].clone() });
            s.space.pois.push(PointOfInterest {
                id: format!("p{i}"),
                name: format!("{} {i}", texts[0].trim().replace(['\t', '\n', '\r'], " ")).trim().to_string() + "x",
                position: PointInSpace::new(xs[i], ys[i]),
                target_url: format!("https://example.org/wiki/{i}?q=a&b=c"),
                order: chained.then_some(i as u32 + 1),
                code: Some(format!("code-{i}")),
                props,
            });
        }
        if chained {
            for i in 1..n {
                s.space.links.push(Link::new(&format!("p{}", i - 1), &format!("p{i}")));
            }
        }
        s.layers.push(Layer {
            id: "info".into(),
            target: LayerTarget::Concrete(POI_TARGET_TOKEN.into()),
            augmenters: vec![AugmenterInstance {
                kind: "text-injector".into(),
                anchor: XPathExpr::parse("//div[@id='content']").unwrap(),
                position: pos,
                params: BTreeMap::from([("text".into(), Binding::literal(&texts[1]))]),
            }],
        });
        s.layers.push(Layer {
            id: "all".into(),
            target: LayerTarget::Pattern("https://example.org/*".into()),
            augmenters: vec![AugmenterInstance {
                kind: "text-injector".into(),
                anchor: XPathExpr::parse("//h1").unwrap(),
                position: InsertPosition::After,
                params: BTreeMap::from([("text".into(), Binding::PoiProp("note".into()))]),
            }],
        });
        s.rules.push(ContextRule::new("qr", "info"));
        s.rules.push(ContextRule::new("gps", "all"));
        s
    }
}

pub fn spec_round_trips(cases: u32) -> Check {
    run(cases, museum_like(), |spec| {
        prop_assert!(validate_spec(&spec).ok, "{:?}", validate_spec(&spec));
        let bytes = serialize_spec(&spec).unwrap();
        let back = parse_spec(&bytes).unwrap();
        prop_assert_eq!(&back, &spec);
        prop_assert_eq!(serialize_spec(&back).unwrap(), bytes);
        Ok(())
    })
}

// ---------------------------------------------------------------- replay

fn museum() -> (MobileAppSpec, PageCorpus, ExtractCache) {
    (
        parse_spec(&fs::read(fixture("museum/museum.mowa.xml")).unwrap()).unwrap(),
        PageCorpus::load(fixture("museum/corpus")).unwrap(),
        ExtractCache::open(fixture("museum/cache"), CachePolicy::CacheOnly).unwrap(),
    )
}

fn run_bytes(spec: &MobileAppSpec, corpus: &PageCorpus, trace: &[SimEvent]) -> (String, Vec<(String, String)>) {
    // A fresh cache per run so memoized pages cannot leak between runs.
    let cache = ExtractCache::open(fixture("museum/cache"), CachePolicy::CacheOnly).unwrap();
    let run = run_trace(spec, corpus, &cache, trace).unwrap();
    (run.log.to_jsonl(), run.snapshots.into_iter().map(|s| (s.file_name(), s.html)).collect())
}

pub fn fixture_replay_is_deterministic() -> Check {
    let (spec, corpus, _) = museum();
    for rel in ["museum/traces/in_order.jsonl", "museum/traces/out_of_order.jsonl"] {
        let trace = parse_trace(&fs::read(fixture(rel)).unwrap()).unwrap();
        ensure(run_bytes(&spec, &corpus, &trace) == run_bytes(&spec, &corpus, &trace), || format!("{rel} diverged"))?;
    }
    Ok(())
}

pub fn random_replay_is_deterministic(cases: u32) -> Check {
    let (spec, corpus, _) = museum();
    run(cases, prop::collection::vec((0..14usize, any::<bool>()), 0..20), |picks| {
        let trace: Vec<SimEvent> = picks
            .iter()
            .enumerate()
            .map(|(i, &(k, gps))| {
                let t = i as u64 * 1000;
                match spec.space.pois.get(k) {
                    Some(p) if gps => SimEvent::new(t, Reading::Gps { lat: p.position.y + 3.0, lon: p.position.x }),
                    Some(p) => SimEvent::new(t, Reading::Qr { payload: p.code.clone().unwrap() }),
                    None if gps => SimEvent::new(t, Reading::Gps { lat: 0.0, lon: 0.0 }),
                    None => SimEvent::new(t, Reading::Nav { url: spec.space.pois[0].target_url.clone() }),
                }
            })
            .collect();
        prop_assert_eq!(run_bytes(&spec, &corpus, &trace), run_bytes(&spec, &corpus, &trace));
        Ok(())
    })
}
