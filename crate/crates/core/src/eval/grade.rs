use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::GradeReport;
use crate::augment::{HYPERMEDIA_NAV, POI_INFO_PANEL};
use crate::extract::ExtractCache;
use crate::spec::{
    resolve_binding, validate_spec, AugmenterInstance, Binding, LayerTarget, MobileAppSpec,
    PointOfInterest, ValidationReport, POI_TARGET_TOKEN,
};
use crate::urls::{glob_match, normalize_url};
use crate::weaver::PageCorpus;

/// Marker position tolerance as a fraction of the space diagonal.
pub const DEFAULT_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct Rubric {
    pub reference: MobileAppSpec,
    pub expected_poi_count: usize,
    pub expected_link_count: usize,
    pub required_props: Vec<String>,
    pub tolerance: f64,
}

impl Rubric {
    /// Rubric whose expectations are read off the reference itself.
    pub fn from_reference(reference: MobileAppSpec) -> Self {
        let mut props: Vec<String> =
            reference.space.pois.iter().flat_map(|p| p.props.keys().cloned()).collect();
        props.sort();
        props.dedup();
        Rubric {
            expected_poi_count: reference.space.pois.len(),
            expected_link_count: reference.space.links.len(),
            required_props: props,
            tolerance: DEFAULT_TOLERANCE,
            reference,
        }
    }
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

/// On-disk rubric; paths are relative to the rubric file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RubricFile {
    pub reference: String,
    pub expected_poi_count: usize,
    pub expected_link_count: usize,
    pub required_props: Vec<String>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache: Option<String>,
}

/// Pages and snapshots used to check anchors and resolve values.
#[derive(Debug, Clone, Copy)]
pub struct GradeEnv<'a> {
    pub corpus: &'a PageCorpus,
    pub cache: &'a ExtractCache,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GradeError {
    #[error("rubric reference does not validate")]
    RubricMismatch(Option<ValidationReport>),
}

impl GradeError {
    pub fn key(&self) -> &'static str {
        "grade.rubric-mismatch"
    }
}

fn same_name(a: &str, b: &str) -> bool {
    a.trim().to_lowercase() == b.trim().to_lowercase()
}

fn same_url(a: &str, b: &str) -> bool {
    matches!((normalize_url(a), normalize_url(b)), (Some(x), Some(y)) if x == y)
}

/// Candidate PoI standing for `reference`: same target URL, else same name.
fn match_poi<'c>(candidate: &'c MobileAppSpec, reference: &PointOfInterest) -> Option<&'c PointOfInterest> {
    let pois = &candidate.space.pois;
    pois.iter()
        .find(|p| same_url(&p.target_url, &reference.target_url))
        .or_else(|| pois.iter().find(|p| same_name(&p.name, &reference.name)))
}

fn tolerance_units(rubric: &Rubric) -> f64 {
    let space = &rubric.reference.space;
    let diag = space.diagonal().unwrap_or_else(|| {
        let xs = space.pois.iter().map(|p| p.position.x);
        let ys = space.pois.iter().map(|p| p.position.y);
        let span = |it: &mut dyn Iterator<Item = f64>| {
            let v: Vec<f64> = it.collect();
            v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        let (w, h) = (span(&mut xs.into_iter()), span(&mut ys.into_iter()));
        if w.is_finite() && h.is_finite() { w.hypot(h) } else { 0.0 }
    });
    rubric.tolerance * diag
}

/// First augmenter of `kind` in the first layer of `spec` that targets
/// `page` when the visitor is at `poi`.
fn augmenter_for<'s>(
    spec: &'s MobileAppSpec,
    page: &str,
    poi: Option<&PointOfInterest>,
    kind: &str,
) -> Option<&'s AugmenterInstance> {
    spec.layers
        .iter()
        .filter(|l| match &l.target {
            LayerTarget::Pattern(g) => glob_match(g, page),
            LayerTarget::Concrete(u) if u == POI_TARGET_TOKEN => poi.is_some_and(|p| same_url(&p.target_url, page)),
            LayerTarget::Concrete(u) => same_url(u, page),
        })
        .find_map(|l| l.augmenters.iter().find(|a| a.kind == kind))
}

fn same_placement(env: &GradeEnv<'_>, page: &str, a: &AugmenterInstance, b: &AugmenterInstance) -> bool {
    if a.position != b.position {
        return false;
    }
    match env.corpus.page(page) {
        Some(doc) => {
            let first = |x: &AugmenterInstance| x.anchor.eval(&doc).first().copied();
            first(a).is_some() && first(a) == first(b)
        }
        None => a.anchor == b.anchor,
    }
}

fn resolved_params(
    env: &GradeEnv<'_>,
    spec: &MobileAppSpec,
    aug: &AugmenterInstance,
    poi: Option<&str>,
) -> Option<BTreeMap<String, String>> {
    aug.params
        .iter()
        .map(|(k, b)| resolve_binding(spec, b, poi, env.cache).ok().map(|v| (k.clone(), v)))
        .collect()
}

fn indicator(b: bool) -> f64 {
    if b { 1.0 } else { 0.0 }
}

/// Grades `candidate` against the rubric's reference application.
pub fn grade(candidate: &MobileAppSpec, rubric: &Rubric, env: &GradeEnv<'_>) -> Result<GradeReport, GradeError> {
    let reference = &rubric.reference;
    let report = validate_spec(reference);
    if !report.ok {
        return Err(GradeError::RubricMismatch(Some(report)));
    }
    if rubric.expected_poi_count == 0
        || rubric.expected_link_count == 0
        || !(rubric.tolerance > 0.0 && rubric.tolerance < 1.0)
    {
        return Err(GradeError::RubricMismatch(None));
    }
    let tol = tolerance_units(rubric);
    let poi_n = rubric.expected_poi_count as f64;
    let cells_per_poi = 2 + rubric.required_props.len();

    let mut a_hits = 0usize;
    let (mut b_sum, mut c_sum, mut d_sum) = (0.0, 0.0, 0.0);
    let mut to_reference: HashMap<&str, &str> = HashMap::new();

    for r in &reference.space.pois {
        let m = match_poi(candidate, r);
        if let Some(c) = m {
            to_reference.entry(c.id.as_str()).or_insert(r.id.as_str());
        }
        let name_ok = m.is_some_and(|c| same_name(&c.name, &r.name));
        let url_ok = m.is_some_and(|c| same_url(&c.target_url, &r.target_url));
        let placed = m.is_some_and(|c| {
            let (dx, dy) = (c.position.x - r.position.x, c.position.y - r.position.y);
            dx.hypot(dy) <= tol
        });
        if placed {
            a_hits += usize::from(name_ok) + usize::from(url_ok);
            for prop in &rubric.required_props {
                let c = m.expect("placed implies matched");
                let bind = Binding::PoiProp(prop.clone());
                let want = resolve_binding(reference, &bind, Some(&r.id), env.cache);
                let got = resolve_binding(candidate, &bind, Some(&c.id), env.cache);
                a_hits += usize::from(matches!((want, got), (Ok(w), Ok(g)) if w == g));
            }
        }
        d_sum += indicator(name_ok && url_ok);

        let page = normalize_url(&r.target_url).unwrap_or_else(|| r.target_url.clone());
        let pick = |spec, poi, kind| augmenter_for(spec, &page, poi, kind);
        let (rp, cp) = (pick(reference, Some(r), POI_INFO_PANEL), pick(candidate, m, POI_INFO_PANEL));
        if let (Some(rp), Some(cp)) = (rp, cp) {
            let positioned = same_placement(env, &page, rp, cp);
            let want = resolved_params(env, reference, rp, Some(&r.id));
            let got = resolved_params(env, candidate, cp, m.map(|c| c.id.as_str()));
            let params_ok = want.is_some() && want == got;
            b_sum += (indicator(positioned) + indicator(params_ok)) / 2.0;
        }
        let (rn, cn) = (pick(reference, Some(r), HYPERMEDIA_NAV), pick(candidate, m, HYPERMEDIA_NAV));
        if let (Some(rn), Some(cn)) = (rn, cn) {
            c_sum += indicator(same_placement(env, &page, rn, cn));
        }
    }

    let link_hits = reference
        .space
        .links
        .iter()
        .filter(|rl| {
            candidate.space.links.iter().any(|cl| {
                to_reference.get(cl.from.as_str()) == Some(&rl.from.as_str())
                    && to_reference.get(cl.to.as_str()) == Some(&rl.to.as_str())
            })
        })
        .count();

    let frac = |x: f64, n: f64| (x / n).clamp(0.0, 1.0);
    let a = frac(a_hits as f64, poi_n * cells_per_poi as f64);
    let e = frac(link_hits as f64, rubric.expected_link_count as f64);
    Ok(GradeReport::from_cells(a, frac(b_sum, poi_n), frac(c_sum, poi_n), frac(d_sum, poi_n), e)
        .expect("fractions are clamped"))
}
