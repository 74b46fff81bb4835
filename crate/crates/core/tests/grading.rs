//! Grading perturbed copies of the museum reference. Each expected value is
//! counted by hand from the perturbation: 12 PoIs with 4 attribute cells each
//! (name, url, two props) and 11 links.

use std::fs;
use std::path::PathBuf;

use mowa_core::eval::{grade, GradeEnv, GradeError, Rubric};
use mowa_core::html::XPathExpr;
use mowa_core::spec::{Binding, MobileAppSpec};
use mowa_core::{parse_spec, CachePolicy, ExtractCache, PageCorpus};

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

struct Env {
    reference: MobileAppSpec,
    corpus: PageCorpus,
    cache: ExtractCache,
}

fn env() -> Env {
    Env {
        reference: parse_spec(&fs::read(fixture("museum/museum.mowa.xml")).unwrap()).unwrap(),
        corpus: PageCorpus::load(fixture("museum/corpus")).unwrap(),
        cache: ExtractCache::open(fixture("museum/cache"), CachePolicy::CacheOnly).unwrap(),
    }
}

fn cells(e: &Env, candidate: &MobileAppSpec) -> [f64; 5] {
    let rubric = Rubric::from_reference(e.reference.clone());
    let r = grade(candidate, &rubric, &GradeEnv { corpus: &e.corpus, cache: &e.cache }).unwrap();
    assert!(r.is_consistent());
    [r.a, r.b, r.c, r.d, r.e]
}

fn close(got: [f64; 5], want: [f64; 5]) {
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() < 1e-12, "{got:?} vs {want:?}");
    }
}

#[test]
fn misplaced_marker_loses_its_attribute_cells() {
    let e = env();
    let mut c = e.reference.clone();
    // Diagonal is sqrt(1000^2 + 600^2) ~ 1166, so the 5% tolerance is ~58 units.
    c.space.pois[4].position.x += 50.0;
    close(cells(&e, &c), [1.0; 5]);
    c.space.pois[4].position.x += 20.0;
    close(cells(&e, &c), [44.0 / 48.0, 1.0, 1.0, 1.0, 1.0]);
}

#[test]
fn missing_link() {
    let e = env();
    let mut c = e.reference.clone();
    c.space.links.remove(3);
    close(cells(&e, &c), [1.0, 1.0, 1.0, 1.0, 10.0 / 11.0]);
}

#[test]
fn renamed_poi() {
    let e = env();
    let mut c = e.reference.clone();
    c.space.pois[0].name = "Toxodont".into();
    // Matched by URL; name cell, d and the panel title all fail for p1.
    close(cells(&e, &c), [47.0 / 48.0, 11.5 / 12.0, 1.0, 11.0 / 12.0, 1.0]);
}

#[test]
fn wrong_url_falls_back_to_name_match() {
    let e = env();
    let mut c = e.reference.clone();
    c.space.pois[1].target_url = "https://en.wikipedia.org/wiki/Glyptodont".into();
    // p2's page is no longer targeted by the candidate's concrete layer.
    close(cells(&e, &c), [47.0 / 48.0, 11.0 / 12.0, 11.0 / 12.0, 11.0 / 12.0, 1.0]);
}

#[test]
fn equivalent_anchor_counts_as_positioned() {
    let e = env();
    let mut c = e.reference.clone();
    c.layers[0].augmenters[0].anchor = XPathExpr::parse("//div[@class='mw-body-content']").unwrap();
    close(cells(&e, &c), [1.0; 5]);
    c.layers[0].augmenters[0].anchor = XPathExpr::parse("//div[@class='mw-parser-output']").unwrap();
    close(cells(&e, &c), [1.0, 0.5, 1.0, 1.0, 1.0]);
}

#[test]
fn wrong_binding_and_missing_nav() {
    let e = env();
    let mut c = e.reference.clone();
    c.layers[0].augmenters[0].params.insert("description".into(), Binding::literal("A fossil."));
    c.layers[0].augmenters.truncate(1);
    close(cells(&e, &c), [1.0, 0.5, 0.0, 1.0, 1.0]);
}

#[test]
fn empty_candidate_scores_zero() {
    let e = env();
    let c = MobileAppSpec::named("Nothing");
    close(cells(&e, &c), [0.0; 5]);
}

#[test]
fn rubric_must_be_meaningful() {
    let e = env();
    let mut rubric = Rubric::from_reference(e.reference.clone());
    rubric.expected_link_count = 0;
    let env = GradeEnv { corpus: &e.corpus, cache: &e.cache };
    let err = grade(&e.reference, &rubric, &env).unwrap_err();
    assert_eq!(err.key(), "grade.rubric-mismatch");
    let mut rubric = Rubric::from_reference(e.reference.clone());
    rubric.reference.space.pois[0].name.clear();
    assert!(matches!(grade(&e.reference, &rubric, &env), Err(GradeError::RubricMismatch(Some(_)))));
}
