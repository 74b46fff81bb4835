//! Randomized authoring sequences checked against a simple gating model.

use proptest::prelude::*;
use serde_json::{json, Value};

use mowa_core::parse_spec;
use mowa_core::platform::{Platform, PlatformError, Store, STAGES};
use mowa_core::{ExtractCache, PageCorpus};

const PAGE: &str = "https://site.example/a";

fn payload(stage: u32, valid: bool) -> Value {
    match (stage, valid) {
        (1, true) => json!({"name": "Demo"}),
        (1, false) => json!({"name": ""}),
        (2, true) => json!({"context_types": ["location"]}),
        (2, false) => json!({"context_types": []}),
        (3, true) => json!({"sensors": [{"id": "qr", "kind": "qr", "context_type": "location"}]}),
        (3, false) => json!({"sensors": [{"id": "qr", "kind": "qr", "context_type": "noise"}]}),
        (4, true) => json!({"space": {"kind": "floorplan", "image_url": "p.png", "width": 10.0, "height": 10.0,
            "pois": [{"id": "p1", "name": "One", "position": {"x": 1.0, "y": 1.0}, "target_url": PAGE, "code": "c"}]}}),
        (4, false) => json!({"space": {"kind": "floorplan", "image_url": "p.png", "width": 10.0, "height": 10.0,
            "pois": [{"id": "p1", "name": "One", "position": {"x": 99.0, "y": 1.0}, "target_url": PAGE}]}}),
        (5, true) => json!({"layers": [{"id": "l", "target": {"url": "poi:target-url"}, "augmenters": [
            {"kind": "text-injector", "anchor": "//main", "position": "last_child", "params": {"text": {"value": "hi"}}}]}]}),
        (5, false) => json!({"layers": []}),
        (6, true) => json!({}),
        (6, false) => json!({"rules": [{"sensor_id": "qr", "layer_id": "l"}, {"sensor_id": "qr", "layer_id": "l"}]}),
        (n, _) => json!({"stage": n}),
    }
}

fn platform() -> (tempfile::TempDir, Platform) {
    let dir = tempfile::tempdir().unwrap();
    let corpus = PageCorpus::from_pages([(PAGE, "<html><body><main></main></body></html>")]);
    let store = Store::open(dir.path()).unwrap();
    (dir, Platform::new(store, corpus, ExtractCache::empty(), "en"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gating_matches_model(calls in prop::collection::vec((0u32..8, any::<bool>()), 1..40)) {
        let (_d, p) = platform();
        let id = p.create_session(None).unwrap().session.id;
        let mut model = [false; STAGES as usize];
        for (stage, valid) in calls {
            let result = p.submit_stage(&id, stage, &payload(stage, valid));
            if !(1..=6).contains(&stage) {
                prop_assert!(matches!(result, Err(PlatformError::StageUnknown(_))));
                continue;
            }
            let n = stage as usize;
            let gated = model[..n - 1].iter().any(|c| !c);
            match result {
                Err(PlatformError::StageOrder { .. }) => prop_assert!(gated),
                Ok(out) => {
                    prop_assert!(!gated);
                    model[n - 1] = out.report.ok;
                    for later in model.iter_mut().skip(n) {
                        *later = false;
                    }
                }
                Err(e) => {
                    // Refused payloads leave the session untouched.
                    prop_assert!(!gated);
                    prop_assert_eq!(e.key(), "session.payload-invalid");
                }
            }
            let view = p.session(&id).unwrap();
            prop_assert_eq!(view.session.complete, model);
            // No completed stage ever sits after an incomplete one.
            let first_gap = model.iter().position(|c| !c).unwrap_or(6);
            prop_assert!(model[first_gap..].iter().all(|c| !c));
            prop_assert!(parse_spec(view.xml.as_bytes()).is_ok());
            prop_assert_eq!(p.export(&id).is_ok(), model.iter().all(|c| *c));
        }
    }
}
