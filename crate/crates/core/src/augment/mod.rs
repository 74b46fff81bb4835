//! Augmenter catalog, suggestion, rendering and layer application.

mod catalog;
mod render;

use thiserror::Error;

pub use catalog::*;
pub use render::*;

use crate::extract::ExtractCache;
use crate::html::{insert_fragment, strip_augmentations, Document, DomError};
use crate::spec::{resolve_binding, BindingError, Layer, MobileAppSpec};
use crate::weaver::TourState;

/// Everything a layer's bindings and renders may read.
#[derive(Debug, Clone, Copy)]
pub struct BindingContext<'a> {
    pub spec: &'a MobileAppSpec,
    pub cache: &'a ExtractCache,
    pub poi: Option<&'a str>,
    pub band: Option<&'a str>,
    pub value_label: Option<&'a str>,
    pub tour: Option<&'a TourState>,
}

impl<'a> BindingContext<'a> {
    pub fn new(spec: &'a MobileAppSpec, cache: &'a ExtractCache) -> Self {
        BindingContext { spec, cache, poi: None, band: None, value_label: None, tour: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LayerError {
    #[error("augmenter {index}: {source}")]
    Binding { index: usize, param: String, source: Box<BindingError> },
    #[error("augmenter {index}: {source}")]
    Render { index: usize, source: RenderError },
    #[error("augmenter {index}: {source}")]
    Insert { index: usize, source: DomError },
}

/// An augmenter whose anchor matched nothing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnchorMiss {
    /// 1-based position in the layer.
    pub index: usize,
    pub anchor: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LayerOutcome {
    pub applied: usize,
    pub misses: Vec<AnchorMiss>,
}

/// Strips the layer's earlier output, then renders and inserts each
/// augmenter at the first node its anchor selects. On error `doc` is left
/// exactly as it was.
pub fn apply_layer(doc: &mut Document, layer: &Layer, ctx: &BindingContext<'_>) -> Result<LayerOutcome, LayerError> {
    let mut work = doc.clone();
    strip_augmentations(&mut work, Some(&layer.id));
    let mut outcome = LayerOutcome::default();
    for (i, aug) in layer.augmenters.iter().enumerate() {
        let index = i + 1;
        let mut params = ResolvedParams::new();
        for (name, b) in &aug.params {
            let v = resolve_binding(ctx.spec, b, ctx.poi, ctx.cache)
                .map_err(|source| LayerError::Binding { index, param: name.clone(), source: Box::new(source) })?;
            params.insert(name.clone(), v);
        }
        let rctx = RenderContext {
            layer_id: &layer.id,
            locale: &ctx.spec.locale,
            tour: ctx.tour,
            band: ctx.band,
            value_label: ctx.value_label,
        };
        let frag = render(&aug.kind, &params, &rctx).map_err(|source| LayerError::Render { index, source })?;
        let Some(&anchor) = aug.anchor.eval(&work).first() else {
            outcome.misses.push(AnchorMiss { index, anchor: aug.anchor.to_string() });
            continue;
        };
        insert_fragment(&mut work, anchor, aug.position, &frag)
            .map_err(|source| LayerError::Insert { index, source })?;
        outcome.applied += 1;
    }
    *doc = work;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::html::{isomorphic, parse_html, serialize_html, InsertPosition, XPathExpr};
    use crate::spec::{AugmenterInstance, Binding, LayerTarget};
    use std::collections::BTreeMap;

    fn layer(anchor: &str) -> Layer {
        Layer {
            id: "L".into(),
            target: LayerTarget::Pattern("*".into()),
            augmenters: vec![AugmenterInstance {
                kind: TEXT_INJECTOR.into(),
                anchor: XPathExpr::parse(anchor).unwrap(),
                position: InsertPosition::LastChild,
                params: BTreeMap::from([("text".into(), Binding::literal("hello"))]),
            }],
        }
    }

    #[test]
    fn idempotent_and_reversible() {
        let spec = MobileAppSpec::named("T");
        let cache = ExtractCache::empty();
        let ctx = BindingContext::new(&spec, &cache);
        let original = parse_html(b"<body><main><p>x</p></main></body>", None);
        let mut doc = original.clone();
        apply_layer(&mut doc, &layer("//main"), &ctx).unwrap();
        let once = serialize_html(&doc);
        apply_layer(&mut doc, &layer("//main"), &ctx).unwrap();
        assert_eq!(serialize_html(&doc), once);
        strip_augmentations(&mut doc, None);
        assert!(isomorphic(&doc, &original));
    }

    #[test]
    fn anchor_miss_is_a_warning() {
        let spec = MobileAppSpec::named("T");
        let cache = ExtractCache::empty();
        let ctx = BindingContext::new(&spec, &cache);
        let original = parse_html(b"<body><p>x</p></body>", None);
        let mut doc = original.clone();
        let out = apply_layer(&mut doc, &layer("/html/body/nav"), &ctx).unwrap();
        assert_eq!(out.applied, 0);
        assert_eq!(out.misses, vec![AnchorMiss { index: 1, anchor: "/html/body/nav".into() }]);
        assert_eq!(serialize_html(&doc), serialize_html(&original));
    }

    #[test]
    fn binding_error_leaves_doc_untouched() {
        let spec = MobileAppSpec::named("T");
        let cache = ExtractCache::empty();
        let ctx = BindingContext::new(&spec, &cache);
        let mut l = layer("//main");
        l.augmenters.insert(0, l.augmenters[0].clone());
        l.augmenters[1].params.insert("text".into(), Binding::from_bind(Some("poi.name"), None).unwrap());
        let original = parse_html(b"<body><main></main></body>", None);
        let mut doc = original.clone();
        let err = apply_layer(&mut doc, &l, &ctx).unwrap_err();
        assert!(matches!(err, LayerError::Binding { index: 2, ref source, .. } if **source == BindingError::MissingPoiContext));
        assert_eq!(serialize_html(&doc), serialize_html(&original));
    }
}
