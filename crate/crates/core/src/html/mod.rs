//! HTML documents: lenient parsing, an XPath subset, fragment insertion,
//! augmentation stripping and deterministic serialization.

mod dom;
mod parse;
mod serialize;
mod xpath;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use dom::Displaced;
pub use dom::{
    is_void, isomorphic, Document, Element, FragmentNode, NodeId, NodeKind, KIND_MARKER,
    LAYER_MARKER, MARKER_PREFIX, PATCH_MARKER, VOID_ELEMENTS,
};
pub use parse::{decode_entities, parse_html};
pub use serialize::{escape_attr, escape_text, serialize_html, serialize_node};
pub use xpath::{eval_xpath, Axis, NodeTest, Predicate, Step, XPathError, XPathExpr};

/// Where a fragment goes relative to its anchor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InsertPosition {
    Before,
    After,
    FirstChild,
    LastChild,
    ReplaceChildren,
}

impl InsertPosition {
    pub const ALL: [InsertPosition; 5] = [
        InsertPosition::Before,
        InsertPosition::After,
        InsertPosition::FirstChild,
        InsertPosition::LastChild,
        InsertPosition::ReplaceChildren,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InsertPosition::Before => "before",
            InsertPosition::After => "after",
            InsertPosition::FirstChild => "first_child",
            InsertPosition::LastChild => "last_child",
            InsertPosition::ReplaceChildren => "replace_children",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.as_str() == s)
    }
}

/// Attribute written onto pre-existing elements rather than inserted markup.
/// Names are restricted to the `data-mowa-` namespace so stripping can find
/// them again.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttrPatch {
    pub target: XPathExpr,
    pub name: String,
    pub value: String,
}

/// Markup produced by one augmenter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fragment {
    pub layer_id: String,
    pub kind: String,
    pub nodes: Vec<FragmentNode>,
    pub patches: Vec<AttrPatch>,
}

impl Fragment {
    /// Stamps both marker attributes onto each top-level element. Top-level
    /// text is dropped: it could not be stripped again.
    pub fn new(layer_id: &str, kind: &str, nodes: Vec<FragmentNode>) -> Self {
        let nodes = nodes
            .into_iter()
            .filter_map(|n| match n {
                FragmentNode::Element { name, mut attrs, children } => {
                    attrs.retain(|(k, _)| k != LAYER_MARKER && k != KIND_MARKER);
                    attrs.push((LAYER_MARKER.to_string(), layer_id.to_string()));
                    attrs.push((KIND_MARKER.to_string(), kind.to_string()));
                    Some(FragmentNode::Element { name, attrs, children })
                }
                FragmentNode::Text(_) => None,
            })
            .collect();
        Fragment { layer_id: layer_id.to_string(), kind: kind.to_string(), nodes, patches: Vec::new() }
    }

    pub fn with_patch(mut self, patch: AttrPatch) -> Self {
        self.patches.push(patch);
        self
    }

    /// Serialized form of the inserted nodes, used to compare renders.
    pub fn to_markup(&self) -> String {
        let mut doc = Document::with_root("fragment");
        let root = doc.root();
        for n in &self.nodes {
            let id = doc.build(n);
            doc.append_child(root, id);
        }
        let mut out = String::new();
        for c in doc.children(root) {
            out.push_str(&serialize_node(&doc, *c));
        }
        for p in &self.patches {
            out.push_str(&format!("\n<!-- patch {} {}=\"{}\" -->", p.target, p.name, p.value));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomError {
    #[error("anchor node is not attached to the document")]
    DetachedAnchor,
    #[error("cannot insert children into void element <{0}>")]
    VoidElementTarget(String),
    #[error("cannot insert a sibling of the document root")]
    RootSibling,
}

/// Inserts `frag` at `anchor`, then applies its attribute patches.
pub fn insert_fragment(
    doc: &mut Document,
    anchor: NodeId,
    position: InsertPosition,
    frag: &Fragment,
) -> Result<(), DomError> {
    if !doc.is_attached(anchor) || anchor == doc.document_node() {
        return Err(DomError::DetachedAnchor);
    }
    let parent = doc.parent(anchor).ok_or(DomError::DetachedAnchor)?;
    match position {
        InsertPosition::Before | InsertPosition::After => {
            if parent == doc.document_node() && !frag.nodes.is_empty() {
                return Err(DomError::RootSibling);
            }
        }
        _ => match doc.kind(anchor) {
            NodeKind::Element(e) if is_void(&e.name) => {
                return Err(DomError::VoidElementTarget(e.name.clone()))
            }
            NodeKind::Element(_) => {}
            _ => return Err(DomError::VoidElementTarget("#text".into())),
        },
    }
    let built: Vec<NodeId> = frag.nodes.iter().map(|n| doc.build(n)).collect();
    match position {
        InsertPosition::Before | InsertPosition::After => {
            let idx = doc.children(parent).iter().position(|c| *c == anchor).expect("attached");
            let base = if position == InsertPosition::Before { idx } else { idx + 1 };
            for (i, id) in built.into_iter().enumerate() {
                doc.insert_child_at(parent, base + i, id);
            }
        }
        InsertPosition::FirstChild => {
            for (i, id) in built.into_iter().enumerate() {
                doc.insert_child_at(anchor, i, id);
            }
        }
        InsertPosition::LastChild => {
            for id in built {
                doc.append_child(anchor, id);
            }
        }
        InsertPosition::ReplaceChildren => {
            let old = doc.children(anchor).to_vec();
            for c in &old {
                doc.detach(*c);
            }
            doc.displaced.push(Displaced { anchor, layer: frag.layer_id.clone(), children: old });
            for id in built {
                doc.append_child(anchor, id);
            }
        }
    }
    for patch in &frag.patches {
        for target in patch.target.eval(doc) {
            if let Some(el) = doc.element_mut(target) {
                el.set_attr(&patch.name, patch.value.clone());
                el.set_attr(PATCH_MARKER, frag.layer_id.clone());
            }
        }
    }
    Ok(())
}

/// Removes everything a layer (or every layer, when `layer_id` is `None`)
/// added: marked elements are detached and patched attributes dropped.
pub fn strip_augmentations(doc: &mut Document, layer_id: Option<&str>) {
    let in_scope = |v: Option<&str>| v.is_some_and(|v| layer_id.is_none_or(|l| l == v));
    let nodes = doc.preorder();
    let mut doomed = Vec::new();
    let mut patched = Vec::new();
    for id in nodes {
        if let Some(el) = doc.element(id) {
            if in_scope(el.attr(LAYER_MARKER)) {
                doomed.push(id);
            } else if in_scope(el.attr(PATCH_MARKER)) {
                patched.push(id);
            }
        }
    }
    for id in doomed {
        doc.detach(id);
    }
    // Newest first, so stacked replacements unwind in order.
    let mut kept = Vec::new();
    for entry in std::mem::take(&mut doc.displaced).into_iter().rev() {
        if !in_scope(Some(&entry.layer)) {
            kept.push(entry);
            continue;
        }
        for c in entry.children {
            doc.append_child(entry.anchor, c);
        }
    }
    kept.reverse();
    doc.displaced = kept;
    for id in patched {
        if let Some(el) = doc.element_mut(id) {
            el.attrs.retain(|(k, _)| !k.starts_with(MARKER_PREFIX));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel(layer: &str) -> Fragment {
        Fragment::new(
            layer,
            "text-injector",
            vec![FragmentNode::element("div", &[("class", "mowa-text")], vec![FragmentNode::text("hi")])],
        )
    }

    fn first(doc: &Document, xp: &str) -> NodeId {
        XPathExpr::parse(xp).unwrap().eval(doc)[0]
    }

    #[test]
    fn after_places_next_sibling() {
        let mut doc = parse_html(b"<body><div id=a></div><div id=b></div></body>", None);
        let anchor = first(&doc, "/html/body/div[1]");
        insert_fragment(&mut doc, anchor, InsertPosition::After, &panel("L")).unwrap();
        let body = first(&doc, "/html/body");
        let kids = doc.children(body);
        assert_eq!(kids[0], anchor);
        assert_eq!(doc.attr(kids[1], LAYER_MARKER), Some("L"));
        assert_eq!(doc.attr(kids[2], "id"), Some("b"));
    }

    #[test]
    fn last_child_twice_with_strip_between_is_single() {
        let mut doc = parse_html(b"<body><p>x</p></body>", None);
        let body = first(&doc, "/html/body");
        insert_fragment(&mut doc, body, InsertPosition::LastChild, &panel("L")).unwrap();
        strip_augmentations(&mut doc, Some("L"));
        insert_fragment(&mut doc, body, InsertPosition::LastChild, &panel("L")).unwrap();
        let count = XPathExpr::parse("//div[@data-mowa-layer='L']").unwrap().eval(&doc).len();
        assert_eq!(count, 1);
    }

    #[test]
    fn replace_children_swaps_content() {
        let mut doc = parse_html(b"<div><p>1</p><p>2</p></div>", None);
        let div = first(&doc, "//div");
        insert_fragment(&mut doc, div, InsertPosition::ReplaceChildren, &panel("L")).unwrap();
        assert_eq!(doc.children(div).len(), 1);
        assert_eq!(serialize_node(&doc, div), "<div><div class=\"mowa-text\" data-mowa-layer=\"L\" data-mowa-kind=\"text-injector\">hi</div></div>");
    }

    #[test]
    fn void_and_detached_targets_rejected() {
        let mut doc = parse_html(b"<div><img src=x></div>", None);
        let img = first(&doc, "//img");
        assert_eq!(
            insert_fragment(&mut doc, img, InsertPosition::ReplaceChildren, &panel("L")),
            Err(DomError::VoidElementTarget("img".into()))
        );
        let div = first(&doc, "//div");
        doc.detach(div);
        assert_eq!(
            insert_fragment(&mut doc, div, InsertPosition::After, &panel("L")),
            Err(DomError::DetachedAnchor)
        );
    }

    #[test]
    fn strip_scoped_to_layer() {
        let src = b"<body><main></main></body>";
        let original = parse_html(src, None);
        let mut doc = original.clone();
        let main = first(&doc, "//main");
        insert_fragment(&mut doc, main, InsertPosition::FirstChild, &panel("L1")).unwrap();
        insert_fragment(&mut doc, main, InsertPosition::LastChild, &panel("L2")).unwrap();
        strip_augmentations(&mut doc, Some("L1"));
        let html = serialize_html(&doc);
        assert!(!html.contains("L1"));
        assert!(html.contains("data-mowa-layer=\"L2\""));
        strip_augmentations(&mut doc, None);
        assert!(isomorphic(&doc, &original));
        assert_eq!(serialize_html(&doc), serialize_html(&original));
    }

    #[test]
    fn strip_on_plain_page_is_noop() {
        let original = parse_html(b"<body><p data-x=1>t</p></body>", None);
        let mut doc = original.clone();
        strip_augmentations(&mut doc, None);
        assert_eq!(serialize_html(&doc), serialize_html(&original));
    }

    #[test]
    fn patches_are_reverted() {
        let original = parse_html(b"<body><video id=v src=a.mp4></video></body>", None);
        let mut doc = original.clone();
        let body = first(&doc, "/html/body");
        let frag = Fragment::new("vol", "media-volume-adapter", vec![]).with_patch(AttrPatch {
            target: XPathExpr::parse("//video").unwrap(),
            name: "data-mowa-volume".into(),
            value: "0.9".into(),
        });
        insert_fragment(&mut doc, body, InsertPosition::LastChild, &frag).unwrap();
        let v = first(&doc, "//video");
        assert_eq!(doc.attr(v, "data-mowa-volume"), Some("0.9"));
        strip_augmentations(&mut doc, Some("vol"));
        assert_eq!(serialize_html(&doc), serialize_html(&original));
    }
}
