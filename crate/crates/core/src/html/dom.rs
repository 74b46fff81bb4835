//! Arena-backed mutable document tree.

use serde::{Deserialize, Serialize};

/// Prefix shared by every attribute the engine writes into pages.
pub const MARKER_PREFIX: &str = "data-mowa-";
/// Layer id carried by every inserted top-level element.
pub const LAYER_MARKER: &str = "data-mowa-layer";
/// Augmenter kind carried by every inserted top-level element.
pub const KIND_MARKER: &str = "data-mowa-kind";
/// Layer id on a pre-existing element whose attributes were patched.
pub const PATCH_MARKER: &str = "data-mowa-patch-layer";

pub const VOID_ELEMENTS: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param",
    "source", "track", "wbr",
];

pub fn is_void(name: &str) -> bool {
    VOID_ELEMENTS.contains(&name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    pub name: String,
    pub attrs: Vec<(String, String)>,
}

impl Element {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), attrs: Vec::new() }
    }

    pub fn with_attr(mut self, name: &str, value: impl Into<String>) -> Self {
        self.set_attr(name, value);
        self
    }

    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }

    /// Sets an attribute, keeping its slot when it already exists.
    pub fn set_attr(&mut self, name: &str, value: impl Into<String>) {
        let value = value.into();
        match self.attrs.iter_mut().find(|(k, _)| k == name) {
            Some(slot) => slot.1 = value,
            None => self.attrs.push((name.to_string(), value)),
        }
    }

    pub fn remove_attr(&mut self, name: &str) -> Option<String> {
        let idx = self.attrs.iter().position(|(k, _)| k == name)?;
        Some(self.attrs.remove(idx).1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Document,
    Element(Element),
    Text(String),
    Comment(String),
}

#[derive(Debug, Clone)]
pub(crate) struct Node {
    pub(crate) kind: NodeKind,
    pub(crate) parent: Option<NodeId>,
    pub(crate) children: Vec<NodeId>,
}

/// Detached subtree used to build fragments before insertion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FragmentNode {
    Element {
        name: String,
        attrs: Vec<(String, String)>,
        children: Vec<FragmentNode>,
    },
    Text(String),
}

impl FragmentNode {
    pub fn element(name: &str, attrs: &[(&str, &str)], children: Vec<FragmentNode>) -> Self {
        FragmentNode::Element {
            name: name.to_string(),
            attrs: attrs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            children,
        }
    }

    pub fn text(s: impl Into<String>) -> Self {
        FragmentNode::Text(s.into())
    }
}

/// A parsed page. Node 0 is the document node; its single element child is
/// the root element.
#[derive(Debug, Clone)]
pub struct Document {
    pub(crate) nodes: Vec<Node>,
    pub doctype: Option<String>,
    pub source_url: Option<String>,
    /// Children displaced by `replace_children` insertions, kept so that
    /// stripping the layer can put them back.
    pub(crate) displaced: Vec<Displaced>,
}

#[derive(Debug, Clone)]
pub(crate) struct Displaced {
    pub(crate) anchor: NodeId,
    pub(crate) layer: String,
    pub(crate) children: Vec<NodeId>,
}

impl Document {
    /// A document holding only an empty root element named `root_name`.
    pub fn with_root(root_name: &str) -> Self {
        let mut doc = Document {
            nodes: vec![Node { kind: NodeKind::Document, parent: None, children: Vec::new() }],
            doctype: None,
            source_url: None,
            displaced: Vec::new(),
        };
        let root = doc.alloc(NodeKind::Element(Element::new(root_name)));
        doc.append_child(doc.document_node(), root);
        doc
    }

    pub fn document_node(&self) -> NodeId {
        NodeId(0)
    }

    pub fn root(&self) -> NodeId {
        self.nodes[0].children[0]
    }

    pub fn kind(&self, id: NodeId) -> &NodeKind {
        &self.nodes[id.0].kind
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id.0].parent
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id.0].children
    }

    pub fn element(&self, id: NodeId) -> Option<&Element> {
        match &self.nodes[id.0].kind {
            NodeKind::Element(e) => Some(e),
            _ => None,
        }
    }

    pub fn element_mut(&mut self, id: NodeId) -> Option<&mut Element> {
        match &mut self.nodes[id.0].kind {
            NodeKind::Element(e) => Some(e),
            _ => None,
        }
    }

    pub fn tag_name(&self, id: NodeId) -> Option<&str> {
        self.element(id).map(|e| e.name.as_str())
    }

    pub fn attr(&self, id: NodeId, name: &str) -> Option<&str> {
        self.element(id).and_then(|e| e.attr(name))
    }

    pub fn contains(&self, id: NodeId) -> bool {
        id.0 < self.nodes.len()
    }

    /// True when `id` is reachable from the document node.
    pub fn is_attached(&self, id: NodeId) -> bool {
        if !self.contains(id) {
            return false;
        }
        let mut cur = id;
        loop {
            if cur.0 == 0 {
                return true;
            }
            match self.nodes[cur.0].parent {
                Some(p) => cur = p,
                None => return false,
            }
        }
    }

    pub(crate) fn alloc(&mut self, kind: NodeKind) -> NodeId {
        self.nodes.push(Node { kind, parent: None, children: Vec::new() });
        NodeId(self.nodes.len() - 1)
    }

    pub(crate) fn append_child(&mut self, parent: NodeId, child: NodeId) {
        self.nodes[child.0].parent = Some(parent);
        self.nodes[parent.0].children.push(child);
    }

    pub(crate) fn insert_child_at(&mut self, parent: NodeId, index: usize, child: NodeId) {
        self.nodes[child.0].parent = Some(parent);
        self.nodes[parent.0].children.insert(index, child);
    }

    pub(crate) fn detach(&mut self, id: NodeId) {
        if let Some(p) = self.nodes[id.0].parent.take() {
            self.nodes[p.0].children.retain(|c| *c != id);
        }
    }

    /// Builds `frag` as a detached subtree and returns its top node.
    pub(crate) fn build(&mut self, frag: &FragmentNode) -> NodeId {
        match frag {
            FragmentNode::Text(t) => self.alloc(NodeKind::Text(t.clone())),
            FragmentNode::Element { name, attrs, children } => {
                let id = self.alloc(NodeKind::Element(Element {
                    name: name.clone(),
                    attrs: attrs.clone(),
                }));
                for c in children {
                    let cid = self.build(c);
                    self.append_child(id, cid);
                }
                id
            }
        }
    }

    /// Attached nodes in document (preorder) order, document node first.
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.document_node()];
        while let Some(id) = stack.pop() {
            out.push(id);
            for c in self.nodes[id.0].children.iter().rev() {
                stack.push(*c);
            }
        }
        out
    }

    pub fn descendants_or_self(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            out.push(n);
            for c in self.nodes[n.0].children.iter().rev() {
                stack.push(*c);
            }
        }
        out
    }

    /// Concatenated descendant text of `id`.
    pub fn text_content(&self, id: NodeId) -> String {
        let mut out = String::new();
        for n in self.descendants_or_self(id) {
            if let NodeKind::Text(t) = &self.nodes[n.0].kind {
                out.push_str(t);
            }
        }
        out
    }

    /// Attached element count; handy in tests and logs.
    pub fn element_count(&self) -> usize {
        self.preorder()
            .into_iter()
            .filter(|id| matches!(self.kind(*id), NodeKind::Element(_)))
            .count()
    }
}

/// Node-by-node comparison of two documents, ignoring `data-mowa-*`
/// attributes. Adjacent text nodes are compared after merging.
pub fn isomorphic(a: &Document, b: &Document) -> bool {
    fn norm_children(doc: &Document, id: NodeId) -> Vec<Normalized<'_>> {
        let mut out: Vec<Normalized<'_>> = Vec::new();
        for c in doc.children(id) {
            match doc.kind(*c) {
                NodeKind::Text(t) => {
                    if let Some(Normalized::Text(prev)) = out.last_mut() {
                        prev.push_str(t);
                    } else {
                        out.push(Normalized::Text(t.clone()));
                    }
                }
                NodeKind::Comment(t) => out.push(Normalized::Comment(t)),
                NodeKind::Element(_) => out.push(Normalized::Element(*c)),
                NodeKind::Document => {}
            }
        }
        out
    }
    enum Normalized<'a> {
        Text(String),
        Comment(&'a str),
        Element(NodeId),
    }
    fn eq_node(a: &Document, an: NodeId, b: &Document, bn: NodeId) -> bool {
        let (Some(ea), Some(eb)) = (a.element(an), b.element(bn)) else {
            return false;
        };
        let keep = |attrs: &Vec<(String, String)>| -> Vec<(String, String)> {
            attrs.iter().filter(|(k, _)| !k.starts_with(MARKER_PREFIX)).cloned().collect()
        };
        if ea.name != eb.name || keep(&ea.attrs) != keep(&eb.attrs) {
            return false;
        }
        eq_children(a, an, b, bn)
    }
    fn eq_children(a: &Document, an: NodeId, b: &Document, bn: NodeId) -> bool {
        let ca = norm_children(a, an);
        let cb = norm_children(b, bn);
        ca.len() == cb.len()
            && ca.iter().zip(cb.iter()).all(|pair| match pair {
                (Normalized::Text(x), Normalized::Text(y)) => x == y,
                (Normalized::Comment(x), Normalized::Comment(y)) => x == y,
                (Normalized::Element(x), Normalized::Element(y)) => eq_node(a, *x, b, *y),
                _ => false,
            })
    }
    a.doctype == b.doctype && eq_children(a, a.document_node(), b, b.document_node())
}
