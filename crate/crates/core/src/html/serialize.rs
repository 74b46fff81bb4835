use super::dom::{is_void, Document, NodeId, NodeKind};

/// Deterministic serialization: attributes in stored order, void elements
/// unclosed, minimal escaping, trailing newline.
pub fn serialize_html(doc: &Document) -> String {
    let mut out = String::new();
    if let Some(dt) = &doc.doctype {
        out.push_str("<!DOCTYPE ");
        out.push_str(dt);
        out.push_str(">\n");
    }
    for c in doc.children(doc.document_node()) {
        write_node(doc, *c, &mut out, false);
    }
    out.push('\n');
    out
}

/// Serializes one subtree without doctype or trailing newline.
pub fn serialize_node(doc: &Document, id: NodeId) -> String {
    let mut out = String::new();
    write_node(doc, id, &mut out, false);
    out
}

pub fn escape_text(s: &str, out: &mut String) {
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            c => out.push(c),
        }
    }
}

pub fn escape_attr(s: &str, out: &mut String) {
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            c => out.push(c),
        }
    }
}

fn write_node(doc: &Document, id: NodeId, out: &mut String, raw: bool) {
    match doc.kind(id) {
        NodeKind::Document => {
            for c in doc.children(id) {
                write_node(doc, *c, out, false);
            }
        }
        NodeKind::Text(t) => {
            if raw {
                out.push_str(t);
            } else {
                escape_text(t, out);
            }
        }
        NodeKind::Comment(c) => {
            out.push_str("<!--");
            out.push_str(c);
            out.push_str("-->");
        }
        NodeKind::Element(el) => {
            out.push('<');
            out.push_str(&el.name);
            for (k, v) in &el.attrs {
                out.push(' ');
                out.push_str(k);
                out.push_str("=\"");
                escape_attr(v, out);
                out.push('"');
            }
            out.push('>');
            if is_void(&el.name) {
                return;
            }
            let raw_children = matches!(el.name.as_str(), "script" | "style");
            for c in doc.children(id) {
                write_node(doc, *c, out, raw_children);
            }
            out.push_str("</");
            out.push_str(&el.name);
            out.push('>');
        }
    }
}
