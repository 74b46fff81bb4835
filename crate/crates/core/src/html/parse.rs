//! Lenient, deterministic HTML parser.
//!
//! The recovery rules are a fixed, small set rather than the HTML5 tree
//! construction algorithm:
//! - the root is always an `html` element; a synthetic one is created when
//!   the input has none, and an `<html>` tag only contributes attributes;
//! - opening `p`, `li`, `tr`, `td` or `th` closes an open sibling of the
//!   same family sitting on top of the stack;
//! - void elements never get children and their end tags are ignored;
//! - `script` and `style` hold raw text, `title` and `textarea` hold
//!   escapable text without tags;
//! - only `&amp; &lt; &gt; &quot; &apos;` are decoded, other entities stay
//!   literal;
//! - end tags without a matching open element are ignored.

use super::dom::{is_void, Document, Element, NodeId, NodeKind};

const RAW_TEXT: &[&str] = &["script", "style"];
const ESCAPABLE_RAW_TEXT: &[&str] = &["title", "textarea"];

pub fn parse_html(bytes: &[u8], source_url: Option<&str>) -> Document {
    let input = String::from_utf8_lossy(bytes);
    let mut builder = TreeBuilder::new();
    builder.run(&input);
    let mut doc = builder.doc;
    doc.source_url = source_url.map(str::to_string);
    doc
}

/// Decodes the five predefined entities; anything else stays literal.
pub fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(pos) = rest.find('&') {
        out.push_str(&rest[..pos]);
        rest = &rest[pos..];
        let table = [("&amp;", '&'), ("&lt;", '<'), ("&gt;", '>'), ("&quot;", '"'), ("&apos;", '\'')];
        match table.iter().find(|(ent, _)| rest.starts_with(ent)) {
            Some((ent, ch)) => {
                out.push(*ch);
                rest = &rest[ent.len()..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

struct TreeBuilder {
    doc: Document,
    stack: Vec<NodeId>,
    /// Set once an explicit `<html>` start tag or any content has been seen.
    root_started: bool,
    after_html: bool,
}

impl TreeBuilder {
    fn new() -> Self {
        let doc = Document::with_root("html");
        let root = doc.root();
        Self { doc, stack: vec![root], root_started: false, after_html: false }
    }

    fn current(&self) -> NodeId {
        *self.stack.last().expect("root never popped")
    }

    fn current_name(&self) -> &str {
        self.doc.tag_name(self.current()).unwrap_or("")
    }

    fn run(&mut self, input: &str) {
        let bytes = input.as_bytes();
        let mut i = 0usize;
        while i < bytes.len() {
            if bytes[i] == b'<' {
                let next = bytes.get(i + 1).copied();
                if input[i..].starts_with("<!--") {
                    let body_start = i + 4;
                    let (body, end) = match input[body_start..].find("-->") {
                        Some(p) => (&input[body_start..body_start + p], body_start + p + 3),
                        None => (&input[body_start..], bytes.len()),
                    };
                    self.comment(body);
                    i = end;
                    continue;
                }
                match next {
                    Some(b'!') | Some(b'?') => {
                        let end = find_byte(bytes, i, b'>').map_or(bytes.len(), |p| p + 1);
                        let inner = input[i + 2..end.saturating_sub(1).max(i + 2)].trim();
                        if next == Some(b'!')
                            && inner.len() >= 7
                            && inner[..7].eq_ignore_ascii_case("doctype")
                            && self.doc.doctype.is_none()
                        {
                            let rest = inner[7..].trim();
                            self.doc.doctype =
                                Some(if rest.is_empty() { "html".to_string() } else { rest.to_string() });
                        }
                        i = end;
                        continue;
                    }
                    Some(b'/') if bytes.get(i + 2).is_some_and(u8::is_ascii_alphabetic) => {
                        let (name, end) = read_name(input, i + 2);
                        let end = find_byte(bytes, end, b'>').map_or(bytes.len(), |p| p + 1);
                        self.end_tag(&name);
                        i = end;
                        continue;
                    }
                    Some(c) if c.is_ascii_alphabetic() => {
                        let (tag, end) = read_start_tag(input, i + 1);
                        i = end;
                        let name = tag.name.clone();
                        self.start_tag(tag);
                        if RAW_TEXT.contains(&name.as_str()) || ESCAPABLE_RAW_TEXT.contains(&name.as_str()) {
                            let (text, after) = read_raw_until_close(input, i, &name);
                            if !text.is_empty() {
                                let text = if RAW_TEXT.contains(&name.as_str()) {
                                    text.to_string()
                                } else {
                                    decode_entities(text)
                                };
                                self.text(&text);
                            }
                            self.end_tag(&name);
                            i = after;
                        }
                        continue;
                    }
                    _ => {}
                }
            }
            // Text run up to the next markup-looking '<'.
            let start = i;
            i += 1;
            while i < bytes.len() {
                if bytes[i] == b'<' {
                    let n = bytes.get(i + 1).copied();
                    if matches!(n, Some(b'!') | Some(b'?') | Some(b'/'))
                        || n.is_some_and(|c| c.is_ascii_alphabetic())
                    {
                        break;
                    }
                }
                i += 1;
            }
            self.text(&decode_entities(&input[start..i]));
        }
    }

    fn at_root_level(&self) -> bool {
        self.stack.len() == 1
    }

    fn text(&mut self, text: &str) {
        if text.is_empty() {
            return;
        }
        let whitespace = text.chars().all(char::is_whitespace);
        if whitespace && self.at_root_level() && (!self.root_started || self.after_html) {
            return;
        }
        self.root_started = true;
        let parent = self.current();
        if let Some(last) = self.doc.children(parent).last().copied() {
            if let NodeKind::Text(existing) = &mut self.doc.nodes[last.0].kind {
                existing.push_str(text);
                return;
            }
        }
        let id = self.doc.alloc(NodeKind::Text(text.to_string()));
        self.doc.append_child(parent, id);
    }

    fn comment(&mut self, body: &str) {
        self.root_started = true;
        let id = self.doc.alloc(NodeKind::Comment(body.to_string()));
        let parent = self.current();
        self.doc.append_child(parent, id);
    }

    fn start_tag(&mut self, tag: StartTag) {
        if tag.name == "html" {
            let root = self.doc.root();
            let el = self.doc.element_mut(root).expect("root is an element");
            for (k, v) in tag.attrs {
                if el.attr(&k).is_none() {
                    el.attrs.push((k, v));
                }
            }
            self.root_started = true;
            return;
        }
        self.root_started = true;
        self.auto_close(&tag.name);
        let void = is_void(&tag.name);
        let id = self.doc.alloc(NodeKind::Element(Element { name: tag.name, attrs: tag.attrs }));
        let parent = self.current();
        self.doc.append_child(parent, id);
        if !void {
            self.stack.push(id);
        }
    }

    fn auto_close(&mut self, opening: &str) {
        let pop_if = |b: &mut Self, names: &[&str]| {
            if b.stack.len() > 1 && names.contains(&b.current_name()) {
                b.stack.pop();
            }
        };
        match opening {
            "p" => pop_if(self, &["p"]),
            "li" => pop_if(self, &["li"]),
            "td" | "th" => pop_if(self, &["td", "th"]),
            "tr" => {
                pop_if(self, &["td", "th"]);
                pop_if(self, &["tr"]);
            }
            _ => {}
        }
    }

    fn end_tag(&mut self, name: &str) {
        if name == "html" {
            self.stack.truncate(1);
            self.after_html = true;
            return;
        }
        if is_void(name) {
            return;
        }
        if let Some(pos) = self.stack.iter().rposition(|id| self.doc.tag_name(*id) == Some(name)) {
            if pos > 0 {
                self.stack.truncate(pos);
            }
        }
    }
}

struct StartTag {
    name: String,
    attrs: Vec<(String, String)>,
}

fn find_byte(bytes: &[u8], from: usize, b: u8) -> Option<usize> {
    bytes[from.min(bytes.len())..].iter().position(|c| *c == b).map(|p| p + from)
}

fn is_name_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, b'-' | b'_' | b':' | b'.')
}

fn read_name(input: &str, start: usize) -> (String, usize) {
    let bytes = input.as_bytes();
    let mut end = start;
    while end < bytes.len() && is_name_char(bytes[end]) {
        end += 1;
    }
    (input[start..end].to_ascii_lowercase(), end)
}

fn read_start_tag(input: &str, start: usize) -> (StartTag, usize) {
    let bytes = input.as_bytes();
    let (name, mut i) = read_name(input, start);
    let mut attrs: Vec<(String, String)> = Vec::new();
    loop {
        while i < bytes.len() && (bytes[i].is_ascii_whitespace() || bytes[i] == b'/') {
            i += 1;
        }
        if i >= bytes.len() {
            break;
        }
        if bytes[i] == b'>' {
            i += 1;
            break;
        }
        let attr_start = i;
        while i < bytes.len()
            && !bytes[i].is_ascii_whitespace()
            && !matches!(bytes[i], b'=' | b'>' | b'/')
        {
            i += 1;
        }
        if i == attr_start {
            // Stray '=' or similar; skip it.
            i += 1;
            continue;
        }
        let attr_name = input[attr_start..i].to_ascii_lowercase();
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        let mut value = String::new();
        if i < bytes.len() && bytes[i] == b'=' {
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'"' || bytes[i] == b'\'') {
                let quote = bytes[i];
                let vstart = i + 1;
                let vend = find_byte(bytes, vstart, quote).unwrap_or(bytes.len());
                value = decode_entities(&input[vstart..vend]);
                i = (vend + 1).min(bytes.len());
            } else {
                let vstart = i;
                while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'>' {
                    i += 1;
                }
                value = decode_entities(&input[vstart..i]);
            }
        }
        if !attrs.iter().any(|(k, _)| *k == attr_name) {
            attrs.push((attr_name, value));
        }
    }
    (StartTag { name, attrs }, i)
}

/// Returns the raw content up to `</name` and the index past the end tag.
fn read_raw_until_close<'a>(input: &'a str, start: usize, name: &str) -> (&'a str, usize) {
    let lower = input[start..].to_ascii_lowercase();
    let needle = format!("</{name}");
    match lower.find(&needle) {
        Some(p) => {
            let content_end = start + p;
            let after = find_byte(input.as_bytes(), content_end, b'>').map_or(input.len(), |q| q + 1);
            (&input[start..content_end], after)
        }
        None => (&input[start..], input.len()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::html::serialize_html;

    fn names(doc: &Document, id: NodeId) -> Vec<String> {
        doc.children(id)
            .iter()
            .map(|c| match doc.kind(*c) {
                NodeKind::Element(e) => e.name.clone(),
                NodeKind::Text(t) => format!("#{t}"),
                NodeKind::Comment(_) => "!".into(),
                NodeKind::Document => "?".into(),
            })
            .collect()
    }

    #[test]
    fn paragraphs_auto_close() {
        let doc = parse_html(b"<p>a<p>b", None);
        assert_eq!(names(&doc, doc.root()), vec!["p", "p"]);
        assert_eq!(serialize_html(&doc), "<html><p>a</p><p>b</p></html>\n");
    }

    #[test]
    fn empty_input_gives_bare_root() {
        let doc = parse_html(b"", None);
        assert_eq!(doc.tag_name(doc.root()), Some("html"));
        assert!(doc.children(doc.root()).is_empty());
    }

    #[test]
    fn plain_text_lands_under_synthetic_root() {
        let doc = parse_html(b"just text", None);
        assert_eq!(names(&doc, doc.root()), vec!["#just text"]);
    }

    #[test]
    fn list_and_table_recovery() {
        let doc = parse_html(b"<ul><li>a<li>b</ul><table><tr><td>1<td>2<tr><th>3</table>", None);
        let ul = doc.children(doc.root())[0];
        assert_eq!(names(&doc, ul), vec!["li", "li"]);
        let table = doc.children(doc.root())[1];
        assert_eq!(names(&doc, table), vec!["tr", "tr"]);
        assert_eq!(names(&doc, doc.children(table)[0]), vec!["td", "td"]);
    }

    #[test]
    fn void_elements_have_no_children() {
        let doc = parse_html(b"<div><img src=a.png>text</img><br/>x</div>", None);
        let div = doc.children(doc.root())[0];
        assert_eq!(names(&doc, div), vec!["img", "#text", "br", "#x"]);
    }

    #[test]
    fn entities_basic_only() {
        let doc = parse_html(b"<p title=\"a&quot;b\">&lt;x&gt; &amp; &nbsp; &copy</p>", None);
        let p = doc.children(doc.root())[0];
        assert_eq!(doc.attr(p, "title"), Some("a\"b"));
        assert_eq!(doc.text_content(p), "<x> & &nbsp; &copy");
    }

    #[test]
    fn html_tag_contributes_attributes_only() {
        let doc = parse_html(b"<!DOCTYPE html>\n<html lang=en>\n<head><title>T &amp; U</title></head><body></body></html>\n", None);
        assert_eq!(doc.doctype.as_deref(), Some("html"));
        assert_eq!(doc.attr(doc.root(), "lang"), Some("en"));
        assert_eq!(names(&doc, doc.root()), vec!["#\n", "head", "body"]);
        let title = doc.children(doc.children(doc.root())[1])[0];
        assert_eq!(doc.text_content(title), "T & U");
    }

    #[test]
    fn script_is_raw() {
        let doc = parse_html(b"<script>if (a < b && c) {}</script>", None);
        let s = doc.children(doc.root())[0];
        assert_eq!(doc.text_content(s), "if (a < b && c) {}");
        assert_eq!(serialize_html(&doc), "<html><script>if (a < b && c) {}</script></html>\n");
    }

    #[test]
    fn stray_end_tags_ignored_and_attrs_deduped() {
        let doc = parse_html(b"</span><div a=1 a=2 B='x'>y</b></div>", None);
        let div = doc.children(doc.root())[0];
        let el = doc.element(div).unwrap();
        assert_eq!(el.attrs, vec![("a".into(), "1".into()), ("b".into(), "x".into())]);
        assert_eq!(doc.text_content(div), "y");
    }

    #[test]
    fn lone_less_than_is_text() {
        let doc = parse_html(b"<p>1 < 2</p>", None);
        let p = doc.children(doc.root())[0];
        assert_eq!(doc.text_content(p), "1 < 2");
    }
}
