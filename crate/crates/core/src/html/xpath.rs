//! A small XPath subset: absolute location paths over the child and
//! descendant axes, name / `*` / `text()` node tests, positional and
//! attribute-equality predicates, and an optional trailing `@attr`.
//!
//! ```text
//! path      := sep step (sep step)* ("/@" name)?
//! sep       := "/" | "//"
//! step      := ("*" | "text()" | name) pred*
//! pred      := "[" (integer | "@" name "=" quoted) "]"
//! ```
//!
//! Anything outside the grammar is a parse error.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::dom::{Document, NodeId, NodeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Child,
    Descendant,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeTest {
    Name(String),
    AnyElement,
    Text,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Predicate {
    /// 1-based position among the candidates selected so far.
    Position(usize),
    AttrEquals(String, String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub axis: Axis,
    pub test: NodeTest,
    pub predicates: Vec<Predicate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid xpath `{expr}` at offset {offset}: {reason}")]
pub struct XPathError {
    pub expr: String,
    pub offset: usize,
    pub reason: String,
}

/// A parsed expression; keeps its source text for display and
/// serialization.
#[derive(Debug, Clone)]
pub struct XPathExpr {
    source: String,
    steps: Vec<Step>,
    attribute: Option<String>,
}

impl PartialEq for XPathExpr {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

impl Eq for XPathExpr {}

impl fmt::Display for XPathExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl FromStr for XPathExpr {
    type Err = XPathError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        XPathExpr::parse(s)
    }
}

impl Serialize for XPathExpr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for XPathExpr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        XPathExpr::parse(&s).map_err(serde::de::Error::custom)
    }
}

impl XPathExpr {
    pub fn parse(src: &str) -> Result<Self, XPathError> {
        Parser { src, pos: 0 }.parse()
    }

    pub fn as_str(&self) -> &str {
        &self.source
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    /// Trailing `@name` selector, if any.
    pub fn attribute(&self) -> Option<&str> {
        self.attribute.as_deref()
    }

    /// Evaluates against `doc`, returning matches in document order. With a
    /// trailing attribute selector, only elements carrying it are returned.
    pub fn eval(&self, doc: &Document) -> Vec<NodeId> {
        eval_xpath(doc, self)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, reason: impl Into<String>) -> XPathError {
        XPathError { expr: self.src.to_string(), offset: self.pos, reason: reason.into() }
    }

    fn rest(&self) -> &str {
        &self.src[self.pos..]
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.rest().starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn name(&mut self) -> Option<String> {
        let rest = self.rest();
        let len = rest
            .char_indices()
            .find(|(i, c)| {
                !(c.is_ascii_alphanumeric() || *c == '_' || (*i > 0 && matches!(c, '-' | '.' | ':')))
            })
            .map_or(rest.len(), |(i, _)| i);
        if len == 0 || !rest.as_bytes()[0].is_ascii_alphabetic() && rest.as_bytes()[0] != b'_' {
            return None;
        }
        let n = rest[..len].to_ascii_lowercase();
        self.pos += len;
        Some(n)
    }

    fn parse(mut self) -> Result<XPathExpr, XPathError> {
        let mut steps = Vec::new();
        let mut attribute = None;
        if self.src.trim() != self.src {
            return Err(self.err("surrounding whitespace"));
        }
        loop {
            let axis = if self.eat("//") {
                Axis::Descendant
            } else if self.eat("/") {
                Axis::Child
            } else if self.pos == self.src.len() && !steps.is_empty() {
                break;
            } else {
                return Err(self.err("expected `/` or `//`"));
            };
            if axis == Axis::Child && !steps.is_empty() && self.eat("@") {
                attribute = Some(self.name().ok_or_else(|| self.err("expected attribute name"))?);
                if self.pos != self.src.len() {
                    return Err(self.err("attribute selector must be last"));
                }
                break;
            }
            let test = if self.eat("*") {
                NodeTest::AnyElement
            } else if self.eat("text()") {
                NodeTest::Text
            } else {
                NodeTest::Name(self.name().ok_or_else(|| self.err("expected node test"))?)
            };
            let mut predicates = Vec::new();
            while self.eat("[") {
                predicates.push(self.predicate()?);
                if !self.eat("]") {
                    return Err(self.err("expected `]`"));
                }
            }
            steps.push(Step { axis, test, predicates });
            if self.pos == self.src.len() {
                break;
            }
        }
        if steps.iter().take(steps.len().saturating_sub(1)).any(|s| s.test == NodeTest::Text) {
            return Err(XPathError {
                expr: self.src.to_string(),
                offset: 0,
                reason: "text() must be the last step".into(),
            });
        }
        Ok(XPathExpr { source: self.src.to_string(), steps, attribute })
    }

    fn predicate(&mut self) -> Result<Predicate, XPathError> {
        if self.eat("@") {
            let name = self.name().ok_or_else(|| self.err("expected attribute name"))?;
            if !self.eat("=") {
                return Err(self.err("expected `=`"));
            }
            let quote = match self.rest().chars().next() {
                Some(q @ ('\'' | '"')) => q,
                _ => return Err(self.err("expected quoted value")),
            };
            self.pos += 1;
            let end = self.rest().find(quote).ok_or_else(|| self.err("unterminated string"))?;
            let value = self.rest()[..end].to_string();
            self.pos += end + 1;
            Ok(Predicate::AttrEquals(name, value))
        } else {
            let digits: String = self.rest().chars().take_while(char::is_ascii_digit).collect();
            if digits.is_empty() {
                return Err(self.err("unsupported predicate"));
            }
            self.pos += digits.len();
            let n: usize = digits.parse().map_err(|_| self.err("position out of range"))?;
            if n == 0 {
                return Err(self.err("positions are 1-based"));
            }
            Ok(Predicate::Position(n))
        }
    }
}

fn node_matches(doc: &Document, id: NodeId, test: &NodeTest) -> bool {
    match (doc.kind(id), test) {
        (NodeKind::Element(e), NodeTest::Name(n)) => e.name == *n,
        (NodeKind::Element(_), NodeTest::AnyElement) => true,
        (NodeKind::Text(_), NodeTest::Text) => true,
        _ => false,
    }
}

/// Applies a step's node test and predicates to the children of `parent`.
fn select_children(doc: &Document, parent: NodeId, step: &Step) -> Vec<NodeId> {
    let mut selected: Vec<NodeId> = doc
        .children(parent)
        .iter()
        .copied()
        .filter(|c| node_matches(doc, *c, &step.test))
        .collect();
    for pred in &step.predicates {
        selected = match pred {
            Predicate::Position(n) => selected.get(n - 1).copied().into_iter().collect(),
            Predicate::AttrEquals(name, value) => selected
                .into_iter()
                .filter(|c| doc.attr(*c, name) == Some(value.as_str()))
                .collect(),
        };
    }
    selected
}

pub fn eval_xpath(doc: &Document, expr: &XPathExpr) -> Vec<NodeId> {
    let order: HashMap<NodeId, usize> =
        doc.preorder().into_iter().enumerate().map(|(i, id)| (id, i)).collect();
    let mut context = vec![doc.document_node()];
    for step in &expr.steps {
        let mut next = Vec::new();
        for ctx in &context {
            let bases = match step.axis {
                Axis::Child => vec![*ctx],
                Axis::Descendant => doc.descendants_or_self(*ctx),
            };
            for base in bases {
                next.extend(select_children(doc, base, step));
            }
        }
        next.sort_by_key(|id| order[id]);
        next.dedup();
        context = next;
        if context.is_empty() {
            break;
        }
    }
    if let Some(attr) = &expr.attribute {
        context.retain(|id| doc.attr(*id, attr).is_some());
    }
    context
}
