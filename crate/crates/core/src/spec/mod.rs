//! Application data model, the `mowa-app` XML format, validation and
//! binding resolution.

mod binding;
mod model;
mod validate;
mod xml;

use thiserror::Error;

pub use binding::{resolve_binding, BindingError};
pub use model::*;
pub use validate::{
    stage_of_path, validate_spec, validate_spec_against, Severity, ValidationIssue,
    ValidationReport,
};
pub use xml::{parse_spec, serialize_spec};
pub(crate) use xml::write_canonical;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("XML syntax error at {line}:{column}: {detail}")]
    XmlSyntax { line: u32, column: u32, detail: String },
    #[error("schema violation at {0}")]
    SchemaViolation(String),
    #[error("dangling reference to `{0}`")]
    DanglingReference(String),
    #[error("spec has validation errors: {}", .0.error_keys().join(", "))]
    InvalidSpec(ValidationReport),
}

impl SpecError {
    pub fn key(&self) -> &'static str {
        match self {
            SpecError::XmlSyntax { .. } => "spec.xml-syntax",
            SpecError::SchemaViolation(_) => "spec.schema-violation",
            SpecError::DanglingReference(_) => "spec.dangling-reference",
            SpecError::InvalidSpec(_) => "spec.invalid",
        }
    }

    pub fn args(&self) -> Vec<(&'static str, String)> {
        match self {
            SpecError::XmlSyntax { detail, .. } => vec![("detail", detail.clone())],
            SpecError::SchemaViolation(p) => vec![("path", p.clone())],
            SpecError::DanglingReference(id) => vec![("id", id.clone())],
            SpecError::InvalidSpec(_) => vec![],
        }
    }
}
