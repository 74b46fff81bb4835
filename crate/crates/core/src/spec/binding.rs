use thiserror::Error;

use super::model::*;
use crate::extract::{extract, ExtractCache, ExtractError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BindingError {
    #[error("binding needs a point of interest but none is in context")]
    MissingPoiContext,
    #[error("unknown property `{0}`")]
    UnknownProp(String),
    #[error("extraction of {xpath} from {url} failed: {source}")]
    ExtractionFailed { url: String, xpath: String, source: ExtractError },
}

fn extract_source(src: &ExtractSource, cache: &ExtractCache) -> Result<String, BindingError> {
    extract(&src.url, &src.xpath, &src.mode, cache).map_err(|source| BindingError::ExtractionFailed {
        url: src.url.clone(),
        xpath: src.xpath.to_string(),
        source,
    })
}

/// Resolves `b` to a literal string. A PoI without a `code` binds the empty
/// string for `poi.code`.
pub fn resolve_binding(
    spec: &MobileAppSpec,
    b: &Binding,
    poi: Option<&str>,
    cache: &ExtractCache,
) -> Result<String, BindingError> {
    let poi = || poi.and_then(|id| spec.poi(id)).ok_or(BindingError::MissingPoiContext);
    match b {
        Binding::Literal(v) => Ok(v.clone()),
        Binding::PoiField(field) => {
            let p = poi()?;
            Ok(match field {
                PoiField::Name => p.name.clone(),
                PoiField::TargetUrl => p.target_url.clone(),
                PoiField::Code => p.code.clone().unwrap_or_default(),
            })
        }
        Binding::PoiProp(name) => match poi()?.props.get(name) {
            None => Err(BindingError::UnknownProp(name.clone())),
            Some(PropertySource::Literal { value }) => Ok(value.clone()),
            Some(PropertySource::Extract(src)) => extract_source(src, cache),
        },
        Binding::ExtractRef(src) => extract_source(src, cache),
    }
}
