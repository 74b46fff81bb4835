use std::collections::BTreeSet;
use std::sync::OnceLock;

use serde::Serialize;

use crate::spec::{ContextTypeKind, MobileAppSpec};

pub const POI_INFO_PANEL: &str = "poi-info-panel";
pub const HYPERMEDIA_NAV: &str = "hypermedia-nav";
pub const SCALAR_BADGE: &str = "scalar-badge";
pub const MEDIA_VOLUME_ADAPTER: &str = "media-volume-adapter";
pub const TEXT_INJECTOR: &str = "text-injector";

/// Prefix of the per-band parameters of `media-volume-adapter`.
pub const VOLUME_PARAM_PREFIX: &str = "volume:";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParamSpec {
    pub name: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AugmenterKind {
    pub id: String,
    pub required_params: Vec<ParamSpec>,
    pub optional_params: Vec<ParamSpec>,
    /// Context types this kind is tagged with; drives [`suggest`].
    pub compatible: BTreeSet<ContextTypeKind>,
    pub renders_tour_state: bool,
    /// One extra required `volume:<band-id>` parameter per declared band.
    pub per_band_params: bool,
}

fn param(name: &str, description: &str) -> ParamSpec {
    ParamSpec { name: name.into(), description: description.into() }
}

fn kind(
    id: &str,
    required: Vec<ParamSpec>,
    compatible: &[ContextTypeKind],
    renders_tour_state: bool,
    per_band_params: bool,
) -> AugmenterKind {
    AugmenterKind {
        id: id.into(),
        required_params: required,
        optional_params: Vec::new(),
        compatible: compatible.iter().copied().collect(),
        renders_tour_state,
        per_band_params,
    }
}

/// The built-in augmenter kinds, in a fixed order.
pub fn catalog() -> &'static [AugmenterKind] {
    use ContextTypeKind::*;
    static CATALOG: OnceLock<Vec<AugmenterKind>> = OnceLock::new();
    CATALOG.get_or_init(|| {
        vec![
            kind(
                POI_INFO_PANEL,
                vec![
                    param("title", "Heading of the panel"),
                    param("description", "Paragraph shown under the heading"),
                    param("image-url", "Picture shown in the panel"),
                ],
                &[Location],
                false,
                false,
            ),
            kind(HYPERMEDIA_NAV, vec![], &[Location], true, false),
            kind(
                SCALAR_BADGE,
                vec![param("label-prefix", "Text shown before the current value label")],
                &[Light, Noise, Time, Orientation],
                false,
                false,
            ),
            kind(
                MEDIA_VOLUME_ADAPTER,
                vec![param("media-xpath", "Media elements whose volume is adapted")],
                &[Noise],
                false,
                true,
            ),
            kind(
                TEXT_INJECTOR,
                vec![param("text", "Text to insert")],
                &[Location, Orientation, Light, Noise, Time],
                false,
                false,
            ),
        ]
    })
}

pub fn lookup_kind(id: &str) -> Option<&'static AugmenterKind> {
    catalog().iter().find(|k| k.id == id)
}

/// Kinds tagged with at least one of `selected`, in catalog order.
pub fn suggest(selected: &BTreeSet<ContextTypeKind>) -> Vec<&'static AugmenterKind> {
    catalog().iter().filter(|k| !k.compatible.is_disjoint(selected)).collect()
}

/// Required parameter names for `kind` within `spec`.
pub fn required_params(kind: &AugmenterKind, spec: &MobileAppSpec) -> Vec<String> {
    let mut out: Vec<String> = kind.required_params.iter().map(|p| p.name.clone()).collect();
    if kind.per_band_params {
        out.extend(spec.space.bands.iter().map(|b| format!("{VOLUME_PARAM_PREFIX}{}", b.id)));
    }
    out
}

pub fn accepts_param(kind: &AugmenterKind, spec: &MobileAppSpec, name: &str) -> bool {
    kind.required_params.iter().chain(&kind.optional_params).any(|p| p.name == name)
        || (kind.per_band_params
            && name.strip_prefix(VOLUME_PARAM_PREFIX).is_some_and(|b| spec.band(b).is_some()))
}
