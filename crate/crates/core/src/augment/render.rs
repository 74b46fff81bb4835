use std::collections::BTreeMap;

use thiserror::Error;

use super::catalog::*;
use crate::html::{AttrPatch, Fragment, FragmentNode, XPathExpr};
use crate::i18n;
use crate::weaver::{TourMode, TourState};

/// Fully literal parameter values.
pub type ResolvedParams = BTreeMap<String, String>;

pub const VOLUME_ATTR: &str = "data-mowa-volume";
pub const WALK_ATTR: &str = "data-mowa-walk";
pub const EXPECTED_ATTR: &str = "data-mowa-expected";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("unknown augmenter kind `{0}`")]
    UnknownKind(String),
    #[error("missing parameter `{0}`")]
    MissingParam(String),
    #[error("parameter `{0}` is not a supported XPath")]
    InvalidParam(String),
    #[error("augmenter needs tour state")]
    MissingTourState,
}

/// Context of one render beyond the parameters.
#[derive(Debug, Clone, Copy)]
pub struct RenderContext<'a> {
    pub layer_id: &'a str,
    pub locale: &'a str,
    pub tour: Option<&'a TourState>,
    /// Active band id, for band-driven kinds.
    pub band: Option<&'a str>,
    /// Human label of the current scalar value (band label or orientation).
    pub value_label: Option<&'a str>,
}

fn el(name: &str, attrs: &[(&str, &str)], children: Vec<FragmentNode>) -> FragmentNode {
    FragmentNode::element(name, attrs, children)
}

fn text(s: &str) -> FragmentNode {
    FragmentNode::text(s)
}

fn get<'p>(params: &'p ResolvedParams, name: &str) -> Result<&'p str, RenderError> {
    params.get(name).map(String::as_str).ok_or_else(|| RenderError::MissingParam(name.to_string()))
}

/// Renders one augmenter. Pure: same inputs give the same fragment.
pub fn render(kind: &str, params: &ResolvedParams, ctx: &RenderContext<'_>) -> Result<Fragment, RenderError> {
    let k = lookup_kind(kind).ok_or_else(|| RenderError::UnknownKind(kind.to_string()))?;
    for p in &k.required_params {
        get(params, &p.name)?;
    }
    let frag = |nodes| Fragment::new(ctx.layer_id, kind, nodes);
    let msg = |key: &str| i18n::message(ctx.locale, key, &[]);
    Ok(match kind {
        POI_INFO_PANEL => {
            let title = get(params, "title")?;
            frag(vec![el(
                "div",
                &[("class", "mowa-poi-info")],
                vec![
                    el("h2", &[("class", "mowa-poi-title")], vec![text(title)]),
                    el("p", &[("class", "mowa-poi-desc")], vec![text(get(params, "description")?)]),
                    el("img", &[("class", "mowa-poi-pic"), ("src", get(params, "image-url")?), ("alt", title)], vec![]),
                ],
            )])
        }
        HYPERMEDIA_NAV => {
            let tour = ctx.tour.ok_or(RenderError::MissingTourState)?;
            frag(vec![nav(tour, &msg)])
        }
        SCALAR_BADGE => match ctx.value_label {
            Some(label) => {
                let prefix = get(params, "label-prefix")?;
                frag(vec![el("span", &[("class", "mowa-badge")], vec![text(&format!("{prefix} {label}"))])])
            }
            None => frag(vec![]),
        },
        MEDIA_VOLUME_ADAPTER => {
            let media = get(params, "media-xpath")?;
            let target = XPathExpr::parse(media).map_err(|_| RenderError::InvalidParam("media-xpath".into()))?;
            let mut f = frag(vec![]);
            if let Some(band) = ctx.band {
                let name = format!("{VOLUME_PARAM_PREFIX}{band}");
                let value = get(params, &name)?;
                f = f.with_patch(AttrPatch { target, name: VOLUME_ATTR.into(), value: value.into() });
            }
            f
        }
        TEXT_INJECTOR => frag(vec![el("div", &[("class", "mowa-text")], vec![text(get(params, "text")?)])]),
        other => return Err(RenderError::UnknownKind(other.to_string())),
    })
}

fn walk_link(id: &str, name: &str, href: &str) -> FragmentNode {
    el("a", &[("class", "mowa-walk"), (WALK_ATTR, id), ("href", href)], vec![text(name)])
}

fn nav(tour: &TourState, msg: &dyn Fn(&str) -> String) -> FragmentNode {
    let label = |key: &str| el("span", &[("class", "mowa-nav-label")], vec![text(&msg(key))]);
    match (tour.mode, tour.expected()) {
        (TourMode::Complete, _) | (_, None) => el(
            "div",
            &[("class", "mowa-nav mowa-nav-complete")],
            vec![el("p", &[("class", "mowa-notice")], vec![text(&msg("nav.complete"))])],
        ),
        (TourMode::WrongPiece, Some(next)) => el(
            "div",
            &[("class", "mowa-nav mowa-nav-wrong-piece")],
            vec![el(
                "p",
                &[("class", "mowa-notice")],
                vec![
                    text(&format!("{} ", msg("nav.wrong-piece"))),
                    el("strong", &[(EXPECTED_ATTR, &next.id)], vec![text(&next.name)]),
                    text(&format!(" {}", msg("nav.wrong-piece-first"))),
                ],
            )],
        ),
        (TourMode::NotStarted, Some(next)) => el(
            "div",
            &[("class", "mowa-nav mowa-nav-start")],
            vec![label("nav.start"), text(" "), walk_link(&next.id, &next.name, &next.target_url)],
        ),
        (TourMode::OnTrack, Some(next)) => el(
            "div",
            &[("class", "mowa-nav mowa-nav-on-track")],
            vec![label("nav.next"), text(" "), walk_link(&next.id, &next.name, &next.target_url)],
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weaver::TourStop;

    fn tour(mode: TourMode, expected_index: usize) -> TourState {
        let stop = |id: &str, name: &str| TourStop {
            id: id.into(),
            name: name.into(),
            target_url: format!("https://en.wikipedia.org/wiki/{name}"),
        };
        TourState {
            stops: vec![stop("p1", "Toxodon"), stop("p2", "Glyptodon"), stop("p3", "Megatherium")],
            expected_index,
            visited: Default::default(),
            mode,
            last_sensed: None,
        }
    }

    fn ctx<'a>(t: Option<&'a TourState>, band: Option<&'a str>) -> RenderContext<'a> {
        RenderContext { layer_id: "L", locale: "en", tour: t, band, value_label: None }
    }

    #[test]
    fn nav_on_track_names_next() {
        let t = tour(TourMode::OnTrack, 1);
        let f = render(HYPERMEDIA_NAV, &ResolvedParams::new(), &ctx(Some(&t), None)).unwrap();
        let m = f.to_markup();
        assert!(m.contains("Glyptodon"), "{m}");
        assert!(m.contains(r#"data-mowa-walk="p2""#), "{m}");
    }

    #[test]
    fn nav_wrong_piece_names_expected_without_walk() {
        let mut t = tour(TourMode::WrongPiece, 0);
        t.last_sensed = Some("p3".into());
        let m = render(HYPERMEDIA_NAV, &ResolvedParams::new(), &ctx(Some(&t), None)).unwrap().to_markup();
        assert!(m.contains(r#"data-mowa-expected="p1""#) && m.contains("Toxodon"), "{m}");
        assert!(!m.contains(WALK_ATTR) && !m.contains("Megatherium"), "{m}");
    }

    #[test]
    fn nav_requires_tour() {
        assert_eq!(
            render(HYPERMEDIA_NAV, &ResolvedParams::new(), &ctx(None, None)),
            Err(RenderError::MissingTourState)
        );
    }

    #[test]
    fn volume_maps_active_band() {
        let params = ResolvedParams::from([
            ("media-xpath".to_string(), "//video".to_string()),
            ("volume:noisy".to_string(), "0.9".to_string()),
        ]);
        let f = render(MEDIA_VOLUME_ADAPTER, &params, &ctx(None, Some("noisy"))).unwrap();
        assert_eq!(f.patches.len(), 1);
        assert_eq!(f.patches[0].value, "0.9");
        assert_eq!(f.patches[0].name, VOLUME_ATTR);
        assert_eq!(
            render(MEDIA_VOLUME_ADAPTER, &params, &ctx(None, Some("quiet"))),
            Err(RenderError::MissingParam("volume:quiet".into()))
        );
    }

    #[test]
    fn panel_markup_and_missing_param() {
        let mut params = ResolvedParams::from([
            ("title".to_string(), "Toxodon".to_string()),
            ("description".to_string(), "A <big> grazer".to_string()),
            ("image-url".to_string(), "https://m.example/t.jpg".to_string()),
        ]);
        let m = render(POI_INFO_PANEL, &params, &ctx(None, None)).unwrap().to_markup();
        assert_eq!(
            m,
            "<div class=\"mowa-poi-info\" data-mowa-layer=\"L\" data-mowa-kind=\"poi-info-panel\">\
             <h2 class=\"mowa-poi-title\">Toxodon</h2><p class=\"mowa-poi-desc\">A &lt;big&gt; grazer</p>\
             <img class=\"mowa-poi-pic\" src=\"https://m.example/t.jpg\" alt=\"Toxodon\"></div>"
        );
        params.remove("image-url");
        assert_eq!(
            render(POI_INFO_PANEL, &params, &ctx(None, None)),
            Err(RenderError::MissingParam("image-url".into()))
        );
    }
}
