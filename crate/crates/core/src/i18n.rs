//! Message catalogs. Every user-facing failure carries a stable key; the
//! human text is looked up per locale, falling back to English, with
//! `{name}` placeholders interpolated.

use std::collections::BTreeMap;
use std::sync::OnceLock;

pub const DEFAULT_LOCALE: &str = "en";
pub const LOCALES: &[&str] = &["en", "es", "fr"];

type Catalog = BTreeMap<String, String>;

fn load(raw: &str) -> Catalog {
    serde_json::from_str(raw).expect("bundled catalog is valid JSON")
}

fn catalogs() -> &'static BTreeMap<&'static str, Catalog> {
    static CATALOGS: OnceLock<BTreeMap<&'static str, Catalog>> = OnceLock::new();
    CATALOGS.get_or_init(|| {
        BTreeMap::from([
            ("en", load(include_str!("../locales/en.json"))),
            ("es", load(include_str!("../locales/es.json"))),
            ("fr", load(include_str!("../locales/fr.json"))),
        ])
    })
}

/// Keys of the complete English catalog.
pub fn keys() -> impl Iterator<Item = &'static str> {
    catalogs()[DEFAULT_LOCALE].keys().map(String::as_str)
}

/// Entries defined in a locale's own file, without fallback.
pub fn own_entries(locale: &str) -> Option<&'static BTreeMap<String, String>> {
    catalogs().get(locale)
}

/// Raw template for `key`, falling back to English.
pub fn template(locale: &str, key: &str) -> Option<&'static str> {
    let lang = locale.split(['-', '_']).next().unwrap_or(locale);
    catalogs()
        .get(lang)
        .and_then(|c| c.get(key))
        .or_else(|| catalogs()[DEFAULT_LOCALE].get(key))
        .map(String::as_str)
}

pub fn resolves(locale: &str, key: &str) -> bool {
    template(locale, key).is_some()
}

/// Renders `key` with `args`. Unknown keys render as the key itself.
pub fn message(locale: &str, key: &str, args: &[(&str, &str)]) -> String {
    let Some(tpl) = template(locale, key) else {
        return key.to_string();
    };
    let mut out = tpl.to_string();
    for (name, value) in args {
        out = out.replace(&format!("{{{name}}}"), value);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn translations_only_cover_known_keys() {
        let en: Vec<&str> = keys().collect();
        for loc in LOCALES {
            for key in own_entries(loc).unwrap().keys() {
                assert!(en.contains(&key.as_str()), "{loc} has stray key {key}");
            }
        }
    }

    #[test]
    fn fallback_and_interpolation() {
        assert_eq!(
            message("es", "band.empty-range", &[("id", "b1")]),
            "La banda \"b1\" debe tener un mínimo menor que su máximo."
        );
        assert_eq!(
            message("fr-CA", "rule.unknown-sensor", &[("id", "sX")]),
            "The rule references the unknown sensor \"sX\"."
        );
        assert_eq!(message("en", "no.such-key", &[]), "no.such-key");
        assert!(resolves("es", "session.stage-order"));
    }
}
