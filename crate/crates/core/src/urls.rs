//! URL normalization and `*` glob matching used to key corpora and match
//! layer targets.

use url::Url;

/// Normalizes an absolute URL: lowercase scheme and host, default ports
/// dropped, fragment removed, query kept.
///
/// Returns `None` when `raw` is not an absolute URL.
pub fn normalize_url(raw: &str) -> Option<String> {
    let mut url = Url::parse(raw.trim()).ok()?;
    if url.cannot_be_a_base() {
        return None;
    }
    url.set_fragment(None);
    // `Url` already lowercases scheme/host and elides default ports.
    Some(url.to_string())
}

pub fn is_absolute_url(raw: &str) -> bool {
    normalize_url(raw).is_some()
}

/// Matches `text` against a glob where `*` stands for any span (including
/// `/`) and every other character matches literally.
pub fn glob_match(pattern: &str, text: &str) -> bool {
    let p: Vec<char> = pattern.chars().collect();
    let t: Vec<char> = text.chars().collect();
    let (mut pi, mut ti) = (0usize, 0usize);
    let mut star: Option<usize> = None;
    let mut mark = 0usize;
    while ti < t.len() {
        if pi < p.len() && p[pi] == '*' {
            star = Some(pi);
            mark = ti;
            pi += 1;
        } else if pi < p.len() && p[pi] == t[ti] {
            pi += 1;
            ti += 1;
        } else if let Some(s) = star {
            pi = s + 1;
            mark += 1;
            ti = mark;
        } else {
            return false;
        }
    }
    while pi < p.len() && p[pi] == '*' {
        pi += 1;
    }
    pi == p.len()
}
