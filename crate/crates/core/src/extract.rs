//! External content extraction: `(url, xpath, mode)` to a string, served
//! from a page snapshot cache and, when the policy allows, the network.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::html::{parse_html, Document, NodeKind, XPathExpr};
use crate::spec::ExtractMode;
use crate::urls::normalize_url;

pub const INDEX_FILE: &str = "index.json";
pub const USER_AGENT: &str = "mowa-extractor/0.1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CachePolicy {
    CacheOnly,
    CacheThenNetwork,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("page unavailable: {0}")]
    PageUnavailable(String),
    #[error("no node matches {xpath} on {url}")]
    NoMatch { url: String, xpath: String },
    #[error("matched element has no attribute `{0}`")]
    AttributeAbsent(String),
    #[error("cache index at {path} is unreadable: {detail}")]
    BrokenIndex { path: String, detail: String },
}

impl ExtractError {
    pub fn key(&self) -> &'static str {
        match self {
            ExtractError::PageUnavailable(_) => "extract.page-unavailable",
            ExtractError::NoMatch { .. } => "extract.no-match",
            ExtractError::AttributeAbsent(_) => "extract.attribute-absent",
            ExtractError::BrokenIndex { .. } => "cli.io",
        }
    }
}

/// The network boundary. Swapped out in tests to prove hermeticity.
pub trait Fetcher: Send + Sync {
    fn fetch(&self, url: &str) -> Result<Vec<u8>, String>;
}

/// Plain HTTP GET, no cookies.
pub struct HttpFetcher;

impl Fetcher for HttpFetcher {
    fn fetch(&self, url: &str) -> Result<Vec<u8>, String> {
        let mut resp = ureq::get(url)
            .header("User-Agent", USER_AGENT)
            .call()
            .map_err(|e| e.to_string())?;
        resp.body_mut().read_to_vec().map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub file: String,
    /// Unix seconds.
    pub fetched_at: u64,
}

/// Snapshot store keyed by normalized URL.
pub struct ExtractCache {
    dir: Option<PathBuf>,
    policy: CachePolicy,
    fetcher: Box<dyn Fetcher>,
    index: Mutex<BTreeMap<String, IndexEntry>>,
    parsed: Mutex<HashMap<String, Arc<Document>>>,
}

impl std::fmt::Debug for ExtractCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExtractCache").field("dir", &self.dir).field("policy", &self.policy).finish()
    }
}

impl ExtractCache {
    /// Opens the cache rooted at `dir`. A missing directory or index is an
    /// empty cache.
    pub fn open(dir: impl Into<PathBuf>, policy: CachePolicy) -> Result<Self, ExtractError> {
        let dir = dir.into();
        let index_path = dir.join(INDEX_FILE);
        let index = match fs::read(&index_path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| ExtractError::BrokenIndex {
                path: index_path.display().to_string(),
                detail: e.to_string(),
            })?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => {
                return Err(ExtractError::BrokenIndex {
                    path: index_path.display().to_string(),
                    detail: e.to_string(),
                })
            }
        };
        Ok(ExtractCache {
            dir: Some(dir),
            policy,
            fetcher: Box::new(HttpFetcher),
            index: Mutex::new(index),
            parsed: Mutex::new(HashMap::new()),
        })
    }

    /// A cache holding nothing and never touching the network.
    pub fn empty() -> Self {
        ExtractCache {
            dir: None,
            policy: CachePolicy::CacheOnly,
            fetcher: Box::new(HttpFetcher),
            index: Mutex::new(BTreeMap::new()),
            parsed: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_fetcher(mut self, fetcher: Box<dyn Fetcher>) -> Self {
        self.fetcher = fetcher;
        self
    }

    pub fn policy(&self) -> CachePolicy {
        self.policy
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// Normalized URLs with a stored snapshot.
    pub fn urls(&self) -> HashSet<String> {
        self.index.lock().unwrap().keys().cloned().collect()
    }

    pub fn contains(&self, url: &str) -> bool {
        normalize_url(url).is_some_and(|u| self.index.lock().unwrap().contains_key(&u))
    }

    fn cached_path(&self, key: &str) -> Option<PathBuf> {
        let dir = self.dir.as_ref()?;
        let entry = self.index.lock().unwrap().get(key).cloned()?;
        Some(dir.join(entry.file))
    }

    /// Ensures `url` is stored, fetching it if needed and allowed.
    /// Idempotent: a cached URL returns its existing path.
    pub fn snapshot(&self, url: &str) -> Result<PathBuf, ExtractError> {
        let unavailable = || ExtractError::PageUnavailable(url.to_string());
        let key = normalize_url(url).ok_or_else(unavailable)?;
        // Holding the index lock across fetch and write serializes snapshot
        // writes.
        let mut index = self.index.lock().unwrap();
        let dir = self.dir.as_ref().ok_or_else(unavailable)?;
        if let Some(entry) = index.get(&key) {
            return Ok(dir.join(&entry.file));
        }
        if self.policy == CachePolicy::CacheOnly {
            return Err(unavailable());
        }
        let body = self.fetcher.fetch(&key).map_err(|_| unavailable())?;
        let digest = hex::encode(Sha256::digest(key.as_bytes()));
        let file = format!("pages/{}.html", &digest[..16]);
        let path = dir.join(&file);
        write_atomic(&path, &body).map_err(|_| unavailable())?;
        let fetched_at = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        index.insert(key, IndexEntry { file, fetched_at });
        let json = serde_json::to_vec_pretty(&*index).expect("index serializes");
        write_atomic(&dir.join(INDEX_FILE), &json).map_err(|_| unavailable())?;
        Ok(path)
    }

    /// Parsed page for `url`, memoized per cache instance.
    pub fn page(&self, url: &str) -> Result<Arc<Document>, ExtractError> {
        let unavailable = || ExtractError::PageUnavailable(url.to_string());
        let key = normalize_url(url).ok_or_else(unavailable)?;
        if let Some(doc) = self.parsed.lock().unwrap().get(&key) {
            return Ok(doc.clone());
        }
        let path = match self.cached_path(&key) {
            Some(p) => p,
            None => self.snapshot(&key)?,
        };
        let bytes = fs::read(&path).map_err(|_| unavailable())?;
        let doc = Arc::new(parse_html(&bytes, Some(&key)));
        self.parsed.lock().unwrap().insert(key, doc.clone());
        Ok(doc)
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let parent = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(parent)?;
    let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Runs of whitespace become one space; ends trimmed.
pub fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Evaluates `xpath` on an already loaded page. First match wins.
pub fn extract_from(doc: &Document, url: &str, xpath: &XPathExpr, mode: &ExtractMode) -> Result<String, ExtractError> {
    let first = *xpath.eval(doc).first().ok_or_else(|| ExtractError::NoMatch {
        url: url.to_string(),
        xpath: xpath.to_string(),
    })?;
    let attr_name = match mode {
        ExtractMode::Attribute(name) => Some(name.as_str()),
        ExtractMode::Text => xpath.attribute(),
    };
    match attr_name {
        Some(name) => doc
            .attr(first, name)
            .map(str::to_string)
            .ok_or_else(|| ExtractError::AttributeAbsent(name.to_string())),
        None => Ok(match doc.kind(first) {
            NodeKind::Text(t) => collapse_whitespace(t),
            _ => collapse_whitespace(&doc.text_content(first)),
        }),
    }
}

pub fn extract(url: &str, xpath: &XPathExpr, mode: &ExtractMode, cache: &ExtractCache) -> Result<String, ExtractError> {
    let doc = cache.page(url)?;
    extract_from(&doc, url, xpath, mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Refuse;
    impl Fetcher for Refuse {
        fn fetch(&self, url: &str) -> Result<Vec<u8>, String> {
            panic!("network access attempted for {url}");
        }
    }

    struct Canned(Mutex<usize>);
    impl Fetcher for Canned {
        fn fetch(&self, _url: &str) -> Result<Vec<u8>, String> {
            *self.0.lock().unwrap() += 1;
            Ok(b"<p class=d>  fetched\n text </p><img class=piece src=x.jpg>".to_vec())
        }
    }

    fn xp(s: &str) -> XPathExpr {
        XPathExpr::parse(s).unwrap()
    }

    #[test]
    fn cache_only_never_fetches() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ExtractCache::open(dir.path(), CachePolicy::CacheOnly).unwrap().with_fetcher(Box::new(Refuse));
        let err = extract("https://example.org/x", &xp("//p"), &ExtractMode::Text, &cache).unwrap_err();
        assert_eq!(err, ExtractError::PageUnavailable("https://example.org/x".into()));
    }

    #[test]
    fn network_snapshot_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let fetcher = Box::new(Canned(Mutex::new(0)));
        let cache = ExtractCache::open(dir.path(), CachePolicy::CacheThenNetwork).unwrap().with_fetcher(fetcher);
        let a = cache.snapshot("https://Example.org/x#frag").unwrap();
        let b = cache.snapshot("https://example.org/x").unwrap();
        assert_eq!(a, b);
        assert_eq!(fs::read_dir(dir.path().join("pages")).unwrap().count(), 1);
        let text = extract("https://example.org/x", &xp("//p[@class='d']"), &ExtractMode::Text, &cache).unwrap();
        assert_eq!(text, "fetched text");
        let src = extract("https://example.org/x", &xp("//img"), &ExtractMode::parse("attr:src").unwrap(), &cache);
        assert_eq!(src.unwrap(), "x.jpg");
        let missing = extract("https://example.org/x", &xp("//img"), &ExtractMode::parse("attr:alt").unwrap(), &cache);
        assert_eq!(missing, Err(ExtractError::AttributeAbsent("alt".into())));

        let reopened = ExtractCache::open(dir.path(), CachePolicy::CacheOnly).unwrap().with_fetcher(Box::new(Refuse));
        assert!(reopened.contains("https://example.org/x"));
        assert_eq!(reopened.snapshot("https://example.org/x").unwrap(), a);
    }

    #[test]
    fn no_match() {
        let doc = parse_html(b"<p>a</p>", None);
        assert!(matches!(
            extract_from(&doc, "u", &xp("//div"), &ExtractMode::Text),
            Err(ExtractError::NoMatch { .. })
        ));
    }

    #[test]
    fn whitespace_collapse() {
        assert_eq!(collapse_whitespace("  a \n\t b  "), "a b");
        assert_eq!(collapse_whitespace(""), "");
    }
}
