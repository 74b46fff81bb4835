use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::html::{parse_html, Document};
use crate::urls::normalize_url;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorpusError {
    #[error("corpus manifest {path} is unreadable: {detail}")]
    Manifest { path: String, detail: String },
    #[error("corpus entry {0} cannot be loaded")]
    BrokenCorpus(String),
}

impl CorpusError {
    pub fn key(&self) -> &'static str {
        match self {
            CorpusError::Manifest { .. } => "cli.io",
            CorpusError::BrokenCorpus(_) => "corpus.broken",
        }
    }
}

/// Offline stand-in for the Web: normalized URL to parsed page.
#[derive(Debug, Clone, Default)]
pub struct PageCorpus {
    base: Option<PathBuf>,
    files: BTreeMap<String, String>,
    pages: BTreeMap<String, Arc<Document>>,
}

impl PageCorpus {
    /// Loads `dir/manifest.json` and parses every page it lists.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let dir = dir.as_ref();
        let manifest_path = dir.join(MANIFEST_FILE);
        let manifest_err = |detail: String| CorpusError::Manifest {
            path: manifest_path.display().to_string(),
            detail,
        };
        let bytes = fs::read(&manifest_path).map_err(|e| manifest_err(e.to_string()))?;
        let raw: BTreeMap<String, String> =
            serde_json::from_slice(&bytes).map_err(|e| manifest_err(e.to_string()))?;
        let mut corpus = PageCorpus { base: Some(dir.to_path_buf()), ..Default::default() };
        for (url, rel) in raw {
            let key = normalize_url(&url).ok_or_else(|| CorpusError::BrokenCorpus(url.clone()))?;
            let html = fs::read(dir.join(&rel)).map_err(|_| CorpusError::BrokenCorpus(url.clone()))?;
            corpus.pages.insert(key.clone(), Arc::new(parse_html(&html, Some(&key))));
            corpus.files.insert(key, rel);
        }
        Ok(corpus)
    }

    /// In-memory corpus, mainly for tests.
    pub fn from_pages<'a>(pages: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let mut corpus = PageCorpus::default();
        for (url, html) in pages {
            let key = normalize_url(url).expect("absolute corpus URL");
            corpus.pages.insert(key.clone(), Arc::new(parse_html(html.as_bytes(), Some(&key))));
        }
        corpus
    }

    pub fn base(&self) -> Option<&Path> {
        self.base.as_deref()
    }

    pub fn page(&self, url: &str) -> Option<Arc<Document>> {
        self.pages.get(&normalize_url(url)?).cloned()
    }

    pub fn contains(&self, url: &str) -> bool {
        normalize_url(url).is_some_and(|u| self.pages.contains_key(&u))
    }

    pub fn urls(&self) -> HashSet<String> {
        self.pages.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.pages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pages.is_empty()
    }
}
