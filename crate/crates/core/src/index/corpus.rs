//! News corpus ingestion.
//!
//! Input and output are JSON-Lines, one article per line:
//! `{"id", "title", "text", "language", "published"?, "url"?}`.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IndexError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewsArticle {
    pub id: String,
    pub title: String,
    #[serde(rename = "text")]
    pub body: String,
    pub language: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub published: Option<String>,
    #[serde(rename = "url", default, skip_serializing_if = "Option::is_none")]
    pub source_url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RejectReason {
    Malformed { message: String },
    EmptyId,
    EmptyTitle,
    InvalidLanguage { code: String },
    LanguageMismatch { code: String },
    DuplicateId { id: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejection {
    /// 1-based line number in the input file.
    pub line: usize,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestSummary {
    pub accepted: usize,
    pub rejected: usize,
    pub rejections: Vec<Rejection>,
}

/// Validated article collection with unique ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    articles: Vec<NewsArticle>,
}

/// Lowercase two-letter ISO-639-1 code, or `None`.
pub fn normalize_language(code: &str) -> Option<String> {
    let code = code.trim().to_ascii_lowercase();
    (code.len() == 2 && code.bytes().all(|b| b.is_ascii_lowercase())).then_some(code)
}

impl Corpus {
    pub fn new(articles: Vec<NewsArticle>) -> Result<Self, IndexError> {
        let mut seen = HashSet::new();
        for a in &articles {
            if !seen.insert(a.id.as_str()) {
                return Err(IndexError::DuplicateArticle(a.id.clone()));
            }
            if a.title.trim().is_empty() {
                return Err(IndexError::InvalidArticle(a.id.clone(), "empty title".into()));
            }
            if normalize_language(&a.language).as_deref() != Some(a.language.as_str()) {
                return Err(IndexError::InvalidArticle(a.id.clone(), format!("bad language {:?}", a.language)));
            }
        }
        Ok(Self { articles })
    }

    pub fn articles(&self) -> &[NewsArticle] {
        &self.articles
    }

    pub fn len(&self) -> usize {
        self.articles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&NewsArticle> {
        self.articles.iter().find(|a| a.id == id)
    }

    /// Loads a corpus previously written by [`Corpus::save`]. Strict: any bad line is an error.
    pub fn load(path: &Path) -> Result<Self, IndexError> {
        let file = File::open(path).map_err(|e| IndexError::io(path, e))?;
        let mut articles = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| IndexError::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let article: NewsArticle = serde_json::from_str(&line)
                .map_err(|e| IndexError::Format(format!("{}:{}: {e}", path.display(), i + 1)))?;
            articles.push(article);
        }
        Self::new(articles)
    }

    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        let file = File::create(path).map_err(|e| IndexError::io(path, e))?;
        let mut out = BufWriter::new(file);
        for a in &self.articles {
            let line = serde_json::to_string(a).expect("article serializes");
            writeln!(out, "{line}").map_err(|e| IndexError::io(path, e))?;
        }
        out.flush().map_err(|e| IndexError::io(path, e))
    }
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    title: String,
    text: String,
    language: String,
    #[serde(default)]
    published: Option<String>,
    #[serde(default)]
    url: Option<String>,
}

/// Reads a JSON-Lines news dump and keeps articles in `language_filter`.
///
/// Malformed or filtered records are counted in the summary and skipped.
/// Blank lines are ignored. Zero accepted articles is an error.
pub fn ingest_corpus(path: &Path, language_filter: &str) -> Result<(Corpus, IngestSummary), IndexError> {
    let filter = normalize_language(language_filter)
        .ok_or_else(|| IndexError::Format(format!("invalid language filter {language_filter:?}")))?;
    let file = File::open(path).map_err(|e| IndexError::io(path, e))?;

    let mut summary = IngestSummary::default();
    let mut articles = Vec::new();
    let mut seen = HashSet::new();

    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| IndexError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match check_record(&line, &filter, &seen) {
            Ok(article) => {
                seen.insert(article.id.clone());
                articles.push(article);
            }
            Err(reason) => {
                tracing::debug!(line = i + 1, ?reason, "rejected corpus record");
                summary.rejections.push(Rejection { line: i + 1, reason });
            }
        }
    }

    summary.accepted = articles.len();
    summary.rejected = summary.rejections.len();
    if articles.is_empty() {
        return Err(IndexError::NoArticles);
    }
    Ok((Corpus { articles }, summary))
}

fn check_record(line: &str, filter: &str, seen: &HashSet<String>) -> Result<NewsArticle, RejectReason> {
    let raw: RawRecord =
        serde_json::from_str(line).map_err(|e| RejectReason::Malformed { message: e.to_string() })?;
    if raw.id.trim().is_empty() {
        return Err(RejectReason::EmptyId);
    }
    if raw.title.trim().is_empty() {
        return Err(RejectReason::EmptyTitle);
    }
    let language =
        normalize_language(&raw.language).ok_or(RejectReason::InvalidLanguage { code: raw.language.clone() })?;
    if language != filter {
        return Err(RejectReason::LanguageMismatch { code: language });
    }
    if seen.contains(&raw.id) {
        return Err(RejectReason::DuplicateId { id: raw.id });
    }
    Ok(NewsArticle {
        id: raw.id,
        title: raw.title.trim().to_string(),
        body: raw.text,
        language,
        published: raw.published,
        source_url: raw.url,
    })
}
