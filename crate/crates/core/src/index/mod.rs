//! News corpus, title embeddings and exhaustive cosine retrieval.

mod corpus;
mod embed;
mod store;

use std::cmp::Ordering;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use corpus::{ingest_corpus, normalize_language, Corpus, IngestSummary, NewsArticle, RejectReason, Rejection};
pub use embed::{
    cosine_similarity, hash_embed, trigram_counts, EmbedError, Embedder, EmbeddingVector, HashEmbedder, HASH_DIM,
    HASH_EMBEDDER_ID,
};
pub use store::INDEX_FORMAT_VERSION;

use crate::scalar::{total_cmp, Scalar};

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("zero accepted articles")]
    NoArticles,
    #[error("duplicate article id {0:?}")]
    DuplicateArticle(String),
    #[error("invalid article {0:?}: {1}")]
    InvalidArticle(String, String),
    #[error("index is empty")]
    EmptyIndex,
    #[error("query is empty")]
    EmptyQuery,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("index entry references unknown article {0:?}")]
    DanglingEntry(String),
    #[error("embedder mismatch: index built with {index:?} (dim {index_dim}), configured {configured:?} (dim {configured_dim})")]
    EmbedderMismatch { index: String, index_dim: usize, configured: String, configured_dim: usize },
    #[error("malformed index or corpus file: {0}")]
    Format(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

impl IndexError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct EmbeddedIndexEntry<T: Scalar> {
    pub article_id: String,
    pub vector: EmbeddingVector<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct RetrievalResult<T: Scalar> {
    pub article: NewsArticle,
    pub score: T,
}

/// Title-embedding index over a corpus.
///
/// Immutable after construction, so it can be shared behind an `Arc` by any
/// number of readers.
#[derive(Debug, Clone, PartialEq)]
pub struct Index<T: Scalar> {
    embedder_id: String,
    dim: usize,
    entries: Vec<EmbeddedIndexEntry<T>>,
    // aligned with `entries`
    articles: Vec<NewsArticle>,
}

impl<T: Scalar> Index<T> {
    /// Embeds every article title. Bodies are never embedded.
    pub fn build(corpus: &Corpus, embedder: &dyn Embedder<T>) -> Result<Self, IndexError> {
        if corpus.is_empty() {
            return Err(IndexError::EmptyIndex);
        }
        let mut entries = Vec::with_capacity(corpus.len());
        for article in corpus.articles() {
            let vector = embedder.embed(&article.title)?;
            if vector.dim() != embedder.dim() {
                return Err(EmbedError::DimMismatch { expected: embedder.dim(), got: vector.dim() }.into());
            }
            entries.push(EmbeddedIndexEntry { article_id: article.id.clone(), vector });
        }
        Ok(Self {
            embedder_id: embedder.id().to_string(),
            dim: embedder.dim(),
            entries,
            articles: corpus.articles().to_vec(),
        })
    }

    /// Reassembles an index from persisted entries, resolving ids against `corpus`.
    pub fn from_entries(
        embedder_id: String,
        dim: usize,
        entries: Vec<EmbeddedIndexEntry<T>>,
        corpus: &Corpus,
    ) -> Result<Self, IndexError> {
        let mut articles = Vec::with_capacity(entries.len());
        for e in &entries {
            if e.vector.dim() != dim {
                return Err(EmbedError::DimMismatch { expected: dim, got: e.vector.dim() }.into());
            }
            let article = corpus.get(&e.article_id).ok_or_else(|| IndexError::DanglingEntry(e.article_id.clone()))?;
            articles.push(article.clone());
        }
        Ok(Self { embedder_id, dim, entries, articles })
    }

    pub fn embedder_id(&self) -> &str {
        &self.embedder_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[EmbeddedIndexEntry<T>] {
        &self.entries
    }

    pub fn articles(&self) -> &[NewsArticle] {
        &self.articles
    }

    /// Fails unless `embedder` produced this index.
    pub fn ensure_embedder(&self, embedder: &dyn Embedder<T>) -> Result<(), IndexError> {
        if embedder.id() != self.embedder_id || embedder.dim() != self.dim {
            return Err(IndexError::EmbedderMismatch {
                index: self.embedder_id.clone(),
                index_dim: self.dim,
                configured: embedder.id().to_string(),
                configured_dim: embedder.dim(),
            });
        }
        Ok(())
    }

    /// Top-`k` entries by cosine similarity to `query`, score descending,
    /// ties broken by ascending article id.
    pub fn retrieve_vector(&self, query: &EmbeddingVector<T>, k: usize) -> Result<Vec<RetrievalResult<T>>, IndexError> {
        if k == 0 {
            return Err(IndexError::InvalidK);
        }
        if self.entries.is_empty() {
            return Err(IndexError::EmptyIndex);
        }
        let mut scored = Vec::with_capacity(self.entries.len());
        for (i, e) in self.entries.iter().enumerate() {
            scored.push((cosine_similarity(query.values(), e.vector.values())?, i));
        }
        let by_rank = |a: &(T, usize), b: &(T, usize)| -> Ordering {
            total_cmp(b.0, a.0).then_with(|| self.entries[a.1].article_id.cmp(&self.entries[b.1].article_id))
        };
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, by_rank);
            scored.truncate(k);
        }
        scored.sort_by(by_rank);
        Ok(scored
            .into_iter()
            .map(|(score, i)| RetrievalResult { article: self.articles[i].clone(), score })
            .collect())
    }

    /// Embeds `query` with `embedder` and retrieves the top `k` articles.
    pub fn retrieve(
        &self,
        embedder: &dyn Embedder<T>,
        query: &str,
        k: usize,
    ) -> Result<Vec<RetrievalResult<T>>, IndexError> {
        if query.trim().is_empty() {
            return Err(IndexError::EmptyQuery);
        }
        if k == 0 {
            return Err(IndexError::InvalidK);
        }
        if self.entries.is_empty() {
            return Err(IndexError::EmptyIndex);
        }
        self.ensure_embedder(embedder)?;
        let q = embedder.embed(query)?;
        self.retrieve_vector(&q, k)
    }

    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        store::save(self, path)
    }

    /// Loads an index file; article ids are resolved against `corpus`.
    pub fn load(path: &Path, corpus: &Corpus) -> Result<Self, IndexError> {
        store::load(path, corpus)
    }

    /// [`Index::load`] plus the embedder compatibility check.
    pub fn load_for(path: &Path, corpus: &Corpus, embedder: &dyn Embedder<T>) -> Result<Self, IndexError> {
        let index = Self::load(path, corpus)?;
        index.ensure_embedder(embedder)?;
        Ok(index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn article(id: &str, title: &str) -> NewsArticle {
        NewsArticle {
            id: id.into(),
            title: title.into(),
            body: format!("Body of {title}."),
            language: "en".into(),
            published: None,
            source_url: None,
        }
    }

    fn small_corpus() -> Corpus {
        Corpus::new(vec![
            article("n1", "Quake hits Chile"),
            article("n2", "Markets rally after rate cut"),
            article("n3", "Local team wins championship"),
        ])
        .unwrap()
    }

    #[test]
    fn exact_title_ranks_first() {
        let index: Index<f32> = Index::build(&small_corpus(), &HashEmbedder).unwrap();
        let res = index.retrieve(&HashEmbedder, "Markets rally after rate cut", 1).unwrap();
        assert_eq!(res.len(), 1);
        assert_eq!(res[0].article.id, "n2");
        assert!((res[0].score - 1.0).abs() < 1e-6);
    }

    #[test]
    fn k_larger_than_corpus_returns_all_sorted() {
        let index: Index<f64> = Index::build(&small_corpus(), &HashEmbedder).unwrap();
        let res = index.retrieve(&HashEmbedder, "chile earthquake", 10).unwrap();
        assert_eq!(res.len(), 3);
        assert!(res.windows(2).all(|w| w[0].score >= w[1].score));
    }

    #[test]
    fn ties_break_by_ascending_id() {
        let corpus = Corpus::new(vec![article("z", "same title"), article("a", "same title"), article("m", "other")])
            .unwrap();
        let index: Index<f64> = Index::build(&corpus, &HashEmbedder).unwrap();
        let res = index.retrieve(&HashEmbedder, "same title", 2).unwrap();
        assert_eq!(res[0].article.id, "a");
        assert_eq!(res[1].article.id, "z");
    }

    #[test]
    fn retrieval_errors() {
        let index: Index<f64> = Index::build(&small_corpus(), &HashEmbedder).unwrap();
        assert!(matches!(index.retrieve(&HashEmbedder, "  ", 1), Err(IndexError::EmptyQuery)));
        assert!(matches!(index.retrieve(&HashEmbedder, "x", 0), Err(IndexError::InvalidK)));
        let empty = Index::<f64>::from_entries(HASH_EMBEDDER_ID.into(), HASH_DIM, vec![], &small_corpus()).unwrap();
        assert!(matches!(empty.retrieve(&HashEmbedder, "x", 1), Err(IndexError::EmptyIndex)));
        assert!(matches!(Index::<f64>::build(&Corpus::default(), &HashEmbedder), Err(IndexError::EmptyIndex)));
    }

    struct OtherEmbedder;
    impl Embedder<f64> for OtherEmbedder {
        fn id(&self) -> &str {
            "other"
        }
        fn dim(&self) -> usize {
            384
        }
        fn embed(&self, _text: &str) -> Result<EmbeddingVector<f64>, EmbedError> {
            EmbeddingVector::normalize(vec![1.0; 384])
        }
    }

    #[test]
    fn embedder_mismatch_is_fatal() {
        let index: Index<f64> = Index::build(&small_corpus(), &HashEmbedder).unwrap();
        assert!(matches!(index.retrieve(&OtherEmbedder, "x", 1), Err(IndexError::EmbedderMismatch { .. })));
    }

    #[test]
    fn dangling_entry_rejected() {
        let index: Index<f64> = Index::build(&small_corpus(), &HashEmbedder).unwrap();
        let partial = Corpus::new(vec![article("n1", "Quake hits Chile")]).unwrap();
        let err = Index::from_entries(index.embedder_id().into(), index.dim(), index.entries().to_vec(), &partial)
            .unwrap_err();
        assert!(matches!(err, IndexError::DanglingEntry(id) if id == "n2"));
    }
}
