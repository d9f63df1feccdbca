use std::cmp::Ordering;

use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use emonews_core::index::{Corpus, HashEmbedder, Index, NewsArticle, RetrievalResult};

const WORDS: &[&str] = &[
    "storm", "election", "market", "rally", "bridge", "council", "harbor", "vaccine", "orbit", "festival", "drought",
    "tariff", "museum", "strike", "summit", "wildfire", "railway", "budget", "glacier", "startup", "court", "league",
    "river", "satellite", "farmers", "airport", "reform", "chip", "ocean", "tower",
];

fn random_title(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(2..7);
    (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

fn random_corpus(rng: &mut ChaCha8Rng, n: usize) -> Corpus {
    let articles = (0..n)
        .map(|i| NewsArticle {
            id: format!("a{i:04}"),
            title: random_title(rng),
            body: "Body text.".into(),
            language: "en".into(),
            published: None,
            source_url: None,
        })
        .collect();
    Corpus::new(articles).unwrap()
}

/// Full scan: cosine in f64 over every stored vector, sorted by score then id.
fn oracle(index: &Index<f32>, query: &[f32]) -> Vec<(String, f64)> {
    let q: Vec<f64> = query.iter().map(|&x| x as f64).collect();
    let qn = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut all: Vec<(String, f64)> = index
        .entries()
        .iter()
        .map(|e| {
            let v: Vec<f64> = e.vector.values().iter().map(|&x| x as f64).collect();
            let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let dot: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
            (e.article_id.clone(), dot / (qn * vn))
        })
        .collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then_with(|| a.0.cmp(&b.0)));
    all
}

/// Same ids in the same order as the oracle's top k. Where ids differ at a
/// rank, both candidates must tie within float noise (1e-6).
fn assert_matches_oracle(got: &[RetrievalResult<f32>], full: &[(String, f64)], k: usize) {
    assert_eq!(got.len(), k.min(full.len()));
    for (rank, g) in got.iter().enumerate() {
        let (id, score) = &full[rank];
        let own = full.iter().find(|(i, _)| *i == g.article.id).expect("returned id exists").1;
        assert!((g.score as f64 - own).abs() < 1e-6, "{}: score {} vs oracle {own}", g.article.id, g.score);
        if g.article.id != *id {
            assert!((own - score).abs() < 1e-6, "rank {rank}: {} ({own}) vs {id} ({score})", g.article.id);
        }
    }
}

#[test]
fn retrieval_equals_full_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let embedder = HashEmbedder;
    for n in [1usize, 10, 250, 1000] {
        let corpus = random_corpus(&mut rng, n);
        let index: Index<f32> = Index::build(&corpus, &embedder).unwrap();
        for _ in 0..25 {
            let query = random_title(&mut rng);
            let k = rng.random_range(1..=12);
            let got = index.retrieve(&embedder, &query, k).unwrap();
            let q = emonews_core::index::hash_embed::<f32>(&query).unwrap();
            assert_matches_oracle(&got, &oracle(&index, q.values()), k);
        }
    }
}

#[test]
fn exact_title_scores_one_at_rank_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let corpus = random_corpus(&mut rng, 300);
    let index: Index<f32> = Index::build(&corpus, &HashEmbedder).unwrap();
    for article in corpus.articles().iter().step_by(7) {
        let top = &index.retrieve(&HashEmbedder, &article.title, 1).unwrap()[0];
        assert!((top.score - 1.0).abs() <= 1e-6, "{}: {}", article.title, top.score);
        assert_eq!(top.article.title, article.title);
    }
}

#[test]
fn tie_break_by_id() {
    let articles = ["b", "a", "c"]
        .iter()
        .map(|id| NewsArticle {
            id: id.to_string(),
            title: "Same headline".into(),
            body: String::new(),
            language: "en".into(),
            published: None,
            source_url: None,
        })
        .collect();
    let corpus = Corpus::new(articles).unwrap();
    let index: Index<f64> = Index::build(&corpus, &HashEmbedder).unwrap();
    let ids: Vec<_> = index.retrieve(&HashEmbedder, "same headline", 3).unwrap().into_iter().map(|r| r.article.id).collect();
    assert_eq!(ids, ["a", "b", "c"]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn results_sorted_bounded_and_sized(seed in any::<u64>(), n in 1usize..60, k in 1usize..80, q in "[a-z ]{1,40}") {
        prop_assume!(!q.trim().is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let corpus = random_corpus(&mut rng, n);
        let index: Index<f32> = Index::build(&corpus, &HashEmbedder).unwrap();
        let got = index.retrieve(&HashEmbedder, &q, k).unwrap();
        prop_assert_eq!(got.len(), k.min(n));
        for w in got.windows(2) {
            prop_assert!(w[0].score > w[1].score || (w[0].score == w[1].score && w[0].article.id < w[1].article.id));
        }
        for r in &got {
            prop_assert!((-1.0..=1.0).contains(&r.score));
        }
    }
}
