//! BM25 oracle equivalence: `lexical_search` must match a brute-force
//! scorer that works straight from the documents, with identical ordering
//! and scores within 1e-9.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use ragkit::corpus::{tokenize, Document, Query};
use ragkit::lexical::{build_index, lexical_search, Bm25Params};

/// Direct evaluation of the ranking function from raw documents: no
/// inverted index, no shared statistics code.
mod oracle {
    use std::collections::HashMap;

    use ragkit::corpus::{tokenize, Document};

    pub struct BruteForce {
        doc_ids: Vec<String>,
        doc_tokens: HashMap<String, Vec<String>>,
        avgdl: f64,
        n: usize,
    }

    impl BruteForce {
        pub fn new(docs: &[Document]) -> Self {
            let mut doc_tokens = HashMap::new();
            let mut doc_ids = Vec::new();
            for doc in docs {
                doc_ids.push(doc.id.clone());
                doc_tokens.insert(doc.id.clone(), tokenize(&doc.indexable_text()).tokens().to_vec());
            }
            let total: usize = doc_tokens.values().map(Vec::len).sum();
            let avgdl = total as f64 / docs.len() as f64;
            Self { doc_ids, doc_tokens, avgdl, n: docs.len() }
        }

        fn doc_freq(&self, term: &str) -> usize {
            self.doc_tokens
                .values()
                .filter(|tokens| tokens.iter().any(|t| t == term))
                .count()
        }

        fn idf(&self, term: &str) -> f64 {
            let n = self.n as f64;
            let nt = self.doc_freq(term) as f64;
            ((n - nt + 0.5) / (nt + 0.5) + 1.0).ln()
        }

        pub fn score(&self, query_tokens: &[String], doc_id: &str, k1: f64, b: f64) -> f64 {
            let tokens = &self.doc_tokens[doc_id];
            let dl = tokens.len() as f64;
            let mut score = 0.0;
            for term in query_tokens {
                let f = tokens.iter().filter(|t| *t == term).count() as f64;
                if f == 0.0 {
                    continue;
                }
                let tf = ((k1 + 1.0) * f) / (k1 * (1.0 - b + b * dl / self.avgdl) + f);
                score += self.idf(term) * tf;
            }
            score
        }

        /// Score every document, keep matches, sort by score descending
        /// then doc id ascending, truncate.
        pub fn search(&self, query_tokens: &[String], k: usize, k1: f64, b: f64) -> Vec<(String, f64)> {
            let mut scored: Vec<(String, f64)> = self
                .doc_ids
                .iter()
                .map(|id| (id.clone(), self.score(query_tokens, id, k1, b)))
                .filter(|(_, s)| *s > 0.0)
                .collect();
            scored.sort_by(|a, b| {
                b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0))
            });
            scored.truncate(k);
            scored
        }
    }
}

fn random_corpus(rng: &mut ChaCha8Rng, max_docs: usize, vocab: usize) -> Vec<Document> {
    let n_docs = rng.gen_range(1..=max_docs);
    (0..n_docs)
        .map(|i| {
            let len = rng.gen_range(1..=30);
            let body: Vec<String> =
                (0..len).map(|_| format!("w{}", rng.gen_range(0..vocab))).collect();
            Document::new(format!("d{i:03}"), None, body.join(" ")).unwrap()
        })
        .collect()
}

fn random_query(rng: &mut ChaCha8Rng, vocab: usize, id: usize) -> Query {
    let len = rng.gen_range(1..=8);
    let text: Vec<String> = (0..len).map(|_| format!("w{}", rng.gen_range(0..vocab))).collect();
    Query::new(format!("q{id}"), text.join(" ")).unwrap()
}

#[test]
fn search_matches_brute_force_on_random_corpora() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for round in 0..50 {
        let corpus = random_corpus(&mut rng, 100, 200);
        let oracle = oracle::BruteForce::new(&corpus);
        let params = Bm25Params::<f64>::default();
        let index = build_index(&corpus, params).unwrap();
        for q in 0..4 {
            let query = random_query(&mut rng, 200, q);
            let k = rng.gen_range(1..=20);
            let got = lexical_search(&index, &params, &query, k).unwrap();
            let want = oracle.search(tokenize(&query.text).tokens(), k, params.k1, params.b);
            let got_ids: Vec<&str> = got.doc_ids().map(String::as_str).collect();
            let want_ids: Vec<&str> = want.iter().map(|(d, _)| d.as_str()).collect();
            assert_eq!(got_ids, want_ids, "ordering diverged in round {round} query {q}");
            for (entry, (_, want_score)) in got.entries().iter().zip(&want) {
                assert!(
                    (entry.score - want_score).abs() < 1e-9,
                    "score diverged for {}: {} vs {want_score}",
                    entry.doc_id,
                    entry.score
                );
            }
        }
    }
}

#[test]
fn scores_are_non_negative_and_matches_positive() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let corpus = random_corpus(&mut rng, 40, 50);
        let params = Bm25Params::<f64>::default();
        let index = build_index(&corpus, params).unwrap();
        let query = random_query(&mut rng, 50, 0);
        let hits = lexical_search(&index, &params, &query, 100).unwrap();
        for entry in hits.entries() {
            assert!(entry.score > 0.0, "retained doc must contain a query term");
        }
    }
}

#[test]
fn document_insertion_order_never_changes_results() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..10 {
        let corpus = random_corpus(&mut rng, 60, 80);
        let mut shuffled = corpus.clone();
        shuffled.shuffle(&mut rng);
        let params = Bm25Params::<f64>::default();
        let a = build_index(&corpus, params).unwrap();
        let b = build_index(&shuffled, params).unwrap();
        assert_eq!(a, b, "index statistics must be insertion-order independent");
        let query = random_query(&mut rng, 80, 0);
        let hits_a = lexical_search(&a, &params, &query, 10).unwrap();
        let hits_b = lexical_search(&b, &params, &query, 10).unwrap();
        assert_eq!(hits_a, hits_b);
    }
}

#[test]
fn log_base_change_rescales_scores_but_preserves_ranking() {
    // Scoring with any fixed log base is a uniform positive rescaling of
    // the natural-log scores, so rankings cannot move.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let corpus = random_corpus(&mut rng, 50, 60);
    let oracle = oracle::BruteForce::new(&corpus);
    let params = Bm25Params::<f64>::default();
    let index = build_index(&corpus, params).unwrap();
    for q in 0..5 {
        let query = random_query(&mut rng, 60, q);
        let tokens = tokenize(&query.text);
        let natural = oracle.search(tokens.tokens(), corpus.len(), params.k1, params.b);
        let hits = lexical_search(&index, &params, &query, corpus.len()).unwrap();
        // base-2 scores are natural scores / ln(2): same order
        let mut base2 = natural.clone();
        for item in &mut base2 {
            item.1 /= std::f64::consts::LN_2;
        }
        base2.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        let ids_base2: Vec<&str> = base2.iter().map(|(d, _)| d.as_str()).collect();
        let ids_impl: Vec<&str> = hits.doc_ids().map(String::as_str).collect();
        assert_eq!(ids_base2, ids_impl);
    }
}
