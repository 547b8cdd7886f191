//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line (run with `--nocapture` to see them). Oracle checks are
//! implemented from scratch in this file so they share no code with the
//! library paths they verify.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use ragkit::corpus::{load_corpus, load_qrels, tokenize, CorpusFormat, Document, Query};
use ragkit::evalkit::{bleu, evaluate_run, rouge_l, rouge_n};
use ragkit::lexical::{build_index, idf, lexical_search, Bm25Params};
use ragkit::ragen::{
    confidence_filter, generate, GeneratedAnswer, GenerationProfile, MockBackend, RagenError,
};

use ragkit::semantic::{build_vector_index, cosine_sim, semantic_search, Embedding, EncoderHandle, VectorIndex};
use ragkit::trec::read_run;
use ragkit::{Ranking, Score};

macro_rules! check {
    ($cond:expr, $($arg:tt)+) => {
        match $cond {
            true => {}
            false => return Err(format!($($arg)+)),
        }
    };
}

fn criterion(name: &str, run: impl FnOnce() -> Result<(), String>) {
    match run() {
        Ok(()) => println!("[PASS] {name}"),
        Err(msg) => {
            println!("[FAIL] {name}: {msg}");
            panic!("{name}: {msg}");
        }
    }
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ragkit"))
}

fn run_bin(config: &Path, args: &[&str]) -> Result<Output, String> {
    let output = bin()
        .arg("--config")
        .arg(config)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !output.status.success() {
        return Err(format!(
            "command {args:?} failed: {}",
            String::from_utf8_lossy(&output.stderr)
        ));
    }
    Ok(output)
}

// ---------------------------------------------------------------- c1

fn brute_force_bm25(
    docs: &[Document],
    query: &Query,
    k: usize,
    k1: f64,
    b: f64,
) -> Vec<(String, f64)> {
    let tokenized: Vec<(String, Vec<String>)> = docs
        .iter()
        .map(|d| (d.id.clone(), tokenize(&d.indexable_text()).tokens().to_vec()))
        .collect();
    let n = docs.len() as f64;
    let avgdl =
        tokenized.iter().map(|(_, t)| t.len()).sum::<usize>() as f64 / docs.len() as f64;
    let query_tokens = tokenize(&query.text);
    let mut scored: Vec<(String, f64)> = tokenized
        .iter()
        .map(|(id, tokens)| {
            let dl = tokens.len() as f64;
            let mut score = 0.0;
            for term in query_tokens.iter() {
                let f = tokens.iter().filter(|t| t.as_str() == term).count() as f64;
                if f == 0.0 {
                    continue;
                }
                let nt = tokenized
                    .iter()
                    .filter(|(_, dts)| dts.iter().any(|t| t == term))
                    .count() as f64;
                let idf_val = ((n - nt + 0.5) / (nt + 0.5) + 1.0).ln();
                let tf = ((k1 + 1.0) * f) / (k1 * (1.0 - b + b * dl / avgdl) + f);
                score += idf_val * tf;
            }
            (id.clone(), score)
        })
        .filter(|(_, s)| *s > 0.0)
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

#[test]
fn c01_bm25_oracle_equivalence() {
    criterion("c01 BM25 oracle equivalence (50 random corpora, < 10 s)", || {
        let started = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let params = Bm25Params::<Score>::default();
        for round in 0..50 {
            let n_docs = rng.gen_range(1..=100);
            let vocab = rng.gen_range(5..=200);
            let docs: Vec<Document> = (0..n_docs)
                .map(|i| {
                    let len = rng.gen_range(1..=25);
                    let body: Vec<String> =
                        (0..len).map(|_| format!("w{}", rng.gen_range(0..vocab))).collect();
                    Document::new(format!("d{i:03}"), None, body.join(" ")).unwrap()
                })
                .collect();
            let index = build_index(&docs, params).unwrap();
            for q in 0..3 {
                let len = rng.gen_range(1..=8);
                let text: Vec<String> =
                    (0..len).map(|_| format!("w{}", rng.gen_range(0..vocab))).collect();
                let query = Query::new(format!("q{q}"), text.join(" ")).unwrap();
                let k = rng.gen_range(1..=15);
                let got = lexical_search(&index, &params, &query, k).unwrap();
                let want = brute_force_bm25(&docs, &query, k, params.k1, params.b);
                let got_ids: Vec<&str> = got.doc_ids().map(String::as_str).collect();
                let want_ids: Vec<&str> = want.iter().map(|(d, _)| d.as_str()).collect();
                check!(got_ids == want_ids, "round {round}: ordering diverged");
                for (entry, (_, expected)) in got.entries().iter().zip(&want) {
                    check!(
                        (entry.score - expected).abs() < 1e-9,
                        "round {round}: score {} vs oracle {expected}",
                        entry.score
                    );
                }
            }
        }
        let elapsed = started.elapsed();
        check!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}, budget is 10 s");
        Ok(())
    });
}

// ---------------------------------------------------------------- c2

#[test]
fn c02_closed_form_spot_values() {
    criterion("c02 closed-form idf and BM25 spot values", || {
        let docs = vec![
            Document::new("d1", None, "aspirin aspirin lowers fever").unwrap(),
            Document::new("d2", None, "statins treat high cholesterol").unwrap(),
            Document::new("d3", None, "exercise improves heart health").unwrap(),
            Document::new("d4", None, "sleep supports immune health").unwrap(),
        ];
        let params = Bm25Params::<Score>::default();
        let index = build_index(&docs, params).unwrap();
        // idf with N=4, n_t=1
        let got: Score = idf(&index, "aspirin");
        let want = (10.0f64 / 3.0).ln();
        check!((got - want).abs() < 1e-12, "idf {got} vs ln(10/3) {want}");
        // worked example: k1=1.2 b=0.75 f=2 |D|=4 avgDL=4 N=4 n_t=1
        check!(index.avg_doc_length() == 4.0, "fixture avgDL must be 4");
        let score: Score =
            ragkit::lexical::bm25_score(&index, &params, &tokenize("aspirin"), "d1").unwrap();
        let expected = 1.375 * (10.0f64 / 3.0).ln();
        check!((score - expected).abs() < 1e-9, "bm25 {score} vs {expected}");
        Ok(())
    });
}

// ---------------------------------------------------------------- c3

#[test]
fn c03_semantic_oracle_equivalence() {
    criterion("c03 semantic oracle equivalence (50 random indexes, dim 256)", || {
        let mut rng = ChaCha8Rng::seed_from_u64(303);
        let dim = 256;
        for round in 0..50 {
            let len = rng.gen_range(1..=1000);
            let mut entries: Vec<(String, Vec<f64>)> = (0..len)
                .map(|i| {
                    let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    (format!("d{i:04}"), v)
                })
                .collect();
            if len > 3 {
                // duplicated vectors exercise the doc-id tie-break
                let src = entries[0].1.clone();
                entries[2].1 = src;
            }
            let index = VectorIndex::from_entries(
                dim,
                entries
                    .iter()
                    .map(|(id, v)| (id.clone(), Embedding::new(v.clone()).unwrap()))
                    .collect(),
            )
            .unwrap();
            let query: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let k = rng.gen_range(1..=len);
            let got =
                semantic_search(&index, "q", &Embedding::new(query.clone()).unwrap(), k).unwrap();
            // exhaustive cosine sort, written out directly
            let mut oracle: Vec<(String, f64)> = entries
                .iter()
                .map(|(id, v)| {
                    let dot: f64 = v.iter().zip(&query).map(|(a, b)| a * b).sum();
                    let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                    let nq: f64 = query.iter().map(|a| a * a).sum::<f64>().sqrt();
                    (id.clone(), dot / (nv * nq))
                })
                .collect();
            oracle.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
            oracle.truncate(k);
            let got_ids: Vec<&str> = got.doc_ids().map(String::as_str).collect();
            let want_ids: Vec<&str> = oracle.iter().map(|(d, _)| d.as_str()).collect();
            check!(got_ids == want_ids, "round {round}: ordering diverged");
        }
        // self-similarity and scale invariance
        for _ in 0..10 {
            let v = Embedding::new((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>())
                .unwrap();
            let self_sim = cosine_sim(&v, &v).unwrap();
            check!((self_sim - 1.0).abs() < 1e-9, "cos(v, v) = {self_sim}");
            for c in [1e-6, 1.0, 1e6] {
                let sim = cosine_sim(&v, &v.scaled(c)).unwrap();
                check!((sim - 1.0).abs() < 1e-9, "cos(v, {c} v) = {sim}");
            }
        }
        Ok(())
    });
}

// ---------------------------------------------------------------- c4

#[test]
fn c04_metric_fixture_sheet() {
    criterion("c04 retrieval metric fixture sheet at k=10", || {
        let runs: Vec<Ranking> = read_run(&fixture("fixture_run.txt")).map_err(|e| e.to_string())?;
        let qrels = load_qrels(&fixture("qrels.tsv")).map_err(|e| e.to_string())?;
        let report = evaluate_run(&runs, &qrels, 10).map_err(|e| e.to_string())?;
        check!(report.query_count() == 5, "expected 5 queries, got {}", report.query_count());

        // hand-computed sheet (raw [0, 1] scale; DCG raw)
        let expect = [
            ("DCG", report.mean_dcg().unwrap(), 1.7893356884154934),
            ("NDCG", report.mean_ndcg().unwrap(), 0.6112616075675283),
            ("MRR", report.mean_mrr().unwrap(), 0.5666666666666667),
            ("Precision", report.mean_precision().unwrap(), 0.16),
            ("Recall", report.mean_recall().unwrap(), 0.8),
            ("F1", report.mean_f1().unwrap(), 0.262004662004662),
            ("MAP", report.mean_average_precision().unwrap(), 0.5666666666666667),
        ];
        for (name, got, want) in expect {
            check!((got - want).abs() < 1e-9, "{name}@10 {got} vs sheet {want}");
        }

        // spot values inside the sheet
        let q1 = &report.per_query["q1"];
        check!(q1.ndcg == Some(1.0), "ideal ranking NDCG must be exactly 1");
        check!(q1.average_precision == Some(1.0), "ideal ranking MAP must be exactly 1");
        let q2 = &report.per_query["q2"];
        check!(
            (q2.ndcg.unwrap() - 0.6309297535714575).abs() < 1e-9,
            "single relevant at rank 2: ndcg {}",
            q2.ndcg.unwrap()
        );
        let q3 = &report.per_query["q3"];
        check!(
            (q3.mrr - 1.0 / 3.0).abs() < 1e-9,
            "first relevant at rank 3: mrr {}",
            q3.mrr
        );
        Ok(())
    });
}

// ---------------------------------------------------------------- c5

mod text_reference {
    //! Brute-force ROUGE/BLEU written independently of the library.

    fn ngrams(tokens: &[String], n: usize) -> Vec<Vec<String>> {
        if tokens.len() < n {
            return Vec::new();
        }
        tokens.windows(n).map(|w| w.to_vec()).collect()
    }

    fn clipped(cand: &[Vec<String>], reference: &[Vec<String>]) -> usize {
        let mut pool: Vec<Option<&Vec<String>>> = reference.iter().map(Some).collect();
        let mut hits = 0;
        for gram in cand {
            if let Some(slot) = pool.iter_mut().find(|s| s.is_some_and(|g| g == gram)) {
                *slot = None;
                hits += 1;
            }
        }
        hits
    }

    fn f1(p: f64, r: f64) -> f64 {
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn rouge_n(cand: &[String], reference: &[String], n: usize) -> (f64, f64, f64) {
        let cg = ngrams(cand, n);
        let rg = ngrams(reference, n);
        let hits = clipped(&cg, &rg) as f64;
        let p = if cg.is_empty() { 0.0 } else { hits / cg.len() as f64 };
        let r = if rg.is_empty() { 0.0 } else { hits / rg.len() as f64 };
        (p, r, f1(p, r))
    }

    pub fn rouge_l(cand: &[String], reference: &[String]) -> (f64, f64, f64) {
        let mut table = vec![vec![0usize; reference.len() + 1]; cand.len() + 1];
        for i in 1..=cand.len() {
            for j in 1..=reference.len() {
                table[i][j] = if cand[i - 1] == reference[j - 1] {
                    table[i - 1][j - 1] + 1
                } else {
                    table[i - 1][j].max(table[i][j - 1])
                };
            }
        }
        let lcs = table[cand.len()][reference.len()] as f64;
        let p = if cand.is_empty() { 0.0 } else { lcs / cand.len() as f64 };
        let r = if reference.is_empty() { 0.0 } else { lcs / reference.len() as f64 };
        (p, r, f1(p, r))
    }

    pub fn bleu(cand: &[String], reference: &[String], max_n: usize) -> f64 {
        let c = cand.len();
        let r = reference.len();
        if c == 0 || r == 0 {
            return 0.0;
        }
        let orders = max_n.min(c);
        let mut product = 1.0;
        for n in 1..=orders {
            let cg = ngrams(cand, n);
            let rg = ngrams(reference, n);
            let hits = clipped(&cg, &rg) as f64;
            let total = cg.len() as f64;
            let p = if n == 1 { hits / total } else { (hits + 1.0) / (total + 1.0) };
            if p == 0.0 {
                return 0.0;
            }
            product *= p.powf(1.0 / orders as f64);
        }
        let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
        bp * product
    }
}

#[test]
fn c05_generation_metric_oracle() {
    criterion("c05 ROUGE/BLEU oracle equivalence (200 random pairs)", || {
        const VOCAB: [&str; 9] =
            ["alpha", "beta", "gamma", "delta", "eps", "zeta", "eta", "theta", "iota"];
        let mut rng = ChaCha8Rng::seed_from_u64(505);
        let mut sample = |max_len: usize| -> Vec<String> {
            let len = rng.gen_range(0..=max_len);
            (0..len).map(|_| VOCAB[rng.gen_range(0..VOCAB.len())].to_string()).collect()
        };
        for round in 0..200 {
            let cand_tokens = sample(12);
            let ref_tokens = sample(12);
            let cand = cand_tokens.join(" ");
            let reference = ref_tokens.join(" ");
            for n in [1usize, 2] {
                let got = rouge_n::<Score>(&cand, &reference, n).map_err(|e| e.to_string())?;
                let (p, r, f) = text_reference::rouge_n(&cand_tokens, &ref_tokens, n);
                check!((got.precision - p).abs() < 1e-9, "round {round} rouge{n} precision");
                check!((got.recall - r).abs() < 1e-9, "round {round} rouge{n} recall");
                check!((got.f1 - f).abs() < 1e-9, "round {round} rouge{n} f1");
            }
            let got = rouge_l::<Score>(&cand, &reference).map_err(|e| e.to_string())?;
            let (p, r, f) = text_reference::rouge_l(&cand_tokens, &ref_tokens);
            check!((got.precision - p).abs() < 1e-9, "round {round} rougeL precision");
            check!((got.recall - r).abs() < 1e-9, "round {round} rougeL recall");
            check!((got.f1 - f).abs() < 1e-9, "round {round} rougeL f1");
            let got: Score = bleu(&cand, &reference, 4).map_err(|e| e.to_string())?;
            let want = text_reference::bleu(&cand_tokens, &ref_tokens, 4);
            check!((got - want).abs() < 1e-9, "round {round} bleu {got} vs {want}");

            if !cand_tokens.is_empty() {
                check!(
                    rouge_n::<Score>(&cand, &cand, 1).unwrap().f1 == 1.0,
                    "identity rouge1 must be exactly 1"
                );
                check!(
                    rouge_l::<Score>(&cand, &cand).unwrap().f1 == 1.0,
                    "identity rougeL must be exactly 1"
                );
                check!(
                    bleu::<Score>(&cand, &cand, 4).unwrap() == 1.0,
                    "identity bleu must be exactly 1"
                );
            }
        }
        Ok(())
    });
}

// ---------------------------------------------------------------- c6

#[test]
fn c06_profile_fidelity_golden() {
    criterion("c06 decoding-profile fidelity via recorded mock requests", || {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let out = dir.path().join("out");
        let script = dir.path().join("default.json");
        fs::write(&script, r#"{"default": {"text": "A", "token_logprobs": [0.0]}}"#)
            .map_err(|e| e.to_string())?;
        let questions = dir.path().join("one_question.jsonl");
        fs::write(&questions, "{\"_id\":\"g1\",\"text\":\"What does aspirin do?\"}\n")
            .map_err(|e| e.to_string())?;

        struct Expect {
            task: &'static str,
            system: &'static str,
            max_tokens: u64,
            temperature: f64,
            top_p: f64,
            frequency_penalty: f64,
            presence_penalty: f64,
            stop: serde_json::Value,
        }
        let table = [
            Expect {
                task: "closed_ended",
                system: "You are an expert medical AI assistant. Answer the following question using only one letter: A, B, C, or D.",
                max_tokens: 2,
                temperature: 0.1,
                top_p: 0.7,
                frequency_penalty: 0.5,
                presence_penalty: 0.1,
                stop: serde_json::json!(["\n"]),
            },
            Expect {
                task: "long_form",
                system: "You are a biomedical research expert. Generate precise and well-structured answers.",
                max_tokens: 300,
                temperature: 0.2,
                top_p: 0.8,
                frequency_penalty: 0.0,
                presence_penalty: 0.0,
                stop: serde_json::Value::Null,
            },
            Expect {
                task: "short_form",
                system: "You are an expert medical AI assistant. Provide concise and accurate answers.",
                max_tokens: 50,
                temperature: 0.2,
                top_p: 0.85,
                frequency_penalty: 0.2,
                presence_penalty: 0.0,
                stop: serde_json::Value::Null,
            },
        ];
        for expect in table {
            let log = out.join(format!("requests-{}.jsonl", expect.task));
            let config = dir.path().join(format!("config-{}.toml", expect.task));
            fs::write(
                &config,
                format!(
                    "[corpus]\ndocs = \"{docs}\"\n\n[index]\nlexical = \"{out}/lexical.json\"\nvector = \"{out}/vector.bin\"\n\n[backend]\nkind = \"mock\"\nscript = \"{script}\"\nrequest_log = \"{log}\"\nmax_in_flight = 1\n\n[output]\ndir = \"{out}\"\n",
                    docs = fixture("corpus.jsonl").display(),
                    out = out.display(),
                    script = script.display(),
                    log = log.display(),
                ),
            )
            .map_err(|e| e.to_string())?;
            if !out.join("lexical.json").exists() {
                run_bin(&config, &["index"])?;
            }
            run_bin(
                &config,
                &[
                    "answer",
                    "--questions",
                    questions.to_str().unwrap(),
                    "--task",
                    expect.task,
                    "--output",
                    out.join(format!("answers-{}.jsonl", expect.task)).to_str().unwrap(),
                ],
            )?;
            let recorded = fs::read_to_string(&log).map_err(|e| e.to_string())?;
            let lines: Vec<&str> = recorded.lines().collect();
            check!(lines.len() == 1, "{}: expected exactly one request, got {}", expect.task, lines.len());
            let request: serde_json::Value =
                serde_json::from_str(lines[0]).map_err(|e| e.to_string())?;
            check!(request["system"] == serde_json::json!(expect.system), "{}: system message", expect.task);
            check!(request["max_tokens"] == serde_json::json!(expect.max_tokens), "{}: max_tokens", expect.task);
            check!(request["temperature"] == serde_json::json!(expect.temperature), "{}: temperature", expect.task);
            check!(request["top_p"] == serde_json::json!(expect.top_p), "{}: top_p", expect.task);
            check!(
                request["frequency_penalty"] == serde_json::json!(expect.frequency_penalty),
                "{}: frequency_penalty",
                expect.task
            );
            check!(
                request["presence_penalty"] == serde_json::json!(expect.presence_penalty),
                "{}: presence_penalty",
                expect.task
            );
            check!(request["stop"] == expect.stop, "{}: stop sequence", expect.task);
            check!(request["logprobs"] == serde_json::json!(true), "{}: logprobs flag", expect.task);
        }
        Ok(())
    });
}

// ---------------------------------------------------------------- c7

#[test]
fn c07_confidence_contract() {
    criterion("c07 confidence rule and one-shot refinement (20 scenarios)", || {
        // confidence = exp(mean(token logprobs))
        let cases: [(&[f64], f64); 4] = [
            (&[0.0], 1.0),
            (&[(0.5f64).ln(), (0.5f64).ln()], 0.5),
            (&[-1.0, -2.0, -3.0], (-2.0f64).exp()),
            (&[-0.25], (-0.25f64).exp()),
        ];
        for (logprobs, want) in cases {
            let backend = MockBackend::echo("answer", Some(logprobs.to_vec()));
            let bundle = ragkit::ragen::build_prompt(
                ragkit::ragen::TaskKind::ShortForm,
                &Query::new("q", "anything").unwrap(),
                None,
                &[],
                100,
            );
            let ans = generate(&bundle, &GenerationProfile::short_form(), &backend)
                .map_err(|e| e.to_string())?;
            let got = ans.confidence.ok_or("confidence missing")?;
            check!((got - want).abs() < 1e-9, "confidence {got} vs {want}");
        }

        // 20 scripted filter scenarios: (original, retry, threshold)
        let scenarios: [(f64, Option<f64>, f64); 20] = [
            (0.90, Some(0.95), 0.5),
            (0.50, Some(0.10), 0.5),
            (0.49, Some(0.60), 0.5),
            (0.30, Some(0.40), 0.5),
            (0.30, Some(0.20), 0.5),
            (0.05, Some(0.90), 0.1),
            (0.05, Some(0.06), 0.1),
            (0.05, Some(0.01), 0.1),
            (0.80, None, 0.9),
            (0.95, None, 0.9),
            (0.001, Some(0.002), 0.01),
            (0.009, Some(0.9), 0.01),
            (0.10, Some(0.10), 0.1),
            (0.099, Some(0.099), 0.1),
            (0.2, Some(0.3), 0.25),
            (0.2, Some(0.25), 0.25),
            (0.7, Some(0.1), 0.75),
            (0.75, Some(0.1), 0.75),
            (0.0001, None, 0.5),
            (0.999, Some(0.9999), 0.999),
        ];
        for (i, (orig_conf, retry_conf, threshold)) in scenarios.into_iter().enumerate() {
            let original =
                GeneratedAnswer::from_parts("original".into(), Some(vec![orig_conf.ln()]))
                    .map_err(|e| e.to_string())?;
            let regen_calls = std::cell::Cell::new(0u32);
            let result = match retry_conf {
                Some(rc) => {
                    let regen = || {
                        regen_calls.set(regen_calls.get() + 1);
                        GeneratedAnswer::from_parts("retry".into(), Some(vec![rc.ln()]))
                    };
                    confidence_filter(original.clone(), threshold, Some(regen))
                }
                None => confidence_filter(
                    original.clone(),
                    threshold,
                    None::<fn() -> Result<GeneratedAnswer, RagenError>>,
                ),
            };
            let below = orig_conf < threshold;
            if below {
                if retry_conf.is_some() {
                    check!(regen_calls.get() == 1, "scenario {i}: exactly one regeneration");
                }
                check!(result.refined, "scenario {i}: refined flag after threshold breach");
                match retry_conf {
                    Some(rc) if rc >= threshold => {
                        check!(result.text == "retry", "scenario {i}: passing retry wins");
                    }
                    Some(rc) => {
                        let want = if rc >= orig_conf { "retry" } else { "original" };
                        check!(result.text == want, "scenario {i}: higher-confidence candidate wins");
                    }
                    None => check!(result.text == "original", "scenario {i}: original kept"),
                }
            } else {
                check!(regen_calls.get() == 0, "scenario {i}: no regeneration above threshold");
                check!(!result.refined, "scenario {i}: untouched answer not flagged");
                check!(result.text == "original", "scenario {i}: answer unchanged");
            }
        }
        Ok(())
    });
}

// ---------------------------------------------------------------- c8

fn pipeline_outputs(dir: &Path, docs_path: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let out = dir.join("out");
    let config = dir.join("config.toml");
    fs::write(
        &config,
        format!(
            "[corpus]\ndocs = \"{docs}\"\nqueries = \"{queries}\"\nqrels = \"{qrels}\"\n\n[index]\nlexical = \"{out}/lexical.json\"\nvector = \"{out}/vector.bin\"\n\n[backend]\nkind = \"mock\"\nscript = \"{script}\"\nmax_in_flight = 1\n\n[output]\ndir = \"{out}\"\n",
            docs = docs_path.display(),
            queries = fixture("queries.jsonl").display(),
            qrels = fixture("qrels.tsv").display(),
            script = fixture("mock_closed.json").display(),
            out = out.display(),
        ),
    )
    .map_err(|e| e.to_string())?;
    run_bin(&config, &["index"])?;
    run_bin(&config, &["search", "--mode", "hybrid", "-k", "10", "--output", out.join("run.txt").to_str().unwrap()])?;
    run_bin(&config, &[
        "eval-retrieval",
        "--run",
        out.join("run.txt").to_str().unwrap(),
        "-k",
        "10",
        "--json",
        out.join("retrieval.json").to_str().unwrap(),
    ])?;
    run_bin(&config, &[
        "answer",
        "--questions",
        fixture("questions_closed.jsonl").to_str().unwrap(),
        "--task",
        "closed_ended",
        "--output",
        out.join("answers.jsonl").to_str().unwrap(),
    ])?;
    run_bin(&config, &[
        "eval-qa",
        "--task",
        "closed_ended",
        "--answers",
        out.join("answers.jsonl").to_str().unwrap(),
        "--gold",
        fixture("gold_closed.jsonl").to_str().unwrap(),
        "--json",
        out.join("qa.json").to_str().unwrap(),
    ])?;
    ["lexical.json", "vector.bin", "run.txt", "retrieval.json", "answers.jsonl", "qa.json"]
        .iter()
        .map(|name| {
            fs::read(out.join(name))
                .map(|bytes| (name.to_string(), bytes))
                .map_err(|e| format!("{name}: {e}"))
        })
        .collect()
}

#[test]
fn c08_end_to_end_determinism() {
    criterion("c08 pipeline determinism across runs and doc permutations (< 30 s)", || {
        let started = Instant::now();
        let first = tempfile::tempdir().map_err(|e| e.to_string())?;
        let second = tempfile::tempdir().map_err(|e| e.to_string())?;
        let permuted = tempfile::tempdir().map_err(|e| e.to_string())?;

        // a permuted copy of the corpus: same documents, reversed order
        let docs = load_corpus(&fixture("corpus.jsonl"), CorpusFormat::BeirJsonl)
            .map_err(|e| e.to_string())?;
        let mut reversed = docs.clone();
        reversed.reverse();
        let permuted_docs_path = permuted.path().join("corpus_reversed.jsonl");
        let mut buf = Vec::new();
        ragkit::corpus::save_corpus(&mut buf, &reversed).map_err(|e| e.to_string())?;
        fs::write(&permuted_docs_path, buf).map_err(|e| e.to_string())?;

        let base = pipeline_outputs(first.path(), &fixture("corpus.jsonl"))?;
        let rerun = pipeline_outputs(second.path(), &fixture("corpus.jsonl"))?;
        let shuffled = pipeline_outputs(permuted.path(), &permuted_docs_path)?;
        for ((name, a), (_, b)) in base.iter().zip(&rerun) {
            check!(a == b, "{name} differs between two identical runs");
        }
        for ((name, a), (_, b)) in base.iter().zip(&shuffled) {
            check!(a == b, "{name} differs under document insertion-order permutation");
        }
        let elapsed = started.elapsed();
        check!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}, budget is 30 s");
        Ok(())
    });
}

// ---------------------------------------------------------------- c9

#[test]
fn c09_semantic_beats_lexical_on_morphological_variants() {
    criterion("c09 semantic recall beats lexical on morphological variants", || {
        let docs = load_corpus(&fixture("morph/corpus.jsonl"), CorpusFormat::BeirJsonl)
            .map_err(|e| e.to_string())?;
        let queries = ragkit::corpus::load_queries(&fixture("morph/queries.jsonl"))
            .map_err(|e| e.to_string())?;
        let qrels = load_qrels(&fixture("morph/qrels.tsv")).map_err(|e| e.to_string())?;

        // oracle validation of the fixture construction
        let params = Bm25Params::<Score>::default();
        for query in &queries {
            let brute = brute_force_bm25(&docs, query, 10, params.k1, params.b);
            for (doc_id, _) in &brute {
                check!(
                    qrels.grade(&query.id, doc_id).unwrap_or(0) == 0,
                    "fixture invalid: lexical oracle found relevant doc {doc_id} for {}",
                    query.id
                );
            }
        }
        let encoder = EncoderHandle::local_test();
        for query in &queries {
            let qv: Embedding<Score> = encoder.encode(&query.text).map_err(|e| e.to_string())?;
            let mut oracle: Vec<(String, f64)> = docs
                .iter()
                .map(|d| {
                    let dv: Embedding<Score> = encoder.encode(&d.indexable_text()).unwrap();
                    let dot: f64 =
                        qv.values().iter().zip(dv.values()).map(|(a, b)| a * b).sum();
                    let nq: f64 = qv.values().iter().map(|a| a * a).sum::<f64>().sqrt();
                    let nd: f64 = dv.values().iter().map(|a| a * a).sum::<f64>().sqrt();
                    (d.id.clone(), dot / (nq * nd))
                })
                .collect();
            oracle.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
            let top10: Vec<&str> = oracle.iter().take(10).map(|(d, _)| d.as_str()).collect();
            for (doc_id, grade) in qrels.judged(&query.id).unwrap() {
                if *grade >= 1 {
                    check!(
                        top10.contains(&doc_id.as_str()),
                        "fixture invalid: semantic oracle misses {doc_id} for {}",
                        query.id
                    );
                }
            }
        }

        // the real search paths
        let lexical_index = build_index(&docs, params).unwrap();
        let vector_index = build_vector_index::<Score>(&encoder, &docs).map_err(|e| e.to_string())?;
        let mut lexical_runs = Vec::new();
        let mut semantic_runs = Vec::new();
        for query in &queries {
            lexical_runs.push(lexical_search(&lexical_index, &params, query, 10).unwrap());
            let qv = encoder.encode(&query.text).map_err(|e| e.to_string())?;
            semantic_runs.push(semantic_search(&vector_index, &query.id, &qv, 10).unwrap());
        }
        let lexical_report = evaluate_run(&lexical_runs, &qrels, 10).map_err(|e| e.to_string())?;
        let semantic_report = evaluate_run(&semantic_runs, &qrels, 10).map_err(|e| e.to_string())?;
        let lexical_recall = lexical_report.mean_recall().unwrap();
        let semantic_recall = semantic_report.mean_recall().unwrap();
        check!(
            semantic_recall > lexical_recall,
            "semantic recall {semantic_recall} must strictly beat lexical {lexical_recall}"
        );
        Ok(())
    });
}

// ---------------------------------------------------------------- c10

#[test]
fn c10_sweep_accuracy_non_increasing() {
    criterion("c10 top-k sweep accuracy non-increasing with the degrading mock", || {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let out = dir.path().join("out");
        let config = dir.path().join("config.toml");
        fs::write(
            &config,
            format!(
                "[corpus]\ndocs = \"{docs}\"\n\n[index]\nlexical = \"{out}/lexical.json\"\nvector = \"{out}/vector.bin\"\n\n[backend]\nkind = \"mock\"\nscript = \"{script}\"\nmax_in_flight = 1\n\n[output]\ndir = \"{out}\"\n",
                docs = fixture("corpus.jsonl").display(),
                script = fixture("mock_degrading.json").display(),
                out = out.display(),
            ),
        )
        .map_err(|e| e.to_string())?;
        run_bin(&config, &["index"])?;
        run_bin(&config, &[
            "sweep-topk",
            "--questions",
            fixture("questions_closed.jsonl").to_str().unwrap(),
            "--gold",
            fixture("gold_closed.jsonl").to_str().unwrap(),
            "--task",
            "closed_ended",
            "--k-values",
            "1,2,4,8",
            "--output",
            out.join("sweep.csv").to_str().unwrap(),
        ])?;
        let csv = fs::read_to_string(out.join("sweep.csv")).map_err(|e| e.to_string())?;
        let mut lines = csv.lines();
        check!(lines.next() == Some("k,accuracy"), "header row first");
        let mut rows = Vec::new();
        for line in lines {
            let (k, acc) = line.split_once(',').ok_or(format!("bad row {line:?}"))?;
            let k: usize = k.parse().map_err(|_| format!("bad k in {line:?}"))?;
            let acc: f64 = acc.parse().map_err(|_| format!("bad accuracy in {line:?}"))?;
            rows.push((k, acc));
        }
        check!(rows.len() == 4, "expected 4 data rows, got {}", rows.len());
        check!(
            rows.iter().map(|(k, _)| *k).collect::<Vec<_>>() == vec![1, 2, 4, 8],
            "k column must list the requested values"
        );
        for pair in rows.windows(2) {
            check!(
                pair[1].1 <= pair[0].1,
                "accuracy must be non-increasing: {:?} then {:?}",
                pair[0],
                pair[1]
            );
        }
        check!(
            rows.last().unwrap().1 < rows.first().unwrap().1,
            "the degrading mock must actually lower accuracy over the sweep"
        );
        Ok(())
    });
}
