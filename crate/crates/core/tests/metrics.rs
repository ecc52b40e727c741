mod common;

use std::collections::HashMap;
use std::sync::Arc;

use albumstory::backends::Backends;
use albumstory::metrics::{aggregate, caption_metrics, corpus_bleu, render_table, rouge_l, tokenize, EvalStage, Evaluator, Judge, MetricSelection};
use albumstory::model::RunConfig;
use albumstory::pipeline::{Engine, ImageStore};
use albumstory::prompt::TemplateSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Plain corpus BLEU: clipped n-gram precisions, geometric mean, brevity penalty.
fn bleu_oracle(cands: &[Vec<String>], refs: &[Vec<String>], max_n: usize) -> f64 {
    let mut log_p = 0.0;
    for n in 1..=max_n {
        let (mut hit, mut total) = (0usize, 0usize);
        for (c, r) in cands.iter().zip(refs) {
            let mut rc: HashMap<&[String], usize> = HashMap::new();
            for g in r.windows(n) {
                *rc.entry(g).or_default() += 1;
            }
            let mut cc: HashMap<&[String], usize> = HashMap::new();
            for g in c.windows(n) {
                *cc.entry(g).or_default() += 1;
            }
            for (g, k) in cc {
                hit += k.min(rc.get(g).copied().unwrap_or(0));
                total += k;
            }
        }
        if hit == 0 || total == 0 {
            return 0.0;
        }
        log_p += (hit as f64 / total as f64).ln() / max_n as f64;
    }
    let c: usize = cands.iter().map(Vec::len).sum();
    let r: usize = refs.iter().map(Vec::len).sum();
    let bp = if c >= r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    bp * log_p.exp()
}

fn rouge_oracle(c: &[String], r: &[String]) -> f64 {
    let mut t = vec![vec![0usize; r.len() + 1]; c.len() + 1];
    for i in 0..c.len() {
        for j in 0..r.len() {
            t[i + 1][j + 1] = if c[i] == r[j] { t[i][j] + 1 } else { t[i][j + 1].max(t[i + 1][j]) };
        }
    }
    let lcs = t[c.len()][r.len()] as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let (p, rec) = (lcs / c.len() as f64, lcs / r.len() as f64);
    let b2 = 1.2f64 * 1.2;
    (1.0 + b2) * p * rec / (rec + b2 * p)
}

fn random_sentence(rng: &mut ChaCha8Rng) -> Vec<String> {
    const WORDS: &[&str] = &["a", "dog", "runs", "on", "the", "beach", "red", "kite", "sky", "blue"];
    (0..rng.gen_range(1..9)).map(|_| WORDS[rng.gen_range(0..WORDS.len())].to_string()).collect()
}

#[test]
fn identity_corpus_scores_full_marks() {
    let corpus = ["a dog runs on the beach", "two kites in a blue sky", "the old lighthouse at dusk"];
    let s = caption_metrics(&corpus, &corpus).unwrap();
    assert!((s.bleu1 - 100.0).abs() < 0.01);
    assert!((s.bleu4 - 100.0).abs() < 0.01);
    assert!((s.rouge_l - 100.0).abs() < 0.01);
}

#[test]
fn one_substitution_in_three() {
    let s = caption_metrics(&["a b c"], &["a b d"]).unwrap();
    assert!((s.bleu1 - 200.0 / 3.0).abs() < 0.01, "{}", s.bleu1);
}

#[test]
fn bleu_and_rouge_match_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let k = rng.gen_range(1..5);
        let cands: Vec<Vec<String>> = (0..k).map(|_| random_sentence(&mut rng)).collect();
        let refs: Vec<Vec<String>> = (0..k).map(|_| random_sentence(&mut rng)).collect();
        for n in [1, 4] {
            assert!((corpus_bleu(&cands, &refs, n) - bleu_oracle(&cands, &refs, n)).abs() < 1e-12);
        }
        assert!((rouge_l(&cands[0], &refs[0]) - rouge_oracle(&cands[0], &refs[0])).abs() < 1e-12);
    }
}

#[test]
fn tokenizer_lowercases_and_strips_punctuation() {
    assert_eq!(tokenize("A Dog, running!"), ["a", "dog", "running"]);
}

#[test]
fn evaluates_a_mock_run() {
    let (album, store) = common::fixture_album(5);
    let store: Arc<dyn ImageStore> = Arc::new(store);
    let backends = Backends::mock(0);
    let trace = Engine::new(backends.clone(), TemplateSet::defaults(), store.clone(), RunConfig::default())
        .run(&album)
        .unwrap();

    let offline = Evaluator::new(backends.embedder.clone(), None, store.clone(), MetricSelection::default());
    let reports = offline.evaluate_trace(&trace);
    let stages: Vec<EvalStage> = reports.iter().map(|r| r.stage).collect();
    assert_eq!(stages, EvalStage::ALL);
    for r in &reports {
        assert!(r.emd.is_measured(), "{:?}", r.emd);
        assert!(!r.detail.is_measured());
        assert!(r.sentence_count >= 5);
    }

    let judge = Judge::new(backends.judge.clone(), TemplateSet::defaults(), Default::default());
    let online = Evaluator::new(backends.embedder.clone(), Some(judge), store, MetricSelection::default());
    let reports = online.evaluate_trace(&trace);
    assert!(reports.iter().all(|r| r.detail.is_measured() && r.coherence.is_measured() && r.coverage.is_measured()));

    let table = render_table(&aggregate(&reports));
    assert_eq!(table.lines().count(), 2 + 4);
    for stage in EvalStage::ALL {
        assert!(table.contains(stage.as_str()));
    }
}
