//! Corpus BLEU-1/4, ROUGE-L and CIDEr for captions, one reference per
//! candidate, following the COCO caption evaluation conventions. Every score
//! is reported on a 0-100 scale (CIDEr as 100 x the COCO value).

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CaptionMetricError {
    #[error("{candidates} candidates but {references} references")]
    LengthMismatch { candidates: usize, references: usize },
    #[error("no captions to score")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaptionScores {
    pub bleu1: f64,
    pub bleu4: f64,
    pub rouge_l: f64,
    pub cider: f64,
}

const ROUGE_BETA: f64 = 1.2;
const CIDER_SIGMA: f64 = 6.0;

/// Lower-cases and drops punctuation.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

fn ngrams(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut out = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *out.entry(w).or_insert(0) += 1;
        }
    }
    out
}

/// Corpus BLEU up to `max_n`, with the brevity penalty. An order with no
/// candidate n-grams at all scores zero precision.
pub fn corpus_bleu(candidates: &[Vec<String>], references: &[Vec<String>], max_n: usize) -> f64 {
    let (mut cand_len, mut ref_len) = (0usize, 0usize);
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let (mut matched, mut total) = (0usize, 0usize);
        for (c, r) in candidates.iter().zip(references) {
            let rc = ngrams(r, n);
            for (g, k) in ngrams(c, n) {
                matched += k.min(rc.get(g).copied().unwrap_or(0));
                total += k;
            }
        }
        if matched == 0 || total == 0 {
            return 0.0;
        }
        log_sum += (matched as f64 / total as f64).ln();
    }
    for (c, r) in candidates.iter().zip(references) {
        cand_len += c.len();
        ref_len += r.len();
    }
    let bp = if cand_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    };
    bp * (log_sum / max_n as f64).exp()
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F-measure of one pair, with recall weighted by beta = 1.2.
pub fn rouge_l(candidate: &[String], reference: &[String]) -> f64 {
    let lcs = lcs_len(candidate, reference);
    if lcs == 0 {
        return 0.0;
    }
    let p = lcs as f64 / candidate.len() as f64;
    let r = lcs as f64 / reference.len() as f64;
    let b2 = ROUGE_BETA * ROUGE_BETA;
    (1.0 + b2) * p * r / (r + b2 * p)
}

struct TfIdf<'a> {
    vecs: [HashMap<&'a [String], f64>; 4],
    norms: [f64; 4],
    len: usize,
}

fn tfidf<'a>(tokens: &'a [String], df: &HashMap<&'a [String], usize>, log_docs: f64) -> TfIdf<'a> {
    let mut vecs: [HashMap<&[String], f64>; 4] = Default::default();
    let mut norms = [0.0; 4];
    for n in 1..=4 {
        for (g, tf) in ngrams(tokens, n) {
            let d = df.get(g).copied().unwrap_or(0).max(1) as f64;
            let w = tf as f64 * (log_docs - d.ln());
            norms[n - 1] += w * w;
            vecs[n - 1].insert(g, w);
        }
    }
    TfIdf {
        vecs,
        norms: norms.map(f64::sqrt),
        len: tokens.len(),
    }
}

/// COCO CIDEr (the CIDEr-D variant: clipped tf-idf, Gaussian length penalty,
/// x10), with document frequencies taken from the references.
pub fn cider(candidates: &[Vec<String>], references: &[Vec<String>]) -> f64 {
    let mut df: HashMap<&[String], usize> = HashMap::new();
    for r in references {
        let mut seen = HashSet::new();
        for n in 1..=4 {
            for g in ngrams(r, n).into_keys() {
                seen.insert(g);
            }
        }
        for g in seen {
            *df.entry(g).or_insert(0) += 1;
        }
    }
    let log_docs = (references.len() as f64).ln();
    let mut total = 0.0;
    for (c, r) in candidates.iter().zip(references) {
        let h = tfidf(c, &df, log_docs);
        let rv = tfidf(r, &df, log_docs);
        let delta = h.len as f64 - rv.len as f64;
        let penalty = (-(delta * delta) / (2.0 * CIDER_SIGMA * CIDER_SIGMA)).exp();
        let mut score = 0.0;
        for n in 0..4 {
            let mut val: f64 = h.vecs[n]
                .iter()
                .map(|(g, &w)| {
                    let wr = rv.vecs[n].get(g).copied().unwrap_or(0.0);
                    w.min(wr) * wr
                })
                .sum();
            if h.norms[n] != 0.0 && rv.norms[n] != 0.0 {
                val /= h.norms[n] * rv.norms[n];
            }
            score += val * penalty;
        }
        total += score / 4.0 * 10.0;
    }
    total / candidates.len() as f64
}

pub fn caption_metrics<S: AsRef<str>, T: AsRef<str>>(candidates: &[S], references: &[T]) -> Result<CaptionScores, CaptionMetricError> {
    if candidates.len() != references.len() {
        return Err(CaptionMetricError::LengthMismatch {
            candidates: candidates.len(),
            references: references.len(),
        });
    }
    if candidates.is_empty() {
        return Err(CaptionMetricError::Empty);
    }
    let cands: Vec<Vec<String>> = candidates.iter().map(|c| tokenize(c.as_ref())).collect();
    let refs: Vec<Vec<String>> = references.iter().map(|r| tokenize(r.as_ref())).collect();
    let rouge = cands.iter().zip(&refs).map(|(c, r)| rouge_l(c, r)).sum::<f64>() / cands.len() as f64;
    Ok(CaptionScores {
        bleu1: 100.0 * corpus_bleu(&cands, &refs, 1),
        bleu4: 100.0 * corpus_bleu(&cands, &refs, 4),
        rouge_l: 100.0 * rouge,
        cider: 100.0 * cider(&cands, &refs),
    })
}
