//! Model-quality metrics: perplexity, relevance ranking and the UMass, UCI and
//! NPMI coherence scores.
//!
//! Coherence probabilities are document frequencies: `p(w)` is the fraction
//! of documents (or windows) containing `w`, `p(w1, w2)` the fraction
//! containing both. UMass is computed on the original documents, UCI and NPMI
//! on the sliding-window set.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Vocabulary};
use crate::model::TopicModel;
use crate::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-12;
pub const DEFAULT_TOP_N: usize = 20;
pub const DEFAULT_WINDOW: usize = 20;
pub const DEFAULT_RELEVANCE_LAMBDA: f64 = 0.3;

const SIMPLEX_TOL: f64 = 1e-9;

/// K×V row-stochastic matrix; row `i` is topic `i`'s word distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicWordMatrix {
    k: usize,
    v: usize,
    data: Vec<f64>,
}

impl TopicWordMatrix {
    pub fn new(k: usize, v: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != k * v {
            return Err(Error::ShapeMismatch { expected: format!("{k}x{v} = {}", k * v), got: data.len().to_string() });
        }
        let m = Self { k, v, data };
        m.check()?;
        Ok(m)
    }

    pub fn uniform(k: usize, v: usize) -> Self {
        Self { k, v, data: vec![1.0 / v as f64; k * v] }
    }

    pub fn check(&self) -> Result<()> {
        for i in 0..self.k {
            let row = self.row(i);
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > SIMPLEX_TOL {
                return Err(Error::Domain(format!("topic {i} is not a distribution (sum {sum})")));
            }
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn v(&self) -> usize {
        self.v
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.v..(i + 1) * self.v]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.v)
    }

    pub fn get(&self, topic: usize, word: usize) -> f64 {
        self.data[topic * self.v + word]
    }

    /// CSV with a `topic` column followed by one column per vocabulary token.
    pub fn write_csv<W: Write>(&self, mut w: W, vocab: &Vocabulary) -> Result<()> {
        write!(w, "topic")?;
        for t in vocab.tokens() {
            write!(w, ",{}", csv_field(t))?;
        }
        writeln!(w)?;
        for (i, row) in self.rows().enumerate() {
            write!(w, "{i}")?;
            for p in row {
                write!(w, ",{p}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// exp(−loglik / tokens).
pub fn perplexity(total_loglik: f64, total_tokens: usize) -> Result<f64> {
    if total_tokens == 0 {
        return Err(Error::Domain("perplexity needs at least one token".into()));
    }
    Ok((-total_loglik / total_tokens as f64).exp())
}

/// r(w, i) = λ log φ_iw + (1 − λ) log(φ_iw / p_w).
pub fn relevance(phi: &TopicWordMatrix, word_probs: &[f64], lambda: f64) -> Result<Vec<Vec<f64>>> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain(format!("relevance lambda {lambda} outside [0, 1]")));
    }
    if word_probs.len() != phi.v() {
        return Err(Error::ShapeMismatch { expected: phi.v().to_string(), got: word_probs.len().to_string() });
    }
    if let Some(w) = word_probs.iter().position(|p| !(*p > 0.0)) {
        return Err(Error::Domain(format!("word {w} has zero corpus probability")));
    }
    phi.rows()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .zip(word_probs)
                .enumerate()
                .map(|(w, (&f, &p))| {
                    if !(f > 0.0) {
                        return Err(Error::Domain(format!("phi[{i}][{w}] is zero")));
                    }
                    Ok(lambda * f.ln() + (1.0 - lambda) * (f / p).ln())
                })
                .collect()
        })
        .collect()
}

/// Indices of the `n` largest scores, descending; ties go to the lower id.
pub fn top_words(scores: &[f64], n: usize) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..scores.len()).collect();
    ids.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    ids.truncate(n);
    ids
}

/// Contiguous windows of length `omega` at stride 1. A sequence no longer than
/// `omega` yields a single window holding all of it.
pub fn sliding_windows<'a, I>(docs: I, omega: usize) -> Result<Vec<Vec<usize>>>
where
    I: IntoIterator<Item = &'a [usize]>,
{
    if omega == 0 {
        return Err(Error::Domain("window size must be at least 1".into()));
    }
    let mut out = Vec::new();
    for seq in docs {
        if seq.len() <= omega {
            out.push(seq.to_vec());
        } else {
            out.extend(seq.windows(omega).map(<[usize]>::to_vec));
        }
    }
    Ok(out)
}

/// Document-frequency statistics restricted to a candidate word set.
#[derive(Debug, Clone)]
pub struct WordStats {
    doc_freq: HashMap<usize, u64>,
    pair_freq: HashMap<(usize, usize), u64>,
    num_docs: u64,
}

impl WordStats {
    pub fn num_docs(&self) -> u64 {
        self.num_docs
    }

    pub fn doc_freq(&self, w: usize) -> u64 {
        self.doc_freq.get(&w).copied().unwrap_or(0)
    }

    pub fn pair_freq(&self, a: usize, b: usize) -> u64 {
        if a == b {
            return self.doc_freq(a);
        }
        let key = if a < b { (a, b) } else { (b, a) };
        self.pair_freq.get(&key).copied().unwrap_or(0)
    }

    pub fn p(&self, w: usize) -> f64 {
        self.doc_freq(w) as f64 / self.num_docs as f64
    }

    pub fn p_pair(&self, a: usize, b: usize) -> f64 {
        self.pair_freq(a, b) as f64 / self.num_docs as f64
    }
}

pub fn word_stats<'a, I>(docset: I, candidates: &[usize]) -> WordStats
where
    I: IntoIterator<Item = &'a [usize]>,
{
    let wanted: HashSet<usize> = candidates.iter().copied().collect();
    let mut doc_freq = HashMap::new();
    let mut pair_freq = HashMap::new();
    let mut num_docs = 0u64;
    let mut present: Vec<usize> = Vec::new();
    for doc in docset {
        num_docs += 1;
        present.clear();
        present.extend(doc.iter().copied().filter(|w| wanted.contains(w)));
        present.sort_unstable();
        present.dedup();
        for (i, &a) in present.iter().enumerate() {
            *doc_freq.entry(a).or_insert(0) += 1;
            for &b in &present[i + 1..] {
                *pair_freq.entry((a, b)).or_insert(0) += 1;
            }
        }
    }
    WordStats { doc_freq, pair_freq, num_docs }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    UMass,
    Uci,
    Npmi,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::UMass => "umass",
            Metric::Uci => "uci",
            Metric::Npmi => "npmi",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "umass" => Ok(Metric::UMass),
            "uci" => Ok(Metric::Uci),
            "npmi" => Ok(Metric::Npmi),
            other => Err(Error::InvalidConfig(format!("unknown metric '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceReport {
    pub metric: Metric,
    pub per_topic: Vec<f64>,
    pub aggregate: f64,
    pub n: usize,
    /// Window size for UCI/NPMI, `None` for UMass.
    pub omega: Option<usize>,
    pub epsilon: f64,
}

impl CoherenceReport {
    fn from_scores(metric: Metric, per_topic: Vec<f64>, n: usize, omega: Option<usize>, epsilon: f64) -> Self {
        let aggregate = per_topic.iter().sum::<f64>() / per_topic.len() as f64;
        Self { metric, per_topic, aggregate, n, omega, epsilon }
    }

    pub fn k(&self) -> usize {
        self.per_topic.len()
    }

    /// `metric,K,topic,score` rows and a final `mean` row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "metric,K,topic,score")?;
        let k = self.k();
        for (i, s) in self.per_topic.iter().enumerate() {
            writeln!(w, "{},{k},{i},{s}", self.metric)?;
        }
        writeln!(w, "{},{k},mean,{}", self.metric, self.aggregate)?;
        Ok(())
    }
}

fn check_topics(topics: &[Vec<usize>]) -> Result<usize> {
    let n = topics.first().map(Vec::len).unwrap_or(0);
    if topics.is_empty() || n < 2 || topics.iter().any(|t| t.len() != n) {
        return Err(Error::Domain("coherence needs at least one topic with N >= 2 top words each".into()));
    }
    Ok(n)
}

fn nonzero(stats: &WordStats, w: usize) -> Result<f64> {
    let p = stats.p(w);
    if p > 0.0 {
        Ok(p)
    } else {
        Err(Error::Domain(format!("word {w} never occurs in the reference documents")))
    }
}

/// UMass coherence. `stats` must come from the original documents; the
/// conditioning word is always the higher-ranked one.
pub fn umass(topics: &[Vec<usize>], stats: &WordStats, epsilon: f64) -> Result<CoherenceReport> {
    let n = check_topics(topics)?;
    let scale = 2.0 / (n * (n - 1)) as f64;
    let mut scores = Vec::with_capacity(topics.len());
    for words in topics {
        let mut sum = 0.0;
        for m in 1..n {
            for l in 0..m {
                let p_cond = nonzero(stats, words[l])?;
                sum += ((stats.p_pair(words[m], words[l]) + epsilon) / p_cond).ln();
            }
        }
        scores.push(scale * sum);
    }
    Ok(CoherenceReport::from_scores(Metric::UMass, scores, n, None, epsilon))
}

fn pairwise<F>(topics: &[Vec<usize>], stats: &WordStats, mut confirm: F) -> Result<(usize, Vec<f64>)>
where
    F: FnMut(f64, f64, f64) -> Result<f64>,
{
    let n = check_topics(topics)?;
    let scale = 2.0 / (n * (n - 1)) as f64;
    let mut scores = Vec::with_capacity(topics.len());
    for words in topics {
        let mut sum = 0.0;
        for m in 0..n - 1 {
            for l in m + 1..n {
                let pm = nonzero(stats, words[m])?;
                let pl = nonzero(stats, words[l])?;
                sum += confirm(stats.p_pair(words[m], words[l]), pm, pl)?;
            }
        }
        scores.push(scale * sum);
    }
    Ok((n, scores))
}

/// UCI coherence: mean pairwise PMI over the window statistics.
pub fn uci(topics: &[Vec<usize>], window_stats: &WordStats, omega: usize, epsilon: f64) -> Result<CoherenceReport> {
    let (n, scores) = pairwise(topics, window_stats, |pj, pm, pl| Ok(((pj + epsilon) / (pm * pl)).ln()))?;
    Ok(CoherenceReport::from_scores(Metric::Uci, scores, n, Some(omega), epsilon))
}

/// NPMI coherence: PMI normalized by −log p(w_m, w_n).
pub fn npmi(topics: &[Vec<usize>], window_stats: &WordStats, omega: usize, epsilon: f64) -> Result<CoherenceReport> {
    let (n, scores) = pairwise(topics, window_stats, |pj, pm, pl| {
        let pmi = ((pj + epsilon) / (pm * pl)).ln();
        let denom = -(pj + epsilon).ln();
        if !(denom > 0.0) {
            return Err(Error::Domain("NPMI undefined for a pair present in every window".into()));
        }
        Ok(pmi / denom)
    })?;
    Ok(CoherenceReport::from_scores(Metric::Npmi, scores, n, Some(omega), epsilon))
}

/// Computes one coherence metric for `topics` (top-word id lists over the
/// same vocabulary as `docs`).
pub fn coherence<'a, I>(
    metric: Metric,
    topics: &[Vec<usize>],
    docs: I,
    omega: usize,
    epsilon: f64,
) -> Result<CoherenceReport>
where
    I: IntoIterator<Item = &'a [usize]>,
{
    let candidates: Vec<usize> = topics.iter().flatten().copied().collect();
    match metric {
        Metric::UMass => umass(topics, &word_stats(docs, &candidates), epsilon),
        Metric::Uci | Metric::Npmi => {
            let windows = sliding_windows(docs, omega)?;
            let stats = word_stats(windows.iter().map(Vec::as_slice), &candidates);
            if metric == Metric::Uci {
                uci(topics, &stats, omega, epsilon)
            } else {
                npmi(topics, &stats, omega, epsilon)
            }
        }
    }
}

/// Maps each topic's full ranking of model word ids onto the evaluation
/// vocabulary and keeps the first `n` words that exist there. Returns the
/// translated top lists and the number of skipped words.
pub fn restrict_top_words(
    rankings: &[Vec<usize>],
    model_vocab: &Vocabulary,
    eval_vocab: &Vocabulary,
    eval_docs: &[Document],
    n: usize,
) -> (Vec<Vec<usize>>, usize) {
    let mut present = vec![false; eval_vocab.len()];
    for d in eval_docs {
        for &(w, _) in d.counts() {
            present[w] = true;
        }
    }
    let mut skipped = 0;
    let tops = rankings
        .iter()
        .map(|ranking| {
            let mut out = Vec::with_capacity(n);
            for &w in ranking {
                if out.len() == n {
                    break;
                }
                match model_vocab.token(w).and_then(|t| eval_vocab.id(t)) {
                    Some(id) if present[id] => out.push(id),
                    _ => skipped += 1,
                }
            }
            out
        })
        .collect();
    if skipped > 0 {
        log::info!("{skipped} top words absent from the evaluation corpus were skipped");
    }
    (tops, skipped)
}

/// Held-out log likelihood (or its ELBO proxy) and the number of tokens it
/// scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeldOut {
    pub loglik: f64,
    pub tokens: usize,
}

impl HeldOut {
    pub fn perplexity(&self) -> Result<f64> {
        perplexity(self.loglik, self.tokens)
    }
}

/// Held-out log likelihood for any of the three models.
///
/// DMM uses the exact mixture likelihood, LDA the per-document ELBO with λ
/// held fixed, ProdLDA the negated eval-mode loss with ε drawn from `seed`.
/// For ProdLDA in presence mode the token count is the number of distinct
/// words, matching what its reconstruction term scores.
pub fn heldout_loglik(model: &TopicModel, docs: &[Document], seed: u64) -> Result<HeldOut> {
    let v = model.vocab_size();
    if let Some(d) = docs.iter().find(|d| d.max_id() >= v) {
        return Err(Error::VocabularyMismatch { model: v, data: d.max_id() + 1, shared: v });
    }
    match model {
        TopicModel::Dmm(m) => Ok(HeldOut {
            loglik: docs.iter().map(|d| m.log_likelihood(d)).sum(),
            tokens: docs.iter().map(Document::len).sum(),
        }),
        TopicModel::Lda(m) => {
            Ok(HeldOut { loglik: m.heldout_elbo(docs), tokens: docs.iter().map(Document::len).sum() })
        }
        TopicModel::ProdLda(m) => {
            let tokens = docs.iter().map(|d| if m.config.count_weighted { d.len() } else { d.distinct() }).sum();
            Ok(HeldOut { loglik: m.heldout_elbo(docs, seed)?, tokens })
        }
    }
}
