//! Planted-topic corpus generators and the recovery scores used to check the
//! models against them.
//!
//! Topics live on disjoint vocabulary blocks: topic `t` owns word ids
//! `t·B .. (t+1)·B` and is uniform there, so the planted truth is known
//! exactly and unaffected by duplicate removal.

use std::sync::Arc;

use rand::Rng as _;
use rand_distr::{Distribution, Gamma};

use crate::corpus::{Corpus, Document, Vocabulary};
use crate::eval::TopicWordMatrix;
use crate::rng_from_seed;

#[derive(Debug, Clone, Copy)]
pub struct PlantedDmm {
    pub topics: usize,
    pub words_per_topic: usize,
    pub docs: usize,
    /// Tokens drawn (with replacement) per document before deduplication.
    pub draws_per_doc: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct PlantedLda {
    pub topics: usize,
    pub words_per_topic: usize,
    pub docs: usize,
    pub doc_len: usize,
    /// Symmetric Dirichlet concentration of the per-document proportions.
    pub alpha: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Planted {
    pub corpus: Corpus,
    /// Generating topic per document (the dominant one for LDA).
    pub labels: Vec<usize>,
    pub phi: TopicWordMatrix,
}

pub fn block_vocabulary(topics: usize, words_per_topic: usize) -> Arc<Vocabulary> {
    let tokens = (0..topics).flat_map(|t| (0..words_per_topic).map(move |i| format!("t{t}w{i}"))).collect();
    Arc::new(Vocabulary::from_tokens(tokens).expect("tokens are distinct"))
}

fn block_phi(topics: usize, words_per_topic: usize) -> TopicWordMatrix {
    let v = topics * words_per_topic;
    let mut data = vec![0.0; topics * v];
    for t in 0..topics {
        for i in 0..words_per_topic {
            data[t * v + t * words_per_topic + i] = 1.0 / words_per_topic as f64;
        }
    }
    TopicWordMatrix::new(topics, v, data).expect("block rows are distributions")
}

/// One topic per document, chosen uniformly; documents are deduplicated.
pub fn planted_dmm(cfg: &PlantedDmm) -> Planted {
    let mut rng = rng_from_seed(cfg.seed);
    let b = cfg.words_per_topic;
    let mut docs = Vec::with_capacity(cfg.docs);
    let mut labels = Vec::with_capacity(cfg.docs);
    for _ in 0..cfg.docs {
        let z = rng.random_range(0..cfg.topics);
        let ids = (0..cfg.draws_per_doc).map(|_| z * b + rng.random_range(0..b)).collect();
        docs.push(Document::from_ids(ids, true).expect("draws_per_doc > 0"));
        labels.push(z);
    }
    Planted {
        corpus: Corpus::new(docs, block_vocabulary(cfg.topics, b)).expect("ids within the block vocabulary"),
        labels,
        phi: block_phi(cfg.topics, b),
    }
}

/// Documents mix topics through Dirichlet(α) proportions; tokens keep their
/// multiplicities.
pub fn planted_lda(cfg: &PlantedLda) -> Planted {
    let mut rng = rng_from_seed(cfg.seed);
    let b = cfg.words_per_topic;
    let gamma = Gamma::new(cfg.alpha, 1.0).expect("alpha > 0");
    let mut docs = Vec::with_capacity(cfg.docs);
    let mut labels = Vec::with_capacity(cfg.docs);
    for _ in 0..cfg.docs {
        let mut theta: Vec<f64> = (0..cfg.topics).map(|_| gamma.sample(&mut rng)).collect();
        let s: f64 = theta.iter().sum();
        theta.iter_mut().for_each(|x| *x /= s);
        let mut ids = Vec::with_capacity(cfg.doc_len);
        for _ in 0..cfg.doc_len {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut z = cfg.topics - 1;
            for (t, p) in theta.iter().enumerate() {
                acc += p;
                if u < acc {
                    z = t;
                    break;
                }
            }
            ids.push(z * b + rng.random_range(0..b));
        }
        let dominant = (0..cfg.topics).fold(0, |best, t| if theta[t] > theta[best] { t } else { best });
        labels.push(dominant);
        docs.push(Document::from_ids(ids, false).expect("doc_len > 0"));
    }
    Planted {
        corpus: Corpus::new(docs, block_vocabulary(cfg.topics, b)).expect("ids within the block vocabulary"),
        labels,
        phi: block_phi(cfg.topics, b),
    }
}

/// Fraction of documents whose predicted cluster's majority true label equals
/// their own.
pub fn purity(predicted: &[usize], truth: &[usize], k: usize) -> f64 {
    let k_true = truth.iter().copied().max().map_or(1, |m| m + 1);
    let mut table = vec![vec![0usize; k_true]; k];
    for (&p, &t) in predicted.iter().zip(truth) {
        table[p][t] += 1;
    }
    let hits: usize = table.iter().map(|row| row.iter().copied().max().unwrap_or(0)).sum();
    hits as f64 / predicted.len() as f64
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Best one-to-one matching of estimated to planted topics by total L1
/// distance (exhaustive, so meant for K ≤ 8). Returns the L1 distance of each
/// planted topic to its matched estimate, in planted order. Requires
/// `est.k() >= truth.k()`.
pub fn matched_l1(est: &TopicWordMatrix, truth: &TopicWordMatrix) -> Vec<f64> {
    assert_eq!(est.v(), truth.v());
    assert!(est.k() >= truth.k() && est.k() <= 8);
    let dist: Vec<Vec<f64>> = (0..truth.k())
        .map(|t| (0..est.k()).map(|e| truth.row(t).iter().zip(est.row(e)).map(|(a, b)| (a - b).abs()).sum()).collect())
        .collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for perm in permutations(est.k()) {
        let total: f64 = (0..truth.k()).map(|t| dist[t][perm[t]]).sum();
        if best.as_ref().is_none_or(|(b, _)| total < *b) {
            best = Some((total, perm));
        }
    }
    let (_, perm) = best.expect("at least one permutation");
    (0..truth.k()).map(|t| dist[t][perm[t]]).collect()
}
