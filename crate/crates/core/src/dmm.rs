//! Dirichlet Multinomial Mixture trained with the collapsed Gibbs sampler.
//!
//! Every document carries exactly one topic label. The sampler integrates out
//! the topic proportions and topic-word distributions and resamples one label
//! at a time from
//!
//! ```text
//! p(z_d = k | rest) ∝ (m_k + α) · ∏_w ∏_{j=1..c_w} (n_kw + β + j − 1)
//!                                 / ∏_{i=1..|d|} (n_k + Vβ + i − 1)
//! ```
//!
//! where the counters exclude document `d`. The product is evaluated in log
//! space.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document};
use crate::eval::TopicWordMatrix;
use crate::{log_sum_exp, rng_from_seed, Error, Result, Rng};

pub const DEFAULT_ITERATIONS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmmParams {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl DmmParams {
    pub fn new(k: usize, alpha: f64, beta: f64) -> Self {
        Self { k, alpha, beta, iterations: DEFAULT_ITERATIONS, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidConfig("K must be at least 1".into()));
        }
        if !(self.alpha > 0.0) || !(self.beta > 0.0) {
            return Err(Error::InvalidConfig("alpha and beta must be positive".into()));
        }
        Ok(())
    }
}

/// Chain state: one label per document plus the sufficient statistics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DmmState {
    labels: Vec<usize>,
    /// documents per topic
    doc_counts: Vec<usize>,
    /// K×V word counts, row-major
    word_counts: Vec<u32>,
    /// tokens per topic
    topic_totals: Vec<usize>,
    v: usize,
}

impl DmmState {
    /// Builds counters from explicit labels.
    pub fn from_labels(corpus: &Corpus, k: usize, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != corpus.num_docs() {
            return Err(Error::ShapeMismatch {
                expected: corpus.num_docs().to_string(),
                got: labels.len().to_string(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&z| z >= k) {
            return Err(Error::IndexOutOfRange { index: bad, size: k });
        }
        let v = corpus.vocab_size();
        let mut state = Self {
            labels: vec![0; corpus.num_docs()],
            doc_counts: vec![0; k],
            word_counts: vec![0; k * v],
            topic_totals: vec![0; k],
            v,
        };
        for (d, doc) in corpus.docs().iter().enumerate() {
            state.labels[d] = labels[d];
            state.add(doc, labels[d]);
        }
        Ok(state)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn doc_counts(&self) -> &[usize] {
        &self.doc_counts
    }

    pub fn topic_totals(&self) -> &[usize] {
        &self.topic_totals
    }

    pub fn word_count(&self, topic: usize, word: usize) -> u32 {
        self.word_counts[topic * self.v + word]
    }

    pub fn k(&self) -> usize {
        self.doc_counts.len()
    }

    fn add(&mut self, doc: &Document, z: usize) {
        self.doc_counts[z] += 1;
        self.topic_totals[z] += doc.len();
        let row = &mut self.word_counts[z * self.v..(z + 1) * self.v];
        for &(w, c) in doc.counts() {
            row[w] += c;
        }
    }

    fn remove(&mut self, doc: &Document, z: usize) {
        self.doc_counts[z] -= 1;
        self.topic_totals[z] -= doc.len();
        let row = &mut self.word_counts[z * self.v..(z + 1) * self.v];
        for &(w, c) in doc.counts() {
            row[w] -= c;
        }
    }

    /// Recounts from the labels and compares with the incremental counters.
    pub fn is_consistent(&self, corpus: &Corpus) -> bool {
        match Self::from_labels(corpus, self.k(), self.labels.clone()) {
            Ok(fresh) => fresh == *self,
            Err(_) => false,
        }
    }
}

/// Labels drawn uniformly at random from the seeded stream.
pub fn init(corpus: &Corpus, params: &DmmParams, rng: &mut Rng) -> DmmState {
    let labels = (0..corpus.num_docs()).map(|_| rng.random_range(0..params.k)).collect();
    DmmState::from_labels(corpus, params.k, labels).expect("labels are in range")
}

fn log_weights(state: &DmmState, doc: &Document, params: &DmmParams) -> Vec<f64> {
    let vbeta = state.v as f64 * params.beta;
    let len = doc.len();
    (0..state.k())
        .map(|k| {
            let mut lw = (state.doc_counts[k] as f64 + params.alpha).ln();
            for &(w, c) in doc.counts() {
                let n = state.word_count(k, w) as f64 + params.beta;
                for j in 0..c {
                    lw += (n + j as f64).ln();
                }
            }
            let total = state.topic_totals[k] as f64 + vbeta;
            for i in 0..len {
                lw -= (total + i as f64).ln();
            }
            lw
        })
        .collect()
}

/// The sampling distribution for `doc`'s label. The caller must already have
/// removed `doc` from the counters.
pub fn conditional(state: &DmmState, doc: &Document, params: &DmmParams) -> Vec<f64> {
    let lw = log_weights(state, doc, params);
    let norm = log_sum_exp(&lw);
    lw.iter().map(|x| (x - norm).exp()).collect()
}

fn sample(probs: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
}

/// One pass over all documents in order. Returns how many labels changed.
pub fn gibbs_sweep(state: &mut DmmState, corpus: &Corpus, params: &DmmParams, rng: &mut Rng) -> usize {
    let mut changed = 0;
    for (d, doc) in corpus.docs().iter().enumerate() {
        let old = state.labels[d];
        state.remove(doc, old);
        let probs = conditional(state, doc, params);
        let new = sample(&probs, rng);
        state.labels[d] = new;
        state.add(doc, new);
        changed += usize::from(new != old);
    }
    changed
}

/// Posterior mean of the topic-word distributions given the labels.
pub fn estimate_phi(state: &DmmState, params: &DmmParams) -> TopicWordMatrix {
    let v = state.v;
    let vbeta = v as f64 * params.beta;
    let mut data = Vec::with_capacity(state.k() * v);
    for k in 0..state.k() {
        let denom = state.topic_totals[k] as f64 + vbeta;
        data.extend((0..v).map(|w| (params.beta + state.word_count(k, w) as f64) / denom));
    }
    TopicWordMatrix::new(state.k(), v, data).expect("posterior mean rows are distributions")
}

/// Posterior mean of the topic proportions given the labels.
pub fn estimate_theta(state: &DmmState, params: &DmmParams) -> Vec<f64> {
    let n_docs: usize = state.doc_counts.iter().sum();
    let denom = n_docs as f64 + state.k() as f64 * params.alpha;
    state.doc_counts.iter().map(|&m| (params.alpha + m as f64) / denom).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmmModel {
    pub params: DmmParams,
    pub theta: Vec<f64>,
    pub phi: TopicWordMatrix,
}

impl DmmModel {
    pub fn k(&self) -> usize {
        self.theta.len()
    }

    fn log_joint(&self, doc: &Document) -> Vec<f64> {
        (0..self.k())
            .map(|z| {
                let row = self.phi.row(z);
                self.theta[z].ln() + doc.counts().iter().map(|&(w, c)| c as f64 * row[w].ln()).sum::<f64>()
            })
            .collect()
    }

    /// log Σ_z θ_z ∏_{w∈d} φ_{z,w}.
    pub fn log_likelihood(&self, doc: &Document) -> f64 {
        log_sum_exp(&self.log_joint(doc))
    }

    /// Most probable topic for `doc` under the fitted model; ties go to the
    /// lower topic id.
    pub fn assign(&self, doc: &Document) -> usize {
        let lj = self.log_joint(doc);
        let mut best = 0;
        for (z, &v) in lj.iter().enumerate() {
            if v > lj[best] {
                best = z;
            }
        }
        best
    }
}

/// Model and the final chain state, whose labels are the training
/// assignments.
#[derive(Debug, Clone)]
pub struct DmmFit {
    pub model: DmmModel,
    pub state: DmmState,
    /// Label changes per sweep.
    pub changes: Vec<usize>,
}

pub fn train_chain(corpus: &Corpus, params: &DmmParams) -> Result<DmmFit> {
    params.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyDocument);
    }
    let mut rng = rng_from_seed(params.seed);
    let mut state = init(corpus, params, &mut rng);
    let mut changes = Vec::with_capacity(params.iterations);
    for _ in 0..params.iterations {
        changes.push(gibbs_sweep(&mut state, corpus, params, &mut rng));
    }
    let model = DmmModel { params: *params, theta: estimate_theta(&state, params), phi: estimate_phi(&state, params) };
    Ok(DmmFit { model, state, changes })
}

/// Random initialization, `params.iterations` sweeps, then the posterior-mean
/// estimators on the final state.
pub fn train(corpus: &Corpus, params: &DmmParams) -> Result<DmmModel> {
    train_chain(corpus, params).map(|fit| fit.model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;
    use crate::synthetic;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn corpus(v: usize, docs: &[&[usize]], dedupe: bool) -> Corpus {
        let vocab = Arc::new(Vocabulary::from_tokens((0..v).map(|i| format!("w{i}")).collect()).unwrap());
        let docs = docs.iter().map(|d| Document::from_ids(d.to_vec(), dedupe).unwrap()).collect();
        Corpus::new(docs, vocab).unwrap()
    }

    /// Direct product form of the conditional, no logs.
    fn naive_conditional(state: &DmmState, doc: &Document, p: &DmmParams) -> Vec<f64> {
        let v = state.v as f64;
        let w: Vec<f64> = (0..state.k())
            .map(|k| {
                let mut num = state.doc_counts[k] as f64 + p.alpha;
                for &(word, c) in doc.counts() {
                    for j in 1..=c {
                        num *= state.word_count(k, word) as f64 + p.beta + (j - 1) as f64;
                    }
                }
                let mut den = 1.0;
                for i in 1..=doc.len() {
                    den *= state.topic_totals[k] as f64 + v * p.beta + (i - 1) as f64;
                }
                num / den
            })
            .collect();
        let s: f64 = w.iter().sum();
        w.iter().map(|x| x / s).collect()
    }

    #[test]
    fn init_single_topic() {
        let c = corpus(3, &[&[0], &[1, 2], &[2]], true);
        let p = DmmParams::new(1, 0.1, 0.1);
        let s = init(&c, &p, &mut rng_from_seed(3));
        assert!(s.labels().iter().all(|&z| z == 0));
        assert_eq!(s.doc_counts(), &[3]);
    }

    #[test]
    fn init_is_deterministic_and_consistent() {
        let c = corpus(3, &[&[0], &[1, 2], &[2]], true);
        let p = DmmParams::new(2, 0.1, 0.1);
        let a = init(&c, &p, &mut rng_from_seed(9));
        let b = init(&c, &p, &mut rng_from_seed(9));
        assert_eq!(a, b);
        assert_eq!(a.doc_counts().iter().sum::<usize>(), 3);
        assert!(a.is_consistent(&c));
    }

    #[test]
    fn conditional_uniform_with_empty_counters() {
        let c = corpus(4, &[&[0, 1]], true);
        let p = DmmParams::new(3, 0.1, 0.1);
        let mut s = DmmState::from_labels(&c, 3, vec![1]).unwrap();
        s.remove(&c.docs()[0], 1);
        for q in conditional(&s, &c.docs()[0], &p) {
            assert!((q - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn conditional_hand_enumeration() {
        // other doc {w0} in topic 0, query {w0}, α = β = 1.
        // V=2: topic 0 → 2·2/3, topic 1 → 1·1/2, p(0) = 8/11.
        let p = DmmParams::new(2, 1.0, 1.0);
        let c = corpus(2, &[&[0], &[0]], true);
        let mut s = DmmState::from_labels(&c, 2, vec![0, 0]).unwrap();
        s.remove(&c.docs()[1], 0);
        let q = conditional(&s, &c.docs()[1], &p);
        assert!((q[0] - 8.0 / 11.0).abs() < 1e-12);
        // V=4: topic 0 → 2·2/5, topic 1 → 1·1/4, p(0) = 0.7619…
        let c = corpus(4, &[&[0], &[0]], true);
        let mut s = DmmState::from_labels(&c, 2, vec![0, 0]).unwrap();
        s.remove(&c.docs()[1], 0);
        let q = conditional(&s, &c.docs()[1], &p);
        assert!((q[0] - 0.8 / 1.05).abs() < 1e-12);
        assert!((q[0] - 0.7619).abs() < 1e-4);
    }

    #[test]
    fn conditional_with_repeated_words_matches_product_form() {
        let c = corpus(5, &[&[0, 0, 1], &[1, 2, 2, 2], &[3, 4, 0], &[0, 0, 0, 4]], false);
        let p = DmmParams::new(3, 0.3, 0.05);
        let mut s = DmmState::from_labels(&c, 3, vec![0, 1, 2, 0]).unwrap();
        let doc = &c.docs()[3];
        s.remove(doc, 0);
        let a = conditional(&s, doc, &p);
        let b = naive_conditional(&s, doc, &p);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn sweep_with_one_topic_is_identity() {
        let c = corpus(3, &[&[0], &[1, 2], &[2]], true);
        let p = DmmParams::new(1, 0.1, 0.1);
        let mut rng = rng_from_seed(1);
        let mut s = init(&c, &p, &mut rng);
        let before = s.clone();
        assert_eq!(gibbs_sweep(&mut s, &c, &p, &mut rng), 0);
        assert_eq!(s, before);
    }

    #[test]
    fn estimate_phi_direct_substitution() {
        let c = corpus(3, &[&[0, 0, 1]], false);
        let p = DmmParams::new(1, 0.1, 0.1);
        let s = DmmState::from_labels(&c, 1, vec![0]).unwrap();
        let phi = estimate_phi(&s, &p);
        let expected = [2.1 / 3.3, 1.1 / 3.3, 0.1 / 3.3];
        for (a, b) in phi.row(0).iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((phi.row(0)[0] - 0.63636).abs() < 1e-5);
    }

    #[test]
    fn estimate_phi_empty_topic_is_uniform() {
        let c = corpus(4, &[&[0, 1]], true);
        let p = DmmParams::new(2, 0.1, 0.1);
        let s = DmmState::from_labels(&c, 2, vec![0]).unwrap();
        let phi = estimate_phi(&s, &p);
        assert!(phi.row(1).iter().all(|&x| (x - 0.25).abs() < 1e-15));
    }

    #[test]
    fn estimate_theta_direct_substitution() {
        let docs: Vec<&[usize]> = vec![&[0]; 10];
        let c = corpus(1, &docs, true);
        let p = DmmParams::new(2, 0.1, 0.1);
        let labels = vec![0, 0, 0, 0, 0, 0, 0, 1, 1, 1];
        let s = DmmState::from_labels(&c, 2, labels).unwrap();
        let t = estimate_theta(&s, &p);
        assert!((t[0] - 7.1 / 10.2).abs() < 1e-15);
        assert!((t[1] - 3.1 / 10.2).abs() < 1e-15);
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-15);

        let s = DmmState::from_labels(&c, 2, vec![0; 10]).unwrap();
        let t = estimate_theta(&s, &DmmParams::new(2, 1e-12, 0.1));
        assert!((t[0] - 1.0).abs() < 1e-12 && t[1] < 1e-12);
    }

    #[test]
    fn log_likelihood_single_live_component() {
        let m = DmmModel {
            params: DmmParams::new(2, 1.0, 1.0),
            theta: vec![0.5, 0.5],
            phi: TopicWordMatrix::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap(),
        };
        let d = Document::from_ids(vec![0, 0], false).unwrap();
        assert!((m.log_likelihood(&d) - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn log_likelihood_single_topic_collapses() {
        let phi = vec![0.2, 0.5, 0.3];
        let m = DmmModel {
            params: DmmParams::new(1, 1.0, 1.0),
            theta: vec![1.0],
            phi: TopicWordMatrix::new(1, 3, phi.clone()).unwrap(),
        };
        let d = Document::from_ids(vec![0, 2, 2], false).unwrap();
        let expected = phi[0].ln() + 2.0 * phi[2].ln();
        assert!((m.log_likelihood(&d) - expected).abs() < 1e-14);
    }

    #[test]
    fn planted_two_topic_purity_after_sweeps() {
        let planted = synthetic::planted_dmm(&synthetic::PlantedDmm {
            topics: 2,
            words_per_topic: 10,
            docs: 200,
            draws_per_doc: 30,
            seed: 11,
        });
        let p = DmmParams { k: 2, alpha: 0.1, beta: 0.1, iterations: 30, seed: 5 };
        let fit = train_chain(&planted.corpus, &p).unwrap();
        assert!(fit.state.is_consistent(&planted.corpus));
        let purity = synthetic::purity(fit.state.labels(), &planted.labels, 2);
        assert!(purity >= 0.95, "purity {purity}");
        let l1 = synthetic::matched_l1(&fit.model.phi, &planted.phi);
        assert!(l1.iter().all(|&x| x <= 0.05), "l1 {l1:?}");
    }

    #[test]
    fn training_is_deterministic() {
        let planted = synthetic::planted_dmm(&synthetic::PlantedDmm {
            topics: 3,
            words_per_topic: 5,
            docs: 60,
            draws_per_doc: 6,
            seed: 2,
        });
        let p = DmmParams { k: 3, alpha: 0.1, beta: 0.1, iterations: 5, seed: 77 };
        assert_eq!(train(&planted.corpus, &p).unwrap(), train(&planted.corpus, &p).unwrap());
    }

    #[test]
    fn rejects_bad_params() {
        let c = corpus(2, &[&[0]], true);
        assert!(train(&c, &DmmParams::new(0, 0.1, 0.1)).is_err());
        assert!(train(&c, &DmmParams::new(2, 0.0, 0.1)).is_err());
        assert!(train(&c, &DmmParams::new(2, 0.1, -1.0)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn sweeps_keep_counters_consistent_and_conditionals_normalized(
            docs in proptest::collection::vec(proptest::collection::vec(0usize..6, 1..6), 1..12),
            k in 1usize..5,
            seed in 0u64..1000,
            dedupe: bool,
        ) {
            let vocab = Arc::new(Vocabulary::from_tokens((0..6).map(|i| format!("w{i}")).collect()).unwrap());
            let docs: Vec<Document> = docs.into_iter().map(|d| Document::from_ids(d, dedupe).unwrap()).collect();
            let c = Corpus::new(docs, vocab).unwrap();
            let p = DmmParams { k, alpha: 0.3, beta: 0.2, iterations: 3, seed };
            let mut rng = rng_from_seed(seed);
            let mut s = init(&c, &p, &mut rng);
            for _ in 0..3 {
                gibbs_sweep(&mut s, &c, &p, &mut rng);
                prop_assert!(s.is_consistent(&c));
            }
            for (d, doc) in c.docs().iter().enumerate() {
                let z = s.labels()[d];
                let mut t = s.clone();
                t.remove(doc, z);
                let q = conditional(&t, doc, &p);
                prop_assert!(q.iter().all(|&x| x >= 0.0));
                prop_assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                let naive = naive_conditional(&t, doc, &p);
                for (a, b) in q.iter().zip(&naive) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
            }
            let phi = estimate_phi(&s, &p);
            prop_assert!(phi.rows().all(|r| r.iter().all(|&x| x > 0.0)));
            let theta = estimate_theta(&s, &p);
            prop_assert!((theta.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn log_likelihood_matches_naive_sum(
            theta_raw in proptest::collection::vec(0.05f64..1.0, 1..4),
            phi_raw in proptest::collection::vec(0.05f64..1.0, 12),
            ids in proptest::collection::vec(0usize..4, 1..6),
        ) {
            let k = theta_raw.len();
            let ts: f64 = theta_raw.iter().sum();
            let theta: Vec<f64> = theta_raw.iter().map(|x| x / ts).collect();
            let mut phi = Vec::new();
            for z in 0..k {
                let row = &phi_raw[z * 4..z * 4 + 4];
                let s: f64 = row.iter().sum();
                phi.extend(row.iter().map(|x| x / s));
            }
            let m = DmmModel {
                params: DmmParams::new(k, 1.0, 1.0),
                theta: theta.clone(),
                phi: TopicWordMatrix::new(k, 4, phi.clone()).unwrap(),
            };
            let d = Document::from_ids(ids.clone(), false).unwrap();
            let naive: f64 = (0..k)
                .map(|z| theta[z] * ids.iter().map(|&w| phi[z * 4 + w]).product::<f64>())
                .sum::<f64>()
                .ln();
            prop_assert!((m.log_likelihood(&d) - naive).abs() < 1e-10);
        }
    }
}
