//! Latent Dirichlet Allocation trained with online (stochastic) variational
//! Bayes.
//!
//! The variational family is q(φ_k) = Dirichlet(λ_k), q(θ_d) = Dirichlet(γ_d)
//! and q(z_dn) = Categorical(φ_dn·). Each minibatch fits the local factors
//! with λ fixed, then moves λ towards the batch estimate with step size
//! ρ_t = (τ₀ + t)^(−κ).

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document};
use crate::eval::TopicWordMatrix;
use crate::special::{digamma_unchecked, ln_gamma};
use crate::{log_sum_exp, rng_from_seed, Error, Result};

pub use crate::special::digamma;

pub const DEFAULT_KAPPA: f64 = 0.75;
pub const DEFAULT_TAU0: f64 = 64.0;
pub const DEFAULT_BATCH_SIZE: usize = 64;
pub const DEFAULT_PASSES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EStepOptions {
    /// Stop once the mean absolute change of γ falls below this.
    pub tol: f64,
    pub max_inner: usize,
}

impl Default for EStepOptions {
    fn default() -> Self {
        Self { tol: 1e-3, max_inner: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdaParams {
    pub k: usize,
    /// Symmetric document-topic prior.
    pub alpha: f64,
    /// Symmetric topic-word prior.
    pub eta: f64,
    pub kappa: f64,
    pub tau0: f64,
    pub batch_size: usize,
    pub passes: usize,
    pub seed: u64,
    pub e_step: EStepOptions,
}

impl LdaParams {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            alpha: 1.0 / k.max(1) as f64,
            eta: 1.0 / k.max(1) as f64,
            kappa: DEFAULT_KAPPA,
            tau0: DEFAULT_TAU0,
            batch_size: DEFAULT_BATCH_SIZE,
            passes: DEFAULT_PASSES,
            seed: 0,
            e_step: EStepOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidConfig("K must be at least 1".into()));
        }
        if !(self.alpha > 0.0) || !(self.eta > 0.0) {
            return Err(Error::InvalidConfig("alpha and eta must be positive".into()));
        }
        if !(self.kappa > 0.5 && self.kappa <= 1.0) {
            return Err(Error::InvalidConfig(format!("kappa must lie in (0.5, 1], got {}", self.kappa)));
        }
        if !(self.tau0 >= 0.0) {
            return Err(Error::InvalidConfig("tau0 must be non-negative".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if !(self.e_step.tol > 0.0) || self.e_step.max_inner < 1 {
            return Err(Error::InvalidConfig("e-step tolerance and iteration cap must be positive".into()));
        }
        Ok(())
    }
}

/// Global variational parameters: λ (K×V, row-major, all entries positive)
/// and the number of updates applied so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalState {
    pub k: usize,
    pub v: usize,
    pub lambda: Vec<f64>,
    pub t: u64,
}

impl VariationalState {
    /// λ ≡ `value`.
    pub fn constant(k: usize, v: usize, value: f64) -> Self {
        Self { k, v, lambda: vec![value; k * v], t: 0 }
    }

    /// Gamma(100, 1/100) draws: close to 1 but asymmetric across topics.
    pub fn random(k: usize, v: usize, rng: &mut crate::Rng) -> Self {
        let g = Gamma::new(100.0, 0.01).expect("valid gamma parameters");
        Self { k, v, lambda: (0..k * v).map(|_| g.sample(rng)).collect(), t: 0 }
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.lambda[k * self.v..(k + 1) * self.v]
    }

    /// E_q[log φ_kw] = ψ(λ_kw) − ψ(Σ_w λ_kw).
    pub fn expectations(&self) -> TopicExpectations {
        let mut elog = Vec::with_capacity(self.lambda.len());
        for k in 0..self.k {
            let row = self.row(k);
            let psi_sum = digamma_unchecked(row.iter().sum());
            elog.extend(row.iter().map(|&l| digamma_unchecked(l) - psi_sum));
        }
        TopicExpectations { k: self.k, v: self.v, elog }
    }
}

/// Cached E_q[log φ] for a fixed λ.
#[derive(Debug, Clone)]
pub struct TopicExpectations {
    k: usize,
    v: usize,
    elog: Vec<f64>,
}

impl TopicExpectations {
    fn get(&self, k: usize, w: usize) -> f64 {
        self.elog[k * self.v + w]
    }
}

/// Local variational factors of one document.
#[derive(Debug, Clone, PartialEq)]
pub struct DocPosterior {
    pub gamma: Vec<f64>,
    /// One responsibility row (length K) per distinct word, in the order of
    /// `Document::counts`.
    pub phi_local: Vec<Vec<f64>>,
    pub iterations: usize,
    /// False when `max_inner` was reached first; the last iterate is kept.
    pub converged: bool,
}

fn elog_theta(gamma: &[f64]) -> Vec<f64> {
    let psi_sum = digamma_unchecked(gamma.iter().sum());
    gamma.iter().map(|&g| digamma_unchecked(g) - psi_sum).collect()
}

fn responsibilities(doc: &Document, tx: &TopicExpectations, elog_th: &[f64]) -> Vec<Vec<f64>> {
    let mut logits = vec![0.0; tx.k];
    doc.counts()
        .iter()
        .map(|&(w, _)| {
            for (k, l) in logits.iter_mut().enumerate() {
                *l = elog_th[k] + tx.get(k, w);
            }
            let norm = log_sum_exp(&logits);
            logits.iter().map(|l| (l - norm).exp()).collect()
        })
        .collect()
}

/// Coordinate ascent on (γ, φ) for one document with λ fixed, starting from
/// `gamma0` or from α + |d|/K.
pub fn e_step_with(
    doc: &Document,
    tx: &TopicExpectations,
    alpha: f64,
    opts: &EStepOptions,
    gamma0: Option<&[f64]>,
) -> DocPosterior {
    let k = tx.k;
    let mut gamma: Vec<f64> = match gamma0 {
        Some(g) => g.to_vec(),
        None => vec![alpha + doc.len() as f64 / k as f64; k],
    };
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_inner {
        iterations += 1;
        let phi = responsibilities(doc, tx, &elog_theta(&gamma));
        let mut next = vec![alpha; k];
        for (&(_, c), row) in doc.counts().iter().zip(&phi) {
            for (g, p) in next.iter_mut().zip(row) {
                *g += c as f64 * p;
            }
        }
        let change = gamma.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum::<f64>() / k as f64;
        gamma = next;
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    let phi_local = responsibilities(doc, tx, &elog_theta(&gamma));
    DocPosterior { gamma, phi_local, iterations, converged }
}

/// E-step against the current λ.
pub fn e_step(doc: &Document, state: &VariationalState, alpha: f64, opts: &EStepOptions) -> DocPosterior {
    e_step_with(doc, &state.expectations(), alpha, opts, None)
}

/// Document part of the ELBO:
/// E[log p(w|z,φ)] + E[log p(z|θ)] + E[log p(θ|α)] − E[log q(z)] − E[log q(θ)].
pub fn doc_elbo(doc: &Document, post: &DocPosterior, tx: &TopicExpectations, alpha: f64) -> f64 {
    let k = tx.k;
    let et = elog_theta(&post.gamma);
    let mut words = 0.0;
    for (&(w, c), row) in doc.counts().iter().zip(&post.phi_local) {
        let mut s = 0.0;
        for (z, &p) in row.iter().enumerate() {
            if p > 0.0 {
                s += p * (et[z] + tx.get(z, w) - p.ln());
            }
        }
        words += c as f64 * s;
    }
    let gamma_sum: f64 = post.gamma.iter().sum();
    let prior =
        ln_gamma(k as f64 * alpha) - k as f64 * ln_gamma(alpha) + et.iter().map(|e| (alpha - 1.0) * e).sum::<f64>();
    let entropy = ln_gamma(gamma_sum) - post.gamma.iter().map(|&g| ln_gamma(g)).sum::<f64>()
        + post.gamma.iter().zip(&et).map(|(g, e)| (g - 1.0) * e).sum::<f64>();
    words + prior - entropy
}

/// Global part of the ELBO: E[log p(φ|η)] − E[log q(φ|λ)]. Zero when λ ≡ η.
pub fn global_elbo(state: &VariationalState, tx: &TopicExpectations, eta: f64) -> f64 {
    let v = state.v as f64;
    let mut total = 0.0;
    for k in 0..state.k {
        let row = state.row(k);
        total += ln_gamma(v * eta) - ln_gamma(row.iter().sum());
        for (w, &l) in row.iter().enumerate() {
            total += (eta - l) * tx.get(k, w) + ln_gamma(l) - ln_gamma(eta);
        }
    }
    total
}

/// Full ELBO of `corpus` under λ, fitting every document's local factors.
pub fn elbo(corpus: &Corpus, state: &VariationalState, params: &LdaParams) -> f64 {
    let tx = state.expectations();
    let local: f64 = corpus
        .docs()
        .par_iter()
        .map(|d| doc_elbo(d, &e_step_with(d, &tx, params.alpha, &params.e_step, None), &tx, params.alpha))
        .collect::<Vec<_>>()
        .iter()
        .sum();
    local + global_elbo(state, &tx, params.eta)
}

/// ρ_t = (τ₀ + t)^(−κ), capped at 1.
pub fn learning_rate(t: u64, tau0: f64, kappa: f64) -> f64 {
    (tau0 + t as f64).powf(-kappa).min(1.0)
}

/// Σ over the batch of c_w · φ_dwk, unscaled.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub k: usize,
    pub v: usize,
    pub sstats: Vec<f64>,
    pub batch_docs: usize,
}

impl BatchStats {
    pub fn new(k: usize, v: usize) -> Self {
        Self { k, v, sstats: vec![0.0; k * v], batch_docs: 0 }
    }

    pub fn add(&mut self, doc: &Document, post: &DocPosterior) {
        for (&(w, c), row) in doc.counts().iter().zip(&post.phi_local) {
            for (k, p) in row.iter().enumerate() {
                self.sstats[k * self.v + w] += c as f64 * p;
            }
        }
        self.batch_docs += 1;
    }
}

/// λ ← (1 − ρ)λ + ρ(η + (D/|B|)·stats).
pub fn m_step_online(state: &mut VariationalState, stats: &BatchStats, rho: f64, corpus_size: usize, eta: f64) {
    let scale = corpus_size as f64 / stats.batch_docs.max(1) as f64;
    for (l, s) in state.lambda.iter_mut().zip(&stats.sstats) {
        *l = (1.0 - rho) * *l + rho * (eta + scale * s);
    }
    state.t += 1;
}

/// Posterior mean of φ: λ rows normalized.
pub fn estimate_phi(state: &VariationalState) -> TopicWordMatrix {
    let mut data = Vec::with_capacity(state.lambda.len());
    for k in 0..state.k {
        let row = state.row(k);
        let s: f64 = row.iter().sum();
        data.extend(row.iter().map(|l| l / s));
    }
    TopicWordMatrix::new(state.k, state.v, data).expect("normalized rows")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub t: u64,
    pub rho: f64,
    pub batch_elbo: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub params: LdaParams,
    pub state: VariationalState,
}

impl LdaModel {
    pub fn phi(&self) -> TopicWordMatrix {
        estimate_phi(&self.state)
    }

    /// Σ of per-document ELBOs with λ held fixed.
    pub fn heldout_elbo(&self, docs: &[Document]) -> f64 {
        let tx = self.state.expectations();
        let p = &self.params;
        docs.par_iter()
            .map(|d| doc_elbo(d, &e_step_with(d, &tx, p.alpha, &p.e_step, None), &tx, p.alpha))
            .collect::<Vec<_>>()
            .iter()
            .sum()
    }
}

#[derive(Debug, Clone)]
pub struct LdaFit {
    pub model: LdaModel,
    pub log: Vec<TrainLogRow>,
    /// E-steps that hit `max_inner`.
    pub unconverged: usize,
}

/// Runs `passes` epochs of shuffled minibatches.
pub fn train_logged(corpus: &Corpus, params: &LdaParams) -> Result<LdaFit> {
    params.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyDocument);
    }
    let mut rng = rng_from_seed(params.seed);
    let d = corpus.num_docs();
    let mut state = VariationalState::random(params.k, corpus.vocab_size(), &mut rng);
    let mut order: Vec<usize> = (0..d).collect();
    let mut log = Vec::new();
    let mut unconverged = 0;
    for _ in 0..params.passes {
        order.shuffle(&mut rng);
        for batch in order.chunks(params.batch_size) {
            let tx = state.expectations();
            let posts: Vec<DocPosterior> = batch
                .par_iter()
                .map(|&i| e_step_with(&corpus.docs()[i], &tx, params.alpha, &params.e_step, None))
                .collect();
            let mut stats = BatchStats::new(state.k, state.v);
            let mut local = 0.0;
            for (&i, post) in batch.iter().zip(&posts) {
                let doc = &corpus.docs()[i];
                stats.add(doc, post);
                local += doc_elbo(doc, post, &tx, params.alpha);
                unconverged += usize::from(!post.converged);
            }
            let batch_elbo = local * d as f64 / batch.len() as f64 + global_elbo(&state, &tx, params.eta);
            let rho = learning_rate(state.t, params.tau0, params.kappa);
            log.push(TrainLogRow { t: state.t, rho, batch_elbo });
            m_step_online(&mut state, &stats, rho, d, params.eta);
        }
    }
    if unconverged > 0 {
        log::debug!("{unconverged} e-steps stopped at the iteration cap");
    }
    Ok(LdaFit { model: LdaModel { params: *params, state }, log, unconverged })
}

pub fn train(corpus: &Corpus, params: &LdaParams) -> Result<LdaModel> {
    train_logged(corpus, params).map(|f| f.model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;
    use crate::synthetic;
    use std::sync::Arc;

    fn doc(ids: &[usize]) -> Document {
        Document::from_ids(ids.to_vec(), false).unwrap()
    }

    fn corpus(v: usize, docs: &[&[usize]]) -> Corpus {
        let vocab = Arc::new(Vocabulary::from_tokens((0..v).map(|i| format!("w{i}")).collect()).unwrap());
        Corpus::new(docs.iter().map(|d| doc(d)).collect(), vocab).unwrap()
    }

    #[test]
    fn single_topic_e_step() {
        let s = VariationalState::constant(1, 3, 0.7);
        let post = e_step(&doc(&[0, 1, 1, 2]), &s, 0.3, &EStepOptions { tol: 1e-3, max_inner: 1 });
        assert_eq!(post.gamma, vec![0.3 + 4.0]);
    }

    #[test]
    fn symmetric_lambda_gives_uniform_responsibilities() {
        let s = VariationalState::constant(3, 4, 2.0);
        let post = e_step(&doc(&[0, 2, 3]), &s, 0.1, &EStepOptions::default());
        for row in &post.phi_local {
            assert!(row.iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-12));
        }
        assert!(post.converged);
    }

    #[test]
    fn peaked_lambda_identifies_topic() {
        let mut s = VariationalState::constant(2, 4, 0.01);
        for w in 0..2 {
            s.lambda[w] = 50.0;
        }
        for w in 2..4 {
            s.lambda[4 + w] = 50.0;
        }
        let post = e_step(&doc(&[0, 1, 0, 1, 0]), &s, 0.5, &EStepOptions::default());
        assert!(post.gamma[0] / (post.gamma[0] + post.gamma[1]) > 0.9);
        assert!(post.gamma.iter().all(|&g| g >= 0.5));
    }

    #[test]
    fn e_step_flags_iteration_cap() {
        let mut rng = rng_from_seed(4);
        let s = VariationalState::random(3, 5, &mut rng);
        let post = e_step(&doc(&[0, 1, 2, 3, 4, 4]), &s, 0.1, &EStepOptions { tol: 1e-300, max_inner: 3 });
        assert!(!post.converged);
        assert_eq!(post.iterations, 3);
    }

    #[test]
    fn learning_rate_values() {
        assert_eq!(learning_rate(0, 1.0, 0.6), 1.0);
        assert!((learning_rate(63, 1.0, 0.5) - 0.125).abs() < 1e-15);
        let mut last = f64::INFINITY;
        for t in 0..100 {
            let r = learning_rate(t, 64.0, 0.75);
            assert!(r < last);
            last = r;
        }
        assert_eq!(learning_rate(0, 0.0, 0.75), 1.0);
    }

    #[test]
    fn m_step_extremes() {
        let mut rng = rng_from_seed(8);
        let s0 = VariationalState::random(2, 3, &mut rng);
        let mut stats = BatchStats::new(2, 3);
        stats.sstats = vec![1.0, 2.0, 3.0, 0.5, 0.0, 4.0];
        stats.batch_docs = 2;

        let mut s = s0.clone();
        m_step_online(&mut s, &stats, 0.0, 10, 0.1);
        assert_eq!(s.lambda, s0.lambda);
        assert_eq!(s.t, 1);

        let mut s = s0.clone();
        m_step_online(&mut s, &stats, 1.0, 10, 0.1);
        for (l, st) in s.lambda.iter().zip(&stats.sstats) {
            assert_eq!(*l, 0.1 + 5.0 * st);
        }
    }

    #[test]
    fn full_batch_rho_one_equals_batch_vb_posterior_mean() {
        let c = corpus(4, &[&[0, 1, 1], &[2, 3], &[0, 3, 3, 3]]);
        let params = LdaParams { e_step: EStepOptions { tol: 1e-10, max_inner: 500 }, ..LdaParams::new(2) };
        let mut rng = rng_from_seed(1);
        let s0 = VariationalState::random(2, 4, &mut rng);
        let tx = s0.expectations();
        let mut stats = BatchStats::new(2, 4);
        // batch VB: λ = η + Σ_d c_w φ_dwk
        let mut expected = vec![params.eta; 8];
        for d in c.docs() {
            let post = e_step_with(d, &tx, params.alpha, &params.e_step, None);
            stats.add(d, &post);
            for (&(w, cnt), row) in d.counts().iter().zip(&post.phi_local) {
                for k in 0..2 {
                    expected[k * 4 + w] += cnt as f64 * row[k];
                }
            }
        }
        let mut s = s0.clone();
        m_step_online(&mut s, &stats, 1.0, c.num_docs(), params.eta);
        let a = estimate_phi(&s);
        let b = estimate_phi(&VariationalState { k: 2, v: 4, lambda: expected, t: 0 });
        for k in 0..2 {
            for w in 0..4 {
                assert!((a.get(k, w) - b.get(k, w)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn estimate_phi_normalizes_rows() {
        let s = VariationalState { k: 2, v: 3, lambda: vec![1.0, 1.0, 1.0, 9.0, 1.0, 0.0 + 1e-300], t: 0 };
        let phi = estimate_phi(&s);
        assert!(phi.row(0).iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-15));
        assert!((phi.get(1, 0) - 0.9).abs() < 1e-15 && (phi.get(1, 1) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn global_elbo_vanishes_at_prior() {
        let s = VariationalState::constant(3, 5, 0.2);
        assert!(global_elbo(&s, &s.expectations(), 0.2).abs() < 1e-12);
        let empty = Corpus::new(vec![], Arc::new(Vocabulary::from_tokens(vec!["a".into()]).unwrap())).unwrap();
        let s = VariationalState::constant(2, 1, 0.5);
        assert!(elbo(&empty, &s, &LdaParams { eta: 0.5, ..LdaParams::new(2) }).abs() < 1e-12);
        let mut rng = rng_from_seed(2);
        let s = VariationalState::random(2, 4, &mut rng);
        assert!(global_elbo(&s, &s.expectations(), 0.2) < 0.0);
    }

    #[test]
    fn batch_vb_elbo_is_monotone() {
        let planted = synthetic::planted_lda(&synthetic::PlantedLda {
            topics: 3,
            words_per_topic: 5,
            docs: 60,
            doc_len: 12,
            alpha: 0.3,
            seed: 3,
        });
        let c = &planted.corpus;
        let params = LdaParams { e_step: EStepOptions { tol: 1e-10, max_inner: 1000 }, ..LdaParams::new(3) };
        let mut rng = rng_from_seed(5);
        let mut s = VariationalState::random(3, c.vocab_size(), &mut rng);
        let mut gammas: Vec<Option<Vec<f64>>> = vec![None; c.num_docs()];
        let mut last = f64::NEG_INFINITY;
        for _ in 0..15 {
            let tx = s.expectations();
            let mut stats = BatchStats::new(3, c.vocab_size());
            let mut total = global_elbo(&s, &tx, params.eta);
            for (d, g) in c.docs().iter().zip(gammas.iter_mut()) {
                let post = e_step_with(d, &tx, params.alpha, &params.e_step, g.as_deref());
                total += doc_elbo(d, &post, &tx, params.alpha);
                stats.add(d, &post);
                *g = Some(post.gamma.clone());
            }
            assert!(total >= last - 1e-8, "ELBO decreased: {last} -> {total}");
            last = total;
            m_step_online(&mut s, &stats, 1.0, c.num_docs(), params.eta);
        }
    }

    #[test]
    fn planted_recovery() {
        let planted = synthetic::planted_lda(&synthetic::PlantedLda {
            topics: 2,
            words_per_topic: 10,
            docs: 500,
            doc_len: 40,
            alpha: 0.5,
            seed: 21,
        });
        let params = LdaParams { batch_size: 50, passes: 20, tau0: 1.0, kappa: 0.7, seed: 4, ..LdaParams::new(2) };
        let model = train(&planted.corpus, &params).unwrap();
        let l1 = synthetic::matched_l1(&model.phi(), &planted.phi);
        assert!(l1.iter().all(|&x| x <= 0.1), "l1 {l1:?}");
    }

    #[test]
    fn training_is_deterministic_and_beats_prior() {
        let planted = synthetic::planted_lda(&synthetic::PlantedLda {
            topics: 3,
            words_per_topic: 6,
            docs: 150,
            doc_len: 10,
            alpha: 0.3,
            seed: 9,
        });
        let train_c = planted.corpus.subset(&(0..120).collect::<Vec<_>>());
        let test: Vec<Document> = planted.corpus.docs()[120..].to_vec();
        let params = LdaParams { batch_size: 20, passes: 5, seed: 6, ..LdaParams::new(3) };
        let a = train(&train_c, &params).unwrap();
        let b = train(&train_c, &params).unwrap();
        assert_eq!(a.state.lambda, b.state.lambda);
        let prior = LdaModel { params, state: VariationalState::constant(3, train_c.vocab_size(), params.eta) };
        assert!(a.heldout_elbo(&test) > prior.heldout_elbo(&test));
    }

    #[test]
    fn lambda_stays_positive() {
        let planted = synthetic::planted_lda(&synthetic::PlantedLda {
            topics: 2,
            words_per_topic: 4,
            docs: 40,
            doc_len: 6,
            alpha: 0.5,
            seed: 1,
        });
        let fit = train_logged(&planted.corpus, &LdaParams { batch_size: 7, passes: 3, ..LdaParams::new(2) }).unwrap();
        assert!(fit.model.state.lambda.iter().all(|&l| l > 0.0));
        assert_eq!(fit.log.len(), 3 * 6);
        assert_eq!(fit.model.state.t, 18);
    }

    #[test]
    fn rejects_bad_params() {
        let c = corpus(2, &[&[0]]);
        for p in [
            LdaParams { kappa: 0.5, ..LdaParams::new(2) },
            LdaParams { kappa: 1.1, ..LdaParams::new(2) },
            LdaParams { tau0: -1.0, ..LdaParams::new(2) },
            LdaParams { batch_size: 0, ..LdaParams::new(2) },
            LdaParams::new(0),
        ] {
            assert!(train(&c, &p).is_err());
        }
    }
}
