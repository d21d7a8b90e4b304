//! ProdLDA: a variational autoencoder whose decoder mixes topics in logit
//! space before normalizing (a product of experts).
//!
//! The Dirichlet prior on θ is replaced by its Laplace approximation in the
//! softmax basis, a diagonal Gaussian N(μ̃, Σ̃), which makes the KL term closed
//! form and lets θ be sampled as softmax(μ + Σ^½ ε).

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document};
use crate::eval::TopicWordMatrix;
use crate::nn::{
    dropout, log_softmax_rows, softmax, softmax_backward, softmax_rows, softplus, softplus_grad, AdamState, BatchNorm,
    BnCache, Linear, Mode, Tensor2,
};
use crate::{rng_from_seed, Error, Result};

/// Rows per chunk when scoring many documents at once.
const EVAL_CHUNK: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplacePrior {
    pub mu_tilde: Vec<f64>,
    /// Diagonal of Σ̃.
    pub sigma_tilde: Vec<f64>,
}

pub fn laplace_prior(alpha: &[f64]) -> Result<LaplacePrior> {
    let k = alpha.len();
    if k < 2 {
        return Err(Error::Domain(format!("Laplace prior needs K >= 2, got {k}")));
    }
    if let Some(a) = alpha.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        return Err(Error::Domain(format!("Dirichlet parameters must be positive, got {a}")));
    }
    let kf = k as f64;
    let mean_log = alpha.iter().map(|a| a.ln()).sum::<f64>() / kf;
    let inv_sum: f64 = alpha.iter().map(|a| 1.0 / a).sum();
    Ok(LaplacePrior {
        mu_tilde: alpha.iter().map(|a| a.ln() - mean_log).collect(),
        sigma_tilde: alpha.iter().map(|a| (1.0 / a) * (1.0 - 2.0 / kf) + inv_sum / (kf * kf)).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProdLdaConfig {
    pub k: usize,
    /// Symmetric Dirichlet concentration approximated by the prior.
    pub alpha: f64,
    pub encoder_hidden: [usize; 2],
    pub dropout_p: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub val_fraction: f64,
    pub seed: u64,
    /// Weight the reconstruction by token counts instead of presence.
    pub count_weighted: bool,
    /// Batch-normalize the decoder logits (no learned gain or shift).
    pub decoder_batchnorm: bool,
}

impl ProdLdaConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            alpha: 1.0 / k.max(1) as f64,
            encoder_hidden: [100, 100],
            dropout_p: 0.2,
            lr: 0.001,
            batch_size: 256,
            max_epochs: 100,
            patience: 10,
            val_fraction: 0.3,
            seed: 0,
            count_weighted: false,
            decoder_batchnorm: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidConfig(format!("ProdLDA needs K >= 2, got {}", self.k)));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidConfig("alpha must be positive".into()));
        }
        if self.encoder_hidden.contains(&0) {
            return Err(Error::InvalidConfig("hidden widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::InvalidProbability(self.dropout_p));
        }
        if !(self.lr > 0.0) || self.batch_size < 2 || self.patience < 1 || self.max_epochs < 1 {
            return Err(Error::InvalidConfig(
                "lr must be positive, batch_size >= 2, patience and max_epochs >= 1".into(),
            ));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!("val_fraction must lie in (0, 1), got {}", self.val_fraction)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub hidden1: Linear,
    pub hidden2: Linear,
    pub mu_head: Linear,
    pub mu_bn: BatchNorm,
    pub logvar_head: Linear,
    pub logvar_bn: BatchNorm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProdLdaModel {
    pub config: ProdLdaConfig,
    pub vocab_size: usize,
    pub encoder: Encoder,
    /// K×V expert logits, unconstrained.
    pub decoder_phi: Array2<f64>,
    pub decoder_bn: Option<BatchNorm>,
    pub prior: LaplacePrior,
}

/// Per-document loss terms.
#[derive(Debug, Clone, PartialEq)]
pub struct LossParts {
    pub kl: Vec<f64>,
    pub reconstruction: Vec<f64>,
}

impl LossParts {
    pub fn per_doc(&self) -> impl Iterator<Item = f64> + '_ {
        self.kl.iter().zip(&self.reconstruction).map(|(a, b)| a + b)
    }

    pub fn mean(&self) -> f64 {
        self.per_doc().sum::<f64>() / self.kl.len() as f64
    }
}

/// Gradients in the order of `ProdLdaModel::params`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Vec<f64>>);

/// Everything the backward pass needs from one forward pass.
struct Trace {
    x: Tensor2,
    h1_pre: Tensor2,
    h1: Tensor2,
    h2_pre: Tensor2,
    h2_out: Tensor2,
    mask: Option<Tensor2>,
    mu_cache: BnCache,
    logvar_cache: BnCache,
    mu: Tensor2,
    logvar: Tensor2,
    eps: Tensor2,
    theta: Tensor2,
    dec_cache: Option<BnCache>,
    probs: Tensor2,
    weights: Tensor2,
}

/// Dense B×V count matrix of `docs`.
pub fn bow_matrix(docs: &[&Document], v: usize) -> Result<Tensor2> {
    let mut x = Array2::zeros((docs.len(), v));
    for (r, d) in docs.iter().enumerate() {
        for &(w, c) in d.counts() {
            if w >= v {
                return Err(Error::ShapeMismatch { expected: format!("word ids < {v}"), got: w.to_string() });
            }
            x[[r, w]] = c as f64;
        }
    }
    Ok(x)
}

fn reconstruction_weights(x: &Tensor2, count_weighted: bool) -> Tensor2 {
    if count_weighted {
        x.clone()
    } else {
        x.mapv(|c| if c > 0.0 { 1.0 } else { 0.0 })
    }
}

/// θ = softmax(μ + exp(log Σ / 2) ⊙ ε).
pub fn reparam_sample(mu: &[f64], log_sigma: &[f64], eps: &[f64]) -> Vec<f64> {
    let z: Vec<f64> = mu.iter().zip(log_sigma).zip(eps).map(|((m, l), e)| m + (l / 2.0).exp() * e).collect();
    softmax(&z)
}

/// KL(N(μ, diag Σ) ‖ N(μ̃, diag Σ̃)) with Σ given as log-variances.
pub fn kl_divergence(mu: &[f64], log_sigma: &[f64], prior: &LaplacePrior) -> f64 {
    let mut total = -(mu.len() as f64);
    for k in 0..mu.len() {
        let st = prior.sigma_tilde[k];
        let d = prior.mu_tilde[k] - mu[k];
        total += log_sigma[k].exp() / st + d * d / st + st.ln() - log_sigma[k];
    }
    0.5 * total
}

/// −Σ_w weight(w) log p(w), weight = presence or count.
pub fn reconstruction_loss(doc: &Document, word_dist: &[f64], count_weighted: bool) -> f64 {
    doc.counts()
        .iter()
        .map(|&(w, c)| {
            let weight = if count_weighted { c as f64 } else { 1.0 };
            -weight * word_dist[w].ln()
        })
        .sum()
}

fn standard_normals(rows: usize, cols: usize, rng: &mut crate::Rng) -> Tensor2 {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

fn flat(a: &Array2<f64>) -> Vec<f64> {
    a.iter().copied().collect()
}

impl ProdLdaModel {
    /// Random initialization, uniform(±1/√fan_in) everywhere.
    pub fn new(vocab_size: usize, config: ProdLdaConfig, rng: &mut crate::Rng) -> Result<Self> {
        config.validate()?;
        let [h1, h2] = config.encoder_hidden;
        let k = config.k;
        let bound = 1.0 / (k as f64).sqrt();
        let encoder = Encoder {
            hidden1: Linear::init(vocab_size, h1, true, rng),
            hidden2: Linear::init(h1, h2, true, rng),
            mu_head: Linear::init(h2, k, true, rng),
            mu_bn: BatchNorm::new(k, false, false),
            logvar_head: Linear::init(h2, k, true, rng),
            logvar_bn: BatchNorm::new(k, false, false),
        };
        let decoder_phi = Array2::from_shape_simple_fn((k, vocab_size), || rng.random_range(-bound..bound));
        Self::assemble(vocab_size, config, encoder, decoder_phi)
    }

    /// All weights zero.
    pub fn zeroed(vocab_size: usize, config: ProdLdaConfig) -> Result<Self> {
        config.validate()?;
        let [h1, h2] = config.encoder_hidden;
        let k = config.k;
        let encoder = Encoder {
            hidden1: Linear::zeros(vocab_size, h1, true),
            hidden2: Linear::zeros(h1, h2, true),
            mu_head: Linear::zeros(h2, k, true),
            mu_bn: BatchNorm::new(k, false, false),
            logvar_head: Linear::zeros(h2, k, true),
            logvar_bn: BatchNorm::new(k, false, false),
        };
        Self::assemble(vocab_size, config, encoder, Array2::zeros((k, vocab_size)))
    }

    fn assemble(vocab_size: usize, config: ProdLdaConfig, encoder: Encoder, decoder_phi: Array2<f64>) -> Result<Self> {
        let prior = laplace_prior(&vec![config.alpha; config.k])?;
        let decoder_bn = config.decoder_batchnorm.then(|| BatchNorm::new(vocab_size, false, false));
        Ok(Self { config, vocab_size, encoder, decoder_phi, decoder_bn, prior })
    }

    pub fn k(&self) -> usize {
        self.config.k
    }

    /// Trainable tensors, flattened row-major, in a fixed order.
    pub fn params(&self) -> Vec<Vec<f64>> {
        let e = &self.encoder;
        let mut out = Vec::new();
        for l in [&e.hidden1, &e.hidden2, &e.mu_head, &e.logvar_head] {
            out.push(flat(&l.weight));
            out.push(l.bias.as_ref().map(|b| b.to_vec()).unwrap_or_default());
        }
        out.push(flat(&self.decoder_phi));
        out
    }

    /// Overwrites the tensors returned by `params` with `values`.
    pub fn set_params(&mut self, values: &[Vec<f64>]) -> Result<()> {
        let shapes: Vec<usize> = self.params().iter().map(Vec::len).collect();
        if values.len() != shapes.len() || values.iter().zip(&shapes).any(|(v, &n)| v.len() != n) {
            return Err(Error::ShapeMismatch { expected: format!("{shapes:?}"), got: "parameter list".into() });
        }
        let mut it = values.iter();
        let e = &mut self.encoder;
        for l in [&mut e.hidden1, &mut e.hidden2, &mut e.mu_head, &mut e.logvar_head] {
            let w = it.next().expect("checked length");
            l.weight = Array2::from_shape_vec(l.weight.raw_dim(), w.clone()).expect("checked length");
            let b = it.next().expect("checked length");
            if let Some(bias) = &mut l.bias {
                *bias = Array1::from_vec(b.clone());
            }
        }
        let phi = it.next().expect("checked length");
        self.decoder_phi = Array2::from_shape_vec(self.decoder_phi.raw_dim(), phi.clone()).expect("checked length");
        Ok(())
    }

    /// Posterior mean and log-variance rows for a count matrix, eval mode.
    pub fn encode(&self, bow: &Tensor2) -> Result<(Tensor2, Tensor2)> {
        let e = &self.encoder;
        let h1 = softplus(&e.hidden1.forward(bow)?);
        let h2 = softplus(&e.hidden2.forward(&h1)?);
        let mu = e.mu_bn.forward(&e.mu_head.forward(&h2)?, Mode::Eval)?.0;
        let logvar = e.logvar_bn.forward(&e.logvar_head.forward(&h2)?, Mode::Eval)?.0;
        Ok((mu, logvar))
    }

    pub fn encode_doc(&self, doc: &Document) -> Result<(Vec<f64>, Vec<f64>)> {
        let (mu, lv) = self.encode(&bow_matrix(&[doc], self.vocab_size)?)?;
        Ok((mu.row(0).to_vec(), lv.row(0).to_vec()))
    }

    /// Word distribution softmax(θ·Φ), eval mode.
    pub fn decode(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.k() {
            return Err(Error::ShapeMismatch { expected: self.k().to_string(), got: theta.len().to_string() });
        }
        let t = Array2::from_shape_vec((1, theta.len()), theta.to_vec()).expect("one row");
        let mut logits = t.dot(&self.decoder_phi);
        if let Some(bn) = &self.decoder_bn {
            logits = bn.forward(&logits, Mode::Eval)?.0;
        }
        Ok(softmax_rows(&logits).row(0).to_vec())
    }

    pub fn topic_word_matrix(&self) -> TopicWordMatrix {
        let rows = softmax_rows(&self.decoder_phi);
        TopicWordMatrix::new(self.k(), self.vocab_size, flat(&rows)).expect("softmax rows")
    }

    fn forward(
        &self,
        docs: &[&Document],
        eps: &Tensor2,
        mode: Mode,
        rng: &mut crate::Rng,
    ) -> Result<(LossParts, Trace)> {
        let k = self.k();
        if eps.dim() != (docs.len(), k) {
            return Err(Error::ShapeMismatch {
                expected: format!("[{}, {k}]", docs.len()),
                got: format!("{:?}", eps.shape()),
            });
        }
        let e = &self.encoder;
        let x = bow_matrix(docs, self.vocab_size)?;
        let h1_pre = e.hidden1.forward(&x)?;
        let h1 = softplus(&h1_pre);
        let h2_pre = e.hidden2.forward(&h1)?;
        let (h2_out, mask) = dropout(&softplus(&h2_pre), self.config.dropout_p, mode, rng)?;
        let (mu, mu_cache) = e.mu_bn.forward(&e.mu_head.forward(&h2_out)?, mode)?;
        let (logvar, logvar_cache) = e.logvar_bn.forward(&e.logvar_head.forward(&h2_out)?, mode)?;
        let z = &mu + &(logvar.mapv(|l| (l / 2.0).exp()) * eps);
        let theta = softmax_rows(&z);
        let mut logits = theta.dot(&self.decoder_phi);
        let mut dec_cache = None;
        if let Some(bn) = &self.decoder_bn {
            let (y, c) = bn.forward(&logits, mode)?;
            logits = y;
            dec_cache = Some(c);
        }
        let logp = log_softmax_rows(&logits);
        let probs = logp.mapv(f64::exp);
        let weights = reconstruction_weights(&x, self.config.count_weighted);
        let reconstruction = (&weights * &logp).sum_axis(Axis(1)).mapv(|s| -s).to_vec();
        let kl = mu
            .rows()
            .into_iter()
            .zip(logvar.rows())
            .map(|(m, l)| {
                kl_divergence(m.as_slice().expect("contiguous"), l.as_slice().expect("contiguous"), &self.prior)
            })
            .collect();
        let trace = Trace {
            x,
            h1_pre,
            h1,
            h2_pre,
            h2_out,
            mask,
            mu_cache,
            logvar_cache,
            mu,
            logvar,
            eps: eps.clone(),
            theta,
            dec_cache,
            probs,
            weights,
        };
        Ok((LossParts { kl, reconstruction }, trace))
    }

    /// Loss terms for a batch with caller-supplied noise. Dropout draws come
    /// from `rng` in train mode.
    pub fn loss_with(&self, docs: &[&Document], eps: &Tensor2, mode: Mode, rng: &mut crate::Rng) -> Result<LossParts> {
        self.forward(docs, eps, mode, rng).map(|(parts, _)| parts)
    }

    /// Mean over the batch of KL + reconstruction, one ε draw per document.
    pub fn loss(&self, docs: &[&Document], rng: &mut crate::Rng) -> Result<f64> {
        if docs.is_empty() {
            return Err(Error::EmptyDocument);
        }
        let eps = standard_normals(docs.len(), self.k(), rng);
        Ok(self.loss_with(docs, &eps, Mode::Train, rng)?.mean())
    }

    /// Batch-mean loss, its gradients and the batch-norm caches whose running
    /// statistics `apply_batch_stats` folds in.
    pub fn loss_and_grads(
        &self,
        docs: &[&Document],
        eps: &Tensor2,
        mode: Mode,
        rng: &mut crate::Rng,
    ) -> Result<(LossParts, Gradients, BatchStatistics)> {
        let (parts, t) = self.forward(docs, eps, mode, rng)?;
        let b = docs.len() as f64;
        let e = &self.encoder;
        let p = &self.prior;

        let wsum = t.weights.sum_axis(Axis(1)).insert_axis(Axis(1));
        let mut g_logits = (&t.probs * &wsum - &t.weights) / b;
        if let (Some(bn), Some(c)) = (&self.decoder_bn, &t.dec_cache) {
            g_logits = bn.backward(c, &g_logits).x;
        }
        let g_phi = t.theta.t().dot(&g_logits);
        let g_theta = g_logits.dot(&self.decoder_phi.t());
        let g_z = softmax_backward(&t.theta, &g_theta);

        let sigma_t = Array1::from_vec(p.sigma_tilde.clone());
        let mu_t = Array1::from_vec(p.mu_tilde.clone());
        let g_mu = &g_z + &((&t.mu - &mu_t) / &sigma_t / b);
        let half_sd = t.logvar.mapv(|l| (l / 2.0).exp() / 2.0);
        let g_logvar = &g_z * &t.eps * &half_sd + &((t.logvar.mapv(f64::exp) / &sigma_t - 1.0) * (0.5 / b));

        let g_mu_pre = e.mu_bn.backward(&t.mu_cache, &g_mu).x;
        let g_lv_pre = e.logvar_bn.backward(&t.logvar_cache, &g_logvar).x;
        let mu_g = e.mu_head.backward(&t.h2_out, &g_mu_pre)?;
        let lv_g = e.logvar_head.backward(&t.h2_out, &g_lv_pre)?;
        let mut g_h2 = &mu_g.x + &lv_g.x;
        if let Some(mask) = &t.mask {
            g_h2 *= mask;
        }
        let g_h2_pre = g_h2 * softplus_grad(&t.h2_pre);
        let h2_g = e.hidden2.backward(&t.h1, &g_h2_pre)?;
        let g_h1_pre = &h2_g.x * &softplus_grad(&t.h1_pre);
        let h1_g = e.hidden1.backward(&t.x, &g_h1_pre)?;

        let bias = |g: Option<Array1<f64>>| g.map(|b| b.to_vec()).unwrap_or_default();
        let grads = Gradients(vec![
            flat(&h1_g.weight),
            bias(h1_g.bias),
            flat(&h2_g.weight),
            bias(h2_g.bias),
            flat(&mu_g.weight),
            bias(mu_g.bias),
            flat(&lv_g.weight),
            bias(lv_g.bias),
            flat(&g_phi),
        ]);
        let stats = BatchStatistics { mu: t.mu_cache, logvar: t.logvar_cache, decoder: t.dec_cache };
        Ok((parts, grads, stats))
    }

    pub fn apply_batch_stats(&mut self, stats: &BatchStatistics) {
        self.encoder.mu_bn.update_running(&stats.mu);
        self.encoder.logvar_bn.update_running(&stats.logvar);
        if let (Some(bn), Some(c)) = (&mut self.decoder_bn, &stats.decoder) {
            bn.update_running(c);
        }
    }

    /// Per-document loss in eval mode, noise drawn from `seed`.
    pub fn doc_losses(&self, docs: &[Document], seed: u64) -> Result<Vec<f64>> {
        let mut rng = rng_from_seed(seed);
        let mut out = Vec::with_capacity(docs.len());
        for chunk in docs.chunks(EVAL_CHUNK) {
            let refs: Vec<&Document> = chunk.iter().collect();
            let eps = standard_normals(refs.len(), self.k(), &mut rng);
            out.extend(self.loss_with(&refs, &eps, Mode::Eval, &mut rng)?.per_doc());
        }
        Ok(out)
    }

    /// Σ_d −(KL + reconstruction): a one-sample ELBO estimate, deterministic
    /// for a given seed.
    pub fn heldout_elbo(&self, docs: &[Document], seed: u64) -> Result<f64> {
        Ok(-self.doc_losses(docs, seed)?.iter().sum::<f64>())
    }
}

/// Batch-norm caches from a training step.
pub struct BatchStatistics {
    mu: BnCache,
    logvar: BnCache,
    decoder: Option<BnCache>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct ProdLdaFit {
    pub model: ProdLdaModel,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
}

/// Splits `0..n` into batches, folding a trailing singleton into the batch
/// before it so train-mode batch norm always sees two rows.
fn batches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = (start + size).min(order.len());
        if order.len() - end == 1 {
            end = order.len();
        }
        out.push(&order[start..end]);
        start = end;
    }
    out
}

fn mean_loss(model: &ProdLdaModel, docs: &[&Document], eps: &Tensor2, rng: &mut crate::Rng) -> Result<f64> {
    let mut total = 0.0;
    for (i, chunk) in docs.chunks(EVAL_CHUNK).enumerate() {
        let rows = eps.slice(ndarray::s![i * EVAL_CHUNK..i * EVAL_CHUNK + chunk.len(), ..]).to_owned();
        total += model.loss_with(chunk, &rows, Mode::Eval, rng)?.per_doc().sum::<f64>();
    }
    Ok(total / docs.len() as f64)
}

/// Adam on shuffled minibatches with early stopping on a held-out split.
/// Returns the weights of the best validation epoch.
pub fn train_logged(corpus: &Corpus, config: &ProdLdaConfig) -> Result<ProdLdaFit> {
    config.validate()?;
    let n = corpus.num_docs();
    let n_val = ((n as f64 * config.val_fraction).round() as usize).max(1);
    if n < n_val + 2 {
        return Err(Error::TooFewDocuments { docs: n, folds: 2 });
    }
    let mut rng = rng_from_seed(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let (val_idx, train_idx) = order.split_at(n_val);
    let val_docs: Vec<&Document> = val_idx.iter().map(|&i| &corpus.docs()[i]).collect();
    let mut train_idx = train_idx.to_vec();
    // the same noise every epoch so validation losses are comparable
    let val_eps = standard_normals(n_val, config.k, &mut rng);

    let mut model = ProdLdaModel::new(corpus.vocab_size(), config.clone(), &mut rng)?;
    let mut adam: Vec<AdamState> = model.params().iter().map(|p| AdamState::new(p.len(), config.lr)).collect();
    let mut best = (f64::INFINITY, model.clone(), 0);
    let mut stale = 0;
    let mut log = Vec::new();
    for epoch in 1..=config.max_epochs {
        train_idx.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in batches(&train_idx, config.batch_size) {
            let docs: Vec<&Document> = batch.iter().map(|&i| &corpus.docs()[i]).collect();
            let eps = standard_normals(docs.len(), config.k, &mut rng);
            let (parts, grads, stats) = model.loss_and_grads(&docs, &eps, Mode::Train, &mut rng)?;
            total += parts.per_doc().sum::<f64>();
            model.apply_batch_stats(&stats);
            let mut params = model.params();
            for ((p, g), opt) in params.iter_mut().zip(&grads.0).zip(&mut adam) {
                opt.step(p, g)?;
            }
            model.set_params(&params)?;
        }
        let train_loss = total / train_idx.len() as f64;
        let val_loss = mean_loss(&model, &val_docs, &val_eps, &mut rng)?;
        if !val_loss.is_finite() || !train_loss.is_finite() {
            return Err(Error::Domain(format!("non-finite loss at epoch {epoch}")));
        }
        log.push(EpochLog { epoch, train_loss, val_loss });
        log::debug!("epoch {epoch}: train {train_loss:.4} val {val_loss:.4}");
        if val_loss < best.0 {
            best = (val_loss, model.clone(), epoch);
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    Ok(ProdLdaFit { model: best.1, log, best_epoch: best.2 })
}

pub fn train(corpus: &Corpus, config: &ProdLdaConfig) -> Result<ProdLdaModel> {
    train_logged(corpus, config).map(|f| f.model)
}
