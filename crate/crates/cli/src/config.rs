//! Option layering: command-line flags over the `--config` TOML file over
//! built-in defaults. The resolved options are echoed next to each output.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use stm_core::corpus::{read_lemma_map, read_word_list, DEFAULT_MIN_COUNT};
use stm_core::dmm::{DmmParams, DEFAULT_ITERATIONS};
use stm_core::eval::{Metric, DEFAULT_EPSILON, DEFAULT_RELEVANCE_LAMBDA, DEFAULT_TOP_N, DEFAULT_WINDOW};
use stm_core::lda::{LdaParams, DEFAULT_BATCH_SIZE, DEFAULT_KAPPA, DEFAULT_PASSES, DEFAULT_TAU0};
use stm_core::prodlda::ProdLdaConfig;
use stm_core::select::DEFAULT_FOLDS;
use stm_core::{Error, PreprocessConfig};

pub const DEFAULT_K: usize = 20;
pub const DEFAULT_SEED: u64 = 0;

/// Fills every `None` field of `$dst` from `$src`.
macro_rules! layer {
    ($dst:expr, $src:expr; $($f:ident),+ $(,)?) => {
        $( if $dst.$f.is_none() { $dst.$f = $src.$f.clone(); } )+
    };
}

/// Sets every `None` field of `$dst` to the given default.
macro_rules! defaults {
    ($dst:expr; $($f:ident = $v:expr),+ $(,)?) => {
        $( if $dst.$f.is_none() { $dst.$f = Some($v); } )+
    };
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessOpts {
    /// Stopword list, one word per line
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    /// Lemma map, `form<TAB>lemma` per line
    #[arg(long)]
    pub lemmas: Option<PathBuf>,
    /// Drop tokens with fewer corpus occurrences [default: 100]
    #[arg(long)]
    pub min_count: Option<usize>,
    /// Keep characters outside the Latin script
    #[arg(long)]
    pub keep_nonlatin: bool,
    /// Keep @mentions
    #[arg(long)]
    pub keep_mentions: bool,
    /// Keep URLs
    #[arg(long)]
    pub keep_urls: bool,
    /// Collapse repeated words within a document
    #[arg(long)]
    pub dedupe: bool,
}

impl PreprocessOpts {
    pub fn resolve(&mut self, file: &Self) {
        layer!(self, file; stopwords, lemmas, min_count);
        self.keep_nonlatin |= file.keep_nonlatin;
        self.keep_mentions |= file.keep_mentions;
        self.keep_urls |= file.keep_urls;
        self.dedupe |= file.dedupe;
        defaults!(self; min_count = DEFAULT_MIN_COUNT);
    }

    pub fn build(&self) -> Result<PreprocessConfig> {
        let stopwords = match &self.stopwords {
            Some(p) => read_word_list(open(p)?).with_context(|| format!("reading {}", p.display()))?,
            None => Default::default(),
        };
        let lemma_map = match &self.lemmas {
            Some(p) => Some(read_lemma_map(open(p)?).with_context(|| format!("reading {}", p.display()))?),
            None => None,
        };
        let cfg = PreprocessConfig {
            stopwords,
            lemma_map,
            min_count: self.min_count.unwrap_or(DEFAULT_MIN_COUNT),
            strip_nonlatin: !self.keep_nonlatin,
            strip_mentions: !self.keep_mentions,
            strip_urls: !self.keep_urls,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DmmOpts {
    /// Number of topics [default: 20]
    #[arg(long)]
    pub k: Option<usize>,
    /// Symmetric document-topic prior [default: 0.1]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Symmetric topic-word prior [default: 0.1]
    #[arg(long)]
    pub beta: Option<f64>,
    /// Gibbs sweeps [default: 30]
    #[arg(long = "iters")]
    #[serde(rename = "iters")]
    pub iterations: Option<usize>,
}

impl DmmOpts {
    pub fn resolve(&mut self, file: &Self) {
        layer!(self, file; k, alpha, beta, iterations);
        defaults!(self; k = DEFAULT_K, alpha = 0.1, beta = 0.1, iterations = DEFAULT_ITERATIONS);
    }

    pub fn params(&self, seed: u64) -> DmmParams {
        DmmParams {
            k: self.k.unwrap_or(DEFAULT_K),
            alpha: self.alpha.unwrap_or(0.1),
            beta: self.beta.unwrap_or(0.1),
            iterations: self.iterations.unwrap_or(DEFAULT_ITERATIONS),
            seed,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdaOpts {
    /// Number of topics [default: 20]
    #[arg(long)]
    pub k: Option<usize>,
    /// Symmetric document-topic prior [default: 1/K]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Symmetric topic-word prior [default: 1/K]
    #[arg(long)]
    pub eta: Option<f64>,
    /// Learning-rate decay, in (0.5, 1] [default: 0.75]
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Learning-rate offset [default: 64]
    #[arg(long)]
    pub tau0: Option<f64>,
    /// Documents per minibatch [default: 64]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Passes over the corpus [default: 10]
    #[arg(long)]
    pub passes: Option<usize>,
}

impl LdaOpts {
    pub fn resolve(&mut self, file: &Self) {
        layer!(self, file; k, alpha, eta, kappa, tau0, batch_size, passes);
        defaults!(self; k = DEFAULT_K);
        let inv_k = 1.0 / self.k.unwrap_or(DEFAULT_K).max(1) as f64;
        defaults!(self;
            alpha = inv_k,
            eta = inv_k,
            kappa = DEFAULT_KAPPA,
            tau0 = DEFAULT_TAU0,
            batch_size = DEFAULT_BATCH_SIZE,
            passes = DEFAULT_PASSES,
        );
    }

    pub fn params(&self, seed: u64) -> LdaParams {
        let base = LdaParams::new(self.k.unwrap_or(DEFAULT_K));
        LdaParams {
            alpha: self.alpha.unwrap_or(base.alpha),
            eta: self.eta.unwrap_or(base.eta),
            kappa: self.kappa.unwrap_or(base.kappa),
            tau0: self.tau0.unwrap_or(base.tau0),
            batch_size: self.batch_size.unwrap_or(base.batch_size),
            passes: self.passes.unwrap_or(base.passes),
            seed,
            ..base
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProdLdaOpts {
    /// Number of topics [default: 20]
    #[arg(long)]
    pub k: Option<usize>,
    /// Symmetric Dirichlet concentration approximated by the prior [default: 1/K]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Width of the first encoder layer [default: 100]
    #[arg(long)]
    pub hidden1: Option<usize>,
    /// Width of the second encoder layer [default: 100]
    #[arg(long)]
    pub hidden2: Option<usize>,
    /// Encoder dropout probability [default: 0.2]
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Adam learning rate [default: 0.001]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Documents per minibatch [default: 256]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Epoch limit [default: 100]
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Epochs without validation improvement before stopping [default: 10]
    #[arg(long)]
    pub patience: Option<usize>,
    /// Share of documents held out for validation [default: 0.3]
    #[arg(long)]
    pub val_fraction: Option<f64>,
    /// Weight reconstruction by token counts instead of presence
    #[arg(long)]
    pub count_weighted: bool,
    /// Batch-normalize the decoder logits
    #[arg(long)]
    pub decoder_bn: bool,
}

impl ProdLdaOpts {
    pub fn resolve(&mut self, file: &Self) {
        layer!(self, file; k, alpha, hidden1, hidden2, dropout, lr, batch_size, max_epochs, patience, val_fraction);
        self.count_weighted |= file.count_weighted;
        self.decoder_bn |= file.decoder_bn;
        defaults!(self; k = DEFAULT_K);
        let base = ProdLdaConfig::new(self.k.unwrap_or(DEFAULT_K));
        defaults!(self;
            alpha = base.alpha,
            hidden1 = base.encoder_hidden[0],
            hidden2 = base.encoder_hidden[1],
            dropout = base.dropout_p,
            lr = base.lr,
            batch_size = base.batch_size,
            max_epochs = base.max_epochs,
            patience = base.patience,
            val_fraction = base.val_fraction,
        );
    }

    pub fn config(&self, seed: u64) -> ProdLdaConfig {
        let base = ProdLdaConfig::new(self.k.unwrap_or(DEFAULT_K));
        ProdLdaConfig {
            alpha: self.alpha.unwrap_or(base.alpha),
            encoder_hidden: [
                self.hidden1.unwrap_or(base.encoder_hidden[0]),
                self.hidden2.unwrap_or(base.encoder_hidden[1]),
            ],
            dropout_p: self.dropout.unwrap_or(base.dropout_p),
            lr: self.lr.unwrap_or(base.lr),
            batch_size: self.batch_size.unwrap_or(base.batch_size),
            max_epochs: self.max_epochs.unwrap_or(base.max_epochs),
            patience: self.patience.unwrap_or(base.patience),
            val_fraction: self.val_fraction.unwrap_or(base.val_fraction),
            seed,
            count_weighted: self.count_weighted,
            decoder_batchnorm: self.decoder_bn,
            ..base
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOpts {
    /// Comma-separated coherence metrics: umass, uci, npmi [default: umass,uci,npmi]
    #[arg(long, value_delimiter = ',')]
    pub metrics: Option<Vec<String>>,
    /// Top words per topic [default: 20]
    #[arg(long)]
    pub n: Option<usize>,
    /// Sliding-window length for UCI and NPMI [default: 20]
    #[arg(long)]
    pub omega: Option<usize>,
    /// Smoothing added inside the logarithms [default: 1e-12]
    #[arg(long)]
    pub epsilon: Option<f64>,
}

impl EvalOpts {
    pub fn resolve(&mut self, file: &Self) {
        layer!(self, file; metrics, n, omega, epsilon);
        defaults!(self;
            metrics = vec!["umass".into(), "uci".into(), "npmi".into()],
            n = DEFAULT_TOP_N,
            omega = DEFAULT_WINDOW,
            epsilon = DEFAULT_EPSILON,
        );
    }

    pub fn metrics(&self) -> Result<Vec<Metric>> {
        let names = self.metrics.clone().unwrap_or_default();
        if names.is_empty() {
            return Err(Error::InvalidConfig("no coherence metric selected".into()).into());
        }
        names.iter().map(|m| m.trim().parse::<Metric>().map_err(anyhow::Error::from)).collect()
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopicsOpts {
    /// Relevance weight between frequency (1) and lift (0) [default: 0.3]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Words listed per topic [default: 20]
    #[arg(long)]
    pub n: Option<usize>,
}

impl TopicsOpts {
    pub fn resolve(&mut self, file: &Self) {
        layer!(self, file; lambda, n);
        defaults!(self; lambda = DEFAULT_RELEVANCE_LAMBDA, n = DEFAULT_TOP_N);
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridOpts {
    /// Comma-separated topic counts [default: 5,10,...,50]
    #[arg(long, value_delimiter = ',')]
    pub k_values: Option<Vec<usize>>,
    /// Cross-validation folds [default: 5]
    #[arg(long)]
    pub folds: Option<usize>,
    /// Gibbs sweeps per DMM fit [default: 30]
    #[arg(long = "iters")]
    #[serde(rename = "iters")]
    pub iterations: Option<usize>,
    /// Passes per LDA fit [default: 10]
    #[arg(long)]
    pub passes: Option<usize>,
    /// LDA minibatch size [default: 64]
    #[arg(long)]
    pub batch_size: Option<usize>,
}

impl GridOpts {
    pub fn resolve(&mut self, file: &Self) {
        layer!(self, file; k_values, folds, iterations, passes, batch_size);
        defaults!(self;
            k_values = stm_core::select::default_k_values(),
            folds = DEFAULT_FOLDS,
            iterations = DEFAULT_ITERATIONS,
            passes = DEFAULT_PASSES,
            batch_size = DEFAULT_BATCH_SIZE,
        );
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalOpts {
    /// Positive sentiment word list
    #[arg(long)]
    pub positive: Option<PathBuf>,
    /// Negative sentiment word list
    #[arg(long)]
    pub negative: Option<PathBuf>,
    /// Label written in the `name` column of the regression table [default: dmm]
    #[arg(long)]
    pub name: Option<String>,
}

impl SignalOpts {
    pub fn resolve(&mut self, file: &Self) {
        layer!(self, file; positive, negative, name);
        defaults!(self; name = "dmm".to_string());
    }
}

/// Contents of a `--config` file. Each table is optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preprocess: Option<PreprocessOpts>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dmm: Option<DmmOpts>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lda: Option<LdaOpts>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prodlda: Option<ProdLdaOpts>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalOpts>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topics: Option<TopicsOpts>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gridsearch: Option<GridOpts>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub signal: Option<SignalOpts>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self = toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    /// Writes the resolved options as `config.toml` in `dir`.
    pub fn echo(&self, dir: &Path) -> Result<()> {
        let text = toml::to_string(self).context("serializing effective config")?;
        fs::write(dir.join("config.toml"), text).with_context(|| format!("writing {}", dir.display()))?;
        Ok(())
    }
}

/// A malformed configuration file.
#[derive(Debug, thiserror::Error)]
#[error("invalid config: {0}")]
pub struct ConfigError(pub String);

pub fn open(path: &Path) -> Result<std::io::BufReader<fs::File>> {
    let f = fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(std::io::BufReader::new(f))
}
