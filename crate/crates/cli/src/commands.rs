use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use log::info;

use stm_core::corpus::{ingest, read_raw_records, read_word_list, Document, Vocabulary};
use stm_core::eval::{coherence, heldout_loglik, relevance, restrict_top_words, top_words};
use stm_core::model::ModelFile;
use stm_core::select::{dmm_default_grid, grid_search, lda_default_grid, Cell};
use stm_core::signal::{
    align_next_day_returns, daily_aggregate, lexicon_from_lists, regress, score_tweets, write_daily_csv,
};
use stm_core::{dmm, lda, prodlda, signal, Corpus, Error, TopicModel};

use crate::config::{open, ConfigError, FileConfig, DEFAULT_SEED};
use crate::{Cli, Command, GridKind, TrainIo, TrainModel};

pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                e if e.is_config_error() => 2,
                Error::InvalidProbability(_) => 2,
                e if e.is_data_error() => 3,
                Error::ShapeMismatch { .. } | Error::IndexOutOfRange { .. } => 3,
                _ => 4,
            };
        }
        if cause.is::<ConfigError>() {
            return 2;
        }
        if cause.is::<std::io::Error>() {
            return 3;
        }
    }
    3
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create directory {}", dir.display()))
}

fn load_corpus(dir: &Path) -> Result<Corpus> {
    let vocab = Vocabulary::read_tsv(open(&dir.join("vocab.tsv"))?).context("reading vocab.tsv")?;
    let corpus =
        Corpus::read_jsonl(open(&dir.join("corpus.jsonl"))?, Arc::new(vocab)).context("reading corpus.jsonl")?;
    if corpus.is_empty() {
        return Err(Error::EmptyDocument).context(format!("{} holds no documents", dir.display()));
    }
    Ok(corpus)
}

fn load_model(path: &Path) -> Result<ModelFile> {
    ModelFile::read(open(path)?).with_context(|| format!("reading model {}", path.display()))
}

pub fn run(cli: Cli) -> Result<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let seed = cli.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
    let mut echo = FileConfig { seed: Some(seed), ..Default::default() };
    match cli.command {
        Command::Ingest { input, out, mut pre } => {
            pre.resolve(&file.preprocess.clone().unwrap_or_default());
            let cfg = pre.build()?;
            let records = read_raw_records(open(&input)?).with_context(|| format!("reading {}", input.display()))?;
            if records.is_empty() {
                return Err(Error::EmptyDocument).context(format!("{} holds no records", input.display()));
            }
            let ingested = ingest(&records, &cfg, pre.dedupe)?;
            out_dir(&out)?;
            let c = &ingested.corpus;
            let mut w = create(&out, "vocab.tsv")?;
            c.vocab().write_tsv(&mut w)?;
            w.flush()?;
            let mut w = create(&out, "corpus.jsonl")?;
            c.write_jsonl(&mut w)?;
            w.flush()?;
            echo.preprocess = Some(pre);
            echo.echo(&out)?;
            println!("documents {}, vocabulary {}, dropped {}", c.num_docs(), c.vocab_size(), ingested.dropped);
        }
        Command::Train { model } => train(model, &file, seed, &mut echo)?,
        Command::Eval { model, corpus, out, mut opts } => {
            opts.resolve(&file.eval.clone().unwrap_or_default());
            let metrics = opts.metrics()?;
            let mf = load_model(&model)?;
            let eval_corpus = load_corpus(&corpus)?;
            out_dir(&out)?;
            evaluate(&mf, &eval_corpus, &opts, &metrics, seed, &out)?;
            echo.eval = Some(opts);
            echo.echo(&out)?;
        }
        Command::Topics { model, out, mut opts } => {
            opts.resolve(&file.topics.clone().unwrap_or_default());
            let mf = load_model(&model)?;
            let phi = mf.model.topic_word_matrix();
            let scores = relevance(&phi, &mf.word_probs(), opts.lambda.unwrap_or_default())?;
            let n = opts.n.unwrap_or_default();
            let mut text = String::new();
            for (i, s) in scores.iter().enumerate() {
                let words: Vec<&str> = top_words(s, n).into_iter().map(|w| mf.vocab[w].as_str()).collect();
                text.push_str(&format!("{i}\t{}\n", words.join(",")));
            }
            match out {
                Some(p) => fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{text}"),
            }
        }
        Command::Gridsearch { kind, corpus, out, mut opts } => {
            opts.resolve(&file.gridsearch.clone().unwrap_or_default());
            let c = load_corpus(&corpus)?;
            out_dir(&out)?;
            gridsearch(kind, &c, &opts, seed, &out)?;
            echo.gridsearch = Some(opts);
            echo.echo(&out)?;
        }
        Command::Signal { model, tweets, prices, out, mut opts, mut pre } => {
            opts.resolve(&file.signal.clone().unwrap_or_default());
            pre.resolve(&file.preprocess.clone().unwrap_or_default());
            let mf = load_model(&model)?;
            let TopicModel::Dmm(dmm_model) = &mf.model else {
                return Err(Error::InvalidConfig(format!("signal needs a DMM model, got {}", mf.model.kind())).into());
            };
            let (Some(pos), Some(neg)) = (&opts.positive, &opts.negative) else {
                return Err(Error::InvalidConfig("--positive and --negative lexicons are required".into()).into());
            };
            let lex = lexicon_from_lists(
                read_word_list(open(pos)?)?.into_iter().collect(),
                read_word_list(open(neg)?)?.into_iter().collect(),
            )?;
            let prices =
                signal::read_prices(open(&prices)?).with_context(|| format!("reading {}", prices.display()))?;
            let records = read_raw_records(open(&tweets)?).with_context(|| format!("reading {}", tweets.display()))?;
            let vocab = mf.vocabulary()?;
            let (scored, skipped) = score_tweets(&records, dmm_model, &vocab, &pre.build()?, &lex);
            info!("{skipped} records without timestamp or known words skipped");
            let days = daily_aggregate(&scored, dmm_model.k())?;
            let design = align_next_day_returns(&days, &prices)?;
            let fit = regress(&design)?;
            out_dir(&out)?;
            let mut w = create(&out, "daily.csv")?;
            write_daily_csv(&mut w, &days)?;
            w.flush()?;
            let mut w = create(&out, "regression.csv")?;
            fit.write_csv(&mut w, opts.name.as_deref().unwrap_or("dmm"), true)?;
            w.flush()?;
            println!("days {}, rows {}, R^2 {:.4}", days.len(), design.y.len(), fit.r_squared);
            for c in &fit.coefficients {
                let p = c.pvalue.map_or("-".to_string(), |p| format!("{p:.4}"));
                println!("{:>4} {:>12.6} {:>10} {}", c.name, c.coef, p, c.pvalue.map_or("", signal::stars));
            }
            echo.signal = Some(opts);
            echo.preprocess = Some(pre);
            echo.echo(&out)?;
        }
    }
    Ok(())
}

fn train(model: TrainModel, file: &FileConfig, seed: u64, echo: &mut FileConfig) -> Result<()> {
    let (io, trained, log_header, log_rows, labels): (TrainIo, TopicModel, &str, Vec<String>, Option<Vec<usize>>);
    match model {
        TrainModel::Dmm { io: i, mut opts } => {
            opts.resolve(&file.dmm.clone().unwrap_or_default());
            let params = opts.params(seed);
            params.validate()?;
            let c = load_corpus(&i.corpus)?;
            let fit = dmm::train_chain(&c, &params)?;
            log_header = "sweep,changed";
            log_rows = fit.changes.iter().enumerate().map(|(s, n)| format!("{},{n}", s + 1)).collect();
            labels = Some(fit.state.labels().to_vec());
            trained = TopicModel::Dmm(fit.model);
            write_model(&i.out, trained.clone(), &c)?;
            echo.dmm = Some(opts);
            io = i;
        }
        TrainModel::Lda { io: i, mut opts } => {
            opts.resolve(&file.lda.clone().unwrap_or_default());
            let params = opts.params(seed);
            params.validate()?;
            let c = load_corpus(&i.corpus)?;
            let fit = lda::train_logged(&c, &params)?;
            log_header = "t,rho,batch_elbo";
            log_rows = fit.log.iter().map(|r| format!("{},{},{}", r.t, r.rho, r.batch_elbo)).collect();
            labels = None;
            trained = TopicModel::Lda(fit.model);
            write_model(&i.out, trained.clone(), &c)?;
            echo.lda = Some(opts);
            io = i;
        }
        TrainModel::Prodlda { io: i, mut opts } => {
            opts.resolve(&file.prodlda.clone().unwrap_or_default());
            let config = opts.config(seed);
            config.validate()?;
            let c = load_corpus(&i.corpus)?;
            let fit = prodlda::train_logged(&c, &config)?;
            log_header = "epoch,train_loss,val_loss";
            log_rows = fit.log.iter().map(|r| format!("{},{},{}", r.epoch, r.train_loss, r.val_loss)).collect();
            labels = None;
            info!("best validation epoch {}", fit.best_epoch);
            trained = TopicModel::ProdLda(fit.model);
            write_model(&i.out, trained.clone(), &c)?;
            echo.prodlda = Some(opts);
            io = i;
        }
    }
    let mut w = create(&io.out, "train_log.csv")?;
    writeln!(w, "{log_header}")?;
    for r in &log_rows {
        writeln!(w, "{r}")?;
    }
    w.flush()?;
    if let Some(labels) = labels {
        let mut w = create(&io.out, "labels.tsv")?;
        for (d, z) in labels.iter().enumerate() {
            writeln!(w, "{d}\t{z}")?;
        }
        w.flush()?;
    }
    echo.echo(&io.out)?;
    println!("trained {} with K={} -> {}", trained.kind(), trained.k(), io.out.join("model.json").display());
    Ok(())
}

fn write_model(out: &Path, model: TopicModel, corpus: &Corpus) -> Result<()> {
    out_dir(out)?;
    let mut w = create(out, "topic_word.csv")?;
    model.topic_word_matrix().write_csv(&mut w, corpus.vocab())?;
    w.flush()?;
    let mut w = create(out, "model.json")?;
    ModelFile::new(model, corpus).write(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Re-encodes `docs` from `from` ids into `to` ids, dropping unknown words and
/// documents left empty.
fn translate(docs: &[Document], from: &Vocabulary, to: &Vocabulary) -> Result<Vec<Document>> {
    let map: Vec<Option<usize>> = from.tokens().iter().map(|t| to.id(t)).collect();
    let shared = map.iter().flatten().count();
    if shared == 0 {
        return Err(Error::VocabularyMismatch { model: to.len(), data: from.len(), shared }.into());
    }
    if shared < from.len() || from.len() != to.len() {
        info!("{shared} words shared between model ({}) and data ({})", to.len(), from.len());
    }
    Ok(docs
        .iter()
        .filter_map(|d| {
            let ids: Vec<usize> = d.tokens().iter().filter_map(|&w| map[w]).collect();
            Document::from_ids(ids, false).ok().map(|doc| doc.with_meta(d.meta.clone()))
        })
        .collect())
}

fn evaluate(
    mf: &ModelFile,
    corpus: &Corpus,
    opts: &crate::config::EvalOpts,
    metrics: &[stm_core::eval::Metric],
    seed: u64,
    out: &Path,
) -> Result<()> {
    let model_vocab = mf.vocabulary()?;
    let phi = mf.model.topic_word_matrix();
    let rankings: Vec<Vec<usize>> = phi.rows().map(|r| top_words(r, r.len())).collect();
    let n = opts.n.unwrap_or_default();
    let (tops, _) = restrict_top_words(&rankings, &model_vocab, corpus.vocab(), corpus.docs(), n);
    let omega = opts.omega.unwrap_or_default();
    let eps = opts.epsilon.unwrap_or_default();
    for &m in metrics {
        let report = coherence(m, &tops, corpus.docs().iter().map(|d| d.tokens()), omega, eps)?;
        let mut w = create(out, &format!("coherence_{m}.csv"))?;
        report.write_csv(&mut w)?;
        w.flush()?;
        println!("{m}: mean {:.6}", report.aggregate);
    }
    let held = translate(corpus.docs(), corpus.vocab(), &model_vocab)?;
    let h = heldout_loglik(&mf.model, &held, seed)?;
    let ppl = h.perplexity()?;
    let mut w = create(out, "perplexity.csv")?;
    writeln!(w, "model,K,docs,tokens,loglik,perplexity")?;
    writeln!(w, "{},{},{},{},{},{ppl}", mf.model.kind(), mf.model.k(), held.len(), h.tokens, h.loglik)?;
    w.flush()?;
    println!("perplexity {ppl:.6} over {} tokens", h.tokens);
    Ok(())
}

fn gridsearch(kind: GridKind, corpus: &Corpus, opts: &crate::config::GridOpts, seed: u64, out: &Path) -> Result<()> {
    let folds = opts.folds.unwrap_or_default();
    let k_values = opts.k_values.clone().unwrap_or_default();
    if k_values.is_empty() || k_values.contains(&0) {
        bail!(Error::InvalidConfig("K list must be nonempty and positive".into()));
    }
    let grid = match kind {
        GridKind::Dmm => dmm_default_grid(),
        GridKind::Lda => lda_default_grid(),
    };
    let score = |m: &TopicModel, test: &[Document]| heldout_loglik(m, test, seed)?.perplexity();
    let mut w = create(out, "grid.csv")?;
    for (i, &k) in k_values.iter().enumerate() {
        let result = match kind {
            GridKind::Dmm => {
                let iterations = opts.iterations.unwrap_or_default();
                let trainer = |train: &Corpus, cell: &Cell| {
                    let p = dmm::DmmParams {
                        k,
                        alpha: cell.get("alpha").expect("dmm grid axis"),
                        beta: cell.get("beta").expect("dmm grid axis"),
                        iterations,
                        seed,
                    };
                    dmm::train(train, &p).map(TopicModel::Dmm)
                };
                grid_search(trainer, score, corpus, &grid, folds, seed)?
            }
            GridKind::Lda => {
                let trainer = |train: &Corpus, cell: &Cell| {
                    let p = lda::LdaParams {
                        kappa: cell.get("kappa").expect("lda grid axis"),
                        tau0: cell.get("tau0").expect("lda grid axis"),
                        passes: opts.passes.unwrap_or_default(),
                        batch_size: opts.batch_size.unwrap_or_default(),
                        seed,
                        ..lda::LdaParams::new(k)
                    };
                    lda::train(train, &p).map(TopicModel::Lda)
                };
                grid_search(trainer, score, corpus, &grid, folds, seed)?
            }
        };
        result.write_csv(&mut w, k, i == 0)?;
        let best = result.best_cell();
        let params: Vec<String> =
            best.cell.names.iter().zip(&best.cell.values).map(|(n, v)| format!("{n}={v}")).collect();
        println!("K={k} best {} perplexity {:.4} (std {:.4})", params.join(" "), best.mean, best.std);
    }
    w.flush()?;
    Ok(())
}
