//! Daily topic and sentiment features regressed on next-day returns.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use chrono::{DateTime, Days, NaiveDate};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::corpus::{encode, tokenize, PreprocessConfig, RawRecord, Vocabulary};
use crate::dmm::DmmModel;
use crate::special::beta_reg;
use crate::{Error, Result};

pub fn one_hot(label: usize, k: usize) -> Result<Vec<f64>> {
    if label >= k {
        return Err(Error::IndexOutOfRange { index: label, size: k });
    }
    let mut v = vec![0.0; k];
    v[label] = 1.0;
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SentimentLexicon {
    positive: HashSet<String>,
    negative: HashSet<String>,
}

impl SentimentLexicon {
    pub fn new(positive: HashSet<String>, negative: HashSet<String>) -> Result<Self> {
        if let Some(w) = positive.intersection(&negative).min() {
            return Err(Error::InvalidConfig(format!("'{w}' is in both sentiment lexicons")));
        }
        Ok(Self { positive, negative })
    }
}

/// Shares of tokens found in the positive and negative lexicons, counting
/// repeats.
pub fn sentiment(tokens: &[String], lex: &SentimentLexicon) -> Result<(f64, f64)> {
    if tokens.is_empty() {
        return Err(Error::EmptyDocument);
    }
    let n = tokens.len() as f64;
    let pos = tokens.iter().filter(|t| lex.positive.contains(*t)).count() as f64;
    let neg = tokens.iter().filter(|t| lex.negative.contains(*t)).count() as f64;
    Ok((pos / n, neg / n))
}

/// One scored tweet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TweetFeatures {
    /// Unix seconds.
    pub timestamp: i64,
    pub topic: usize,
    pub positive: f64,
    pub negative: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DailyFeatures {
    pub date: NaiveDate,
    /// Mean topic one-hot.
    pub topics: Vec<f64>,
    pub positive: f64,
    pub negative: f64,
    pub tweet_count: usize,
}

fn utc_date(ts: i64) -> Result<NaiveDate> {
    DateTime::from_timestamp(ts, 0)
        .map(|d| d.date_naive())
        .ok_or_else(|| Error::Domain(format!("timestamp {ts} out of range")))
}

/// Averages tweets per UTC calendar day, in date order. Days without tweets
/// do not appear.
pub fn daily_aggregate(records: &[TweetFeatures], k: usize) -> Result<Vec<DailyFeatures>> {
    let mut days: BTreeMap<NaiveDate, DailyFeatures> = BTreeMap::new();
    for r in records {
        let hot = one_hot(r.topic, k)?;
        let date = utc_date(r.timestamp)?;
        let day = days.entry(date).or_insert_with(|| DailyFeatures {
            date,
            topics: vec![0.0; k],
            positive: 0.0,
            negative: 0.0,
            tweet_count: 0,
        });
        for (t, h) in day.topics.iter_mut().zip(hot) {
            *t += h;
        }
        day.positive += r.positive;
        day.negative += r.negative;
        day.tweet_count += 1;
    }
    Ok(days
        .into_values()
        .map(|mut d| {
            let n = d.tweet_count as f64;
            d.topics.iter_mut().for_each(|t| *t /= n);
            d.positive /= n;
            d.negative /= n;
            d
        })
        .collect())
}

/// Tokenizes each record, assigns its topic with `model` and scores its
/// sentiment. Records without a timestamp or without any in-vocabulary token
/// are skipped; the second value counts them.
pub fn score_tweets(
    records: &[RawRecord],
    model: &DmmModel,
    vocab: &Vocabulary,
    cfg: &PreprocessConfig,
    lex: &SentimentLexicon,
) -> (Vec<TweetFeatures>, usize) {
    let mut out = Vec::with_capacity(records.len());
    let mut skipped = 0;
    for r in records {
        let tokens = tokenize(&r.text, cfg);
        let (Some(ts), Ok(doc)) = (r.timestamp_utc, encode(&tokens, vocab, true)) else {
            skipped += 1;
            continue;
        };
        let (positive, negative) = sentiment(&tokens, lex).expect("encoded document has tokens");
        out.push(TweetFeatures { timestamp: ts, topic: model.assign(&doc), positive, negative });
    }
    (out, skipped)
}

/// Reads a `date,close` CSV with a header line. Dates are `YYYY-MM-DD`.
pub fn read_prices<R: BufRead>(r: R) -> Result<BTreeMap<NaiveDate, f64>> {
    let mut out = BTreeMap::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if i == 0 || line.is_empty() {
            continue;
        }
        let bad = |what: &str| Error::Parse(format!("prices line {}: {what}", i + 1));
        let (date, close) = line.split_once(',').ok_or_else(|| bad("expected date,close"))?;
        let date = NaiveDate::parse_from_str(date.trim(), "%Y-%m-%d").map_err(|e| bad(&e.to_string()))?;
        let close: f64 = close.trim().parse().map_err(|_| bad("close is not a number"))?;
        if !(close > 0.0 && close.is_finite()) {
            return Err(bad("close must be positive"));
        }
        if out.insert(date, close).is_some() {
            return Err(bad("duplicate date"));
        }
    }
    Ok(out)
}

/// Regression design: one row per usable day.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub dates: Vec<NaiveDate>,
    /// `p, n, t0 … t{K−1}`.
    pub names: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

/// Pairs each day's features with the simple return from its close to the
/// next calendar day's close. Days missing either price are dropped.
pub fn align_next_day_returns(features: &[DailyFeatures], prices: &BTreeMap<NaiveDate, f64>) -> Result<Design> {
    let k = features.first().map_or(0, |f| f.topics.len());
    let mut names = vec!["p".to_string(), "n".to_string()];
    names.extend((0..k).map(|i| format!("t{i}")));
    let mut design = Design { dates: Vec::new(), names, x: Vec::new(), y: Vec::new() };
    for f in features {
        let Some(next) = f.date.checked_add_days(Days::new(1)) else { continue };
        let (Some(&c0), Some(&c1)) = (prices.get(&f.date), prices.get(&next)) else { continue };
        let mut row = vec![f.positive, f.negative];
        row.extend(&f.topics);
        design.dates.push(f.date);
        design.x.push(row);
        design.y.push(c1 / c0 - 1.0);
    }
    let needed = k + 3;
    if design.y.len() < needed {
        return Err(Error::InsufficientOverlap { rows: design.y.len(), needed });
    }
    Ok(design)
}

/// Student-t CDF through the regularized incomplete beta function.
pub fn t_cdf(t: f64, df: f64) -> Result<f64> {
    if !(df > 0.0 && df.is_finite()) || t.is_nan() {
        return Err(Error::Domain(format!("t_cdf needs df > 0 and a number, got t={t}, df={df}")));
    }
    let tail = 0.5 * beta_reg(df / 2.0, 0.5, df / (df + t * t));
    Ok(if t >= 0.0 { 1.0 - tail } else { tail })
}

/// P(|T| ≥ |t|).
pub fn two_sided_p(t: f64, df: f64) -> Result<f64> {
    t_cdf(t, df)?;
    Ok(beta_reg(df / 2.0, 0.5, df / (df + t * t)))
}

pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub coef: f64,
    pub stderr: f64,
    /// None when the residual variance is zero.
    pub tstat: Option<f64>,
    pub pvalue: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub coefficients: Vec<Coefficient>,
    pub rss: f64,
    /// 1 − RSS/Σy²; the design has no intercept.
    pub r_squared: f64,
    pub df: usize,
    /// The fit is exact, so standard errors are zero and tests undefined.
    pub degenerate: bool,
}

impl RegressionResult {
    pub fn write_csv<W: Write>(&self, mut w: W, name: &str, header: bool) -> Result<()> {
        if header {
            writeln!(w, "name,variable,coef,stderr,tstat,pvalue,stars")?;
        }
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for c in &self.coefficients {
            writeln!(
                w,
                "{name},{},{},{},{},{},{}",
                c.name,
                c.coef,
                c.stderr,
                opt(c.tstat),
                opt(c.pvalue),
                c.pvalue.map_or("", stars)
            )?;
        }
        Ok(())
    }
}

/// Relative size below which a diagonal entry of R counts as zero.
const RANK_TOL: f64 = 1e-10;

/// Least squares through a QR factorization of X.
pub fn ols_fit(x: &[Vec<f64>], y: &[f64], names: &[String]) -> Result<RegressionResult> {
    let n = y.len();
    let p = names.len();
    if x.len() != n || x.iter().any(|r| r.len() != p) {
        return Err(Error::ShapeMismatch { expected: format!("{n} rows of {p}"), got: "design matrix".into() });
    }
    if n <= p {
        return Err(Error::InsufficientOverlap { rows: n, needed: p + 1 });
    }
    let xm = DMatrix::from_fn(n, p, |i, j| x[i][j]);
    let yv = DVector::from_column_slice(y);
    let qr = xm.clone().qr();
    let r = qr.r();
    let scale = (0..p).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    if let Some(j) = (0..p).find(|&j| r[(j, j)].abs() <= RANK_TOL * scale || scale == 0.0) {
        return Err(Error::RankDeficient { column: j });
    }
    let qty = qr.q().transpose() * &yv;
    let beta = r.solve_upper_triangular(&qty).expect("nonzero diagonal");
    let r_inv = r.solve_upper_triangular(&DMatrix::identity(p, p)).expect("nonzero diagonal");
    let resid = &yv - &xm * &beta;
    let rss = resid.norm_squared();
    let df = n - p;
    let tss = yv.norm_squared();
    let degenerate = rss <= (1e-12 * tss.sqrt()).powi(2);
    let sigma2 = if degenerate { 0.0 } else { rss / df as f64 };
    let mut coefficients = Vec::with_capacity(p);
    for j in 0..p {
        let var = r_inv.row(j).norm_squared() * sigma2;
        let stderr = var.sqrt();
        let (tstat, pvalue) = if degenerate {
            (None, None)
        } else {
            let t = beta[j] / stderr;
            (Some(t), Some(two_sided_p(t, df as f64)?))
        };
        coefficients.push(Coefficient { name: names[j].clone(), coef: beta[j], stderr, tstat, pvalue });
    }
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 0.0 };
    Ok(RegressionResult { coefficients, rss, r_squared, df, degenerate })
}

/// Fits the daily design; a convenience for the full pipeline.
pub fn regress(design: &Design) -> Result<RegressionResult> {
    ols_fit(&design.x, &design.y, &design.names)
}

/// Per-day feature table as CSV, for inspection.
pub fn write_daily_csv<W: Write>(mut w: W, days: &[DailyFeatures]) -> Result<()> {
    let k = days.first().map_or(0, |d| d.topics.len());
    write!(w, "date,tweets,p,n")?;
    for i in 0..k {
        write!(w, ",t{i}")?;
    }
    writeln!(w)?;
    for d in days {
        write!(w, "{},{},{},{}", d.date, d.tweet_count, d.positive, d.negative)?;
        for t in &d.topics {
            write!(w, ",{t}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Lexicon from two word lists.
pub fn lexicon_from_lists(positive: Vec<String>, negative: Vec<String>) -> Result<SentimentLexicon> {
    SentimentLexicon::new(positive.into_iter().collect(), negative.into_iter().collect())
}
