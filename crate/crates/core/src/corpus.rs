//! Text preprocessing, vocabulary construction and bag-of-words encoding.
//!
//! Pipeline per raw text: lowercase, split on Unicode whitespace, drop URLs and
//! `@mentions`, remove non-Latin characters, trim leading/trailing
//! punctuation, remove stopwords, then apply the lemma map. Stopwords are
//! matched on surface forms, before lemmatization.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default corpus frequency below which a token is discarded.
pub const DEFAULT_MIN_COUNT: usize = 100;

#[derive(Debug, Clone)]
pub struct PreprocessConfig {
    pub stopwords: HashSet<String>,
    pub lemma_map: Option<HashMap<String, String>>,
    pub min_count: usize,
    pub strip_nonlatin: bool,
    pub strip_mentions: bool,
    pub strip_urls: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            stopwords: HashSet::new(),
            lemma_map: None,
            min_count: DEFAULT_MIN_COUNT,
            strip_nonlatin: true,
            strip_mentions: true,
            strip_urls: true,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_count < 1 {
            return Err(Error::InvalidConfig("min_count must be at least 1".into()));
        }
        if let Some(map) = &self.lemma_map {
            if let Some((k, _)) = map.iter().find(|(_, v)| v.is_empty()) {
                return Err(Error::InvalidConfig(format!("empty lemma for '{k}'")));
            }
        }
        Ok(())
    }
}

fn is_latin(c: char) -> bool {
    c.is_ascii() || matches!(c, '\u{00C0}'..='\u{024F}' | '\u{1E00}'..='\u{1EFF}') && c != '×' && c != '÷'
}

fn is_url(piece: &str) -> bool {
    piece.starts_with("http://") || piece.starts_with("https://") || piece.starts_with("www.")
}

/// Turns one raw text into its token list. Never fails; the result may be empty.
pub fn tokenize(raw: &str, cfg: &PreprocessConfig) -> Vec<String> {
    let mut out = Vec::new();
    for piece in raw.split_whitespace() {
        let lower = piece.to_lowercase();
        if cfg.strip_urls && is_url(&lower) {
            continue;
        }
        if cfg.strip_mentions && lower.starts_with('@') {
            continue;
        }
        let cleaned: String = if cfg.strip_nonlatin { lower.chars().filter(|&c| is_latin(c)).collect() } else { lower };
        let token = cleaned.trim_matches(|c: char| !c.is_alphanumeric());
        if token.is_empty() || cfg.stopwords.contains(token) {
            continue;
        }
        let token = cfg.lemma_map.as_ref().and_then(|m| m.get(token)).map(String::as_str).unwrap_or(token);
        out.push(token.to_string());
    }
    out
}

/// Frozen token ↔ id mapping with dense ids in `[0, len)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    id_of: HashMap<String, usize>,
    token_of: Vec<String>,
}

impl Vocabulary {
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let mut id_of = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if id_of.insert(t.clone(), i).is_some() {
                return Err(Error::Parse(format!("duplicate vocabulary token '{t}'")));
            }
        }
        Ok(Self { id_of, token_of: tokens })
    }

    pub fn len(&self) -> usize {
        self.token_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_of.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.id_of.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.token_of.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.token_of
    }

    /// Writes `token<TAB>id` lines.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        for (i, t) in self.token_of.iter().enumerate() {
            writeln!(w, "{t}\t{i}")?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(r: R) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (tok, id) = line
                .rsplit_once('\t')
                .ok_or_else(|| Error::Parse(format!("vocabulary line {}: missing tab", lineno + 1)))?;
            let id: usize =
                id.parse().map_err(|_| Error::Parse(format!("vocabulary line {}: bad id '{id}'", lineno + 1)))?;
            pairs.push((id, tok.to_string()));
        }
        pairs.sort_by_key(|(id, _)| *id);
        if pairs.iter().enumerate().any(|(i, (id, _))| i != *id) {
            return Err(Error::Parse("vocabulary ids are not dense".into()));
        }
        Self::from_tokens(pairs.into_iter().map(|(_, t)| t).collect())
    }
}

/// Keeps the tokens whose corpus frequency reaches `min_count`, numbered in
/// order of first appearance.
pub fn build_vocabulary(token_docs: &[Vec<String>], min_count: usize) -> Result<Vocabulary> {
    if min_count < 1 {
        return Err(Error::InvalidConfig("min_count must be at least 1".into()));
    }
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for doc in token_docs {
        for t in doc {
            *freq.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut seen = HashSet::new();
    let mut tokens = Vec::new();
    for doc in token_docs {
        for t in doc {
            if freq[t.as_str()] >= min_count && seen.insert(t.as_str()) {
                tokens.push(t.clone());
            }
        }
    }
    if tokens.is_empty() {
        return Err(Error::EmptyVocabulary { min_count });
    }
    Vocabulary::from_tokens(tokens)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp_utc: Option<i64>,
}

/// A bag of words over a [`Vocabulary`]. The token sequence is kept as
/// encoded (needed for sliding windows); `counts` is sorted by word id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    tokens: Vec<usize>,
    counts: Vec<(usize, u32)>,
    pub meta: DocMeta,
}

impl Document {
    /// Builds a document from word ids. With `dedupe`, only the first
    /// occurrence of each id is kept.
    pub fn from_ids(ids: Vec<usize>, dedupe: bool) -> Result<Self> {
        let tokens = if dedupe {
            let mut seen = HashSet::new();
            ids.into_iter().filter(|id| seen.insert(*id)).collect()
        } else {
            ids
        };
        if tokens.is_empty() {
            return Err(Error::EmptyDocument);
        }
        let mut sorted = tokens.clone();
        sorted.sort_unstable();
        let mut counts: Vec<(usize, u32)> = Vec::new();
        for id in sorted {
            match counts.last_mut() {
                Some((last, c)) if *last == id => *c += 1,
                _ => counts.push((id, 1)),
            }
        }
        Ok(Self { tokens, counts, meta: DocMeta::default() })
    }

    pub fn with_meta(mut self, meta: DocMeta) -> Self {
        self.meta = meta;
        self
    }

    /// Total token count.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[usize] {
        &self.tokens
    }

    /// `(word id, multiplicity)` pairs sorted by id.
    pub fn counts(&self) -> &[(usize, u32)] {
        &self.counts
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn max_id(&self) -> usize {
        self.counts.last().map(|(id, _)| *id).unwrap_or(0)
    }
}

/// Encodes tokens against `vocab`, dropping out-of-vocabulary tokens.
pub fn encode(tokens: &[String], vocab: &Vocabulary, dedupe: bool) -> Result<Document> {
    let ids = tokens.iter().filter_map(|t| vocab.id(t)).collect();
    Document::from_ids(ids, dedupe)
}

/// Documents encoded against one shared vocabulary. Never contains an empty
/// document.
#[derive(Debug, Clone)]
pub struct Corpus {
    docs: Vec<Document>,
    vocab: Arc<Vocabulary>,
}

impl Corpus {
    pub fn new(docs: Vec<Document>, vocab: Arc<Vocabulary>) -> Result<Self> {
        let v = vocab.len();
        for d in &docs {
            if d.is_empty() {
                return Err(Error::EmptyDocument);
            }
            if d.max_id() >= v {
                return Err(Error::VocabularyMismatch { model: v, data: d.max_id() + 1, shared: v });
            }
        }
        Ok(Self { docs, vocab })
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn shared_vocab(&self) -> Arc<Vocabulary> {
        Arc::clone(&self.vocab)
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn total_tokens(&self) -> usize {
        self.docs.iter().map(Document::len).sum()
    }

    /// A corpus over the same vocabulary holding the documents at `indices`.
    pub fn subset(&self, indices: &[usize]) -> Corpus {
        Corpus { docs: indices.iter().map(|&i| self.docs[i].clone()).collect(), vocab: Arc::clone(&self.vocab) }
    }

    /// Corpus frequency of every word id.
    pub fn word_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.vocab.len()];
        for d in &self.docs {
            for &(w, c) in d.counts() {
                counts[w] += c as u64;
            }
        }
        counts
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for d in &self.docs {
            let rec = EncodedRecord { ids: d.tokens.clone(), meta: d.meta.clone() };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Reads documents written by [`Corpus::write_jsonl`]. Documents are
    /// stored as token sequences, so no dedupe happens here.
    pub fn read_jsonl<R: BufRead>(r: R, vocab: Arc<Vocabulary>) -> Result<Self> {
        let mut docs = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: EncodedRecord = serde_json::from_str(&line)?;
            docs.push(Document::from_ids(rec.ids, false)?.with_meta(rec.meta));
        }
        Corpus::new(docs, vocab)
    }
}

#[derive(Serialize, Deserialize)]
struct EncodedRecord {
    ids: Vec<usize>,
    #[serde(flatten)]
    meta: DocMeta,
}

/// One input line: `{"text": ..., "author": ..., "timestamp_utc": ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub text: String,
    #[serde(default)]
    pub author: Option<String>,
    #[serde(default)]
    pub timestamp_utc: Option<i64>,
}

impl RawRecord {
    pub fn meta(&self) -> DocMeta {
        DocMeta { author: self.author.clone(), timestamp_utc: self.timestamp_utc }
    }
}

pub fn read_raw_records<R: BufRead>(r: R) -> Result<Vec<RawRecord>> {
    let mut out = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Parse(format!("input line {}: {e}", lineno + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

/// One entry per line; blank lines and surrounding whitespace ignored.
pub fn read_word_list<R: BufRead>(r: R) -> Result<HashSet<String>> {
    let mut out = HashSet::new();
    for line in r.lines() {
        let line = line?;
        let w = line.trim();
        if !w.is_empty() {
            out.insert(w.to_lowercase());
        }
    }
    Ok(out)
}

/// `surface<TAB>lemma` lines.
pub fn read_lemma_map<R: BufRead>(r: R) -> Result<HashMap<String, String>> {
    let mut out = HashMap::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (surface, lemma) =
            line.split_once('\t').ok_or_else(|| Error::Parse(format!("lemma line {}: missing tab", lineno + 1)))?;
        let lemma = lemma.trim();
        if lemma.is_empty() {
            return Err(Error::Parse(format!("lemma line {}: empty lemma", lineno + 1)));
        }
        out.insert(surface.trim().to_lowercase(), lemma.to_string());
    }
    Ok(out)
}

#[derive(Debug)]
pub struct Ingested {
    pub corpus: Corpus,
    /// Records whose encoding came out empty.
    pub dropped: usize,
}

/// Tokenizes every record, builds the vocabulary and encodes. Records that
/// end up empty are dropped and counted.
pub fn ingest(records: &[RawRecord], cfg: &PreprocessConfig, dedupe: bool) -> Result<Ingested> {
    cfg.validate()?;
    let token_docs: Vec<Vec<String>> = records.iter().map(|r| tokenize(&r.text, cfg)).collect();
    let vocab = Arc::new(build_vocabulary(&token_docs, cfg.min_count)?);
    let mut docs = Vec::with_capacity(records.len());
    let mut dropped = 0;
    for (rec, toks) in records.iter().zip(&token_docs) {
        match encode(toks, &vocab, dedupe) {
            Ok(doc) => docs.push(doc.with_meta(rec.meta())),
            Err(Error::EmptyDocument) => dropped += 1,
            Err(e) => return Err(e),
        }
    }
    if dropped > 0 {
        log::info!("dropped {dropped} documents that were empty after encoding");
    }
    Ok(Ingested { corpus: Corpus::new(docs, vocab)?, dropped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tokenize_strips_urls_mentions_punctuation_and_stopwords() {
        let cfg =
            PreprocessConfig { stopwords: ["to", "the"].iter().map(|s| s.to_string()).collect(), ..Default::default() };
        assert_eq!(tokenize("Bitcoin to the MOON! @elon https://x.co", &cfg), toks(&["bitcoin", "moon"]));
    }

    #[test]
    fn tokenize_empty() {
        assert!(tokenize("", &PreprocessConfig::default()).is_empty());
    }

    #[test]
    fn tokenize_applies_lemma_map() {
        let cfg = PreprocessConfig {
            lemma_map: Some(
                [("running", "run"), ("runs", "run")].iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
            ),
            ..Default::default()
        };
        assert_eq!(tokenize("running runs", &cfg), toks(&["run", "run"]));
    }

    #[test]
    fn tokenize_removes_non_latin() {
        let cfg = PreprocessConfig::default();
        assert_eq!(tokenize("btc🚀 比特币 café #hodl", &cfg), toks(&["btc", "café", "hodl"]));
        let keep = PreprocessConfig { strip_nonlatin: false, ..Default::default() };
        assert_eq!(tokenize("比特币", &keep), toks(&["比特币"]));
    }

    #[test]
    fn stopwords_are_matched_before_lemmatization() {
        let cfg = PreprocessConfig {
            stopwords: ["be"].iter().map(|s| s.to_string()).collect(),
            lemma_map: Some([("is".to_string(), "be".to_string())].into_iter().collect()),
            ..Default::default()
        };
        assert_eq!(tokenize("is be", &cfg), toks(&["be"]));
    }

    #[test]
    fn vocabulary_min_count() {
        let v = build_vocabulary(&[toks(&["a", "b"]), toks(&["a"])], 2).unwrap();
        assert_eq!(v.tokens(), &toks(&["a"])[..]);
        assert_eq!(v.id("a"), Some(0));
        let v = build_vocabulary(&[toks(&["a"])], 1).unwrap();
        assert_eq!(v.id("a"), Some(0));
        assert!(matches!(build_vocabulary(&[toks(&["a"]), toks(&["b"])], 3), Err(Error::EmptyVocabulary { .. })));
    }

    #[test]
    fn vocabulary_first_appearance_order() {
        let v = build_vocabulary(&[toks(&["c", "b"]), toks(&["a", "b", "c"])], 1).unwrap();
        assert_eq!(v.tokens(), &toks(&["c", "b", "a"])[..]);
    }

    #[test]
    fn encode_counts_and_dedupe() {
        let vocab = Vocabulary::from_tokens(toks(&["a", "b"])).unwrap();
        let d = encode(&toks(&["a", "a", "b"]), &vocab, false).unwrap();
        assert_eq!(d.counts(), &[(0, 2), (1, 1)]);
        assert_eq!(d.len(), 3);
        let d = encode(&toks(&["a", "a", "b"]), &vocab, true).unwrap();
        assert_eq!(d.counts(), &[(0, 1), (1, 1)]);
        assert_eq!(d.len(), 2);
    }

    #[test]
    fn encode_oov_only_is_empty() {
        let vocab = Vocabulary::from_tokens(toks(&["a"])).unwrap();
        assert!(matches!(encode(&toks(&["zzz"]), &vocab, false), Err(Error::EmptyDocument)));
    }

    #[test]
    fn vocabulary_tsv_roundtrip() {
        let vocab = Vocabulary::from_tokens(toks(&["x", "y y", "z"])).unwrap();
        let mut buf = Vec::new();
        vocab.write_tsv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "x\t0\ny y\t1\nz\t2\n");
        assert_eq!(Vocabulary::read_tsv(&buf[..]).unwrap(), vocab);
    }

    #[test]
    fn ingest_drops_empty_documents() {
        let recs = vec![
            RawRecord { text: "alpha beta".into(), author: None, timestamp_utc: Some(5) },
            RawRecord { text: "@only https://link".into(), author: None, timestamp_utc: None },
            RawRecord { text: "alpha".into(), author: Some("u".into()), timestamp_utc: None },
        ];
        let cfg = PreprocessConfig { min_count: 1, ..Default::default() };
        let out = ingest(&recs, &cfg, true).unwrap();
        assert_eq!(out.dropped, 1);
        assert_eq!(out.corpus.num_docs(), 2);
        assert_eq!(out.corpus.docs()[0].meta.timestamp_utc, Some(5));
        assert_eq!(out.corpus.docs()[1].meta.author.as_deref(), Some("u"));
    }

    #[test]
    fn corpus_jsonl_roundtrip() {
        let recs = vec![
            RawRecord { text: "a b a".into(), author: Some("x".into()), timestamp_utc: Some(1) },
            RawRecord { text: "b".into(), author: None, timestamp_utc: None },
        ];
        let cfg = PreprocessConfig { min_count: 1, ..Default::default() };
        let c = ingest(&recs, &cfg, false).unwrap().corpus;
        let mut buf = Vec::new();
        c.write_jsonl(&mut buf).unwrap();
        let back = Corpus::read_jsonl(&buf[..], c.shared_vocab()).unwrap();
        assert_eq!(back.docs(), c.docs());
    }

    proptest! {
        #[test]
        fn encode_is_idempotent(ids in proptest::collection::vec(0usize..6, 1..20), dedupe: bool) {
            let vocab = Vocabulary::from_tokens((0..6).map(|i| format!("w{i}")).collect()).unwrap();
            let tokens: Vec<String> = ids.iter().map(|i| format!("w{i}")).collect();
            let doc = encode(&tokens, &vocab, dedupe).unwrap();
            let again: Vec<String> = doc.tokens().iter().map(|&i| vocab.token(i).unwrap().to_string()).collect();
            prop_assert_eq!(encode(&again, &vocab, dedupe).unwrap(), doc.clone());
            let total: u32 = doc.counts().iter().map(|(_, c)| c).sum();
            prop_assert_eq!(total as usize, doc.len());
            if dedupe {
                prop_assert!(doc.counts().iter().all(|(_, c)| *c == 1));
                prop_assert_eq!(doc.len(), doc.distinct());
            }
        }

        #[test]
        fn vocabulary_respects_min_count(
            docs in proptest::collection::vec(proptest::collection::vec(0u8..8, 0..10), 1..10),
            min_count in 1usize..4,
        ) {
            let token_docs: Vec<Vec<String>> =
                docs.iter().map(|d| d.iter().map(|t| format!("t{t}")).collect()).collect();
            match build_vocabulary(&token_docs, min_count) {
                Ok(vocab) => {
                    for (i, tok) in vocab.tokens().iter().enumerate() {
                        prop_assert_eq!(vocab.id(tok), Some(i));
                        let freq = token_docs.iter().flatten().filter(|t| *t == tok).count();
                        prop_assert!(freq >= min_count);
                    }
                    let kept: HashSet<&String> = vocab.tokens().iter().collect();
                    for t in token_docs.iter().flatten() {
                        let freq = token_docs.iter().flatten().filter(|u| *u == t).count();
                        prop_assert_eq!(kept.contains(t), freq >= min_count);
                    }
                }
                Err(Error::EmptyVocabulary { .. }) => {
                    for t in token_docs.iter().flatten() {
                        let freq = token_docs.iter().flatten().filter(|u| *u == t).count();
                        prop_assert!(freq < min_count);
                    }
                }
                Err(e) => prop_assert!(false, "unexpected error {e}"),
            }
        }
    }
}
