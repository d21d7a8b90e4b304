//! A trained model of any of the three kinds, and its on-disk form.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Vocabulary};
use crate::dmm::DmmModel;
use crate::eval::TopicWordMatrix;
use crate::lda::LdaModel;
use crate::prodlda::ProdLdaModel;
use crate::{Error, Result};

#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "lowercase")]
pub enum TopicModel {
    Dmm(DmmModel),
    Lda(LdaModel),
    #[serde(rename = "prodlda")]
    ProdLda(ProdLdaModel),
}

impl TopicModel {
    pub fn kind(&self) -> &'static str {
        match self {
            TopicModel::Dmm(_) => "dmm",
            TopicModel::Lda(_) => "lda",
            TopicModel::ProdLda(_) => "prodlda",
        }
    }

    pub fn k(&self) -> usize {
        match self {
            TopicModel::Dmm(m) => m.k(),
            TopicModel::Lda(m) => m.params.k,
            TopicModel::ProdLda(m) => m.k(),
        }
    }

    pub fn topic_word_matrix(&self) -> TopicWordMatrix {
        match self {
            TopicModel::Dmm(m) => m.phi.clone(),
            TopicModel::Lda(m) => m.phi(),
            TopicModel::ProdLda(m) => m.topic_word_matrix(),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.topic_word_matrix().v()
    }
}

/// A model together with the vocabulary and training word counts it was fit
/// on. Serialized as JSON; floats round-trip exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub vocab: Vec<String>,
    /// Corpus frequency of each word, used for relevance ranking.
    pub word_counts: Vec<u64>,
    #[serde(flatten)]
    pub model: TopicModel,
}

impl ModelFile {
    pub fn new(model: TopicModel, corpus: &Corpus) -> Self {
        Self { vocab: corpus.vocab().tokens().to_vec(), word_counts: corpus.word_counts(), model }
    }

    pub fn vocabulary(&self) -> Result<Vocabulary> {
        Vocabulary::from_tokens(self.vocab.clone())
    }

    /// Marginal word distribution p(w) from the stored counts.
    pub fn word_probs(&self) -> Vec<f64> {
        let total: u64 = self.word_counts.iter().sum();
        self.word_counts.iter().map(|&c| c as f64 / total.max(1) as f64).collect()
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer(w, self)?;
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        let file: Self = serde_json::from_reader(r)?;
        let v = file.model.vocab_size();
        if file.vocab.len() != v || file.word_counts.len() != v {
            return Err(Error::ShapeMismatch {
                expected: format!("{v} vocabulary entries"),
                got: format!("{} tokens, {} counts", file.vocab.len(), file.word_counts.len()),
            });
        }
        Ok(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dmm::{self, DmmParams};
    use crate::lda::{self, LdaParams};
    use crate::prodlda::{ProdLdaConfig, ProdLdaModel};
    use crate::synthetic;

    fn roundtrip(m: TopicModel, c: &Corpus) {
        let file = ModelFile::new(m, c);
        let mut buf = Vec::new();
        file.write(&mut buf).unwrap();
        let back = ModelFile::read(buf.as_slice()).unwrap();
        assert_eq!(back, file);
        assert!(String::from_utf8(buf).unwrap().contains(&format!("\"kind\":\"{}\"", file.model.kind())));
    }

    #[test]
    fn every_kind_roundtrips_exactly() {
        let p = synthetic::planted_dmm(&synthetic::PlantedDmm {
            topics: 2,
            words_per_topic: 4,
            docs: 30,
            draws_per_doc: 4,
            seed: 2,
        });
        let c = &p.corpus;
        let d = dmm::train(c, &DmmParams { iterations: 3, ..DmmParams::new(2, 0.1, 0.1) }).unwrap();
        roundtrip(TopicModel::Dmm(d), c);
        let l = lda::train(c, &LdaParams { passes: 1, batch_size: 10, ..LdaParams::new(2) }).unwrap();
        roundtrip(TopicModel::Lda(l), c);
        let mut rng = crate::rng_from_seed(1);
        let cfg = ProdLdaConfig { encoder_hidden: [3, 3], ..ProdLdaConfig::new(2) };
        roundtrip(TopicModel::ProdLda(ProdLdaModel::new(c.vocab_size(), cfg, &mut rng).unwrap()), c);
    }

    #[test]
    fn rejects_inconsistent_vocab() {
        let p = synthetic::planted_dmm(&synthetic::PlantedDmm {
            topics: 2,
            words_per_topic: 3,
            docs: 10,
            draws_per_doc: 3,
            seed: 2,
        });
        let d = dmm::train(&p.corpus, &DmmParams { iterations: 1, ..DmmParams::new(2, 0.1, 0.1) }).unwrap();
        let mut file = ModelFile::new(TopicModel::Dmm(d), &p.corpus);
        file.vocab.pop();
        let mut buf = Vec::new();
        file.write(&mut buf).unwrap();
        assert!(ModelFile::read(buf.as_slice()).is_err());
    }
}
