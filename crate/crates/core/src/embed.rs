//! Paragraph vectors, distributed bag-of-words flavour, trained with negative
//! sampling.
//!
//! Training is single-threaded: documents are visited in (driver, week, day)
//! order and every random draw comes from one seeded generator, so a corpus
//! and a seed always give the same model. Each document vector starts from a
//! value derived from the seed and the document's words, which makes repeated
//! documents start (and end up) together.

use std::collections::BTreeMap;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::DayDocument;
use crate::error::{Error, Result};

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingParams {
    pub dims: usize,
    pub epochs: usize,
    pub negatives: usize,
    pub learning_rate: f64,
    pub min_learning_rate: f64,
    pub infer_epochs: usize,
}

impl Default for EmbeddingParams {
    fn default() -> Self {
        EmbeddingParams {
            dims: 200,
            epochs: 40,
            negatives: 5,
            learning_rate: 0.025,
            min_learning_rate: 0.0001,
            infer_epochs: 40,
        }
    }
}

/// Key of a trained document vector.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DocKey {
    pub driver: String,
    pub week: u32,
    pub day: u32,
}

impl DocKey {
    pub fn of(doc: &DayDocument) -> Self {
        DocKey {
            driver: doc.driver_id.clone(),
            week: doc.week,
            day: doc.day,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingModel {
    pub version: u32,
    pub params: EmbeddingParams,
    pub seed: u64,
    /// Rendered words, sorted; position is the word index.
    pub vocabulary: Vec<String>,
    /// Output (context) vectors, one row per word.
    pub word_vectors: Vec<Vec<f64>>,
    pub doc_keys: Vec<DocKey>,
    /// One row per document, in `doc_keys` order (canonical order).
    pub doc_vectors: Vec<Vec<f64>>,
    /// Unigram counts raised to 0.75, for negative sampling.
    noise_weights: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    if x > 30.0 {
        1.0
    } else if x < -30.0 {
        0.0
    } else {
        1.0 / (1.0 + (-x).exp())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn initial_vector(seed: u64, words: &[usize], dims: usize) -> Vec<f64> {
    let mut h = DefaultHasher::new();
    seed.hash(&mut h);
    words.hash(&mut h);
    let mut rng = ChaCha8Rng::seed_from_u64(h.finish());
    (0..dims)
        .map(|_| (rng.random::<f64>() - 0.5) / dims as f64)
        .collect()
}

/// One negative-sampling step for a (doc, word) pair. Updates the document
/// vector and, unless frozen, the output vectors.
#[allow(clippy::too_many_arguments)]
fn train_pair(
    doc: &mut [f64],
    word: usize,
    words: &mut [Vec<f64>],
    noise: &WeightedIndex<f64>,
    negatives: usize,
    lr: f64,
    rng: &mut ChaCha8Rng,
    freeze_words: bool,
) {
    let mut grad = vec![0.0; doc.len()];
    for n in 0..=negatives {
        let (target, label) = if n == 0 {
            (word, 1.0)
        } else {
            let t = noise.sample(rng);
            if t == word {
                continue;
            }
            (t, 0.0)
        };
        let out = &mut words[target];
        let g = (label - sigmoid(dot(doc, out))) * lr;
        for (acc, o) in grad.iter_mut().zip(out.iter()) {
            *acc += g * o;
        }
        if !freeze_words {
            for (o, d) in out.iter_mut().zip(doc.iter()) {
                *o += g * d;
            }
        }
    }
    for (d, g) in doc.iter_mut().zip(grad) {
        *d += g;
    }
}

fn canonical(corpus: &[DayDocument]) -> Vec<&DayDocument> {
    let mut docs: Vec<&DayDocument> = corpus.iter().collect();
    docs.sort_by(|a, b| {
        DocKey::of(a)
            .cmp(&DocKey::of(b))
            .then_with(|| a.words.cmp(&b.words))
    });
    docs
}

/// Trains document and word vectors on `corpus`.
pub fn train_embedding(
    corpus: &[DayDocument],
    params: &EmbeddingParams,
    seed: u64,
) -> Result<EmbeddingModel> {
    if corpus.is_empty() {
        return Err(Error::invalid(
            "cannot train an embedding on an empty corpus",
        ));
    }
    if params.dims < 2 {
        return Err(Error::invalid("embedding needs at least 2 dimensions"));
    }
    if let Some(d) = corpus.iter().find(|d| d.words.is_empty()) {
        return Err(Error::invalid(format!(
            "document {} week {} day {} is empty",
            d.driver_id, d.week, d.day
        )));
    }
    let docs = canonical(corpus);
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for d in &docs {
        for w in &d.words {
            *counts.entry(w.render()).or_default() += 1;
        }
    }
    let vocabulary: Vec<String> = counts.keys().cloned().collect();
    let index: BTreeMap<&str, usize> = vocabulary
        .iter()
        .enumerate()
        .map(|(i, w)| (w.as_str(), i))
        .collect();
    let noise_weights: Vec<f64> = counts.values().map(|&c| (c as f64).powf(0.75)).collect();
    let noise = WeightedIndex::new(&noise_weights).expect("non-empty vocabulary");

    let encoded: Vec<Vec<usize>> = docs
        .iter()
        .map(|d| d.words.iter().map(|w| index[w.render().as_str()]).collect())
        .collect();
    let mut doc_vectors: Vec<Vec<f64>> = encoded
        .iter()
        .map(|w| initial_vector(seed, w, params.dims))
        .collect();
    let mut word_vectors = vec![vec![0.0; params.dims]; vocabulary.len()];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = (params.epochs * encoded.iter().map(Vec::len).sum::<usize>()).max(1) as f64;
    let mut seen = 0usize;
    for _ in 0..params.epochs {
        for (doc, words) in doc_vectors.iter_mut().zip(&encoded) {
            for &w in words {
                let lr = (params.learning_rate * (1.0 - seen as f64 / total))
                    .max(params.min_learning_rate);
                train_pair(
                    doc,
                    w,
                    &mut word_vectors,
                    &noise,
                    params.negatives,
                    lr,
                    &mut rng,
                    false,
                );
                seen += 1;
            }
        }
    }
    Ok(EmbeddingModel {
        version: MODEL_VERSION,
        params: *params,
        seed,
        vocabulary,
        word_vectors,
        doc_keys: docs.iter().map(|d| DocKey::of(d)).collect(),
        doc_vectors,
        noise_weights,
    })
}

impl EmbeddingModel {
    pub fn dims(&self) -> usize {
        self.params.dims
    }

    pub fn vector_of(&self, key: &DocKey) -> Option<&[f64]> {
        self.doc_keys
            .binary_search(key)
            .ok()
            .map(|i| self.doc_vectors[i].as_slice())
    }

    /// Document vectors as a matrix, rows in `doc_keys` order.
    pub fn doc_matrix(&self) -> DMatrix<f64> {
        let flat: Vec<f64> = self.doc_vectors.iter().flatten().copied().collect();
        DMatrix::from_row_slice(self.doc_vectors.len(), self.dims(), &flat)
    }

    /// Trains a fresh vector for `doc` against the frozen word vectors.
    pub fn infer_vector(&self, doc: &DayDocument, seed: u64) -> Result<Vec<f64>> {
        let index: BTreeMap<&str, usize> = self
            .vocabulary
            .iter()
            .enumerate()
            .map(|(i, w)| (w.as_str(), i))
            .collect();
        let words: Vec<usize> = doc
            .words
            .iter()
            .map(|w| {
                let r = w.render();
                index
                    .get(r.as_str())
                    .copied()
                    .ok_or(Error::OutOfVocabulary(r))
            })
            .collect::<Result<_>>()?;
        if words.is_empty() {
            return Err(Error::invalid(
                "cannot infer a vector for an empty document",
            ));
        }
        let noise = WeightedIndex::new(&self.noise_weights).expect("non-empty vocabulary");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = initial_vector(self.seed, &words, self.dims());
        let mut frozen = self.word_vectors.clone();
        let total = (self.params.infer_epochs * words.len()).max(1) as f64;
        let mut seen = 0usize;
        for _ in 0..self.params.infer_epochs {
            for &w in &words {
                let lr = (self.params.learning_rate * (1.0 - seen as f64 / total))
                    .max(self.params.min_learning_rate);
                train_pair(
                    &mut v,
                    w,
                    &mut frozen,
                    &noise,
                    self.params.negatives,
                    lr,
                    &mut rng,
                    true,
                );
                seen += 1;
            }
        }
        Ok(v)
    }

    pub fn save<W: Write>(&self, sink: W) -> Result<()> {
        serde_json::to_writer(sink, self)?;
        Ok(())
    }

    pub fn load<R: Read>(source: R) -> Result<Self> {
        let m: EmbeddingModel = serde_json::from_reader(source)?;
        if m.version != MODEL_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model version {}",
                m.version
            )));
        }
        Ok(m)
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let n = dot(a, a).sqrt() * dot(b, b).sqrt();
    if n == 0.0 {
        0.0
    } else {
        dot(a, b) / n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::Word;

    fn doc(driver: &str, day: u32, words: &[&[usize]]) -> DayDocument {
        DayDocument {
            driver_id: driver.to_owned(),
            week: 1,
            day,
            words: words.iter().map(|c| Word { codes: c.to_vec() }).collect(),
            legal: true,
        }
    }

    fn small_params() -> EmbeddingParams {
        EmbeddingParams {
            dims: 16,
            ..EmbeddingParams::default()
        }
    }

    #[test]
    fn rejects_empty_inputs() {
        assert!(train_embedding(&[], &small_params(), 1).is_err());
        assert!(train_embedding(&[doc("a", 1, &[])], &small_params(), 1).is_err());
        let p = EmbeddingParams {
            dims: 1,
            ..small_params()
        };
        assert!(train_embedding(&[doc("a", 1, &[&[0, 0, 0, 0]])], &p, 1).is_err());
    }

    #[test]
    fn vectors_are_finite_and_non_zero() {
        let corpus = vec![
            doc("a", 1, &[&[0, 0, 0, 0], &[1, 0, 1, 1]]),
            doc("a", 2, &[&[2, 1, 0, 3]]),
        ];
        let m = train_embedding(&corpus, &small_params(), 3).unwrap();
        for v in &m.doc_vectors {
            let n = dot(v, v).sqrt();
            assert!(n.is_finite() && n > 0.0);
        }
    }

    #[test]
    fn unseen_word_is_rejected_on_inference() {
        let corpus = vec![doc("a", 1, &[&[0, 0, 0, 0]]), doc("a", 2, &[&[1, 0, 0, 0]])];
        let m = train_embedding(&corpus, &small_params(), 3).unwrap();
        let err = m
            .infer_vector(&doc("b", 1, &[&[3, 1, 1, 1]]), 0)
            .unwrap_err();
        assert!(matches!(err, Error::OutOfVocabulary(_)));
    }

    #[test]
    fn model_round_trips() {
        let corpus = vec![doc("a", 1, &[&[0, 0, 0, 0]]), doc("a", 2, &[&[1, 0, 0, 0]])];
        let m = train_embedding(&corpus, &small_params(), 3).unwrap();
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        assert_eq!(EmbeddingModel::load(buf.as_slice()).unwrap(), m);
    }
}
