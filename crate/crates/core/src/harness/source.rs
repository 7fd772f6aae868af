use log::warn;
use rayon::prelude::*;

use crate::count::Document;
use crate::error::{Error, Result};
use crate::kernel::{build_gram, build_gram_cross, GramMatrix, KernelSpec};
use crate::pyramid::{
    build_pyramid, build_pyramid_gram, build_pyramid_gram_cross, kmeans_fit, quantize,
    sample_descriptors, DescriptorSet, KMeansConfig, PyramidCorpus, PyramidDoc,
};
use crate::text::{build_vocabulary, vectorize, Corpus, TextPipeline, TokenizedDoc};

/// Feature vectors for one side of a split.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureSet {
    Flat(Vec<Document>),
    Pyramid(Vec<PyramidDoc>),
}

impl FeatureSet {
    pub fn len(&self) -> usize {
        match self {
            FeatureSet::Flat(d) => d.len(),
            FeatureSet::Pyramid(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ids(&self) -> Vec<String> {
        match self {
            FeatureSet::Flat(d) => d.iter().map(|d| d.id.clone()).collect(),
            FeatureSet::Pyramid(d) => d.iter().map(|d| d.id.clone()).collect(),
        }
    }

    /// Square Gram matrix over this set.
    pub fn gram(&self, spec: &KernelSpec) -> Result<GramMatrix> {
        match self {
            FeatureSet::Flat(d) => build_gram(d, spec),
            FeatureSet::Pyramid(d) => build_pyramid_gram(d, spec),
        }
    }

    /// Rows from `self`, columns from `cols`.
    pub fn cross_gram(&self, cols: &FeatureSet, spec: &KernelSpec) -> Result<GramMatrix> {
        match (self, cols) {
            (FeatureSet::Flat(r), FeatureSet::Flat(c)) => build_gram_cross(r, c, spec),
            (FeatureSet::Pyramid(r), FeatureSet::Pyramid(c)) => {
                build_pyramid_gram_cross(r, c, spec)
            }
            _ => Err(Error::usage("cannot mix flat and pyramid features")),
        }
    }
}

/// Features derived for a (train, eval) split. Items whose representation
/// came out empty are dropped; `*_kept` lists the surviving positions within
/// the requested index slices.
#[derive(Debug, Clone)]
pub struct FoldFeatures {
    pub train: FeatureSet,
    pub train_kept: Vec<usize>,
    pub eval: FeatureSet,
    pub eval_kept: Vec<usize>,
    /// Fingerprint of every data-derived artifact (vocabularies) used.
    pub fingerprint: [u8; 32],
}

/// A labeled item pool whose features can be derived from any training
/// subset without looking at the evaluation items.
pub trait FoldSource: Sync {
    fn ids(&self) -> &[String];
    fn labels(&self) -> &[String];
    /// Positions of the training split within the pool.
    fn train_indices(&self) -> &[usize];
    /// Positions of the test split within the pool.
    fn test_indices(&self) -> &[usize];
    fn features(&self, train: &[usize], eval: &[usize]) -> Result<FoldFeatures>;
}

fn check_split(n: usize, train: &[usize], test: &[usize]) -> Result<()> {
    if train.iter().chain(test).any(|&i| i >= n) {
        return Err(Error::usage("split index outside the item pool"));
    }
    Ok(())
}

/// Count vectors whose vocabulary was fixed upstream.
#[derive(Debug, Clone)]
pub struct CountSource {
    ids: Vec<String>,
    labels: Vec<String>,
    docs: Vec<Document>,
    train: Vec<usize>,
    test: Vec<usize>,
    fingerprint: [u8; 32],
}

impl CountSource {
    pub fn new(train: Corpus, test: Option<Corpus>) -> Result<Self> {
        let mut docs = train.docs;
        let mut labels = train.labels;
        let n_train = docs.len();
        if let Some(t) = test {
            if t.vocab_fingerprint != train.vocab_fingerprint || t.vocab_size != train.vocab_size {
                return Err(Error::data(
                    "train and test corpora use different vocabularies",
                ));
            }
            docs.extend(t.docs);
            labels.extend(t.labels);
        }
        Ok(CountSource {
            ids: docs.iter().map(|d| d.id.clone()).collect(),
            train: (0..n_train).collect(),
            test: (n_train..docs.len()).collect(),
            labels,
            docs,
            fingerprint: train.vocab_fingerprint,
        })
    }
}

impl FoldSource for CountSource {
    fn ids(&self) -> &[String] {
        &self.ids
    }
    fn labels(&self) -> &[String] {
        &self.labels
    }
    fn train_indices(&self) -> &[usize] {
        &self.train
    }
    fn test_indices(&self) -> &[usize] {
        &self.test
    }
    fn features(&self, train: &[usize], eval: &[usize]) -> Result<FoldFeatures> {
        check_split(self.docs.len(), train, eval)?;
        let pick = |idx: &[usize]| idx.iter().map(|&i| self.docs[i].clone()).collect();
        Ok(FoldFeatures {
            train: FeatureSet::Flat(pick(train)),
            train_kept: (0..train.len()).collect(),
            eval: FeatureSet::Flat(pick(eval)),
            eval_kept: (0..eval.len()).collect(),
            fingerprint: self.fingerprint,
        })
    }
}

/// Tokenized text; the vocabulary is rebuilt from every training subset.
#[derive(Debug, Clone)]
pub struct TokenSource {
    ids: Vec<String>,
    labels: Vec<String>,
    docs: Vec<TokenizedDoc>,
    train: Vec<usize>,
    test: Vec<usize>,
    min_count: usize,
}

impl TokenSource {
    pub fn new(train: Vec<TokenizedDoc>, test: Vec<TokenizedDoc>, pipeline: &TextPipeline) -> Self {
        let n_train = train.len();
        let docs: Vec<TokenizedDoc> = train.into_iter().chain(test).collect();
        TokenSource {
            ids: docs.iter().map(|d| d.id.clone()).collect(),
            labels: docs.iter().map(|d| d.label.clone()).collect(),
            train: (0..n_train).collect(),
            test: (n_train..docs.len()).collect(),
            docs,
            min_count: pipeline.min_count,
        }
    }
}

fn vectorize_subset(
    docs: &[TokenizedDoc],
    idx: &[usize],
    vocab: &crate::text::Vocabulary,
    side: &str,
) -> (Vec<Document>, Vec<usize>) {
    let mut out = Vec::new();
    let mut kept = Vec::new();
    for (pos, &i) in idx.iter().enumerate() {
        match vectorize(&docs[i].tokens, vocab) {
            Some(c) => {
                out.push(Document::new(docs[i].id.clone(), c));
                kept.push(pos);
            }
            None => warn!(
                "excluding {side} document '{}': no in-vocabulary words",
                docs[i].id
            ),
        }
    }
    (out, kept)
}

impl FoldSource for TokenSource {
    fn ids(&self) -> &[String] {
        &self.ids
    }
    fn labels(&self) -> &[String] {
        &self.labels
    }
    fn train_indices(&self) -> &[usize] {
        &self.train
    }
    fn test_indices(&self) -> &[usize] {
        &self.test
    }
    fn features(&self, train: &[usize], eval: &[usize]) -> Result<FoldFeatures> {
        check_split(self.docs.len(), train, eval)?;
        let lists: Vec<Vec<String>> = train.iter().map(|&i| self.docs[i].tokens.clone()).collect();
        let vocab = build_vocabulary(&lists, self.min_count)?;
        let (tr, train_kept) = vectorize_subset(&self.docs, train, &vocab, "training");
        let (ev, eval_kept) = vectorize_subset(&self.docs, eval, &vocab, "evaluation");
        Ok(FoldFeatures {
            train: FeatureSet::Flat(tr),
            train_kept,
            eval: FeatureSet::Flat(ev),
            eval_kept,
            fingerprint: vocab.fingerprint(),
        })
    }
}

/// Pyramid documents quantized against a fixed visual vocabulary.
#[derive(Debug, Clone)]
pub struct PyramidSource {
    ids: Vec<String>,
    labels: Vec<String>,
    docs: Vec<PyramidDoc>,
    train: Vec<usize>,
    test: Vec<usize>,
    fingerprint: [u8; 32],
}

impl PyramidSource {
    pub fn new(train: PyramidCorpus, test: Option<PyramidCorpus>) -> Result<Self> {
        let mut docs = train.docs;
        let mut labels = train.labels;
        let n_train = docs.len();
        if let Some(t) = test {
            if t.vocab_fingerprint != train.vocab_fingerprint || t.levels != train.levels {
                return Err(Error::data(
                    "train and test pyramid corpora differ in vocabulary or levels",
                ));
            }
            docs.extend(t.docs);
            labels.extend(t.labels);
        }
        Ok(PyramidSource {
            ids: docs.iter().map(|d| d.id.clone()).collect(),
            train: (0..n_train).collect(),
            test: (n_train..docs.len()).collect(),
            labels,
            docs,
            fingerprint: train.vocab_fingerprint,
        })
    }
}

impl FoldSource for PyramidSource {
    fn ids(&self) -> &[String] {
        &self.ids
    }
    fn labels(&self) -> &[String] {
        &self.labels
    }
    fn train_indices(&self) -> &[usize] {
        &self.train
    }
    fn test_indices(&self) -> &[usize] {
        &self.test
    }
    fn features(&self, train: &[usize], eval: &[usize]) -> Result<FoldFeatures> {
        check_split(self.docs.len(), train, eval)?;
        let pick = |idx: &[usize]| idx.iter().map(|&i| self.docs[i].clone()).collect();
        Ok(FoldFeatures {
            train: FeatureSet::Pyramid(pick(train)),
            train_kept: (0..train.len()).collect(),
            eval: FeatureSet::Pyramid(pick(eval)),
            eval_kept: (0..eval.len()).collect(),
            fingerprint: self.fingerprint,
        })
    }
}

/// Raw descriptors; the visual vocabulary is refit on every training subset.
#[derive(Debug, Clone)]
pub struct DescriptorSource {
    ids: Vec<String>,
    labels: Vec<String>,
    sets: Vec<DescriptorSet>,
    train: Vec<usize>,
    test: Vec<usize>,
    pub vocab_size: usize,
    pub levels: usize,
    pub sample_size: usize,
    pub kmeans: KMeansConfig,
}

impl DescriptorSource {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        train: Vec<(DescriptorSet, String)>,
        test: Vec<(DescriptorSet, String)>,
        vocab_size: usize,
        levels: usize,
        sample_size: usize,
        kmeans: KMeansConfig,
    ) -> Self {
        let n_train = train.len();
        let (sets, labels): (Vec<_>, Vec<_>) = train.into_iter().chain(test).unzip();
        DescriptorSource {
            ids: sets.iter().map(|s: &DescriptorSet| s.id.clone()).collect(),
            train: (0..n_train).collect(),
            test: (n_train..sets.len()).collect(),
            labels,
            sets,
            vocab_size,
            levels,
            sample_size,
            kmeans,
        }
    }
}

impl FoldSource for DescriptorSource {
    fn ids(&self) -> &[String] {
        &self.ids
    }
    fn labels(&self) -> &[String] {
        &self.labels
    }
    fn train_indices(&self) -> &[usize] {
        &self.train
    }
    fn test_indices(&self) -> &[usize] {
        &self.test
    }
    fn features(&self, train: &[usize], eval: &[usize]) -> Result<FoldFeatures> {
        check_split(self.sets.len(), train, eval)?;
        let train_sets: Vec<DescriptorSet> = train.iter().map(|&i| self.sets[i].clone()).collect();
        let samples = sample_descriptors(&train_sets, self.sample_size, self.kmeans.seed);
        let vocab = kmeans_fit(&samples, self.vocab_size, &self.kmeans)?;
        let build = |idx: &[usize]| -> Result<Vec<PyramidDoc>> {
            idx.par_iter()
                .map(|&i| {
                    let s = &self.sets[i];
                    build_pyramid(
                        &s.id,
                        &quantize(s, &vocab)?,
                        s.width,
                        s.height,
                        self.levels,
                        vocab.len(),
                    )
                })
                .collect()
        };
        Ok(FoldFeatures {
            train: FeatureSet::Pyramid(build(train)?),
            train_kept: (0..train.len()).collect(),
            eval: FeatureSet::Pyramid(build(eval)?),
            eval_kept: (0..eval.len()).collect(),
            fingerprint: vocab.fingerprint(),
        })
    }
}
