use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::tokenize::{remove_stopwords, strip_headers, tokenize, HeaderMode, Stoplist};
use crate::count::{CountVector, Document, WordId};
use crate::error::{Error, Result};

/// Term → id map with ids assigned in sorted term order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, WordId>,
    fingerprint: [u8; 32],
}

impl Vocabulary {
    /// Builds from terms; they are sorted and deduplicated.
    pub fn from_terms(terms: impl IntoIterator<Item = String>) -> Result<Self> {
        let terms: Vec<String> = terms
            .into_iter()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if terms.is_empty() {
            return Err(Error::data("empty vocabulary"));
        }
        let mut h = Sha256::new();
        for t in &terms {
            h.update(t.as_bytes());
            h.update(b"\n");
        }
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as WordId))
            .collect();
        Ok(Vocabulary {
            terms,
            index,
            fingerprint: h.finalize().into(),
        })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn id(&self, term: &str) -> Option<WordId> {
        self.index.get(term).copied()
    }

    pub fn term(&self, id: WordId) -> Option<&str> {
        self.terms.get(id as usize).map(String::as_str)
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn fingerprint(&self) -> [u8; 32] {
        self.fingerprint
    }

    /// One term per line in id order.
    pub fn write(&self, w: &mut impl Write) -> std::io::Result<()> {
        for t in &self.terms {
            writeln!(w, "{t}")?;
        }
        Ok(())
    }

    pub fn read(r: impl BufRead) -> Result<Self> {
        let terms = r
            .lines()
            .collect::<std::io::Result<Vec<_>>>()
            .map_err(|e| Error::io("<vocabulary>", e))?;
        let v = Self::from_terms(terms.iter().filter(|t| !t.is_empty()).cloned())?;
        if v.terms
            .iter()
            .zip(terms.iter().filter(|t| !t.is_empty()))
            .any(|(a, b)| a != b)
        {
            return Err(Error::data(
                "vocabulary file is not in sorted, duplicate-free order",
            ));
        }
        Ok(v)
    }
}

/// Vocabulary of all terms occurring at least `min_count` times across the
/// training documents.
pub fn build_vocabulary(train: &[Vec<String>], min_count: usize) -> Result<Vocabulary> {
    if min_count == 0 {
        return Err(Error::usage("min_count must be at least 1"));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in train {
        for t in doc {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    Vocabulary::from_terms(
        counts
            .into_iter()
            .filter(|&(_, c)| c >= min_count)
            .map(|(t, _)| t.to_string()),
    )
}

/// Counts of in-vocabulary tokens; out-of-vocabulary tokens are dropped.
/// Returns `None` when nothing is left.
pub fn vectorize(tokens: &[String], vocab: &Vocabulary) -> Option<CountVector> {
    let v = CountVector::from_words(vocab.len(), tokens.iter().filter_map(|t| vocab.id(t)))
        .expect("vocabulary ids are in range");
    (!v.is_empty()).then_some(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// Labeled count vectors sharing one vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub split: Split,
    pub vocab_size: usize,
    pub vocab_fingerprint: [u8; 32],
    pub docs: Vec<Document>,
    pub labels: Vec<String>,
}

impl Corpus {
    pub fn new(
        split: Split,
        vocab_size: usize,
        vocab_fingerprint: [u8; 32],
        docs: Vec<Document>,
        labels: Vec<String>,
    ) -> Result<Self> {
        if docs.len() != labels.len() {
            return Err(Error::data(
                "corpus has mismatched document and label counts",
            ));
        }
        if let Some(d) = docs.iter().find(|d| d.counts.vocab_size() != vocab_size) {
            return Err(Error::data(format!(
                "document '{}' has vocabulary size {}, corpus has {vocab_size}",
                d.id,
                d.counts.vocab_size()
            )));
        }
        if let Some(d) = docs.iter().find(|d| d.counts.is_empty()) {
            return Err(Error::data(format!("document '{}' is empty", d.id)));
        }
        Ok(Corpus {
            split,
            vocab_size,
            vocab_fingerprint,
            docs,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Sorted distinct labels.
    pub fn label_set(&self) -> Vec<String> {
        self.labels
            .iter()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Class id of every document with respect to `classes`.
    pub fn class_ids(&self, classes: &[String]) -> Result<Vec<usize>> {
        self.labels
            .iter()
            .map(|l| {
                classes.iter().position(|c| c == l).ok_or_else(|| {
                    Error::data(format!("label '{l}' not among the declared classes"))
                })
            })
            .collect()
    }

    /// Writes the corpus file: `W`, `vocab_fingerprint`, `M` and `split`
    /// header lines, then `id<TAB>label<TAB>word:count ...` per document.
    pub fn write(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "W {}", self.vocab_size)?;
        writeln!(
            w,
            "vocab_fingerprint {}",
            hex::encode(self.vocab_fingerprint)
        )?;
        writeln!(w, "M {}", self.docs.len())?;
        writeln!(w, "split {}", self.split.name())?;
        for (d, l) in self.docs.iter().zip(&self.labels) {
            let pairs: Vec<String> = d
                .counts
                .entries()
                .iter()
                .map(|(w, c)| format!("{w}:{c}"))
                .collect();
            writeln!(w, "{}\t{}\t{}", d.id, l, pairs.join(" "))?;
        }
        Ok(())
    }

    pub fn read(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let mut header = |key: &str| -> Result<String> {
            let line = lines
                .next()
                .ok_or_else(|| Error::data("truncated corpus header"))?
                .map_err(|e| Error::io("<corpus>", e))?;
            line.strip_prefix(key)
                .and_then(|v| v.strip_prefix(' '))
                .map(str::to_string)
                .ok_or_else(|| Error::data(format!("expected corpus header '{key}', got '{line}'")))
        };
        let w: usize = header("W")?
            .parse()
            .map_err(|_| Error::data("bad W in corpus header"))?;
        let mut fp = [0u8; 32];
        hex::decode_to_slice(header("vocab_fingerprint")?, &mut fp)
            .map_err(|_| Error::data("bad vocabulary fingerprint in corpus header"))?;
        let m: usize = header("M")?
            .parse()
            .map_err(|_| Error::data("bad M in corpus header"))?;
        let split = match header("split")?.as_str() {
            "train" => Split::Train,
            "test" => Split::Test,
            other => return Err(Error::data(format!("unknown split '{other}'"))),
        };
        let mut docs = Vec::with_capacity(m);
        let mut labels = Vec::with_capacity(m);
        for (n, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io("<corpus>", e))?;
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::data(format!("corpus document line {}: {msg}", n + 1));
            let mut parts = line.splitn(3, '\t');
            let (Some(id), Some(label), Some(body)) = (parts.next(), parts.next(), parts.next())
            else {
                return Err(bad("expected id<TAB>label<TAB>counts"));
            };
            let pairs = body
                .split_whitespace()
                .map(|p| {
                    let (w, c) = p
                        .split_once(':')
                        .ok_or_else(|| bad("expected word:count"))?;
                    Ok((
                        w.parse::<WordId>().map_err(|_| bad("bad word id"))?,
                        c.parse::<u32>().map_err(|_| bad("bad count"))?,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            let counts = CountVector::from_sorted(w, pairs).map_err(|e| bad(&e.to_string()))?;
            docs.push(Document::new(id, counts));
            labels.push(label.to_string());
        }
        if docs.len() != m {
            return Err(Error::data(format!(
                "corpus header says {m} documents, found {}",
                docs.len()
            )));
        }
        Corpus::new(split, w, fp, docs, labels)
    }

    /// SHA-256 of the serialized corpus.
    pub fn fingerprint(&self) -> [u8; 32] {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to memory");
        Sha256::digest(&buf).into()
    }
}

/// A raw labeled text document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDoc {
    pub id: String,
    pub label: String,
    pub text: String,
}

/// Directory-per-class layout: every subdirectory of `root` is a class and
/// every file in it a document with id `class/filename`.
pub fn load_class_dirs(root: &Path) -> Result<Vec<RawDoc>> {
    let io = |p: &Path, e| Error::io(p, e);
    let mut classes: Vec<_> = fs::read_dir(root)
        .map_err(|e| io(root, e))?
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| io(root, e))?
        .into_iter()
        .filter(|e| e.path().is_dir())
        .collect();
    classes.sort_by_key(|e| e.file_name());
    let mut docs = Vec::new();
    for class in classes {
        let label = class.file_name().to_string_lossy().into_owned();
        let mut files: Vec<_> = fs::read_dir(class.path())
            .map_err(|e| io(&class.path(), e))?
            .collect::<std::io::Result<Vec<_>>>()
            .map_err(|e| io(&class.path(), e))?
            .into_iter()
            .filter(|e| e.path().is_file())
            .collect();
        files.sort_by_key(|e| e.file_name());
        for f in files {
            let bytes = fs::read(f.path()).map_err(|e| io(&f.path(), e))?;
            docs.push(RawDoc {
                id: format!("{label}/{}", f.file_name().to_string_lossy()),
                label: label.clone(),
                // 20 Newsgroups contains latin-1 posts
                text: String::from_utf8_lossy(&bytes).into_owned(),
            });
        }
    }
    if docs.is_empty() {
        return Err(Error::data(format!(
            "no documents under {}",
            root.display()
        )));
    }
    Ok(docs)
}

/// TSV layout: `id<TAB>label<TAB>text` per line.
pub fn load_tsv(path: &Path) -> Result<Vec<RawDoc>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8_lossy(&bytes);
    let mut docs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, '\t');
        let (Some(id), Some(label), Some(body)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::data(format!(
                "{}:{}: expected id<TAB>label<TAB>text",
                path.display(),
                n + 1
            )));
        };
        docs.push(RawDoc {
            id: id.to_string(),
            label: label.to_string(),
            text: body.replace("\\n", "\n"),
        });
    }
    Ok(docs)
}

/// Loads either layout depending on whether `path` is a directory.
pub fn load_raw(path: &Path) -> Result<Vec<RawDoc>> {
    if path.is_dir() {
        load_class_dirs(path)
    } else {
        load_tsv(path)
    }
}

/// A document after header handling, tokenization and stopword removal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedDoc {
    pub id: String,
    pub label: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct TextPipeline {
    pub stoplist: Stoplist,
    pub headers: HeaderMode,
    pub min_count: usize,
}

impl Default for TextPipeline {
    fn default() -> Self {
        TextPipeline {
            stoplist: Stoplist::smart(),
            headers: HeaderMode::SubjectOnly,
            min_count: 1,
        }
    }
}

impl TextPipeline {
    pub fn tokenize_docs(&self, raw: &[RawDoc]) -> Vec<TokenizedDoc> {
        raw.par_iter()
            .map(|d| TokenizedDoc {
                id: d.id.clone(),
                label: d.label.clone(),
                tokens: remove_stopwords(
                    tokenize(&strip_headers(&d.text, self.headers)),
                    &self.stoplist,
                ),
            })
            .collect()
    }

    /// Vocabulary from `train` only, then both splits vectorized against it.
    pub fn prepare(
        &self,
        train: &[TokenizedDoc],
        test: &[TokenizedDoc],
    ) -> Result<(Vocabulary, Corpus, Corpus)> {
        let token_lists: Vec<Vec<String>> = train.iter().map(|d| d.tokens.clone()).collect();
        let vocab = build_vocabulary(&token_lists, self.min_count)?;
        let train_corpus = vectorize_docs(train, &vocab, Split::Train)?;
        let test_corpus = vectorize_docs(test, &vocab, Split::Test)?;
        Ok((vocab, train_corpus, test_corpus))
    }
}

/// Vectorizes every document, excluding (with a warning) those left empty.
pub fn vectorize_docs(docs: &[TokenizedDoc], vocab: &Vocabulary, split: Split) -> Result<Corpus> {
    let mut out_docs = Vec::with_capacity(docs.len());
    let mut labels = Vec::with_capacity(docs.len());
    for d in docs {
        match vectorize(&d.tokens, vocab) {
            Some(counts) => {
                out_docs.push(Document::new(d.id.clone(), counts));
                labels.push(d.label.clone());
            }
            None => warn!(
                "excluding {} document '{}': no in-vocabulary words",
                split.name(),
                d.id
            ),
        }
    }
    Corpus::new(split, vocab.len(), vocab.fingerprint(), out_docs, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn vocabulary_ids_sorted() {
        let v = build_vocabulary(&[toks("b a"), toks("c b")], 1).unwrap();
        assert_eq!(v.len(), 3);
        assert!(v.id("a") < v.id("b") && v.id("b") < v.id("c"));
        let v2 = build_vocabulary(&[toks("b a"), toks("c b")], 2).unwrap();
        assert_eq!(v2.terms(), &["b".to_string()]);
        assert_eq!(
            v.fingerprint(),
            build_vocabulary(&[toks("c b"), toks("a b")], 1)
                .unwrap()
                .fingerprint()
        );
        assert!(matches!(
            build_vocabulary(&[toks("a")], 2),
            Err(Error::Data(_))
        ));
        assert!(build_vocabulary(&[toks("a")], 0).is_err());
    }

    #[test]
    fn vectorize_drops_oov() {
        let v = build_vocabulary(&[toks("god faith reason")], 1).unwrap();
        let c = vectorize(&toks("god god faith"), &v).unwrap();
        assert_eq!(c.total(), 3);
        let c = vectorize(&toks("god unseen words faith"), &v).unwrap();
        assert_eq!(c.total(), 2);
        assert!(vectorize(&toks("nothing known"), &v).is_none());
    }

    #[test]
    fn empty_documents_are_excluded() {
        let v = build_vocabulary(&[toks("alpha beta")], 1).unwrap();
        let docs = vec![
            TokenizedDoc {
                id: "1".into(),
                label: "x".into(),
                tokens: toks("alpha"),
            },
            TokenizedDoc {
                id: "2".into(),
                label: "y".into(),
                tokens: toks("gamma"),
            },
        ];
        let c = vectorize_docs(&docs, &v, Split::Test).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.docs[0].id, "1");
    }

    #[test]
    fn corpus_file_round_trip() {
        let pipeline = TextPipeline::default();
        let raw = vec![
            RawDoc {
                id: "a/1".into(),
                label: "a".into(),
                text: "Faith and reason, reason again".into(),
            },
            RawDoc {
                id: "b/1".into(),
                label: "b".into(),
                text: "Prayer, ritual and faith".into(),
            },
        ];
        let toks = pipeline.tokenize_docs(&raw);
        let (vocab, train, _) = pipeline.prepare(&toks, &[]).unwrap();
        assert_eq!(vocab.terms(), &["faith", "prayer", "reason", "ritual"]);
        let mut buf = Vec::new();
        train.write(&mut buf).unwrap();
        let back = Corpus::read(&buf[..]).unwrap();
        assert_eq!(back, train);
        assert_eq!(back.fingerprint(), train.fingerprint());
        let mut vbuf = Vec::new();
        vocab.write(&mut vbuf).unwrap();
        assert_eq!(Vocabulary::read(&vbuf[..]).unwrap(), vocab);
    }
}
