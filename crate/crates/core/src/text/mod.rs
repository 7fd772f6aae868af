//! Raw text to count vectors: header handling, tokenization, stopword
//! removal, training-split vocabulary and out-of-vocabulary dropping.

mod corpus;
mod tokenize;

pub use corpus::{
    build_vocabulary, load_class_dirs, load_raw, load_tsv, vectorize, vectorize_docs, Corpus,
    RawDoc, Split, TextPipeline, TokenizedDoc, Vocabulary,
};
pub use tokenize::{remove_stopwords, strip_headers, tokenize, HeaderMode, Stoplist};
