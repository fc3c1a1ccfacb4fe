//! Byte-pair-encoding tokenizer and keyword taxonomy.

mod bpe;
mod taxonomy;

pub use bpe::{pre_tokenize, train_bpe, BpeModel, BASE_ALPHABET};
pub use taxonomy::{classify_tokens, TaxonomyClass, TaxonomyTable};

#[derive(Debug, thiserror::Error)]
pub enum TokenizerError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("vocab_size {requested} too small, need at least {minimum}")]
    VocabTooSmall { requested: usize, minimum: usize },
    #[error("invalid tokenizer model: {0}")]
    InvalidModel(String),
    #[error("unknown token id {0}")]
    UnknownId(u32),
    #[error("decoded bytes are not valid UTF-8")]
    InvalidUtf8,
}
