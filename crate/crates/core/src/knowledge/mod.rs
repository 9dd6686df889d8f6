//! Local help documents: loading, chunking, indexing and lexical retrieval.

mod base;
mod chunk;
mod corpus;
mod index;

pub use base::{KnowledgeBase, DEFAULT_RETRIEVAL_K};
pub use chunk::{chunk_document, whitespace_tokens};
pub use corpus::{load_corpus, Category, Corpus, KnowledgeDoc};
pub use index::{
    build_index, score_terms, DocRef, Index, IndexParams, KnowledgeChunk, RetrievalResult, Retriever, ScoredChunk,
    INDEX_MAGIC,
};

use std::path::PathBuf;

/// Default chunk length in whitespace tokens.
pub const DEFAULT_CHUNK_SIZE: usize = 300;
/// Default overlap between consecutive chunks.
pub const DEFAULT_OVERLAP: usize = 50;

#[derive(Debug, thiserror::Error)]
pub enum KnowledgeError {
    #[error("corpus category directory '{0}' is missing")]
    MissingCategory(String),
    #[error("corpus at {0} contains no documents")]
    EmptyCorpus(PathBuf),
    #[error("unknown knowledge category '{0}'")]
    UnknownCategory(String),
    #[error("invalid index parameters: chunk_size {chunk_size} must exceed overlap {overlap}")]
    InvalidParams { chunk_size: usize, overlap: usize },
    #[error("retrieval count must be at least 1")]
    InvalidK,
    #[error("bad index file: {0}")]
    BadIndex(String),
    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
