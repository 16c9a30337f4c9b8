//! Prompt embeddings, per-user memory, exact cosine retrieval and index files.

mod embed;
mod memory;
mod store;

pub use embed::{dot, norm, normalize, Embedder, EmbedderKind, EmbedderSpec, HashingEmbedder};
pub use memory::{AppendOutcome, IndexEntry, RetrievalResult, UserMemory, NORM_TOLERANCE};
pub use store::{load_memory, read_memory, save_memory, write_memory, INDEX_FORMAT, INDEX_VERSION};

pub(crate) use embed::words;

use crate::attribute::AttributeLibrary;
use crate::backend::BackendError;

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("user memory is empty")]
    EmptyMemory,
    #[error("embedding dimension mismatch: memory uses {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("query embedding has zero norm")]
    ZeroQuery,
    #[error("invalid index entry: {0}")]
    InvalidEntry(String),
    #[error("corrupt index at line {line}: {reason}")]
    CorruptIndex { line: usize, reason: String },
    #[error("index was built against a different attribute library")]
    LibraryMismatch,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

impl UserMemory {
    /// Confirms the memory was built for `library` and only references its ids.
    pub fn check_library(&self, library: &AttributeLibrary) -> Result<(), RetrievalError> {
        if let Some(hash) = &self.library_hash {
            if *hash != library.content_hash() {
                return Err(RetrievalError::LibraryMismatch);
            }
        }
        for e in self.entries() {
            if let Some(id) = e.subset.members.iter().find(|id| !library.contains(**id)) {
                return Err(RetrievalError::InvalidEntry(format!(
                    "prompt {:?} references unknown attribute {id}",
                    e.prompt
                )));
            }
        }
        Ok(())
    }
}
