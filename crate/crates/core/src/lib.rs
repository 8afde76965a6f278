//! Quantifies the stability of word/concept embeddings: trains multiple
//! independently seeded skip-gram spaces on one corpus, measures
//! nearest-neighbor overlap across them, and relates it to the normalized
//! entropy of each token's context-word distribution.

pub mod analysis;
pub mod corpus;
pub mod error;
pub mod manifest;
pub mod noisiness;
pub mod pipeline;
pub mod report;
pub mod sgns;
pub mod stability;
pub mod sweep;

pub use analysis::{CorrelationResult, Group, HeatmapGrid, JoinedRecord};
pub use corpus::{CorpusStats, Mode, TaggedSentence, Token, Vocabulary};
pub use error::{Error, Result};
pub use manifest::RunManifest;
pub use noisiness::ContextProfile;
pub use sgns::{EmbeddingSpace, Hyperparams, NegativeTable};
pub use stability::{NeighborList, StabilityRecord};
pub use sweep::{SweepConfig, SweepReport};
