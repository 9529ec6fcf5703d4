//! Corpus generation and the verification runs built on it.

pub mod corpus;
pub mod frozen;
pub mod hardy;
pub mod operators;
pub mod verify;

pub use corpus::{checkerboard, generate_corpus, Corpus, CorpusSpec, GeneratorKind};
pub use frozen::{FreezeMode, FrozenConstants};
pub use hardy::{hardy_suite, verify_hardy, HardyParams, HardyVariant, StepG};
pub use operators::OperatorSpec;
pub use verify::{
    lemma_taus, refinement_drift, scaling_drift, verify_cancellation, verify_corollary, verify_embedding, verify_lemmas, verify_morrey,
    verify_theorem1, verify_theorem2, CorollaryParams,
};
