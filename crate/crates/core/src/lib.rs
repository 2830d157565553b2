//! Relevance- and diversity-aware visual token selection for multimodal
//! reasoning loops.
//!
//! Given visual token embeddings and the text embeddings of the current
//! reasoning step, the crate builds a text-conditioned DPP kernel over the
//! visual tokens and selects a small coreset by greedy MAP inference
//! ([`select`]). Around that it provides the entropy-gated loop controller
//! ([`stopping`]), budgeted majority voting across parallel chains
//! ([`aggregate`]) and the file formats used by the `refocus` CLI ([`io`]).
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*64` and
//! `*32` aliases below name the common instantiations.

pub mod aggregate;
pub mod cli;
pub mod embedding;
pub mod error;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod scalar;
pub mod select;
pub mod stopping;

pub use aggregate::{admit_chains, majority_vote, vote_within_budget, ChainOutcome, VoteResult};
pub use embedding::EmbeddingMatrix;
pub use error::{Error, Result};
pub use kernel::{
    build_kernel_factor, decompose, logdet_subset, relevance_scores, DecompositionReport, KernelFactor,
    KernelOptions, SubspaceOperator,
};
pub use scalar::Scalar;
pub use select::{
    exact_select, greedy_select, random_select, relevance_only_select, select, Budget, GreedyDpp, Selection,
    SelectionConfig, Strategy,
};
pub use stopping::{
    run_refocus_loop, shannon_entropy, should_stop, AnswerDistribution, AnswerSignal, ModelAdapter,
    RefocusController, RefocusOutcome, StepDecision, StopReason, StoppingPolicy, TraceRecord, Verdict,
};

pub type Embeddings64 = EmbeddingMatrix<f64>;
pub type Embeddings32 = EmbeddingMatrix<f32>;
pub type KernelFactor64 = KernelFactor<f64>;
pub type KernelFactor32 = KernelFactor<f32>;
pub type Selection64 = Selection<f64>;
pub type Selection32 = Selection<f32>;
pub type Decomposition64 = DecompositionReport<f64>;
pub type AnswerDistribution64 = AnswerDistribution<f64>;
