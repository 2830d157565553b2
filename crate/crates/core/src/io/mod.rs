//! File formats: binary `EMB1` embeddings, JSON documents and reports.

pub mod docs;
pub mod emb;
pub mod replay;
pub mod report;

pub use docs::{DistributionDoc, OutcomesDoc, PolicyDoc, TraceDoc, TraceStepDoc};
pub use emb::{decode_emb1, encode_emb1, read_emb1, read_emb1_as, write_emb1};
pub use replay::ReplayAdapter;
