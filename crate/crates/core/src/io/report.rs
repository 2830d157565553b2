//! JSON reports emitted by the command-line tool.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::aggregate::VoteResult;
use crate::kernel::{DecompositionReport, KernelFactor};
use crate::select::{Budget, Selection};

pub const SELECT_REPORT_SCHEMA: &str = "visref-select-report/1";
pub const DECOMPOSE_REPORT_SCHEMA: &str = "visref-decompose-report/1";
pub const ENTROPY_REPORT_SCHEMA: &str = "visref-entropy-report/1";
pub const VOTE_REPORT_SCHEMA: &str = "visref-vote-report/1";
pub const REPLAY_REPORT_SCHEMA: &str = "visref-replay-report/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectReport {
    pub schema_id: String,
    pub strategy: String,
    pub tokens: usize,
    pub budget: usize,
    pub lambda: f64,
    pub jitter_scale: f64,
    pub jitter: f64,
    pub seed: u64,
    pub indices: Vec<usize>,
    pub gains: Vec<f64>,
    pub total_logdet: f64,
    pub degenerate: bool,
    pub degenerate_from: Option<usize>,
    pub elapsed_ms: f64,
}

impl SelectReport {
    pub fn new(kernel: &KernelFactor<f64>, sel: &Selection<f64>, jitter_scale: f64, elapsed_ms: f64) -> Self {
        let budget = match sel.config.budget {
            Budget::Count(m) => m,
            Budget::Fraction(_) => sel.indices.len(),
        };
        Self {
            schema_id: SELECT_REPORT_SCHEMA.into(),
            strategy: sel.config.strategy.as_str().into(),
            tokens: kernel.n(),
            budget,
            lambda: sel.config.lambda,
            jitter_scale,
            jitter: kernel.jitter(),
            seed: sel.config.seed,
            indices: sel.indices.clone(),
            gains: sel.gains.clone(),
            total_logdet: sel.total_logdet,
            degenerate: sel.degenerate_from.is_some(),
            degenerate_from: sel.degenerate_from,
            elapsed_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecomposeReport {
    pub schema_id: String,
    pub subset: Vec<usize>,
    pub jitter: f64,
    pub relevance_sum: f64,
    pub diversity_logdet: f64,
    pub total_logdet: f64,
    pub residual: f64,
    pub relative_residual: f64,
    pub degenerate: bool,
}

impl DecomposeReport {
    pub fn new(subset: &[usize], jitter: f64, rep: &DecompositionReport<f64>) -> Self {
        Self {
            schema_id: DECOMPOSE_REPORT_SCHEMA.into(),
            subset: subset.to_vec(),
            jitter,
            relevance_sum: rep.relevance_sum,
            diversity_logdet: rep.diversity_logdet,
            total_logdet: rep.total_logdet,
            residual: rep.residual,
            relative_residual: rep.relative_residual(),
            degenerate: rep.degenerate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub schema_id: String,
    pub entropy: f64,
    pub delta_entropy: f64,
    pub step: usize,
    pub k_max: usize,
    /// `stop` or `continue`.
    pub verdict: String,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteReport {
    pub schema_id: String,
    pub winner: String,
    pub counts: BTreeMap<String, usize>,
    pub admitted_chains: usize,
    pub budget_used: u64,
    pub budget: Option<u64>,
    pub tie: bool,
}

impl VoteReport {
    pub fn new(v: &VoteResult, budget: Option<u64>) -> Self {
        Self {
            schema_id: VOTE_REPORT_SCHEMA.into(),
            winner: v.winner.clone(),
            counts: v.counts.clone(),
            admitted_chains: v.admitted_chains,
            budget_used: v.budget_used,
            budget,
            tie: v.tie,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayStepReport {
    pub step: usize,
    pub entropy: f64,
    pub recorded_entropy: f64,
    pub selected: Vec<usize>,
    /// `None` when the recording holds no indices for this step.
    pub selection_matches: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub schema_id: String,
    pub recorded_steps: usize,
    pub stop_step: usize,
    pub stop_reason: String,
    pub stop_step_matches: bool,
    pub entropies_match: bool,
    pub selections_match: bool,
    pub answer: String,
    pub steps: Vec<ReplayStepReport>,
}

impl ReplayReport {
    pub fn passed(&self) -> bool {
        self.stop_step_matches && self.entropies_match && self.selections_match
    }
}
