//! Parallel-chain aggregation under a total thinking-token budget.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};

/// Final answer and token usage of one reasoning chain.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChainOutcome {
    pub chain_id: u64,
    /// Compared as an exact opaque string.
    pub answer: String,
    pub tokens_used: u64,
}

impl ChainOutcome {
    pub fn new(chain_id: u64, answer: impl Into<String>, tokens_used: u64) -> Self {
        Self {
            chain_id,
            answer: answer.into(),
            tokens_used,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteResult {
    pub winner: String,
    pub counts: BTreeMap<String, usize>,
    pub admitted_chains: usize,
    pub budget_used: u64,
    /// Another answer shares the winner's count.
    pub tie: bool,
}

/// Longest generation-order prefix whose cumulative token usage fits in `budget`.
pub fn admit_chains(outcomes: &[ChainOutcome], budget: u64) -> &[ChainOutcome] {
    let mut used: u64 = 0;
    let mut admitted = 0;
    for o in outcomes {
        match used.checked_add(o.tokens_used) {
            Some(total) if total <= budget => {
                used = total;
                admitted += 1;
            }
            _ => break,
        }
    }
    &outcomes[..admitted]
}

/// Majority vote over every outcome.
///
/// Ties go to the answer whose earliest supporting chain has the smallest id.
pub fn majority_vote(outcomes: &[ChainOutcome]) -> Result<VoteResult> {
    if outcomes.is_empty() {
        return Err(Error::InvalidParameter("majority vote needs at least one outcome".into()));
    }
    // answer -> (count, earliest chain id)
    let mut tally: HashMap<&str, (usize, u64)> = HashMap::new();
    let mut budget_used: u64 = 0;
    for o in outcomes {
        let entry = tally.entry(o.answer.as_str()).or_insert((0, o.chain_id));
        entry.0 += 1;
        entry.1 = entry.1.min(o.chain_id);
        budget_used = budget_used.saturating_add(o.tokens_used);
    }
    let top = tally.values().map(|&(c, _)| c).max().unwrap();
    let leaders: Vec<(&str, u64)> = tally
        .iter()
        .filter(|(_, &(c, _))| c == top)
        .map(|(&a, &(_, first))| (a, first))
        .collect();
    let (winner, _) = leaders
        .iter()
        .min_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(b.0)))
        .copied()
        .unwrap();
    Ok(VoteResult {
        winner: winner.to_owned(),
        counts: tally.iter().map(|(&a, &(c, _))| (a.to_owned(), c)).collect(),
        admitted_chains: outcomes.len(),
        budget_used,
        tie: leaders.len() > 1,
    })
}

/// Admits chains under `budget`, then votes among them.
pub fn vote_within_budget(outcomes: &[ChainOutcome], budget: u64) -> Result<VoteResult> {
    let admitted = admit_chains(outcomes, budget);
    if admitted.is_empty() {
        return Err(Error::InfeasibleBudget {
            requested: outcomes.first().map_or(0, |o| o.tokens_used as usize),
            available: budget as usize,
        });
    }
    majority_vote(admitted)
}
