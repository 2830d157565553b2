//! Versioned JSON documents: answer distributions, chain outcomes, loop
//! policies and recorded traces.
//!
//! Every document carries a `schema_id` and rejects unknown fields.
//!
//! ```json
//! {"schema_id": "visref-dist/1", "probabilities": {"A": 0.9, "B": 0.1}}
//! {"schema_id": "visref-dist/1", "samples": ["A", "A", "B"]}
//! {"schema_id": "visref-outcomes/1",
//!  "outcomes": [{"chain_id": 1, "answer": "A", "tokens_used": 400}]}
//! {"schema_id": "visref-policy/1", "delta_entropy": 0.25, "k_max": 10,
//!  "budget_frac": 0.3, "strategy": "dpp", "lambda": 0.5, "jitter": 1e-6}
//! {"schema_id": "visref-trace/1", "visual": "visual.emb",
//!  "steps": [{"text": "step1.emb", "selected": [4, 0], "entropy": 1.2}],
//!  "final_answer": "A"}
//! ```
//!
//! Trace paths are relative to the trace directory, whose main document is
//! `trace.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::aggregate::ChainOutcome;
use crate::error::{Error, Result};
use crate::kernel::{KernelOptions, DEFAULT_JITTER_SCALE};
use crate::select::{Budget, SelectionConfig, Strategy, DEFAULT_BUDGET_FRACTION};
use crate::stopping::{AnswerDistribution, StoppingPolicy, DEFAULT_DELTA_ENTROPY, DEFAULT_K_MAX};

pub const DIST_SCHEMA: &str = "visref-dist/1";
pub const OUTCOMES_SCHEMA: &str = "visref-outcomes/1";
pub const POLICY_SCHEMA: &str = "visref-policy/1";
pub const TRACE_SCHEMA: &str = "visref-trace/1";
pub const TRACE_FILE: &str = "trace.json";

fn check_schema(found: &str, expected: &str) -> Result<()> {
    if found != expected {
        return Err(Error::Malformed(format!(
            "schema_id {found:?}, expected {expected:?}"
        )));
    }
    Ok(())
}

fn read_json<D: DeserializeOwned>(path: &Path) -> Result<D> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))
}

fn write_json<S: Serialize>(path: &Path, doc: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(doc).map_err(|e| Error::Malformed(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionDoc {
    pub schema_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<String>>,
}

impl DistributionDoc {
    pub fn exact(probabilities: BTreeMap<String, f64>) -> Self {
        Self {
            schema_id: DIST_SCHEMA.into(),
            probabilities: Some(probabilities),
            samples: None,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let doc: Self = read_json(path.as_ref())?;
        check_schema(&doc.schema_id, DIST_SCHEMA)?;
        Ok(doc)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path.as_ref(), self)
    }

    pub fn to_distribution(&self) -> Result<AnswerDistribution<f64>> {
        match (&self.probabilities, &self.samples) {
            (Some(p), None) => AnswerDistribution::new(p.iter().map(|(k, &v)| (k.clone(), v))),
            (None, Some(s)) => AnswerDistribution::from_samples(s),
            _ => Err(Error::Malformed(
                "distribution needs exactly one of `probabilities` or `samples`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeEntry {
    pub chain_id: u64,
    pub answer: String,
    pub tokens_used: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomesDoc {
    pub schema_id: String,
    pub outcomes: Vec<OutcomeEntry>,
}

impl OutcomesDoc {
    pub fn new(outcomes: &[ChainOutcome]) -> Self {
        Self {
            schema_id: OUTCOMES_SCHEMA.into(),
            outcomes: outcomes
                .iter()
                .map(|o| OutcomeEntry {
                    chain_id: o.chain_id,
                    answer: o.answer.clone(),
                    tokens_used: o.tokens_used,
                })
                .collect(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let doc: Self = read_json(path.as_ref())?;
        check_schema(&doc.schema_id, OUTCOMES_SCHEMA)?;
        Ok(doc)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path.as_ref(), self)
    }

    pub fn to_outcomes(&self) -> Vec<ChainOutcome> {
        self.outcomes
            .iter()
            .map(|e| ChainOutcome::new(e.chain_id, e.answer.clone(), e.tokens_used))
            .collect()
    }
}

fn default_delta() -> f64 {
    DEFAULT_DELTA_ENTROPY
}
fn default_k_max() -> usize {
    DEFAULT_K_MAX
}
fn default_strategy() -> String {
    "dpp".into()
}
fn default_lambda() -> f64 {
    0.5
}
fn default_jitter() -> f64 {
    DEFAULT_JITTER_SCALE
}

/// Stopping policy plus per-step selection settings for the refocusing loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyDoc {
    pub schema_id: String,
    #[serde(default = "default_delta")]
    pub delta_entropy: f64,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_frac: Option<f64>,
    #[serde(default = "default_strategy")]
    pub strategy: String,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_jitter")]
    pub jitter: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub normalize: bool,
}

impl Default for PolicyDoc {
    fn default() -> Self {
        Self {
            schema_id: POLICY_SCHEMA.into(),
            delta_entropy: DEFAULT_DELTA_ENTROPY,
            k_max: DEFAULT_K_MAX,
            budget: None,
            budget_frac: None,
            strategy: default_strategy(),
            lambda: 0.5,
            jitter: DEFAULT_JITTER_SCALE,
            seed: 0,
            normalize: false,
        }
    }
}

pub fn parse_strategy(s: &str) -> Result<Strategy> {
    match s {
        "dpp" => Ok(Strategy::DppGreedy),
        "relevance" => Ok(Strategy::RelevanceOnly),
        "random" => Ok(Strategy::Random),
        other => Err(Error::Malformed(format!(
            "unknown strategy {other:?} (expected dpp, relevance or random)"
        ))),
    }
}

impl PolicyDoc {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let doc: Self = read_json(path.as_ref())?;
        check_schema(&doc.schema_id, POLICY_SCHEMA)?;
        Ok(doc)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path.as_ref(), self)
    }

    pub fn stopping(&self) -> Result<StoppingPolicy> {
        StoppingPolicy::new(self.delta_entropy, self.k_max)
    }

    pub fn selection(&self) -> Result<SelectionConfig> {
        let budget = match (self.budget, self.budget_frac) {
            (Some(_), Some(_)) => {
                return Err(Error::Malformed("policy sets both budget and budget_frac".into()))
            }
            (Some(m), None) => Budget::Count(m),
            (None, Some(f)) => Budget::Fraction(f),
            (None, None) => Budget::Fraction(DEFAULT_BUDGET_FRACTION),
        };
        Ok(SelectionConfig {
            budget,
            strategy: parse_strategy(&self.strategy)?,
            lambda: self.lambda,
            seed: self.seed,
        })
    }

    pub fn kernel(&self) -> KernelOptions {
        KernelOptions {
            jitter_scale: self.jitter,
            normalize: self.normalize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceStepDoc {
    /// `EMB1` file with the step's text token embeddings.
    pub text: String,
    /// Visual token indices chosen at this step in the recorded run; may be empty.
    #[serde(default)]
    pub selected: Vec<usize>,
    pub entropy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceDoc {
    pub schema_id: String,
    /// `EMB1` file with the visual token embeddings.
    pub visual: String,
    pub steps: Vec<TraceStepDoc>,
    pub final_answer: String,
}

impl TraceDoc {
    /// Loads `<dir>/trace.json`.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let doc: Self = read_json(&dir.as_ref().join(TRACE_FILE))?;
        check_schema(&doc.schema_id, TRACE_SCHEMA)?;
        Ok(doc)
    }

    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        write_json(&dir.as_ref().join(TRACE_FILE), self)
    }

    pub fn resolve(dir: impl AsRef<Path>, rel: &str) -> PathBuf {
        dir.as_ref().join(rel)
    }
}
