//! Command-line surface. The binary is a thin wrapper around [`run`].

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use crate::aggregate::{admit_chains, majority_vote};
use crate::error::{Error, Result};
use crate::io::docs::{DistributionDoc, OutcomesDoc, PolicyDoc};
use crate::io::emb::read_emb1_as;
use crate::io::replay::ReplayAdapter;
use crate::io::report::{
    DecomposeReport, EntropyReport, ReplayReport, ReplayStepReport, SelectReport, VoteReport,
    ENTROPY_REPORT_SCHEMA, REPLAY_REPORT_SCHEMA,
};
use crate::kernel::{KernelFactor, KernelOptions, DEFAULT_JITTER_SCALE};
use crate::select::{exact_select, select, Budget, SelectionConfig, Strategy, DEFAULT_BUDGET_FRACTION};
use crate::stopping::{
    run_refocus_loop, shannon_entropy, should_stop, StoppingPolicy, DEFAULT_DELTA_ENTROPY, DEFAULT_K_MAX,
};
use crate::EmbeddingMatrix;

/// Tolerance when comparing replayed entropies with recorded ones.
const REPLAY_ENTROPY_TOL: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(name = "refocus", version, about = "Visual token coreset selection and reasoning-loop control")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Dpp,
    Relevance,
    Random,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Dpp => Strategy::DppGreedy,
            StrategyArg::Relevance => Strategy::RelevanceOnly,
            StrategyArg::Random => Strategy::Random,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select a coreset of visual tokens for one set of text embeddings.
    Select {
        #[arg(long)]
        visual: PathBuf,
        #[arg(long)]
        text: PathBuf,
        #[arg(long, conflicts_with = "budget_frac")]
        budget: Option<usize>,
        #[arg(long)]
        budget_frac: Option<f64>,
        #[arg(long, value_enum, default_value = "dpp")]
        strategy: StrategyArg,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        #[arg(long, default_value_t = DEFAULT_JITTER_SCALE)]
        jitter: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Unit-normalize visual and text rows first.
        #[arg(long)]
        normalize: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split a subset log-determinant into relevance and diversity terms.
    Decompose {
        #[arg(long)]
        visual: PathBuf,
        #[arg(long)]
        text: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        subset: Vec<usize>,
        #[arg(long, default_value_t = DEFAULT_JITTER_SCALE)]
        jitter: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Entropy of an answer distribution and the resulting stop verdict.
    Entropy {
        #[arg(long)]
        dist: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DELTA_ENTROPY)]
        delta: f64,
        /// 1-based step index the distribution belongs to.
        #[arg(long, default_value_t = 1)]
        step: usize,
        #[arg(long, default_value_t = DEFAULT_K_MAX)]
        k_max: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Majority vote over chain outcomes, optionally under a token budget.
    Vote {
        #[arg(long)]
        outcomes: PathBuf,
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay a recorded trace through the refocusing loop and check where it stops.
    LoopReplay {
        #[arg(long)]
        trace_dir: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive best subset (small instances only).
    Oracle {
        #[arg(long)]
        visual: PathBuf,
        #[arg(long)]
        text: PathBuf,
        #[arg(long)]
        budget: usize,
        #[arg(long, default_value_t = DEFAULT_JITTER_SCALE)]
        jitter: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Result of a command: the JSON document and where it should go.
#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub json: String,
    pub out: Option<PathBuf>,
    /// Set when the command ran but a check it performs did not hold.
    pub failed_check: Option<String>,
}

fn to_json<S: serde::Serialize>(doc: &S) -> Result<String> {
    let mut s = serde_json::to_string_pretty(doc).map_err(|e| Error::Malformed(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn load_pair(visual: &PathBuf, text: &PathBuf) -> Result<(EmbeddingMatrix<f64>, EmbeddingMatrix<f64>)> {
    Ok((read_emb1_as(visual)?, read_emb1_as(text)?))
}

pub fn run(cli: Cli) -> Result<CommandOutput> {
    match cli.command {
        Command::Select {
            visual,
            text,
            budget,
            budget_frac,
            strategy,
            lambda,
            jitter,
            seed,
            normalize,
            out,
        } => {
            let (v, z) = load_pair(&visual, &text)?;
            let options = KernelOptions {
                jitter_scale: jitter,
                normalize,
            };
            let cfg = SelectionConfig {
                budget: match budget {
                    Some(m) => Budget::Count(m),
                    None => Budget::Fraction(budget_frac.unwrap_or(DEFAULT_BUDGET_FRACTION)),
                },
                strategy: strategy.into(),
                lambda,
                seed,
            };
            let start = Instant::now();
            let kernel = KernelFactor::build_with(&v, &z, &options)?;
            let sel = select(&kernel, &cfg)?;
            let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
            let report = SelectReport::new(&kernel, &sel, jitter, elapsed_ms);
            Ok(CommandOutput {
                json: to_json(&report)?,
                out: Some(out),
                failed_check: None,
            })
        }
        Command::Decompose {
            visual,
            text,
            subset,
            jitter,
            out,
        } => {
            let (v, z) = load_pair(&visual, &text)?;
            let kernel = KernelFactor::build(&v, &z, jitter)?;
            let rep = kernel.decompose(&subset)?;
            Ok(CommandOutput {
                json: to_json(&DecomposeReport::new(&subset, kernel.jitter(), &rep))?,
                out,
                failed_check: None,
            })
        }
        Command::Entropy {
            dist,
            delta,
            step,
            k_max,
            out,
        } => {
            let policy = StoppingPolicy::new(delta, k_max)?;
            if step == 0 {
                return Err(Error::InvalidParameter("step is 1-based".into()));
            }
            let d = DistributionDoc::load(&dist)?.to_distribution()?;
            let h = shannon_entropy(&d);
            let reason = should_stop(h, &policy, step);
            let report = EntropyReport {
                schema_id: ENTROPY_REPORT_SCHEMA.into(),
                entropy: h,
                delta_entropy: delta,
                step,
                k_max,
                verdict: if reason.is_some() { "stop" } else { "continue" }.into(),
                reason: reason.map(|r| r.as_str().into()),
            };
            Ok(CommandOutput {
                json: to_json(&report)?,
                out,
                failed_check: None,
            })
        }
        Command::Vote { outcomes, budget, out } => {
            let all = OutcomesDoc::load(&outcomes)?.to_outcomes();
            let admitted = match budget {
                Some(b) => admit_chains(&all, b),
                None => &all[..],
            };
            if admitted.is_empty() {
                return Err(Error::InfeasibleBudget {
                    requested: all.first().map_or(0, |o| o.tokens_used as usize),
                    available: budget.unwrap_or(0) as usize,
                });
            }
            let vote = majority_vote(admitted)?;
            Ok(CommandOutput {
                json: to_json(&VoteReport::new(&vote, budget))?,
                out,
                failed_check: None,
            })
        }
        Command::LoopReplay { trace_dir, policy, out } => {
            let policy = PolicyDoc::load(&policy)?;
            let mut adapter = ReplayAdapter::load(&trace_dir)?;
            let visual = adapter.visual.clone();
            let recorded = adapter.steps.clone();
            let outcome = run_refocus_loop(
                &mut adapter,
                &visual,
                policy.stopping()?,
                policy.selection()?,
                policy.kernel(),
            )
            .map_err(|f| f.error)?;

            let steps: Vec<ReplayStepReport> = outcome
                .decisions
                .iter()
                .zip(&recorded)
                .map(|(d, r)| ReplayStepReport {
                    step: d.step_index,
                    entropy: d.entropy,
                    recorded_entropy: r.entropy,
                    selected: d.selected.clone(),
                    selection_matches: (!r.selected.is_empty()).then(|| r.selected == d.selected),
                })
                .collect();
            let report = ReplayReport {
                schema_id: REPLAY_REPORT_SCHEMA.into(),
                recorded_steps: recorded.len(),
                stop_step: outcome.stop_step(),
                stop_reason: outcome.stop_reason.as_str().into(),
                stop_step_matches: outcome.stop_step() == recorded.len(),
                entropies_match: steps
                    .iter()
                    .all(|s| (s.entropy - s.recorded_entropy).abs() <= REPLAY_ENTROPY_TOL),
                selections_match: steps.iter().all(|s| s.selection_matches != Some(false)),
                answer: outcome.answer,
                steps,
            };
            let failed_check = (!report.passed()).then(|| {
                format!(
                    "replay diverged from recording: stopped at step {} of {} (entropies match: {}, selections match: {})",
                    report.stop_step, report.recorded_steps, report.entropies_match, report.selections_match
                )
            });
            Ok(CommandOutput {
                json: to_json(&report)?,
                out,
                failed_check,
            })
        }
        Command::Oracle {
            visual,
            text,
            budget,
            jitter,
            out,
        } => {
            let (v, z) = load_pair(&visual, &text)?;
            let start = Instant::now();
            let kernel = KernelFactor::build(&v, &z, jitter)?;
            let sel = exact_select(&kernel, budget)?;
            let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
            Ok(CommandOutput {
                json: to_json(&SelectReport::new(&kernel, &sel, jitter, elapsed_ms))?,
                out,
                failed_check: None,
            })
        }
    }
}
