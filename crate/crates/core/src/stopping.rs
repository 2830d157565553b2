//! Entropy-gated stopping and the refocusing loop.
//!
//! The loop, per reasoning step `k`:
//! 1. the adapter produces the text embeddings `z_k` of the step it just generated;
//! 2. a coreset of visual tokens is selected against `z_k` and appended with
//!    `z_k` to the trace;
//! 3. the adapter reports the answer distribution given the trace, and the loop
//!    stops once its entropy drops strictly below `delta_entropy` or `k` reaches
//!    `k_max`.
//!
//! After stopping, the adapter is asked for the final answer.

use std::collections::BTreeMap;

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::kernel::{KernelFactor, KernelOptions};
use crate::scalar::{compensated_sum, Scalar};
use crate::select::{select, Budget, Selection, SelectionConfig};

pub const DEFAULT_DELTA_ENTROPY: f64 = 0.25;
pub const DEFAULT_K_MAX: usize = 10;

/// Allowed deviation of a distribution's total mass from 1.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistributionSource {
    Exact,
    Empirical { samples: usize },
}

/// Probabilities over opaque answer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct AnswerDistribution<T> {
    entries: BTreeMap<String, T>,
    source: DistributionSource,
}

impl<T: Scalar> AnswerDistribution<T> {
    pub fn new<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
    {
        let mut map = BTreeMap::new();
        for (label, p) in entries {
            let label = label.into();
            if !p.is_finite() || p < T::zero() {
                return Err(Error::InvalidDistribution(format!("probability {p} for {label:?}")));
            }
            if map.insert(label.clone(), p).is_some() {
                return Err(Error::InvalidDistribution(format!("duplicate label {label:?}")));
            }
        }
        let total = compensated_sum(map.values().copied());
        if (total - T::one()).abs() > T::of(PROBABILITY_SUM_TOLERANCE) {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
        }
        Ok(Self {
            entries: map,
            source: DistributionSource::Exact,
        })
    }

    /// Plug-in distribution from sampled answer labels.
    pub fn from_samples<I, S>(samples: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        let mut total = 0usize;
        for s in samples {
            *counts.entry(s.as_ref().to_owned()).or_default() += 1;
            total += 1;
        }
        if total == 0 {
            return Err(Error::InvalidDistribution("no samples".into()));
        }
        let denom = T::from_usize(total).unwrap();
        let entries = counts
            .into_iter()
            .map(|(label, c)| (label, T::from_usize(c).unwrap() / denom))
            .collect();
        Ok(Self {
            entries,
            source: DistributionSource::Empirical { samples: total },
        })
    }

    pub fn entries(&self) -> &BTreeMap<String, T> {
        &self.entries
    }

    pub fn source(&self) -> DistributionSource {
        self.source
    }

    /// Label with the highest probability; lexicographically first on ties.
    pub fn mode(&self) -> Option<&str> {
        let mut best: Option<(&str, T)> = None;
        for (label, &p) in &self.entries {
            if best.is_none_or(|(_, bp)| p > bp) {
                best = Some((label, p));
            }
        }
        best.map(|(l, _)| l)
    }
}

/// Shannon entropy in nats; zero-probability entries contribute nothing.
pub fn shannon_entropy<T: Scalar>(dist: &AnswerDistribution<T>) -> T {
    let h = -compensated_sum(
        dist.entries
            .values()
            .filter(|&&p| p > T::zero())
            .map(|&p| p * p.ln()),
    );
    h.max(T::zero())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingPolicy {
    /// Entropy threshold in nats.
    pub delta_entropy: f64,
    pub k_max: usize,
}

impl Default for StoppingPolicy {
    fn default() -> Self {
        Self {
            delta_entropy: DEFAULT_DELTA_ENTROPY,
            k_max: DEFAULT_K_MAX,
        }
    }
}

impl StoppingPolicy {
    pub fn new(delta_entropy: f64, k_max: usize) -> Result<Self> {
        if !(delta_entropy.is_finite() && delta_entropy >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "delta_entropy must be finite and nonnegative, got {delta_entropy}"
            )));
        }
        if k_max == 0 {
            return Err(Error::InvalidParameter("k_max must be at least 1".into()));
        }
        Ok(Self { delta_entropy, k_max })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    EntropyConverged,
    StepCap,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::EntropyConverged => "entropy_converged",
            StopReason::StepCap => "step_cap",
        }
    }
}

/// Stop verdict after step `k` (1-based) with entropy `h`.
pub fn should_stop<T: Scalar>(h: T, policy: &StoppingPolicy, k: usize) -> Option<StopReason> {
    if h < T::of(policy.delta_entropy) {
        Some(StopReason::EntropyConverged)
    } else if k >= policy.k_max {
        Some(StopReason::StepCap)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Continue,
    Stop(StopReason),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDecision<T> {
    /// 1-based step index `k`.
    pub step_index: usize,
    pub entropy: T,
    pub selected: Vec<usize>,
    pub verdict: Verdict,
}

/// One `(z_k, Ṽ_k)` pair of the trajectory plus the entropy observed after it.
#[derive(Debug, Clone)]
pub struct TraceStep<T> {
    pub text: EmbeddingMatrix<T>,
    pub selection: Selection<T>,
    pub entropy: Option<T>,
}

#[derive(Debug, Clone, Default)]
pub struct TraceRecord<T> {
    pub steps: Vec<TraceStep<T>>,
}

impl<T> TraceRecord<T> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// What the adapter reports about the answer after a step.
#[derive(Debug, Clone, PartialEq)]
pub enum AnswerSignal<T> {
    Distribution(AnswerDistribution<T>),
    /// Entropy computed by the adapter itself, e.g. from a recorded run.
    Entropy(T),
}

impl<T: Scalar> AnswerSignal<T> {
    pub fn entropy(&self) -> T {
        match self {
            AnswerSignal::Distribution(d) => shannon_entropy(d),
            AnswerSignal::Entropy(h) => *h,
        }
    }
}

pub type AdapterError = Box<dyn std::error::Error + Send + Sync>;

/// Caller-side model hooks driven by [`run_refocus_loop`].
///
/// The loop never looks inside the model; everything it needs comes through
/// these three calls, each given the trace so far.
pub trait ModelAdapter<T: Scalar> {
    /// Generates the next reasoning step and returns its text token embeddings.
    fn next_step(&mut self, trace: &TraceRecord<T>) -> Result<EmbeddingMatrix<T>, AdapterError>;

    /// Answer distribution (or its entropy) given the trace including the latest step.
    fn answer_signal(&mut self, trace: &TraceRecord<T>) -> Result<AnswerSignal<T>, AdapterError>;

    /// Final answer once the loop has stopped.
    fn final_answer(&mut self, trace: &TraceRecord<T>) -> Result<String, AdapterError>;
}

/// Step-by-step state machine behind [`run_refocus_loop`], for callers that
/// drive the model themselves.
#[derive(Debug)]
pub struct RefocusController<'v, T> {
    visual: &'v EmbeddingMatrix<T>,
    policy: StoppingPolicy,
    selection: SelectionConfig,
    kernel: KernelOptions,
    trace: TraceRecord<T>,
    stopped: Option<StopReason>,
}

impl<'v, T: Scalar> RefocusController<'v, T> {
    /// Resolves the per-step budget once, since the visual token set is fixed.
    pub fn new(
        visual: &'v EmbeddingMatrix<T>,
        policy: StoppingPolicy,
        selection: SelectionConfig,
        kernel: KernelOptions,
    ) -> Result<Self> {
        let policy = StoppingPolicy::new(policy.delta_entropy, policy.k_max)?;
        let m = selection.budget.resolve(visual.rows())?;
        Ok(Self {
            visual,
            policy,
            selection: SelectionConfig {
                budget: Budget::Count(m),
                ..selection
            },
            kernel,
            trace: TraceRecord { steps: Vec::new() },
            stopped: None,
        })
    }

    pub fn trace(&self) -> &TraceRecord<T> {
        &self.trace
    }

    pub fn into_trace(self) -> TraceRecord<T> {
        self.trace
    }

    pub fn stopped(&self) -> Option<StopReason> {
        self.stopped
    }

    pub fn budget(&self) -> usize {
        match self.selection.budget {
            Budget::Count(m) => m,
            Budget::Fraction(_) => unreachable!("budget resolved at construction"),
        }
    }

    /// Selects visual tokens for the new step's text embeddings and appends the pair.
    pub fn refocus(&mut self, text: EmbeddingMatrix<T>) -> Result<&Selection<T>> {
        if let Some(reason) = self.stopped {
            return Err(Error::InvalidParameter(format!(
                "loop already stopped ({})",
                reason.as_str()
            )));
        }
        if self.trace.steps.last().is_some_and(|s| s.entropy.is_none()) {
            return Err(Error::InvalidParameter("previous step has not been assessed".into()));
        }
        let kernel = KernelFactor::build_with(self.visual, &text, &self.kernel)?;
        let selection = select(&kernel, &self.selection)?;
        self.trace.steps.push(TraceStep {
            text,
            selection,
            entropy: None,
        });
        Ok(&self.trace.steps.last().unwrap().selection)
    }

    /// Records the entropy for the latest step and decides whether to stop.
    pub fn assess(&mut self, signal: &AnswerSignal<T>) -> Result<StepDecision<T>> {
        let k = self.trace.len();
        let step = match self.trace.steps.last_mut() {
            Some(s) if s.entropy.is_none() => s,
            _ => return Err(Error::InvalidParameter("no pending step to assess".into())),
        };
        let h = signal.entropy();
        step.entropy = Some(h);
        let verdict = match should_stop(h, &self.policy, k) {
            Some(reason) => {
                self.stopped = Some(reason);
                Verdict::Stop(reason)
            }
            None => Verdict::Continue,
        };
        Ok(StepDecision {
            step_index: k,
            entropy: h,
            selected: step.selection.indices.clone(),
            verdict,
        })
    }
}

#[derive(Debug, Clone)]
pub struct RefocusOutcome<T> {
    pub trace: TraceRecord<T>,
    pub decisions: Vec<StepDecision<T>>,
    pub stop_reason: StopReason,
    pub answer: String,
}

impl<T> RefocusOutcome<T> {
    pub fn stop_step(&self) -> usize {
        self.decisions.len()
    }
}

/// Loop failure carrying the trace accumulated before the error.
#[derive(Debug, thiserror::Error)]
#[error("refocusing loop aborted after {} step(s): {error}", .trace.len())]
pub struct LoopFailure<T: std::fmt::Debug> {
    pub trace: TraceRecord<T>,
    #[source]
    pub error: Error,
}

/// Runs the full loop against `adapter` until the stopping rule fires.
pub fn run_refocus_loop<T: Scalar, A: ModelAdapter<T> + ?Sized>(
    adapter: &mut A,
    visual: &EmbeddingMatrix<T>,
    policy: StoppingPolicy,
    selection: SelectionConfig,
    kernel: KernelOptions,
) -> Result<RefocusOutcome<T>, LoopFailure<T>> {
    let mut ctl = match RefocusController::new(visual, policy, selection, kernel) {
        Ok(c) => c,
        Err(error) => {
            return Err(LoopFailure {
                trace: TraceRecord::default(),
                error,
            })
        }
    };
    let mut decisions = Vec::new();
    let outcome = (|| -> Result<StopReason> {
        loop {
            let text = adapter.next_step(ctl.trace()).map_err(Error::Adapter)?;
            ctl.refocus(text)?;
            let signal = adapter.answer_signal(ctl.trace()).map_err(Error::Adapter)?;
            let decision = ctl.assess(&signal)?;
            let verdict = decision.verdict;
            decisions.push(decision);
            if let Verdict::Stop(reason) = verdict {
                return Ok(reason);
            }
        }
    })();
    let stop_reason = match outcome {
        Ok(r) => r,
        Err(error) => {
            return Err(LoopFailure {
                trace: ctl.into_trace(),
                error,
            })
        }
    };
    match adapter.final_answer(ctl.trace()) {
        Ok(answer) => Ok(RefocusOutcome {
            trace: ctl.into_trace(),
            decisions,
            stop_reason,
            answer,
        }),
        Err(e) => Err(LoopFailure {
            trace: ctl.into_trace(),
            error: Error::Adapter(e),
        }),
    }
}
