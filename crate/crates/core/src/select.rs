//! Coreset selection over a [`KernelFactor`].
//!
//! The main routine is greedy MAP inference for the DPP with kernel
//! `L + εI`. Each step picks the candidate maximizing
//!
//! ```text
//! g(v) = λ·log(r_v² + ε) + (1 − λ)·Δdiv(v | S)
//! ```
//!
//! where `Δdiv(v | S) = log d_v² − log(r_v² + ε)` is the increment of the
//! normalized-kernel log-determinant and `d_v²` is the conditional variance of
//! `v` given the current selection, so `log d_v²` is the det-ratio
//! `log det(L_{S∪v}) − log det(L_S)`. At `λ = 0.5` the gain is exactly half of
//! that det-ratio (same argmax as plain greedy on the log-determinant); at
//! `λ = 1` it reduces to relevance ranking.
//!
//! Conditional variances are maintained incrementally as in fast greedy MAP
//! inference: one orthogonalization column of length `N` per step, so a step
//! costs `O(N·(T + i))`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernel::KernelFactor;
use crate::linalg::{cholesky_log_pivots, degenerate_threshold};
use crate::scalar::{dot, Scalar};

/// Fraction of visual tokens reinjected per step when no explicit count is given.
pub const DEFAULT_BUDGET_FRACTION: f64 = 0.3;

/// Largest instance [`exact_select`] accepts.
pub const EXACT_MAX_TOKENS: usize = 20;
pub const EXACT_MAX_SUBSETS: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    DppGreedy,
    RelevanceOnly,
    Random,
    /// Exhaustive enumeration; produced only by [`exact_select`].
    Exhaustive,
}

impl Strategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::DppGreedy => "dpp",
            Strategy::RelevanceOnly => "relevance",
            Strategy::Random => "random",
            Strategy::Exhaustive => "exact",
        }
    }
}

/// Token budget: an explicit count, or a fraction of the visual token count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    Count(usize),
    Fraction(f64),
}

impl Budget {
    /// Resolves against `n` tokens. Fractions use `⌊f·n⌋`.
    pub fn resolve(&self, n: usize) -> Result<usize> {
        let m = match *self {
            Budget::Count(m) => m,
            Budget::Fraction(f) => {
                if !(f.is_finite() && f > 0.0 && f <= 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "budget fraction must be in (0, 1], got {f}"
                    )));
                }
                // 0.3 is not exact in binary; keep e.g. 0.3 * 30 from landing on 8.
                (f * n as f64 + 1e-9).floor() as usize
            }
        };
        if m == 0 || m > n {
            return Err(Error::InfeasibleBudget {
                requested: m,
                available: n,
            });
        }
        Ok(m)
    }
}

impl Default for Budget {
    fn default() -> Self {
        Budget::Fraction(DEFAULT_BUDGET_FRACTION)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionConfig {
    pub budget: Budget,
    pub strategy: Strategy,
    /// Relevance weight in `[0, 1]`; `DppGreedy` only.
    pub lambda: f64,
    /// `Random` only.
    pub seed: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            budget: Budget::default(),
            strategy: Strategy::DppGreedy,
            lambda: 0.5,
            seed: 0,
        }
    }
}

impl SelectionConfig {
    pub fn dpp(budget: usize) -> Self {
        Self {
            budget: Budget::Count(budget),
            ..Self::default()
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn check_lambda(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be in [0, 1], got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// Chosen tokens in selection order.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection<T> {
    pub indices: Vec<usize>,
    /// Per-step objective gains. For the DPP strategies these are the weighted
    /// greedy gains (half the det-ratio at `λ = 0.5`) or, for exhaustive search,
    /// the det-ratio increments along the returned order. For the baselines they
    /// are each token's own `log(r² + ε)`.
    pub gains: Vec<T>,
    /// `log det(L_S + εI)`.
    pub total_logdet: T,
    /// First step whose conditional variance was only jitter.
    pub degenerate_from: Option<usize>,
    /// Echo of the configuration, with the budget resolved to a count.
    pub config: SelectionConfig,
}

impl<T: Scalar> Selection<T> {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate_from.is_some()
    }
}

/// Runs the configured strategy.
pub fn select<T: Scalar>(k: &KernelFactor<T>, cfg: &SelectionConfig) -> Result<Selection<T>> {
    match cfg.strategy {
        Strategy::DppGreedy => greedy_select(k, cfg),
        Strategy::RelevanceOnly => relevance_only_select(k, cfg.budget.resolve(k.n())?),
        Strategy::Random => random_select(k, cfg.budget.resolve(k.n())?, cfg.seed),
        Strategy::Exhaustive => exact_select(k, cfg.budget.resolve(k.n())?),
    }
}

/// Incremental greedy state. Exposed so callers can inspect conditional
/// variances between steps; [`greedy_select`] drives it to completion.
#[derive(Debug, Clone)]
pub struct GreedyDpp<'k, T> {
    kernel: &'k KernelFactor<T>,
    relevance_weight: T,
    diversity_weight: T,
    floor: T,
    log_relevance: Vec<T>,
    cond_var: Vec<T>,
    /// One column per step: `columns[s][v]` is the `s`-th coordinate of the
    /// orthogonalized representation of token `v`.
    columns: Vec<Vec<T>>,
    taken: Vec<bool>,
    selected: Vec<usize>,
    gains: Vec<T>,
    log_pivots: Vec<T>,
    degenerate_from: Option<usize>,
    scratch: Vec<T>,
}

impl<'k, T: Scalar> GreedyDpp<'k, T> {
    pub fn new(kernel: &'k KernelFactor<T>, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidParameter(format!("lambda must be in [0, 1], got {lambda}")));
        }
        let lambda = T::of(lambda);
        let floor = kernel.floor();
        let cond_var: Vec<T> = kernel.relevance().iter().map(|&r| r + kernel.jitter()).collect();
        let log_relevance = cond_var.iter().map(|&r| r.max(floor).ln()).collect();
        Ok(Self {
            kernel,
            relevance_weight: T::of(2.0) * lambda - T::one(),
            diversity_weight: T::one() - lambda,
            floor,
            log_relevance,
            cond_var,
            columns: Vec::new(),
            taken: vec![false; kernel.n()],
            selected: Vec::new(),
            gains: Vec::new(),
            log_pivots: Vec::new(),
            degenerate_from: None,
            scratch: vec![T::zero(); kernel.n()],
        })
    }

    /// Current conditional variances `d_v²`; for unselected `v` this equals
    /// `det(L_{S∪v} + εI) / det(L_S + εI)`.
    pub fn conditional_variances(&self) -> &[T] {
        &self.cond_var
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    /// Weighted gain of adding `v` to the current selection.
    pub fn gain(&self, v: usize) -> T {
        // (2λ−1)·log r̃² + (1−λ)·log d² == λ·log r̃² + (1−λ)·(log d² − log r̃²)
        self.relevance_weight * self.log_relevance[v] + self.diversity_weight * self.cond_var[v].max(self.floor).ln()
    }

    /// Selects one more token; `None` once every token is taken.
    pub fn step(&mut self) -> Option<(usize, T)> {
        let mut best: Option<(usize, T)> = None;
        for v in 0..self.kernel.n() {
            if self.taken[v] {
                continue;
            }
            let g = self.gain(v);
            // strict comparison keeps the lowest index on ties
            if best.is_none_or(|(_, bg)| g > bg) {
                best = Some((v, g));
            }
        }
        let (j, gain) = best?;
        let step = self.selected.len();
        let pivot = self.cond_var[j];
        if pivot <= degenerate_threshold(self.floor) && self.degenerate_from.is_none() {
            self.degenerate_from = Some(step);
        }
        let pivot = pivot.max(self.floor);
        self.log_pivots.push(pivot.ln());
        self.taken[j] = true;
        self.selected.push(j);
        self.gains.push(gain);
        self.update_after(j, pivot);
        Some((j, gain))
    }

    fn update_after(&mut self, j: usize, pivot: T) {
        let n = self.kernel.n();
        let inv_root = pivot.sqrt().recip();
        let aj = self.kernel.factor_row(j);

        // projections onto previously chosen directions
        let acc = &mut self.scratch;
        acc.iter_mut().for_each(|x| *x = T::zero());
        for col in &self.columns {
            let cj = col[j];
            if cj == T::zero() {
                continue;
            }
            for (a, &c) in acc.iter_mut().zip(col.iter()) {
                *a += cj * c;
            }
        }

        let mut column = vec![T::zero(); n];
        for v in 0..n {
            if self.taken[v] {
                continue;
            }
            let lv = dot(aj, self.kernel.factor_row(v));
            let e = (lv - acc[v]) * inv_root;
            column[v] = e;
            self.cond_var[v] -= e * e;
        }
        column[j] = pivot.sqrt();
        self.cond_var[j] = T::zero();
        self.columns.push(column);
    }

    pub fn into_selection(self, config: SelectionConfig) -> Selection<T> {
        Selection {
            total_logdet: self.log_pivots.iter().copied().sum(),
            indices: self.selected,
            gains: self.gains,
            degenerate_from: self.degenerate_from,
            config,
        }
    }
}

/// Greedy MAP selection of `cfg.budget` tokens.
pub fn greedy_select<T: Scalar>(k: &KernelFactor<T>, cfg: &SelectionConfig) -> Result<Selection<T>> {
    if cfg.strategy != Strategy::DppGreedy {
        return Err(Error::InvalidParameter(format!(
            "greedy_select requires the dpp strategy, got {}",
            cfg.strategy.as_str()
        )));
    }
    cfg.check_lambda()?;
    let m = cfg.budget.resolve(k.n())?;
    let mut state = GreedyDpp::new(k, cfg.lambda)?;
    for _ in 0..m {
        state.step();
    }
    Ok(state.into_selection(SelectionConfig {
        budget: Budget::Count(m),
        ..*cfg
    }))
}

fn binomial(n: usize, k: usize) -> u64 {
    let k = k.min(n - k);
    let mut c: u64 = 1;
    for i in 0..k {
        c = c * (n - i) as u64 / (i + 1) as u64;
    }
    c
}

/// Exhaustive maximizer of `log det(L_S + εI)` over all size-`m` subsets.
///
/// Refuses instances with more than [`EXACT_MAX_TOKENS`] tokens or more than
/// [`EXACT_MAX_SUBSETS`] candidate subsets. Ties go to the lexicographically
/// smallest index set.
pub fn exact_select<T: Scalar>(k: &KernelFactor<T>, m: usize) -> Result<Selection<T>> {
    let n = k.n();
    if m == 0 || m > n {
        return Err(Error::InfeasibleBudget {
            requested: m,
            available: n,
        });
    }
    if n > EXACT_MAX_TOKENS {
        return Err(Error::TooLarge(format!("{n} tokens exceeds limit of {EXACT_MAX_TOKENS}")));
    }
    let count = binomial(n, m);
    if count > EXACT_MAX_SUBSETS {
        return Err(Error::TooLarge(format!(
            "C({n},{m}) = {count} subsets exceeds limit of {EXACT_MAX_SUBSETS}"
        )));
    }

    let mut combo: Vec<usize> = (0..m).collect();
    let mut best: Option<(T, Vec<usize>)> = None;
    loop {
        let value = k.logdet_subset(&combo)?;
        if best.as_ref().is_none_or(|(bv, _)| value > *bv) {
            best = Some((value, combo.clone()));
        }
        // next combination in lexicographic order
        let Some(pos) = (0..m).rev().find(|&i| combo[i] < n - m + i) else {
            break;
        };
        combo[pos] += 1;
        for i in pos + 1..m {
            combo[i] = combo[i - 1] + 1;
        }
    }
    let (total, indices) = best.expect("at least one subset enumerated");
    let mut mat = k.restriction(&indices)?;
    let pivots = cholesky_log_pivots(&mut mat, m, k.floor())?;
    Ok(Selection {
        indices,
        gains: pivots.log_pivots,
        total_logdet: total,
        degenerate_from: pivots.first_degenerate,
        config: SelectionConfig {
            budget: Budget::Count(m),
            strategy: Strategy::Exhaustive,
            lambda: 0.5,
            seed: 0,
        },
    })
}

/// Indices of the `m` largest scores, descending, lowest index first on ties.
pub fn top_by_relevance<T: Scalar>(r2: &[T], m: usize) -> Result<Vec<usize>> {
    if m == 0 || m > r2.len() {
        return Err(Error::InfeasibleBudget {
            requested: m,
            available: r2.len(),
        });
    }
    let mut order: Vec<usize> = (0..r2.len()).collect();
    // stable sort: equal scores keep ascending index order
    order.sort_by(|&a, &b| r2[b].partial_cmp(&r2[a]).unwrap_or(std::cmp::Ordering::Equal));
    order.truncate(m);
    Ok(order)
}

/// `m` distinct indices from `0..n`, uniformly without replacement, in draw order.
pub fn random_indices(n: usize, m: usize, seed: u64) -> Result<Vec<usize>> {
    if m == 0 || m > n {
        return Err(Error::InfeasibleBudget {
            requested: m,
            available: n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, n, m).into_vec())
}

/// Baseline: the `m` most text-aligned tokens.
pub fn relevance_only_select<T: Scalar>(k: &KernelFactor<T>, m: usize) -> Result<Selection<T>> {
    let indices = top_by_relevance(k.relevance(), m)?;
    baseline_selection(k, indices, Strategy::RelevanceOnly, 0)
}

/// Baseline: a seeded uniform sample of `m` tokens.
pub fn random_select<T: Scalar>(k: &KernelFactor<T>, m: usize, seed: u64) -> Result<Selection<T>> {
    let indices = random_indices(k.n(), m, seed)?;
    baseline_selection(k, indices, Strategy::Random, seed)
}

fn baseline_selection<T: Scalar>(
    k: &KernelFactor<T>,
    indices: Vec<usize>,
    strategy: Strategy,
    seed: u64,
) -> Result<Selection<T>> {
    let floor = k.floor();
    let gains = indices
        .iter()
        .map(|&i| (k.relevance()[i] + k.jitter()).max(floor).ln())
        .collect();
    let m = indices.len();
    let mut mat = k.restriction(&indices)?;
    let pivots = cholesky_log_pivots(&mut mat, m, floor)?;
    Ok(Selection {
        total_logdet: pivots.log_pivots.iter().copied().sum(),
        degenerate_from: pivots.first_degenerate,
        indices,
        gains,
        config: SelectionConfig {
            budget: Budget::Count(m),
            strategy,
            lambda: 0.5,
            seed,
        },
    })
}
