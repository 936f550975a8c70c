//! Sequential allocation policies and the running-statistics state they
//! share.
//!
//! Every policy is a deterministic function of an [`AllocationState`]
//! snapshot: given the same counts and moments it always picks the same
//! alternative, with lowest-index tie-breaks throughout. The policies never
//! draw randomness themselves; the experiment harness owns the streams.

use crate::alt_models::ProblemInstance;
use crate::allocation_solver::solve_roa;
use crate::error::{Error, Result};
use crate::expansion::{u_ell_prime, VARIANCE_FLOOR};
use crate::low_confidence::lc_trigger;

/// Per-alternative sample counts and one-pass mean/variance accumulators for
/// one replication (Welford update).
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationState {
    counts: Vec<u64>,
    means: Vec<f64>,
    m2: Vec<f64>,
    total: u64,
}

impl AllocationState {
    pub fn new(k: usize) -> Self {
        Self { counts: vec![0; k], means: vec![0.0; k], m2: vec![0.0; k], total: 0 }
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, i: usize) -> u64 {
        self.counts[i]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Running sample mean; 0 before any observation.
    pub fn mean(&self, i: usize) -> f64 {
        self.means[i]
    }

    /// Sample variance with n−1 denominator. Alternatives with fewer than two
    /// samples have no variance; callers must fill initial samples first.
    pub fn variance(&self, i: usize) -> f64 {
        debug_assert!(self.counts[i] >= 2, "variance queried with < 2 samples");
        self.m2[i] / (self.counts[i] - 1) as f64
    }

    fn variance_floored(&self, i: usize) -> f64 {
        self.variance(i).max(VARIANCE_FLOOR)
    }

    /// Record one observation for alternative `i`.
    pub fn push_sample(&mut self, i: usize, x: f64) -> Result<()> {
        if i >= self.counts.len() {
            return Err(Error::Policy(format!(
                "alternative index {i} out of range (k = {})",
                self.counts.len()
            )));
        }
        self.counts[i] += 1;
        self.total += 1;
        let n = self.counts[i] as f64;
        let delta = x - self.means[i];
        self.means[i] += delta / n;
        self.m2[i] += delta * (x - self.means[i]);
        Ok(())
    }

    /// Index of the largest sample mean, lowest index on ties.
    pub fn sample_best(&self) -> usize {
        argmax_lowest(&self.means).0
    }

    /// Index of the second-largest sample mean, lowest index on ties.
    pub fn sample_second_best(&self) -> usize {
        let best = self.sample_best();
        let mut idx = usize::MAX;
        let mut val = f64::NEG_INFINITY;
        for (i, &m) in self.means.iter().enumerate() {
            if i != best && m > val {
                val = m;
                idx = i;
            }
        }
        idx
    }

    /// Realized sampling ratios counts/total.
    pub fn ratios(&self) -> Vec<f64> {
        let n = self.total as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }
}

/// Argmax with lowest-index tie-break, returning (index, tied?).
fn argmax_lowest(values: &[f64]) -> (usize, bool) {
    let mut idx = 0;
    let mut tied = false;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[idx] {
            idx = i;
            tied = false;
        } else if v == values[idx] {
            tied = true;
        }
    }
    (idx, tied)
}

/// Why a policy chose its alternative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rationale {
    /// Initial fill below the per-alternative floor.
    InitialFill,
    /// The exploration/exploitation balance favored the estimated best.
    BalanceBest,
    /// A suboptimal alternative won on score (or starvation).
    ScoreCandidate,
    /// The low-confidence trigger alone diverted the sample away from the
    /// estimated best.
    LowConfidenceOverride,
    /// Tied plug-in means forced sampling the tied alternative.
    TieBreak,
}

/// A policy's choice for the next sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolicyDecision {
    pub chosen: usize,
    pub rationale: Rationale,
}

fn check_stepping_preconditions(state: &AllocationState, total_budget: u64) -> Result<()> {
    if state.total() >= total_budget {
        return Err(Error::Policy(format!(
            "budget exhausted: {} of {total_budget} samples used",
            state.total()
        )));
    }
    if let Some(i) = (0..state.k()).find(|&i| state.count(i) < 2) {
        return Err(Error::Policy(format!(
            "alternative {i} has fewer than 2 initial samples"
        )));
    }
    Ok(())
}

/// Plug-in pair statistic R̂_j between the estimated best and alternative j,
/// with realized ratios.
fn plugin_pair_stat(state: &AllocationState, best: usize, j: usize) -> f64 {
    let n = state.total() as f64;
    let gap = state.mean(best) - state.mean(j);
    let vb = state.variance_floored(best) / (state.count(best) as f64 / n);
    let vj = state.variance_floored(j) / (state.count(j) as f64 / n);
    gap * gap / (vb + vj)
}

/// Suboptimal candidate with the largest plug-in score
/// |U_ℓ'(R̂_j)|·R̂_j·(σ̂j²/pj²)/(σ̂b²/pb + σ̂j²/pj); ties (R̂ = 0) score +∞.
fn best_score_candidate(
    state: &AllocationState,
    best: usize,
    total_budget: u64,
    order: usize,
) -> Result<(usize, bool)> {
    let n = state.total() as f64;
    let t = total_budget as f64;
    let pb = state.count(best) as f64 / n;
    let vb = state.variance_floored(best);
    let mut cand = usize::MAX;
    let mut cand_score = f64::NEG_INFINITY;
    let mut cand_tied = false;
    for j in 0..state.k() {
        if j == best {
            continue;
        }
        let r = plugin_pair_stat(state, best, j);
        let s = if r == 0.0 {
            f64::INFINITY
        } else {
            let pj = state.count(j) as f64 / n;
            let vj = state.variance_floored(j);
            let weight = (vj / (pj * pj)) / (vb / pb + vj / pj);
            u_ell_prime(r, t, order)?.abs() * r * weight
        };
        if s > cand_score {
            cand = j;
            cand_score = s;
            cand_tied = r == 0.0;
        }
    }
    Ok((cand, cand_tied))
}

/// Exploration/exploitation balance: true when the estimated best already
/// holds more than its share, i.e. T_b²/σ̂_b² > Σ_{j≠b} T_j²/σ̂_j².
fn balance_favors_candidate(state: &AllocationState, best: usize) -> bool {
    let lhs = {
        let tb = state.count(best) as f64;
        tb * tb / state.variance_floored(best)
    };
    let rhs: f64 = (0..state.k())
        .filter(|&j| j != best)
        .map(|j| {
            let tj = state.count(j) as f64;
            tj * tj / state.variance_floored(j)
        })
        .sum();
    lhs > rhs
}

/// One step of the finite-budget allocation of order ℓ. The budget passed to
/// the score is the total budget, not the samples consumed so far: the policy
/// targets the final PCS.
pub fn fcba_step(
    state: &AllocationState,
    total_budget: u64,
    order: usize,
) -> Result<PolicyDecision> {
    check_stepping_preconditions(state, total_budget)?;
    let best = state.sample_best();
    let (cand, cand_tied) = best_score_candidate(state, best, total_budget, order)?;
    if balance_favors_candidate(state, best) {
        let rationale = if cand_tied { Rationale::TieBreak } else { Rationale::ScoreCandidate };
        Ok(PolicyDecision { chosen: cand, rationale })
    } else {
        Ok(PolicyDecision { chosen: best, rationale: Rationale::BalanceBest })
    }
}

/// FCBA(0) with the low-confidence override: the candidate branch also fires
/// when the critical-point trigger detects a significant chance of the best
/// losing several comparisons at once.
pub fn lc_fcba_step(state: &AllocationState, total_budget: u64) -> Result<PolicyDecision> {
    check_stepping_preconditions(state, total_budget)?;
    let best = state.sample_best();
    let (cand, cand_tied) = best_score_candidate(state, best, total_budget, 0)?;
    let balance = balance_favors_candidate(state, best);
    if balance || lc_trigger(state) {
        let rationale = if cand_tied {
            Rationale::TieBreak
        } else if balance {
            Rationale::ScoreCandidate
        } else {
            Rationale::LowConfidenceOverride
        };
        Ok(PolicyDecision { chosen: cand, rationale })
    } else {
        Ok(PolicyDecision { chosen: best, rationale: Rationale::BalanceBest })
    }
}

/// One step of the classic budget allocation, sequenced like the other
/// score-based policies: the balance check decides between the estimated
/// best and a candidate, and the candidate is the suboptimal alternative
/// furthest below the equalized score δ̂_j²·p_j/σ̂_j². The fixed point of
/// this iteration is exactly the closed-form target allocation
/// (q_i/q_j = (σ_i/δ_i)²/(σ_j/δ_j)², q_b = σ_b·sqrt(Σ q_j²/σ_j²)).
pub fn ocba_step(state: &AllocationState, total_budget: u64) -> Result<PolicyDecision> {
    check_stepping_preconditions(state, total_budget)?;
    let k = state.k();
    let best = state.sample_best();
    let mb = state.mean(best);
    for j in 0..k {
        if j != best && state.mean(j) == mb {
            // Tied plug-in means: the tied alternative is maximally ambiguous.
            return Ok(PolicyDecision { chosen: j, rationale: Rationale::TieBreak });
        }
    }
    if balance_favors_candidate(state, best) {
        let n = state.total() as f64;
        let mut cand = usize::MAX;
        let mut cand_score = f64::INFINITY;
        for j in 0..k {
            if j == best {
                continue;
            }
            let gap = mb - state.mean(j);
            let pj = state.count(j) as f64 / n;
            let s = gap * gap * pj / state.variance_floored(j);
            if s < cand_score {
                cand_score = s;
                cand = j;
            }
        }
        Ok(PolicyDecision { chosen: cand, rationale: Rationale::ScoreCandidate })
    } else {
        Ok(PolicyDecision { chosen: best, rationale: Rationale::BalanceBest })
    }
}

/// One step of the rate-optimal allocation: solve the rate-balance system on
/// the plug-in instance and sample the most starving alternative.
pub fn roa_step(state: &AllocationState, total_budget: u64) -> Result<PolicyDecision> {
    check_stepping_preconditions(state, total_budget)?;
    let k = state.k();
    let best = state.sample_best();
    let mb = state.mean(best);
    for j in 0..k {
        if j != best && state.mean(j) == mb {
            return Ok(PolicyDecision { chosen: j, rationale: Rationale::TieBreak });
        }
    }
    let means: Vec<f64> = (0..k).map(|i| state.mean(i)).collect();
    let vars: Vec<f64> = (0..k).map(|i| state.variance_floored(i)).collect();
    let instance = ProblemInstance::gaussian(&means, &vars)?;
    let ratios = solve_roa(&instance)?;
    let n = state.total() as f64;
    let starving: Vec<f64> =
        (0..k).map(|i| ratios[i] * n - state.count(i) as f64).collect();
    let (chosen, tied) = argmax_lowest(&starving);
    let rationale = if tied {
        Rationale::TieBreak
    } else if chosen == best {
        Rationale::BalanceBest
    } else {
        Rationale::ScoreCandidate
    };
    Ok(PolicyDecision { chosen, rationale })
}

/// Equal allocation: round robin via the least-sampled alternative.
pub fn ea_step(state: &AllocationState, total_budget: u64) -> Result<PolicyDecision> {
    if state.total() >= total_budget {
        return Err(Error::Policy("budget exhausted".into()));
    }
    let mut chosen = 0;
    for i in 1..state.k() {
        if state.count(i) < state.count(chosen) {
            chosen = i;
        }
    }
    Ok(PolicyDecision { chosen, rationale: Rationale::ScoreCandidate })
}

/// The sequential policies the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Ea,
    Ocba,
    Roa,
    Fcba { order: usize },
    LcFcba,
}

impl PolicyKind {
    pub fn name(&self) -> String {
        match self {
            PolicyKind::Ea => "ea".into(),
            PolicyKind::Ocba => "ocba".into(),
            PolicyKind::Roa => "roa".into(),
            PolicyKind::Fcba { order } => format!("fcba{order}"),
            PolicyKind::LcFcba => "lc-fcba0".into(),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "ea" => Ok(PolicyKind::Ea),
            "ocba" => Ok(PolicyKind::Ocba),
            "roa" => Ok(PolicyKind::Roa),
            "lc-fcba0" | "lcfcba0" | "lc-fcba" => Ok(PolicyKind::LcFcba),
            _ => {
                if let Some(rest) = s.strip_prefix("fcba") {
                    let order: usize = rest.parse().map_err(|_| {
                        Error::Config(format!("policies: unknown policy '{s}'"))
                    })?;
                    Ok(PolicyKind::Fcba { order })
                } else {
                    Err(Error::Config(format!("policies: unknown policy '{s}'")))
                }
            }
        }
    }

    /// Next decision, filling initial samples below `t0` first.
    pub fn next(
        &self,
        state: &AllocationState,
        total_budget: u64,
        t0: u64,
    ) -> Result<PolicyDecision> {
        if let Some(i) = (0..state.k()).find(|&i| state.count(i) < t0) {
            return Ok(PolicyDecision { chosen: i, rationale: Rationale::InitialFill });
        }
        match self {
            PolicyKind::Ea => ea_step(state, total_budget),
            PolicyKind::Ocba => ocba_step(state, total_budget),
            PolicyKind::Roa => roa_step(state, total_budget),
            PolicyKind::Fcba { order } => fcba_step(state, total_budget, *order),
            PolicyKind::LcFcba => lc_fcba_step(state, total_budget),
        }
    }
}
