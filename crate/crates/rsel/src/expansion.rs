//! Series approximations of the probability of incorrect selection (PICS)
//! and the score functions driving the allocation policies.
//!
//! The building block is
//!
//! ```text
//! U_ℓ(x; T) = exp(−Tx/2 − ln(x)/2) · (1 + Σ_{l=1..ℓ} (−1)^l (2l−1)!! / (xT)^l),
//! ```
//!
//! a truncated tail expansion in powers of 1/T. For a Gaussian instance the
//! pair statistic is
//!
//! ```text
//! R_j(p1, pj) = (m1 − mj)² / (σ1²/p1 + σj²/pj)  ( = 2·G_j ),
//! ```
//!
//! and `V_ℓ(p) = Σ_{j≠best} U_ℓ(R_j) / sqrt(2πT)` approximates 1 − PCS. The
//! 1/sqrt(2πT) normalization lives here, not inside `U_ℓ`, because the
//! optimality conditions are written in terms of `U_ℓ'` alone.
//!
//! `U_ℓ'` has the exact closed form
//!
//! ```text
//! U_ℓ'(x) = exp(−Tx/2 − ln(x)/2) · (−T/2 + (−1)^{ℓ+1} (2ℓ+1)!! / (2 x^{ℓ+1} T^ℓ)),
//! ```
//!
//! which the test suite validates against central finite differences of `U_ℓ`.

use crate::alt_models::{pairwise_quantities, AlternativeModel, ProblemInstance};
use crate::error::{Error, Result};
use crate::policies::AllocationState;

/// Largest supported expansion order. Higher orders are numerically
/// meaningless at the budgets this toolkit targets.
pub const MAX_ORDER: usize = 10;

/// Variance floor applied to all plug-in sample variances.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// A point on the open probability simplex: all entries positive, summing
/// to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingRatios(Vec<f64>);

impl SamplingRatios {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.len() < 2 {
            return Err(Error::InvalidParameter("ratios need length >= 2".into()));
        }
        if p.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::InvalidParameter(
                "all sampling ratios must be strictly positive".into(),
            ));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "sampling ratios must sum to 1 (got {sum})"
            )));
        }
        Ok(Self(p))
    }

    /// Uniform ratios 1/k.
    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Index<usize> for SamplingRatios {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Which approximation produced an [`ApproxReport`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ApproxVariant {
    /// Order-ℓ series of pairwise terms.
    Expansion,
    /// Pure large-deviations surrogate exp(−T·min G).
    Ldr,
    /// Piecewise three-alternative refinement; carries the branch taken.
    RefinedK3 { critical_line: bool },
    /// Subset-expansion refinement.
    RefinedGeneral,
}

/// One pairwise summand of an approximation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTerm {
    /// Index of the suboptimal alternative.
    pub index: usize,
    /// Pairwise decay rate G_j.
    pub rate: f64,
    /// Expansion prefactor λ_j*·pj·σ̃.
    pub prefactor: f64,
    /// Contribution to the total.
    pub value: f64,
}

/// A PICS approximation with its per-pair breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxReport {
    pub per_pair_terms: Vec<PairTerm>,
    pub total: f64,
    pub order: usize,
    pub budget: f64,
    pub variant: ApproxVariant,
}

/// (2l−1)!! as an exact integer-valued f64, l = 0 giving 1.
fn odd_double_factorial(l: usize) -> f64 {
    let mut acc = 1.0;
    let mut n = 1;
    while n <= 2 * l {
        if n % 2 == 1 {
            acc *= n as f64;
        }
        n += 1;
    }
    acc
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_ORDER {
        return Err(Error::UnsupportedOrder(format!(
            "expansion order {order} exceeds the supported maximum {MAX_ORDER}"
        )));
    }
    Ok(())
}

/// Correction series 1 + Σ_{l=1..ℓ} (−1)^l (2l−1)!!/(xT)^l.
fn correction_series(x: f64, budget: f64, order: usize) -> f64 {
    let mut acc = 1.0;
    let inv = 1.0 / (x * budget);
    let mut pow = 1.0;
    for l in 1..=order {
        pow *= inv;
        let sign = if l % 2 == 1 { -1.0 } else { 1.0 };
        acc += sign * odd_double_factorial(l) * pow;
    }
    acc
}

/// U_ℓ(x; T).
pub fn u_ell(x: f64, budget: f64, order: usize) -> Result<f64> {
    check_order(order)?;
    if !(x > 0.0) {
        return Err(Error::Domain(format!("U_ℓ requires x > 0, got x = {x}")));
    }
    if !(budget > 0.0) {
        return Err(Error::Domain(format!("U_ℓ requires T > 0, got T = {budget}")));
    }
    let envelope = (-0.5 * budget * x - 0.5 * x.ln()).exp();
    Ok(envelope * correction_series(x, budget, order))
}

/// Exact derivative of U_ℓ with respect to x.
pub fn u_ell_prime(x: f64, budget: f64, order: usize) -> Result<f64> {
    check_order(order)?;
    if !(x > 0.0) {
        return Err(Error::Domain(format!("U_ℓ' requires x > 0, got x = {x}")));
    }
    if !(budget > 0.0) {
        return Err(Error::Domain(format!("U_ℓ' requires T > 0, got T = {budget}")));
    }
    let envelope = (-0.5 * budget * x - 0.5 * x.ln()).exp();
    let sign = if order % 2 == 0 { -1.0 } else { 1.0 };
    let tail = sign * odd_double_factorial(order + 1)
        / (2.0 * x.powi(order as i32 + 1) * budget.powi(order as i32));
    Ok(envelope * (-0.5 * budget + tail))
}

fn require_gaussian(instance: &ProblemInstance, what: &str) -> Result<()> {
    if !instance.is_gaussian() {
        return Err(Error::UnsupportedModel(format!(
            "{what} is only defined for Gaussian instances"
        )));
    }
    Ok(())
}

fn check_ratios(instance: &ProblemInstance, ratios: &SamplingRatios) -> Result<()> {
    if ratios.len() != instance.k() {
        return Err(Error::InvalidParameter(format!(
            "ratio length {} does not match instance size {}",
            ratios.len(),
            instance.k()
        )));
    }
    Ok(())
}

/// Pair statistic R_j = (m1 − mj)²/(σ1²/p1 + σj²/pj) for a Gaussian instance.
pub fn r_j(instance: &ProblemInstance, j: usize, ratios: &SamplingRatios) -> Result<f64> {
    require_gaussian(instance, "R_j")?;
    check_ratios(instance, ratios)?;
    let best = instance.best_index();
    if j == best {
        return Err(Error::InvalidParameter(
            "R_j is defined for suboptimal alternatives only".into(),
        ));
    }
    let (m1, v1) = (instance.alternative(best).mean(), instance.alternative(best).variance());
    let (mj, vj) = (instance.alternative(j).mean(), instance.alternative(j).variance());
    let gap = m1 - mj;
    Ok(gap * gap / (v1 / ratios[best] + vj / ratios[j]))
}

/// Order-ℓ approximation to 1 − PCS for a Gaussian instance:
/// total = Σ_{j≠best} U_ℓ(R_j) / sqrt(2πT).
pub fn v_ell(
    instance: &ProblemInstance,
    ratios: &SamplingRatios,
    budget: f64,
    order: usize,
) -> Result<ApproxReport> {
    require_gaussian(instance, "V_ℓ")?;
    check_ratios(instance, ratios)?;
    check_order(order)?;
    let best = instance.best_index();
    let norm = 1.0 / (2.0 * std::f64::consts::PI * budget).sqrt();
    let mut terms = Vec::with_capacity(instance.k() - 1);
    let mut total = 0.0;
    for j in 0..instance.k() {
        if j == best {
            continue;
        }
        let r = r_j(instance, j, ratios)?;
        let value = u_ell(r, budget, order)? * norm;
        terms.push(PairTerm { index: j, rate: 0.5 * r, prefactor: r.sqrt(), value });
        total += value;
    }
    Ok(ApproxReport {
        per_pair_terms: terms,
        total,
        order,
        budget,
        variant: ApproxVariant::Expansion,
    })
}

/// Order-ℓ expansion of the probability that one suboptimal sample mean
/// overtakes the best:
///
/// ```text
/// exp(−T·G) / (sqrt(2πT)·prefactor) · (1 + Σ_{l≤ℓ} c_l/T^l),
/// ```
///
/// with Gaussian coefficients c_l = (−1)^l (2l−1)!!/R^l. Orders ℓ ≥ 1 are
/// Gaussian-only; the Exponential family is supported at ℓ = 0.
pub fn pics_expansion_binary(
    best: &AlternativeModel,
    subopt: &AlternativeModel,
    p1: f64,
    pj: f64,
    budget: f64,
    order: usize,
) -> Result<f64> {
    check_order(order)?;
    if order >= 1 && !(best.is_gaussian() && subopt.is_gaussian()) {
        return Err(Error::UnsupportedOrder(
            "expansion orders >= 1 are only available for Gaussian pairs".into(),
        ));
    }
    let q = pairwise_quantities(best, subopt, p1, pj)?;
    let norm = 1.0 / ((2.0 * std::f64::consts::PI * budget).sqrt() * q.prefactor);
    // Gaussian: prefactor² = 2G = R, so the correction series in R is the
    // same series used by u_ell.
    let series = correction_series(q.prefactor * q.prefactor, budget, order);
    Ok((-budget * q.rate).exp() * norm * series)
}

/// Pure large-deviations surrogate exp(−T·min_j G_j).
pub fn ldr_pics(instance: &ProblemInstance, ratios: &SamplingRatios, budget: f64) -> Result<f64> {
    check_ratios(instance, ratios)?;
    let best = instance.best_index();
    let mut min_rate = f64::INFINITY;
    for j in 0..instance.k() {
        if j == best {
            continue;
        }
        let q = pairwise_quantities(
            instance.alternative(best),
            instance.alternative(j),
            ratios[best],
            ratios[j],
        )?;
        min_rate = min_rate.min(q.rate);
    }
    Ok((-budget * min_rate).exp())
}

/// Score of sampling suboptimal alternative j:
/// |U_ℓ'(R_j)| · R_j · (σj²/pj²)/(σ1²/p1 + σj²/pj).
///
/// Equalizing this across suboptimal alternatives is the first optimality
/// condition of the budget-aware allocation. A zero pair statistic (tied
/// plug-in means) returns +∞: the tied alternative must be sampled.
pub fn score(
    instance: &ProblemInstance,
    j: usize,
    ratios: &SamplingRatios,
    budget: f64,
    order: usize,
) -> Result<f64> {
    let r = r_j(instance, j, ratios)?;
    if r == 0.0 {
        return Ok(f64::INFINITY);
    }
    let best = instance.best_index();
    let v1 = instance.alternative(best).variance();
    let vj = instance.alternative(j).variance();
    let (p1, pj) = (ratios[best], ratios[j]);
    let weight = (vj / (pj * pj)) / (v1 / p1 + vj / pj);
    Ok(u_ell_prime(r, budget, order)?.abs() * r * weight)
}

/// Which post-hoc PCS estimator to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PosthocVariant {
    /// 1 − Σ_{j≠j*} exp(−R̂_j·T/2 − ln(R̂_j)/2).
    V0,
    /// 1 − exp(−T·min_j R̂_j / 2).
    Ldr,
}

/// A post-hoc PCS estimate with its degeneracy flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosthocEstimate {
    /// Estimate clamped into [0, 1].
    pub value: f64,
    /// True when tied plug-in means forced the estimate to zero.
    pub low_confidence: bool,
}

/// Post-hoc PCS estimate from one finished replication. Plug-ins are the
/// sample means, sample variances (n−1 denominator, floored), and the
/// realized sampling ratios; the estimated best is the sample-mean argmax.
pub fn posthoc_pcs_estimate(
    state: &AllocationState,
    budget: f64,
    variant: PosthocVariant,
) -> Result<PosthocEstimate> {
    let k = state.k();
    for i in 0..k {
        if state.count(i) < 2 {
            return Err(Error::Policy(format!(
                "post-hoc estimation needs >= 2 samples per alternative, alternative {i} has {}",
                state.count(i)
            )));
        }
    }
    let total = state.total() as f64;
    let best = state.sample_best();
    let mb = state.mean(best);
    let vb = state.variance(best).max(VARIANCE_FLOOR);
    let pb = state.count(best) as f64 / total;

    let mut tied = false;
    let mut pics_v0 = 0.0;
    let mut min_r = f64::INFINITY;
    for j in 0..k {
        if j == best {
            continue;
        }
        let gap = mb - state.mean(j);
        let vj = state.variance(j).max(VARIANCE_FLOOR);
        let pj = state.count(j) as f64 / total;
        let r = gap * gap / (vb / pb + vj / pj);
        if r == 0.0 {
            tied = true;
            continue;
        }
        pics_v0 += (-0.5 * r * budget - 0.5 * r.ln()).exp();
        min_r = min_r.min(r);
    }

    if tied {
        return Ok(PosthocEstimate { value: 0.0, low_confidence: true });
    }
    let value = match variant {
        PosthocVariant::V0 => 1.0 - pics_v0,
        PosthocVariant::Ldr => 1.0 - (-0.5 * budget * min_r).exp(),
    };
    Ok(PosthocEstimate { value: value.clamp(0.0, 1.0), low_confidence: false })
}
