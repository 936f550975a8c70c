//! Distribution models for simulation alternatives and the large-deviations
//! primitives built on them.
//!
//! Every alternative is a light-tailed sampling distribution with a cumulant
//! generating function (CGF) `Λ(λ) = log E[exp(λX)]`. The rate function is
//! its Legendre-Fenchel transform,
//!
//! ```text
//! I(x) = sup_λ { λx − Λ(λ) },
//! ```
//!
//! which is non-negative, strictly convex on the mean range, and zero exactly
//! at the mean. For a pair (best, suboptimal) with sampling ratios (p1, pj),
//! the probability that the suboptimal sample mean overtakes the best decays
//! at rate
//!
//! ```text
//! G_j(p1, pj) = p1·I_1(μ) + pj·I_j(μ),
//! ```
//!
//! where the crossing point μ solves `p1·I_1'(μ) + pj·I_j'(μ) = 0` on
//! `[m_j, m_1]`. The exponential-tilting prefactor that multiplies the decay
//! is `λ_j*·pj·σ̃`, with `λ_i* = I_i'(μ)` the tilting points and
//! `σ̃² = Λ_1''(λ_1*)/p1 + Λ_j''(λ_j*)/pj` built from the tilted variances.
//!
//! Supported families:
//!
//! | family      | CGF                | rate function            | tilted variance at x |
//! |-------------|--------------------|--------------------------|----------------------|
//! | Gaussian    | mλ + σ²λ²/2        | (x−m)²/(2σ²)             | σ²                   |
//! | Exponential | −log(1−βλ), λ<1/β  | x/β − log(x/β) − 1, x>0  | x²                   |
//!
//! All functions here are pure and reentrant; nothing is cached.

use crate::error::{Error, Result};

/// A sampling distribution for one alternative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlternativeModel {
    /// Normal with the given mean and variance.
    Gaussian { mean: f64, variance: f64 },
    /// Exponential with the given scale β (mean β, variance β²).
    Exponential { scale: f64 },
}

impl AlternativeModel {
    pub fn gaussian(mean: f64, variance: f64) -> Result<Self> {
        if !variance.is_finite() || variance <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "Gaussian variance must be strictly positive, got {variance}"
            )));
        }
        if !mean.is_finite() {
            return Err(Error::InvalidParameter("Gaussian mean must be finite".into()));
        }
        Ok(Self::Gaussian { mean, variance })
    }

    pub fn exponential(scale: f64) -> Result<Self> {
        if !scale.is_finite() || scale <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "Exponential scale must be strictly positive, got {scale}"
            )));
        }
        Ok(Self::Exponential { scale })
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Gaussian { mean, .. } => mean,
            Self::Exponential { scale } => scale,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Self::Gaussian { variance, .. } => variance,
            Self::Exponential { scale } => scale * scale,
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, Self::Gaussian { .. })
    }

    /// Cumulant generating function Λ(λ).
    pub fn cgf(&self, lambda: f64) -> Result<f64> {
        match *self {
            Self::Gaussian { mean, variance } => Ok(mean * lambda + variance * lambda * lambda / 2.0),
            Self::Exponential { scale } => {
                if lambda >= 1.0 / scale {
                    return Err(Error::Domain(format!(
                        "Exponential CGF requires λ < 1/β = {}, got λ = {lambda}",
                        1.0 / scale
                    )));
                }
                Ok(-(1.0 - scale * lambda).ln())
            }
        }
    }

    /// Legendre-Fenchel transform I(x) of the CGF.
    pub fn rate_function(&self, x: f64) -> Result<f64> {
        match *self {
            Self::Gaussian { mean, variance } => {
                let d = x - mean;
                Ok(d * d / (2.0 * variance))
            }
            Self::Exponential { scale } => {
                if x <= 0.0 {
                    return Err(Error::Domain(format!(
                        "Exponential rate function requires x > 0, got x = {x}"
                    )));
                }
                let r = x / scale;
                Ok(r - r.ln() - 1.0)
            }
        }
    }

    /// Derivative I'(x) of the rate function. Equals the tilting point λ*(x)
    /// that solves Λ'(λ*) = x.
    pub fn rate_function_deriv(&self, x: f64) -> Result<f64> {
        match *self {
            Self::Gaussian { mean, variance } => Ok((x - mean) / variance),
            Self::Exponential { scale } => {
                if x <= 0.0 {
                    return Err(Error::Domain(format!(
                        "Exponential tilt requires x > 0, got x = {x}"
                    )));
                }
                Ok(1.0 / scale - 1.0 / x)
            }
        }
    }

    /// Tilting point λ*(x) with Λ'(λ*) = x. Identical to `rate_function_deriv`
    /// by the envelope theorem; kept as a named operation for readability.
    pub fn tilt_point(&self, x: f64) -> Result<f64> {
        self.rate_function_deriv(x)
    }

    /// Variance of the exponentially tilted distribution centered at x,
    /// i.e. Λ''(λ*(x)).
    pub fn tilted_variance(&self, x: f64) -> Result<f64> {
        match *self {
            Self::Gaussian { variance, .. } => Ok(variance),
            Self::Exponential { .. } => {
                if x <= 0.0 {
                    return Err(Error::Domain(format!(
                        "Exponential tilted variance requires x > 0, got x = {x}"
                    )));
                }
                // β²/(1−βλ*)² with 1−βλ* = β/x collapses to x².
                Ok(x * x)
            }
        }
    }
}

/// An ordered collection of alternatives with a unique best (largest mean).
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    alternatives: Vec<AlternativeModel>,
    best: usize,
}

impl ProblemInstance {
    pub fn new(alternatives: Vec<AlternativeModel>) -> Result<Self> {
        if alternatives.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "an instance needs k >= 2 alternatives, got {}",
                alternatives.len()
            )));
        }
        let mut best = 0;
        for (i, alt) in alternatives.iter().enumerate().skip(1) {
            if alt.mean() > alternatives[best].mean() {
                best = i;
            }
        }
        let best_mean = alternatives[best].mean();
        let ties = alternatives.iter().filter(|a| a.mean() == best_mean).count();
        if ties != 1 {
            return Err(Error::InvalidParameter(
                "the largest mean must be attained by exactly one alternative".into(),
            ));
        }
        Ok(Self { alternatives, best })
    }

    /// Gaussian instance from parallel mean/variance lists.
    pub fn gaussian(means: &[f64], variances: &[f64]) -> Result<Self> {
        if means.len() != variances.len() {
            return Err(Error::InvalidParameter(format!(
                "means ({}) and variances ({}) must have equal length",
                means.len(),
                variances.len()
            )));
        }
        let alts = means
            .iter()
            .zip(variances)
            .map(|(&m, &v)| AlternativeModel::gaussian(m, v))
            .collect::<Result<Vec<_>>>()?;
        Self::new(alts)
    }

    /// Exponential instance from a list of scales.
    pub fn exponential(scales: &[f64]) -> Result<Self> {
        let alts = scales
            .iter()
            .map(|&b| AlternativeModel::exponential(b))
            .collect::<Result<Vec<_>>>()?;
        Self::new(alts)
    }

    pub fn k(&self) -> usize {
        self.alternatives.len()
    }

    pub fn best_index(&self) -> usize {
        self.best
    }

    pub fn alternatives(&self) -> &[AlternativeModel] {
        &self.alternatives
    }

    pub fn alternative(&self, i: usize) -> &AlternativeModel {
        &self.alternatives[i]
    }

    pub fn means(&self) -> Vec<f64> {
        self.alternatives.iter().map(|a| a.mean()).collect()
    }

    pub fn variances(&self) -> Vec<f64> {
        self.alternatives.iter().map(|a| a.variance()).collect()
    }

    pub fn is_gaussian(&self) -> bool {
        self.alternatives.iter().all(|a| a.is_gaussian())
    }

    /// Smallest mean across alternatives.
    pub fn min_mean(&self) -> f64 {
        self.alternatives.iter().map(|a| a.mean()).fold(f64::INFINITY, f64::min)
    }
}

/// Pairwise large-deviations quantities for one (best, suboptimal) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwiseQuantities {
    /// Crossing point μ where the tilted means of the two alternatives meet.
    pub crossing: f64,
    /// Pairwise decay rate G = p1·I_1(μ) + pj·I_j(μ).
    pub rate: f64,
    /// Tilting point of the best alternative at μ (non-positive).
    pub tilt_best: f64,
    /// Tilting point of the suboptimal alternative at μ (non-negative).
    pub tilt_subopt: f64,
    /// Expansion prefactor λ_j*·pj·σ̃ with σ̃² the ratio-weighted tilted variance.
    pub prefactor: f64,
}

/// Compute crossing point, rate, tilting points and prefactor for a pair.
///
/// The Gaussian crossing point has the closed form
/// `μ = (p1·m1/σ1² + pj·mj/σj²) / (p1/σ1² + pj/σj²)`; the Exponential one is
/// found by bisection on `p1·I_1'(μ) + pj·I_j'(μ)`, which is strictly
/// increasing on `(m_j, m_1)`.
pub fn pairwise_quantities(
    best: &AlternativeModel,
    subopt: &AlternativeModel,
    p1: f64,
    pj: f64,
) -> Result<PairwiseQuantities> {
    if !(p1 > 0.0) || !(pj > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sampling ratios must be strictly positive, got p1 = {p1}, pj = {pj}"
        )));
    }
    let (m1, mj) = (best.mean(), subopt.mean());
    if !(m1 > mj) {
        return Err(Error::InvalidParameter(format!(
            "the best mean must exceed the suboptimal mean, got {m1} <= {mj}"
        )));
    }

    let crossing = match (best, subopt) {
        (
            AlternativeModel::Gaussian { mean: m1, variance: v1 },
            AlternativeModel::Gaussian { mean: mj, variance: vj },
        ) => {
            let w1 = p1 / v1;
            let wj = pj / vj;
            (w1 * m1 + wj * mj) / (w1 + wj)
        }
        _ => bisect_crossing(best, subopt, p1, pj)?,
    };

    let rate = p1 * best.rate_function(crossing)? + pj * subopt.rate_function(crossing)?;
    let tilt_best = best.tilt_point(crossing)?;
    let tilt_subopt = subopt.tilt_point(crossing)?;
    let pooled_tilted_var =
        best.tilted_variance(crossing)? / p1 + subopt.tilted_variance(crossing)? / pj;
    let prefactor = tilt_subopt * pj * pooled_tilted_var.sqrt();

    Ok(PairwiseQuantities { crossing, rate, tilt_best, tilt_subopt, prefactor })
}

/// Bisection for the crossing point on [m_j + ε, m_1 − ε].
fn bisect_crossing(
    best: &AlternativeModel,
    subopt: &AlternativeModel,
    p1: f64,
    pj: f64,
) -> Result<f64> {
    let (m1, mj) = (best.mean(), subopt.mean());
    let span = m1 - mj;
    let eps = 1e-12 * span;
    let mut lo = mj + eps;
    let mut hi = m1 - eps;
    let h = |x: f64| -> Result<f64> {
        Ok(p1 * best.rate_function_deriv(x)? + pj * subopt.rate_function_deriv(x)?)
    };
    // h is strictly increasing: negative near m_j, positive near m_1.
    if h(lo)? > 0.0 {
        return Ok(lo);
    }
    if h(hi)? < 0.0 {
        return Ok(hi);
    }
    while hi - lo > 1e-12 * span.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if h(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
