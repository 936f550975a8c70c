//! Critical points, simultaneous-incorrect-comparison (SIC) rates, the
//! refined three-alternative approximation, and the low-confidence trigger.
//!
//! For a subset S of alternatives containing the best, the probability that
//! the best's sample mean falls below every other sample mean in S decays at
//! rate
//!
//! ```text
//! J_S(x1*) = min_{x1} [ p1·I_1(x1) + Σ_{i∈S\{1}} p_i·I_i(max(x1, m_i)) ],
//! ```
//!
//! whose minimizer x1* is the *critical point*. Alternatives with
//! `m_i >= x1*` are "active": they need not move for the joint event, each
//! one lowering the polynomial order `l_S = (|S|−1) − #active` of the
//! event's probability. Subsets with `l_S = 1` decay as slowly as single
//! pairwise mistakes and must enter a refined inclusion-exclusion
//! approximation with alternating signs.
//!
//! The polynomial coefficient c_S comes from a block decomposition of the
//! covariance Σ = (σ1²/p1)·11ᵀ + diag(σ_i²/p_i): with V the inactive block
//! and U the active block,
//!
//! ```text
//! c_S = (2π)^{−|V|/2} · det(Σ_c)^{−1/2} / Π_{i∈V}(λ̄_i*·p_i)
//!       · E[ 1{U ≥ 0} · exp(−γ·(1ᵀΣ_UU⁻¹U)²/2) ],
//! ```
//!
//! where Σ_c = Σ_VV − Σ_VU·Σ_UU⁻¹·Σ_UV and γ = (σ1²/p1)²·1ᵀΣ_c⁻¹1. All
//! blocks are diagonal-plus-rank-one, so determinants and quadratic forms
//! reduce to scalar recurrences and the expectation is estimated by Monte
//! Carlo with a shared common-shock sampler.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::alt_models::ProblemInstance;
use crate::error::{Error, Result};
use crate::expansion::{u_ell, ApproxReport, ApproxVariant, PairTerm, SamplingRatios};
use crate::policies::AllocationState;

/// Maximum instance size for subset enumeration.
pub const MAX_SUBSET_K: usize = 12;

/// Critical-point analysis of one subset of alternatives.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetAnalysis {
    /// Sorted member indices, always containing the best.
    pub subset: Vec<usize>,
    /// Critical point x1*.
    pub critical_point: f64,
    /// Decay rate J_S(x1*).
    pub rate: f64,
    /// Number of active suboptimal members (mean >= critical point).
    pub active_count: usize,
    /// Polynomial order l_S = (|S|−1) − active_count.
    pub poly_order: usize,
}

/// One contribution to the refined expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedTerm {
    pub subset: Vec<usize>,
    /// +1 for even-sized overlap (pairs), alternating with subset size.
    pub sign: f64,
    pub rate: f64,
    /// Polynomial coefficient c_S.
    pub prefactor: f64,
    /// Monte Carlo standard error of the term value.
    pub mc_stderr: f64,
    pub value: f64,
}

/// Refined inclusion-exclusion approximation of 1 − PCS.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedReport {
    pub terms: Vec<RefinedTerm>,
    pub total: f64,
}

fn validate_subset(instance: &ProblemInstance, subset: &[usize]) -> Result<Vec<usize>> {
    let mut s: Vec<usize> = subset.to_vec();
    s.sort_unstable();
    s.dedup();
    if s.len() != subset.len() {
        return Err(Error::InvalidParameter("subset contains duplicate indices".into()));
    }
    if s.iter().any(|&i| i >= instance.k()) {
        return Err(Error::InvalidParameter("subset index out of range".into()));
    }
    if !s.contains(&instance.best_index()) {
        return Err(Error::InvalidParameter("subset must contain the best alternative".into()));
    }
    if s.len() < 2 {
        return Err(Error::InvalidParameter(
            "subset needs at least one suboptimal alternative".into(),
        ));
    }
    Ok(s)
}

/// Minimize J_S over the mean range and classify the subset.
///
/// J_S is convex with kinks at the suboptimal means; its derivative
/// `p1·I_1'(x) + Σ_{i active at x} p_i·I_i'(x)` is continuous and strictly
/// increasing, so bisection on the derivative is exact.
pub fn critical_point(
    instance: &ProblemInstance,
    ratios: &SamplingRatios,
    subset: &[usize],
) -> Result<SubsetAnalysis> {
    if ratios.len() != instance.k() {
        return Err(Error::InvalidParameter("ratio length does not match instance".into()));
    }
    let s = validate_subset(instance, subset)?;
    let best = instance.best_index();
    let m1 = instance.alternative(best).mean();

    let deriv = |x: f64| -> Result<f64> {
        let mut d = ratios[best] * instance.alternative(best).rate_function_deriv(x)?;
        for &i in &s {
            if i == best {
                continue;
            }
            if instance.alternative(i).mean() <= x {
                d += ratios[i] * instance.alternative(i).rate_function_deriv(x)?;
            }
        }
        Ok(d)
    };

    let lo0 = instance.min_mean();
    let span = m1 - lo0;
    // Exponential rate functions need x > 0; the minimum sits strictly
    // inside (min suboptimal mean, m1) so nudging the bracket is safe.
    let mut lo = lo0 + 1e-14 * span.max(1.0);
    let mut hi = m1 - 1e-14 * span.max(1.0);
    if deriv(lo)? >= 0.0 {
        hi = lo;
    } else if deriv(hi)? <= 0.0 {
        lo = hi;
    } else {
        for _ in 0..200 {
            if hi - lo <= 1e-13 * span.max(1.0) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if deriv(mid)? < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let x_star = 0.5 * (lo + hi);

    let mut rate = ratios[best] * instance.alternative(best).rate_function(x_star)?;
    let mut active = 0;
    for &i in &s {
        if i == best {
            continue;
        }
        let mi = instance.alternative(i).mean();
        if mi >= x_star {
            active += 1;
        } else {
            rate += ratios[i] * instance.alternative(i).rate_function(x_star)?;
        }
    }
    let n = s.len() - 1;
    Ok(SubsetAnalysis {
        subset: s,
        critical_point: x_star,
        rate,
        active_count: active,
        poly_order: n - active,
    })
}

/// Gaussian closed form for the critical point when every suboptimal member
/// of the subset lies below it: the ratio-weighted precision mean.
pub fn gaussian_all_active_point(
    instance: &ProblemInstance,
    ratios: &SamplingRatios,
    subset: &[usize],
) -> Result<f64> {
    if !instance.is_gaussian() {
        return Err(Error::UnsupportedModel("closed form requires a Gaussian instance".into()));
    }
    let s = validate_subset(instance, subset)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for &i in &s {
        let w = ratios[i] / instance.alternative(i).variance();
        num += w * instance.alternative(i).mean();
        den += w;
    }
    Ok(num / den)
}

/// Approximate the probability that the best sample mean falls below every
/// sample mean in `subset` simultaneously:
/// `exp(−T·J_S)·c_S / T^{l_S/2}`, with the Monte Carlo standard error of the
/// c_S expectation propagated to the value.
pub fn sibc_probability_approx<R: Rng>(
    instance: &ProblemInstance,
    ratios: &SamplingRatios,
    subset: &[usize],
    budget: f64,
    mc_budget: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if !instance.is_gaussian() {
        return Err(Error::UnsupportedModel(
            "the SIC expansion is implemented for Gaussian instances".into(),
        ));
    }
    let analysis = critical_point(instance, ratios, subset)?;
    if analysis.subset.len() > MAX_SUBSET_K {
        return Err(Error::Size(format!(
            "subset size {} exceeds the supported maximum {MAX_SUBSET_K}",
            analysis.subset.len()
        )));
    }
    let (c, c_stderr) = subset_prefactor(instance, ratios, &analysis, mc_budget, rng)?;
    let scale = (-budget * analysis.rate).exp() / budget.powf(analysis.poly_order as f64 / 2.0);
    Ok((scale * c, scale * c_stderr))
}

/// c_S and the Monte Carlo standard error of its expectation factor.
fn subset_prefactor<R: Rng>(
    instance: &ProblemInstance,
    ratios: &SamplingRatios,
    analysis: &SubsetAnalysis,
    mc_budget: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let best = instance.best_index();
    let x_star = analysis.critical_point;
    let shared = instance.alternative(best).variance() / ratios[best];

    // Partition the suboptimal members: active (mean >= x1*) keep zero tilt,
    // inactive carry tilt λ̄_i* = I_i'(x1*) > 0.
    let mut active_diag = Vec::new();
    let mut inactive_diag = Vec::new();
    let mut inactive_tilt_mass = Vec::new();
    for &i in &analysis.subset {
        if i == best {
            continue;
        }
        let alt = instance.alternative(i);
        let d = alt.variance() / ratios[i];
        if !d.is_finite() || d <= 0.0 {
            return Err(Error::Numeric(format!(
                "singular covariance entry for alternative {i}"
            )));
        }
        if alt.mean() >= x_star {
            active_diag.push(d);
        } else {
            inactive_diag.push(d);
            inactive_tilt_mass.push(alt.rate_function_deriv(x_star)? * ratios[i]);
        }
    }
    let n_inactive = inactive_diag.len();

    // Diagonal-plus-rank-one identities. With t_U = Σ 1/d_i over the active
    // block, the conditional covariance of the inactive block is
    // Σ_c = diag(d_V) + b·11ᵀ, b = shared/(1 + shared·t_U).
    let t_u: f64 = active_diag.iter().map(|d| 1.0 / d).sum();
    let b = shared / (1.0 + shared * t_u);
    let t_v: f64 = inactive_diag.iter().map(|d| 1.0 / d).sum();
    let det_c: f64 = inactive_diag.iter().product::<f64>() * (1.0 + b * t_v);
    if !(det_c > 0.0) {
        return Err(Error::Numeric("conditional covariance is singular".into()));
    }
    let tilt_product: f64 = inactive_tilt_mass.iter().product();
    if n_inactive > 0 && !(tilt_product > 0.0) {
        return Err(Error::Numeric("vanishing tilt in the inactive block".into()));
    }

    let two_pi = 2.0 * std::f64::consts::PI;
    let base = two_pi.powf(-(n_inactive as f64) / 2.0) / (det_c.sqrt() * tilt_product);

    if active_diag.is_empty() {
        // No conditioning block: the expectation is exactly one.
        return Ok((base, 0.0));
    }

    // E[1{U >= 0}·exp(−γ q²/2)] with U = sqrt(d_i)·Z_i + sqrt(shared)·W and
    // q = (Σ U_i/d_i)/(1 + shared·t_U).
    let gamma = shared * shared * t_v / (1.0 + b * t_v);
    let denom = 1.0 + shared * t_u;
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for _ in 0..mc_budget {
        let w: f64 = rng.sample(StandardNormal);
        let shock = shared.sqrt() * w;
        let mut all_nonneg = true;
        let mut q = 0.0;
        for &d in &active_diag {
            let z: f64 = rng.sample(StandardNormal);
            let u = d.sqrt() * z + shock;
            if u < 0.0 {
                all_nonneg = false;
            }
            q += u / d;
        }
        let val = if all_nonneg { (-0.5 * gamma * (q / denom).powi(2)).exp() } else { 0.0 };
        sum += val;
        sumsq += val * val;
    }
    let n = mc_budget as f64;
    let mean = sum / n;
    let var = (sumsq / n - mean * mean).max(0.0) / n;
    Ok((base * mean, base * var.sqrt()))
}

/// Piecewise refined approximation of 1 − PCS for exactly three Gaussian
/// alternatives. On the high-confidence side of the critical line both
/// pairwise terms carry full weight; on the other side the weaker pair term
/// carries weight one half, the removed half being the simultaneous-mistake
/// correction.
pub fn refined_pics_k3(
    instance: &ProblemInstance,
    ratios: &SamplingRatios,
    budget: f64,
) -> Result<ApproxReport> {
    if instance.k() != 3 {
        return Err(Error::Size(format!(
            "the piecewise refinement needs exactly 3 alternatives, got {}",
            instance.k()
        )));
    }
    if !instance.is_gaussian() {
        return Err(Error::UnsupportedModel("the piecewise refinement is Gaussian-only".into()));
    }
    if ratios.len() != 3 {
        return Err(Error::InvalidParameter("need 3 ratios".into()));
    }
    let best = instance.best_index();
    let mut subs: Vec<usize> = (0..3).filter(|&i| i != best).collect();
    // Order the suboptimal pair by mean: "second" is the runner-up.
    subs.sort_by(|&a, &b| {
        instance
            .alternative(b)
            .mean()
            .partial_cmp(&instance.alternative(a).mean())
            .unwrap()
    });
    let (second, third) = (subs[0], subs[1]);

    let m1 = instance.alternative(best).mean();
    let m2 = instance.alternative(second).mean();
    let m3 = instance.alternative(third).mean();
    let v1 = instance.alternative(best).variance();
    let v3 = instance.alternative(third).variance();
    let critical_line = (v3 / ratios[third]) * (m1 - m2) > (v1 / ratios[best]) * (m2 - m3);

    let norm = 1.0 / (2.0 * std::f64::consts::PI * budget).sqrt();
    let r2 = crate::expansion::r_j(instance, second, ratios)?;
    let r3 = crate::expansion::r_j(instance, third, ratios)?;
    let w3 = if critical_line { 1.0 } else { 0.5 };
    let term2 = u_ell(r2, budget, 0)? * norm;
    let term3 = u_ell(r3, budget, 0)? * norm * w3;
    Ok(ApproxReport {
        per_pair_terms: vec![
            PairTerm { index: second, rate: 0.5 * r2, prefactor: r2.sqrt(), value: term2 },
            PairTerm { index: third, rate: 0.5 * r3, prefactor: r3.sqrt(), value: term3 },
        ],
        total: term2 + term3,
        order: 0,
        budget,
        variant: ApproxVariant::RefinedK3 { critical_line },
    })
}

/// Refined approximation over all subsets with slow polynomial decay
/// (`l_S = 1`), with common random numbers shared across subsets.
pub fn refined_pics_general<R: Rng + Clone>(
    instance: &ProblemInstance,
    ratios: &SamplingRatios,
    budget: f64,
    mc_budget: usize,
    rng: &mut R,
) -> Result<RefinedReport> {
    if !instance.is_gaussian() {
        return Err(Error::UnsupportedModel("the refined expansion is Gaussian-only".into()));
    }
    let k = instance.k();
    if k > MAX_SUBSET_K {
        return Err(Error::Size(format!(
            "subset enumeration supports k <= {MAX_SUBSET_K}, got {k}"
        )));
    }
    let best = instance.best_index();
    let others: Vec<usize> = (0..k).filter(|&i| i != best).collect();
    let base_rng = rng.clone();

    let mut terms = Vec::new();
    let mut total = 0.0;
    for mask in 1u32..(1 << others.len()) {
        let mut subset = vec![best];
        for (bit, &i) in others.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                subset.push(i);
            }
        }
        let analysis = critical_point(instance, ratios, &subset)?;
        if analysis.poly_order != 1 {
            continue;
        }
        let n = subset.len() - 1;
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        // Common random numbers: every subset replays the same stream.
        let mut subset_rng = base_rng.clone();
        let (c, c_stderr) =
            subset_prefactor(instance, ratios, &analysis, mc_budget, &mut subset_rng)?;
        let scale = (-budget * analysis.rate).exp() / budget.sqrt();
        let value = sign * scale * c;
        total += value;
        terms.push(RefinedTerm {
            subset: analysis.subset,
            sign,
            rate: analysis.rate,
            prefactor: c,
            mc_stderr: scale * c_stderr,
            value,
        });
    }
    // Burn the caller's stream so successive calls differ.
    let _: f64 = rng.sample(StandardNormal);
    Ok(RefinedReport { terms, total })
}

/// Low-confidence trigger of the refined sequential policy: true when some
/// third alternative makes a simultaneous mistake against the top two
/// plausible, judged by plug-in estimates at realized ratios. With the
/// estimated best b and runner-up r, the trigger fires if any other j has
///
/// ```text
/// (σ̂_j²/p_j)(m̂_b − m̂_r) > (σ̂_b²/p_b)(m̂_r − m̂_j).
/// ```
pub fn lc_trigger(state: &AllocationState) -> bool {
    let k = state.k();
    if k < 3 {
        return false;
    }
    let best = state.sample_best();
    let second = state.sample_second_best();
    let gap_top = state.mean(best) - state.mean(second);
    // Realized ratios share the same total, so counts substitute for ratios.
    let best_mass = state.variance(best).max(crate::expansion::VARIANCE_FLOOR)
        / state.count(best) as f64;
    for j in 0..k {
        if j == best || j == second {
            continue;
        }
        let lhs = state.variance(j).max(crate::expansion::VARIANCE_FLOOR)
            / state.count(j) as f64
            * gap_top;
        let rhs = best_mass * (state.mean(second) - state.mean(j));
        if lhs > rhs {
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alt_models::pairwise_quantities;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn inst(means: &[f64], vars: &[f64]) -> ProblemInstance {
        ProblemInstance::gaussian(&means.to_vec(), &vars.to_vec()).unwrap()
    }

    #[test]
    fn critical_point_all_active_case() {
        let instance = inst(&[1.0, 0.2, 0.0], &[1.0, 1.0, 1.0]);
        let p = SamplingRatios::uniform(3);
        let a = critical_point(&instance, &p, &[0, 1, 2]).unwrap();
        assert!((a.critical_point - 0.4).abs() < 1e-10);
        assert!((a.rate - 0.28 / 3.0).abs() < 1e-10);
        assert_eq!(a.active_count, 0);
        assert_eq!(a.poly_order, 2);

        let closed = gaussian_all_active_point(&instance, &p, &[0, 1, 2]).unwrap();
        assert!((a.critical_point - closed).abs() < 1e-10);
    }

    #[test]
    fn critical_point_with_active_runner_up() {
        let instance = inst(&[1.0, 0.9, 0.0], &[1.0, 1.0, 1.0]);
        let p = SamplingRatios::uniform(3);
        let a = critical_point(&instance, &p, &[0, 1, 2]).unwrap();
        assert!((a.critical_point - 0.5).abs() < 1e-10);
        assert_eq!(a.active_count, 1);
        assert_eq!(a.poly_order, 1);
        // The rate collapses to the pairwise rate against the far alternative.
        let q = pairwise_quantities(instance.alternative(0), instance.alternative(2), p[0], p[2])
            .unwrap();
        assert!((a.rate - q.rate).abs() < 1e-12);
    }

    #[test]
    fn pair_subsets_reduce_to_pairwise() {
        let instance = inst(&[1.0, 0.3, -0.5], &[1.5, 0.7, 2.0]);
        let p = SamplingRatios::new(vec![0.5, 0.3, 0.2]).unwrap();
        for j in 1..3 {
            let a = critical_point(&instance, &p, &[0, j]).unwrap();
            let q =
                pairwise_quantities(instance.alternative(0), instance.alternative(j), p[0], p[j])
                    .unwrap();
            assert!((a.rate - q.rate).abs() < 1e-10);
            assert!((a.critical_point - q.crossing).abs() < 1e-8);
            assert_eq!(a.poly_order, 1);
        }
    }

    #[test]
    fn critical_point_rejects_bad_subsets() {
        let instance = inst(&[1.0, 0.0], &[1.0, 1.0]);
        let p = SamplingRatios::uniform(2);
        assert!(critical_point(&instance, &p, &[1]).is_err());
        assert!(critical_point(&instance, &p, &[0]).is_err());
        assert!(critical_point(&instance, &p, &[0, 5]).is_err());
    }

    #[test]
    fn subset_rate_monotone_in_subset() {
        let instance = inst(&[1.0, 0.6, 0.3, 0.0], &[1.0, 2.0, 0.5, 1.0]);
        let p = SamplingRatios::new(vec![0.4, 0.2, 0.2, 0.2]).unwrap();
        let pair = critical_point(&instance, &p, &[0, 1]).unwrap();
        let triple = critical_point(&instance, &p, &[0, 1, 2]).unwrap();
        let quad = critical_point(&instance, &p, &[0, 1, 2, 3]).unwrap();
        assert!(pair.rate <= triple.rate + 1e-12);
        assert!(triple.rate <= quad.rate + 1e-12);
    }

    #[test]
    fn sibc_pair_matches_binary_expansion() {
        let instance = inst(&[1.0, 0.0], &[1.0, 1.0]);
        let p = SamplingRatios::uniform(2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (value, stderr) =
            sibc_probability_approx(&instance, &p, &[0, 1], 64.0, 1000, &mut rng).unwrap();
        let expect = crate::expansion::pics_expansion_binary(
            instance.alternative(0),
            instance.alternative(1),
            0.5,
            0.5,
            64.0,
            0,
        )
        .unwrap();
        // No active block: the expectation is exact and the match is exact.
        assert_eq!(stderr, 0.0);
        assert!((value - expect).abs() < 1e-15 * expect.max(1.0));
    }

    #[test]
    fn sibc_decreases_in_budget() {
        let instance = inst(&[1.0, 0.2, 0.0], &[1.0, 1.0, 1.0]);
        let p = SamplingRatios::uniform(3);
        let mut values = Vec::new();
        for &t in &[100.0, 200.0, 400.0] {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let (v, _) =
                sibc_probability_approx(&instance, &p, &[0, 1, 2], t, 20_000, &mut rng).unwrap();
            assert!(v >= 0.0);
            values.push(v);
        }
        assert!(values[0] > values[1] && values[1] > values[2]);
    }

    #[test]
    fn refined_k3_branches() {
        let p = SamplingRatios::uniform(3);

        let high = inst(&[1.0, 0.2, 0.0], &[1.0, 1.0, 1.0]);
        let rep = refined_pics_k3(&high, &p, 200.0).unwrap();
        assert_eq!(rep.variant, ApproxVariant::RefinedK3 { critical_line: true });
        // On the high-confidence branch the refinement equals the plain
        // order-0 approximation.
        let plain = crate::expansion::v_ell(&high, &p, 200.0, 0).unwrap();
        assert!((rep.total - plain.total).abs() < 1e-18);

        let low = inst(&[1.0, 0.9, 0.0], &[1.0, 1.0, 1.0]);
        let rep = refined_pics_k3(&low, &p, 200.0).unwrap();
        assert_eq!(rep.variant, ApproxVariant::RefinedK3 { critical_line: false });
        let plain = crate::expansion::v_ell(&low, &p, 200.0, 0).unwrap();
        assert!(rep.total < plain.total);
    }

    #[test]
    fn refined_k3_jump_across_critical_line() {
        // With m2 = (m1 + m3)/2 and equal variances the critical line sits at
        // p3 = p1; straddle it with a tiny ratio perturbation and check the
        // jump equals half the weaker pair term. The condition
        // (σ3²/p3)(m1−m2) > (σ1²/p1)(m2−m3) holds iff p1 > p3.
        let instance = inst(&[1.0, 0.5, 0.0], &[1.0, 1.0, 1.0]);
        let eps = 1e-6;
        let above = SamplingRatios::new(vec![1.0 / 3.0 + eps, 1.0 / 3.0, 1.0 / 3.0 - eps]).unwrap();
        let below = SamplingRatios::new(vec![1.0 / 3.0 - eps, 1.0 / 3.0, 1.0 / 3.0 + eps]).unwrap();
        let t = 100.0;
        let rep_hi = refined_pics_k3(&instance, &above, t).unwrap();
        let rep_lo = refined_pics_k3(&instance, &below, t).unwrap();
        assert_eq!(rep_hi.variant, ApproxVariant::RefinedK3 { critical_line: true });
        assert_eq!(rep_lo.variant, ApproxVariant::RefinedK3 { critical_line: false });
        let full_third = rep_hi.per_pair_terms[1].value;
        let jump = rep_hi.total - rep_lo.total;
        // The other pair term drifts smoothly by O(|Δp|) across the line,
        // which bounds how sharply the pure jump can be read off.
        assert!(
            (jump - 0.5 * full_third).abs() < 0.05 * full_third,
            "jump {jump} vs half-term {}",
            0.5 * full_third
        );
    }

    #[test]
    fn refined_general_well_separated_equals_pairwise() {
        let instance = inst(&[1.0, 0.1, 0.0], &[0.2, 0.2, 0.2]);
        let p = SamplingRatios::uniform(3);
        // Every multi-alternative subset here has poly order > 1.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let report = refined_pics_general(&instance, &p, 50.0, 10_000, &mut rng).unwrap();
        assert!(report.terms.iter().all(|t| t.subset.len() == 2));
        let plain = crate::expansion::v_ell(&instance, &p, 50.0, 0).unwrap();
        assert!((report.total - plain.total).abs() < 1e-12);
    }

    #[test]
    fn refined_general_negative_triple_on_low_confidence() {
        let instance = inst(&[1.0, 0.9, 0.0], &[1.0, 1.0, 1.0]);
        let p = SamplingRatios::uniform(3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let report = refined_pics_general(&instance, &p, 200.0, 20_000, &mut rng).unwrap();
        let triple = report.terms.iter().find(|t| t.subset.len() == 3).expect("triple term");
        assert_eq!(triple.sign, -1.0);
        assert!(triple.value < 0.0);
        let plain = crate::expansion::v_ell(&instance, &p, 200.0, 0).unwrap();
        assert!(report.total < plain.total);
    }

    #[test]
    fn refined_general_size_guard() {
        let means: Vec<f64> = (0..13).map(|i| -(i as f64)).collect();
        let vars = vec![1.0; 13];
        let instance = inst(&means, &vars);
        let p = SamplingRatios::uniform(13);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            refined_pics_general(&instance, &p, 10.0, 10, &mut rng),
            Err(Error::Size(_))
        ));
    }

    fn exact_state(means: &[f64], vars: &[f64], n: u64) -> AllocationState {
        let mut s = AllocationState::new(means.len());
        for i in 0..means.len() {
            let spread = (vars[i] * (n - 1) as f64 / 2.0).sqrt();
            s.push_sample(i, means[i] + spread).unwrap();
            s.push_sample(i, means[i] - spread).unwrap();
            for _ in 2..n {
                s.push_sample(i, means[i]).unwrap();
            }
        }
        s
    }

    #[test]
    fn trigger_examples() {
        let s = exact_state(&[1.0, 0.2, 0.0], &[1.0, 1.0, 1.0], 10);
        assert!(lc_trigger(&s));
        let s = exact_state(&[1.0, 0.9, 0.0], &[1.0, 1.0, 1.0], 10);
        assert!(!lc_trigger(&s));
        let s = exact_state(&[1.0, 0.0], &[1.0, 1.0], 10);
        assert!(!lc_trigger(&s));
    }

    #[test]
    fn j_s_is_convex_on_grid() {
        let instance = inst(&[1.0, 0.7, 0.3, 0.0], &[1.3, 0.8, 2.0, 1.0]);
        let p = SamplingRatios::new(vec![0.3, 0.3, 0.2, 0.2]).unwrap();
        let subset = [0usize, 1, 2, 3];
        let j_s = |x: f64| -> f64 {
            let best = instance.best_index();
            let mut v = p[best] * instance.alternative(best).rate_function(x).unwrap();
            for &i in &subset {
                if i == best {
                    continue;
                }
                let m = instance.alternative(i).mean();
                v += p[i] * instance.alternative(i).rate_function(x.max(m)).unwrap();
            }
            v
        };
        let lo = instance.min_mean();
        let hi = 1.0;
        let n = 200;
        let h = (hi - lo) / n as f64;
        for i in 1..n {
            let x = lo + i as f64 * h;
            let second = j_s(x - h) - 2.0 * j_s(x) + j_s(x + h);
            assert!(second >= -1e-10, "second difference {second} at x = {x}");
        }
    }
}
