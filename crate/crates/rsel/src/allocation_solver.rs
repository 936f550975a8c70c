//! Static allocation solvers for Gaussian instances.
//!
//! `solve_v_ell` minimizes the order-ℓ PICS approximation over the open
//! probability simplex. For even ℓ the objective is strictly convex with a
//! unique interior minimizer, characterized by two optimality conditions:
//!
//! 1. equal scores across suboptimal alternatives, and
//! 2. the balance equation p1²/σ1² = Σ_{j≠1} pj²/σj².
//!
//! The solve runs in two phases. A projected-gradient phase with Armijo
//! backtracking makes monotone global progress from the starting point; it
//! runs on ln V_ℓ because the raw objective spans hundreds of orders of
//! magnitude at large budgets (the minimizer is unchanged and monotonicity
//! in V_ℓ is preserved). Projection steps zig-zag near the minimizer, so a
//! polish phase then solves the optimality system directly by nested
//! bisection: the score is strictly decreasing in pj at fixed p1, the
//! equalized suboptimal mass is strictly decreasing in the common score
//! level, and the system has a unique root, which bisection reaches at
//! residuals ~1e−12.
//!
//! `solve_roa` solves the budget-free limit of the same system, where the
//! score degenerates to the pair statistic R_j itself: equalize R_j subject
//! to the balance equation, again by nested bisection (here the inner level
//! has a closed form).

use crate::alt_models::ProblemInstance;
use crate::error::{Error, Result};
use crate::expansion::{score, SamplingRatios, MAX_ORDER};

/// Residuals of the optimality conditions at a candidate allocation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalityResidual {
    /// max − min of the suboptimal scores.
    pub score_spread: f64,
    /// p1²/σ1² − Σ_{j≠1} pj²/σj².
    pub balance_gap: f64,
}

const PGD_MAX_ITERS: usize = 2_000;
const ARMIJO_C: f64 = 1e-4;
const ARMIJO_SHRINK: f64 = 0.5;
const RATIO_CLAMP: f64 = 1e-9;
const BISECT_ITERS: usize = 90;

fn require_gaussian(instance: &ProblemInstance, what: &str) -> Result<()> {
    if !instance.is_gaussian() {
        return Err(Error::UnsupportedModel(format!("{what} requires a Gaussian instance")));
    }
    Ok(())
}

fn check_solver_inputs(instance: &ProblemInstance, budget: f64, order: usize) -> Result<()> {
    require_gaussian(instance, "solve_v_ell")?;
    if order % 2 != 0 {
        return Err(Error::UnsupportedOrder(
            "even order required: odd-order approximations are not convex".into(),
        ));
    }
    if order > MAX_ORDER {
        return Err(Error::UnsupportedOrder(format!("order {order} exceeds {MAX_ORDER}")));
    }
    if !(budget > 0.0) {
        return Err(Error::Domain("budget must be positive".into()));
    }
    Ok(())
}

/// Correction series of U_ℓ; strictly positive for even orders.
fn series(x: f64, budget: f64, order: usize) -> f64 {
    let mut acc = 1.0;
    let inv = 1.0 / (x * budget);
    let mut pow = 1.0;
    let mut fact = 1.0;
    for l in 1..=order {
        fact *= (2 * l - 1) as f64;
        pow *= inv;
        acc += if l % 2 == 1 { -fact * pow } else { fact * pow };
    }
    acc
}

/// |U_ℓ'(x)| / A(x) where A is the exponential envelope: T/2 + tail for even
/// orders.
fn abs_uprime_over_envelope(x: f64, budget: f64, order: usize) -> f64 {
    let mut odd_fact = 1.0;
    for l in 1..=(order + 1) {
        odd_fact *= (2 * l - 1) as f64;
    }
    // Even orders: U' = A·(−T/2 − tail) with tail > 0.
    0.5 * budget + odd_fact / (2.0 * x.powi(order as i32 + 1) * budget.powi(order as i32))
}

/// ln of the suboptimal score at (p1, pj); stable for any budget.
fn log_score(
    gap_sq: f64,
    v1: f64,
    vj: f64,
    p1: f64,
    pj: f64,
    budget: f64,
    order: usize,
) -> f64 {
    let denom = v1 / p1 + vj / pj;
    let r = gap_sq / denom;
    let weight = (vj / (pj * pj)) / denom;
    -0.5 * budget * r - 0.5 * r.ln() + abs_uprime_over_envelope(r, budget, order).ln()
        + r.ln()
        + weight.ln()
}

/// ln V_ℓ(p) and its gradient, evaluated in log space.
fn log_objective_and_grad(
    instance: &ProblemInstance,
    p: &[f64],
    budget: f64,
    order: usize,
) -> Result<(f64, Vec<f64>)> {
    let k = instance.k();
    let best = instance.best_index();
    let v1 = instance.alternative(best).variance();
    let m1 = instance.alternative(best).mean();

    let mut log_terms = Vec::with_capacity(k - 1);
    let mut idx = Vec::with_capacity(k - 1);
    let mut dr_dpj = Vec::with_capacity(k - 1);
    let mut dr_dp1 = Vec::with_capacity(k - 1);
    let mut ratio_du = Vec::with_capacity(k - 1);
    for j in 0..k {
        if j == best {
            continue;
        }
        let vj = instance.alternative(j).variance();
        let gap = m1 - instance.alternative(j).mean();
        let denom = v1 / p[best] + vj / p[j];
        let r = gap * gap / denom;
        let s = series(r, budget, order);
        if !(s > 0.0) {
            return Err(Error::Numeric(format!(
                "order-{order} correction series is non-positive at R = {r}"
            )));
        }
        log_terms.push(-0.5 * budget * r - 0.5 * r.ln() + s.ln());
        idx.push(j);
        dr_dpj.push(r * (vj / (p[j] * p[j])) / denom);
        dr_dp1.push(r * (v1 / (p[best] * p[best])) / denom);
        // U'/U = (−T/2 − tail)/series for even orders.
        ratio_du.push(-abs_uprime_over_envelope(r, budget, order) / s);
    }

    let max_log = log_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = log_terms.iter().map(|&l| (l - max_log).exp()).collect();
    let z: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= z;
    }
    let log_v = max_log + z.ln();

    let mut grad = vec![0.0; k];
    for t in 0..idx.len() {
        let scale = weights[t] * ratio_du[t];
        grad[idx[t]] += scale * dr_dpj[t];
        grad[best] += scale * dr_dp1[t];
    }
    Ok((log_v, grad))
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cssv = 0.0;
    let mut rho = 0;
    for (i, &ui) in u.iter().enumerate() {
        cssv += ui;
        let theta = (cssv - 1.0) / (i + 1) as f64;
        if ui - theta > 0.0 {
            rho = i + 1;
        }
    }
    let sum_top: f64 = u.iter().take(rho).sum();
    let theta = (sum_top - 1.0) / rho as f64;
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

fn clamp_interior(p: &mut [f64]) {
    let mut sum = 0.0;
    for x in p.iter_mut() {
        *x = x.max(RATIO_CLAMP);
        sum += *x;
    }
    for x in p.iter_mut() {
        *x /= sum;
    }
}

/// Projected-gradient phase; returns the iterate and the ln V_ℓ trace
/// (monotone non-increasing by the Armijo contract).
fn pgd_phase(
    instance: &ProblemInstance,
    budget: f64,
    order: usize,
    start: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut p = start.to_vec();
    clamp_interior(&mut p);
    let (mut f, mut g) = log_objective_and_grad(instance, &p, budget, order)?;
    let mut trace = vec![f];
    let mut step = 1.0 / (1.0 + g.iter().map(|x| x.abs()).fold(0.0, f64::max));

    for _ in 0..PGD_MAX_ITERS {
        let mut accepted = false;
        let mut candidate = Vec::new();
        let mut f_new = f;
        for _ in 0..60 {
            let trial: Vec<f64> = p.iter().zip(&g).map(|(&pi, &gi)| pi - step * gi).collect();
            let mut proj = project_simplex(&trial);
            clamp_interior(&mut proj);
            let decrease_ref: f64 =
                proj.iter().zip(&p).zip(&g).map(|((&a, &b), &gi)| (a - b) * gi).sum();
            match log_objective_and_grad(instance, &proj, budget, order) {
                Ok((fv, _)) if fv <= f + ARMIJO_C * decrease_ref => {
                    candidate = proj;
                    f_new = fv;
                    accepted = true;
                    break;
                }
                _ => step *= ARMIJO_SHRINK,
            }
        }
        if !accepted {
            break;
        }
        let moved: f64 =
            candidate.iter().zip(&p).map(|(&a, &b)| (a - b).abs()).fold(0.0, f64::max);
        p = candidate;
        let (_, g_new) = log_objective_and_grad(instance, &p, budget, order)?;
        f = f_new;
        g = g_new;
        trace.push(f);
        step *= 2.0;
        if moved < 1e-12 {
            break;
        }
    }
    Ok((p, trace))
}

/// Polish phase: solve the optimality system by nested bisection.
///
/// Outer level: the balance gap is driven to zero in p1. Middle level: given
/// p1, the common log-score level θ is driven so the equalized suboptimal
/// ratios sum to 1 − p1. Inner level: given (p1, θ), each pj is the unique
/// root of ln score_j(pj) = θ.
fn equalize_phase(
    instance: &ProblemInstance,
    budget: f64,
    order: usize,
) -> Result<Vec<f64>> {
    let k = instance.k();
    let best = instance.best_index();
    let v1 = instance.alternative(best).variance();
    let m1 = instance.alternative(best).mean();
    let subs: Vec<usize> = (0..k).filter(|&j| j != best).collect();
    let gaps_sq: Vec<f64> = subs
        .iter()
        .map(|&j| {
            let g = m1 - instance.alternative(j).mean();
            g * g
        })
        .collect();
    let vars: Vec<f64> = subs.iter().map(|&j| instance.alternative(j).variance()).collect();

    let pj_for = |p1: f64, theta: f64, t: usize| -> f64 {
        let mut lo = 1e-12;
        let mut hi = 4.0;
        for _ in 0..BISECT_ITERS {
            let mid = 0.5 * (lo + hi);
            let ls = log_score(gaps_sq[t], v1, vars[t], p1, mid, budget, order);
            if ls > theta {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };

    let ratios_for = |p1: f64| -> Vec<f64> {
        if subs.len() == 1 {
            let mut p = vec![0.0; k];
            p[best] = p1;
            p[subs[0]] = 1.0 - p1;
            return p;
        }
        // Bracket θ by the scores at the equal split of the remaining mass.
        let equal = (1.0 - p1) / subs.len() as f64;
        let mut theta_lo = f64::INFINITY;
        let mut theta_hi = f64::NEG_INFINITY;
        for t in 0..subs.len() {
            let ls = log_score(gaps_sq[t], v1, vars[t], p1, equal, budget, order);
            theta_lo = theta_lo.min(ls);
            theta_hi = theta_hi.max(ls);
        }
        let mut lo = theta_lo;
        let mut hi = theta_hi;
        for _ in 0..BISECT_ITERS {
            let mid = 0.5 * (lo + hi);
            let sum: f64 = (0..subs.len()).map(|t| pj_for(p1, mid, t)).sum();
            if sum > 1.0 - p1 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let theta = 0.5 * (lo + hi);
        let mut p = vec![0.0; k];
        p[best] = p1;
        for t in 0..subs.len() {
            p[subs[t]] = pj_for(p1, theta, t);
        }
        // Absorb the residual mass mismatch proportionally.
        let sum_sub: f64 = subs.iter().map(|&j| p[j]).sum();
        let scale = (1.0 - p1) / sum_sub;
        for &j in &subs {
            p[j] *= scale;
        }
        p
    };

    let balance = |p: &[f64]| -> f64 {
        let mut b = p[best] * p[best] / v1;
        for (t, &j) in subs.iter().enumerate() {
            b -= p[j] * p[j] / vars[t];
        }
        b
    };

    let mut lo = 1e-9;
    let mut hi = 1.0 - 1e-9;
    for _ in 0..BISECT_ITERS {
        let mid = 0.5 * (lo + hi);
        if balance(&ratios_for(mid)) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ratios_for(0.5 * (lo + hi)))
}

/// Minimize V_ℓ from a caller-supplied starting point.
pub fn solve_v_ell_from(
    instance: &ProblemInstance,
    budget: f64,
    order: usize,
    start: &SamplingRatios,
) -> Result<SamplingRatios> {
    let (ratios, _) = solve_v_ell_with_trace(instance, budget, order, start)?;
    Ok(ratios)
}

/// As [`solve_v_ell_from`], also returning the ln V_ℓ values of the descent
/// iterates (monotone non-increasing).
pub fn solve_v_ell_with_trace(
    instance: &ProblemInstance,
    budget: f64,
    order: usize,
    start: &SamplingRatios,
) -> Result<(SamplingRatios, Vec<f64>)> {
    check_solver_inputs(instance, budget, order)?;
    if start.len() != instance.k() {
        return Err(Error::InvalidParameter("start length does not match instance".into()));
    }

    let (descent, trace) = pgd_phase(instance, budget, order, start.as_slice())?;
    let polished = equalize_phase(instance, budget, order)?;
    // The descent iterate and the system root must agree; a large gap means
    // one of the two phases failed.
    let (f_descent, _) = log_objective_and_grad(instance, &descent, budget, order)?;
    let (f_polished, _) = log_objective_and_grad(instance, &polished, budget, order)?;
    if f_polished > f_descent + 1e-6 {
        return Err(Error::Solver(format!(
            "polish increased the objective: {f_polished} > {f_descent}"
        )));
    }

    let ratios = SamplingRatios::new(polished)
        .map_err(|e| Error::Solver(format!("iterate left the open simplex: {e}")))?;
    let res = kkt_residuals(instance, &ratios, budget, order)?;
    let scale = suboptimal_score_scale(instance, &ratios, budget, order)?;
    if res.score_spread > 1e-8 * scale.max(1e-300) || res.balance_gap.abs() > 1e-8 {
        return Err(Error::Solver(format!(
            "optimality residuals too large: score_spread = {:.3e} (scale {:.3e}), \
             balance_gap = {:.3e}",
            res.score_spread, scale, res.balance_gap
        )));
    }
    Ok((ratios, trace))
}

/// Minimize V_ℓ over the simplex from the uniform starting point.
pub fn solve_v_ell(instance: &ProblemInstance, budget: f64, order: usize) -> Result<SamplingRatios> {
    solve_v_ell_from(instance, budget, order, &SamplingRatios::uniform(instance.k()))
}

fn suboptimal_score_scale(
    instance: &ProblemInstance,
    ratios: &SamplingRatios,
    budget: f64,
    order: usize,
) -> Result<f64> {
    let best = instance.best_index();
    let mut max = 0.0f64;
    for j in 0..instance.k() {
        if j != best {
            max = max.max(score(instance, j, ratios, budget, order)?);
        }
    }
    Ok(max)
}

/// Score spread and balance gap at a candidate allocation.
pub fn kkt_residuals(
    instance: &ProblemInstance,
    ratios: &SamplingRatios,
    budget: f64,
    order: usize,
) -> Result<OptimalityResidual> {
    require_gaussian(instance, "kkt_residuals")?;
    let best = instance.best_index();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for j in 0..instance.k() {
        if j == best {
            continue;
        }
        let s = score(instance, j, ratios, budget, order)?;
        lo = lo.min(s);
        hi = hi.max(s);
    }
    let mut balance = ratios[best] * ratios[best] / instance.alternative(best).variance();
    for j in 0..instance.k() {
        if j != best {
            balance -= ratios[j] * ratios[j] / instance.alternative(j).variance();
        }
    }
    Ok(OptimalityResidual { score_spread: hi - lo, balance_gap: balance })
}

/// Solve the rate-balance system: R_j equal across suboptimal alternatives
/// and p1²/σ1² = Σ pj²/σj², by nested bisection.
pub fn solve_roa(instance: &ProblemInstance) -> Result<SamplingRatios> {
    require_gaussian(instance, "solve_roa")?;
    let k = instance.k();
    let best = instance.best_index();
    let m1 = instance.alternative(best).mean();
    let v1 = instance.alternative(best).variance();
    let gaps: Vec<f64> = (0..k)
        .map(|j| {
            let g = m1 - instance.alternative(j).mean();
            g * g
        })
        .collect();
    let vars = instance.variances();

    // Given p1 and a common pair statistic r, each suboptimal ratio is
    // pj = σj² / (gapj²/r − σ1²/p1); the inner bisection matches their sum
    // to 1 − p1, the outer drives the balance gap to zero.
    let ratios_for = |p1: f64, r: f64| -> Vec<f64> {
        let a = v1 / p1;
        (0..k)
            .map(|j| if j == best { p1 } else { vars[j] / (gaps[j] / r - a) })
            .collect()
    };
    let sum_sub = |p1: f64, r: f64| -> f64 {
        let a = v1 / p1;
        (0..k).filter(|&j| j != best).map(|j| vars[j] / (gaps[j] / r - a)).sum()
    };
    let inner = |p1: f64| -> f64 {
        let r_cap = (0..k)
            .filter(|&j| j != best)
            .map(|j| gaps[j] * p1 / v1)
            .fold(f64::INFINITY, f64::min);
        let mut lo = 0.0;
        let mut hi = r_cap * (1.0 - 1e-14);
        for _ in 0..BISECT_ITERS {
            let mid = 0.5 * (lo + hi);
            if sum_sub(p1, mid) < 1.0 - p1 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let balance_gap = |p: &[f64]| -> f64 {
        let mut b = p[best] * p[best] / v1;
        for j in 0..k {
            if j != best {
                b -= p[j] * p[j] / vars[j];
            }
        }
        b
    };

    let mut lo = 1e-12;
    let mut hi = 1.0 - 1e-12;
    for _ in 0..BISECT_ITERS {
        let mid = 0.5 * (lo + hi);
        let p = ratios_for(mid, inner(mid));
        if balance_gap(&p) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p1 = 0.5 * (lo + hi);
    let mut p = ratios_for(p1, inner(p1));
    // Remove the residual rounding drift from the sum constraint.
    let sum: f64 = p.iter().sum();
    for x in &mut p {
        *x /= sum;
    }
    let ratios = SamplingRatios::new(p)?;

    let spread = {
        let rs: Vec<f64> = (0..k)
            .filter(|&j| j != best)
            .map(|j| crate::expansion::r_j(instance, j, &ratios).unwrap())
            .collect();
        let lo = rs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = rs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    };
    let gap = balance_gap(ratios.as_slice());
    if spread > 1e-10 || gap.abs() > 1e-10 {
        return Err(Error::Solver(format!(
            "rate balance not reached: spread = {spread:.3e}, balance_gap = {gap:.3e}"
        )));
    }
    Ok(ratios)
}
