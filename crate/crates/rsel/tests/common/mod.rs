//! Independent numeric oracles for the integration tests.
//!
//! Everything here deliberately avoids the library's own closed forms:
//! rate functions come from direct 1-D maximization of λx − Λ(λ), crossing
//! points and critical points from direct minimization of the rate sums,
//! normal CDFs from statrs, and the exponential-pair probability from the
//! regularized incomplete beta function.

#![allow(dead_code)]

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::beta::beta_reg;

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Golden-section maximization of a unimodal function on [lo, hi].
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = f(x1);
        }
        if (hi - lo).abs() < 1e-14 * (1.0 + hi.abs()) {
            break;
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// Golden-section minimization.
pub fn golden_min<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> (f64, f64) {
    let (x, v) = golden_max(|t| -f(t), lo, hi);
    (x, -v)
}

/// Numeric Legendre-Fenchel transform sup_λ { λx − Λ(λ) } for a CGF given
/// as a closure, searched over (λ_lo, λ_hi).
pub fn fenchel_rate<F: Fn(f64) -> f64>(cgf: F, x: f64, lambda_lo: f64, lambda_hi: f64) -> f64 {
    golden_max(|l| l * x - cgf(l), lambda_lo, lambda_hi).1
}

/// Gaussian CGF closure.
pub fn gaussian_cgf(mean: f64, variance: f64) -> impl Fn(f64) -> f64 {
    move |l| mean * l + variance * l * l / 2.0
}

/// Exponential CGF closure (diverges at 1/scale; callers bound the search).
pub fn exponential_cgf(scale: f64) -> impl Fn(f64) -> f64 {
    move |l| -(1.0 - scale * l).ln()
}

/// Pairwise decay rate by direct minimization of p1·I1(x) + pj·Ij(x) over
/// the crossing interval, with the rate functions themselves computed by the
/// numeric Fenchel transform. Returns (crossing, rate).
pub fn variational_pair_rate<F1, F2>(
    rate_best: F1,
    rate_sub: F2,
    p1: f64,
    pj: f64,
    m_sub: f64,
    m_best: f64,
) -> (f64, f64)
where
    F1: Fn(f64) -> f64,
    F2: Fn(f64) -> f64,
{
    let span = m_best - m_sub;
    golden_min(
        |x| p1 * rate_best(x) + pj * rate_sub(x),
        m_sub + 1e-12 * span,
        m_best - 1e-12 * span,
    )
}

/// Standard normal CDF from statrs (independent of the libm-erfc path).
pub fn normal_cdf_ref(x: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

/// Exact P(X̄_best <= X̄_sub) for an Exponential pair: with
/// X̄_i = (β_i/T_i)·Gamma(T_i), the event reduces to a Beta(T1, T2) tail.
pub fn exponential_pair_exact_pics(beta1: f64, beta2: f64, t1: u64, t2: u64) -> f64 {
    let c = (beta2 * t1 as f64) / (beta1 * t2 as f64);
    beta_reg(t1 as f64, t2 as f64, c / (1.0 + c))
}

/// Central finite difference.
pub fn central_diff<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// P(Y_0 <= min_{i>0} Y_i) for independent Gaussians Y_i ~ N(means[i],
/// sds[i]²), by Simpson quadrature of φ_0(x)·Π_{i>0}(1 − Φ_i(x)). Resolves
/// probabilities far below Monte Carlo reach.
pub fn gaussian_min_event_probability(means: &[f64], sds: &[f64], n_points: usize) -> f64 {
    let spread = sds.iter().cloned().fold(0.0f64, f64::max);
    let lo = means.iter().cloned().fold(f64::INFINITY, f64::min) - 12.0 * spread;
    let hi = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 12.0 * spread;
    let n = if n_points % 2 == 0 { n_points + 1 } else { n_points };
    let h = (hi - lo) / (n - 1) as f64;
    let integrand = |x: f64| -> f64 {
        let z0 = (x - means[0]) / sds[0];
        let density = (-0.5 * z0 * z0).exp() / (sds[0] * (2.0 * std::f64::consts::PI).sqrt());
        let mut tail_product = 1.0;
        for i in 1..means.len() {
            let n_i = Normal::new(means[i], sds[i]).unwrap();
            tail_product *= 1.0 - n_i.cdf(x);
        }
        density * tail_product
    };
    let mut acc = integrand(lo) + integrand(hi);
    for i in 1..n - 1 {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * integrand(lo + i as f64 * h);
    }
    acc * h / 3.0
}

/// Smallest eigenvalue of a symmetric matrix by cyclic Jacobi rotations.
pub fn min_eigenvalue_symmetric(matrix: &[Vec<f64>]) -> f64 {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    for _ in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-30 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..n {
                    let aip = a[i][p];
                    let aiq = a[i][q];
                    a[i][p] = c * aip - s * aiq;
                    a[i][q] = s * aip + c * aiq;
                }
                for i in 0..n {
                    let api = a[p][i];
                    let aqi = a[q][i];
                    a[p][i] = c * api - s * aqi;
                    a[q][i] = s * api + c * aqi;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod self_checks {
    use super::*;

    #[test]
    fn golden_section_finds_parabola_vertex() {
        // Derivative-free search resolves the argmax to ~sqrt(ε) and the
        // maximum value itself to ~ε.
        let (x, v) = golden_max(|t| -(t - 0.3) * (t - 0.3) + 2.0, -5.0, 5.0);
        assert!((x - 0.3).abs() < 1e-7);
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn jacobi_eigenvalues() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        let m = vec![vec![2.0, 1.0], vec![1.0, 2.0]];
        assert!((min_eigenvalue_symmetric(&m) - 1.0).abs() < 1e-9);
    }
}
