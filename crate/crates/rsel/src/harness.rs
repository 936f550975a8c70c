//! Problem-instance generators, the macro-replication experiment engine,
//! and the exact / brute-force probability oracles.
//!
//! Reproducibility contract: every random draw comes from a ChaCha8 stream
//! keyed by (master seed, replication, alternative). Replications are
//! processed in fixed-size batches and reduced in batch order, so results
//! are bit-identical for any worker-thread count, including the fully
//! sequential build. Within one replication all policies replay the same
//! per-alternative streams (common random numbers): the t-th sample a policy
//! draws for alternative i is the same number for every policy.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::alt_models::{AlternativeModel, ProblemInstance};
use crate::error::{Error, Result};
use crate::expansion::{posthoc_pcs_estimate, PosthocVariant};
use crate::parallel::{map_batches, map_batches_sequential};
use crate::policies::{AllocationState, PolicyKind};
use crate::rng::{aux_stream, derive, sample_stream};

/// Replications per work batch; fixed so scheduling cannot affect results.
const BATCH_SIZE: u64 = 64;

/// Variance assignment for generated instances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceSetting {
    /// All variances equal to the given value.
    Equal(f64),
    /// Quintile groups from the highest means down get 2, 3, 4, 5, 6.
    Increasing,
    /// Quintile groups from the highest means down get 6, 5, 4, 3, 2.
    Decreasing,
}

/// Mean configuration for generated instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceKind {
    /// Means 0.1·(k+1−i) for i = 1..k.
    Stepping,
    /// Means i.i.d. 0.1·k·Uniform[0, 1], redrawn on exact ties.
    Noisy,
}

/// Build a Gaussian instance from a named configuration.
pub fn generate_instance(
    kind: InstanceKind,
    k: usize,
    variance: VarianceSetting,
    seed: u64,
) -> Result<ProblemInstance> {
    if k < 2 {
        return Err(Error::InvalidParameter("instance: k must be >= 2".into()));
    }
    let means: Vec<f64> = match kind {
        InstanceKind::Stepping => (1..=k).map(|i| 0.1 * (k + 1 - i) as f64).collect(),
        InstanceKind::Noisy => {
            let mut rng = aux_stream(seed, 0);
            loop {
                let draw: Vec<f64> =
                    (0..k).map(|_| 0.1 * k as f64 * rng.gen::<f64>()).collect();
                let mut sorted = draw.clone();
                sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                if sorted.windows(2).all(|w| w[0] != w[1]) {
                    break draw;
                }
            }
        }
    };

    let variances: Vec<f64> = match variance {
        VarianceSetting::Equal(v) => {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter(
                    "variance: equal value must be positive".into(),
                ));
            }
            vec![v; k]
        }
        VarianceSetting::Increasing | VarianceSetting::Decreasing => {
            if k % 5 != 0 {
                return Err(Error::InvalidParameter(format!(
                    "variance: grouped settings need k divisible by 5, got {k}"
                )));
            }
            let levels: [f64; 5] = match variance {
                VarianceSetting::Increasing => [2.0, 3.0, 4.0, 5.0, 6.0],
                _ => [6.0, 5.0, 4.0, 3.0, 2.0],
            };
            // Rank positions by mean, highest first; quintile r/(k/5) picks
            // the level.
            let mut order: Vec<usize> = (0..k).collect();
            order.sort_by(|&a, &b| means[b].partial_cmp(&means[a]).unwrap());
            let mut vars = vec![0.0; k];
            for (rank, &pos) in order.iter().enumerate() {
                vars[pos] = levels[rank / (k / 5)];
            }
            vars
        }
    };

    ProblemInstance::gaussian(&means, &variances)
}

/// Instance description inside an experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InstanceSpec {
    Stepping {
        k: usize,
        variance: VarianceSetting,
    },
    Noisy {
        k: usize,
        variance: VarianceSetting,
        #[serde(default)]
        seed: u64,
    },
    Explicit {
        means: Vec<f64>,
        variances: Vec<f64>,
    },
}

impl InstanceSpec {
    pub fn build(&self, redraw_index: Option<u64>) -> Result<ProblemInstance> {
        match self {
            InstanceSpec::Stepping { k, variance } => {
                generate_instance(InstanceKind::Stepping, *k, *variance, 0)
            }
            InstanceSpec::Noisy { k, variance, seed } => {
                let seed = match redraw_index {
                    Some(r) => derive(*seed, 1 + r),
                    None => *seed,
                };
                generate_instance(InstanceKind::Noisy, *k, *variance, seed)
            }
            InstanceSpec::Explicit { means, variances } => {
                ProblemInstance::gaussian(means, variances)
            }
        }
    }

    pub fn k(&self) -> usize {
        match self {
            InstanceSpec::Stepping { k, .. } | InstanceSpec::Noisy { k, .. } => *k,
            InstanceSpec::Explicit { means, .. } => means.len(),
        }
    }
}

/// A macro-replication experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceSpec,
    /// Policy names: ea, ocba, roa, fcba<ℓ>, lc-fcba0.
    pub policies: Vec<String>,
    /// Total budget T per replication.
    pub budget: u64,
    /// Initial replications per alternative.
    pub t0: u64,
    pub macro_reps: u64,
    /// Master seed for all sampling streams.
    pub seed: u64,
    /// Budget checkpoints at which PCS is recorded; defaults to [budget].
    #[serde(default)]
    pub checkpoints: Vec<u64>,
    /// Also aggregate the post-hoc PCS estimators at the final budget.
    #[serde(default)]
    pub posthoc: bool,
    /// Draw a fresh noisy instance for every replication instead of one per
    /// experiment.
    #[serde(default)]
    pub redraw_instance_per_rep: bool,
}

impl ExperimentConfig {
    /// Validate and return the parsed policy list and effective checkpoints.
    pub fn validate(&self) -> Result<(Vec<PolicyKind>, Vec<u64>)> {
        if self.policies.is_empty() {
            return Err(Error::Config("policies: at least one policy is required".into()));
        }
        let policies =
            self.policies.iter().map(|s| PolicyKind::parse(s)).collect::<Result<Vec<_>>>()?;
        if self.macro_reps < 1 {
            return Err(Error::Config("macro_reps: must be >= 1".into()));
        }
        if self.t0 < 2 {
            return Err(Error::Config("t0: must be >= 2 so sample variances exist".into()));
        }
        let k = self.instance.k() as u64;
        if k < 2 {
            return Err(Error::Config("instance: k must be >= 2".into()));
        }
        let init = k * self.t0;
        if self.budget <= init {
            return Err(Error::Config(format!(
                "budget: must exceed the initial fill k·t0 = {init}"
            )));
        }
        let mut checkpoints = self.checkpoints.clone();
        if checkpoints.is_empty() {
            checkpoints.push(self.budget);
        }
        let sorted = checkpoints.windows(2).all(|w| w[0] < w[1]);
        if !sorted {
            return Err(Error::Config("checkpoints: must be strictly increasing".into()));
        }
        if checkpoints[0] <= init || *checkpoints.last().unwrap() > self.budget {
            return Err(Error::Config(format!(
                "checkpoints: must lie in (k·t0, budget] = ({init}, {}]",
                self.budget
            )));
        }
        if let InstanceSpec::Explicit { means, variances } = &self.instance {
            if means.len() != variances.len() {
                return Err(Error::Config(
                    "instance: means and variances must have equal length".into(),
                ));
            }
        }
        if self.redraw_instance_per_rep
            && !matches!(self.instance, InstanceSpec::Noisy { .. })
        {
            return Err(Error::Config(
                "redraw_instance_per_rep: only meaningful for noisy instances".into(),
            ));
        }
        Ok((policies, checkpoints))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization cannot fail")
    }
}

/// PCS estimates for one (policy, checkpoint) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PcsRow {
    pub policy: String,
    pub checkpoint: u64,
    pub pcs: f64,
    /// Binomial standard error sqrt(p(1−p)/macro_reps).
    pub stderr: f64,
    /// Mean realized allocation ratios over all replications.
    pub mean_ratios: Vec<f64>,
    /// Mean realized allocation ratios over correct-selection replications.
    pub mean_ratios_correct: Vec<f64>,
}

/// Aggregated post-hoc estimator statistics for one policy, over
/// replications, at the final budget.
#[derive(Debug, Clone, PartialEq)]
pub struct PosthocRow {
    pub policy: String,
    pub mean_pcs_v0: f64,
    pub sd_pcs_v0: f64,
    pub mean_pcs_ldr: f64,
    pub sd_pcs_ldr: f64,
}

/// Result of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct PcsCurve {
    pub rows: Vec<PcsRow>,
    pub posthoc: Vec<PosthocRow>,
    pub macro_reps: u64,
    pub k: usize,
    pub policies: Vec<String>,
    pub checkpoints: Vec<u64>,
}

impl PcsCurve {
    pub fn row(&self, policy: &str, checkpoint: u64) -> Option<&PcsRow> {
        self.rows.iter().find(|r| r.policy == policy && r.checkpoint == checkpoint)
    }

    pub fn final_row(&self, policy: &str) -> Option<&PcsRow> {
        self.row(policy, *self.checkpoints.last().unwrap())
    }
}

struct BatchAcc {
    /// [policy][checkpoint] counts of correct selections.
    correct: Vec<Vec<u64>>,
    /// [policy][checkpoint][alternative] ratio sums.
    ratio_sum: Vec<Vec<Vec<f64>>>,
    /// [policy][checkpoint][alternative] ratio sums over correct reps.
    ratio_sum_correct: Vec<Vec<Vec<f64>>>,
    /// [policy] posthoc sums: (v0, v0², ldr, ldr²).
    posthoc: Vec<[f64; 4]>,
    reps: u64,
}

impl BatchAcc {
    fn new(n_policies: usize, n_checkpoints: usize, k: usize) -> Self {
        Self {
            correct: vec![vec![0; n_checkpoints]; n_policies],
            ratio_sum: vec![vec![vec![0.0; k]; n_checkpoints]; n_policies],
            ratio_sum_correct: vec![vec![vec![0.0; k]; n_checkpoints]; n_policies],
            posthoc: vec![[0.0; 4]; n_policies],
            reps: 0,
        }
    }

    fn merge(&mut self, other: &BatchAcc) {
        for p in 0..self.correct.len() {
            for c in 0..self.correct[p].len() {
                self.correct[p][c] += other.correct[p][c];
                for a in 0..self.ratio_sum[p][c].len() {
                    self.ratio_sum[p][c][a] += other.ratio_sum[p][c][a];
                    self.ratio_sum_correct[p][c][a] += other.ratio_sum_correct[p][c][a];
                }
            }
            for i in 0..4 {
                self.posthoc[p][i] += other.posthoc[p][i];
            }
        }
        self.reps += other.reps;
    }
}

fn draw_sample<R: Rng>(model: &AlternativeModel, rng: &mut R) -> f64 {
    match *model {
        AlternativeModel::Gaussian { mean, variance } => {
            let z: f64 = rng.sample(StandardNormal);
            mean + variance.sqrt() * z
        }
        AlternativeModel::Exponential { scale } => {
            let d = Exp::new(1.0 / scale).expect("validated scale");
            d.sample(rng)
        }
    }
}

/// Run one replication of one policy; records correctness and ratios at each
/// checkpoint into the accumulator and returns the final state.
#[allow(clippy::too_many_arguments)]
fn run_policy_once(
    instance: &ProblemInstance,
    policy: PolicyKind,
    budget: u64,
    t0: u64,
    checkpoints: &[u64],
    master_seed: u64,
    rep: u64,
    acc: &mut BatchAcc,
    policy_idx: usize,
) -> Result<AllocationState> {
    let k = instance.k();
    let mut state = AllocationState::new(k);
    let mut streams: Vec<ChaCha8Rng> =
        (0..k).map(|i| sample_stream(master_seed, rep, i as u64)).collect();

    for i in 0..k {
        for _ in 0..t0 {
            let x = draw_sample(instance.alternative(i), &mut streams[i]);
            state.push_sample(i, x)?;
        }
    }

    let mut next_cp = 0;
    while state.total() < budget {
        let decision = policy.next(&state, budget, t0)?;
        let x = draw_sample(instance.alternative(decision.chosen), &mut streams[decision.chosen]);
        state.push_sample(decision.chosen, x)?;
        if next_cp < checkpoints.len() && state.total() == checkpoints[next_cp] {
            let correct = state.sample_best() == instance.best_index();
            if correct {
                acc.correct[policy_idx][next_cp] += 1;
            }
            let n = state.total() as f64;
            for a in 0..k {
                let ratio = state.count(a) as f64 / n;
                acc.ratio_sum[policy_idx][next_cp][a] += ratio;
                if correct {
                    acc.ratio_sum_correct[policy_idx][next_cp][a] += ratio;
                }
            }
            next_cp += 1;
        }
    }
    Ok(state)
}

fn run_batches<F>(config: &ExperimentConfig, map: F) -> Result<PcsCurve>
where
    F: Fn(u64, &(dyn Fn(u64) -> Result<BatchAcc> + Sync)) -> Vec<Result<BatchAcc>>,
{
    let (policies, checkpoints) = config.validate()?;
    let base_instance = if config.redraw_instance_per_rep {
        None
    } else {
        Some(config.instance.build(None)?)
    };
    let k = config.instance.k();
    let n_batches = config.macro_reps.div_ceil(BATCH_SIZE);

    let worker = |batch: u64| -> Result<BatchAcc> {
        let mut acc = BatchAcc::new(policies.len(), checkpoints.len(), k);
        let lo = batch * BATCH_SIZE;
        let hi = ((batch + 1) * BATCH_SIZE).min(config.macro_reps);
        for rep in lo..hi {
            let local;
            let instance = match &base_instance {
                Some(inst) => inst,
                None => {
                    local = config.instance.build(Some(rep))?;
                    &local
                }
            };
            for (pi, &policy) in policies.iter().enumerate() {
                let state = run_policy_once(
                    instance,
                    policy,
                    config.budget,
                    config.t0,
                    &checkpoints,
                    config.seed,
                    rep,
                    &mut acc,
                    pi,
                )?;
                if config.posthoc {
                    let v0 =
                        posthoc_pcs_estimate(&state, config.budget as f64, PosthocVariant::V0)?;
                    let ldr =
                        posthoc_pcs_estimate(&state, config.budget as f64, PosthocVariant::Ldr)?;
                    acc.posthoc[pi][0] += v0.value;
                    acc.posthoc[pi][1] += v0.value * v0.value;
                    acc.posthoc[pi][2] += ldr.value;
                    acc.posthoc[pi][3] += ldr.value * ldr.value;
                }
            }
            acc.reps += 1;
        }
        Ok(acc)
    };

    let partials = map(n_batches, &worker);
    let mut total = BatchAcc::new(policies.len(), checkpoints.len(), k);
    for part in partials {
        total.merge(&part?);
    }

    let reps = total.reps as f64;
    let mut rows = Vec::new();
    for (pi, policy) in policies.iter().enumerate() {
        for (ci, &cp) in checkpoints.iter().enumerate() {
            let correct = total.correct[pi][ci];
            let pcs = correct as f64 / reps;
            let stderr = (pcs * (1.0 - pcs) / reps).sqrt();
            let mean_ratios: Vec<f64> =
                total.ratio_sum[pi][ci].iter().map(|s| s / reps).collect();
            let mean_ratios_correct: Vec<f64> = if correct > 0 {
                total.ratio_sum_correct[pi][ci].iter().map(|s| s / correct as f64).collect()
            } else {
                vec![0.0; k]
            };
            rows.push(PcsRow {
                policy: policy.name(),
                checkpoint: cp,
                pcs,
                stderr,
                mean_ratios,
                mean_ratios_correct,
            });
        }
    }
    let mut posthoc = Vec::new();
    if config.posthoc {
        for (pi, policy) in policies.iter().enumerate() {
            let [s0, q0, s1, q1] = total.posthoc[pi];
            let mean_v0 = s0 / reps;
            let mean_ldr = s1 / reps;
            let sd = |sum: f64, sumsq: f64, mean: f64| -> f64 {
                if total.reps < 2 {
                    return 0.0;
                }
                ((sumsq - sum * mean) / (reps - 1.0)).max(0.0).sqrt()
            };
            posthoc.push(PosthocRow {
                policy: policy.name(),
                mean_pcs_v0: mean_v0,
                sd_pcs_v0: sd(s0, q0, mean_v0),
                mean_pcs_ldr: mean_ldr,
                sd_pcs_ldr: sd(s1, q1, mean_ldr),
            });
        }
    }
    Ok(PcsCurve {
        rows,
        posthoc,
        macro_reps: total.reps,
        k,
        policies: policies.iter().map(|p| p.name()).collect(),
        checkpoints,
    })
}

/// Run the experiment, using the parallel map when compiled in.
pub fn run_experiment(config: &ExperimentConfig) -> Result<PcsCurve> {
    run_batches(config, |n, f| map_batches(n, f))
}

/// Run the experiment strictly sequentially (same results, one thread).
pub fn run_experiment_sequential(config: &ExperimentConfig) -> Result<PcsCurve> {
    run_batches(config, |n, f| map_batches_sequential(n, f))
}

/// Standard normal CDF via the complementary error function; accurate in
/// relative terms far into the lower tail.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Exact probability that a suboptimal Gaussian sample mean overtakes the
/// best: Φ(−(m1−m2)/sqrt(σ1²/T1 + σ2²/T2)).
pub fn exact_binary_pics(
    best: &AlternativeModel,
    subopt: &AlternativeModel,
    t1: u64,
    t2: u64,
) -> Result<f64> {
    if !(best.is_gaussian() && subopt.is_gaussian()) {
        return Err(Error::UnsupportedModel(
            "the exact binary oracle is Gaussian-only".into(),
        ));
    }
    if t1 < 1 || t2 < 1 {
        return Err(Error::InvalidParameter("sample counts must be >= 1".into()));
    }
    let gap = best.mean() - subopt.mean();
    let sd = (best.variance() / t1 as f64 + subopt.variance() / t2 as f64).sqrt();
    Ok(normal_cdf(-gap / sd))
}

/// Brute-force Monte Carlo estimate of
/// P(X̄_best <= min over the other subset members), with the given
/// per-alternative sample counts. Returns (estimate, stderr).
pub fn mc_event_probability(
    instance: &ProblemInstance,
    counts: &[u64],
    subset: &[usize],
    draws: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    if draws < 1_000 {
        return Err(Error::InvalidParameter(
            "Monte Carlo estimation needs at least 1000 draws".into(),
        ));
    }
    if counts.len() != instance.k() {
        return Err(Error::InvalidParameter("counts length must match the instance".into()));
    }
    if counts.iter().any(|&c| c == 0) {
        return Err(Error::InvalidParameter("all sample counts must be >= 1".into()));
    }
    let best = instance.best_index();
    let mut members: Vec<usize> = subset.to_vec();
    members.sort_unstable();
    members.dedup();
    if !members.contains(&best) || members.len() < 2 {
        return Err(Error::InvalidParameter(
            "the event subset must contain the best and one other alternative".into(),
        ));
    }
    if members.iter().any(|&i| i >= instance.k()) {
        return Err(Error::InvalidParameter("subset index out of range".into()));
    }

    // The sample mean has an exact sampling distribution per family:
    // Gaussian mean is Gaussian, Exponential mean is Gamma.
    enum MeanSampler {
        Normal { mean: f64, sd: f64 },
        GammaMean(Gamma<f64>),
    }
    let samplers: Vec<(usize, MeanSampler)> = members
        .iter()
        .map(|&i| {
            let n = counts[i] as f64;
            let s = match *instance.alternative(i) {
                AlternativeModel::Gaussian { mean, variance } => {
                    MeanSampler::Normal { mean, sd: (variance / n).sqrt() }
                }
                AlternativeModel::Exponential { scale } => MeanSampler::GammaMean(
                    Gamma::new(n, scale / n).expect("validated parameters"),
                ),
            };
            (i, s)
        })
        .collect();

    let mut rng = aux_stream(seed, 0xabcd);
    let mut hits = 0u64;
    for _ in 0..draws {
        let mut best_mean = 0.0;
        let mut min_other = f64::INFINITY;
        for (i, sampler) in &samplers {
            let value = match sampler {
                MeanSampler::Normal { mean, sd } => {
                    let z: f64 = rng.sample(StandardNormal);
                    mean + sd * z
                }
                MeanSampler::GammaMean(g) => g.sample(&mut rng),
            };
            if *i == best {
                best_mean = value;
            } else {
                min_other = min_other.min(value);
            }
        }
        if best_mean <= min_other {
            hits += 1;
        }
    }
    let p = hits as f64 / draws as f64;
    let stderr = (p * (1.0 - p) / draws as f64).sqrt();
    Ok((p, stderr))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stepping_means() {
        let inst =
            generate_instance(InstanceKind::Stepping, 5, VarianceSetting::Equal(4.0), 0).unwrap();
        let means = inst.means();
        let expect = [0.5, 0.4, 0.3, 0.2, 0.1];
        for (a, b) in means.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(inst.best_index(), 0);
    }

    #[test]
    fn increasing_variances_by_quintile() {
        let inst =
            generate_instance(InstanceKind::Stepping, 10, VarianceSetting::Increasing, 0).unwrap();
        assert_eq!(inst.variances(), vec![2.0, 2.0, 3.0, 3.0, 4.0, 4.0, 5.0, 5.0, 6.0, 6.0]);
        let inst =
            generate_instance(InstanceKind::Stepping, 10, VarianceSetting::Decreasing, 0).unwrap();
        assert_eq!(inst.variances(), vec![6.0, 6.0, 5.0, 5.0, 4.0, 4.0, 3.0, 3.0, 2.0, 2.0]);
    }

    #[test]
    fn grouped_variances_require_divisibility() {
        assert!(generate_instance(InstanceKind::Stepping, 7, VarianceSetting::Increasing, 0)
            .is_err());
    }

    #[test]
    fn noisy_instances_are_seed_deterministic() {
        let a = generate_instance(InstanceKind::Noisy, 20, VarianceSetting::Equal(4.0), 9).unwrap();
        let b = generate_instance(InstanceKind::Noisy, 20, VarianceSetting::Equal(4.0), 9).unwrap();
        assert_eq!(a, b);
        let c =
            generate_instance(InstanceKind::Noisy, 20, VarianceSetting::Equal(4.0), 10).unwrap();
        assert_ne!(a, c);
        for m in a.means() {
            assert!((0.0..=2.0).contains(&m));
        }
    }

    #[test]
    fn config_validation_names_fields() {
        let mut config = ExperimentConfig {
            instance: InstanceSpec::Stepping { k: 5, variance: VarianceSetting::Equal(1.0) },
            policies: vec!["ea".into()],
            budget: 100,
            t0: 3,
            macro_reps: 10,
            seed: 1,
            checkpoints: vec![],
            posthoc: false,
            redraw_instance_per_rep: false,
        };
        assert!(config.validate().is_ok());

        config.policies.clear();
        assert!(config.validate().unwrap_err().to_string().contains("policies"));
        config.policies = vec!["ea".into()];

        config.budget = 15;
        assert!(config.validate().unwrap_err().to_string().contains("budget"));
        config.budget = 100;

        config.checkpoints = vec![15, 50];
        assert!(config.validate().unwrap_err().to_string().contains("checkpoints"));
        config.checkpoints = vec![50, 101];
        assert!(config.validate().unwrap_err().to_string().contains("checkpoints"));
        config.checkpoints = vec![50, 100];
        assert!(config.validate().is_ok());

        config.t0 = 1;
        assert!(config.validate().unwrap_err().to_string().contains("t0"));
    }

    #[test]
    fn config_json_round_trip() {
        let text = r#"{
            "instance": {"kind": "noisy", "k": 10, "variance": {"equal": 4.0}, "seed": 3},
            "policies": ["ea", "fcba0"],
            "budget": 500,
            "t0": 3,
            "macro_reps": 100,
            "seed": 7,
            "checkpoints": [100, 500]
        }"#;
        let config = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(config.instance.k(), 10);
        let round = ExperimentConfig::from_json(&config.to_json()).unwrap();
        assert_eq!(config, round);

        let missing = r#"{"policies": ["ea"], "budget": 10, "t0": 3, "macro_reps": 1, "seed": 0}"#;
        let err = ExperimentConfig::from_json(missing).unwrap_err().to_string();
        assert!(err.contains("instance"), "error should name the missing field: {err}");
    }

    #[test]
    fn exact_binary_oracle() {
        let best = AlternativeModel::gaussian(1.0, 1.0).unwrap();
        let sub = AlternativeModel::gaussian(0.0, 1.0).unwrap();
        let p = exact_binary_pics(&best, &sub, 32, 32).unwrap();
        assert!((p - 3.16712418e-5).abs() < 1e-12);

        // Monotone decrease toward zero as counts grow.
        let mut last = 1.0;
        for t in [8u64, 32, 128, 512, 100_000] {
            let p = exact_binary_pics(&best, &sub, t, t).unwrap();
            assert!(p < last);
            last = p;
        }

        // Symmetric means give one half.
        let tie_hi = AlternativeModel::gaussian(0.5, 1.0).unwrap();
        let tie_lo = AlternativeModel::gaussian(0.5, 2.0).unwrap();
        let p = exact_binary_pics(&tie_hi, &tie_lo, 10, 10).unwrap();
        assert!((p - 0.5).abs() < 1e-15);

        let exp = AlternativeModel::exponential(1.0).unwrap();
        assert!(exact_binary_pics(&best, &exp, 10, 10).is_err());
    }

    #[test]
    fn normal_cdf_deep_tail() {
        // Relative accuracy deep in the tail, against scalar reference
        // values of Φ(−x) = erfc(x/√2)/2.
        let p16 = normal_cdf(-16.0);
        assert!(p16 > 1e-60 && p16 < 1e-56);
        let p37 = normal_cdf(-37.0);
        assert!(p37 > 0.0 && p37 < 1e-290);
    }

    #[test]
    fn mc_event_matches_exact_binary() {
        let instance = ProblemInstance::gaussian(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        let (p, se) = mc_event_probability(&instance, &[32, 32], &[0, 1], 2_000_000, 5).unwrap();
        let exact = 3.16712418e-5;
        assert!(
            (p - exact).abs() < 4.0 * se.max(1e-7),
            "mc {p} vs exact {exact} (se {se})"
        );
    }

    #[test]
    fn mc_event_nested_subsets_are_monotone() {
        let instance =
            ProblemInstance::gaussian(&[0.4, 0.2, 0.0], &[1.0, 1.0, 1.0]).unwrap();
        let counts = [10u64, 10, 10];
        let (pair, _) = mc_event_probability(&instance, &counts, &[0, 1], 200_000, 1).unwrap();
        let (triple, _) =
            mc_event_probability(&instance, &counts, &[0, 1, 2], 200_000, 1).unwrap();
        assert!(pair >= triple);
    }

    #[test]
    fn mc_event_rejects_small_draw_counts() {
        let instance = ProblemInstance::gaussian(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!(mc_event_probability(&instance, &[10, 10], &[0, 1], 999, 1).is_err());
    }

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            instance: InstanceSpec::Explicit {
                means: vec![1.0, 0.0],
                variances: vec![1.0, 1.0],
            },
            policies: vec!["ea".into(), "ea".into(), "fcba0".into()],
            budget: 60,
            t0: 3,
            macro_reps: 400,
            seed: 2024,
            checkpoints: vec![30, 60],
            posthoc: true,
            redraw_instance_per_rep: false,
        }
    }

    #[test]
    fn identical_policies_share_sample_paths() {
        let curve = run_experiment(&small_config()).unwrap();
        for cp in [30, 60] {
            let a = curve.row("ea", cp).unwrap();
            let b = &curve.rows[curve
                .rows
                .iter()
                .enumerate()
                .filter(|(_, r)| r.policy == "ea" && r.checkpoint == cp)
                .map(|(i, _)| i)
                .nth(1)
                .unwrap()];
            assert_eq!(a.pcs, b.pcs);
            assert_eq!(a.mean_ratios, b.mean_ratios);
        }
    }

    #[test]
    fn sequential_and_parallel_agree_exactly() {
        let config = small_config();
        let a = run_experiment(&config).unwrap();
        let b = run_experiment_sequential(&config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ratios_sum_to_one() {
        let curve = run_experiment(&small_config()).unwrap();
        for row in &curve.rows {
            let sum: f64 = row.mean_ratios.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn ea_binary_matches_exact_oracle() {
        let config = ExperimentConfig {
            instance: InstanceSpec::Explicit {
                means: vec![1.0, 0.0],
                variances: vec![1.0, 1.0],
            },
            policies: vec!["ea".into()],
            budget: 100,
            t0: 3,
            macro_reps: 10_000,
            seed: 31,
            checkpoints: vec![100],
            posthoc: false,
            redraw_instance_per_rep: false,
        };
        let curve = run_experiment(&config).unwrap();
        let row = curve.final_row("ea").unwrap();
        let best = AlternativeModel::gaussian(1.0, 1.0).unwrap();
        let sub = AlternativeModel::gaussian(0.0, 1.0).unwrap();
        let exact = 1.0 - exact_binary_pics(&best, &sub, 50, 50).unwrap();
        assert!(
            (row.pcs - exact).abs() <= 3.0 * row.stderr.max(3e-4),
            "pcs {} vs exact {exact}",
            row.pcs
        );
    }
}
