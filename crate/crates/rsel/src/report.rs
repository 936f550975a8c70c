//! CSV emission for experiment results.
//!
//! All numeric fields are written with 17 significant digits so downstream
//! diffs are bit-exact; files are UTF-8 with LF line endings and a mandatory
//! header row.

use crate::harness::PcsCurve;

/// Full round-trip decimal formatting (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// `pcs_curve.csv`: policy, checkpoint, pcs, stderr, then the mean
/// allocation ratios p_1..p_k.
pub fn pcs_curve_csv(curve: &PcsCurve) -> String {
    let mut out = String::from("policy,checkpoint,pcs,stderr");
    for i in 1..=curve.k {
        out.push_str(&format!(",p_{i}"));
    }
    out.push('\n');
    for row in &curve.rows {
        out.push_str(&row.policy);
        out.push_str(&format!(",{}", row.checkpoint));
        out.push_str(&format!(",{},{}", fmt_f64(row.pcs), fmt_f64(row.stderr)));
        for r in &row.mean_ratios {
            out.push_str(&format!(",{}", fmt_f64(*r)));
        }
        out.push('\n');
    }
    out
}

/// `summary.csv`: final-checkpoint PCS per policy.
pub fn summary_csv(curve: &PcsCurve) -> String {
    let mut out = String::from("policy,pcs,stderr\n");
    for policy in &curve.policies {
        if let Some(row) = curve.final_row(policy) {
            out.push_str(&format!("{policy},{},{}\n", fmt_f64(row.pcs), fmt_f64(row.stderr)));
        }
    }
    out
}

/// `posthoc.csv`: per-policy post-hoc estimator statistics, when enabled.
pub fn posthoc_csv(curve: &PcsCurve) -> Option<String> {
    if curve.posthoc.is_empty() {
        return None;
    }
    let mut out = String::from("policy,mean_pcs_v0,sd_pcs_v0,mean_pcs_ldr,sd_pcs_ldr\n");
    for row in &curve.posthoc {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.policy,
            fmt_f64(row.mean_pcs_v0),
            fmt_f64(row.sd_pcs_v0),
            fmt_f64(row.mean_pcs_ldr),
            fmt_f64(row.sd_pcs_ldr)
        ));
    }
    Some(out)
}

/// Fixed-width console summary of the final PCS per policy.
pub fn summary_table(curve: &PcsCurve) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<12} {:>10} {:>10}\n", "policy", "pcs", "stderr"));
    for policy in &curve.policies {
        if let Some(row) = curve.final_row(policy) {
            out.push_str(&format!("{:<12} {:>10.4} {:>10.4}\n", policy, row.pcs, row.stderr));
        }
    }
    out
}
