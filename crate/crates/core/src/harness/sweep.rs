//! One-axis grid sweeps.

use std::fmt::Write as _;

use super::config::ExperimentConfig;
use super::experiment::{run_experiment, RunResult};
use crate::error::{FdscError, Result};

/// Parameters a sweep may vary.
pub const SWEEP_AXES: [&str; 10] = [
    "m",
    "samples_per_client",
    "q",
    "lambda1",
    "lambda2",
    "lambda3",
    "r",
    "T",
    "tau",
    "k",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub result: RunResult,
}

/// Accepts the canonical names plus a few spellings (`λ3`, `rounds`, ...).
pub fn canonical_axis(axis: &str) -> Result<&'static str> {
    let a = match axis {
        "b" | "batch" | "n_i" => "samples_per_client",
        "λ1" => "lambda1",
        "λ2" => "lambda2",
        "λ3" => "lambda3",
        "rounds" => "T",
        "τ" | "local_epochs" => "tau",
        "knn_k" => "k",
        other => other,
    };
    SWEEP_AXES
        .iter()
        .copied()
        .find(|&x| x == a)
        .ok_or_else(|| FdscError::config(format!("cannot sweep over {axis:?}; valid axes: {}", SWEEP_AXES.join(", "))))
}

/// Every run uses the base seed, so rows differ only in the swept value.
/// Each run gets its own subdirectory when the base config has an output
/// directory.
pub fn sweep(base: &ExperimentConfig, axis: &str, values: &[f64]) -> Result<Vec<SweepRow>> {
    let axis = canonical_axis(axis)?;
    if values.is_empty() {
        return Err(FdscError::config("sweep needs at least one value"));
    }
    let mut rows = Vec::with_capacity(values.len());
    for &v in values {
        let mut cfg = base.clone();
        cfg.set_field(axis, v)?;
        if let Some(dir) = &base.output_dir {
            cfg.output_dir = Some(dir.join(format!("{axis}_{v}")));
        }
        rows.push(SweepRow {
            value: v,
            result: run_experiment(&cfg)?,
        });
    }
    if let Some(dir) = &base.output_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("sweep_{axis}.csv")), sweep_csv(axis, &rows))?;
    }
    Ok(rows)
}

/// One row per value; ACC/NMI/AMI/ARI for the model (mean over clients)
/// and for the pixel k-means baseline.
pub fn sweep_csv(axis: &str, rows: &[SweepRow]) -> String {
    let mut out = format!("{axis},method,ACC,NMI,AMI,ARI,kmeans_ACC,kmeans_NMI,kmeans_AMI,kmeans_ARI\n");
    for r in rows {
        let m = &r.result.mean;
        let b = &r.result.baseline_mean;
        let _ = writeln!(
            out,
            "{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
            r.value, r.result.method, m.acc, m.nmi, m.ami, m.ari, b.acc, b.nmi, b.ami, b.ari
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_names() {
        assert_eq!(canonical_axis("λ3").unwrap(), "lambda3");
        assert_eq!(canonical_axis("tau").unwrap(), "tau");
        assert!(matches!(canonical_axis("alpha"), Err(FdscError::Config(_))));
        assert!(matches!(canonical_axis("seed"), Err(FdscError::Config(_))));
    }
}
