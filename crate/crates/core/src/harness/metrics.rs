use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub env_steps: u64,
    pub mean_success: f64,
    pub tasks_solved: usize,
    pub split: Split,
    pub seed: u64,
}

/// CSV with header `env_steps,mean_success,tasks_solved,split,seed`.
pub fn write_metrics<W: Write>(points: &[CurvePoint], w: W) -> Result<(), HarnessError> {
    let mut csv = csv::Writer::from_writer(w);
    for p in points {
        csv.serialize(p)?;
    }
    if points.is_empty() {
        csv.write_record(["env_steps", "mean_success", "tasks_solved", "split", "seed"])?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_metrics<R: Read>(r: R) -> Result<Vec<CurvePoint>, HarnessError> {
    let mut csv = csv::Reader::from_reader(r);
    Ok(csv.deserialize().collect::<Result<Vec<_>, _>>()?)
}

/// Mean and 95% Student-t interval over seeds at one evaluation tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub split: Split,
    /// Ordinal of the point within each seed's curve for this split.
    pub tick: usize,
    pub env_steps: f64,
    pub mean_success: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub tasks_solved: f64,
    pub n_seeds: usize,
}

pub fn mean_ci95(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let t = StudentsT::new(0.0, 1.0, n - 1.0)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    (mean, t * (var / n).sqrt())
}

/// Align curves by tick ordinal per (seed, split) and summarize across seeds.
pub fn aggregate(points: &[CurvePoint]) -> Vec<AggregateRow> {
    let mut ordinal: BTreeMap<(u64, Split), usize> = BTreeMap::new();
    let mut groups: BTreeMap<(Split, usize), Vec<&CurvePoint>> = BTreeMap::new();
    for p in points {
        let o = ordinal.entry((p.seed, p.split)).or_default();
        groups.entry((p.split, *o)).or_default().push(p);
        *o += 1;
    }
    groups
        .into_iter()
        .map(|((split, tick), ps)| {
            let succ: Vec<f64> = ps.iter().map(|p| p.mean_success).collect();
            let (mean, half) = mean_ci95(&succ);
            let n = ps.len() as f64;
            AggregateRow {
                split,
                tick,
                env_steps: ps.iter().map(|p| p.env_steps as f64).sum::<f64>() / n,
                mean_success: mean,
                ci_low: mean - half,
                ci_high: mean + half,
                tasks_solved: ps.iter().map(|p| p.tasks_solved as f64).sum::<f64>() / n,
                n_seeds: ps.len(),
            }
        })
        .collect()
}

pub fn write_aggregate<W: Write>(rows: &[AggregateRow], w: W) -> Result<(), HarnessError> {
    let mut csv = csv::Writer::from_writer(w);
    for r in rows {
        csv.serialize(r)?;
    }
    csv.flush()?;
    Ok(())
}

/// Mean success over the last `window` points of each seed's curve for
/// `split`, averaged over seeds.
pub fn final_window_mean(points: &[CurvePoint], split: Split, window: usize) -> Option<f64> {
    let mut by_seed: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for p in points.iter().filter(|p| p.split == split) {
        by_seed.entry(p.seed).or_default().push(p.mean_success);
    }
    if by_seed.is_empty() {
        return None;
    }
    let per_seed: Vec<f64> = by_seed
        .values()
        .map(|v| {
            let tail = &v[v.len().saturating_sub(window)..];
            tail.iter().sum::<f64>() / tail.len() as f64
        })
        .collect();
    Some(per_seed.iter().sum::<f64>() / per_seed.len() as f64)
}
