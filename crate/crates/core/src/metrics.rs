//! Evaluation arithmetic: relative error against a best-known objective,
//! min/mean/max summaries over repeated runs, and the min-max score system
//! used to compare algorithms across datasets.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `E_A = (f̄ − f_best) / f_best × 100`, in percent. Negative when the run
/// beats the reference value.
pub fn relative_error(f_bar: f64, f_best: f64) -> Result<f64> {
    if f_best.is_nan() || f_best <= 0.0 {
        return Err(Error::usage(format!("f_best must be positive, got {f_best}")));
    }
    Ok((f_bar - f_best) / f_best * 100.0)
}

/// `1 − (value − min) / (max − min)` over `all_values`: 1 for the best
/// (smallest) value, 0 for the worst. When every value is equal all score 1.
pub fn score(value: f64, all_values: &[f64]) -> Result<f64> {
    let Some(stats) = Stats::of(all_values) else {
        return Err(Error::usage("cannot score against an empty list"));
    };
    if !all_values.contains(&value) {
        return Err(Error::usage(format!("{value} is not among the scored values")));
    }
    let range = stats.max - stats.min;
    if range == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - (value - stats.min) / range)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for &v in values {
            min = min.min(v);
            max = max.max(v);
            sum += v;
        }
        // The mean of values that are all equal can drift from them by an ulp.
        let mean = (sum / values.len() as f64).clamp(min, max);
        Some(Self { min, mean, max })
    }
}

/// Per-(algorithm, dataset, k) statistics over `n_exec` runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub algorithm: String,
    pub dataset: String,
    pub k: usize,
    pub n_exec: usize,
    pub e_min: f64,
    pub e_mean: f64,
    pub e_max: f64,
    pub cpu_min: f64,
    pub cpu_mean: f64,
    pub cpu_max: f64,
    pub nd_mean: f64,
    pub ns_mean: f64,
    pub f_best_used: f64,
    /// True when `f_best_used` is the best objective seen locally rather
    /// than a registry value.
    pub f_best_local: bool,
}

/// What a single run contributes to a [`RunSummary`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMeasurement {
    pub objective: f64,
    pub cpu: f64,
    pub distance_evals: u64,
    pub chunks: usize,
}

pub fn summarize(
    algorithm: &str,
    dataset: &str,
    k: usize,
    f_best: f64,
    f_best_local: bool,
    runs: &[RunMeasurement],
) -> Result<RunSummary> {
    if runs.is_empty() {
        return Err(Error::usage("cannot summarize zero runs"));
    }
    let errors = runs
        .iter()
        .map(|r| relative_error(r.objective, f_best))
        .collect::<Result<Vec<_>>>()?;
    let cpus: Vec<f64> = runs.iter().map(|r| r.cpu).collect();
    let e = Stats::of(&errors).expect("nonempty");
    let c = Stats::of(&cpus).expect("nonempty");
    let n = runs.len() as f64;
    Ok(RunSummary {
        algorithm: algorithm.to_string(),
        dataset: dataset.to_string(),
        k,
        n_exec: runs.len(),
        e_min: e.min,
        e_mean: e.mean,
        e_max: e.max,
        cpu_min: c.min,
        cpu_mean: c.mean,
        cpu_max: c.max,
        nd_mean: runs.iter().map(|r| r.distance_evals as f64).sum::<f64>() / n,
        ns_mean: runs.iter().map(|r| r.chunks as f64).sum::<f64>() / n,
        f_best_used: f_best,
        f_best_local,
    })
}

/// Plain average over the given per-k values, skipping missing (failed)
/// cells. Returns the mean, if any value was present, and how many cells
/// were skipped.
pub fn mean_over_k(values: &[Option<f64>]) -> (Option<f64>, usize) {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    let skipped = values.len() - present.len();
    (Stats::of(&present).map(|s| s.mean), skipped)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    Cpu,
}

/// Scores `S(A, X, q)` of one algorithm on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmScore {
    pub algorithm: String,
    pub accuracy: Option<f64>,
    pub cpu: Option<f64>,
    /// The algorithm could not finish this dataset; it scores 0 on both
    /// metrics regardless of the fields above.
    #[serde(default)]
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetScores {
    pub dataset: String,
    pub algorithms: Vec<AlgorithmScore>,
}

/// Turns per-algorithm `(mean E_A, mean cpu)` on one dataset into scores.
/// `None` marks a failed algorithm, which is left out of the min/max and
/// scores 0.
pub fn score_dataset(dataset: &str, results: &[(String, Option<(f64, f64)>)]) -> Result<DatasetScores> {
    let ok: Vec<(f64, f64)> = results.iter().filter_map(|(_, r)| *r).collect();
    let accs: Vec<f64> = ok.iter().map(|r| r.0).collect();
    let cpus: Vec<f64> = ok.iter().map(|r| r.1).collect();
    let algorithms = results
        .iter()
        .map(|(name, r)| {
            Ok(match r {
                Some((acc, cpu)) => AlgorithmScore {
                    algorithm: name.clone(),
                    accuracy: Some(score(*acc, &accs)?),
                    cpu: Some(score(*cpu, &cpus)?),
                    failed: false,
                },
                None => AlgorithmScore {
                    algorithm: name.clone(),
                    accuracy: Some(0.0),
                    cpu: Some(0.0),
                    failed: true,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DatasetScores {
        dataset: dataset.to_string(),
        algorithms,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCell {
    pub algorithm: String,
    pub dataset: String,
    pub accuracy: f64,
    pub cpu: f64,
    /// `M(A, X)`, the average of the two metric scores.
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmTotals {
    pub algorithm: String,
    /// `S(A, E_A)`.
    pub accuracy_sum: f64,
    /// `S(A, cpu)`.
    pub cpu_sum: f64,
    /// `M(A)`.
    pub mean_sum: f64,
    /// Number of datasets, the largest possible value of each sum.
    pub max_possible: f64,
    pub accuracy_pct: f64,
    pub cpu_pct: f64,
    pub mean_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub datasets: Vec<String>,
    pub cells: Vec<ScoreCell>,
    pub totals: Vec<AlgorithmTotals>,
}

impl ScoreTable {
    pub fn cell(&self, algorithm: &str, dataset: &str) -> Option<&ScoreCell> {
        self.cells
            .iter()
            .find(|c| c.algorithm == algorithm && c.dataset == dataset)
    }

    pub fn totals_for(&self, algorithm: &str) -> Option<&AlgorithmTotals> {
        self.totals.iter().find(|t| t.algorithm == algorithm)
    }
}

/// Sums per-dataset scores into `S(A, q)`, `M(A, X)` and `M(A)`.
///
/// Algorithms are reported in first-seen order. An algorithm missing from a
/// dataset, or marked failed there, contributes 0 for that dataset. A
/// non-failed entry lacking either metric is an error. Sums run in dataset
/// order.
pub fn aggregate_scores(table: &[DatasetScores]) -> Result<ScoreTable> {
    let mut names: Vec<String> = Vec::new();
    for ds in table {
        for a in &ds.algorithms {
            if !names.contains(&a.algorithm) {
                names.push(a.algorithm.clone());
            }
        }
    }

    let mut cells = Vec::new();
    for ds in table {
        for name in &names {
            let entry = ds.algorithms.iter().find(|a| &a.algorithm == name);
            let (accuracy, cpu) = match entry {
                None => (0.0, 0.0),
                Some(a) if a.failed => (0.0, 0.0),
                Some(a) => match (a.accuracy, a.cpu) {
                    (Some(acc), Some(cpu)) => {
                        for (label, v) in [("accuracy", acc), ("cpu", cpu)] {
                            if !(0.0..=1.0).contains(&v) {
                                return Err(Error::usage(format!(
                                    "{label} score {v} for {name} on {} is outside [0, 1]",
                                    ds.dataset
                                )));
                            }
                        }
                        (acc, cpu)
                    }
                    _ => {
                        return Err(Error::IncompleteInput(format!(
                            "{name} on {} lacks an accuracy or cpu score",
                            ds.dataset
                        )))
                    }
                },
            };
            cells.push(ScoreCell {
                algorithm: name.clone(),
                dataset: ds.dataset.clone(),
                accuracy,
                cpu,
                mean: 0.5 * (accuracy + cpu),
            });
        }
    }

    let max_possible = table.len() as f64;
    let totals = names
        .iter()
        .map(|name| {
            let mut acc = 0.0;
            let mut cpu = 0.0;
            let mut mean = 0.0;
            for c in cells.iter().filter(|c| &c.algorithm == name) {
                acc += c.accuracy;
                cpu += c.cpu;
                mean += c.mean;
            }
            let pct = |v: f64| if max_possible > 0.0 { v / max_possible * 100.0 } else { 0.0 };
            AlgorithmTotals {
                algorithm: name.clone(),
                accuracy_sum: acc,
                cpu_sum: cpu,
                mean_sum: mean,
                max_possible,
                accuracy_pct: pct(acc),
                cpu_pct: pct(cpu),
                mean_pct: pct(mean),
            }
        })
        .collect();

    Ok(ScoreTable {
        datasets: table.iter().map(|d| d.dataset.clone()).collect(),
        cells,
        totals,
    })
}

/// One row of the emitted summary table. Field names are the column names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: String,
    pub dataset: String,
    pub k: usize,
    pub e_min: f64,
    pub e_mean: f64,
    pub e_max: f64,
    pub cpu_min: f64,
    pub cpu_mean: f64,
    pub cpu_max: f64,
    pub n_d: f64,
    pub score_accuracy: Option<f64>,
    pub score_cpu: Option<f64>,
}

pub const SUMMARY_COLUMNS: [&str; 12] = [
    "algorithm",
    "dataset",
    "k",
    "e_min",
    "e_mean",
    "e_max",
    "cpu_min",
    "cpu_mean",
    "cpu_max",
    "n_d",
    "score_accuracy",
    "score_cpu",
];

/// Joins summaries with the (algorithm, dataset) scores of `scores`.
pub fn summary_rows(summaries: &[RunSummary], scores: Option<&ScoreTable>) -> Vec<SummaryRow> {
    summaries
        .iter()
        .map(|s| {
            let cell = scores.and_then(|t| t.cell(&s.algorithm, &s.dataset));
            SummaryRow {
                algorithm: s.algorithm.clone(),
                dataset: s.dataset.clone(),
                k: s.k,
                e_min: s.e_min,
                e_mean: s.e_mean,
                e_max: s.e_max,
                cpu_min: s.cpu_min,
                cpu_mean: s.cpu_mean,
                cpu_max: s.cpu_max,
                n_d: s.nd_mean,
                score_accuracy: cell.map(|c| c.accuracy),
                score_cpu: cell.map(|c| c.cpu),
            }
        })
        .collect()
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(SUMMARY_COLUMNS)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
