//! Experiment runner: every (dataset, k, algorithm) cell is executed
//! `n_exec` times with seeds `base_seed + run`, then summarized and scored.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bigmeans::{big_means, BigMeansConfig};
use crate::dataset::{ClusteringOutcome, Dataset};
use crate::error::{Error, Result};
use crate::init::{InitConfig, InitMethod};
use crate::io::{load, DatasetSpec, Registry, RegistryEntry};
use crate::local_search::{kmeans, SearchConfig};
use crate::metrics::{
    aggregate_scores, mean_over_k, score_dataset, summarize, RunMeasurement, RunSummary,
    ScoreTable,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    BigMeans,
    Forgy,
    KmeansPp,
    KmeansParallel,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::BigMeans,
        Algorithm::Forgy,
        Algorithm::KmeansPp,
        Algorithm::KmeansParallel,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Algorithm::BigMeans => "big_means",
            Algorithm::Forgy => "forgy",
            Algorithm::KmeansPp => "kmeans_pp",
            Algorithm::KmeansParallel => "kmeans_parallel",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "big_means" | "bigmeans" => Ok(Algorithm::BigMeans),
            "forgy" | "forgy_kmeans" => Ok(Algorithm::Forgy),
            "kmeans_pp" | "kmeans++" | "kmeanspp" => Ok(Algorithm::KmeansPp),
            "kmeans_parallel" | "kmeans||" | "kmeans_par" => Ok(Algorithm::KmeansParallel),
            _ => Err(Error::config(format!("unknown algorithm '{s}'"))),
        }
    }
}

/// One dataset of a plan. Either `spec` or `registry` must locate the file;
/// explicit fields override registry values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDataset {
    pub name: String,
    #[serde(default)]
    pub spec: Option<DatasetSpec>,
    /// Name of a registry entry supplying the file location, `f_best` values
    /// and per-k chunk size and time budget.
    #[serde(default)]
    pub registry: Option<String>,
    #[serde(default)]
    pub chunk_size: Option<usize>,
    #[serde(default)]
    pub cpu_max: Option<f64>,
    #[serde(default)]
    pub max_chunks: Option<usize>,
    /// Best known objective per `k` (keys are decimal `k`).
    #[serde(default)]
    pub f_best: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub datasets: Vec<PlanDataset>,
    pub algorithms: Vec<String>,
    pub k_values: Vec<usize>,
    pub n_exec: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Use `base_seed` for every run instead of `base_seed + run`.
    #[serde(default)]
    pub fixed_seed: bool,
    #[serde(default)]
    pub search: SearchConfig,
    /// Seeding parameters shared by all algorithms; `method` and `seed` are
    /// set per run.
    #[serde(default)]
    pub init: InitConfig,
    /// Largest dataset (in rows) each algorithm may attempt. Larger datasets
    /// are recorded as failed cells without running, which stands in for an
    /// algorithm running out of memory.
    #[serde(default)]
    pub row_limits: BTreeMap<String, usize>,
    /// Run cells concurrently. Timing columns are then unreliable.
    #[serde(default)]
    pub parallel_cells: bool,
    /// Directory that registry paths are resolved against.
    #[serde(default)]
    pub data_dir: Option<PathBuf>,
}

impl ExperimentPlan {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("invalid plan: {e}")))
    }

    pub fn parsed_algorithms(&self) -> Result<Vec<Algorithm>> {
        if self.algorithms.is_empty() {
            return Err(Error::config("plan lists no algorithms"));
        }
        let mut out = Vec::new();
        for a in &self.algorithms {
            let alg: Algorithm = a.parse()?;
            if !out.contains(&alg) {
                out.push(alg);
            }
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        self.parsed_algorithms()?;
        if self.datasets.is_empty() {
            return Err(Error::config("plan lists no datasets"));
        }
        if self.k_values.is_empty() {
            return Err(Error::config("plan lists no k values"));
        }
        if self.k_values.contains(&0) {
            return Err(Error::config("k values must be at least 1"));
        }
        if self.n_exec == 0 {
            return Err(Error::config("n_exec must be at least 1"));
        }
        for key in self.row_limits.keys() {
            key.parse::<Algorithm>()?;
        }
        self.search.validate()?;
        self.init.validate()
    }

    pub fn seed_for(&self, run: usize) -> u64 {
        if self.fixed_seed {
            self.base_seed
        } else {
            self.base_seed.wrapping_add(run as u64)
        }
    }
}

/// Per-run measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset: String,
    pub algorithm: String,
    pub k: usize,
    pub run: usize,
    pub seed: u64,
    pub objective: f64,
    pub relative_error: f64,
    pub cpu_init: f64,
    pub cpu_full: f64,
    /// Always `cpu_init + cpu_full`.
    pub cpu: f64,
    pub n_d: u64,
    pub iterations: u64,
    pub n_s: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub dataset: String,
    pub algorithm: String,
    pub k: usize,
    pub reason: String,
    /// True when the cell raised an error; false when it was skipped by a
    /// row limit.
    pub errored: bool,
}

/// Table-bottom averages over `k` for one (dataset, algorithm).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMean {
    pub dataset: String,
    pub algorithm: String,
    pub e_mean: Option<f64>,
    pub cpu_mean: Option<f64>,
    /// `k` cells left out because they failed.
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanMetadata {
    pub parallel_cells: bool,
    pub timing_reliable: bool,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResults {
    pub runs: Vec<RunRecord>,
    pub summaries: Vec<RunSummary>,
    pub failures: Vec<CellFailure>,
    pub means: Vec<DatasetMean>,
    pub scores: ScoreTable,
    pub metadata: PlanMetadata,
}

impl PlanResults {
    pub fn any_errored(&self) -> bool {
        self.failures.iter().any(|f| f.errored)
    }

    pub fn summary(&self, dataset: &str, algorithm: &str, k: usize) -> Option<&RunSummary> {
        self.summaries
            .iter()
            .find(|s| s.dataset == dataset && s.algorithm == algorithm && s.k == k)
    }

    pub fn mean(&self, dataset: &str, algorithm: &str) -> Option<&DatasetMean> {
        self.means
            .iter()
            .find(|m| m.dataset == dataset && m.algorithm == algorithm)
    }

    pub fn write_runs_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        for r in &self.runs {
            w.serialize(r)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

struct ResolvedDataset {
    name: String,
    data: Dataset,
    chunk_size: BTreeMap<usize, usize>,
    cpu_max: BTreeMap<usize, f64>,
    max_chunks: Option<usize>,
    f_best: BTreeMap<usize, f64>,
}

fn resolve(plan: &ExperimentPlan, ds: &PlanDataset, registry: &Registry) -> Result<ResolvedDataset> {
    let entry: Option<&RegistryEntry> = match &ds.registry {
        Some(name) => Some(
            registry
                .get(name)
                .ok_or_else(|| Error::config(format!("no registry entry named '{name}'")))?,
        ),
        None => None,
    };
    let data_dir = plan.data_dir.clone().unwrap_or_else(|| PathBuf::from("data"));
    let spec = match (&ds.spec, entry) {
        (Some(spec), _) => spec.clone(),
        (None, Some(e)) => e.spec(&data_dir),
        (None, None) => {
            return Err(Error::config(format!(
                "dataset '{}' needs a spec or a registry name",
                ds.name
            )))
        }
    };
    let data = load(&spec)?;

    let mut chunk_size = BTreeMap::new();
    let mut cpu_max = BTreeMap::new();
    let mut f_best = BTreeMap::new();
    for &k in &plan.k_values {
        let proto = entry.and_then(|e| e.protocol(k));
        if let Some(s) = ds.chunk_size.or(proto.map(|p| p.chunk_size)) {
            chunk_size.insert(k, s);
        }
        if let Some(t) = ds.cpu_max.or(proto.map(|p| p.cpu_max)) {
            cpu_max.insert(k, t);
        }
        let explicit = ds.f_best.get(&k.to_string()).copied();
        if let Some(f) = explicit.or_else(|| entry.and_then(|e| e.f_best(k))) {
            f_best.insert(k, f);
        }
    }
    Ok(ResolvedDataset {
        name: ds.name.clone(),
        data,
        chunk_size,
        cpu_max,
        max_chunks: ds.max_chunks,
        f_best,
    })
}

struct Cell {
    dataset: usize,
    k: usize,
    algorithm: Algorithm,
}

enum CellResult {
    Done(Vec<RunRecord>),
    Failed(CellFailure),
}

pub fn run_plan(plan: &ExperimentPlan) -> Result<PlanResults> {
    run_plan_with(plan, &Registry::builtin())
}

pub fn run_plan_with(plan: &ExperimentPlan, registry: &Registry) -> Result<PlanResults> {
    plan.validate()?;
    let algorithms = plan.parsed_algorithms()?;
    let datasets = plan
        .datasets
        .iter()
        .map(|d| resolve(plan, d, registry))
        .collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::new();
    for (di, _) in datasets.iter().enumerate() {
        for &k in &plan.k_values {
            for &algorithm in &algorithms {
                cells.push(Cell {
                    dataset: di,
                    k,
                    algorithm,
                });
            }
        }
    }
    let exec = |cell: &Cell| run_cell(plan, &datasets[cell.dataset], cell);
    let results: Vec<CellResult> = if plan.parallel_cells {
        cells.par_iter().map(exec).collect()
    } else {
        cells.iter().map(exec).collect()
    };

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            CellResult::Done(mut rs) => runs.append(&mut rs),
            CellResult::Failed(f) => failures.push(f),
        }
    }

    let mut summaries = Vec::new();
    for ds in &datasets {
        for &k in &plan.k_values {
            let (f_best, local) = match ds.f_best.get(&k) {
                Some(&f) => (f, false),
                None => {
                    let best = runs
                        .iter()
                        .filter(|r| r.dataset == ds.name && r.k == k)
                        .map(|r| r.objective)
                        .fold(f64::INFINITY, f64::min);
                    (best, true)
                }
            };
            for &alg in &algorithms {
                let cell_runs: Vec<&RunRecord> = runs
                    .iter()
                    .filter(|r| r.dataset == ds.name && r.k == k && r.algorithm == alg.id())
                    .collect();
                if cell_runs.is_empty() {
                    continue;
                }
                let measurements: Vec<RunMeasurement> = cell_runs
                    .iter()
                    .map(|r| RunMeasurement {
                        objective: r.objective,
                        cpu: r.cpu,
                        distance_evals: r.n_d,
                        chunks: r.n_s,
                    })
                    .collect();
                summaries.push(summarize(alg.id(), &ds.name, k, f_best, local, &measurements)?);
            }
        }
    }
    for r in &mut runs {
        if let Some(s) = summaries
            .iter()
            .find(|s| s.dataset == r.dataset && s.k == r.k && s.algorithm == r.algorithm)
        {
            r.relative_error = crate::metrics::relative_error(r.objective, s.f_best_used)?;
        }
    }

    let mut means = Vec::new();
    let mut per_dataset = Vec::new();
    for ds in &datasets {
        let mut results = Vec::new();
        for &alg in &algorithms {
            let mut errs = Vec::new();
            let mut cpus = Vec::new();
            for &k in &plan.k_values {
                let s = summaries
                    .iter()
                    .find(|s| s.dataset == ds.name && s.k == k && s.algorithm == alg.id());
                errs.push(s.map(|s| s.e_mean));
                cpus.push(s.map(|s| s.cpu_mean));
            }
            let (e_mean, excluded) = mean_over_k(&errs);
            let (cpu_mean, _) = mean_over_k(&cpus);
            let complete = excluded == 0;
            results.push((
                alg.id().to_string(),
                match (complete, e_mean, cpu_mean) {
                    (true, Some(e), Some(c)) => Some((e, c)),
                    _ => None,
                },
            ));
            means.push(DatasetMean {
                dataset: ds.name.clone(),
                algorithm: alg.id().to_string(),
                e_mean,
                cpu_mean,
                excluded,
            });
        }
        per_dataset.push(score_dataset(&ds.name, &results)?);
    }
    let scores = aggregate_scores(&per_dataset)?;

    Ok(PlanResults {
        runs,
        summaries,
        failures,
        means,
        scores,
        metadata: PlanMetadata {
            parallel_cells: plan.parallel_cells,
            timing_reliable: !plan.parallel_cells,
            threads: rayon::current_num_threads(),
        },
    })
}

fn run_cell(plan: &ExperimentPlan, ds: &ResolvedDataset, cell: &Cell) -> CellResult {
    let fail = |reason: String, errored: bool| {
        CellResult::Failed(CellFailure {
            dataset: ds.name.clone(),
            algorithm: cell.algorithm.id().to_string(),
            k: cell.k,
            reason,
            errored,
        })
    };
    let limit = plan
        .row_limits
        .iter()
        .find(|(name, _)| name.parse::<Algorithm>().ok() == Some(cell.algorithm))
        .map(|(_, &l)| l);
    if let Some(limit) = limit {
        if ds.data.len() > limit {
            return fail(
                format!("{} rows exceed the limit of {limit}", ds.data.len()),
                false,
            );
        }
    }
    let mut records = Vec::with_capacity(plan.n_exec);
    for run in 0..plan.n_exec {
        let seed = plan.seed_for(run);
        match run_once(plan, ds, cell, seed) {
            Ok(out) => records.push(RunRecord {
                dataset: ds.name.clone(),
                algorithm: cell.algorithm.id().to_string(),
                k: cell.k,
                run,
                seed,
                objective: out.objective,
                relative_error: f64::NAN,
                cpu_init: out.counter.cpu_init,
                cpu_full: out.counter.cpu_full,
                cpu: out.counter.cpu_init + out.counter.cpu_full,
                n_d: out.counter.distance_evals,
                iterations: out.counter.iterations,
                n_s: out.chunks,
            }),
            Err(e) => return fail(e.to_string(), true),
        }
    }
    CellResult::Done(records)
}

fn run_once(
    plan: &ExperimentPlan,
    ds: &ResolvedDataset,
    cell: &Cell,
    seed: u64,
) -> Result<ClusteringOutcome> {
    let k = cell.k;
    let init = |method| InitConfig {
        method,
        seed,
        ..plan.init.clone()
    };
    match cell.algorithm {
        Algorithm::BigMeans => {
            let chunk_size = *ds.chunk_size.get(&k).ok_or_else(|| {
                Error::config(format!("no chunk size for {} at k = {k}", ds.name))
            })?;
            let cfg = BigMeansConfig {
                k,
                chunk_size,
                max_cpu_seconds: ds.cpu_max.get(&k).copied(),
                max_chunks: ds.max_chunks,
                search: plan.search,
                init: init(InitMethod::KmeansPp),
                seed,
                final_assignment: true,
            };
            Ok(big_means(&ds.data, &cfg)?.0)
        }
        Algorithm::Forgy => kmeans(&ds.data, k, &init(InitMethod::Forgy), &plan.search),
        Algorithm::KmeansPp => kmeans(&ds.data, k, &init(InitMethod::KmeansPp), &plan.search),
        Algorithm::KmeansParallel => {
            kmeans(&ds.data, k, &init(InitMethod::KmeansParallel), &plan.search)
        }
    }
}
