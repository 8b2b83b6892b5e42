//! The Big-means driver.
//!
//! Each step draws a uniform chunk of `s` points, reseeds the degenerate rows
//! of the incumbent centroids with K-means++ on that chunk, runs Lloyd on the
//! chunk and keeps the result if its chunk objective beats the incumbent's.
//! Resampling the chunk is the only perturbation of the incumbent. After the
//! budget runs out every point of the full dataset is assigned once.
//!
//! A single RNG stream, seeded from [`BigMeansConfig::seed`], is consumed in
//! program order: chunk draw, then repair, chunk after chunk.

use std::borrow::Cow;
use std::time::Instant;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Centroids, ClusteringOutcome, Dataset, EvalCounter};
use crate::error::{Error, Result};
use crate::init::{kmeanspp_fill, seeded_rng, InitConfig, InitMethod};
use crate::kernel::{assign_nearest, fixed_order_sum};
use crate::local_search::{lloyd, SearchConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BigMeansConfig {
    pub k: usize,
    pub chunk_size: usize,
    /// Wall-clock budget for the chunk loop, in seconds.
    pub max_cpu_seconds: Option<f64>,
    pub max_chunks: Option<usize>,
    pub search: SearchConfig,
    /// Only `candidates_per_step` is used; repair is always K-means++.
    pub init: InitConfig,
    pub seed: u64,
    pub final_assignment: bool,
}

impl BigMeansConfig {
    /// A config with default local search and repair settings and no budget;
    /// set `max_chunks` or `max_cpu_seconds` before running.
    pub fn new(k: usize, chunk_size: usize) -> Self {
        Self {
            k,
            chunk_size,
            max_cpu_seconds: None,
            max_chunks: None,
            search: SearchConfig::default(),
            init: InitConfig::default(),
            seed: 0,
            final_assignment: true,
        }
    }

    pub fn with_max_chunks(mut self, chunks: usize) -> Self {
        self.max_chunks = Some(chunks);
        self
    }

    pub fn with_max_cpu_seconds(mut self, seconds: f64) -> Self {
        self.max_cpu_seconds = Some(seconds);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("k must be at least 1"));
        }
        if self.chunk_size < self.k {
            return Err(Error::config(format!(
                "chunk size {} is smaller than k = {}",
                self.chunk_size, self.k
            )));
        }
        if self.chunk_size > m {
            return Err(Error::config(format!(
                "chunk size {} exceeds the number of points ({m})",
                self.chunk_size
            )));
        }
        match (self.max_cpu_seconds, self.max_chunks) {
            (None, None) => {
                return Err(Error::config(
                    "no stop condition: set max_cpu_seconds or max_chunks",
                ))
            }
            (Some(t), _) if !(t.is_finite() && t > 0.0) => {
                return Err(Error::config("max_cpu_seconds must be positive"))
            }
            (_, Some(0)) => return Err(Error::config("max_chunks must be at least 1")),
            _ => {}
        }
        if self.init.method != InitMethod::KmeansPp {
            return Err(Error::config(
                "Big-means repairs degenerate centroids with K-means++ only",
            ));
        }
        self.init.validate()?;
        self.search.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChunkRecord {
    pub chunk: usize,
    /// `f(C'', P)` for the locally optimized candidate.
    pub candidate_objective: f64,
    /// `f_opt` after this chunk.
    pub incumbent_objective: f64,
    pub accepted: bool,
    /// Degenerate rows reseeded before the local search.
    pub repaired: usize,
    pub lloyd_history: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BigMeansTrace {
    pub chunks: Vec<ChunkRecord>,
}

impl BigMeansTrace {
    pub fn incumbent_objectives(&self) -> impl Iterator<Item = f64> + '_ {
        self.chunks.iter().map(|c| c.incumbent_objective)
    }
}

/// `s` distinct indices in `0..m`, uniformly without replacement.
pub fn sample_chunk<R: Rng + ?Sized>(m: usize, s: usize, rng: &mut R) -> Result<Vec<usize>> {
    if s == 0 || s > m {
        return Err(Error::config(format!(
            "cannot sample {s} distinct points from {m}"
        )));
    }
    Ok(index::sample(rng, m, s).into_vec())
}

pub fn big_means(data: &Dataset, cfg: &BigMeansConfig) -> Result<(ClusteringOutcome, BigMeansTrace)> {
    let m = data.len();
    cfg.validate(m)?;
    let mut rng = seeded_rng(cfg.seed);
    let mut counter = EvalCounter::default();
    let mut trace = BigMeansTrace::default();

    let mut incumbent = Centroids::all_degenerate(cfg.k, data.dims());
    let mut f_opt = f64::INFINITY;

    let started = Instant::now();
    loop {
        // A sample of all m points is X itself; keep its order.
        let chunk: Cow<'_, Dataset> = if cfg.chunk_size == m {
            Cow::Borrowed(data)
        } else {
            Cow::Owned(data.select(&sample_chunk(m, cfg.chunk_size, &mut rng)?)?)
        };
        let repaired = incumbent.degenerate_count();
        let seeded = kmeanspp_fill(&chunk, &incumbent, &cfg.init, &mut rng, &mut counter)?;
        let local = lloyd(&chunk, &seeded, &cfg.search, &mut counter)?;

        let accepted = local.objective < f_opt;
        if accepted {
            f_opt = local.objective;
            incumbent = local.centroids;
        }
        trace.chunks.push(ChunkRecord {
            chunk: trace.chunks.len(),
            candidate_objective: local.objective,
            incumbent_objective: f_opt,
            accepted,
            repaired,
            lloyd_history: local.objective_history,
        });

        let done = cfg.max_chunks.is_some_and(|c| trace.chunks.len() >= c)
            || cfg
                .max_cpu_seconds
                .is_some_and(|t| started.elapsed().as_secs_f64() >= t);
        if done {
            break;
        }
    }
    counter.cpu_init = started.elapsed().as_secs_f64();

    let (assignment, objective) = if cfg.final_assignment {
        let t = Instant::now();
        let (asg, dists) = assign_nearest(data, &incumbent, &mut counter)?;
        let f = fixed_order_sum(&dists);
        counter.cpu_full = t.elapsed().as_secs_f64();
        (Some(asg), f)
    } else {
        (None, f_opt)
    };

    let chunks = trace.chunks.len();
    Ok((
        ClusteringOutcome {
            centroids: incumbent,
            assignment,
            objective,
            objective_history: Vec::new(),
            counter,
            chunks,
        },
        trace,
    ))
}

/// Budget for [`choose_chunk_size_hint`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeBudget {
    /// Number of ladder sizes `m, m/2, m/4, …` to try.
    pub rungs: usize,
    pub chunks_per_run: usize,
    pub runs: usize,
    pub seed: u64,
    pub search: SearchConfig,
}

impl Default for ProbeBudget {
    fn default() -> Self {
        Self {
            rungs: 7,
            chunks_per_run: 20,
            runs: 3,
            seed: 0,
            search: SearchConfig::default(),
        }
    }
}

/// Halving ladder `m/2^(rungs−1), …, m/2, m`, ascending, restricted to sizes
/// of at least `k`, without duplicates.
pub fn chunk_size_ladder(m: usize, k: usize, rungs: usize) -> Vec<usize> {
    let mut sizes: Vec<usize> = (0..rungs)
        .rev()
        .filter_map(|j| m.checked_shr(j as u32))
        .filter(|&s| s >= k.max(1))
        .collect();
    sizes.dedup();
    sizes
}

/// Suggests a chunk size by probing the halving ladder with a fixed chunk
/// budget per size and returning the size with the lowest mean final
/// objective. Ties go to the smaller size.
pub fn choose_chunk_size_hint(data: &Dataset, k: usize, budget: &ProbeBudget) -> Result<usize> {
    let ladder = chunk_size_ladder(data.len(), k, budget.rungs);
    choose_chunk_size_from(data, k, &ladder, budget)
}

/// Same as [`choose_chunk_size_hint`] over an explicit list of sizes.
pub fn choose_chunk_size_from(
    data: &Dataset,
    k: usize,
    sizes: &[usize],
    budget: &ProbeBudget,
) -> Result<usize> {
    if budget.runs == 0 || budget.chunks_per_run == 0 {
        return Err(Error::config("probe budget needs at least one run and one chunk"));
    }
    let mut sizes = sizes.to_vec();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.is_empty() {
        return Err(Error::config(format!(
            "no candidate chunk size of at least k = {k} fits {} points",
            data.len()
        )));
    }
    let mut best: Option<(usize, f64)> = None;
    for &s in &sizes {
        let mut total = 0.0;
        for r in 0..budget.runs {
            let mut cfg = BigMeansConfig::new(k, s)
                .with_max_chunks(budget.chunks_per_run)
                .with_seed(budget.seed.wrapping_add(r as u64));
            cfg.search = budget.search;
            total += big_means(data, &cfg)?.0.objective;
        }
        let mean = total / budget.runs as f64;
        if best.is_none_or(|(_, f)| mean < f) {
            best = Some((s, mean));
        }
    }
    Ok(best.expect("at least one size").0)
}
