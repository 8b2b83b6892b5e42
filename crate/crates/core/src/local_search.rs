//! Lloyd's K-means local search.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::{Centroids, ClusteringOutcome, Dataset, EvalCounter};
use crate::error::{Error, Result};
use crate::init::{initialize, seeded_rng, InitConfig};
use crate::kernel::{assign_nearest, fixed_order_sum, update_centroids};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub max_iterations: usize,
    /// Stop once `(f_prev − f_cur) / f_prev` drops below this.
    pub rel_tolerance: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            max_iterations: 300,
            rel_tolerance: 1e-4,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::config("max_iterations must be at least 1"));
        }
        if self.rel_tolerance.is_nan() || self.rel_tolerance < 0.0 {
            return Err(Error::config("rel_tolerance must be non-negative"));
        }
        Ok(())
    }
}

/// Alternates nearest-centroid assignment and mean update starting from
/// `start`.
///
/// Stops when the assignment no longer changes, when the relative objective
/// decrease falls below `rel_tolerance` (or the objective reaches zero), or
/// after `max_iterations` updates. Clusters that empty out become degenerate
/// and stay that way; they are not reseeded here.
pub fn lloyd(
    data: &Dataset,
    start: &Centroids,
    cfg: &SearchConfig,
    counter: &mut EvalCounter,
) -> Result<ClusteringOutcome> {
    cfg.validate()?;
    let k = start.k();
    let (mut asg, dists) = assign_nearest(data, start, counter)?;
    let mut f = fixed_order_sum(&dists);
    let mut history = vec![f];
    let mut cent = start.clone();
    let mut iterations = 0usize;

    while iterations < cfg.max_iterations {
        let next = update_centroids(data, &asg, k)?;
        let (next_asg, next_dists) = assign_nearest(data, &next, counter)?;
        let next_f = fixed_order_sum(&next_dists);
        iterations += 1;
        history.push(next_f);
        cent = next;

        let unchanged = next_asg == asg;
        let converged = f <= 0.0 || (f - next_f) / f < cfg.rel_tolerance;
        asg = next_asg;
        f = next_f;
        if unchanged || converged {
            break;
        }
    }
    counter.iterations += iterations as u64;

    Ok(ClusteringOutcome {
        centroids: cent,
        assignment: Some(asg),
        objective: f,
        objective_history: history,
        counter: *counter,
        chunks: 0,
    })
}

/// Seeds with the configured initializer (RNG seeded from `init_cfg.seed`)
/// and runs [`lloyd`] on the whole dataset. Seeding time and work are
/// reported as `cpu_init`; the local search as `cpu_full`.
pub fn kmeans(
    data: &Dataset,
    k: usize,
    init_cfg: &InitConfig,
    cfg: &SearchConfig,
) -> Result<ClusteringOutcome> {
    cfg.validate()?;
    let mut counter = EvalCounter::default();
    let mut rng = seeded_rng(init_cfg.seed);

    let t0 = Instant::now();
    let start = initialize(data, k, init_cfg, &mut rng, &mut counter)?;
    counter.cpu_init = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let mut out = lloyd(data, &start, cfg, &mut counter)?;
    counter.cpu_full = t1.elapsed().as_secs_f64();
    out.counter = counter;
    Ok(out)
}
