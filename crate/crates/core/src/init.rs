//! Centroid initialization: Forgy, greedy K-means++ (also used to repair
//! degenerate rows of an existing centroid set) and K-means||.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Centroids, Dataset, EvalCounter};
use crate::error::{Error, Result};
use crate::kernel::{self, assign_nearest, fixed_order_sum, min_with_center};

/// The generator every seeded operation in this crate draws from.
pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMethod {
    Forgy,
    KmeansPp,
    KmeansParallel,
}

/// Number of oversampling rounds for K-means||.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rounds {
    Fixed(usize),
    /// `ceil(ln f(X, {c1}))`, at least one round.
    LogInitialCost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitConfig {
    pub method: InitMethod,
    /// Candidates sampled per K-means++ step; the one giving the lowest
    /// objective is kept.
    pub candidates_per_step: usize,
    /// K-means|| oversampling factor `l`. `None` means `2k`.
    pub oversampling: Option<usize>,
    pub rounds: Rounds,
    pub seed: u64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            method: InitMethod::KmeansPp,
            candidates_per_step: 3,
            oversampling: None,
            rounds: Rounds::Fixed(5),
            seed: 0,
        }
    }
}

impl InitConfig {
    pub fn with_method(method: InitMethod) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.candidates_per_step == 0 {
            return Err(Error::config("candidates_per_step must be at least 1"));
        }
        if self.oversampling == Some(0) {
            return Err(Error::config("oversampling factor must be at least 1"));
        }
        if self.rounds == Rounds::Fixed(0) {
            return Err(Error::config("K-means|| needs at least one round"));
        }
        Ok(())
    }
}

/// Runs the configured method from scratch, drawing from `rng`.
pub fn initialize<R: Rng + ?Sized>(
    data: &Dataset,
    k: usize,
    cfg: &InitConfig,
    rng: &mut R,
    counter: &mut EvalCounter,
) -> Result<Centroids> {
    cfg.validate()?;
    check_k(data, k)?;
    match cfg.method {
        InitMethod::Forgy => forgy_init(data, k, rng),
        InitMethod::KmeansPp => kmeanspp_fill(
            data,
            &Centroids::all_degenerate(k, data.dims()),
            cfg,
            rng,
            counter,
        ),
        InitMethod::KmeansParallel => kmeans_parallel_init(data, k, cfg, rng, counter),
    }
}

fn check_k(data: &Dataset, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::config("k must be at least 1"));
    }
    if k > data.len() {
        return Err(Error::config(format!(
            "k = {k} exceeds the number of points ({})",
            data.len()
        )));
    }
    Ok(())
}

/// `k` distinct rows drawn uniformly without replacement.
pub fn forgy_init<R: Rng + ?Sized>(data: &Dataset, k: usize, rng: &mut R) -> Result<Centroids> {
    check_k(data, k)?;
    let picks = index::sample(rng, data.len(), k).into_vec();
    let rows: Vec<&[f64]> = picks.iter().map(|&i| data.row(i)).collect();
    Centroids::from_rows(&rows)
}

/// Fills every degenerate row of `cent` by greedy K-means++ over `data`.
/// Non-degenerate rows are left exactly as they are.
pub fn kmeanspp_fill<R: Rng + ?Sized>(
    data: &Dataset,
    cent: &Centroids,
    cfg: &InitConfig,
    rng: &mut R,
    counter: &mut EvalCounter,
) -> Result<Centroids> {
    cfg.validate()?;
    if data.dims() != cent.dims() {
        return Err(Error::usage(format!(
            "dataset has {} features but centroids have {}",
            data.dims(),
            cent.dims()
        )));
    }
    let holes: Vec<usize> = (0..cent.k()).filter(|&j| cent.is_degenerate(j)).collect();
    if holes.is_empty() {
        return Ok(cent.clone());
    }
    let d2 = if cent.active_count() > 0 {
        Some(assign_nearest(data, cent, counter)?.1)
    } else {
        None
    };
    let picks = greedy_seed(
        data,
        None,
        d2,
        holes.len(),
        cfg.candidates_per_step,
        rng,
        counter,
    );
    let mut out = cent.clone();
    for (&j, &i) in holes.iter().zip(&picks) {
        out.set_row(j, data.row(i));
    }
    Ok(out)
}

/// K-means|| seeding followed by weighted greedy K-means++ reduction of the
/// oversampled candidate set to `k` centers.
pub fn kmeans_parallel_init<R: Rng + ?Sized>(
    data: &Dataset,
    k: usize,
    cfg: &InitConfig,
    rng: &mut R,
    counter: &mut EvalCounter,
) -> Result<Centroids> {
    cfg.validate()?;
    check_k(data, k)?;
    let m = data.len();
    let l = cfg.oversampling.unwrap_or(2 * k) as f64;

    let first = rng.random_range(0..m);
    let mut chosen = vec![first];
    let mut is_chosen = vec![false; m];
    is_chosen[first] = true;
    let mut d2 = kernel::distances_to(data, data.row(first), counter);

    let rounds = match cfg.rounds {
        Rounds::Fixed(r) => r,
        Rounds::LogInitialCost => log_rounds(fixed_order_sum(&d2)),
    };
    for _ in 0..rounds {
        let phi = fixed_order_sum(&d2);
        if phi <= 0.0 {
            break;
        }
        let mut fresh = Vec::new();
        for (i, &d) in d2.iter().enumerate() {
            let p = (l * d / phi).min(1.0);
            if p > 0.0 && rng.random::<f64>() < p {
                fresh.push(i);
            }
        }
        for i in fresh {
            if !is_chosen[i] {
                is_chosen[i] = true;
                chosen.push(i);
                d2 = min_with_center(data, &d2, data.row(i), counter);
            }
        }
    }
    while chosen.len() < k {
        let i = rng.random_range(0..m);
        if !is_chosen[i] {
            is_chosen[i] = true;
            chosen.push(i);
        }
    }

    let candidates = data.select(&chosen)?;
    if chosen.len() == k {
        return Centroids::from_rows(&candidates.rows().collect::<Vec<_>>());
    }
    let cand_cent = Centroids::from_rows(&candidates.rows().collect::<Vec<_>>())?;
    let (asg, _) = assign_nearest(data, &cand_cent, counter)?;
    let weights: Vec<f64> = asg
        .cluster_sizes(chosen.len())
        .into_iter()
        .map(|w| w as f64)
        .collect();
    let picks = greedy_seed(
        &candidates,
        Some(&weights),
        None,
        k,
        cfg.candidates_per_step,
        rng,
        counter,
    );
    let rows: Vec<&[f64]> = picks.iter().map(|&i| candidates.row(i)).collect();
    Centroids::from_rows(&rows)
}

fn log_rounds(initial_cost: f64) -> usize {
    if initial_cost > 1.0 {
        (initial_cost.ln().ceil() as usize).max(1)
    } else {
        1
    }
}

/// Greedy (optionally weighted) K-means++ over the rows of `points`.
///
/// `d2` holds the squared distances to already-placed centers; `None` means
/// nothing is placed yet and the first pick is drawn proportionally to the
/// weights (uniformly when unweighted). Each further pick samples
/// `candidates` rows with probability ∝ `w·D²` and keeps the one with the
/// lowest resulting `Σ w·D²`. When every `w·D²` is zero the pick falls back
/// to a uniform draw. Returns `count` row indices in pick order.
fn greedy_seed<R: Rng + ?Sized>(
    points: &Dataset,
    weights: Option<&[f64]>,
    mut d2: Option<Vec<f64>>,
    count: usize,
    candidates: usize,
    rng: &mut R,
    counter: &mut EvalCounter,
) -> Vec<usize> {
    let m = points.len();
    let mut picks = Vec::with_capacity(count);
    while picks.len() < count {
        let Some(current) = d2.as_deref() else {
            let i = match weights {
                Some(w) => sample_proportional(&prefix_sums(w.iter().copied()), rng)
                    .unwrap_or_else(|| rng.random_range(0..m)),
                None => rng.random_range(0..m),
            };
            d2 = Some(kernel::distances_to(points, points.row(i), counter));
            picks.push(i);
            continue;
        };

        let prefix = prefix_sums(weighted(current, weights));
        let Some(first) = sample_proportional(&prefix, rng) else {
            let i = rng.random_range(0..m);
            d2 = Some(min_with_center(points, current, points.row(i), counter));
            picks.push(i);
            continue;
        };

        let mut best_idx = first;
        let mut best_d2 = min_with_center(points, current, points.row(first), counter);
        if candidates > 1 {
            let mut best_cost = weighted_cost(&best_d2, weights);
            for _ in 1..candidates {
                let i = sample_proportional(&prefix, rng).expect("positive total");
                let cand = min_with_center(points, current, points.row(i), counter);
                let cost = weighted_cost(&cand, weights);
                if cost < best_cost {
                    best_idx = i;
                    best_d2 = cand;
                    best_cost = cost;
                }
            }
        }
        d2 = Some(best_d2);
        picks.push(best_idx);
    }
    picks
}

fn weighted<'a>(d2: &'a [f64], weights: Option<&'a [f64]>) -> impl Iterator<Item = f64> + 'a {
    d2.iter()
        .enumerate()
        .map(move |(i, &d)| weights.map_or(d, |w| w[i] * d))
}

fn weighted_cost(d2: &[f64], weights: Option<&[f64]>) -> f64 {
    match weights {
        None => fixed_order_sum(d2),
        Some(_) => fixed_order_sum(&weighted(d2, weights).collect::<Vec<_>>()),
    }
}

fn prefix_sums(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    values
        .map(|v| {
            acc += v;
            acc
        })
        .collect()
}

/// Draws an index with probability proportional to its increment in
/// `prefix`. Returns `None` when the total is zero.
fn sample_proportional<R: Rng + ?Sized>(prefix: &[f64], rng: &mut R) -> Option<usize> {
    let total = *prefix.last()?;
    if total <= 0.0 {
        return None;
    }
    let u = rng.random::<f64>() * total;
    let i = prefix.partition_point(|&p| p <= u);
    if i < prefix.len() {
        return Some(i);
    }
    // u rounded up to the total: take the last index with positive weight.
    let last = prefix.partition_point(|&p| p < total);
    Some(last.min(prefix.len() - 1))
}
