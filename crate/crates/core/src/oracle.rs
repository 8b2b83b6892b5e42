//! Exact MSSC by exhaustive enumeration, for checking heuristics on tiny
//! instances. Deliberately shares no code with the kernels it is used to
//! check.

use crate::dataset::Dataset;
use crate::error::{Error, Result};

pub const MAX_POINTS: usize = 12;
pub const MAX_CLUSTERS: usize = 4;
/// Upper bound on the number of partitions enumerated.
pub const MAX_PARTITIONS: u128 = 1_000_000;

#[derive(Debug, Clone)]
pub struct TinyInstance {
    data: Dataset,
    k: usize,
}

impl TinyInstance {
    pub fn new(data: Dataset, k: usize) -> Result<Self> {
        if data.len() > MAX_POINTS {
            return Err(Error::usage(format!(
                "exact enumeration supports at most {MAX_POINTS} points, got {}",
                data.len()
            )));
        }
        if k == 0 || k > MAX_CLUSTERS {
            return Err(Error::usage(format!(
                "exact enumeration supports 1..={MAX_CLUSTERS} clusters, got {k}"
            )));
        }
        let count = partition_count(data.len(), k);
        if count > MAX_PARTITIONS {
            return Err(Error::usage(format!(
                "{count} partitions exceed the enumeration guard of {MAX_PARTITIONS}"
            )));
        }
        Ok(Self { data, k })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution {
    /// Optimum over partitions into at most `k` nonempty groups.
    pub objective: f64,
    /// Labels of one optimal partition, in first-occurrence order.
    pub labels: Vec<usize>,
    /// Optimum over partitions into exactly `k` nonempty groups, when
    /// `k ≤ m`.
    pub objective_exact_k: Option<f64>,
}

/// Stirling number of the second kind `S(m, k)`.
pub fn stirling2(m: usize, k: usize) -> u128 {
    let mut row = vec![0u128; k + 1];
    row[0] = 1;
    for _ in 0..m {
        for j in (1..=k).rev() {
            row[j] = row[j].saturating_mul(j as u128).saturating_add(row[j - 1]);
        }
        row[0] = 0;
    }
    row[k]
}

/// Partitions of `m` points into between 1 and `k` nonempty groups.
pub fn partition_count(m: usize, k: usize) -> u128 {
    (1..=k).map(|j| stirling2(m, j)).fold(0u128, u128::saturating_add)
}

pub fn exact_mssc(inst: &TinyInstance) -> Result<ExactSolution> {
    let data = &inst.data;
    let m = data.len();
    let mut labels = vec![0usize; m];
    let mut best = Best {
        any: (f64::INFINITY, Vec::new()),
        exact: f64::INFINITY,
    };
    enumerate(data, inst.k, &mut labels, 1, 1, &mut best);
    Ok(ExactSolution {
        objective: best.any.0,
        labels: best.any.1,
        objective_exact_k: (inst.k <= m).then_some(best.exact),
    })
}

struct Best {
    any: (f64, Vec<usize>),
    exact: f64,
}

/// Restricted growth strings: `labels[i] ≤ max(labels[..i]) + 1`.
fn enumerate(data: &Dataset, k: usize, labels: &mut [usize], i: usize, used: usize, best: &mut Best) {
    if i == labels.len() {
        let f = partition_cost(data, labels, used);
        if f < best.any.0 {
            best.any = (f, labels.to_vec());
        }
        if used == k && f < best.exact {
            best.exact = f;
        }
        return;
    }
    for g in 0..used.min(k) {
        labels[i] = g;
        enumerate(data, k, labels, i + 1, used, best);
    }
    if used < k {
        labels[i] = used;
        enumerate(data, k, labels, i + 1, used + 1, best);
    }
}

fn partition_cost(data: &Dataset, labels: &[usize], groups: usize) -> f64 {
    let n = data.dims();
    let mut total = 0.0;
    for g in 0..groups {
        let members: Vec<&[f64]> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == g)
            .map(|(i, _)| data.row(i))
            .collect();
        let count = members.len() as f64;
        for d in 0..n {
            let mean = members.iter().map(|p| p[d]).sum::<f64>() / count;
            total += members.iter().map(|p| (p[d] - mean) * (p[d] - mean)).sum::<f64>();
        }
    }
    total
}

/// `Σ_i ‖x_i − mean(X)‖²`, the optimal objective for a single cluster.
pub fn exact_one_means(data: &Dataset) -> f64 {
    let m = data.len() as f64;
    let mut total = 0.0;
    for d in 0..data.dims() {
        let mean = (0..data.len()).map(|i| data.row(i)[d]).sum::<f64>() / m;
        total += (0..data.len())
            .map(|i| (data.row(i)[d] - mean).powi(2))
            .sum::<f64>();
    }
    total
}
