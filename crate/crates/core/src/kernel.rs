//! Distance kernel, nearest-centroid assignment, objective and centroid update.
//!
//! All reductions run over fixed blocks of [`BLOCK_ROWS`] points. Each block is
//! reduced sequentially and the block results are combined in block order, so
//! every sum is bit-identical no matter how many rayon workers execute it.

use rayon::prelude::*;

use crate::dataset::{Assignment, Centroids, Dataset, EvalCounter};
use crate::error::{Error, Result};

/// Rows per reduction block.
pub const BLOCK_ROWS: usize = 256;

/// `Σ_d (a_d − b_d)²`, computed directly rather than through the
/// `‖a‖² + ‖b‖² − 2a·b` expansion.
pub fn squared_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::usage(format!(
            "vector lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(sq_dist(a, b))
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Sum with the block structure used by every kernel reduction.
pub fn fixed_order_sum(values: &[f64]) -> f64 {
    values
        .par_chunks(BLOCK_ROWS)
        .map(|block| block.iter().sum::<f64>())
        .collect::<Vec<f64>>()
        .into_iter()
        .fold(0.0, |acc, s| acc + s)
}

fn check_dims(data: &Dataset, cent: &Centroids) -> Result<()> {
    if data.dims() != cent.dims() {
        return Err(Error::usage(format!(
            "dataset has {} features but centroids have {}",
            data.dims(),
            cent.dims()
        )));
    }
    Ok(())
}

/// Index and squared distance of the nearest listed center. Ties go to the
/// lowest index because the scan is ascending and the comparison strict.
#[inline]
fn nearest(point: &[f64], cent: &Centroids, active: &[usize]) -> (usize, f64) {
    let mut best = (active[0], sq_dist(point, cent.row(active[0])));
    for &j in &active[1..] {
        let d = sq_dist(point, cent.row(j));
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Labels every point with its nearest non-degenerate centroid and returns
/// the per-point minimum squared distances.
pub fn assign_nearest(
    data: &Dataset,
    cent: &Centroids,
    counter: &mut EvalCounter,
) -> Result<(Assignment, Vec<f64>)> {
    check_dims(data, cent)?;
    let active = cent.active_indices();
    if active.is_empty() {
        return Err(Error::InvalidState(
            "all centroids are degenerate; nothing to assign to".into(),
        ));
    }
    let m = data.len();
    let mut labels = vec![0usize; m];
    let mut dists = vec![0.0f64; m];
    labels
        .par_chunks_mut(BLOCK_ROWS)
        .zip(dists.par_chunks_mut(BLOCK_ROWS))
        .enumerate()
        .for_each(|(b, (lab, dist))| {
            let start = b * BLOCK_ROWS;
            for (off, (l, d)) in lab.iter_mut().zip(dist.iter_mut()).enumerate() {
                let (j, dj) = nearest(data.row(start + off), cent, &active);
                *l = j;
                *d = dj;
            }
        });
    counter.distance_evals += (m * active.len()) as u64;
    Ok((Assignment { labels }, dists))
}

/// `f(C, X) = Σ_i min_j ‖x_i − c_j‖²` over non-degenerate centers.
pub fn objective(data: &Dataset, cent: &Centroids, counter: &mut EvalCounter) -> Result<f64> {
    let (_, dists) = assign_nearest(data, cent, counter)?;
    Ok(fixed_order_sum(&dists))
}

/// Cluster means for a fixed assignment. Clusters without members come back
/// degenerate.
pub fn update_centroids(data: &Dataset, asg: &Assignment, k: usize) -> Result<Centroids> {
    if asg.len() != data.len() {
        return Err(Error::usage(format!(
            "assignment has {} labels for {} points",
            asg.len(),
            data.len()
        )));
    }
    if let Some(&bad) = asg.labels.iter().find(|&&l| l >= k) {
        return Err(Error::usage(format!("label {bad} out of range for k = {k}")));
    }
    let n = data.dims();
    let partials: Vec<(Vec<f64>, Vec<usize>)> = asg
        .labels
        .par_chunks(BLOCK_ROWS)
        .enumerate()
        .map(|(b, labels)| {
            let start = b * BLOCK_ROWS;
            let mut sums = vec![0.0; k * n];
            let mut counts = vec![0usize; k];
            for (off, &l) in labels.iter().enumerate() {
                counts[l] += 1;
                for (s, v) in sums[l * n..(l + 1) * n].iter_mut().zip(data.row(start + off)) {
                    *s += v;
                }
            }
            (sums, counts)
        })
        .collect();

    let mut sums = vec![0.0; k * n];
    let mut counts = vec![0usize; k];
    for (ps, pc) in partials {
        sums.iter_mut().zip(&ps).for_each(|(s, p)| *s += p);
        counts.iter_mut().zip(&pc).for_each(|(c, p)| *c += p);
    }
    let mut degenerate = vec![false; k];
    for j in 0..k {
        let row = &mut sums[j * n..(j + 1) * n];
        if counts[j] == 0 {
            degenerate[j] = true;
            row.fill(0.0);
        } else {
            let c = counts[j] as f64;
            row.iter_mut().for_each(|s| *s /= c);
        }
    }
    Ok(Centroids::from_parts(sums, degenerate, n))
}

/// Squared distance from every point to a single center.
pub(crate) fn distances_to(data: &Dataset, center: &[f64], counter: &mut EvalCounter) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    out.par_chunks_mut(BLOCK_ROWS)
        .enumerate()
        .for_each(|(b, block)| {
            let start = b * BLOCK_ROWS;
            for (off, d) in block.iter_mut().enumerate() {
                *d = sq_dist(data.row(start + off), center);
            }
        });
    counter.distance_evals += data.len() as u64;
    out
}

/// Element-wise `min(current, d(x_i, center))`, i.e. the nearest-center
/// squared distances after adding `center`.
pub(crate) fn min_with_center(
    data: &Dataset,
    current: &[f64],
    center: &[f64],
    counter: &mut EvalCounter,
) -> Vec<f64> {
    let mut d = distances_to(data, center, counter);
    d.iter_mut().zip(current).for_each(|(x, c)| *x = x.min(*c));
    d
}
