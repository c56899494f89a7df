//! Imitation and shape metrics: RMSE, normalized DTW, directed Hausdorff.

use crate::linalg::{dist, dist_sq};
use crate::{Error, Result};

/// `√(mean over samples and coordinates of squared differences)`.
pub fn traj_rmse(actual: &[Vec<f64>], desired: &[Vec<f64>]) -> Result<f64> {
    if actual.len() != desired.len() {
        return Err(Error::LengthMismatch { left: actual.len(), right: desired.len() });
    }
    if actual.is_empty() {
        return Err(Error::Empty("trajectory"));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (a, d) in actual.iter().zip(desired) {
        if a.len() != d.len() {
            return Err(Error::DimensionMismatch { expected: d.len(), found: a.len() });
        }
        sum += dist_sq(a, d);
        count += a.len();
    }
    Ok((sum / count as f64).sqrt())
}

/// Same formula as [`traj_rmse`], applied to velocity sequences.
pub fn vel_rmse(actual: &[Vec<f64>], desired: &[Vec<f64>]) -> Result<f64> {
    traj_rmse(actual, desired)
}

/// Minimal cumulative Euclidean cost of a monotone alignment with steps
/// `(1,0)`, `(0,1)`, `(1,1)` and pinned endpoints, plus the optimal path.
pub fn dtw(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<(f64, Vec<(usize, usize)>)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("sequence"));
    }
    let (n, m) = (a.len(), b.len());
    let mut cost = vec![f64::INFINITY; n * m];
    for i in 0..n {
        for j in 0..m {
            let d = dist(&a[i], &b[j]);
            let prev = if i == 0 && j == 0 {
                0.0
            } else {
                let mut best = f64::INFINITY;
                if i > 0 {
                    best = best.min(cost[(i - 1) * m + j]);
                }
                if j > 0 {
                    best = best.min(cost[i * m + j - 1]);
                }
                if i > 0 && j > 0 {
                    best = best.min(cost[(i - 1) * m + j - 1]);
                }
                best
            };
            cost[i * m + j] = prev + d;
        }
    }
    let mut path = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while i > 0 || j > 0 {
        let mut cands = Vec::with_capacity(3);
        if i > 0 && j > 0 {
            cands.push((i - 1, j - 1));
        }
        if i > 0 {
            cands.push((i - 1, j));
        }
        if j > 0 {
            cands.push((i, j - 1));
        }
        let next = cands.into_iter().min_by(|p, q| cost[p.0 * m + p.1].total_cmp(&cost[q.0 * m + q.1])).expect("nonempty");
        (i, j) = next;
        path.push(next);
    }
    path.reverse();
    Ok((cost[n * m - 1], path))
}

/// DTW cost divided by `|a|`.
pub fn dtw_normalized(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    Ok(dtw(a, b)?.0 / a.len() as f64)
}

/// `max_{p∈a} min_{q∈b} ‖p − q‖`.
pub fn directed_hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("point set"));
    }
    let mut worst: f64 = 0.0;
    for p in a {
        let mut best = f64::INFINITY;
        for q in b {
            let d = dist_sq(p, q);
            if d < best {
                best = d;
                if best <= worst {
                    break;
                }
            }
        }
        worst = worst.max(best);
    }
    Ok(worst.sqrt())
}
