//! Rollout integration, imitation and shape metrics, and the
//! local/global convergence protocol.

mod icp;
mod metrics;
mod protocol;

use std::path::Path;

pub use icp::{icp, icp_med, kabsch, mean_nearest_distance, IcpResult};
pub use metrics::{directed_hausdorff, dtw, dtw_normalized, traj_rmse, vel_rmse};
pub use protocol::{
    convergence_protocol, evaluate, imitation_metrics, EvalReport, COLUMNS, ImitationMetrics, ProtocolMode, ProtocolResult,
    SeedMetrics, Stat,
};

use crate::data::OracleDataset;
use crate::linalg::norm;
use crate::policy::{Policy, ShapingState};
use crate::{Error, Result};

/// Divergence threshold as a multiple of the workspace diameter.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

/// Rolled-out states with the policy velocity recorded at each one.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    /// Set when the state left the divergence ball or the policy produced
    /// a non-finite or singular evaluation. The trajectory then ends at
    /// the last valid state.
    pub diverged: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Final state.
    pub fn last(&self) -> Option<&[f64]> {
        self.x.last().map(Vec::as_slice)
    }

    /// Drops the first `k` samples.
    pub fn skip(&self, k: usize) -> Trajectory {
        let k = k.min(self.len());
        Trajectory { t: self.t[k..].to_vec(), x: self.x[k..].to_vec(), v: self.v[k..].to_vec(), diverged: self.diverged }
    }

    /// Converts to a dataset with conditioning `z` (all samples periodic).
    pub fn to_dataset(&self, z: Option<f64>, period: f64) -> Result<OracleDataset> {
        if self.is_empty() {
            return Err(Error::Empty("trajectory"));
        }
        let zs = z.map(|z| vec![z; self.len()]);
        OracleDataset::new(self.t.clone(), self.x.clone(), self.v.clone(), zs, period, false)
    }

    /// Writes the trajectory in the dataset file format.
    pub fn save(&self, path: impl AsRef<Path>, z: Option<f64>, period: f64) -> Result<()> {
        self.to_dataset(z, period)?.save(path)
    }
}

/// Diameter of the normalized workspace `[−½, ½]ⁿ`.
pub fn normalized_workspace_diameter(n: usize) -> f64 {
    (n as f64).sqrt()
}

/// Bounding-box diagonal of a dataset's positions.
pub fn workspace_diameter(ds: &OracleDataset) -> f64 {
    let n = ds.dim();
    let mut d2 = 0.0;
    for i in 0..n {
        let (lo, hi) = ds.x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[i]), hi.max(p[i])));
        d2 += (hi - lo) * (hi - lo);
    }
    d2.sqrt()
}

/// Forward-Euler rollout of `steps` steps from `x0` (the trajectory holds
/// `steps + 1` states). Divergence is flagged when `‖x‖` exceeds ten times
/// the normalized workspace diameter.
pub fn rollout(policy: &Policy, x0: &[f64], z: f64, dt: f64, steps: usize, shape: &ShapingState) -> Result<Trajectory> {
    let limit = DIVERGENCE_FACTOR * normalized_workspace_diameter(policy.dim());
    rollout_with_limit(policy, x0, z, dt, steps, shape, limit)
}

/// [`rollout`] with an explicit divergence radius on `‖x‖`.
pub fn rollout_with_limit(
    policy: &Policy,
    x0: &[f64],
    z: f64,
    dt: f64,
    steps: usize,
    shape: &ShapingState,
    limit: f64,
) -> Result<Trajectory> {
    rollout_field(x0, dt, steps, limit, |x| policy.velocity(x, z, shape), policy.dim())
}

/// Forward-Euler rollout of an arbitrary `n`-dimensional field with
/// divergence radius `limit`. A field error truncates the trajectory and
/// flags it as divergent.
pub fn rollout_field(
    x0: &[f64],
    dt: f64,
    steps: usize,
    limit: f64,
    mut field: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    n: usize,
) -> Result<Trajectory> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if x0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: x0.len() });
    }
    crate::check_finite(x0, "initial state")?;
    let mut traj = Trajectory {
        t: Vec::with_capacity(steps + 1),
        x: Vec::with_capacity(steps + 1),
        v: Vec::with_capacity(steps + 1),
        diverged: false,
    };
    let mut x = x0.to_vec();
    for k in 0..=steps {
        if norm(&x) > limit || !x.iter().all(|v| v.is_finite()) {
            traj.diverged = true;
            break;
        }
        let v = match field(&x) {
            Ok(v) => v,
            Err(Error::NonFinite(_) | Error::SingularJacobian | Error::DegenerateOrigin { .. }) => {
                traj.diverged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let next: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + dt * b).collect();
        traj.t.push(k as f64 * dt);
        traj.x.push(std::mem::replace(&mut x, next));
        traj.v.push(v);
    }
    Ok(traj)
}
