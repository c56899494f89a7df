//! Local/global convergence protocol and the aggregated evaluation report.

use std::fmt::Write as _;
use std::ops::Range;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{directed_hausdorff, dtw_normalized, icp_med, rollout, traj_rmse, vel_rmse, Trajectory};
use crate::data::OracleDataset;
use crate::policy::{Policy, ShapingState};
use crate::{Error, Result};

/// Perturbation scale and rollout length of a convergence test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolMode {
    /// Standard deviation of the Gaussian offset added to each start.
    pub sigma: f64,
    /// Roll out twice the periodic length and keep the second half.
    pub settle: bool,
}

impl ProtocolMode {
    /// Small perturbations, `N` states per rollout.
    pub const LOCAL: ProtocolMode = ProtocolMode { sigma: 0.05, settle: false };
    /// Large perturbations, `2N` states with the last `N` kept.
    pub const GLOBAL: ProtocolMode = ProtocolMode { sigma: 0.15, settle: true };
}

/// Default number of perturbed starts.
pub const DEFAULT_INITS: usize = 25;

/// Shape metrics averaged over the non-divergent rollouts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolResult {
    /// Mean directed Hausdorff distance from rollout to demonstration;
    /// infinite when every rollout diverged.
    pub hausdorff: f64,
    /// Mean ICP-MED; infinite when every rollout diverged.
    pub icp_med: f64,
    pub rollouts: usize,
    pub diverged: usize,
}

impl ProtocolResult {
    pub fn is_flagged(&self) -> bool {
        self.diverged > 0
    }
}

fn periodic_demos(ds: &OracleDataset) -> Result<Vec<Range<usize>>> {
    let (a, b) = ds.periodic;
    let demos: Vec<Range<usize>> = ds
        .demos()
        .into_iter()
        .map(|r| r.start.max(a)..r.end.min(b))
        .filter(|r| r.start < r.end)
        .collect();
    if demos.is_empty() {
        return Err(Error::EmptyPeriodicSubset);
    }
    Ok(demos)
}

/// Perturbs `n_inits` sampled demonstration positions by `N(0, σ²)` per
/// coordinate, rolls the policy out from each, and averages directed
/// Hausdorff (rollout to demonstration) and ICP-MED over the rollouts.
pub fn convergence_protocol(
    policy: &Policy,
    ds: &OracleDataset,
    mode: ProtocolMode,
    n_inits: usize,
    seed: u64,
) -> Result<ProtocolResult> {
    if !(mode.sigma >= 0.0 && mode.sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("protocol sigma must be nonnegative, got {}", mode.sigma)));
    }
    if n_inits == 0 {
        return Err(Error::InvalidParameter("protocol needs at least one initialization".into()));
    }
    if ds.dim() != policy.dim() {
        return Err(Error::DimensionMismatch { expected: policy.dim(), found: ds.dim() });
    }
    let demos = periodic_demos(ds)?;
    let pool: Vec<usize> = demos.iter().flat_map(|r| r.clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks: Vec<usize> = if pool.len() >= n_inits {
        index::sample(&mut rng, pool.len(), n_inits).into_iter().map(|k| pool[k]).collect()
    } else {
        (0..n_inits).map(|_| pool[rng.random_range(0..pool.len())]).collect()
    };
    let noise = Normal::new(0.0, mode.sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let dt = ds.mean_dt();
    let shape = ShapingState::default();
    let (mut h_sum, mut m_sum, mut ok, mut diverged) = (0.0, 0.0, 0usize, 0usize);
    for &i in &picks {
        let demo = demos.iter().find(|r| r.contains(&i)).expect("pick drawn from a demo");
        let target = &ds.x[demo.clone()];
        let len = target.len();
        let x0: Vec<f64> = ds.x[i].iter().map(|v| v + noise.sample(&mut rng)).collect();
        let states = if mode.settle { 2 * len } else { len };
        let tr = rollout(policy, &x0, ds.z_at(i), dt, states - 1, &shape)?;
        if tr.diverged || tr.len() < states {
            diverged += 1;
            continue;
        }
        let kept = tr.skip(states - len);
        h_sum += directed_hausdorff(&kept.x, target)?;
        m_sum += if len >= ds.dim() { icp_med(&kept.x, target)? } else { traj_rmse(&kept.x, target)? };
        ok += 1;
    }
    let mean = |s: f64| if ok == 0 { f64::INFINITY } else { s / ok as f64 };
    Ok(ProtocolResult { hausdorff: mean(h_sum), icp_med: mean(m_sum), rollouts: picks.len(), diverged })
}

/// Imitation metrics of rollouts started at each demonstration's first
/// periodic sample, averaged over demonstrations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImitationMetrics {
    pub traj_rmse: f64,
    pub norm_dtw: f64,
    pub vel_rmse: f64,
    /// Number of demonstrations whose rollout diverged (their metrics are
    /// infinite).
    pub diverged: usize,
}

/// Rolls out from each demonstration's first periodic state for as many
/// steps as the demonstration has samples and compares against it.
pub fn imitation_metrics(policy: &Policy, ds: &OracleDataset) -> Result<ImitationMetrics> {
    let demos = periodic_demos(ds)?;
    let dt = ds.mean_dt();
    let shape = ShapingState::default();
    let (mut rmse, mut dtw, mut vel, mut diverged) = (0.0, 0.0, 0.0, 0usize);
    for r in &demos {
        let len = r.len();
        let tr: Trajectory = rollout(policy, &ds.x[r.start], ds.z_at(r.start), dt, len - 1, &shape)?;
        if tr.diverged || tr.len() < len {
            diverged += 1;
            continue;
        }
        rmse += traj_rmse(&tr.x, &ds.x[r.clone()])?;
        dtw += dtw_normalized(&tr.x, &ds.x[r.clone()])?;
        vel += vel_rmse(&tr.v, &ds.v[r.clone()])?;
    }
    if diverged > 0 {
        return Ok(ImitationMetrics { traj_rmse: f64::INFINITY, norm_dtw: f64::INFINITY, vel_rmse: f64::INFINITY, diverged });
    }
    let k = demos.len() as f64;
    Ok(ImitationMetrics { traj_rmse: rmse / k, norm_dtw: dtw / k, vel_rmse: vel / k, diverged })
}

/// All metrics for one evaluation seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub imitation: ImitationMetrics,
    pub local: ProtocolResult,
    pub global: ProtocolResult,
}

impl SeedMetrics {
    /// Values in table column order.
    pub fn columns(&self) -> [f64; 7] {
        [
            self.imitation.traj_rmse,
            self.imitation.norm_dtw,
            self.imitation.vel_rmse,
            self.local.hausdorff,
            self.local.icp_med,
            self.global.hausdorff,
            self.global.icp_med,
        ]
    }
}

/// Mean and population standard deviation over finite values; infinite
/// values are excluded and counted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
    pub excluded: usize,
}

impl Stat {
    pub fn from_values(values: &[f64]) -> Stat {
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        let excluded = values.len() - finite.len();
        if finite.is_empty() {
            return Stat { mean: f64::INFINITY, std: f64::INFINITY, count: 0, excluded };
        }
        let k = finite.len() as f64;
        let mean = finite.iter().sum::<f64>() / k;
        let var = finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k;
        Stat { mean, std: var.sqrt(), count: finite.len(), excluded }
    }

    /// `mean ± std`, `∞` when nothing was finite, and a trailing `*` when
    /// some values were excluded.
    pub fn display(&self) -> String {
        if self.count == 0 {
            return "∞".into();
        }
        let star = if self.excluded > 0 { "*" } else { "" };
        format!("{:.4} ± {:.4}{star}", self.mean, self.std)
    }
}

/// Evaluation summary across seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seeds: Vec<SeedMetrics>,
    pub traj_rmse: Stat,
    pub norm_dtw: Stat,
    pub vel_rmse: Stat,
    pub local_hausdorff: Stat,
    pub local_icp_med: Stat,
    pub global_hausdorff: Stat,
    pub global_icp_med: Stat,
}

/// Table column names in order.
pub const COLUMNS: [&str; 7] =
    ["traj_rmse", "norm_dtw", "vel_rmse", "local_hausdorff", "local_icp_med", "global_hausdorff", "global_icp_med"];

fn fmt_value(v: f64) -> String {
    if v.is_finite() {
        format!("{v:?}")
    } else {
        "inf".into()
    }
}

impl EvalReport {
    /// Aggregates per-seed metrics (for example from independently trained
    /// policies).
    pub fn from_seeds(seeds: Vec<SeedMetrics>) -> Result<EvalReport> {
        if seeds.is_empty() {
            return Err(Error::Empty("seed list"));
        }
        let col = |k: usize| Stat::from_values(&seeds.iter().map(|s| s.columns()[k]).collect::<Vec<_>>());
        Ok(EvalReport {
            traj_rmse: col(0),
            norm_dtw: col(1),
            vel_rmse: col(2),
            local_hausdorff: col(3),
            local_icp_med: col(4),
            global_hausdorff: col(5),
            global_icp_med: col(6),
            seeds,
        })
    }

    pub fn stats(&self) -> [Stat; 7] {
        [
            self.traj_rmse,
            self.norm_dtw,
            self.vel_rmse,
            self.local_hausdorff,
            self.local_icp_med,
            self.global_hausdorff,
            self.global_icp_med,
        ]
    }

    /// Whether any rollout in any seed diverged.
    pub fn is_flagged(&self) -> bool {
        self.seeds.iter().any(|s| s.imitation.diverged > 0 || s.local.is_flagged() || s.global.is_flagged())
    }

    /// Comma-delimited table: one row per seed, then `mean`, `std`, and
    /// `excluded` rows. Divergent entries are written as `inf`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row");
        for c in COLUMNS {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for s in &self.seeds {
            let _ = write!(out, "seed_{}", s.seed);
            for v in s.columns() {
                let _ = write!(out, ",{}", fmt_value(v));
            }
            out.push('\n');
        }
        let stats = self.stats();
        for (label, f) in [
            ("mean", (|s: &Stat| fmt_value(s.mean)) as fn(&Stat) -> String),
            ("std", |s: &Stat| fmt_value(s.std)),
            ("excluded", |s: &Stat| s.excluded.to_string()),
        ] {
            out.push_str(label);
            for s in &stats {
                out.push(',');
                out.push_str(&f(s));
            }
            out.push('\n');
        }
        out
    }

    /// Human-readable `mean ± std` table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for (name, s) in COLUMNS.iter().zip(self.stats()) {
            let _ = writeln!(out, "{name:<18} {}", s.display());
        }
        out
    }
}

/// Imitation metrics plus both convergence modes for each seed.
pub fn evaluate(policy: &Policy, ds: &OracleDataset, seeds: &[u64]) -> Result<EvalReport> {
    if seeds.is_empty() {
        return Err(Error::Empty("seed list"));
    }
    let imitation = imitation_metrics(policy, ds)?;
    let mut rows = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        rows.push(SeedMetrics {
            seed,
            imitation: imitation.clone(),
            local: convergence_protocol(policy, ds, ProtocolMode::LOCAL, DEFAULT_INITS, seed)?,
            global: convergence_protocol(policy, ds, ProtocolMode::GLOBAL, DEFAULT_INITS, seed.wrapping_add(0x5EED))?,
        });
    }
    EvalReport::from_seeds(rows)
}
