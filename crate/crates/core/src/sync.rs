//! Phase synchronization of several policies by sinusoidal feedback on the
//! latent angular velocity, and a coupled rollout simulator.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::eval::{normalized_workspace_diameter, Trajectory, DIVERGENCE_FACTOR};
use crate::latent::OMEGA_EPS;
use crate::linalg::norm;
use crate::policy::{Policy, ShapingState};
use crate::{wrap_angle, Error, Result};

/// Default coupling gain `k_ps`.
pub const DEFAULT_K_PS: f64 = 0.5;

/// Policies coupled through their latent phases.
#[derive(Clone, Debug)]
pub struct SyncGroup {
    pub policies: Vec<Policy>,
    /// Desired offsets `δΦ*` as a full `n_s × n_s` matrix in radians.
    offsets: Vec<Vec<f64>>,
    k_ps: f64,
    /// Lower clamp on the synchronized angular velocity.
    pub omega_floor: f64,
    /// Shaping applied to each system during simulation.
    pub shaping: Vec<ShapingState>,
}

impl SyncGroup {
    /// Validates dimensions, the gain, and the offset matrix (symmetric,
    /// zero diagonal, entries in `[−π, π)`).
    pub fn new(policies: Vec<Policy>, offsets: Vec<Vec<f64>>, k_ps: f64) -> Result<Self> {
        let ns = policies.len();
        if ns == 0 {
            return Err(Error::Empty("policy group"));
        }
        let n = policies[0].dim();
        if let Some(p) = policies.iter().find(|p| p.dim() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: p.dim() });
        }
        if !(k_ps >= 0.0 && k_ps.is_finite()) {
            return Err(Error::InvalidParameter(format!("k_ps must be nonnegative, got {k_ps}")));
        }
        if offsets.len() != ns || offsets.iter().any(|row| row.len() != ns) {
            return Err(Error::InvalidParameter(format!("offset matrix must be {ns}x{ns}")));
        }
        let pi = std::f64::consts::PI;
        for i in 0..ns {
            if offsets[i][i] != 0.0 {
                return Err(Error::InvalidParameter(format!("offset diagonal entry {i} must be zero")));
            }
            for j in 0..ns {
                let d = offsets[i][j];
                if !(-pi..pi).contains(&d) {
                    return Err(Error::InvalidParameter(format!("offset ({i},{j}) = {d} outside [-pi, pi)")));
                }
                if d != offsets[j][i] {
                    return Err(Error::InvalidParameter(format!("offset matrix not symmetric at ({i},{j})")));
                }
            }
        }
        let shaping = vec![ShapingState::default(); ns];
        Ok(Self { policies, offsets, k_ps, omega_floor: OMEGA_EPS, shaping })
    }

    /// Group with all desired offsets zero.
    pub fn in_phase(policies: Vec<Policy>, k_ps: f64) -> Result<Self> {
        let ns = policies.len();
        Self::new(policies, vec![vec![0.0; ns]; ns], k_ps)
    }

    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    pub fn k_ps(&self) -> f64 {
        self.k_ps
    }

    pub fn offsets(&self) -> &[Vec<f64>] {
        &self.offsets
    }
}

/// Latent phase `atan2(y₂, y₁)` of `Ψ(x; z)` in `[−π, π)`.
pub fn phase(policy: &Policy, x: &[f64], z: f64) -> Result<f64> {
    policy.phase(x, z)
}

/// `ωᵢ(1 − k_ps Σⱼ sin(δΦ*ᵢⱼ + φᵢ − φⱼ))`, clamped below at the group's
/// angular-velocity floor.
pub fn synchronized_omega(i: usize, phases: &[f64], group: &SyncGroup, base_omega: f64) -> f64 {
    let coupling: f64 = phases.iter().enumerate().map(|(j, pj)| (group.offsets[i][j] + phases[i] - pj).sin()).sum();
    (base_omega * (1.0 - group.k_ps * coupling)).max(group.omega_floor)
}

/// Result of [`simulate_group`].
#[derive(Clone, Debug)]
pub struct GroupTrace {
    /// Timestamps shared by all systems.
    pub t: Vec<f64>,
    pub trajectories: Vec<Trajectory>,
    /// `phases[k][i]`: phase of system `i` at step `k` (radians).
    pub phases: Vec<Vec<f64>>,
    /// Pairs `(i, j)` with `i < j`, in column order of `errors`.
    pub pairs: Vec<(usize, usize)>,
    /// `errors[k][p]`: wrapped `δΦ*ᵢⱼ + φᵢ − φⱼ` in degrees for pair `p`.
    pub errors: Vec<Vec<f64>>,
    pub diverged: Vec<bool>,
}

impl GroupTrace {
    /// Largest absolute pairwise error at step `k`.
    pub fn max_abs_error(&self, k: usize) -> f64 {
        self.errors[k].iter().fold(0.0, |m, e| m.max(e.abs()))
    }

    /// Writes `<stem>_system_<i>.csv` per system (dataset format) and
    /// `<stem>_phase.csv`; returns the written paths.
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str, zs: &[f64], period: f64) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        let mut paths = Vec::new();
        for (i, tr) in self.trajectories.iter().enumerate() {
            let p = dir.join(format!("{stem}_system_{}.csv", i + 1));
            tr.save(&p, zs.get(i).copied(), period)?;
            paths.push(p);
        }
        let p = dir.join(format!("{stem}_phase.csv"));
        std::fs::write(&p, self.phase_csv())?;
        paths.push(p);
        Ok(paths)
    }

    /// Phase table: `t`, one phase column per system, one error column per
    /// pair.
    pub fn phase_csv(&self) -> String {
        let mut out = String::from("t");
        for i in 0..self.phases.first().map_or(0, Vec::len) {
            let _ = write!(out, ",phi_{}", i + 1);
        }
        for (i, j) in &self.pairs {
            let _ = write!(out, ",err_deg_{}_{}", i + 1, j + 1);
        }
        out.push('\n');
        for k in 0..self.t.len() {
            let _ = write!(out, "{:?}", self.t[k]);
            for v in self.phases[k].iter().chain(&self.errors[k]) {
                let _ = write!(out, ",{v:?}");
            }
            out.push('\n');
        }
        out
    }
}

/// Coupled forward-Euler rollout: at every step each system's latent
/// angular velocity is replaced by [`synchronized_omega`]. A system that
/// leaves the divergence ball or hits a degenerate evaluation is flagged
/// and frozen at its last valid state.
pub fn simulate_group(group: &SyncGroup, x0s: &[Vec<f64>], zs: &[f64], dt: f64, steps: usize) -> Result<GroupTrace> {
    let ns = group.len();
    if x0s.len() != ns {
        return Err(Error::LengthMismatch { left: x0s.len(), right: ns });
    }
    if zs.len() != ns {
        return Err(Error::LengthMismatch { left: zs.len(), right: ns });
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let n = group.policies[0].dim();
    for x in x0s {
        if x.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: x.len() });
        }
    }
    let limit = DIVERGENCE_FACTOR * normalized_workspace_diameter(n);
    let pairs: Vec<(usize, usize)> = (0..ns).flat_map(|i| (i + 1..ns).map(move |j| (i, j))).collect();
    let mut xs: Vec<Vec<f64>> = x0s.to_vec();
    let mut diverged = vec![false; ns];
    let mut last_phase = vec![0.0; ns];
    let mut trace = GroupTrace {
        t: Vec::with_capacity(steps + 1),
        trajectories: vec![Trajectory { t: Vec::new(), x: Vec::new(), v: Vec::new(), diverged: false }; ns],
        phases: Vec::with_capacity(steps + 1),
        pairs,
        errors: Vec::with_capacity(steps + 1),
        diverged: Vec::new(),
    };
    for k in 0..=steps {
        let mut latents = vec![Vec::new(); ns];
        for i in 0..ns {
            if diverged[i] {
                continue;
            }
            let shape = &group.shaping[i];
            let ok = norm(&xs[i]) <= limit
                && match group.policies[i].latent(&xs[i], zs[i], shape) {
                    Ok(y) if y[0].hypot(y[1]) > crate::latent::ORIGIN_EPS => {
                        last_phase[i] = wrap_angle(y[1].atan2(y[0]));
                        latents[i] = y;
                        true
                    }
                    Ok(_) => false,
                    Err(Error::NonFinite(_)) => false,
                    Err(e) => return Err(e),
                };
            if !ok {
                diverged[i] = true;
            }
        }
        let phases = last_phase.clone();
        let mut next = xs.clone();
        for i in 0..ns {
            if diverged[i] {
                continue;
            }
            let p = &group.policies[i];
            let base = p.hopf.omega_at(latents[i][0], latents[i][1])?;
            let factor = synchronized_omega(i, &phases, group, base) / base;
            match p.velocity_modulated(&xs[i], zs[i], &group.shaping[i], factor) {
                Ok(v) => {
                    next[i] = xs[i].iter().zip(&v).map(|(a, b)| a + dt * b).collect();
                    let tr = &mut trace.trajectories[i];
                    tr.t.push(k as f64 * dt);
                    tr.x.push(xs[i].clone());
                    tr.v.push(v);
                }
                Err(Error::NonFinite(_) | Error::SingularJacobian | Error::DegenerateOrigin { .. }) => diverged[i] = true,
                Err(e) => return Err(e),
            }
        }
        trace.t.push(k as f64 * dt);
        trace.errors.push(
            trace
                .pairs
                .iter()
                .map(|&(i, j)| wrap_angle(group.offsets[i][j] + phases[i] - phases[j]).to_degrees())
                .collect(),
        );
        trace.phases.push(phases);
        xs = next;
    }
    for (tr, d) in trace.trajectories.iter_mut().zip(&diverged) {
        tr.diverged = *d;
    }
    trace.diverged = diverged;
    Ok(trace)
}
