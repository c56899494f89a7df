//! Synthetic periodic oracles: ellipse, square and star contours, and a
//! three-joint sinusoidal swimming pattern.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::OracleDataset;
use crate::{Error, Result};

/// Speed profile along piecewise-linear contours.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpeedProfile {
    /// Constant speed along every segment.
    Constant,
    /// Within each segment the normalized progress is
    /// `w(u) = u − (m/2π)·sin(2πu)`, slowing down near corners.
    Modulated { depth: f64 },
}

/// Oracle shape and its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleKind {
    Ellipse { a: f64, b: f64, center: [f64; 2] },
    Square { side: f64, profile: SpeedProfile },
    Star { points: usize, outer: f64, inner: f64, profile: SpeedProfile },
    /// `x_i(t) = a_i sin(ωt + φ_i) + b_i sin(2ωt + 2φ_i)` for three joints.
    Swim { first: [f64; 3], second: [f64; 3], phase: [f64; 3] },
}

impl OracleKind {
    /// Default parameters for a shape name (`ellipse`, `square`, `star`,
    /// `swim`).
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "ellipse" => Self::Ellipse { a: 2.0, b: 1.0, center: [0.0, 0.0] },
            "square" => Self::Square { side: 1.0, profile: SpeedProfile::Constant },
            "star" => Self::Star { points: 5, outer: 1.0, inner: 0.45, profile: SpeedProfile::Constant },
            "swim" => Self::Swim { first: [1.0, 0.6, 0.8], second: [0.3, 0.2, 0.25], phase: [0.0, PI / 2.0, PI / 4.0] },
            other => return Err(Error::UnknownOracle(other.to_string())),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Swim { .. } => 3,
            _ => 2,
        }
    }

    /// Default period in seconds.
    pub fn default_period(&self) -> f64 {
        match self {
            Self::Swim { .. } => 4.0,
            _ => 2.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        match self {
            Self::Ellipse { a, b, .. } if !(*a > 0.0 && *b > 0.0) => bad("ellipse semi-axes must be positive"),
            Self::Square { side, .. } if !(*side > 0.0) => bad("square side must be positive"),
            Self::Star { points, outer, inner, .. } if *points < 3 || !(*outer > *inner && *inner > 0.0) => {
                bad("star needs at least 3 points and 0 < inner < outer")
            }
            Self::Square { profile: SpeedProfile::Modulated { depth }, .. }
            | Self::Star { profile: SpeedProfile::Modulated { depth }, .. }
                if !(0.0..1.0).contains(depth) =>
            {
                bad("modulation depth must lie in [0, 1)")
            }
            _ => Ok(()),
        }
    }

    fn vertices(&self) -> Vec<[f64; 2]> {
        match self {
            Self::Square { side, .. } => {
                let h = side / 2.0;
                vec![[h, -h], [h, h], [-h, h], [-h, -h]]
            }
            Self::Star { points, outer, inner, .. } => (0..2 * points)
                .map(|k| {
                    let r = if k % 2 == 0 { *outer } else { *inner };
                    let ang = PI / 2.0 + PI * k as f64 / *points as f64;
                    [r * ang.cos(), r * ang.sin()]
                })
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Analytic position and velocity at time `t` for period `period`.
    pub fn state(&self, t: f64, period: f64) -> (Vec<f64>, Vec<f64>) {
        let w = 2.0 * PI / period;
        match self {
            Self::Ellipse { a, b, center } => {
                let (s, c) = (w * t).sin_cos();
                (vec![center[0] + a * c, center[1] + b * s], vec![-a * w * s, b * w * c])
            }
            Self::Swim { first, second, phase } => {
                let mut x = Vec::with_capacity(3);
                let mut v = Vec::with_capacity(3);
                for i in 0..3 {
                    let p1 = w * t + phase[i];
                    let p2 = 2.0 * w * t + 2.0 * phase[i];
                    x.push(first[i] * p1.sin() + second[i] * p2.sin());
                    v.push(first[i] * w * p1.cos() + 2.0 * second[i] * w * p2.cos());
                }
                (x, v)
            }
            Self::Square { profile, .. } | Self::Star { profile, .. } => polyline_state(&self.vertices(), *profile, t, period),
        }
    }
}

fn progress(profile: SpeedProfile, u: f64) -> (f64, f64) {
    match profile {
        SpeedProfile::Constant => (u, 1.0),
        SpeedProfile::Modulated { depth } => {
            let (s, c) = (2.0 * PI * u).sin_cos();
            (u - depth / (2.0 * PI) * s, 1.0 - depth * c)
        }
    }
}

fn polyline_state(verts: &[[f64; 2]], profile: SpeedProfile, t: f64, period: f64) -> (Vec<f64>, Vec<f64>) {
    let segs = verts.len();
    let g = (t / period).rem_euclid(1.0) * segs as f64;
    let mut s = g.floor() as usize;
    let mut u = g - s as f64;
    if s >= segs {
        s = segs - 1;
        u = 1.0;
    }
    let seg_vel = |k: usize, u: f64| -> [f64; 2] {
        let (a, b) = (verts[k % segs], verts[(k + 1) % segs]);
        let rate = progress(profile, u).1 * segs as f64 / period;
        [(b[0] - a[0]) * rate, (b[1] - a[1]) * rate]
    };
    const CORNER_TOL: f64 = 1e-9;
    if u < CORNER_TOL || u > 1.0 - CORNER_TOL {
        let k = if u < CORNER_TOL { s } else { s + 1 };
        let p = verts[k % segs];
        let before = seg_vel(k + segs - 1, 1.0);
        let after = seg_vel(k, 0.0);
        return (p.to_vec(), vec![(before[0] + after[0]) / 2.0, (before[1] + after[1]) / 2.0]);
    }
    let (a, b) = (verts[s], verts[(s + 1) % segs]);
    let wu = progress(profile, u).0;
    let x = vec![a[0] + wu * (b[0] - a[0]), a[1] + wu * (b[1] - a[1])];
    let v = seg_vel(s, u);
    (x, v.to_vec())
}

/// Raw (unnormalized) closed oracle: `samples` states at
/// `t_k = k·P/(samples − 1)`, so the first and last states coincide.
/// Optional Gaussian position noise of standard deviation `noise`.
pub fn synth_oracle_raw(kind: &OracleKind, samples: usize, period: f64, noise: f64, seed: u64) -> Result<OracleDataset> {
    kind.validate()?;
    if samples < 8 {
        return Err(Error::InvalidParameter(format!("oracle needs at least 8 samples, got {samples}")));
    }
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::InvalidParameter("period must be positive".into()));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidParameter("noise must be nonnegative".into()));
    }
    let mut t = Vec::with_capacity(samples);
    let mut x = Vec::with_capacity(samples);
    let mut v = Vec::with_capacity(samples);
    for k in 0..samples {
        let tk = if k + 1 == samples { period } else { k as f64 * period / (samples - 1) as f64 };
        let (xk, vk) = kind.state(tk, period);
        t.push(tk);
        x.push(xk);
        v.push(vk);
    }
    v[samples - 1] = v[0].clone();
    if noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Normal::new(0.0, noise).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        for xk in &mut x {
            for c in xk.iter_mut() {
                *c += dist.sample(&mut rng);
            }
        }
    }
    x[samples - 1] = x[0].clone();
    OracleDataset::new(t, x, v, None, period, true)
}

/// Normalized closed oracle; the transform back to raw units is recorded.
pub fn synth_oracle(kind: &OracleKind, samples: usize, period: f64, noise: f64, seed: u64) -> Result<OracleDataset> {
    Ok(synth_oracle_raw(kind, samples, period, noise, seed)?.normalize()?.0)
}
