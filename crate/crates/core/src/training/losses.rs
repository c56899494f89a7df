//! Loss terms and their exact parameter gradients.
//!
//! Every term has the shape `fn(policy, …, grad: Option<&mut [f64]>) ->
//! Result<f64>`: with a gradient buffer the term's gradient w.r.t. the
//! policy parameters (layout of [`Policy::params`]) is accumulated into it,
//! scaled by `weight`.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::OracleDataset;
use crate::encoder::{DecodeTape, EncodeTape};
use crate::policy::{Policy, VelocityTape};
use crate::{wrap_angle, Error, Result};

/// Smooth-ℓ1 (Huber) value and derivative for one residual.
pub fn smooth_l1(e: f64, beta: f64) -> (f64, f64) {
    if e.abs() < beta {
        (e * e / (2.0 * beta), e / beta)
    } else {
        (e.abs() - beta / 2.0, e.signum())
    }
}

/// Deterministic sampling stream for one loss term in one epoch.
pub(crate) fn term_rng(seed: u64, epoch: usize, term: u64) -> ChaCha8Rng {
    let mut h = seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(epoch as u64 + 1);
    h ^= term.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    h = (h ^ (h >> 31)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(h)
}

/// Axis-aligned sampling box for the regularizers.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SampleBox {
    pub min: f64,
    pub max: f64,
}

impl Default for SampleBox {
    fn default() -> Self {
        Self { min: -0.5, max: 0.5 }
    }
}

impl SampleBox {
    fn sample(&self, rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(self.min..self.max)).collect()
    }
}

fn periodic_range(ds: &OracleDataset) -> Result<std::ops::Range<usize>> {
    let (a, b) = ds.periodic;
    if a >= b {
        return Err(Error::EmptyPeriodicSubset);
    }
    Ok(a..b)
}

/// Mean over samples of the coordinate-summed smooth-ℓ1 velocity error.
pub fn velocity_imitation(policy: &Policy, ds: &OracleDataset, beta: f64, weight: f64, mut grad: Option<&mut [f64]>) -> Result<f64> {
    let len = ds.len();
    let mut tape = VelocityTape::default();
    let mut total = 0.0;
    let mut v_bar = vec![0.0; ds.dim()];
    for i in 0..len {
        policy.velocity_taped(&ds.x[i], ds.z_at(i), &mut tape)?;
        for (c, vb) in v_bar.iter_mut().enumerate() {
            let (l, d) = smooth_l1(tape.v[c] - ds.v[i][c], beta);
            total += l;
            *vb = weight * d / len as f64;
        }
        if let Some(g) = grad.as_deref_mut() {
            policy.velocity_backward(&mut tape, &v_bar, g);
        }
    }
    Ok(total / len as f64)
}

/// Mean over the periodic subset of `‖(R, 0) − (r, y₃..yₙ)‖²`.
pub fn limit_cycle_matching(policy: &Policy, ds: &OracleDataset, weight: f64, mut grad: Option<&mut [f64]>) -> Result<f64> {
    let range = periodic_range(ds)?;
    let count = range.len() as f64;
    let radius = policy.hopf.radius;
    let ne = policy.encoder.n_params();
    let mut tape = EncodeTape::default();
    let mut total = 0.0;
    for i in range {
        policy.encoder.encode_taped(&ds.x[i], ds.z_at(i), false, &mut tape)?;
        let y = &tape.y;
        let r = y[0].hypot(y[1]);
        let tail: f64 = y[2..].iter().map(|v| v * v).sum();
        total += (radius - r).powi(2) + tail;
        if let Some(g) = grad.as_deref_mut() {
            let s = 2.0 * weight / count;
            let mut y_bar = vec![0.0; y.len()];
            if r > 0.0 {
                y_bar[0] = s * (r - radius) * y[0] / r;
                y_bar[1] = s * (r - radius) * y[1] / r;
            }
            for k in 2..y.len() {
                y_bar[k] = s * y[k];
            }
            policy.encoder.encode_backward(&mut tape, &y_bar, None, &mut g[..ne]);
        }
    }
    Ok(total / count)
}

/// Mean over the periodic subset of `max(|wrap(φ^d − φ)| − m, 0)²` with
/// `φ^d = φ0 + 2πt/P`.
pub fn time_guidance(policy: &Policy, ds: &OracleDataset, phi0: f64, margin: f64, weight: f64, mut grad: Option<&mut [f64]>) -> Result<f64> {
    let range = periodic_range(ds)?;
    let count = range.len() as f64;
    let ne = policy.encoder.n_params();
    let mut tape = EncodeTape::default();
    let mut total = 0.0;
    for i in range {
        policy.encoder.encode_taped(&ds.x[i], ds.z_at(i), false, &mut tape)?;
        let y = &tape.y;
        let phi = y[1].atan2(y[0]);
        let target = phi0 + 2.0 * PI * ds.t[i] / ds.period;
        let e = wrap_angle(target - phi);
        let excess = (e.abs() - margin).max(0.0);
        total += excess * excess;
        if let Some(g) = grad.as_deref_mut() {
            let r2 = y[0] * y[0] + y[1] * y[1];
            if excess > 0.0 && r2 > 0.0 {
                let dphi = -2.0 * excess * e.signum() * weight / count;
                let mut y_bar = vec![0.0; y.len()];
                y_bar[0] = dphi * (-y[1] / r2);
                y_bar[1] = dphi * (y[0] / r2);
                policy.encoder.encode_backward(&mut tape, &y_bar, None, &mut g[..ne]);
            }
        }
    }
    Ok(total / count)
}

/// Default anchor `φ0`: encoded angle of the first periodic sample minus
/// its nominal phase `2πt/P`.
pub fn default_phase_anchor(policy: &Policy, ds: &OracleDataset) -> Result<f64> {
    let i = periodic_range(ds)?.start;
    let y = policy.encoder.encode(&ds.x[i], ds.z_at(i))?;
    Ok(wrap_angle(y[1].atan2(y[0]) - 2.0 * PI * ds.t[i] / ds.period))
}

/// Mean of `‖x − Ψ(x; z)‖` over uniform samples `x` in the box and `z`
/// drawn from the dataset's conditionings.
pub fn encoder_reg(policy: &Policy, zs: &[f64], bounds: SampleBox, samples: usize, rng: &mut ChaCha8Rng, weight: f64, mut grad: Option<&mut [f64]>) -> Result<f64> {
    let n = policy.dim();
    let ne = policy.encoder.n_params();
    let mut tape = EncodeTape::default();
    let mut total = 0.0;
    for _ in 0..samples {
        let x = bounds.sample(rng, n);
        let z = zs[rng.random_range(0..zs.len())];
        policy.encoder.encode_taped(&x, z, false, &mut tape)?;
        let d = crate::linalg::dist(&x, &tape.y);
        total += d;
        if let Some(g) = grad.as_deref_mut() {
            if d > 0.0 {
                let s = weight / (samples as f64 * d);
                let y_bar: Vec<f64> = tape.y.iter().zip(&x).map(|(y, x)| s * (y - x)).collect();
                policy.encoder.encode_backward(&mut tape, &y_bar, None, &mut g[..ne]);
            }
        }
    }
    Ok(total / samples as f64)
}

/// Mean of `max(‖f(x; z)‖ − m_vr, 0)` over uniform samples.
#[allow(clippy::too_many_arguments)]
pub fn velocity_reg(policy: &Policy, zs: &[f64], bounds: SampleBox, samples: usize, margin: f64, rng: &mut ChaCha8Rng, weight: f64, mut grad: Option<&mut [f64]>) -> Result<f64> {
    let n = policy.dim();
    let mut tape = VelocityTape::default();
    let mut total = 0.0;
    for _ in 0..samples {
        let x = bounds.sample(rng, n);
        let z = zs[rng.random_range(0..zs.len())];
        policy.velocity_taped(&x, z, &mut tape)?;
        let speed = crate::linalg::norm(&tape.v);
        let excess = speed - margin;
        if excess > 0.0 {
            total += excess;
            if let Some(g) = grad.as_deref_mut() {
                let s = weight / (samples as f64 * speed);
                let v_bar: Vec<f64> = tape.v.iter().map(|v| s * v).collect();
                policy.velocity_backward(&mut tape, &v_bar, g);
            }
        }
    }
    Ok(total / samples as f64)
}

/// Anchors `(z_floor, z_ceil, λ)` of `z` within the sorted conditioning set.
pub fn interpolation_anchors(zs: &[f64], z: f64) -> (f64, f64, f64) {
    let floor = zs.iter().copied().filter(|&a| a <= z).fold(zs[0], f64::max);
    let ceil = zs.iter().copied().filter(|&a| a >= z).fold(zs[zs.len() - 1], f64::min);
    let lambda = if ceil > floor { (z - floor) / (ceil - floor) } else { 0.0 };
    (floor, ceil, lambda)
}

/// Smooth conditioning interpolation: squared deviation of the decode at
/// `z̃` from the linear blend of the decodes at the neighbouring
/// conditionings, for on-cycle latent points with uniform phase.
pub fn smooth_conditioning(policy: &Policy, zs: &[f64], samples: usize, rng: &mut ChaCha8Rng, weight: f64, mut grad: Option<&mut [f64]>) -> Result<f64> {
    if zs.len() < 2 {
        return Err(Error::TooFewConditionings(zs.len()));
    }
    let n = policy.dim();
    let ne = policy.encoder.n_params();
    let radius = policy.hopf.radius;
    let (zmin, zmax) = (zs[0], zs[zs.len() - 1]);
    let mut tapes = [DecodeTape::default(), DecodeTape::default(), DecodeTape::default()];
    let mut total = 0.0;
    for _ in 0..samples {
        let zt = rng.random_range(zmin..=zmax);
        let phi = rng.random_range(0.0..2.0 * PI);
        let mut y = vec![0.0; n];
        y[0] = radius * phi.cos();
        y[1] = radius * phi.sin();
        let (zf, zc, lambda) = interpolation_anchors(zs, zt);
        let [tt, tf, tc] = &mut tapes;
        policy.encoder.decode_taped(&y, zt, tt)?;
        policy.encoder.decode_taped(&y, zf, tf)?;
        policy.encoder.decode_taped(&y, zc, tc)?;
        let d: Vec<f64> = (0..n).map(|k| tt.x[k] - ((1.0 - lambda) * tf.x[k] + lambda * tc.x[k])).collect();
        total += d.iter().map(|v| v * v).sum::<f64>();
        if let Some(g) = grad.as_deref_mut() {
            let s = 2.0 * weight / samples as f64;
            let bt: Vec<f64> = d.iter().map(|v| s * v).collect();
            let bf: Vec<f64> = d.iter().map(|v| -s * (1.0 - lambda) * v).collect();
            let bc: Vec<f64> = d.iter().map(|v| -s * lambda * v).collect();
            policy.encoder.decode_backward(tt, &bt, &mut g[..ne]);
            policy.encoder.decode_backward(tf, &bf, &mut g[..ne]);
            policy.encoder.decode_backward(tc, &bc, &mut g[..ne]);
        }
    }
    Ok(total / samples as f64)
}

/// Symmetric Hausdorff distance between the encoded periodic samples and
/// `points` equally spaced points of the latent cycle.
pub fn hausdorff_latent(policy: &Policy, ds: &OracleDataset, points: usize, weight: f64, grad: Option<&mut [f64]>) -> Result<f64> {
    let range = periodic_range(ds)?;
    let n = policy.dim();
    let radius = policy.hopf.radius;
    let points = points.max(1);
    let cycle: Vec<Vec<f64>> = (0..points)
        .map(|j| {
            let a = 2.0 * PI * j as f64 / points as f64;
            let mut c = vec![0.0; n];
            c[0] = radius * a.cos();
            c[1] = radius * a.sin();
            c
        })
        .collect();
    let ys: Vec<Vec<f64>> = range.clone().map(|i| policy.encoder.encode(&ds.x[i], ds.z_at(i))).collect::<Result<_>>()?;
    let nearest = |p: &[f64], set: &[Vec<f64>]| -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (k, q) in set.iter().enumerate() {
            let d = crate::linalg::dist_sq(p, q);
            if d < best.1 {
                best = (k, d);
            }
        }
        best
    };
    let mut worst = (0usize, 0usize, -1.0);
    for (i, y) in ys.iter().enumerate() {
        let (j, d) = nearest(y, &cycle);
        if d > worst.2 {
            worst = (i, j, d);
        }
    }
    for (j, c) in cycle.iter().enumerate() {
        let (i, d) = nearest(c, &ys);
        if d > worst.2 {
            worst = (i, j, d);
        }
    }
    let (wi, wj, d2) = worst;
    let h = d2.max(0.0).sqrt();
    if let Some(g) = grad {
        if h > 0.0 {
            let idx = range.start + wi;
            let mut tape = EncodeTape::default();
            policy.encoder.encode_taped(&ds.x[idx], ds.z_at(idx), false, &mut tape)?;
            let y_bar: Vec<f64> = tape.y.iter().zip(&cycle[wj]).map(|(a, b)| weight * (a - b) / h).collect();
            let ne = policy.encoder.n_params();
            policy.encoder.encode_backward(&mut tape, &y_bar, None, &mut g[..ne]);
        }
    }
    Ok(h)
}
