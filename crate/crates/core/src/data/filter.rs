//! Savitzky–Golay smoothing and finite-difference velocities.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Weights `c` such that `Σ_k c_k·x[s+k]` is the value at local index
/// `eval` of the least-squares polynomial of degree `order` through the
/// window `x[s..s+window]`.
fn sg_weights(order: usize, window: usize, eval: usize) -> DVector<f64> {
    let center = (window as f64 - 1.0) / 2.0;
    let a = DMatrix::from_fn(window, order + 1, |r, c| (r as f64 - center).powi(c as i32));
    let svd = a.clone().svd(true, true);
    let pinv = svd.pseudo_inverse(1e-12).expect("SVD with U and V requested");
    let e = eval as f64 - center;
    let basis = DVector::from_fn(order + 1, |c, _| e.powi(c as i32));
    pinv.transpose() * basis
}

/// Savitzky–Golay smoothing of a uniformly sampled series.
///
/// Every output sample is the value of a degree-`order` least-squares
/// polynomial fitted to `window` consecutive samples. Interior samples use
/// a window positioned around them; near the edges the window is shifted
/// inwards so it stays full length.
pub fn savitzky_golay(series: &[f64], order: usize, window: usize) -> Result<Vec<f64>> {
    let len = series.len();
    if window <= order || window > len {
        return Err(Error::InvalidWindow { window, order, len });
    }
    let half = (window - 1) / 2;
    let interior = sg_weights(order, window, half);
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        let start = i.saturating_sub(half).min(len - window);
        let local = i - start;
        let w = if local == half { interior.clone() } else { sg_weights(order, window, local) };
        out.push(w.iter().zip(&series[start..start + window]).map(|(c, x)| c * x).sum());
    }
    Ok(out)
}

/// Noise variance gain `Σ c_k²` of the interior Savitzky–Golay filter.
pub fn savitzky_golay_noise_gain(order: usize, window: usize) -> Result<f64> {
    if window <= order {
        return Err(Error::InvalidWindow { window, order, len: window });
    }
    Ok(sg_weights(order, window, (window - 1) / 2).iter().map(|c| c * c).sum())
}

/// Finite-difference velocities: central in the interior, one-sided at
/// the ends. With `periodic`, the last sample is taken as a repeat of the
/// first and both ends use wrap-around central differences.
pub fn finite_difference_velocities(positions: &[Vec<f64>], timestamps: &[f64], periodic: bool) -> Result<Vec<Vec<f64>>> {
    let len = positions.len();
    if len != timestamps.len() {
        return Err(Error::LengthMismatch { left: len, right: timestamps.len() });
    }
    if len < 3 {
        return Err(Error::InvalidParameter("finite differences need at least 3 samples".into()));
    }
    let diff = |a: &[f64], b: &[f64], dt: f64| -> Vec<f64> { a.iter().zip(b).map(|(p, q)| (p - q) / dt).collect() };
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        let v = if i == 0 || i == len - 1 {
            if periodic {
                let dt = (timestamps[1] - timestamps[0]) + (timestamps[len - 1] - timestamps[len - 2]);
                diff(&positions[1], &positions[len - 2], dt)
            } else if i == 0 {
                diff(&positions[1], &positions[0], timestamps[1] - timestamps[0])
            } else {
                diff(&positions[len - 1], &positions[len - 2], timestamps[len - 1] - timestamps[len - 2])
            }
        } else {
            diff(&positions[i + 1], &positions[i - 1], timestamps[i + 1] - timestamps[i - 1])
        };
        out.push(v);
    }
    Ok(out)
}
