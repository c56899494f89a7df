//! Rigid iterative closest point alignment and the mean Euclidean
//! distance (MED) after alignment.

use nalgebra::{DMatrix, DVector};

use crate::linalg::dist_sq;
use crate::{Error, Result};

const MAX_ITERS: usize = 200;
const REL_TOL: f64 = 1e-8;

/// Result of [`icp`].
#[derive(Clone, Debug, PartialEq)]
pub struct IcpResult {
    /// Mean Euclidean distance of the aligned correspondences.
    pub med: f64,
    pub rotation: DMatrix<f64>,
    pub translation: DVector<f64>,
    pub iterations: usize,
    /// False when the iteration cap was hit before the stopping rule.
    pub converged: bool,
}

fn nearest(p: &DVector<f64>, set: &[DVector<f64>]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (k, q) in set.iter().enumerate() {
        let d = (p - q).norm_squared();
        if d < best.1 {
            best = (k, d);
        }
    }
    best.0
}

/// Least-squares rigid transform `(R, t)` with `R ∈ SO(n)` mapping `src`
/// onto `dst` (Kabsch).
pub fn kabsch(src: &[DVector<f64>], dst: &[DVector<f64>]) -> (DMatrix<f64>, DVector<f64>) {
    let n = src[0].len();
    let k = src.len() as f64;
    let cs = src.iter().fold(DVector::zeros(n), |a, p| a + p) / k;
    let cd = dst.iter().fold(DVector::zeros(n), |a, p| a + p) / k;
    let mut h = DMatrix::zeros(n, n);
    for (s, d) in src.iter().zip(dst) {
        h += (s - &cs) * (d - &cd).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("U requested");
    let vt = svd.v_t.expect("V requested");
    let v = vt.transpose();
    let mut r = &v * u.transpose();
    if r.determinant() < 0.0 {
        // singular values are sorted descending; flip the smallest direction
        let mut v2 = v.clone();
        let last = n - 1;
        for i in 0..n {
            v2[(i, last)] = -v2[(i, last)];
        }
        r = v2 * u.transpose();
    }
    let t = cd - &r * cs;
    (r, t)
}

fn run(src: &[DVector<f64>], dst: &[DVector<f64>], r0: DMatrix<f64>, t0: DVector<f64>) -> IcpResult {
    let (mut r, mut t) = (r0, t0);
    let mut prev = f64::INFINITY;
    let mut best: Option<IcpResult> = None;
    for it in 1..=MAX_ITERS {
        let moved: Vec<DVector<f64>> = src.iter().map(|p| &r * p + &t).collect();
        let matched: Vec<DVector<f64>> = moved.iter().map(|p| dst[nearest(p, dst)].clone()).collect();
        let med = moved.iter().zip(&matched).map(|(a, b)| (a - b).norm()).sum::<f64>() / src.len() as f64;
        if best.as_ref().is_none_or(|b| med < b.med) {
            best = Some(IcpResult { med, rotation: r.clone(), translation: t.clone(), iterations: it, converged: false });
        }
        let improvement = (prev - med) / prev.max(f64::MIN_POSITIVE);
        if prev.is_finite() && improvement.abs() < REL_TOL || med == 0.0 {
            let mut b = best.expect("set above");
            b.iterations = it;
            b.converged = true;
            return b;
        }
        prev = med;
        let (rn, tn) = kabsch(src, &matched);
        r = rn;
        t = tn;
    }
    let mut b = best.expect("at least one iteration");
    b.iterations = MAX_ITERS;
    b
}

fn plane_rotation(n: usize, i: usize, j: usize, angle: f64) -> DMatrix<f64> {
    let mut r = DMatrix::identity(n, n);
    let (s, c) = angle.sin_cos();
    r[(i, i)] = c;
    r[(j, j)] = c;
    r[(i, j)] = -s;
    r[(j, i)] = s;
    r
}

/// Aligns `actual` onto `desired` with rigid ICP. Translation starts at
/// the centroid offset; several initial rotations are tried (36 angles
/// at 10° in 2-D, quarter turns in every coordinate plane otherwise) and
/// the best aligned MED is kept.
pub fn icp(actual: &[Vec<f64>], desired: &[Vec<f64>]) -> Result<IcpResult> {
    if actual.len() != desired.len() {
        return Err(Error::LengthMismatch { left: actual.len(), right: desired.len() });
    }
    let n = actual.first().map_or(0, |p| p.len());
    if actual.len() < n || n == 0 {
        return Err(Error::InvalidParameter(format!("ICP needs at least n = {n} points")));
    }
    let src: Vec<DVector<f64>> = actual.iter().map(|p| DVector::from_column_slice(p)).collect();
    let dst: Vec<DVector<f64>> = desired.iter().map(|p| DVector::from_column_slice(p)).collect();
    let k = src.len() as f64;
    let cs = src.iter().fold(DVector::zeros(n), |a, p| a + p) / k;
    let cd = dst.iter().fold(DVector::zeros(n), |a, p| a + p) / k;
    let mut starts = Vec::new();
    if n == 2 {
        for s in 0..36 {
            starts.push(plane_rotation(2, 0, 1, s as f64 * std::f64::consts::PI / 18.0));
        }
    } else {
        starts.push(DMatrix::identity(n, n));
        for i in 0..n {
            for j in i + 1..n {
                for q in 1..4 {
                    starts.push(plane_rotation(n, i, j, q as f64 * std::f64::consts::FRAC_PI_2));
                }
            }
        }
    }
    let mut best: Option<IcpResult> = None;
    for r0 in starts {
        let t0 = &cd - &r0 * &cs;
        let res = run(&src, &dst, r0, t0);
        if best.as_ref().is_none_or(|b| res.med < b.med) {
            best = Some(res);
        }
    }
    Ok(best.expect("at least one start"))
}

/// MED after ICP alignment of `actual` onto `desired`.
pub fn icp_med(actual: &[Vec<f64>], desired: &[Vec<f64>]) -> Result<f64> {
    Ok(icp(actual, desired)?.med)
}

/// Mean nearest-neighbour distance from `a` to `b` without alignment.
pub fn mean_nearest_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .map(|p| b.iter().map(|q| dist_sq(p, q)).fold(f64::INFINITY, f64::min).sqrt())
        .sum::<f64>()
        / a.len() as f64
}
