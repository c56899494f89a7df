use nalgebra::DMatrix;

use crate::{Error, Result};

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Inverse of `m + eps·I`.
pub(crate) fn regularized_inverse(m: &DMatrix<f64>, eps: f64) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let a = m + DMatrix::identity(n, n) * eps;
    let inv = a.try_inverse().ok_or(Error::SingularJacobian)?;
    if inv.iter().all(|v| v.is_finite()) {
        Ok(inv)
    } else {
        Err(Error::SingularJacobian)
    }
}
