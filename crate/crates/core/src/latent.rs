//! Supercritical-Hopf latent dynamics, polar coordinates, and the stability
//! certificates (transverse Lyapunov function, contraction metric and rate).
//!
//! The limit cycle is always the circle of radius `R` in the `(y₁, y₂)`
//! plane; the remaining coordinates decay at rate `β`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::mlp::{Mlp, MlpCache};
use crate::{wrap_angle, Error, Result};

/// Additive floor of the learned angular velocity.
pub const OMEGA_EPS: f64 = 1e-6;

/// Radii below this are treated as the (singular) latent origin.
pub const ORIGIN_EPS: f64 = 1e-9;

/// Learned angular velocity `ω = exp(MLP(cos φ, sin φ)) + ε_ω`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngularVelocityNet {
    pub net: Mlp,
    pub eps: f64,
}

impl AngularVelocityNet {
    /// Network with the given hidden widths whose output layer starts at
    /// zero, so the initial angular velocity is `exp(log_omega0) + ε_ω`
    /// everywhere (the bias of the last layer holds `log_omega0`).
    pub fn new(hidden: &[usize], omega0: f64, seed: u64) -> Result<Self> {
        if !(omega0 > OMEGA_EPS) {
            return Err(Error::InvalidParameter("initial omega must exceed eps".into()));
        }
        let mut sizes = vec![2];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let mut net = Mlp::new(&sizes, seed)?;
        net.zero_output_layer();
        let n = net.n_params();
        net.params_mut()[n - 1] = (omega0 - OMEGA_EPS).ln();
        Ok(Self { net, eps: OMEGA_EPS })
    }

    /// Angular velocity for a unit direction `(cos φ, sin φ)`.
    pub fn eval(&self, dir: [f64; 2]) -> f64 {
        self.net.forward(&dir)[0].exp() + self.eps
    }

    pub(crate) fn eval_cached(&self, dir: [f64; 2], cache: &mut MlpCache) -> f64 {
        self.net.forward_cached(&dir, cache)[0].exp() + self.eps
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum OmegaMode {
    Constant(f64),
    Learned(AngularVelocityNet),
}

/// Gains and radius of the latent Hopf oscillator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopfParams {
    pub alpha: f64,
    pub beta: f64,
    pub radius: f64,
    pub omega: OmegaMode,
}

impl HopfParams {
    pub fn new(alpha: f64, beta: f64, radius: f64, omega: OmegaMode) -> Result<Self> {
        let p = Self {
            alpha,
            beta,
            radius,
            omega,
        };
        p.validate()?;
        Ok(p)
    }

    /// Constant angular velocity `omega`.
    pub fn constant(alpha: f64, beta: f64, radius: f64, omega: f64) -> Result<Self> {
        Self::new(alpha, beta, radius, OmegaMode::Constant(omega))
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        pos(self.alpha, "alpha")?;
        pos(self.beta, "beta")?;
        pos(self.radius, "radius")?;
        if let OmegaMode::Constant(w) = self.omega {
            pos(w, "omega")?;
        }
        Ok(())
    }

    /// `f_ω(φ)`.
    pub fn f_omega(&self, phi: f64) -> f64 {
        match &self.omega {
            OmegaMode::Constant(w) => *w,
            OmegaMode::Learned(net) => net.eval([phi.cos(), phi.sin()]),
        }
    }

    /// `ω(y)`, which depends only on the direction of `(y₁, y₂)`.
    pub fn omega_at(&self, y1: f64, y2: f64) -> Result<f64> {
        match &self.omega {
            OmegaMode::Constant(w) => Ok(*w),
            OmegaMode::Learned(net) => {
                let r = y1.hypot(y2);
                if r < ORIGIN_EPS {
                    return Err(Error::DegenerateOrigin { radius: r });
                }
                Ok(net.eval([y1 / r, y2 / r]))
            }
        }
    }

    pub fn omega_net(&self) -> Option<&AngularVelocityNet> {
        match &self.omega {
            OmegaMode::Learned(net) => Some(net),
            OmegaMode::Constant(_) => None,
        }
    }

    pub fn omega_net_mut(&mut self) -> Option<&mut AngularVelocityNet> {
        match &mut self.omega {
            OmegaMode::Learned(net) => Some(net),
            OmegaMode::Constant(_) => None,
        }
    }
}

/// Latent state in polar form `(r, φ, y₃..yₙ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolarState {
    pub r: f64,
    pub phi: f64,
    pub tail: Vec<f64>,
}

impl PolarState {
    pub fn dim(&self) -> usize {
        self.tail.len() + 2
    }
}

/// Cartesian Hopf field for explicit `ω`, `α`, `β`.
pub(crate) fn hopf_field(y: &[f64], omega: f64, alpha: f64, beta: f64, radius: f64) -> Vec<f64> {
    let (y1, y2) = (y[0], y[1]);
    let radial = alpha * (1.0 - (y1 * y1 + y2 * y2) / (radius * radius));
    let mut out = Vec::with_capacity(y.len());
    out.push(-omega * y2 + radial * y1);
    out.push(omega * y1 + radial * y2);
    out.extend(y[2..].iter().map(|v| -beta * v));
    out
}

/// Latent velocity `ẏ = f_y(y)`.
pub fn hopf_cartesian(y: &[f64], p: &HopfParams) -> Result<Vec<f64>> {
    if y.len() < 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: y.len(),
        });
    }
    crate::check_finite(y, "latent state")?;
    let omega = p.omega_at(y[0], y[1])?;
    Ok(hopf_field(y, omega, p.alpha, p.beta, p.radius))
}

/// Polar velocity `(ṙ, φ̇, ẏ₃..ẏₙ)`.
pub fn hopf_polar(yp: &PolarState, p: &HopfParams) -> Result<Vec<f64>> {
    if !(yp.r >= 0.0) {
        return Err(Error::InvalidParameter(format!("negative radius {}", yp.r)));
    }
    if !yp.r.is_finite() || !yp.phi.is_finite() {
        return Err(Error::NonFinite("polar state"));
    }
    crate::check_finite(&yp.tail, "polar state")?;
    let r = yp.r;
    let mut out = Vec::with_capacity(yp.dim());
    out.push(p.alpha * (1.0 - r * r / (p.radius * p.radius)) * r);
    out.push(p.f_omega(yp.phi));
    out.extend(yp.tail.iter().map(|v| -p.beta * v));
    Ok(out)
}

pub fn cart_to_polar(y: &[f64]) -> PolarState {
    PolarState {
        r: y[0].hypot(y[1]),
        phi: wrap_angle(y[1].atan2(y[0])),
        tail: y[2..].to_vec(),
    }
}

pub fn polar_to_cart(yp: &PolarState) -> Vec<f64> {
    let mut y = Vec::with_capacity(yp.dim());
    y.push(yp.r * yp.phi.cos());
    y.push(yp.r * yp.phi.sin());
    y.extend_from_slice(&yp.tail);
    y
}

/// `∂h_p2c/∂y_pol`, defined everywhere.
pub fn polar_to_cart_jacobian(yp: &PolarState) -> DMatrix<f64> {
    let n = yp.dim();
    let (s, c) = yp.phi.sin_cos();
    let mut j = DMatrix::identity(n, n);
    j[(0, 0)] = c;
    j[(0, 1)] = -yp.r * s;
    j[(1, 0)] = s;
    j[(1, 1)] = yp.r * c;
    j
}

/// `∂h_c2p/∂y`, singular at the origin of the `(y₁, y₂)` plane.
pub fn cart_to_polar_jacobian(y: &[f64]) -> Result<DMatrix<f64>> {
    let n = y.len();
    let rho = y[0] * y[0] + y[1] * y[1];
    let r = rho.sqrt();
    if r < ORIGIN_EPS {
        return Err(Error::SingularJacobian);
    }
    let mut j = DMatrix::identity(n, n);
    j[(0, 0)] = y[0] / r;
    j[(0, 1)] = y[1] / r;
    j[(1, 0)] = -y[1] / rho;
    j[(1, 1)] = y[0] / rho;
    Ok(j)
}

/// `V(y) = (αR²/4)(y₁² + y₂² − R²)² + ½β‖y₃:ₙ‖²`.
pub fn transverse_lyapunov(y: &[f64], p: &HopfParams) -> f64 {
    let r2 = p.radius * p.radius;
    let d = y[0] * y[0] + y[1] * y[1] - r2;
    let tail: f64 = y[2..].iter().map(|v| v * v).sum();
    0.25 * p.alpha * r2 * d * d + 0.5 * p.beta * tail
}

/// Lower bound on the transverse contraction rate in the region `r ≥ r_eps`.
pub fn contraction_rate_bound(p: &HopfParams, r_eps: f64) -> Result<f64> {
    if !(r_eps > 0.0) {
        return Err(Error::InvalidParameter(format!("r_eps must be positive, got {r_eps}")));
    }
    let k = 2.0 * p.alpha / (p.radius * p.radius) + p.beta;
    if r_eps.is_infinite() {
        return Ok(k);
    }
    let q = r_eps * r_eps;
    Ok(k * q / (q + 1.0))
}

/// `m_φφ(r)`: the phase entry of the polar contraction metric.
///
/// The 2×2 block is positive definite iff `m_φφ > α²(1 − r²/R²)²/f_ω²`;
/// this choice exceeds that threshold by `1/r²`, which fixes
/// `det = 1/r⁴` and gives `m_φφ(R) = 1/R²`.
pub fn metric_phase_entry(r: f64, f_omega: f64, p: &HopfParams) -> f64 {
    let a = p.alpha * (1.0 - r * r / (p.radius * p.radius)) / f_omega;
    1.0 / (r * r) + a * a
}

/// Polar contraction metric `M_pol(y_pol)`.
pub fn contraction_metric_polar(yp: &PolarState, p: &HopfParams) -> Result<DMatrix<f64>> {
    if !(yp.r >= ORIGIN_EPS) {
        return Err(Error::DegenerateOrigin { radius: yp.r });
    }
    let r = yp.r;
    let f = p.f_omega(yp.phi);
    let off = -p.alpha * (1.0 - r * r / (p.radius * p.radius)) / (f * r);
    let n = yp.dim();
    let mut m = DMatrix::identity(n, n);
    m[(0, 0)] = 1.0 / (r * r);
    m[(0, 1)] = off;
    m[(1, 0)] = off;
    m[(1, 1)] = metric_phase_entry(r, f, p);
    Ok(m)
}

/// Cartesian contraction metric `M_y = (∂h/∂y_pol)⁻ᵀ M_pol (∂h/∂y_pol)⁻¹`.
pub fn contraction_metric_cartesian(y: &[f64], p: &HopfParams) -> Result<DMatrix<f64>> {
    let yp = cart_to_polar(y);
    let m_pol = contraction_metric_polar(&yp, p)?;
    let jinv = cart_to_polar_jacobian(y)?;
    Ok(jinv.transpose() * m_pol * jinv)
}
