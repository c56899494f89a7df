//! The composed motion policy `ẋ = f_s(x)·(J_Ψ + ε_inv·I)⁻¹·f_y(Ψ(x; z))`
//! with online shaping (spatial scale and origin, speed factor, convergence
//! gain, and the angular gate around the limit cycle).

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::encoder::{EncodeTape, Encoder, JacobianMethod};
use crate::latent::{hopf_field, HopfParams, OmegaMode, ORIGIN_EPS};
use crate::linalg::regularized_inverse;
use crate::mlp::{Mlp, MlpCache};
use crate::{check_finite, Error, Result};

const FILE_FORMAT: &str = "osmp-policy";
const FILE_VERSION: u32 = 1;

/// Default regularization of the Jacobian inverse.
pub const DEFAULT_EPS_INV: f64 = 1e-6;

/// Speed scale `f_s(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SpeedScale {
    /// `f_s ≡ 1`.
    Unity,
    /// `f_s(x) = exp(MLP(x)) + eps`.
    Learned { net: Mlp, eps: f64 },
}

/// Online shaping controls applied at inference time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapingState {
    /// Spatial scale `s_f`.
    pub s_f: f64,
    /// Field origin `x_o`; empty means the zero vector.
    pub x_o: Vec<f64>,
    /// Speed factor `s_ω`.
    pub s_omega: f64,
    /// Convergence gain `k_conv`.
    pub k_conv: f64,
    /// Tube radius `R_sm` of the angular gate.
    pub r_sm: f64,
    /// Width `σ_sm` of the angular gate.
    pub sigma_sm: f64,
    pub gate_enabled: bool,
}

impl Default for ShapingState {
    fn default() -> Self {
        Self { s_f: 1.0, x_o: Vec::new(), s_omega: 1.0, k_conv: 1.0, r_sm: 0.0, sigma_sm: 1.0, gate_enabled: false }
    }
}

impl ShapingState {
    pub fn validate(&self, n: usize) -> Result<()> {
        let pos = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        pos(self.s_f, "s_f")?;
        pos(self.s_omega, "s_omega")?;
        pos(self.k_conv, "k_conv")?;
        pos(self.sigma_sm, "sigma_sm")?;
        if !(self.r_sm >= 0.0 && self.r_sm.is_finite()) {
            return Err(Error::InvalidParameter(format!("r_sm must be nonnegative, got {}", self.r_sm)));
        }
        if !self.x_o.is_empty() && self.x_o.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: self.x_o.len() });
        }
        check_finite(&self.x_o, "shaping origin")
    }
}

/// `√(((√(y₁²+y₂²) − R)² + Σ_{i≥3} yᵢ²)/(n−1))`.
pub fn latent_cycle_distance(y: &[f64], radius: f64) -> f64 {
    let n = y.len();
    let dr = y[0].hypot(y[1]) - radius;
    let tail: f64 = y[2..].iter().map(|v| v * v).sum();
    ((dr * dr + tail) / (n as f64 - 1.0)).sqrt()
}

/// `exp(−max(d_lc − R_sm, 0)²/(2σ_sm²))`.
pub fn angular_gate(d_lc: f64, r_sm: f64, sigma_sm: f64) -> f64 {
    let excess = (d_lc - r_sm).max(0.0);
    if excess.is_infinite() {
        return 0.0;
    }
    (-(excess * excess) / (2.0 * sigma_sm * sigma_sm)).exp()
}

/// Learned state-space motion policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub encoder: Encoder,
    pub hopf: HopfParams,
    pub speed: SpeedScale,
    pub eps_inv: f64,
    /// Jacobian used at inference; training always uses the exact one.
    #[serde(skip, default = "exact_method")]
    pub jacobian: JacobianMethod,
}

fn exact_method() -> JacobianMethod {
    JacobianMethod::Exact
}

/// Everything written to a policy file besides the policy itself.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PolicyMeta {
    pub epochs_trained: usize,
    /// Shaping used when none is given explicitly.
    pub shaping: ShapingState,
    /// Dataset normalization `x_norm = (x − offset)·scale`, when known.
    pub normalization: Option<crate::data::Normalization>,
    /// Period of the demonstration in seconds, when known.
    pub period: Option<f64>,
    /// Timestep of the demonstration in seconds, when known.
    pub dt: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct PolicyFile {
    format: String,
    version: u32,
    policy: Policy,
    meta: PolicyMeta,
}

/// Record of one velocity evaluation for [`Policy::velocity_backward`].
#[derive(Clone, Debug, Default)]
pub struct VelocityTape {
    enc: EncodeTape,
    inv: DMatrix<f64>,
    w: Vec<f64>,
    omega: f64,
    omega_dir: [f64; 2],
    omega_r: f64,
    omega_cache: MlpCache,
    fs: f64,
    fs_cache: MlpCache,
    /// Velocity produced by the taped evaluation.
    pub v: Vec<f64>,
    /// Latent state of the taped evaluation.
    pub y: Vec<f64>,
}

impl Policy {
    /// Policy with an identity-initialized encoder, unity speed scale.
    pub fn new(encoder: Encoder, hopf: HopfParams) -> Result<Self> {
        hopf.validate()?;
        Ok(Self { encoder, hopf, speed: SpeedScale::Unity, eps_inv: DEFAULT_EPS_INV, jacobian: JacobianMethod::Exact })
    }

    pub fn dim(&self) -> usize {
        self.encoder.dim()
    }

    /// Enables a learned speed scale with the given hidden widths. The
    /// network starts at zero output, so `f_s = 1 + eps` initially.
    pub fn with_learned_speed(mut self, hidden: &[usize], eps: f64, seed: u64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter("speed-scale eps must be positive".into()));
        }
        let mut sizes = vec![self.dim()];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let mut net = Mlp::new(&sizes, seed)?;
        net.zero_output_layer();
        self.speed = SpeedScale::Learned { net, eps };
        Ok(self)
    }

    /// `f_s(x)`; exactly 1 in unity mode.
    pub fn speed_scale(&self, x: &[f64]) -> f64 {
        match &self.speed {
            SpeedScale::Unity => 1.0,
            SpeedScale::Learned { net, eps } => net.forward(x)[0].exp() + eps,
        }
    }

    /// Encoded latent state at the shaped input `(x − x_o)/s_f`.
    pub fn latent(&self, x: &[f64], z: f64, shape: &ShapingState) -> Result<Vec<f64>> {
        let xs = self.shaped_input(x, shape)?;
        self.encoder.encode(&xs, z)
    }

    fn shaped_input(&self, x: &[f64], shape: &ShapingState) -> Result<Vec<f64>> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: x.len() });
        }
        check_finite(x, "policy input")?;
        Ok(x.iter()
            .enumerate()
            .map(|(i, v)| (v - shape.x_o.get(i).copied().unwrap_or(0.0)) / shape.s_f)
            .collect())
    }

    /// Velocity `ẋ` at `x` under `shape`.
    pub fn velocity(&self, x: &[f64], z: f64, shape: &ShapingState) -> Result<Vec<f64>> {
        self.velocity_modulated(x, z, shape, 1.0)
    }

    /// Velocity with the latent angular velocity additionally multiplied by
    /// `omega_factor` (used for phase synchronization).
    pub fn velocity_modulated(&self, x: &[f64], z: f64, shape: &ShapingState, omega_factor: f64) -> Result<Vec<f64>> {
        let xs = self.shaped_input(x, shape)?;
        let (y, jac) = match self.jacobian {
            JacobianMethod::Exact => self.encoder.encode_with_jacobian(&xs, z)?,
            method => (self.encoder.encode(&xs, z)?, self.encoder.jacobian(&xs, z, method)?),
        };
        let omega = self.hopf.omega_at(y[0], y[1])? * shape.s_omega * omega_factor * self.gate(&y, shape);
        let gain = shape.k_conv * shape.s_omega;
        let fy = hopf_field(&y, omega, self.hopf.alpha * gain, self.hopf.beta * gain, self.hopf.radius);
        let w = self.pull_back(&jac, &fy)?;
        let scale = shape.s_f * self.speed_scale(&xs);
        let v: Vec<f64> = w.iter().map(|c| c * scale).collect();
        check_finite(&v, "policy velocity")?;
        Ok(v)
    }

    fn gate(&self, y: &[f64], shape: &ShapingState) -> f64 {
        if shape.gate_enabled {
            angular_gate(latent_cycle_distance(y, self.hopf.radius), shape.r_sm, shape.sigma_sm)
        } else {
            1.0
        }
    }

    fn pull_back(&self, jac: &DMatrix<f64>, fy: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        let a = jac + DMatrix::identity(n, n) * self.eps_inv;
        let sol = a.lu().solve(&DVector::from_column_slice(fy)).ok_or(Error::SingularJacobian)?;
        if sol.iter().all(|v| v.is_finite()) {
            Ok(sol.as_slice().to_vec())
        } else {
            Err(Error::SingularJacobian)
        }
    }

    /// Latent phase `atan2(y₂, y₁)` of `Ψ(x; z)` under default shaping.
    pub fn phase(&self, x: &[f64], z: f64) -> Result<f64> {
        let y = self.encoder.encode(x, z)?;
        let r = y[0].hypot(y[1]);
        if r < ORIGIN_EPS {
            return Err(Error::DegenerateOrigin { radius: r });
        }
        Ok(crate::wrap_angle(y[1].atan2(y[0])))
    }

    /// Number of trained parameters: encoder, then the angular-velocity
    /// net (if learned), then the speed-scale net (if learned).
    pub fn n_params(&self) -> usize {
        let omega = self.hopf.omega_net().map_or(0, |n| n.net.n_params());
        let speed = match &self.speed {
            SpeedScale::Unity => 0,
            SpeedScale::Learned { net, .. } => net.n_params(),
        };
        self.encoder.n_params() + omega + speed
    }

    /// Copy of all trained parameters in [`Policy::n_params`] layout.
    pub fn params(&self) -> Vec<f64> {
        let mut out = self.encoder.params().to_vec();
        if let Some(net) = self.hopf.omega_net() {
            out.extend_from_slice(net.net.params());
        }
        if let SpeedScale::Learned { net, .. } = &self.speed {
            out.extend_from_slice(net.params());
        }
        out
    }

    /// Overwrites all trained parameters from a flat vector.
    pub fn set_params(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.n_params() {
            return Err(Error::DimensionMismatch { expected: self.n_params(), found: theta.len() });
        }
        let ne = self.encoder.n_params();
        self.encoder.params_mut().copy_from_slice(&theta[..ne]);
        let mut off = ne;
        if let Some(net) = self.hopf.omega_net_mut() {
            let k = net.net.n_params();
            net.net.params_mut().copy_from_slice(&theta[off..off + k]);
            off += k;
        }
        if let SpeedScale::Learned { net, .. } = &mut self.speed {
            let k = net.n_params();
            net.params_mut().copy_from_slice(&theta[off..off + k]);
        }
        Ok(())
    }

    fn omega_offset(&self) -> usize {
        self.encoder.n_params()
    }

    fn speed_offset(&self) -> usize {
        self.omega_offset() + self.hopf.omega_net().map_or(0, |n| n.net.n_params())
    }

    /// Velocity under default shaping with the exact Jacobian, recording
    /// intermediates for [`Policy::velocity_backward`].
    pub fn velocity_taped(&self, x: &[f64], z: f64, tape: &mut VelocityTape) -> Result<()> {
        let n = self.dim();
        self.encoder.encode_taped(x, z, true, &mut tape.enc)?;
        tape.y.clear();
        tape.y.extend_from_slice(&tape.enc.y);
        let (y1, y2) = (tape.y[0], tape.y[1]);
        tape.omega = match &self.hopf.omega {
            OmegaMode::Constant(w) => *w,
            OmegaMode::Learned(net) => {
                let r = y1.hypot(y2);
                if r < ORIGIN_EPS {
                    return Err(Error::DegenerateOrigin { radius: r });
                }
                tape.omega_r = r;
                tape.omega_dir = [y1 / r, y2 / r];
                net.eval_cached(tape.omega_dir, &mut tape.omega_cache)
            }
        };
        let fy = hopf_field(&tape.y, tape.omega, self.hopf.alpha, self.hopf.beta, self.hopf.radius);
        let jac = DMatrix::from_row_slice(n, n, &tape.enc.jac);
        tape.inv = regularized_inverse(&jac, self.eps_inv)?;
        tape.w = (&tape.inv * DVector::from_column_slice(&fy)).as_slice().to_vec();
        tape.fs = match &self.speed {
            SpeedScale::Unity => 1.0,
            SpeedScale::Learned { net, eps } => net.forward_cached(x, &mut tape.fs_cache)[0].exp() + eps,
        };
        tape.v.clear();
        tape.v.extend(tape.w.iter().map(|c| c * tape.fs));
        check_finite(&tape.v, "policy velocity")
    }

    /// Accumulates into `grad` (layout of [`Policy::params`]) the gradient
    /// of a scalar loss whose gradient w.r.t. the taped velocity is `v_bar`.
    pub fn velocity_backward(&self, tape: &mut VelocityTape, v_bar: &[f64], grad: &mut [f64]) {
        let n = self.dim();
        if let SpeedScale::Learned { net, eps } = &self.speed {
            let fs_bar: f64 = v_bar.iter().zip(&tape.w).map(|(a, b)| a * b).sum();
            let m_bar = fs_bar * (tape.fs - eps);
            let off = self.speed_offset();
            net.backward(&tape.fs_cache, &[m_bar], &mut grad[off..off + net.n_params()]);
        }
        let w_bar = DVector::from_iterator(n, v_bar.iter().map(|v| v * tape.fs));
        let fy_bar = tape.inv.transpose() * w_bar;
        let mut jac_bar = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                jac_bar[i * n + j] = -fy_bar[i] * tape.w[j];
            }
        }
        let y = &tape.y;
        let (a, b, r2) = (self.hopf.alpha, self.hopf.beta, self.hopf.radius * self.hopf.radius);
        let (y1, y2, om) = (y[0], y[1], tape.omega);
        let delta = 1.0 - (y1 * y1 + y2 * y2) / r2;
        let (f1, f2) = (fy_bar[0], fy_bar[1]);
        let mut y_bar = vec![0.0; n];
        y_bar[0] = f1 * (a * delta - 2.0 * a * y1 * y1 / r2) + f2 * (om - 2.0 * a * y1 * y2 / r2);
        y_bar[1] = f1 * (-om - 2.0 * a * y1 * y2 / r2) + f2 * (a * delta - 2.0 * a * y2 * y2 / r2);
        for k in 2..n {
            y_bar[k] = -b * fy_bar[k];
        }
        if let OmegaMode::Learned(net) = &self.hopf.omega {
            let om_bar = -y2 * f1 + y1 * f2;
            let m_bar = om_bar * (om - net.eps);
            let off = self.omega_offset();
            let u_bar = net.net.backward(&tape.omega_cache, &[m_bar], &mut grad[off..off + net.net.n_params()]);
            let u = tape.omega_dir;
            let dot = u[0] * u_bar[0] + u[1] * u_bar[1];
            y_bar[0] += (u_bar[0] - u[0] * dot) / tape.omega_r;
            y_bar[1] += (u_bar[1] - u[1] * dot) / tape.omega_r;
        }
        let ne = self.encoder.n_params();
        self.encoder.encode_backward(&mut tape.enc, &y_bar, Some(&jac_bar), &mut grad[..ne]);
    }

    /// Serializes policy and metadata to the versioned JSON container.
    pub fn to_json(&self, meta: &PolicyMeta) -> Result<String> {
        let file = PolicyFile { format: FILE_FORMAT.into(), version: FILE_VERSION, policy: self.clone(), meta: meta.clone() };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<(Self, PolicyMeta)> {
        let file: PolicyFile = serde_json::from_str(text)?;
        if file.format != FILE_FORMAT {
            return Err(Error::Format(format!("expected format '{FILE_FORMAT}', found '{}'", file.format)));
        }
        if file.version != FILE_VERSION {
            return Err(Error::Format(format!("unsupported policy file version {}", file.version)));
        }
        file.policy.encoder.validate_shapes()?;
        file.policy.hopf.validate()?;
        file.meta.shaping.validate(file.policy.dim())?;
        Ok((file.policy, file.meta))
    }

    pub fn save(&self, path: impl AsRef<Path>, meta: &PolicyMeta) -> Result<()> {
        std::fs::write(path, self.to_json(meta)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, PolicyMeta)> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
