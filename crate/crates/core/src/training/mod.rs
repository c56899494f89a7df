//! Training: the weighted multi-term loss, full-batch AdamW with the
//! warmup / plateau / cosine schedule, reporting, and gradient checks.

pub mod losses;
mod optim;

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::OracleDataset;
use crate::encoder::{Encoder, EncoderConfig};
use crate::latent::HopfParams;
use crate::policy::Policy;
use crate::{Error, Result};
pub use losses::SampleBox;
pub use optim::{AdamW, Schedule};

/// Weights and hyperparameters of the loss terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub vi: f64,
    pub lcm: f64,
    pub tgd: f64,
    pub er: f64,
    pub vr: f64,
    pub sci: f64,
    /// Latent Hausdorff term (ablation only).
    pub haus: f64,
    /// Smooth-ℓ1 transition point.
    pub beta_l1: f64,
    /// Phase margin of the time-guidance term (radians).
    pub m_tgd: f64,
    /// Speed margin of the velocity regularizer; defaults to 1.5 × the
    /// largest demonstrated speed.
    pub m_vr: Option<f64>,
    /// Constant phase anchor for time guidance; by default re-anchored at
    /// the first periodic sample every epoch.
    pub phi0: Option<f64>,
    pub n_sci: usize,
    pub n_er: usize,
    pub n_vr: usize,
    /// Cycle points of the Hausdorff term; defaults to the periodic subset size.
    pub n_haus: Option<usize>,
    pub sample_box: SampleBox,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            vi: 1.0,
            lcm: 0.0,
            tgd: 0.0,
            er: 0.0,
            vr: 0.0,
            sci: 0.0,
            haus: 0.0,
            beta_l1: 1.0,
            m_tgd: 0.0,
            m_vr: None,
            phi0: None,
            n_sci: 32,
            n_er: 32,
            n_vr: 32,
            n_haus: None,
            sample_box: SampleBox::default(),
        }
    }
}

impl LossWeights {
    /// Only the velocity-imitation term.
    pub fn imitation_only() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        let ws = [self.vi, self.lcm, self.tgd, self.er, self.vr, self.sci, self.haus];
        if ws.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter("loss weights must be nonnegative and finite".into()));
        }
        if !(self.beta_l1 > 0.0) {
            return Err(Error::InvalidParameter("beta_l1 must be positive".into()));
        }
        if !(self.m_tgd >= 0.0) {
            return Err(Error::InvalidParameter("m_tgd must be nonnegative".into()));
        }
        if let Some(m) = self.m_vr {
            if !(m > 0.0) {
                return Err(Error::InvalidParameter("m_vr must be positive".into()));
            }
        }
        if !(self.sample_box.max > self.sample_box.min) {
            return Err(Error::InvalidParameter("sample box must have max > min".into()));
        }
        if (self.er > 0.0 && self.n_er == 0) || (self.vr > 0.0 && self.n_vr == 0) || (self.sci > 0.0 && self.n_sci == 0) {
            return Err(Error::InvalidParameter("enabled sampled terms need at least one sample".into()));
        }
        Ok(())
    }
}

/// Value of every loss term; disabled terms are `None`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub vi: Option<f64>,
    pub lcm: Option<f64>,
    pub tgd: Option<f64>,
    pub er: Option<f64>,
    pub vr: Option<f64>,
    pub sci: Option<f64>,
    pub haus: Option<f64>,
    /// `Σ ζ_k·L_k` over enabled terms.
    pub total: f64,
}

impl LossBreakdown {
    /// `(name, value)` of the enabled terms, in fixed order.
    pub fn terms(&self) -> Vec<(&'static str, f64)> {
        [("vi", self.vi), ("lcm", self.lcm), ("tgd", self.tgd), ("er", self.er), ("vr", self.vr), ("sci", self.sci), ("haus", self.haus)]
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| (k, v)))
            .collect()
    }
}

/// Per-evaluation context: sampling seed, epoch, and the time-guidance anchor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossContext {
    pub seed: u64,
    pub epoch: usize,
    pub phi0: f64,
}

impl LossContext {
    /// Context with the anchor resolved from `weights` (or the default anchor).
    pub fn new(policy: &Policy, ds: &OracleDataset, weights: &LossWeights, seed: u64, epoch: usize) -> Result<Self> {
        let phi0 = match weights.phi0 {
            Some(p) => p,
            None if weights.tgd > 0.0 => losses::default_phase_anchor(policy, ds)?,
            None => 0.0,
        };
        Ok(Self { seed, epoch, phi0 })
    }
}

/// Weighted loss and breakdown; with `grad`, the exact gradient of the
/// total is accumulated into it.
pub fn evaluate_loss(policy: &Policy, ds: &OracleDataset, w: &LossWeights, ctx: &LossContext, mut grad: Option<&mut [f64]>) -> Result<LossBreakdown> {
    let mut b = LossBreakdown::default();
    let zs = ds.conditionings();
    let mut total = 0.0;
    if w.vi > 0.0 {
        let v = losses::velocity_imitation(policy, ds, w.beta_l1, w.vi, grad.as_deref_mut())?;
        total += w.vi * v;
        b.vi = Some(v);
    }
    if w.lcm > 0.0 {
        let v = losses::limit_cycle_matching(policy, ds, w.lcm, grad.as_deref_mut())?;
        total += w.lcm * v;
        b.lcm = Some(v);
    }
    if w.tgd > 0.0 {
        let v = losses::time_guidance(policy, ds, ctx.phi0, w.m_tgd, w.tgd, grad.as_deref_mut())?;
        total += w.tgd * v;
        b.tgd = Some(v);
    }
    if w.er > 0.0 {
        let mut rng = losses::term_rng(ctx.seed, ctx.epoch, 1);
        let v = losses::encoder_reg(policy, &zs, w.sample_box, w.n_er, &mut rng, w.er, grad.as_deref_mut())?;
        total += w.er * v;
        b.er = Some(v);
    }
    if w.vr > 0.0 {
        let mut rng = losses::term_rng(ctx.seed, ctx.epoch, 2);
        let margin = w.m_vr.unwrap_or(1.5 * ds.max_speed());
        let v = losses::velocity_reg(policy, &zs, w.sample_box, w.n_vr, margin, &mut rng, w.vr, grad.as_deref_mut())?;
        total += w.vr * v;
        b.vr = Some(v);
    }
    if w.sci > 0.0 {
        let mut rng = losses::term_rng(ctx.seed, ctx.epoch, 3);
        let v = losses::smooth_conditioning(policy, &zs, w.n_sci, &mut rng, w.sci, grad.as_deref_mut())?;
        total += w.sci * v;
        b.sci = Some(v);
    }
    if w.haus > 0.0 {
        let points = w.n_haus.unwrap_or(ds.periodic.1 - ds.periodic.0);
        let v = losses::hausdorff_latent(policy, ds, points, w.haus, grad.as_deref_mut())?;
        total += w.haus * v;
        b.haus = Some(v);
    }
    b.total = total;
    Ok(b)
}

/// Weighted loss with the default context for `seed` at epoch 0.
pub fn total_loss(policy: &Policy, ds: &OracleDataset, weights: &LossWeights, seed: u64) -> Result<LossBreakdown> {
    let ctx = LossContext::new(policy, ds, weights, seed, 0)?;
    evaluate_loss(policy, ds, weights, &ctx, None)
}

/// Optimizer and schedule settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub warmup_epochs: usize,
    /// Fraction of the epochs after which cosine decay starts.
    pub decay_start_fraction: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 1000, lr: 1e-3, warmup_epochs: 10, decay_start_fraction: 0.5, beta1: 0.9, beta2: 0.999, weight_decay: 1e-10, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidParameter("learning rate must be positive".into()));
        }
        if self.epochs > 0 && self.warmup_epochs >= self.epochs {
            return Err(Error::InvalidParameter("warmup must be shorter than training".into()));
        }
        if !(0.0..=1.0).contains(&self.decay_start_fraction) {
            return Err(Error::InvalidParameter("decay_start_fraction must lie in [0, 1]".into()));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return Err(Error::InvalidParameter("Adam betas must lie in [0, 1)".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidParameter("weight decay must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn schedule(&self) -> Schedule {
        let decay_start = (self.decay_start_fraction * self.epochs as f64).round() as usize;
        Schedule { lr: self.lr, warmup: self.warmup_epochs, decay_start, total: self.epochs }
    }
}

/// One logged epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub loss: LossBreakdown,
}

/// Per-epoch log, final parameter checksum, and wall time.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub checksum: String,
    pub wall_time_s: f64,
}

impl TrainReport {
    /// Delimited log: `epoch,lr,total,<term columns>`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let names: Vec<&str> = self.epochs.first().map(|r| r.loss.terms().iter().map(|t| t.0).collect()).unwrap_or_default();
        out.push_str("epoch,lr,total");
        for n in &names {
            let _ = write!(out, ",{n}");
        }
        out.push('\n');
        for r in &self.epochs {
            let _ = write!(out, "{},{:?},{:?}", r.epoch, r.lr, r.loss.total);
            for (_, v) in r.loss.terms() {
                let _ = write!(out, ",{v:?}");
            }
            out.push('\n');
        }
        out
    }
}

/// SHA-256 over the little-endian bytes of every trained parameter.
pub fn checksum(policy: &Policy) -> String {
    let mut h = Sha256::new();
    for p in policy.params() {
        h.update(p.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn as_divergence(e: Error, epoch: usize) -> Error {
    match e {
        Error::NonFinite(_) | Error::SingularJacobian => Error::TrainingDiverged { epoch },
        other => other,
    }
}

/// Trains `policy` in place for `cfg.epochs` full-batch steps. Epochs in
/// the report are numbered from `start_epoch + 1`.
pub fn train_policy(policy: &mut Policy, ds: &OracleDataset, weights: &LossWeights, cfg: &TrainConfig, start_epoch: usize) -> Result<TrainReport> {
    weights.validate()?;
    cfg.validate()?;
    ds.validate()?;
    if ds.dim() != policy.dim() {
        return Err(Error::DimensionMismatch { expected: policy.dim(), found: ds.dim() });
    }
    let started = Instant::now();
    let schedule = cfg.schedule();
    let mut theta = policy.params();
    let mut opt = AdamW::new(theta.len(), cfg.beta1, cfg.beta2, cfg.weight_decay);
    let mut grad = vec![0.0; theta.len()];
    let mut report = TrainReport::default();
    for step in 1..=cfg.epochs {
        let epoch = start_epoch + step;
        let ctx = LossContext::new(policy, ds, weights, cfg.seed, epoch).map_err(|e| as_divergence(e, epoch))?;
        grad.fill(0.0);
        let loss = evaluate_loss(policy, ds, weights, &ctx, Some(&mut grad)).map_err(|e| as_divergence(e, epoch))?;
        if !loss.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::TrainingDiverged { epoch });
        }
        let lr = schedule.lr_at(step);
        opt.step(&mut theta, &grad, lr);
        policy.set_params(&theta)?;
        report.epochs.push(EpochRecord { epoch, lr, loss });
    }
    report.checksum = checksum(policy);
    report.wall_time_s = started.elapsed().as_secs_f64();
    Ok(report)
}

/// Builds an identity-initialized policy from the configs (encoder seeded
/// with `cfg.seed`) and trains it.
pub fn train(ds: &OracleDataset, encoder_cfg: EncoderConfig, hopf: HopfParams, weights: &LossWeights, cfg: &TrainConfig) -> Result<(Policy, TrainReport)> {
    let encoder = Encoder::init_identity(encoder_cfg, cfg.seed)?;
    let mut policy = Policy::new(encoder, hopf)?;
    let report = train_policy(&mut policy, ds, weights, cfg, 0)?;
    Ok((policy, report))
}

/// Largest relative error between the analytic gradient of the total loss
/// and central finite differences (`δ = 1e−5`) over a random 1% subset of
/// the parameters (at least one). Relative error is
/// `|a − f| / max(|a|, |f|, 1e−4)`.
pub fn gradient_check(policy: &Policy, ds: &OracleDataset, weights: &LossWeights, seed: u64) -> Result<f64> {
    const STEP: f64 = 1e-5;
    let ctx = LossContext::new(policy, ds, weights, seed, 0)?;
    let theta = policy.params();
    let mut grad = vec![0.0; theta.len()];
    evaluate_loss(policy, ds, weights, &ctx, Some(&mut grad))?;
    let count = (theta.len() / 100).max(1).min(theta.len());
    let mut rng = losses::term_rng(seed, 0, 99);
    let mut probe = policy.clone();
    let mut worst: f64 = 0.0;
    for k in sample(&mut rng, theta.len(), count) {
        let mut t = theta.clone();
        t[k] = theta[k] + STEP;
        probe.set_params(&t)?;
        let lp = evaluate_loss(&probe, ds, weights, &ctx, None)?.total;
        t[k] = theta[k] - STEP;
        probe.set_params(&t)?;
        let lm = evaluate_loss(&probe, ds, weights, &ctx, None)?.total;
        let fd = (lp - lm) / (2.0 * STEP);
        let rel = (grad[k] - fd).abs() / grad[k].abs().max(fd.abs()).max(1e-4);
        worst = worst.max(rel);
    }
    Ok(worst)
}
