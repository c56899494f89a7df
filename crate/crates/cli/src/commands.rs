//! Subcommand implementations.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde_json::json;

use osmp::data::{synth_oracle, synth_oracle_raw, OracleDataset, OracleKind};
use osmp::encoder::{Encoder, EncoderConfig};
use osmp::eval::{evaluate, normalized_workspace_diameter, rollout_with_limit, DIVERGENCE_FACTOR};
use osmp::latent::{AngularVelocityNet, HopfParams, OmegaMode};
use osmp::policy::{Policy, PolicyMeta, ShapingState};
use osmp::sync::{simulate_group, SyncGroup, DEFAULT_K_PS};
use osmp::training::{train_policy, TrainConfig};

use crate::config::RunConfig;
use crate::manifest::RunManifest;
use crate::{Common, Diverged, Usage};

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn seed_of(common: &Common, cfg: &RunConfig) -> u64 {
    common.seed.or(cfg.seed).unwrap_or(0)
}

fn out_or(common: &Common, default: &str) -> PathBuf {
    common.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

#[derive(Args, Debug)]
pub struct OracleGenArgs {
    /// Oracle kind: ellipse, square, star or swim.
    pub kind: Option<String>,
    /// Number of samples over one period.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Period in seconds (defaults per kind).
    #[arg(long)]
    pub period: Option<f64>,
    /// Standard deviation of Gaussian position noise.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Keep raw units instead of normalizing.
    #[arg(long)]
    pub raw: bool,
    #[command(flatten)]
    pub common: Common,
}

pub fn oracle_gen(a: OracleGenArgs) -> Result<()> {
    let cfg = RunConfig::load(a.common.config.as_deref())?;
    let name = a.kind.or(cfg.oracle.kind.clone()).ok_or_else(|| usage("oracle kind required"))?;
    let kind = OracleKind::from_name(&name)?;
    let samples = a.samples.or(cfg.oracle.samples).unwrap_or(200);
    let period = a.period.or(cfg.oracle.period).unwrap_or_else(|| kind.default_period());
    let noise = a.noise.or(cfg.oracle.noise).unwrap_or(0.0);
    let raw = a.raw || cfg.oracle.raw.unwrap_or(false);
    let seed = seed_of(&a.common, &cfg);
    let ds = if raw {
        synth_oracle_raw(&kind, samples, period, noise, seed)?
    } else {
        synth_oracle(&kind, samples, period, noise, seed)?
    };
    let out = out_or(&a.common, &format!("{name}.csv"));
    ds.save(&out)?;
    let mut m = RunManifest::new("oracle-gen", a.common.config.as_deref());
    m.seeds = vec![seed];
    m.outputs = vec![out.clone(), OracleDataset::manifest_path(&out)];
    m.settings = json!({ "kind": name, "samples": samples, "period": period, "noise": noise, "raw": raw });
    m.write(&out)?;
    println!("wrote {} ({} samples)", out.display(), ds.len());
    Ok(())
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Dataset file.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub warmup_epochs: Option<usize>,
    /// Number of coupling blocks.
    #[arg(long)]
    pub blocks: Option<usize>,
    /// Random Fourier feature count per block net.
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub radius: Option<f64>,
    /// Constant latent angular velocity (defaults to 2π / period).
    #[arg(long)]
    pub omega: Option<f64>,
    /// Learn the angular velocity as a function of the latent phase.
    #[arg(long)]
    pub learned_omega: bool,
    /// Learn a state-dependent speed scale.
    #[arg(long)]
    pub learned_speed: bool,
    /// Continue training an existing policy file.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long)]
    pub w_vi: Option<f64>,
    #[arg(long)]
    pub w_lcm: Option<f64>,
    #[arg(long)]
    pub w_tgd: Option<f64>,
    #[arg(long)]
    pub w_er: Option<f64>,
    #[arg(long)]
    pub w_vr: Option<f64>,
    #[arg(long)]
    pub w_sci: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

pub fn train(a: TrainArgs) -> Result<()> {
    let cfg = RunConfig::load(a.common.config.as_deref())?;
    let data = a.data.clone().or(cfg.train.data.clone()).ok_or_else(|| usage("--data is required"))?;
    let ds = OracleDataset::load_normalized(&data).with_context(|| format!("loading {}", data.display()))?;
    let seed = seed_of(&a.common, &cfg);
    let mut weights = cfg.weights.clone().unwrap_or_default();
    for (flag, slot) in [
        (a.w_vi, &mut weights.vi),
        (a.w_lcm, &mut weights.lcm),
        (a.w_tgd, &mut weights.tgd),
        (a.w_er, &mut weights.er),
        (a.w_vr, &mut weights.vr),
        (a.w_sci, &mut weights.sci),
    ] {
        if let Some(v) = flag {
            *slot = v;
        }
    }
    let defaults = TrainConfig::default();
    let epochs = a.epochs.or(cfg.train.epochs).unwrap_or(defaults.epochs);
    let tcfg = TrainConfig {
        epochs,
        lr: a.lr.or(cfg.train.lr).unwrap_or(5e-3),
        warmup_epochs: a.warmup_epochs.or(cfg.train.warmup_epochs).unwrap_or(defaults.warmup_epochs.min(epochs / 2)),
        decay_start_fraction: cfg.train.decay_start_fraction.unwrap_or(defaults.decay_start_fraction),
        weight_decay: cfg.train.weight_decay.unwrap_or(defaults.weight_decay),
        seed,
        ..defaults
    };
    tcfg.validate().map_err(|e| usage(e.to_string()))?;
    weights.validate().map_err(|e| usage(e.to_string()))?;
    if weights.sci > 0.0 && ds.conditionings().len() < 2 {
        bail!(usage("the conditioning-interpolation weight needs at least two conditionings in the dataset"));
    }

    let resume = a.resume.clone().or(cfg.train.resume.clone());
    let (mut policy, mut meta) = match &resume {
        Some(path) => Policy::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => {
            let policy = build_policy(&a, &cfg, &ds, seed)?;
            let meta = PolicyMeta { shaping: ShapingState::default(), ..PolicyMeta::default() };
            (policy, meta)
        }
    };
    if policy.dim() != ds.dim() {
        bail!(usage(format!("policy dimension {} does not match dataset dimension {}", policy.dim(), ds.dim())));
    }
    let start = meta.epochs_trained;
    let report = train_policy(&mut policy, &ds, &weights, &tcfg, start)?;
    meta.epochs_trained = start + tcfg.epochs;
    meta.normalization = ds.normalization.clone();
    meta.period = Some(ds.period);
    meta.dt = Some(ds.mean_dt());

    let out = out_or(&a.common, "policy.json");
    policy.save(&out, &meta)?;
    let log = out.with_file_name(format!("{}.log.csv", stem(&out)));
    std::fs::write(&log, report.to_csv())?;
    let mut m = RunManifest::new("train", a.common.config.as_deref());
    m.seeds = vec![seed];
    m.inputs = std::iter::once(data).chain(resume).collect();
    m.outputs = vec![out.clone(), log];
    m.settings = json!({
        "train": tcfg,
        "weights": weights,
        "encoder": policy.encoder.config(),
        "hopf": { "alpha": policy.hopf.alpha, "beta": policy.hopf.beta, "radius": policy.hopf.radius },
        "start_epoch": start,
        "checksum": report.checksum,
        "wall_time_s": report.wall_time_s,
    });
    m.write(&out)?;
    let last = report.epochs.last().map_or(f64::NAN, |r| r.loss.total);
    println!("trained epochs {}..{} final loss {last:.6e} -> {}", start + 1, meta.epochs_trained, out.display());
    Ok(())
}

fn build_policy(a: &TrainArgs, cfg: &RunConfig, ds: &OracleDataset, seed: u64) -> Result<Policy> {
    let mut ecfg = EncoderConfig::new(ds.dim(), a.blocks.or(cfg.encoder.blocks).unwrap_or(10));
    ecfg.rffn_hidden = a.hidden.or(cfg.encoder.hidden).unwrap_or(ecfg.rffn_hidden);
    ecfg.clamp_bound = cfg.encoder.clamp_bound.unwrap_or(ecfg.clamp_bound);
    ecfg.length_scale = cfg.encoder.length_scale.unwrap_or(ecfg.length_scale);
    ecfg.fourier_scale = cfg.encoder.fourier_scale.unwrap_or(ecfg.fourier_scale);
    if ds.z.is_some() {
        ecfg = ecfg.conditioned();
    }
    ecfg.validate().map_err(|e| usage(e.to_string()))?;
    let alpha = a.alpha.or(cfg.hopf.alpha).unwrap_or(10.0);
    let beta = a.beta.or(cfg.hopf.beta).unwrap_or(alpha);
    let radius = a.radius.or(cfg.hopf.radius).unwrap_or(0.5);
    let omega = a.omega.or(cfg.hopf.omega).unwrap_or(2.0 * PI / ds.period);
    let mode = if a.learned_omega || cfg.hopf.learned_omega.unwrap_or(false) {
        let hidden = cfg.hopf.omega_hidden.clone().unwrap_or_else(|| vec![32, 32]);
        OmegaMode::Learned(AngularVelocityNet::new(&hidden, omega, seed).map_err(|e| usage(e.to_string()))?)
    } else {
        OmegaMode::Constant(omega)
    };
    let hopf = HopfParams::new(alpha, beta, radius, mode).map_err(|e| usage(e.to_string()))?;
    let mut policy = Policy::new(Encoder::init_identity(ecfg, seed)?, hopf)?;
    if a.learned_speed || cfg.hopf.learned_speed.unwrap_or(false) {
        let hidden = cfg.hopf.speed_hidden.clone().unwrap_or_else(|| vec![32, 32]);
        policy = policy.with_learned_speed(&hidden, 1e-3, seed)?;
    }
    Ok(policy)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Policy file.
    #[arg(long)]
    pub policy: PathBuf,
    /// Dataset file.
    #[arg(long)]
    pub data: PathBuf,
    /// Evaluation seeds (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[command(flatten)]
    pub common: Common,
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let cfg = RunConfig::load(a.common.config.as_deref())?;
    let seeds = a
        .seeds
        .clone()
        .or(cfg.eval.seeds.clone())
        .unwrap_or_else(|| vec![seed_of(&a.common, &cfg)]);
    if seeds.is_empty() {
        bail!(usage("at least one seed is required"));
    }
    let (policy, _) = Policy::load(&a.policy).with_context(|| format!("loading {}", a.policy.display()))?;
    let ds = OracleDataset::load_normalized(&a.data).with_context(|| format!("loading {}", a.data.display()))?;
    if ds.dim() != policy.dim() {
        bail!(usage(format!("policy dimension {} does not match dataset dimension {}", policy.dim(), ds.dim())));
    }
    let report = evaluate(&policy, &ds, &seeds)?;
    let out = out_or(&a.common, "report.csv");
    std::fs::write(&out, report.to_csv())?;
    let mut m = RunManifest::new("eval", a.common.config.as_deref());
    m.seeds = seeds;
    m.inputs = vec![a.policy, a.data];
    m.outputs = vec![out.clone()];
    m.settings = json!({ "flagged": report.is_flagged() });
    m.write(&out)?;
    print!("{}", report.to_table());
    if report.is_flagged() {
        println!("note: some rollouts diverged (marked * / ∞)");
    }
    Ok(())
}

/// Shaping flags shared by `rollout`.
#[derive(Args, Debug, Clone, Default)]
pub struct ShapingArgs {
    /// Spatial scale s_f.
    #[arg(long)]
    pub s_f: Option<f64>,
    /// Speed factor s_ω.
    #[arg(long)]
    pub s_omega: Option<f64>,
    /// Convergence gain k_conv.
    #[arg(long)]
    pub k_conv: Option<f64>,
    /// Field origin x_o (comma separated).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x_o: Option<Vec<f64>>,
    /// Tube radius of the angular gate (enables the gate).
    #[arg(long)]
    pub r_sm: Option<f64>,
    /// Width of the angular gate (enables the gate).
    #[arg(long)]
    pub sigma_sm: Option<f64>,
}

impl ShapingArgs {
    fn merge(&self, cfg: &RunConfig, base: &ShapingState) -> ShapingState {
        let r = &cfg.rollout;
        let r_sm = self.r_sm.or(r.r_sm);
        let sigma_sm = self.sigma_sm.or(r.sigma_sm);
        ShapingState {
            s_f: self.s_f.or(r.s_f).unwrap_or(base.s_f),
            x_o: self.x_o.clone().or(r.x_o.clone()).unwrap_or_else(|| base.x_o.clone()),
            s_omega: self.s_omega.or(r.s_omega).unwrap_or(base.s_omega),
            k_conv: self.k_conv.or(r.k_conv).unwrap_or(base.k_conv),
            r_sm: r_sm.unwrap_or(base.r_sm),
            sigma_sm: sigma_sm.unwrap_or(base.sigma_sm),
            gate_enabled: base.gate_enabled || r_sm.is_some() || sigma_sm.is_some(),
        }
    }
}

#[derive(Args, Debug)]
pub struct RolloutArgs {
    /// Policy file.
    #[arg(long)]
    pub policy: PathBuf,
    /// Initial state (comma separated).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "from_dataset")]
    pub x0: Option<Vec<f64>>,
    /// Start from a dataset sample instead of --x0.
    #[arg(long)]
    pub from_dataset: Option<PathBuf>,
    /// Sample index for --from-dataset (defaults to the first periodic sample).
    #[arg(long)]
    pub index: Option<usize>,
    /// Conditioning value.
    #[arg(long, allow_hyphen_values = true)]
    pub z: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[command(flatten)]
    pub shaping: ShapingArgs,
    #[command(flatten)]
    pub common: Common,
}

pub fn rollout(a: RolloutArgs) -> Result<()> {
    let cfg = RunConfig::load(a.common.config.as_deref())?;
    let (policy, meta) = Policy::load(&a.policy).with_context(|| format!("loading {}", a.policy.display()))?;
    let mut inputs = vec![a.policy.clone()];
    let (x0, z_default) = match (&a.x0, &a.from_dataset) {
        (Some(x0), None) => (x0.clone(), 0.0),
        (None, Some(path)) => {
            let ds = OracleDataset::load_normalized(path).with_context(|| format!("loading {}", path.display()))?;
            let i = a.index.unwrap_or(ds.periodic.0);
            if i >= ds.len() {
                bail!(usage(format!("index {i} out of range for {} samples", ds.len())));
            }
            inputs.push(path.clone());
            (ds.x[i].clone(), ds.z_at(i))
        }
        _ => bail!(usage("exactly one of --x0 or --from-dataset is required")),
    };
    if x0.len() != policy.dim() {
        bail!(usage(format!("initial state has {} coordinates, policy expects {}", x0.len(), policy.dim())));
    }
    let z = a.z.unwrap_or(z_default);
    let dt = a.dt.or(cfg.rollout.dt).or(meta.dt).unwrap_or(0.01);
    let steps = a
        .steps
        .or(cfg.rollout.steps)
        .unwrap_or_else(|| meta.period.map_or(200, |p| (p / dt).round() as usize));
    let shape = a.shaping.merge(&cfg, &meta.shaping);
    shape.validate(policy.dim()).map_err(|e| usage(e.to_string()))?;
    let limit = DIVERGENCE_FACTOR * normalized_workspace_diameter(policy.dim()) * shape.s_f
        + shape.x_o.iter().map(|v| v * v).sum::<f64>().sqrt();
    let traj = rollout_with_limit(&policy, &x0, z, dt, steps, &shape, limit)?;
    let out = out_or(&a.common, "rollout.csv");
    let period = meta.period.unwrap_or(steps as f64 * dt);
    if !traj.is_empty() {
        let conditioned = policy.encoder.config().embed_dim() > 0;
        traj.save(&out, conditioned.then_some(z), period)?;
    }
    let mut m = RunManifest::new("rollout", a.common.config.as_deref());
    m.inputs = inputs;
    m.outputs = vec![out.clone()];
    m.settings = json!({ "x0": x0, "z": z, "dt": dt, "steps": steps, "shaping": shape, "diverged": traj.diverged });
    m.write(&out)?;
    if traj.diverged {
        return Err(Diverged(format!("rollout left the workspace after {} states", traj.len())).into());
    }
    println!("wrote {} ({} states)", out.display(), traj.len());
    Ok(())
}

#[derive(Args, Debug)]
pub struct FieldArgs {
    /// Policy file.
    #[arg(long)]
    pub policy: PathBuf,
    /// Range of the first coordinate.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-0.75, 0.75])]
    pub xlim: Vec<f64>,
    /// Range of the second coordinate.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-0.75, 0.75])]
    pub ylim: Vec<f64>,
    #[arg(long, default_value_t = 25)]
    pub nx: usize,
    #[arg(long, default_value_t = 25)]
    pub ny: usize,
    /// Values of coordinates 3..n (default 0).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub slice: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub z: f64,
    /// Also write an SVG quiver plot.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Dataset drawn on top of the SVG.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

pub fn field(a: FieldArgs) -> Result<()> {
    let cfg = RunConfig::load(a.common.config.as_deref())?;
    let (policy, meta) = Policy::load(&a.policy).with_context(|| format!("loading {}", a.policy.display()))?;
    let n = policy.dim();
    if a.xlim.len() != 2 || a.ylim.len() != 2 {
        bail!(usage("--xlim and --ylim take two values each"));
    }
    if a.nx == 0 || a.ny == 0 {
        bail!(usage("grid sizes must be positive"));
    }
    let slice = a.slice.clone().unwrap_or_else(|| vec![0.0; n - 2]);
    if slice.len() != n - 2 {
        bail!(usage(format!("--slice needs {} values", n - 2)));
    }
    let shape = ShapingArgs::default().merge(&cfg, &meta.shaping);
    let lin = |lim: &[f64], k: usize, count: usize| {
        if count == 1 {
            (lim[0] + lim[1]) / 2.0
        } else {
            lim[0] + (lim[1] - lim[0]) * k as f64 / (count - 1) as f64
        }
    };
    let mut csv = String::new();
    let header: Vec<String> = (1..=n).map(|i| format!("x_{i}")).chain((1..=n).map(|i| format!("v_{i}"))).collect();
    csv.push_str(&header.join(","));
    csv.push('\n');
    let (mut pts, mut vels) = (Vec::new(), Vec::new());
    for j in 0..a.ny {
        for i in 0..a.nx {
            let mut x = vec![lin(&a.xlim, i, a.nx), lin(&a.ylim, j, a.ny)];
            x.extend_from_slice(&slice);
            let v = policy.velocity(&x, a.z, &shape).unwrap_or_else(|_| vec![f64::NAN; n]);
            let row: Vec<String> = x.iter().chain(&v).map(|c| format!("{c:?}")).collect();
            csv.push_str(&row.join(","));
            csv.push('\n');
            pts.push([x[0], x[1]]);
            vels.push(if v.iter().all(|c| c.is_finite()) { [v[0], v[1]] } else { [0.0, 0.0] });
        }
    }
    let out = out_or(&a.common, "field.csv");
    std::fs::write(&out, csv)?;
    let mut outputs = vec![out.clone()];
    let mut inputs = vec![a.policy.clone()];
    if let Some(svg_path) = &a.svg {
        let demo = match &a.data {
            Some(path) => {
                inputs.push(path.clone());
                OracleDataset::load_normalized(path)?.x.iter().map(|p| [p[0], p[1]]).collect()
            }
            None => Vec::new(),
        };
        let cell = ((a.xlim[1] - a.xlim[0]) / a.nx.max(2) as f64).abs().min(((a.ylim[1] - a.ylim[0]) / a.ny.max(2) as f64).abs());
        std::fs::write(svg_path, crate::svg::quiver(&pts, &vels, cell, &demo))?;
        outputs.push(svg_path.clone());
    }
    let mut m = RunManifest::new("field", a.common.config.as_deref());
    m.inputs = inputs;
    m.outputs = outputs;
    m.settings = json!({ "xlim": a.xlim, "ylim": a.ylim, "nx": a.nx, "ny": a.ny, "slice": slice, "z": a.z, "shaping": shape });
    m.write(&out)?;
    println!("wrote {} ({} grid points)", out.display(), a.nx * a.ny);
    Ok(())
}

#[derive(Args, Debug)]
pub struct SyncSimArgs {
    /// Policy files (comma separated).
    #[arg(long, value_delimiter = ',', required = true)]
    pub policies: Vec<PathBuf>,
    /// Coupling gain k_ps.
    #[arg(long)]
    pub k_ps: Option<f64>,
    /// Desired offsets δΦ* in radians, row-major n_s × n_s (comma separated).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub offsets: Option<Vec<f64>>,
    /// Initial latent phases in radians, one per policy; the initial
    /// states are the decoded cycle points at these phases.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub phases: Option<Vec<f64>>,
    /// Conditioning per policy (comma separated).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub z: Option<Vec<f64>>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

pub fn sync_sim(a: SyncSimArgs) -> Result<()> {
    let cfg = RunConfig::load(a.common.config.as_deref())?;
    let ns = a.policies.len();
    let mut policies = Vec::with_capacity(ns);
    let mut metas = Vec::with_capacity(ns);
    for p in &a.policies {
        let (pol, meta) = Policy::load(p).with_context(|| format!("loading {}", p.display()))?;
        policies.push(pol);
        metas.push(meta);
    }
    let k_ps = a.k_ps.or(cfg.sync.k_ps).unwrap_or(DEFAULT_K_PS);
    let offsets: Vec<Vec<f64>> = match (&a.offsets, &cfg.sync.offsets) {
        (Some(flat), _) => {
            if flat.len() != ns * ns {
                bail!(usage(format!("--offsets needs {} values", ns * ns)));
            }
            flat.chunks(ns).map(<[f64]>::to_vec).collect()
        }
        (None, Some(m)) => m.clone(),
        (None, None) => vec![vec![0.0; ns]; ns],
    };
    let zs = a.z.clone().unwrap_or_else(|| vec![0.0; ns]);
    if zs.len() != ns {
        bail!(usage(format!("--z needs {ns} values")));
    }
    let phases = a
        .phases
        .clone()
        .unwrap_or_else(|| (0..ns).map(|i| i as f64 * (PI / 2.0) / (ns.max(2) - 1) as f64).collect());
    if phases.len() != ns {
        bail!(usage(format!("--phases needs {ns} values")));
    }
    let group = SyncGroup::new(policies, offsets.clone(), k_ps).map_err(|e| usage(e.to_string()))?;
    let mut x0s = Vec::with_capacity(ns);
    for (i, p) in group.policies.iter().enumerate() {
        let mut y = vec![0.0; p.dim()];
        y[0] = p.hopf.radius * phases[i].cos();
        y[1] = p.hopf.radius * phases[i].sin();
        x0s.push(p.encoder.decode(&y, zs[i])?);
    }
    let dt = a.dt.or(metas[0].dt).unwrap_or(0.01);
    let period = metas[0].period.unwrap_or(2.0);
    let steps = a.steps.unwrap_or_else(|| (10.0 * period / dt).round() as usize);
    let trace = simulate_group(&group, &x0s, &zs, dt, steps)?;
    let out = out_or(&a.common, "sync_out");
    std::fs::create_dir_all(&out)?;
    let files = trace.save(&out, "trace", &zs, period)?;
    let mut m = RunManifest::new("sync-sim", a.common.config.as_deref());
    m.inputs = a.policies.clone();
    m.outputs = files;
    m.settings = json!({
        "k_ps": k_ps, "offsets": offsets, "phases": phases, "z": zs, "dt": dt, "steps": steps,
        "diverged": trace.diverged,
    });
    m.write(&out)?;
    let last = trace.t.len() - 1;
    println!("final max pairwise phase error {:.4} deg -> {}", trace.max_abs_error(last), out.display());
    if trace.diverged.iter().any(|d| *d) {
        return Err(Diverged("at least one system diverged".into()).into());
    }
    Ok(())
}
