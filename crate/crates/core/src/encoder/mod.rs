//! Conditioned bijective encoder `Ψ(x; z)` built from alternating affine
//! coupling blocks, with its closed-form inverse, exact and
//! finite-difference Jacobians, and exact parameter gradients.

mod coupling;
mod embedding;

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{check_finite, Error, Result};
use coupling::{BlockParams, BlockTape, FrozenBlock, FrozenNet, Readout, Split};
use embedding::{EmbedShape, EmbedTape};

const FILE_FORMAT: &str = "osmp-encoder";
const FILE_VERSION: u32 = 1;

/// How the scalar conditioning enters the encoder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Conditioning {
    None,
    /// `z` is lifted to an embedding of dimension `embed_dim`.
    Scalar { embed_dim: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    /// State dimension.
    pub n: usize,
    pub n_blocks: usize,
    /// Random Fourier feature count of every scale and translation net.
    pub rffn_hidden: usize,
    /// Magnitude bound of the log-scale output of every block.
    pub clamp_bound: f64,
    /// Kernel length-scale of the frozen feature frequencies.
    pub length_scale: f64,
    pub conditioning: Conditioning,
    /// Standard deviation of the Gaussian-Fourier conditioning frequencies.
    pub fourier_scale: f64,
}

impl EncoderConfig {
    /// Unconditioned configuration with default net sizes.
    pub fn new(n: usize, n_blocks: usize) -> Self {
        Self {
            n,
            n_blocks,
            rffn_hidden: 100,
            clamp_bound: 3.0,
            length_scale: 0.45,
            conditioning: Conditioning::None,
            fourier_scale: 1.0,
        }
    }

    /// Enables scalar conditioning with embedding dimension `n_e = n`.
    pub fn conditioned(mut self) -> Self {
        self.conditioning = Conditioning::Scalar { embed_dim: self.n };
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if self.n < 2 {
            return bad("encoder dimension n must be at least 2");
        }
        if self.n_blocks < 1 {
            return bad("encoder needs at least one block");
        }
        if self.rffn_hidden < 1 {
            return bad("rffn_hidden must be at least 1");
        }
        if !(self.clamp_bound > 0.0 && self.clamp_bound.is_finite()) {
            return bad("clamp_bound must be positive and finite");
        }
        if !(self.length_scale > 0.0 && self.length_scale.is_finite()) {
            return bad("length_scale must be positive and finite");
        }
        if !(self.fourier_scale > 0.0 && self.fourier_scale.is_finite()) {
            return bad("fourier_scale must be positive and finite");
        }
        if let Conditioning::Scalar { embed_dim: 0 } = self.conditioning {
            return bad("conditioning embed_dim must be at least 1");
        }
        Ok(())
    }

    /// Embedding dimension, zero when unconditioned.
    pub fn embed_dim(&self) -> usize {
        match self.conditioning {
            Conditioning::None => 0,
            Conditioning::Scalar { embed_dim } => embed_dim,
        }
    }

    fn split(&self, block: usize) -> Split {
        let na = self.n.div_ceil(2);
        let nb = self.n / 2;
        if block % 2 == 0 {
            Split { p0: 0, np: na, q0: na, nq: nb }
        } else {
            Split { p0: na, np: nb, q0: 0, nq: na }
        }
    }
}

/// Method for [`Encoder::jacobian`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum JacobianMethod {
    Exact,
    /// Forward differences with step `step`.
    FiniteDifference { step: f64 },
}

#[derive(Clone, Copy, Debug)]
struct BlockLayout {
    split: Split,
    offset: usize,
}

impl BlockLayout {
    fn readout_len(&self, hidden: usize) -> usize {
        self.split.nq * (hidden + 1)
    }
}

/// Encoder parameters: frozen random features plus one flat vector of
/// trained weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    config: EncoderConfig,
    seed: u64,
    frozen: Vec<FrozenBlock>,
    fourier: Vec<f64>,
    theta: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct EncoderFile {
    format: String,
    version: u32,
    encoder: Encoder,
}

/// Intermediate values of one encode pass, reused across calls.
#[derive(Clone, Debug, Default)]
pub struct EncodeTape {
    zbar: Vec<f64>,
    embed: EmbedTape,
    blocks: Vec<BlockTape>,
    tangent: bool,
    /// Latent output `Ψ(x; z)`.
    pub y: Vec<f64>,
    /// Jacobian `∂Ψ/∂x` (row-major `n × n`), filled when taped with tangents.
    pub jac: Vec<f64>,
}

/// Intermediate values of one decode pass.
#[derive(Clone, Debug, Default)]
pub struct DecodeTape {
    zbar: Vec<f64>,
    embed: EmbedTape,
    blocks: Vec<BlockTape>,
    /// Decoded state `Ψ⁻¹(y; z)`.
    pub x: Vec<f64>,
}

impl Encoder {
    /// Builds an encoder that is exactly the identity map: all trained
    /// readout weights are zero, frozen features are drawn from `seed`.
    pub fn init_identity(config: EncoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = config.rffn_hidden;
        let ne = config.embed_dim();
        let w_dist = Normal::new(0.0, 1.0 / config.length_scale).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let frozen_net = |d: usize, rng: &mut ChaCha8Rng| FrozenNet {
            w: (0..h * d).map(|_| w_dist.sample(rng)).collect(),
            phase: (0..h).map(|_| rng.random_range(0.0..2.0 * PI)).collect(),
        };
        let mut frozen = Vec::with_capacity(config.n_blocks);
        for b in 0..config.n_blocks {
            let d = config.split(b).np + ne;
            let scale = frozen_net(d, &mut rng);
            let shift = frozen_net(d, &mut rng);
            frozen.push(FrozenBlock { scale, shift });
        }
        let f_dist = Normal::new(0.0, config.fourier_scale).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let fourier: Vec<f64> = (0..2 * ne).map(|_| f_dist.sample(&mut rng)).collect();

        let mut enc = Self { config, seed, frozen, fourier, theta: Vec::new() };
        let n_params = enc.embed_offset() + enc.embed_len();
        enc.theta = vec![0.0; n_params];
        if ne > 0 {
            let shape = EmbedShape { ne };
            let (f, hid) = (shape.features(), shape.hidden());
            let off = enc.embed_offset();
            let mut fill = |start: usize, len: usize, fan_in: usize, rng: &mut ChaCha8Rng| {
                let bound = 1.0 / (fan_in as f64).sqrt();
                for v in &mut enc.theta[start..start + len] {
                    *v = rng.random_range(-bound..bound);
                }
            };
            fill(off, hid * f + hid, f, &mut rng);
            fill(off + hid * f + hid, ne * hid + ne, hid, &mut rng);
        }
        Ok(enc)
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.config.n
    }

    /// Trained parameters as one flat vector.
    pub fn params(&self) -> &[f64] {
        &self.theta
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn n_params(&self) -> usize {
        self.theta.len()
    }

    /// Frozen scale-net frequencies of block `block` (`hidden × input`).
    pub fn frozen_scale_frequencies(&self, block: usize) -> &[f64] {
        &self.frozen[block].scale.w
    }

    /// Frozen Gaussian-Fourier conditioning frequencies.
    pub fn fourier_frequencies(&self) -> &[f64] {
        &self.fourier
    }

    /// Overwrites all trained parameters with draws from `N(0, std²)`.
    pub fn randomize(&mut self, std: f64, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Normal::new(0.0, std.abs()).unwrap_or_else(|_| Normal::new(0.0, 0.0).expect("zero std"));
        for v in &mut self.theta {
            *v = dist.sample(&mut rng);
        }
    }

    /// Makes block `block` a constant affine map on its active coordinates:
    /// log-scales `log_scale` and shifts `shift`, independent of the input.
    pub fn set_block_affine(&mut self, block: usize, log_scale: &[f64], shift: &[f64]) -> Result<()> {
        if block >= self.config.n_blocks {
            return Err(Error::InvalidParameter(format!("block {block} out of range")));
        }
        let lay = self.layout(block);
        let nq = lay.split.nq;
        if log_scale.len() != nq {
            return Err(Error::DimensionMismatch { expected: nq, found: log_scale.len() });
        }
        if shift.len() != nq {
            return Err(Error::DimensionMismatch { expected: nq, found: shift.len() });
        }
        let c = self.config.clamp_bound;
        if log_scale.iter().any(|s| !(s.abs() < c)) {
            return Err(Error::InvalidParameter(format!("log-scale must lie strictly inside (-{c}, {c})")));
        }
        let h = self.config.rffn_hidden;
        let off = lay.offset;
        let region = &mut self.theta[off..off + 2 * lay.readout_len(h)];
        region.fill(0.0);
        for a in 0..nq {
            region[nq * h + a] = c * (log_scale[a] / c).atanh();
            region[2 * nq * h + nq + a] = shift[a];
        }
        Ok(())
    }

    /// Active (transformed) coordinate range of block `block`.
    pub fn active_range(&self, block: usize) -> std::ops::Range<usize> {
        let sp = self.config.split(block);
        sp.q0..sp.q0 + sp.nq
    }

    fn layout(&self, block: usize) -> BlockLayout {
        let h = self.config.rffn_hidden;
        let mut offset = 0;
        for b in 0..block {
            offset += 2 * self.config.split(b).nq * (h + 1);
        }
        BlockLayout { split: self.config.split(block), offset }
    }

    fn layouts(&self) -> Vec<BlockLayout> {
        (0..self.config.n_blocks).map(|b| self.layout(b)).collect()
    }

    fn embed_offset(&self) -> usize {
        let h = self.config.rffn_hidden;
        (0..self.config.n_blocks).map(|b| 2 * self.config.split(b).nq * (h + 1)).sum()
    }

    fn embed_len(&self) -> usize {
        match self.config.embed_dim() {
            0 => 0,
            ne => EmbedShape { ne }.n_params(),
        }
    }

    fn block_params(&self, block: usize, lay: BlockLayout) -> BlockParams<'_> {
        let h = self.config.rffn_hidden;
        let nq = lay.split.nq;
        let r = &self.theta[lay.offset..lay.offset + 2 * lay.readout_len(h)];
        let (sv, rest) = r.split_at(nq * h);
        let (sb, rest) = rest.split_at(nq);
        let (tv, tb) = rest.split_at(nq * h);
        BlockParams {
            frozen: &self.frozen[block],
            scale: Readout { v: sv, b: sb },
            shift: Readout { v: tv, b: tb },
            clamp: self.config.clamp_bound,
        }
    }

    fn embed_into(&self, z: f64, tape: &mut EmbedTape, zbar: &mut Vec<f64>) {
        zbar.clear();
        let ne = self.config.embed_dim();
        if ne > 0 {
            let off = self.embed_offset();
            embedding::forward(EmbedShape { ne }, &self.fourier, &self.theta[off..], z, tape);
            zbar.extend_from_slice(&tape.out);
        }
    }

    /// Conditioning embedding `z̄`; empty for an unconditioned encoder.
    pub fn embed_conditioning(&self, z: f64) -> Vec<f64> {
        let mut tape = EmbedTape::default();
        let mut zbar = Vec::new();
        self.embed_into(z, &mut tape, &mut zbar);
        zbar
    }

    fn check_input(&self, x: &[f64], what: &'static str) -> Result<()> {
        if x.len() != self.config.n {
            return Err(Error::DimensionMismatch { expected: self.config.n, found: x.len() });
        }
        check_finite(x, what)
    }

    /// Latent state `Ψ(x; z)`.
    pub fn encode(&self, x: &[f64], z: f64) -> Result<Vec<f64>> {
        let mut tape = EncodeTape::default();
        self.encode_taped(x, z, false, &mut tape)?;
        Ok(tape.y)
    }

    /// Latent state and exact Jacobian `∂Ψ/∂x`.
    pub fn encode_with_jacobian(&self, x: &[f64], z: f64) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let mut tape = EncodeTape::default();
        self.encode_taped(x, z, true, &mut tape)?;
        let n = self.config.n;
        let jac = DMatrix::from_row_slice(n, n, &tape.jac);
        Ok((tape.y, jac))
    }

    /// Jacobian of [`Encoder::encode`] at `x`.
    pub fn jacobian(&self, x: &[f64], z: f64, method: JacobianMethod) -> Result<DMatrix<f64>> {
        match method {
            JacobianMethod::Exact => Ok(self.encode_with_jacobian(x, z)?.1),
            JacobianMethod::FiniteDifference { step } => {
                if !(step > 0.0 && step.is_finite()) {
                    return Err(Error::InvalidParameter("finite-difference step must be positive".into()));
                }
                let n = self.config.n;
                let y0 = self.encode(x, z)?;
                let mut jac = DMatrix::zeros(n, n);
                let mut xp = x.to_vec();
                for j in 0..n {
                    xp[j] = x[j] + step;
                    let yp = self.encode(&xp, z)?;
                    xp[j] = x[j];
                    for i in 0..n {
                        jac[(i, j)] = (yp[i] - y0[i]) / step;
                    }
                }
                Ok(jac)
            }
        }
    }

    /// Encodes `x` and records every intermediate needed by
    /// [`Encoder::encode_backward`]. With `tangent`, also propagates the
    /// Jacobian so that gradients of Jacobian-dependent losses are exact.
    pub fn encode_taped(&self, x: &[f64], z: f64, tangent: bool, tape: &mut EncodeTape) -> Result<()> {
        self.check_input(x, "encoder input")?;
        let n = self.config.n;
        self.embed_into(z, &mut tape.embed, &mut tape.zbar);
        tape.blocks.resize_with(self.config.n_blocks, BlockTape::default);
        tape.tangent = tangent;
        tape.y.clear();
        tape.y.extend_from_slice(x);
        tape.jac.clear();
        if tangent {
            tape.jac.resize(n * n, 0.0);
            for i in 0..n {
                tape.jac[i * n + i] = 1.0;
            }
        }
        for (b, lay) in self.layouts().into_iter().enumerate() {
            let bp = self.block_params(b, lay);
            let t = if tangent { Some(tape.jac.as_mut_slice()) } else { None };
            coupling::block_forward(&bp, lay.split, n, &tape.zbar, &mut tape.y, t, &mut tape.blocks[b]);
        }
        check_finite(&tape.y, "encoder output")?;
        check_finite(&tape.jac, "encoder Jacobian")
    }

    /// Reverse pass of [`Encoder::encode_taped`]. `y_bar` is the gradient
    /// of a scalar loss w.r.t. the latent output and `jac_bar` (row-major,
    /// requires a tangent tape) w.r.t. the Jacobian. Parameter gradients are
    /// accumulated into `grad`; the gradient w.r.t. `x` is returned.
    pub fn encode_backward(&self, tape: &mut EncodeTape, y_bar: &[f64], jac_bar: Option<&[f64]>, grad: &mut [f64]) -> Vec<f64> {
        let n = self.config.n;
        let h = self.config.rffn_hidden;
        let mut x_bar = y_bar.to_vec();
        let mut t_bar: Option<Vec<f64>> = match (jac_bar, tape.tangent) {
            (Some(jb), true) => Some(jb.to_vec()),
            _ => None,
        };
        let mut zbar_bar = vec![0.0; tape.zbar.len()];
        for b in (0..self.config.n_blocks).rev() {
            let lay = self.layout(b);
            let bp = self.block_params(b, lay);
            let nq = lay.split.nq;
            let g = &mut grad[lay.offset..lay.offset + 2 * lay.readout_len(h)];
            let (gsv, rest) = g.split_at_mut(nq * h);
            let (gsb, rest) = rest.split_at_mut(nq);
            let (gtv, gtb) = rest.split_at_mut(nq * h);
            coupling::block_backward(
                &bp,
                lay.split,
                n,
                &mut tape.blocks[b],
                &mut x_bar,
                t_bar.as_deref_mut(),
                (gsv, gsb),
                (gtv, gtb),
                &mut zbar_bar,
            );
        }
        self.embed_backward(&tape.embed, &zbar_bar, grad);
        x_bar
    }

    fn embed_backward(&self, tape: &EmbedTape, zbar_bar: &[f64], grad: &mut [f64]) {
        let ne = self.config.embed_dim();
        if ne > 0 {
            let off = self.embed_offset();
            embedding::backward(EmbedShape { ne }, &self.theta[off..], tape, zbar_bar, &mut grad[off..]);
        }
    }

    /// State `Ψ⁻¹(y; z)`.
    pub fn decode(&self, y: &[f64], z: f64) -> Result<Vec<f64>> {
        let mut tape = DecodeTape::default();
        self.decode_taped(y, z, &mut tape)?;
        Ok(tape.x)
    }

    /// Decodes `y` and records intermediates for [`Encoder::decode_backward`].
    pub fn decode_taped(&self, y: &[f64], z: f64, tape: &mut DecodeTape) -> Result<()> {
        self.check_input(y, "decoder input")?;
        self.embed_into(z, &mut tape.embed, &mut tape.zbar);
        tape.blocks.resize_with(self.config.n_blocks, BlockTape::default);
        tape.x.clear();
        tape.x.extend_from_slice(y);
        for b in (0..self.config.n_blocks).rev() {
            let lay = self.layout(b);
            let bp = self.block_params(b, lay);
            coupling::block_inverse(&bp, lay.split, &tape.zbar, &mut tape.x, &mut tape.blocks[b]);
        }
        check_finite(&tape.x, "decoder output")
    }

    /// Reverse pass of [`Encoder::decode_taped`]; returns the gradient
    /// w.r.t. the latent input.
    pub fn decode_backward(&self, tape: &mut DecodeTape, x_bar: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let h = self.config.rffn_hidden;
        let mut bar = x_bar.to_vec();
        let mut zbar_bar = vec![0.0; tape.zbar.len()];
        for b in 0..self.config.n_blocks {
            let lay = self.layout(b);
            let bp = self.block_params(b, lay);
            let nq = lay.split.nq;
            let g = &mut grad[lay.offset..lay.offset + 2 * lay.readout_len(h)];
            let (gsv, rest) = g.split_at_mut(nq * h);
            let (gsb, rest) = rest.split_at_mut(nq);
            let (gtv, gtb) = rest.split_at_mut(nq * h);
            coupling::block_inverse_backward(&bp, lay.split, &mut tape.blocks[b], &mut bar, (gsv, gsb), (gtv, gtb), &mut zbar_bar);
        }
        self.embed_backward(&tape.embed, &zbar_bar, grad);
        bar
    }

    /// Serializes to the versioned JSON container.
    pub fn to_json(&self) -> Result<String> {
        let file = EncoderFile { format: FILE_FORMAT.into(), version: FILE_VERSION, encoder: self.clone() };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: EncoderFile = serde_json::from_str(text)?;
        if file.format != FILE_FORMAT {
            return Err(Error::Format(format!("expected format '{FILE_FORMAT}', found '{}'", file.format)));
        }
        if file.version != FILE_VERSION {
            return Err(Error::Format(format!("unsupported encoder file version {}", file.version)));
        }
        file.encoder.validate_shapes()?;
        Ok(file.encoder)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub(crate) fn validate_shapes(&self) -> Result<()> {
        self.config.validate()?;
        let fail = || Error::Format("encoder arrays do not match the configuration".into());
        if self.frozen.len() != self.config.n_blocks || self.fourier.len() != 2 * self.config.embed_dim() {
            return Err(fail());
        }
        let h = self.config.rffn_hidden;
        for (b, fb) in self.frozen.iter().enumerate() {
            let d = self.config.split(b).np + self.config.embed_dim();
            for net in [&fb.scale, &fb.shift] {
                if net.w.len() != h * d || net.phase.len() != h {
                    return Err(fail());
                }
            }
        }
        if self.theta.len() != self.embed_offset() + self.embed_len() {
            return Err(fail());
        }
        Ok(())
    }
}
