//! Small fully connected networks with LeakyReLU hidden layers.
//!
//! Used for the learned angular-velocity map `f_ω` and the speed-scale map
//! `f_s`. Parameters live in one flat vector so they can be concatenated
//! with the encoder weights for optimization.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const LEAKY_SLOPE: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    theta: Vec<f64>,
}

/// Activations recorded by [`Mlp::forward_cached`].
#[derive(Clone, Debug, Default)]
pub struct MlpCache {
    // pre-activations per layer, and the layer inputs
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl Mlp {
    /// Network with layer widths `sizes` (input first, output last),
    /// PyTorch-style uniform initialization.
    pub fn new(sizes: &[usize], seed: u64) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidParameter(format!("bad MLP sizes {sizes:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut theta = Vec::new();
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for _ in 0..(w[0] * w[1] + w[1]) {
                theta.push(rng.random_range(-bound..bound));
            }
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            theta,
        })
    }

    /// Same architecture with every parameter zero; outputs are identically 0.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        let mut m = Self::new(sizes, 0)?;
        m.theta.iter_mut().for_each(|t| *t = 0.0);
        Ok(m)
    }

    /// Zeroes the final layer so the network starts at a constant 0 output.
    pub fn zero_output_layer(&mut self) {
        let l = self.sizes.len() - 2;
        let off = self.layer_offset(l);
        let (i, o) = (self.sizes[l], self.sizes[l + 1]);
        self.theta[off..off + i * o + o].iter_mut().for_each(|t| *t = 0.0);
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn params(&self) -> &[f64] {
        &self.theta
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn n_params(&self) -> usize {
        self.theta.len()
    }

    fn layer_offset(&self, layer: usize) -> usize {
        self.sizes
            .windows(2)
            .take(layer)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut cache = MlpCache::default();
        self.forward_cached(x, &mut cache)
    }

    pub fn forward_cached(&self, x: &[f64], cache: &mut MlpCache) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.sizes[0]);
        let layers = self.sizes.len() - 1;
        cache.inputs.clear();
        cache.pre.clear();
        let mut act = x.to_vec();
        let mut off = 0;
        for l in 0..layers {
            let (ni, no) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.theta[off..off + ni * no];
            let b = &self.theta[off + ni * no..off + ni * no + no];
            off += ni * no + no;
            let pre: Vec<f64> = (0..no)
                .map(|o| b[o] + w[o * ni..(o + 1) * ni].iter().zip(&act).map(|(a, c)| a * c).sum::<f64>())
                .collect();
            cache.inputs.push(std::mem::take(&mut act));
            act = if l + 1 < layers {
                pre.iter().map(|&p| if p > 0.0 { p } else { LEAKY_SLOPE * p }).collect()
            } else {
                pre.clone()
            };
            cache.pre.push(pre);
        }
        act
    }

    /// Reverse pass: accumulates parameter gradients into `grad` (same
    /// layout as [`Mlp::params`]) and returns the gradient w.r.t. the input.
    pub fn backward(&self, cache: &MlpCache, grad_out: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let layers = self.sizes.len() - 1;
        let mut g = grad_out.to_vec();
        for l in (0..layers).rev() {
            let (ni, no) = (self.sizes[l], self.sizes[l + 1]);
            if l + 1 < layers {
                for (gi, &p) in g.iter_mut().zip(&cache.pre[l]) {
                    if p <= 0.0 {
                        *gi *= LEAKY_SLOPE;
                    }
                }
            }
            let off = self.layer_offset(l);
            let input = &cache.inputs[l];
            let w = &self.theta[off..off + ni * no];
            let mut g_in = vec![0.0; ni];
            for o in 0..no {
                let go = g[o];
                let row = off + o * ni;
                for i in 0..ni {
                    grad[row + i] += go * input[i];
                    g_in[i] += go * w[o * ni + i];
                }
                grad[off + ni * no + o] += go;
            }
            g = g_in;
        }
        g
    }
}
