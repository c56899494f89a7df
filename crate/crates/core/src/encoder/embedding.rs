//! Scalar conditioning embedding `z ↦ z̄`: Gaussian Fourier projection to
//! `4·n_e` features followed by a softplus MLP with hidden width `8·n_e`.

use std::f64::consts::PI;

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Shapes of the embedding for output dimension `n_e`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct EmbedShape {
    pub ne: usize,
}

impl EmbedShape {
    pub fn features(self) -> usize {
        4 * self.ne
    }

    pub fn hidden(self) -> usize {
        8 * self.ne
    }

    /// `[A1 (hidden × features), a1, A2 (ne × hidden), a2]`
    pub fn n_params(self) -> usize {
        let (f, h) = (self.features(), self.hidden());
        h * f + h + self.ne * h + self.ne
    }
}

#[derive(Clone, Debug, Default)]
pub(crate) struct EmbedTape {
    g: Vec<f64>,
    pre: Vec<f64>,
    hid: Vec<f64>,
    pub out: Vec<f64>,
}

pub(crate) fn forward(shape: EmbedShape, freqs: &[f64], theta: &[f64], z: f64, tape: &mut EmbedTape) {
    let (f, h, ne) = (shape.features(), shape.hidden(), shape.ne);
    tape.g.clear();
    tape.g.extend(freqs.iter().map(|w| (2.0 * PI * w * z).sin()));
    tape.g.extend(freqs.iter().map(|w| (2.0 * PI * w * z).cos()));
    let (a1, rest) = theta.split_at(h * f);
    let (b1, rest) = rest.split_at(h);
    let (a2, b2) = rest.split_at(ne * h);
    tape.pre.clear();
    tape.pre.extend((0..h).map(|k| b1[k] + dot(&a1[k * f..(k + 1) * f], &tape.g)));
    tape.hid.clear();
    tape.hid.extend(tape.pre.iter().map(|&p| softplus(p)));
    tape.out.clear();
    tape.out.extend((0..ne).map(|o| b2[o] + dot(&a2[o * h..(o + 1) * h], &tape.hid)));
}

pub(crate) fn backward(shape: EmbedShape, theta: &[f64], tape: &EmbedTape, out_bar: &[f64], grad: &mut [f64]) {
    let (f, h, ne) = (shape.features(), shape.hidden(), shape.ne);
    let a2 = &theta[h * f + h..h * f + h + ne * h];
    let mut hid_bar = vec![0.0; h];
    {
        let (_, g_rest) = grad.split_at_mut(h * f + h);
        let (ga2, gb2) = g_rest.split_at_mut(ne * h);
        for o in 0..ne {
            let ob = out_bar[o];
            if ob == 0.0 {
                continue;
            }
            gb2[o] += ob;
            for k in 0..h {
                ga2[o * h + k] += ob * tape.hid[k];
                hid_bar[k] += ob * a2[o * h + k];
            }
        }
    }
    let (ga1, g_rest) = grad.split_at_mut(h * f);
    let gb1 = &mut g_rest[..h];
    for k in 0..h {
        let pb = hid_bar[k] * sigmoid(tape.pre[k]);
        gb1[k] += pb;
        for i in 0..f {
            ga1[k * f + i] += pb * tape.g[i];
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
