//! Affine coupling blocks with random-Fourier-feature scale and translation
//! nets, forward-mode tangents, and hand-derived reverse passes.
//!
//! A block keeps the passive coordinates `p` and maps the active ones `q`:
//!
//! ```text
//! χ'_q = χ_q ⊙ exp(s(u)) + t(u),    u = [χ_p, z̄]
//! s(u) = C·tanh(o_s(u)/C),          o_k(u) = V_k √(2/H)·cos(W_k u + φ_k) + b_k
//! ```
//!
//! `W_k`, `φ_k` are frozen; `V_k`, `b_k` are trained. Features carry the
//! usual `√(2/H)` random-Fourier-feature normalization. Tangents `T = ∂χ/∂x`
//! are propagated alongside so that the reverse pass can also carry
//! gradients of the encoder Jacobian itself.

use serde::{Deserialize, Serialize};

use super::embedding::dot;

/// Frozen random features of one scale or translation net.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrozenNet {
    /// `hidden × input` row-major.
    pub w: Vec<f64>,
    pub phase: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrozenBlock {
    pub scale: FrozenNet,
    pub shift: FrozenNet,
}

/// Index geometry of one block.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Split {
    pub p0: usize,
    pub np: usize,
    pub q0: usize,
    pub nq: usize,
}

/// Trained readout of one net: `V` (`nq × hidden`) then `b` (`nq`).
pub(crate) struct Readout<'a> {
    pub v: &'a [f64],
    pub b: &'a [f64],
}

#[derive(Clone, Debug, Default)]
pub(crate) struct NetTape {
    sin: Vec<f64>,
    cos: Vec<f64>,
    pub out: Vec<f64>,
    dh: Vec<f64>,
    dc: Vec<f64>,
    pub dout: Vec<f64>,
    c_bar: Vec<f64>,
    dc_bar: Vec<f64>,
    h_bar: Vec<f64>,
}

/// Evaluates `o = V cos(W u + φ) + b` and, with `tan` (rows of `∂u_p/∂x`,
/// `np × n`), its tangent `∂o/∂x`.
pub(crate) fn net_forward(fz: &FrozenNet, ro: &Readout, u: &[f64], tan: Option<&[f64]>, n: usize, nt: &mut NetTape) {
    let h = fz.phase.len();
    let d = u.len();
    let nq = ro.b.len();
    let norm = (2.0 / h as f64).sqrt();
    nt.sin.resize(h, 0.0);
    nt.cos.resize(h, 0.0);
    for k in 0..h {
        let hk = fz.phase[k] + dot(&fz.w[k * d..(k + 1) * d], u);
        let (s, c) = hk.sin_cos();
        nt.sin[k] = norm * s;
        nt.cos[k] = norm * c;
    }
    nt.out.resize(nq, 0.0);
    for a in 0..nq {
        nt.out[a] = ro.b[a] + dot(&ro.v[a * h..(a + 1) * h], &nt.cos);
    }
    if let Some(tp) = tan {
        let np = tp.len() / n;
        nt.dh.resize(h * n, 0.0);
        nt.dc.resize(h * n, 0.0);
        for k in 0..h {
            let wrow = &fz.w[k * d..k * d + np];
            for j in 0..n {
                let mut acc = 0.0;
                for i in 0..np {
                    acc += wrow[i] * tp[i * n + j];
                }
                nt.dh[k * n + j] = acc;
                nt.dc[k * n + j] = -nt.sin[k] * acc;
            }
        }
        nt.dout.clear();
        nt.dout.resize(nq * n, 0.0);
        for a in 0..nq {
            let vrow = &ro.v[a * h..(a + 1) * h];
            let drow = &mut nt.dout[a * n..(a + 1) * n];
            for k in 0..h {
                let vk = vrow[k];
                if vk == 0.0 {
                    continue;
                }
                for j in 0..n {
                    drow[j] += vk * nt.dc[k * n + j];
                }
            }
        }
    }
}

/// Reverse of [`net_forward`]. Accumulates readout gradients into
/// `gv`/`gb`, input gradients into `u_bar`, and (with tangents) the
/// gradient of the passive tangent rows into `tp_bar`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn net_backward(
    fz: &FrozenNet,
    ro: &Readout,
    nt: &mut NetTape,
    d: usize,
    n: usize,
    o_bar: &[f64],
    do_bar: Option<&[f64]>,
    gv: &mut [f64],
    gb: &mut [f64],
    u_bar: &mut [f64],
    tp_bar: Option<&mut [f64]>,
) {
    let h = fz.phase.len();
    let nq = ro.b.len();
    nt.c_bar.clear();
    nt.c_bar.resize(h, 0.0);
    for a in 0..nq {
        let ob = o_bar[a];
        gb[a] += ob;
        let vrow = &ro.v[a * h..(a + 1) * h];
        let grow = &mut gv[a * h..(a + 1) * h];
        for k in 0..h {
            grow[k] += ob * nt.cos[k];
            nt.c_bar[k] += vrow[k] * ob;
        }
    }
    nt.h_bar.clear();
    nt.h_bar.extend((0..h).map(|k| -nt.sin[k] * nt.c_bar[k]));

    if let (Some(dob), Some(tpb)) = (do_bar, tp_bar) {
        nt.dc_bar.clear();
        nt.dc_bar.resize(h * n, 0.0);
        for a in 0..nq {
            let vrow = &ro.v[a * h..(a + 1) * h];
            let grow = &mut gv[a * h..(a + 1) * h];
            let dbrow = &dob[a * n..(a + 1) * n];
            if dbrow.iter().all(|&x| x == 0.0) {
                continue;
            }
            for k in 0..h {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += dbrow[j] * nt.dc[k * n + j];
                    nt.dc_bar[k * n + j] += vrow[k] * dbrow[j];
                }
                grow[k] += acc;
            }
        }
        let np = tpb.len() / n;
        for k in 0..h {
            let mut cross = 0.0;
            for j in 0..n {
                cross += nt.dc_bar[k * n + j] * nt.dh[k * n + j];
            }
            nt.h_bar[k] -= nt.cos[k] * cross;
            let s = nt.sin[k];
            let wrow = &fz.w[k * d..k * d + np];
            for j in 0..n {
                let dhb = -s * nt.dc_bar[k * n + j];
                if dhb == 0.0 {
                    continue;
                }
                for i in 0..np {
                    tpb[i * n + j] += wrow[i] * dhb;
                }
            }
        }
    }

    for k in 0..h {
        let hb = nt.h_bar[k];
        if hb == 0.0 {
            continue;
        }
        let wrow = &fz.w[k * d..(k + 1) * d];
        for i in 0..d {
            u_bar[i] += wrow[i] * hb;
        }
    }
}

/// Intermediate values of one block, for the reverse pass.
#[derive(Clone, Debug, Default)]
pub(crate) struct BlockTape {
    /// Block input `χ` (encode) or reconstructed output `χ` (decode).
    pub x: Vec<f64>,
    /// Input tangent `∂χ/∂x`, `n × n` row-major (encode with tangents only).
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    pub scale: NetTape,
    pub shift: NetTape,
    pub tau: Vec<f64>,
    pub e: Vec<f64>,
    ds: Vec<f64>,
    scratch_u: Vec<f64>,
}

pub(crate) struct BlockParams<'a> {
    pub frozen: &'a FrozenBlock,
    pub scale: Readout<'a>,
    pub shift: Readout<'a>,
    pub clamp: f64,
}

fn fill_u(u: &mut Vec<f64>, passive: &[f64], zbar: &[f64]) {
    u.clear();
    u.extend_from_slice(passive);
    u.extend_from_slice(zbar);
}

fn scale_from_raw(bt: &mut BlockTape, clamp: f64) {
    bt.tau.clear();
    bt.tau.extend(bt.scale.out.iter().map(|o| (o / clamp).tanh()));
    bt.e.clear();
    bt.e.extend(bt.tau.iter().map(|t| (clamp * t).exp()));
}

/// Forward block in the encoding direction. `x`/`t` are updated in place.
pub(crate) fn block_forward(
    bp: &BlockParams,
    sp: Split,
    n: usize,
    zbar: &[f64],
    x: &mut [f64],
    t: Option<&mut [f64]>,
    bt: &mut BlockTape,
) {
    bt.x.clear();
    bt.x.extend_from_slice(x);
    fill_u(&mut bt.u, &x[sp.p0..sp.p0 + sp.np], zbar);
    let tan = t.as_ref().map(|t| &t[sp.p0 * n..(sp.p0 + sp.np) * n]);
    if let Some(tv) = t.as_ref() {
        bt.t.clear();
        bt.t.extend_from_slice(tv);
    }
    net_forward(&bp.frozen.scale, &bp.scale, &bt.u, tan, n, &mut bt.scale);
    net_forward(&bp.frozen.shift, &bp.shift, &bt.u, tan, n, &mut bt.shift);
    scale_from_raw(bt, bp.clamp);
    for a in 0..sp.nq {
        let qi = sp.q0 + a;
        x[qi] = bt.x[qi] * bt.e[a] + bt.shift.out[a];
    }
    if let Some(tv) = t {
        bt.ds.resize(sp.nq * n, 0.0);
        for a in 0..sp.nq {
            let qi = sp.q0 + a;
            let sig = 1.0 - bt.tau[a] * bt.tau[a];
            let (e, xq) = (bt.e[a], bt.x[qi]);
            for j in 0..n {
                let ds = sig * bt.scale.dout[a * n + j];
                bt.ds[a * n + j] = ds;
                tv[qi * n + j] = e * bt.t[qi * n + j] + xq * e * ds + bt.shift.dout[a * n + j];
            }
        }
    }
}

/// Reverse of [`block_forward`]. On entry `x_bar`/`t_bar` hold gradients
/// w.r.t. the block output; on exit, w.r.t. the block input.
#[allow(clippy::too_many_arguments)]
pub(crate) fn block_backward(
    bp: &BlockParams,
    sp: Split,
    n: usize,
    bt: &mut BlockTape,
    x_bar: &mut [f64],
    mut t_bar: Option<&mut [f64]>,
    g_scale: (&mut [f64], &mut [f64]),
    g_shift: (&mut [f64], &mut [f64]),
    zbar_bar: &mut [f64],
) {
    let nq = sp.nq;
    let tangent = t_bar.is_some();
    let mut o_s = vec![0.0; nq];
    let mut o_t = vec![0.0; nq];
    let (mut do_s, mut do_t) = if tangent {
        (vec![0.0; nq * n], vec![0.0; nq * n])
    } else {
        (Vec::new(), Vec::new())
    };
    for a in 0..nq {
        let qi = sp.q0 + a;
        let (e, xq, tau) = (bt.e[a], bt.x[qi], bt.tau[a]);
        let sig = 1.0 - tau * tau;
        let xb = x_bar[qi];
        let mut e_bar = xb * xq;
        let mut g = 0.0;
        let mut ds_dot = 0.0;
        if let Some(tb) = t_bar.as_deref_mut() {
            for j in 0..n {
                let tbo = tb[qi * n + j];
                g += tbo * bt.ds[a * n + j];
                e_bar += tbo * bt.t[qi * n + j];
                let dsb = xq * e * tbo;
                ds_dot += dsb * bt.scale.dout[a * n + j];
                do_s[a * n + j] = sig * dsb;
                do_t[a * n + j] = tbo;
                tb[qi * n + j] = e * tbo;
            }
            e_bar += g * xq;
        }
        let s_bar = e_bar * e;
        o_s[a] = s_bar * sig + ds_dot * (-2.0 * tau * sig / bp.clamp);
        o_t[a] = xb;
        x_bar[qi] = (xb + g) * e;
    }

    let d = bt.u.len();
    bt.scratch_u.clear();
    bt.scratch_u.resize(d, 0.0);
    let mut u_bar = std::mem::take(&mut bt.scratch_u);
    {
        let tp_bar = t_bar.as_deref_mut().map(|tb| &mut tb[sp.p0 * n..(sp.p0 + sp.np) * n]);
        let (do_s_opt, do_t_opt) = if tangent {
            (Some(do_s.as_slice()), Some(do_t.as_slice()))
        } else {
            (None, None)
        };
        match tp_bar {
            Some(tpb) => {
                net_backward(&bp.frozen.scale, &bp.scale, &mut bt.scale, d, n, &o_s, do_s_opt, g_scale.0, g_scale.1, &mut u_bar, Some(&mut *tpb));
                net_backward(&bp.frozen.shift, &bp.shift, &mut bt.shift, d, n, &o_t, do_t_opt, g_shift.0, g_shift.1, &mut u_bar, Some(tpb));
            }
            None => {
                net_backward(&bp.frozen.scale, &bp.scale, &mut bt.scale, d, n, &o_s, None, g_scale.0, g_scale.1, &mut u_bar, None);
                net_backward(&bp.frozen.shift, &bp.shift, &mut bt.shift, d, n, &o_t, None, g_shift.0, g_shift.1, &mut u_bar, None);
            }
        }
    }
    for i in 0..sp.np {
        x_bar[sp.p0 + i] += u_bar[i];
    }
    for (zb, ub) in zbar_bar.iter_mut().zip(&u_bar[sp.np..]) {
        *zb += ub;
    }
    bt.scratch_u = u_bar;
}

/// Inverse block: `χ_q = (χ'_q − t) ⊙ exp(−s)`, updating `x` in place.
pub(crate) fn block_inverse(bp: &BlockParams, sp: Split, zbar: &[f64], x: &mut [f64], bt: &mut BlockTape) {
    fill_u(&mut bt.u, &x[sp.p0..sp.p0 + sp.np], zbar);
    net_forward(&bp.frozen.scale, &bp.scale, &bt.u, None, 0, &mut bt.scale);
    net_forward(&bp.frozen.shift, &bp.shift, &bt.u, None, 0, &mut bt.shift);
    scale_from_raw(bt, bp.clamp);
    for a in 0..sp.nq {
        let qi = sp.q0 + a;
        x[qi] = (x[qi] - bt.shift.out[a]) / bt.e[a];
    }
    bt.x.clear();
    bt.x.extend_from_slice(x);
}

/// Reverse of [`block_inverse`]: `x_bar` enters as the gradient w.r.t. the
/// reconstructed `χ` and leaves as the gradient w.r.t. `χ'`.
pub(crate) fn block_inverse_backward(
    bp: &BlockParams,
    sp: Split,
    bt: &mut BlockTape,
    x_bar: &mut [f64],
    g_scale: (&mut [f64], &mut [f64]),
    g_shift: (&mut [f64], &mut [f64]),
    zbar_bar: &mut [f64],
) {
    let nq = sp.nq;
    let mut o_s = vec![0.0; nq];
    let mut o_t = vec![0.0; nq];
    for a in 0..nq {
        let qi = sp.q0 + a;
        let (e, tau) = (bt.e[a], bt.tau[a]);
        let xb = x_bar[qi];
        let s_bar = -xb * bt.x[qi];
        o_s[a] = s_bar * (1.0 - tau * tau);
        o_t[a] = -xb / e;
        x_bar[qi] = xb / e;
    }
    let d = bt.u.len();
    bt.scratch_u.clear();
    bt.scratch_u.resize(d, 0.0);
    let mut u_bar = std::mem::take(&mut bt.scratch_u);
    net_backward(&bp.frozen.scale, &bp.scale, &mut bt.scale, d, 0, &o_s, None, g_scale.0, g_scale.1, &mut u_bar, None);
    net_backward(&bp.frozen.shift, &bp.shift, &mut bt.shift, d, 0, &o_t, None, g_shift.0, g_shift.1, &mut u_bar, None);
    for i in 0..sp.np {
        x_bar[sp.p0 + i] += u_bar[i];
    }
    for (zb, ub) in zbar_bar.iter_mut().zip(&u_bar[sp.np..]) {
        *zb += ub;
    }
    bt.scratch_u = u_bar;
}
