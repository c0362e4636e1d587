//! Differentiable layer operations.
//!
//! Every function evaluates eagerly, records a node on the tape and returns
//! its handle. Layouts: dense activations are `[B, F]`, images `[B, C, H, W]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tape::{Backward, Tape, Var};
use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Silu,
    Tanh,
    Gelu,
    Sigmoid,
}

impl Activation {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "relu" => Self::Relu,
            "silu" => Self::Silu,
            "tanh" => Self::Tanh,
            "gelu" => Self::Gelu,
            "sigmoid" => Self::Sigmoid,
            other => return Err(Error::Argument(format!("unknown activation `{other}`"))),
        })
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Self::Relu => x.max(0.0),
            Self::Silu => x * sigmoid(x),
            Self::Tanh => x.tanh(),
            Self::Gelu => 0.5 * x * (1.0 + gelu_inner(x).tanh()),
            Self::Sigmoid => sigmoid(x),
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Self::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Silu => {
                let s = sigmoid(x);
                s * (1.0 + x * (1.0 - s))
            }
            Self::Tanh => 1.0 - x.tanh().powi(2),
            Self::Gelu => {
                let t = gelu_inner(x).tanh();
                let du = GELU_C * (1.0 + 3.0 * 0.044715 * x * x);
                0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
            }
            Self::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
        }
    }
}

// sqrt(2 / pi)
const GELU_C: f64 = 0.797_884_560_802_865_4;

fn gelu_inner(x: f64) -> f64 {
    GELU_C * (x + 0.044715 * x * x * x)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn expect_rank(t: &Tensor, rank: usize, what: &str) -> Result<()> {
    if t.shape().len() != rank {
        return Err(Error::Dimension(format!(
            "{what} expects a rank-{rank} tensor, got shape {:?}",
            t.shape()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------- linear

struct LinearRule;

impl Backward for LinearRule {
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, gy: &[f64]) -> Vec<Option<Vec<f64>>> {
        let (x, w) = (inputs[0], inputs[1]);
        let (b, i, o) = (x.dim(0), x.dim(1), w.dim(1));
        let (xd, wd) = (x.data(), w.data());
        let mut gx = vec![0.0; b * i];
        let mut gw = vec![0.0; i * o];
        let mut gb = vec![0.0; o];
        for r in 0..b {
            let gyr = &gy[r * o..(r + 1) * o];
            for (acc, g) in gb.iter_mut().zip(gyr) {
                *acc += g;
            }
            for k in 0..i {
                let xv = xd[r * i + k];
                let wrow = &wd[k * o..(k + 1) * o];
                let gwrow = &mut gw[k * o..(k + 1) * o];
                let mut s = 0.0;
                for c in 0..o {
                    s += gyr[c] * wrow[c];
                    gwrow[c] += xv * gyr[c];
                }
                gx[r * i + k] = s;
            }
        }
        vec![Some(gx), Some(gw), Some(gb)]
    }
}

/// `y = x W + b` with `x: [B, I]`, `W: [I, O]`, `b: [O]`.
pub fn linear(tape: &mut Tape, x: Var, w: Var, b: Var) -> Result<Var> {
    let (xt, wt, bt) = (tape.value(x), tape.value(w), tape.value(b));
    expect_rank(xt, 2, "linear input")?;
    expect_rank(wt, 2, "linear weight")?;
    if xt.dim(1) != wt.dim(0) || bt.len() != wt.dim(1) {
        return Err(Error::Dimension(format!(
            "linear: input {:?} x weight {:?} + bias {:?}",
            xt.shape(),
            wt.shape(),
            bt.shape()
        )));
    }
    let (bsz, i, o) = (xt.dim(0), xt.dim(1), wt.dim(1));
    let (xd, wd, bd) = (xt.data(), wt.data(), bt.data());
    let mut y = vec![0.0; bsz * o];
    for r in 0..bsz {
        let yr = &mut y[r * o..(r + 1) * o];
        yr.copy_from_slice(bd);
        for k in 0..i {
            let xv = xd[r * i + k];
            if xv == 0.0 {
                continue;
            }
            for (yc, wc) in yr.iter_mut().zip(&wd[k * o..(k + 1) * o]) {
                *yc += xv * wc;
            }
        }
    }
    let out = Tensor::new(vec![bsz, o], y)?;
    Ok(tape.record(out, &[x, w, b], Box::new(LinearRule)))
}

// ---------------------------------------------------------------- conv2d

struct Conv2dRule {
    padding: usize,
}

#[allow(clippy::too_many_arguments)]
fn conv_index(
    oy: usize,
    ox: usize,
    ky: usize,
    kx: usize,
    pad: usize,
    h: usize,
    w: usize,
) -> Option<usize> {
    let iy = (oy + ky).checked_sub(pad)?;
    let ix = (ox + kx).checked_sub(pad)?;
    (iy < h && ix < w).then_some(iy * w + ix)
}

impl Backward for Conv2dRule {
    fn backward(&self, inputs: &[&Tensor], out: &Tensor, gy: &[f64]) -> Vec<Option<Vec<f64>>> {
        let (x, k) = (inputs[0], inputs[1]);
        let [b, c, h, w] = [x.dim(0), x.dim(1), x.dim(2), x.dim(3)];
        let [o, _, kh, kw] = [k.dim(0), k.dim(1), k.dim(2), k.dim(3)];
        let (oh, ow) = (out.dim(2), out.dim(3));
        let (xd, kd) = (x.data(), k.data());
        let mut gx = vec![0.0; xd.len()];
        let mut gk = vec![0.0; kd.len()];
        let mut gb = vec![0.0; o];
        for n in 0..b {
            for oc in 0..o {
                let gplane = &gy[(n * o + oc) * oh * ow..(n * o + oc + 1) * oh * ow];
                gb[oc] += gplane.iter().sum::<f64>();
                for ic in 0..c {
                    let xplane = (n * c + ic) * h * w;
                    let kbase = (oc * c + ic) * kh * kw;
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let kv = kd[kbase + ky * kw + kx];
                            let mut acc = 0.0;
                            for oy in 0..oh {
                                for ox in 0..ow {
                                    if let Some(xi) = conv_index(oy, ox, ky, kx, self.padding, h, w)
                                    {
                                        let g = gplane[oy * ow + ox];
                                        acc += g * xd[xplane + xi];
                                        gx[xplane + xi] += g * kv;
                                    }
                                }
                            }
                            gk[kbase + ky * kw + kx] += acc;
                        }
                    }
                }
            }
        }
        vec![Some(gx), Some(gk), Some(gb)]
    }
}

/// Stride-1 cross-correlation with zero padding.
/// `x: [B, C, H, W]`, `kernels: [O, C, k, k]`, `bias: [O]`.
pub fn conv2d(tape: &mut Tape, x: Var, kernels: Var, bias: Var, padding: usize) -> Result<Var> {
    let (xt, kt, bt) = (tape.value(x), tape.value(kernels), tape.value(bias));
    expect_rank(xt, 4, "conv2d input")?;
    expect_rank(kt, 4, "conv2d kernels")?;
    let [b, c, h, w] = [xt.dim(0), xt.dim(1), xt.dim(2), xt.dim(3)];
    let [o, kc, kh, kw] = [kt.dim(0), kt.dim(1), kt.dim(2), kt.dim(3)];
    if kc != c || bt.len() != o {
        return Err(Error::Dimension(format!(
            "conv2d: input {:?} vs kernels {:?} and bias {:?}",
            xt.shape(),
            kt.shape(),
            bt.shape()
        )));
    }
    let oh = (h + 2 * padding + 1).checked_sub(kh).ok_or_else(|| {
        Error::Dimension(format!("conv2d: kernel {kh} larger than padded input {h}"))
    })?;
    let ow = (w + 2 * padding + 1).checked_sub(kw).ok_or_else(|| {
        Error::Dimension(format!("conv2d: kernel {kw} larger than padded input {w}"))
    })?;
    let (xd, kd, bd) = (xt.data(), kt.data(), bt.data());
    let mut y = vec![0.0; b * o * oh * ow];
    for n in 0..b {
        for oc in 0..o {
            let yplane = &mut y[(n * o + oc) * oh * ow..(n * o + oc + 1) * oh * ow];
            yplane.iter_mut().for_each(|v| *v = bd[oc]);
            for ic in 0..c {
                let xplane = (n * c + ic) * h * w;
                let kbase = (oc * c + ic) * kh * kw;
                for ky in 0..kh {
                    for kx in 0..kw {
                        let kv = kd[kbase + ky * kw + kx];
                        for oy in 0..oh {
                            for ox in 0..ow {
                                if let Some(xi) = conv_index(oy, ox, ky, kx, padding, h, w) {
                                    yplane[oy * ow + ox] += kv * xd[xplane + xi];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    let out = Tensor::new(vec![b, o, oh, ow], y)?;
    Ok(tape.record(out, &[x, kernels, bias], Box::new(Conv2dRule { padding })))
}

// ---------------------------------------------------------------- activation

struct ActivationRule(Activation);

impl Backward for ActivationRule {
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, gy: &[f64]) -> Vec<Option<Vec<f64>>> {
        let g = inputs[0]
            .data()
            .iter()
            .zip(gy)
            .map(|(&x, &g)| g * self.0.derivative(x))
            .collect();
        vec![Some(g)]
    }
}

pub fn activation(tape: &mut Tape, x: Var, kind: Activation) -> Var {
    let xt = tape.value(x);
    let y: Vec<f64> = xt.data().iter().map(|&v| kind.apply(v)).collect();
    let out = Tensor::new(xt.shape().to_vec(), y).expect("same shape");
    tape.record(out, &[x], Box::new(ActivationRule(kind)))
}

// ---------------------------------------------------------------- batchnorm

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Running statistics of a batch-norm layer (not trainable).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNormState {
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

impl BatchNormState {
    pub fn new(features: usize) -> Self {
        Self {
            running_mean: vec![0.0; features],
            running_var: vec![1.0; features],
        }
    }
}

/// Per-feature layout: `[B, F]` (1-D) or `[B, C, H, W]` (2-D, per channel).
fn bn_layout(x: &Tensor) -> Result<(usize, usize, usize)> {
    match x.shape().len() {
        2 => Ok((x.dim(0), x.dim(1), 1)),
        4 => Ok((x.dim(0), x.dim(1), x.dim(2) * x.dim(3))),
        _ => Err(Error::Dimension(format!(
            "batchnorm expects [B, F] or [B, C, H, W], got {:?}",
            x.shape()
        ))),
    }
}

struct BatchNormRule {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
    train: bool,
}

impl Backward for BatchNormRule {
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, gy: &[f64]) -> Vec<Option<Vec<f64>>> {
        let (x, gamma) = (inputs[0], inputs[1]);
        let (b, f, s) = bn_layout(x).expect("validated in forward");
        let n = (b * s) as f64;
        let gd = gamma.data();
        let mut gx = vec![0.0; x.len()];
        let mut gg = vec![0.0; f];
        let mut gb = vec![0.0; f];
        let at = |i: usize, j: usize, k: usize| (i * f + j) * s + k;
        for j in 0..f {
            let (mut sum_g, mut sum_gx) = (0.0, 0.0);
            for i in 0..b {
                for k in 0..s {
                    let idx = at(i, j, k);
                    sum_g += gy[idx];
                    sum_gx += gy[idx] * self.xhat[idx];
                }
            }
            gg[j] = sum_gx;
            gb[j] = sum_g;
            let scale = gd[j] * self.inv_std[j];
            for i in 0..b {
                for k in 0..s {
                    let idx = at(i, j, k);
                    gx[idx] = if self.train {
                        scale * (gy[idx] - sum_g / n - self.xhat[idx] * sum_gx / n)
                    } else {
                        scale * gy[idx]
                    };
                }
            }
        }
        vec![Some(gx), Some(gg), Some(gb)]
    }
}

/// Batch normalization over the batch (and spatial) axes.
///
/// Train mode normalizes with the biased batch variance and updates the
/// running statistics (unbiased variance, momentum 0.1); eval mode uses the
/// running statistics only.
pub fn batchnorm(
    tape: &mut Tape,
    x: Var,
    gamma: Var,
    beta: Var,
    state: &mut BatchNormState,
    mode: Mode,
) -> Result<Var> {
    let xt = tape.value(x);
    let (b, f, s) = bn_layout(xt)?;
    if tape.value(gamma).len() != f || state.running_mean.len() != f {
        return Err(Error::Dimension(format!(
            "batchnorm over {f} features with gamma of {}",
            tape.value(gamma).len()
        )));
    }
    if mode == Mode::Train && b < 2 {
        return Err(Error::DegenerateBatch(b));
    }
    let xd = xt.data();
    let (gd, bd) = (tape.value(gamma).data(), tape.value(beta).data());
    let n = b * s;
    let at = |i: usize, j: usize, k: usize| (i * f + j) * s + k;
    let mut mean = vec![0.0; f];
    let mut var = vec![0.0; f];
    match mode {
        Mode::Train => {
            for j in 0..f {
                let mut acc = 0.0;
                for i in 0..b {
                    for k in 0..s {
                        acc += xd[at(i, j, k)];
                    }
                }
                mean[j] = acc / n as f64;
                let mut sq = 0.0;
                for i in 0..b {
                    for k in 0..s {
                        sq += (xd[at(i, j, k)] - mean[j]).powi(2);
                    }
                }
                var[j] = sq / n as f64;
                let unbiased = sq / (n - 1) as f64;
                state.running_mean[j] =
                    (1.0 - BN_MOMENTUM) * state.running_mean[j] + BN_MOMENTUM * mean[j];
                state.running_var[j] =
                    (1.0 - BN_MOMENTUM) * state.running_var[j] + BN_MOMENTUM * unbiased;
            }
        }
        Mode::Eval => {
            mean.copy_from_slice(&state.running_mean);
            var.copy_from_slice(&state.running_var);
        }
    }
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
    let mut xhat = vec![0.0; xd.len()];
    let mut y = vec![0.0; xd.len()];
    for i in 0..b {
        for j in 0..f {
            for k in 0..s {
                let idx = at(i, j, k);
                xhat[idx] = (xd[idx] - mean[j]) * inv_std[j];
                y[idx] = gd[j] * xhat[idx] + bd[j];
            }
        }
    }
    let out = Tensor::new(xt.shape().to_vec(), y)?;
    let rule = BatchNormRule {
        xhat,
        inv_std,
        train: mode == Mode::Train,
    };
    Ok(tape.record(out, &[x, gamma, beta], Box::new(rule)))
}

// ---------------------------------------------------------------- dropout

struct ScaleMaskRule(Vec<f64>);

impl Backward for ScaleMaskRule {
    fn backward(&self, _: &[&Tensor], _: &Tensor, gy: &[f64]) -> Vec<Option<Vec<f64>>> {
        vec![Some(gy.iter().zip(&self.0).map(|(g, m)| g * m).collect())]
    }
}

/// Inverted dropout. Eval mode and `p = 0` are the identity.
pub fn dropout<R: Rng + ?Sized>(
    tape: &mut Tape,
    x: Var,
    p: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<Var> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidRate(p));
    }
    if mode == Mode::Eval || p == 0.0 {
        return Ok(x);
    }
    let xt = tape.value(x);
    let keep = 1.0 / (1.0 - p);
    let mask: Vec<f64> = (0..xt.len())
        .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
        .collect();
    let y = xt.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
    let out = Tensor::new(xt.shape().to_vec(), y)?;
    Ok(tape.record(out, &[x], Box::new(ScaleMaskRule(mask))))
}

// ---------------------------------------------------------------- pooling

struct MaxPoolRule {
    argmax: Vec<usize>,
}

impl Backward for MaxPoolRule {
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, gy: &[f64]) -> Vec<Option<Vec<f64>>> {
        let mut gx = vec![0.0; inputs[0].len()];
        for (&src, g) in self.argmax.iter().zip(gy) {
            gx[src] += g;
        }
        vec![Some(gx)]
    }
}

/// 2x2 max pooling with stride 2 (trailing odd rows/columns dropped).
pub fn max_pool2x2(tape: &mut Tape, x: Var) -> Result<Var> {
    let xt = tape.value(x);
    expect_rank(xt, 4, "max_pool2x2")?;
    let [b, c, h, w] = [xt.dim(0), xt.dim(1), xt.dim(2), xt.dim(3)];
    if h < 2 || w < 2 {
        return Err(Error::Dimension(format!(
            "max_pool2x2 needs spatial dims >= 2, got {h}x{w}"
        )));
    }
    let (oh, ow) = (h / 2, w / 2);
    let xd = xt.data();
    let mut y = Vec::with_capacity(b * c * oh * ow);
    let mut argmax = Vec::with_capacity(b * c * oh * ow);
    for plane in 0..b * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + 2 * oy * w + 2 * ox;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = base + (2 * oy + dy) * w + 2 * ox + dx;
                    if xd[idx] > xd[best] {
                        best = idx;
                    }
                }
                y.push(xd[best]);
                argmax.push(best);
            }
        }
    }
    let out = Tensor::new(vec![b, c, oh, ow], y)?;
    Ok(tape.record(out, &[x], Box::new(MaxPoolRule { argmax })))
}

struct AvgPoolRule;

impl Backward for AvgPoolRule {
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, gy: &[f64]) -> Vec<Option<Vec<f64>>> {
        let x = inputs[0];
        let s = x.dim(2) * x.dim(3);
        let gx = (0..x.len()).map(|i| gy[i / s] / s as f64).collect();
        vec![Some(gx)]
    }
}

/// Adaptive average pooling to 1x1, flattened: `[B, C, H, W] -> [B, C]`.
pub fn adaptive_avg_pool(tape: &mut Tape, x: Var) -> Result<Var> {
    let xt = tape.value(x);
    expect_rank(xt, 4, "adaptive_avg_pool")?;
    let (b, c, s) = (xt.dim(0), xt.dim(1), xt.dim(2) * xt.dim(3));
    if s == 0 {
        return Err(Error::Dimension(
            "adaptive_avg_pool on empty spatial dims".into(),
        ));
    }
    let y = xt
        .data()
        .chunks(s)
        .map(|p| p.iter().sum::<f64>() / s as f64)
        .collect();
    let out = Tensor::new(vec![b, c], y)?;
    Ok(tape.record(out, &[x], Box::new(AvgPoolRule)))
}

// ---------------------------------------------------------------- shape ops

struct ConcatRule {
    widths: (usize, usize),
}

impl Backward for ConcatRule {
    fn backward(&self, _: &[&Tensor], _: &Tensor, gy: &[f64]) -> Vec<Option<Vec<f64>>> {
        let (a, b) = self.widths;
        let (mut ga, mut gb) = (Vec::new(), Vec::new());
        for row in gy.chunks(a + b) {
            ga.extend_from_slice(&row[..a]);
            gb.extend_from_slice(&row[a..]);
        }
        vec![Some(ga), Some(gb)]
    }
}

/// Feature-axis concatenation of `[B, A]` and `[B, C]`.
pub fn concat(tape: &mut Tape, a: Var, b: Var) -> Result<Var> {
    let (at, bt) = (tape.value(a), tape.value(b));
    expect_rank(at, 2, "concat")?;
    expect_rank(bt, 2, "concat")?;
    if at.dim(0) != bt.dim(0) {
        return Err(Error::Dimension(format!(
            "concat: batch {:?} vs {:?}",
            at.shape(),
            bt.shape()
        )));
    }
    let (wa, wb) = (at.dim(1), bt.dim(1));
    let mut y = Vec::with_capacity(at.len() + bt.len());
    for r in 0..at.dim(0) {
        y.extend_from_slice(at.row(r));
        y.extend_from_slice(bt.row(r));
    }
    let out = Tensor::new(vec![at.dim(0), wa + wb], y)?;
    Ok(tape.record(out, &[a, b], Box::new(ConcatRule { widths: (wa, wb) })))
}

struct PassRule;

impl Backward for PassRule {
    fn backward(&self, _: &[&Tensor], _: &Tensor, gy: &[f64]) -> Vec<Option<Vec<f64>>> {
        vec![Some(gy.to_vec())]
    }
}

pub fn reshape(tape: &mut Tape, x: Var, shape: Vec<usize>) -> Result<Var> {
    let out = tape.value(x).reshaped(shape)?;
    Ok(tape.record(out, &[x], Box::new(PassRule)))
}

struct SumRule;

impl Backward for SumRule {
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, gy: &[f64]) -> Vec<Option<Vec<f64>>> {
        vec![Some(vec![gy[0]; inputs[0].len()])]
    }
}

/// Sum of all elements, as a scalar.
pub fn sum(tape: &mut Tape, x: Var) -> Var {
    let s = tape.value(x).data().iter().sum();
    tape.record(Tensor::scalar(s), &[x], Box::new(SumRule))
}

struct WeightedSumRule(Vec<f64>);

impl Backward for WeightedSumRule {
    fn backward(&self, _: &[&Tensor], _: &Tensor, gy: &[f64]) -> Vec<Option<Vec<f64>>> {
        vec![Some(self.0.iter().map(|w| w * gy[0]).collect())]
    }
}

/// `sum(w * x)` for a fixed weight vector; handy for probing gradients.
pub fn weighted_sum(tape: &mut Tape, x: Var, weights: Vec<f64>) -> Result<Var> {
    let xt = tape.value(x);
    if weights.len() != xt.len() {
        return Err(Error::Dimension(format!(
            "weighted_sum: {} weights for {} values",
            weights.len(),
            xt.len()
        )));
    }
    let s = xt.data().iter().zip(&weights).map(|(a, b)| a * b).sum();
    Ok(tape.record(Tensor::scalar(s), &[x], Box::new(WeightedSumRule(weights))))
}

// ---------------------------------------------------------------- loss

/// Row-wise softmax, stabilized by subtracting the row maximum.
pub fn softmax_rows(logits: &Tensor) -> Vec<f64> {
    let k = logits.dim(1);
    let mut p = Vec::with_capacity(logits.len());
    for row in logits.data().chunks(k) {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
        let z: f64 = e.iter().sum();
        p.extend(e.iter().map(|v| v / z));
    }
    p
}

struct SoftmaxCeRule {
    probs: Vec<f64>,
    labels: Vec<usize>,
}

impl Backward for SoftmaxCeRule {
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, gy: &[f64]) -> Vec<Option<Vec<f64>>> {
        let k = inputs[0].dim(1);
        let b = self.labels.len() as f64;
        let mut g = self.probs.clone();
        for (r, &l) in self.labels.iter().enumerate() {
            g[r * k + l] -= 1.0;
        }
        g.iter_mut().for_each(|v| *v *= gy[0] / b);
        vec![Some(g)]
    }
}

/// Mean cross-entropy of `logits: [B, K]` against class indices.
pub fn softmax_cross_entropy(tape: &mut Tape, logits: Var, labels: &[usize]) -> Result<Var> {
    let lt = tape.value(logits);
    expect_rank(lt, 2, "softmax_cross_entropy")?;
    let (b, k) = (lt.dim(0), lt.dim(1));
    if labels.len() != b {
        return Err(Error::Dimension(format!(
            "{} labels for a batch of {b}",
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::Label {
            label: bad,
            classes: k,
        });
    }
    let mut loss = 0.0;
    for (r, &l) in labels.iter().enumerate() {
        let row = lt.row(r);
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss += lse - row[l];
    }
    let probs = softmax_rows(lt);
    let rule = SoftmaxCeRule {
        probs,
        labels: labels.to_vec(),
    };
    Ok(tape.record(Tensor::scalar(loss / b as f64), &[logits], Box::new(rule)))
}
