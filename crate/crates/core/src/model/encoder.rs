//! Learnable phase encoding `theta_i = act(x_i * s_i + b_i) * pi`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::ops::sigmoid;
use crate::tensor::{Backward, Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseActivation {
    Sigmoid,
    Tanh,
    Clamp,
}

impl PhaseActivation {
    /// Phase in `[0, pi]` for pre-activation `u`.
    pub fn phase(self, u: f64) -> f64 {
        match self {
            Self::Sigmoid => sigmoid(u) * PI,
            Self::Tanh => (u.tanh() + 1.0) * 0.5 * PI,
            Self::Clamp => u.clamp(0.0, 1.0) * PI,
        }
    }

    /// `d phase / d u`; zero where the clamp saturates.
    pub fn slope(self, u: f64) -> f64 {
        match self {
            Self::Sigmoid => {
                let s = sigmoid(u);
                s * (1.0 - s) * PI
            }
            Self::Tanh => (1.0 - u.tanh().powi(2)) * 0.5 * PI,
            Self::Clamp => {
                if u > 0.0 && u < 1.0 {
                    PI
                } else {
                    0.0
                }
            }
        }
    }
}

struct EncodeRule {
    act: PhaseActivation,
    pre: Vec<f64>,
    has_bias: bool,
}

impl Backward for EncodeRule {
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, gy: &[f64]) -> Vec<Option<Vec<f64>>> {
        let (x, s) = (inputs[0], inputs[1]);
        let d = s.len();
        let mut gx = vec![0.0; x.len()];
        let mut gs = vec![0.0; d];
        let mut gb = vec![0.0; d];
        for (i, ((g, u), xv)) in gy.iter().zip(&self.pre).zip(x.data()).enumerate() {
            let j = i % d;
            let gu = g * self.act.slope(*u);
            gx[i] = gu * s.data()[j];
            gs[j] += gu * xv;
            gb[j] += gu;
        }
        let mut out = vec![Some(gx), Some(gs)];
        if self.has_bias {
            out.push(Some(gb));
        }
        out
    }
}

/// Encodes `x: [B, d]` with per-feature `scale: [d]` and optional `bias: [d]`.
pub fn phase_encode(
    tape: &mut Tape,
    x: Var,
    scale: Var,
    bias: Option<Var>,
    act: PhaseActivation,
) -> Result<Var> {
    let (xt, st) = (tape.value(x), tape.value(scale));
    let d = st.len();
    if xt.shape().len() != 2 || xt.dim(1) != d || bias.is_some_and(|b| tape.value(b).len() != d) {
        return Err(Error::Dimension(format!(
            "phase encoder of width {d} applied to {:?}",
            xt.shape()
        )));
    }
    let bd = bias.map(|b| tape.value(b).data().to_vec());
    let pre: Vec<f64> = xt
        .data()
        .iter()
        .enumerate()
        .map(|(i, v)| v * st.data()[i % d] + bd.as_ref().map_or(0.0, |b| b[i % d]))
        .collect();
    let theta = pre.iter().map(|&u| act.phase(u)).collect();
    let out = Tensor::new(xt.shape().to_vec(), theta)?;
    let mut inputs = vec![x, scale];
    inputs.extend(bias);
    let rule = EncodeRule {
        act,
        pre,
        has_bias: bias.is_some(),
    };
    Ok(tape.record(out, &inputs, Box::new(rule)))
}
