use serde::{Deserialize, Serialize};

use super::encoder::PhaseActivation;
use crate::data::NUM_CLASSES;
use crate::error::{Error, Result};
use crate::photonic::CircuitSpec;
use crate::tensor::{Activation, ScheduleKind};

/// Largest photonic input size the modelled hardware accepts.
pub const MAX_INPUT_SIZE: usize = 20;

/// Conv frontend channels per block.
pub const FRONTEND_CHANNELS: [usize; 2] = [16, 32];
pub const KERNEL: usize = 3;

/// Resolved values of the nineteen searched hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparams {
    pub batch_size: usize,
    pub pre_depth: usize,
    pub pre_width: usize,
    pub pre_activation: Activation,
    pub pre_bn: bool,
    pub pre_dropout: f64,
    pub phase_activation: PhaseActivation,
    pub phase_scale_init: f64,
    pub phase_bias: bool,
    pub q_output_size: Option<usize>,
    pub clf_depth: usize,
    pub clf_width: usize,
    pub clf_activation: Activation,
    pub clf_bn: bool,
    pub clf_dropout: f64,
    pub lr: f64,
    pub lr_schedule: ScheduleKind,
    pub weight_decay: f64,
    pub grad_clip: Option<f64>,
}

impl Hyperparams {
    /// Best Digits configuration found by the reference search.
    pub fn digits_reference() -> Self {
        Self {
            batch_size: 16,
            pre_depth: 0,
            pre_width: 16,
            pre_activation: Activation::Silu,
            pre_bn: false,
            pre_dropout: 0.2,
            phase_activation: PhaseActivation::Tanh,
            phase_scale_init: 1.5,
            phase_bias: false,
            q_output_size: Some(16),
            clf_depth: 3,
            clf_width: 64,
            clf_activation: Activation::Silu,
            clf_bn: true,
            clf_dropout: 0.0,
            lr: 8e-3,
            lr_schedule: ScheduleKind::Cosine,
            weight_decay: 1e-4,
            grad_clip: Some(1.0),
        }
    }

    /// Best MNIST configuration found by the reference search.
    pub fn mnist_reference() -> Self {
        Self {
            batch_size: 16,
            pre_depth: 0,
            pre_width: 128,
            pre_activation: Activation::Tanh,
            pre_bn: true,
            pre_dropout: 0.2,
            phase_activation: PhaseActivation::Clamp,
            phase_scale_init: 1.5,
            phase_bias: true,
            q_output_size: Some(64),
            clf_depth: 2,
            clf_width: 64,
            clf_activation: Activation::Silu,
            clf_bn: true,
            clf_dropout: 0.3,
            lr: 5e-4,
            lr_schedule: ScheduleKind::OneCycle,
            weight_decay: 0.0,
            grad_clip: Some(1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Argument(what.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.clf_depth == 0 {
            return bad("clf_depth must be at least 1");
        }
        if self.pre_depth > 0 && self.pre_width == 0 || self.clf_width == 0 {
            return bad("layer widths must be positive");
        }
        for (name, p) in [
            ("pre_dropout", self.pre_dropout),
            ("clf_dropout", self.clf_dropout),
        ] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::Argument(format!(
                    "{name}: {}",
                    Error::InvalidRate(p)
                )));
            }
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if self.weight_decay < 0.0 || self.grad_clip.is_some_and(|c| c <= 0.0) {
            return bad("weight_decay must be >= 0 and grad_clip > 0");
        }
        if self.q_output_size == Some(0) {
            return bad("q_output_size must be positive");
        }
        Ok(())
    }
}

/// The block between the pre-quantum MLP and the classifier head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum QuantumSpec {
    /// Phase encoder followed by the simulated photonic layer.
    Photonic { circuit: CircuitSpec, q_out: usize },
    /// Classical stand-in: `d -> [hidden ->] q_out`, each linear followed by SiLU.
    Dense { hidden: Option<usize>, q_out: usize },
}

impl QuantumSpec {
    pub fn q_out(&self) -> usize {
        match self {
            Self::Photonic { q_out, .. } | Self::Dense { q_out, .. } => *q_out,
        }
    }
}

/// Full structural description of a model; parameters are rebuilt from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub height: usize,
    pub width: usize,
    pub input_size: usize,
    pub classes: usize,
    pub arch: Hyperparams,
    pub quantum: QuantumSpec,
}

fn linear_count(i: usize, o: usize) -> usize {
    i * o + o
}

impl ModelSpec {
    /// Hybrid model over `height x width` images with `input_size` PCA
    /// components and photonic modes `input_size + 1`.
    pub fn hybrid(
        height: usize,
        width: usize,
        input_size: usize,
        arch: Hyperparams,
    ) -> Result<Self> {
        arch.validate()?;
        if input_size == 0 || input_size > MAX_INPUT_SIZE {
            return Err(Error::Argument(format!(
                "input size {input_size} outside 1..={MAX_INPUT_SIZE}"
            )));
        }
        if input_size > height * width {
            return Err(Error::Dimension(format!(
                "{input_size} components from {height}x{width} images"
            )));
        }
        let q_out = arch.q_output_size.unwrap_or(input_size);
        let circuit = CircuitSpec::for_input_size(input_size);
        let basis = crate::photonic::basis_size(circuit.modes(), circuit.photons());
        if q_out as u128 > basis {
            return Err(Error::Dimension(format!(
                "q_output_size {q_out} exceeds the {basis}-state Fock basis"
            )));
        }
        Ok(Self {
            height,
            width,
            input_size,
            classes: NUM_CLASSES,
            arch,
            quantum: QuantumSpec::Photonic { circuit, q_out },
        })
    }

    pub fn is_hybrid(&self) -> bool {
        matches!(self.quantum, QuantumSpec::Photonic { .. })
    }

    pub fn q_out(&self) -> usize {
        self.quantum.q_out()
    }

    /// Trainable scalars outside the quantum block.
    pub fn classical_parameter_count(&self) -> usize {
        let d = self.input_size;
        let a = &self.arch;
        let [c1, c2] = FRONTEND_CHANNELS;
        let k2 = KERNEL * KERNEL;
        let mut n = c1 * k2 + c1 + 2 * c1;
        n += c2 * c1 * k2 + c2 + 2 * c2;
        n += linear_count(c2, d);
        n += 2 * d;
        n += linear_count(2 * d, d);
        let mut width = d;
        for _ in 0..a.pre_depth {
            n += linear_count(width, a.pre_width);
            width = a.pre_width;
        }
        if a.pre_bn {
            n += 2 * width;
        }
        n += linear_count(width, d);
        let mut width = self.q_out();
        for _ in 1..a.clf_depth {
            n += linear_count(width, a.clf_width);
            if a.clf_bn {
                n += 2 * a.clf_width;
            }
            width = a.clf_width;
        }
        n + linear_count(width, self.classes)
    }

    pub fn quantum_parameter_count(&self) -> usize {
        let d = self.input_size;
        match &self.quantum {
            QuantumSpec::Photonic { circuit, .. } => {
                d * (1 + usize::from(self.arch.phase_bias)) + circuit.mesh_param_count()
            }
            QuantumSpec::Dense {
                hidden: None,
                q_out,
            } => linear_count(d, *q_out),
            QuantumSpec::Dense {
                hidden: Some(h),
                q_out,
            } => linear_count(d, *h) + linear_count(*h, *q_out),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.classical_parameter_count() + self.quantum_parameter_count()
    }
}
