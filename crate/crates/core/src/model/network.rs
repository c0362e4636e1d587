use std::sync::Arc;

use rand::Rng;

use super::encoder::phase_encode;
use super::spec::{ModelSpec, QuantumSpec, FRONTEND_CHANNELS, KERNEL};
use crate::data::{Dataset, Pca, Standardizer};
use crate::error::{Error, Result};
use crate::photonic::{photonic_layer, CircuitLayout};
use crate::rng::{stream, Stream};
use crate::tensor::ops::{
    activation, adaptive_avg_pool, batchnorm, concat, conv2d, dropout, linear, max_pool2x2,
};
use crate::tensor::{
    kaiming_uniform, Activation, BatchNormState, Mode, ParamId, ParamStore, Tape, Tensor, Var,
};

#[derive(Debug, Clone, Copy)]
struct Dense {
    w: ParamId,
    b: ParamId,
}

#[derive(Debug, Clone, Copy)]
struct Norm {
    gamma: ParamId,
    beta: ParamId,
    state: usize,
}

#[derive(Debug, Clone)]
enum QuantumLayers {
    Photonic {
        scale: ParamId,
        bias: Option<ParamId>,
        phases: ParamId,
        layout: Arc<CircuitLayout>,
    },
    Dense {
        hidden: Option<Dense>,
        out: Dense,
    },
}

#[derive(Debug, Clone)]
struct Layers {
    convs: [(Dense, Norm); 2],
    proj: Dense,
    pca_bn: Norm,
    fusion: Dense,
    pre_hidden: Vec<Dense>,
    pre_bn: Option<Norm>,
    pre_out: Dense,
    quantum: QuantumLayers,
    clf_hidden: Vec<(Dense, Option<Norm>)>,
    clf_out: Dense,
}

struct Builder<'a> {
    params: ParamStore,
    bn: Vec<BatchNormState>,
    rng: &'a mut Stream,
}

impl Builder<'_> {
    fn dense(&mut self, name: &str, fan_in: usize, out: usize) -> Dense {
        let w = kaiming_uniform(self.rng, fan_in, fan_in * out);
        Dense {
            w: self.params.add(
                format!("{name}.weight"),
                Tensor::new(vec![fan_in, out], w).unwrap(),
            ),
            b: self
                .params
                .add(format!("{name}.bias"), Tensor::zeros(vec![out])),
        }
    }

    fn conv(&mut self, name: &str, cin: usize, cout: usize) -> Dense {
        let fan_in = cin * KERNEL * KERNEL;
        let w = kaiming_uniform(self.rng, fan_in, fan_in * cout);
        let shape = vec![cout, cin, KERNEL, KERNEL];
        Dense {
            w: self
                .params
                .add(format!("{name}.weight"), Tensor::new(shape, w).unwrap()),
            b: self
                .params
                .add(format!("{name}.bias"), Tensor::zeros(vec![cout])),
        }
    }

    fn norm(&mut self, name: &str, features: usize) -> Norm {
        self.bn.push(BatchNormState::new(features));
        Norm {
            gamma: self
                .params
                .add(format!("{name}.gamma"), Tensor::full(vec![features], 1.0)),
            beta: self
                .params
                .add(format!("{name}.beta"), Tensor::zeros(vec![features])),
            state: self.bn.len() - 1,
        }
    }
}

/// Preprocessed samples: raw images for the conv branch and PCA features.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub height: usize,
    pub width: usize,
    pub input_size: usize,
    pub images: Vec<f64>,
    pub pca: Vec<f64>,
    pub labels: Vec<usize>,
}

impl Prepared {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Images `[B, 1, H, W]`, PCA features `[B, d]` and labels of `indices`.
    pub fn batch(&self, indices: &[usize]) -> (Tensor, Tensor, Vec<usize>) {
        let f = self.height * self.width;
        let d = self.input_size;
        let mut img = Vec::with_capacity(indices.len() * f);
        let mut pca = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            img.extend_from_slice(&self.images[i * f..(i + 1) * f]);
            pca.extend_from_slice(&self.pca[i * d..(i + 1) * d]);
        }
        let b = indices.len();
        (
            Tensor::new(vec![b, 1, self.height, self.width], img).unwrap(),
            Tensor::new(vec![b, d], pca).unwrap(),
            indices.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let (img, pca, labels) = self.batch(indices);
        Self {
            height: self.height,
            width: self.width,
            input_size: self.input_size,
            images: img.into_data(),
            pca: pca.into_data(),
            labels,
        }
    }
}

/// Handles into one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct ForwardVars {
    pub logits: Var,
    /// Input to the phase encoder (or to the dense stand-in).
    pub pre_quantum: Var,
    /// Pooled quantum output (or the stand-in's output).
    pub quantum: Var,
}

/// A hybrid (or classical-baseline) classifier with its preprocessing.
#[derive(Debug, Clone)]
pub struct PhotonicModel {
    spec: ModelSpec,
    params: ParamStore,
    bn: Vec<BatchNormState>,
    layers: Layers,
    pub standardizer: Standardizer,
    pub pca: Option<Pca>,
}

impl PhotonicModel {
    /// Builds the network for `spec`, initializing weights from `seed`.
    pub fn build(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.arch.validate()?;
        let d = spec.input_size;
        let a = spec.arch.clone();
        let mut rng = stream(seed, "init");
        let mut b = Builder {
            params: ParamStore::new(),
            bn: Vec::new(),
            rng: &mut rng,
        };
        let [c1, c2] = FRONTEND_CHANNELS;
        let conv1 = (b.conv("frontend.conv1", 1, c1), b.norm("frontend.bn1", c1));
        let conv2 = (b.conv("frontend.conv2", c1, c2), b.norm("frontend.bn2", c2));
        let proj = b.dense("frontend.proj", c2, d);
        let pca_bn = b.norm("pca.bn", d);
        let fusion = b.dense("fusion", 2 * d, d);
        let mut width = d;
        let mut pre_hidden = Vec::new();
        for i in 0..a.pre_depth {
            pre_hidden.push(b.dense(&format!("pre.hidden{i}"), width, a.pre_width));
            width = a.pre_width;
        }
        let pre_bn = a.pre_bn.then(|| b.norm("pre.bn", width));
        let pre_out = b.dense("pre.out", width, d);
        let quantum = match &spec.quantum {
            QuantumSpec::Photonic { circuit, .. } => {
                if circuit.encoded_modes != d {
                    return Err(Error::Dimension(format!(
                        "circuit encodes {} phases for input size {d}",
                        circuit.encoded_modes
                    )));
                }
                let layout = Arc::new(CircuitLayout::new(circuit.clone())?);
                let scale = b
                    .params
                    .add("encoder.scale", Tensor::full(vec![d], a.phase_scale_init));
                let bias = a
                    .phase_bias
                    .then(|| b.params.add("encoder.bias", Tensor::zeros(vec![d])));
                let init = layout.random_phases(b.rng);
                let phases = b
                    .params
                    .add("photonic.phases", Tensor::new(vec![init.len()], init)?);
                QuantumLayers::Photonic {
                    scale,
                    bias,
                    phases,
                    layout,
                }
            }
            QuantumSpec::Dense { hidden, q_out } => {
                let hidden_layer = hidden.map(|h| b.dense("standin.hidden", d, h));
                let out = b.dense("standin.out", hidden.unwrap_or(d), *q_out);
                QuantumLayers::Dense {
                    hidden: hidden_layer,
                    out,
                }
            }
        };
        let mut width = spec.q_out();
        let mut clf_hidden = Vec::new();
        for i in 1..a.clf_depth {
            let dense = b.dense(&format!("clf.hidden{i}"), width, a.clf_width);
            let norm = a.clf_bn.then(|| b.norm(&format!("clf.bn{i}"), a.clf_width));
            clf_hidden.push((dense, norm));
            width = a.clf_width;
        }
        let clf_out = b.dense("clf.out", width, spec.classes);
        let layers = Layers {
            convs: [conv1, conv2],
            proj,
            pca_bn,
            fusion,
            pre_hidden,
            pre_bn,
            pre_out,
            quantum,
            clf_hidden,
            clf_out,
        };
        let Builder { params, bn, .. } = b;
        Ok(Self {
            spec,
            params,
            bn,
            layers,
            standardizer: Standardizer::default(),
            pca: None,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn batchnorm_states(&self) -> &[BatchNormState] {
        &self.bn
    }

    pub(crate) fn restore(&mut self, params: ParamStore, bn: Vec<BatchNormState>) {
        self.params = params;
        self.bn = bn;
    }

    pub fn circuit_layout(&self) -> Option<&Arc<CircuitLayout>> {
        match &self.layers.quantum {
            QuantumLayers::Photonic { layout, .. } => Some(layout),
            QuantumLayers::Dense { .. } => None,
        }
    }

    /// Fits the standardizer and PCA on the training images.
    pub fn fit_preprocessing(&mut self, train: &Dataset) -> Result<()> {
        self.check_dims(train)?;
        let f = train.features();
        self.standardizer = Standardizer::fit(&train.pixels, f)?;
        let z = self.standardizer.apply(&train.pixels)?;
        self.pca = Some(Pca::fit(&z, f, self.spec.input_size)?);
        Ok(())
    }

    fn check_dims(&self, ds: &Dataset) -> Result<()> {
        if (ds.height, ds.width) != (self.spec.height, self.spec.width) {
            return Err(Error::Dimension(format!(
                "model expects {}x{} images, dataset has {}x{}",
                self.spec.height, self.spec.width, ds.height, ds.width
            )));
        }
        Ok(())
    }

    /// Applies the fitted preprocessing to `ds`.
    pub fn prepare(&self, ds: &Dataset) -> Result<Prepared> {
        self.check_dims(ds)?;
        let pca = self
            .pca
            .as_ref()
            .ok_or_else(|| Error::State("PCA applied before fit".into()))?;
        let z = self.standardizer.apply(&ds.pixels)?;
        Ok(Prepared {
            height: ds.height,
            width: ds.width,
            input_size: self.spec.input_size,
            images: ds.pixels.clone(),
            pca: pca.apply(&z)?,
            labels: ds.labels.clone(),
        })
    }

    fn dense(&self, tape: &mut Tape, x: Var, l: Dense) -> Result<Var> {
        let w = tape.param(&self.params, l.w);
        let b = tape.param(&self.params, l.b);
        linear(tape, x, w, b)
    }

    fn norm(&mut self, tape: &mut Tape, x: Var, n: Norm, mode: Mode) -> Result<Var> {
        let g = tape.param(&self.params, n.gamma);
        let b = tape.param(&self.params, n.beta);
        batchnorm(tape, x, g, b, &mut self.bn[n.state], mode)
    }

    /// Records one forward pass. Train mode updates batch-norm running
    /// statistics and draws dropout masks from `rng`.
    pub fn forward<R: Rng + ?Sized>(
        &mut self,
        tape: &mut Tape,
        images: Tensor,
        pca: Tensor,
        mode: Mode,
        rng: &mut R,
    ) -> Result<ForwardVars> {
        self.forward_inner(tape, images, pca, mode, rng, false)
    }

    pub(crate) fn forward_inner<R: Rng + ?Sized>(
        &mut self,
        tape: &mut Tape,
        images: Tensor,
        pca: Tensor,
        mode: Mode,
        rng: &mut R,
        skip_quantum: bool,
    ) -> Result<ForwardVars> {
        let s = self.spec.clone();
        let b = images.shape().first().copied().unwrap_or(0);
        if images.shape() != [b, 1, s.height, s.width] || pca.shape() != [b, s.input_size] {
            return Err(Error::Dimension(format!(
                "batch {:?} / {:?} for a {}x{} model with {} components",
                images.shape(),
                pca.shape(),
                s.height,
                s.width,
                s.input_size
            )));
        }
        let a = &s.arch;
        let l = self.layers.clone();

        let mut x = tape.constant(images);
        for (conv, norm) in l.convs {
            let k = tape.param(&self.params, conv.w);
            let cb = tape.param(&self.params, conv.b);
            x = conv2d(tape, x, k, cb, 1)?;
            x = activation(tape, x, Activation::Relu);
            x = self.norm(tape, x, norm, mode)?;
            x = max_pool2x2(tape, x)?;
        }
        let x = adaptive_avg_pool(tape, x)?;
        let spatial = self.dense(tape, x, l.proj)?;

        let p = tape.constant(pca);
        let p = self.norm(tape, p, l.pca_bn, mode)?;

        let z = concat(tape, spatial, p)?;
        let z = self.dense(tape, z, l.fusion)?;
        let mut h = activation(tape, z, Activation::Silu);
        for layer in &l.pre_hidden {
            h = self.dense(tape, h, *layer)?;
            h = activation(tape, h, a.pre_activation);
            h = dropout(tape, h, a.pre_dropout, mode, rng)?;
        }
        if let Some(n) = l.pre_bn {
            h = self.norm(tape, h, n, mode)?;
        }
        let pre_quantum = self.dense(tape, h, l.pre_out)?;

        let quantum = match &l.quantum {
            QuantumLayers::Photonic {
                scale,
                bias,
                phases,
                layout,
            } => {
                let sv = tape.param(&self.params, *scale);
                let bv = bias.map(|id| tape.param(&self.params, id));
                let theta = phase_encode(tape, pre_quantum, sv, bv, a.phase_activation)?;
                if skip_quantum {
                    let q = s.q_out();
                    tape.constant(Tensor::full(vec![b, q], 1.0 / q as f64))
                } else {
                    let ph = tape.param(&self.params, *phases);
                    photonic_layer(tape, layout, theta, ph, s.q_out())?
                }
            }
            QuantumLayers::Dense { hidden, out } => {
                let mut q = pre_quantum;
                if let Some(hl) = hidden {
                    q = self.dense(tape, q, *hl)?;
                    q = activation(tape, q, Activation::Silu);
                }
                q = self.dense(tape, q, *out)?;
                activation(tape, q, Activation::Silu)
            }
        };

        let mut c = quantum;
        for (dense, norm) in &l.clf_hidden {
            c = self.dense(tape, c, *dense)?;
            c = activation(tape, c, a.clf_activation);
            if let Some(n) = norm {
                c = self.norm(tape, c, *n, mode)?;
            }
            c = dropout(tape, c, a.clf_dropout, mode, rng)?;
        }
        let logits = self.dense(tape, c, l.clf_out)?;
        Ok(ForwardVars {
            logits,
            pre_quantum,
            quantum,
        })
    }

    /// Eval-mode logits for `indices` of `data`, row-major `[B, K]`.
    pub fn predict(&mut self, data: &Prepared, indices: &[usize]) -> Result<Vec<f64>> {
        let (img, pca, _) = data.batch(indices);
        let mut tape = Tape::new();
        let mut rng = stream(0, "eval");
        let v = self.forward(&mut tape, img, pca, Mode::Eval, &mut rng)?;
        Ok(tape.value(v.logits).data().to_vec())
    }
}

/// Number of trainable scalars, including mesh phases and encoder scale/bias.
pub fn count_parameters(model: &PhotonicModel) -> usize {
    model.params().element_count()
}
