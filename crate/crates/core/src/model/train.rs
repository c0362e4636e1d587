use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::network::{PhotonicModel, Prepared};
use super::spec::Hyperparams;
use crate::error::{Error, Result};
use crate::rng::{stream, stream_indexed};
use crate::tensor::ops::{softmax_cross_entropy, softmax_rows};
use crate::tensor::schedule::build;
use crate::tensor::{clip_gradients, Adam, AdamConfig, Mode, ScheduleConfig, ScheduleKind, Tape};

/// Rows per evaluation pass; bounds tape memory.
const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainBudget {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub schedule: ScheduleKind,
    pub weight_decay: f64,
    pub grad_clip: Option<f64>,
}

impl TrainBudget {
    pub fn from_hyperparams(h: &Hyperparams, epochs: usize) -> Self {
        Self {
            epochs,
            batch_size: h.batch_size,
            lr: h.lr,
            schedule: h.lr_schedule,
            weight_decay: h.weight_decay,
            grad_clip: h.grad_clip,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub history: Vec<EpochRecord>,
    /// Epoch (1-based) whose weights were kept; 0 when untrained.
    pub best_epoch: usize,
    pub best_val_acc: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
}

/// Eval-mode mean cross-entropy and accuracy over all of `data`.
pub fn evaluate(model: &mut PhotonicModel, data: &Prepared) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::InsufficientData("evaluation on an empty set".into()));
    }
    let k = model.spec().classes;
    let (mut loss, mut correct) = (0.0, 0usize);
    let all: Vec<usize> = (0..data.len()).collect();
    for chunk in all.chunks(EVAL_CHUNK) {
        let logits = model.predict(data, chunk)?;
        let probs = softmax_rows(&crate::tensor::Tensor::new(
            vec![chunk.len(), k],
            logits.clone(),
        )?);
        for (r, &i) in chunk.iter().enumerate() {
            let label = data.labels[i];
            let row = &logits[r * k..(r + 1) * k];
            let pred = (0..k).fold(0, |best, j| if row[j] > row[best] { j } else { best });
            correct += usize::from(pred == label);
            loss -= probs[r * k + label].max(f64::MIN_POSITIVE).ln();
        }
    }
    let n = data.len() as f64;
    Ok(Evaluation {
        loss: loss / n,
        accuracy: correct as f64 / n,
    })
}

fn culprit(model: &PhotonicModel) -> String {
    model
        .params()
        .iter()
        .find(|(_, t)| {
            t.data().iter().any(|v| !v.is_finite())
                || t.grad().is_some_and(|g| g.iter().any(|v| !v.is_finite()))
        })
        .map_or_else(|| "none".into(), |(n, _)| n.to_string())
}

/// Minimizes cross-entropy with Adam under `budget`, keeping the weights of
/// the epoch with the best validation accuracy.
///
/// Batches of a single sample are skipped (batch norm cannot normalize
/// them).
pub fn train_model(
    model: &mut PhotonicModel,
    train: &Prepared,
    val: &Prepared,
    budget: &TrainBudget,
    seed: u64,
) -> Result<TrainOutcome> {
    if budget.batch_size == 0 || !(budget.lr > 0.0) {
        return Err(Error::Argument(
            "budget needs a positive batch size and rate".into(),
        ));
    }
    let n = train.len();
    if budget.epochs > 0 && n < 2 {
        return Err(Error::InsufficientData(format!("{n} training samples")));
    }
    let batches_per_epoch = n.div_ceil(budget.batch_size) as u64;
    let cfg = ScheduleConfig::new(budget.lr, batches_per_epoch * budget.epochs as u64);
    let mut policy = build(budget.schedule, &cfg);
    let mut adam = Adam::new(
        model.params(),
        AdamConfig {
            weight_decay: budget.weight_decay,
            ..AdamConfig::default()
        },
    );
    let mut drop_rng = stream(seed, "dropout");
    let mut history = Vec::with_capacity(budget.epochs);
    let mut best: Option<(f64, f64, usize)> = None;
    let mut snapshot = (model.params().clone(), model.batchnorm_states().to_vec());
    let mut step = 0u64;
    for epoch in 1..=budget.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut stream_indexed(seed, "shuffle", epoch as u64));
        let (mut loss_sum, mut seen) = (0.0, 0usize);
        for (bi, idx) in order.chunks(budget.batch_size).enumerate() {
            if idx.len() < 2 {
                step += 1;
                continue;
            }
            let (img, pca, labels) = train.batch(idx);
            let mut tape = Tape::new();
            let out = match model.forward(&mut tape, img, pca, Mode::Train, &mut drop_rng) {
                Ok(out) => out,
                Err(Error::Parameter(msg)) => {
                    return Err(Error::Diverged {
                        epoch,
                        batch: bi,
                        detail: format!("{msg}; first non-finite parameter: {}", culprit(model)),
                    })
                }
                Err(e) => return Err(e),
            };
            let loss_var = softmax_cross_entropy(&mut tape, out.logits, &labels)?;
            let loss = tape.value(loss_var).data()[0];
            let grads = tape.backward(loss_var)?;
            model.params_mut().zero_grad();
            grads.accumulate_into(model.params_mut());
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: bi,
                    detail: format!(
                        "loss {loss}; first non-finite parameter: {}",
                        culprit(model)
                    ),
                });
            }
            clip_gradients(&mut model.params_mut().grads_mut(), budget.grad_clip);
            let lr = policy.lr_at(step, epoch);
            adam.step(model.params_mut(), lr).map_err(|e| match e {
                Error::NonFiniteGradient(p) => Error::Diverged {
                    epoch,
                    batch: bi,
                    detail: format!("non-finite gradient in `{p}`"),
                },
                other => other,
            })?;
            step += 1;
            loss_sum += loss * idx.len() as f64;
            seen += idx.len();
        }
        let ev = evaluate(model, val)?;
        if !ev.loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                batch: usize::MAX,
                detail: format!("validation loss {}", ev.loss),
            });
        }
        policy.end_epoch(ev.loss);
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / seen.max(1) as f64,
            val_loss: ev.loss,
            val_acc: ev.accuracy,
        });
        let better = best.is_none_or(|(acc, loss, _)| {
            ev.accuracy > acc || (ev.accuracy == acc && ev.loss < loss)
        });
        if better {
            best = Some((ev.accuracy, ev.loss, epoch));
            snapshot = (model.params().clone(), model.batchnorm_states().to_vec());
        }
    }
    let (best_val_acc, best_epoch) = best.map_or((None, 0), |(a, _, e)| (Some(a), e));
    if best.is_some() {
        model.restore(snapshot.0, snapshot.1);
    }
    Ok(TrainOutcome {
        history,
        best_epoch,
        best_val_acc,
    })
}
