//! The photonic layer as a differentiable tape operation.

use std::sync::Arc;

use super::circuit::{bucket_bounds, CircuitLayout, ForwardCache, PhotonicCircuit};
use crate::error::{Error, Result};
use crate::tensor::{Backward, Tape, Tensor, Var};

struct PhotonicRule {
    circuit: PhotonicCircuit,
    caches: Vec<ForwardCache>,
    buckets: Vec<(usize, usize)>,
}

impl Backward for PhotonicRule {
    fn backward(&self, _: &[&Tensor], _: &Tensor, gy: &[f64]) -> Vec<Option<Vec<f64>>> {
        let q = self.buckets.len();
        let d = self.circuit.layout().encoded_modes();
        let size = self.circuit.layout().basis().len();
        let mut gtheta = Vec::with_capacity(self.caches.len() * d);
        let mut gphases = vec![0.0; self.circuit.phases().len()];
        let mut upstream = vec![0.0; size];
        for (r, cache) in self.caches.iter().enumerate() {
            for (&(a, b), &g) in self.buckets.iter().zip(&gy[r * q..(r + 1) * q]) {
                upstream[a..b].fill(g);
            }
            let g = self
                .circuit
                .backward(cache, &upstream)
                .expect("shapes fixed at forward time");
            gtheta.extend(g.theta);
            gphases.iter_mut().zip(&g.phases).for_each(|(a, b)| *a += b);
        }
        vec![Some(gtheta), Some(gphases)]
    }
}

/// Runs every row of `theta` (`[B, d]`) through the circuit with mesh phases
/// `phases` (`[P]`) and pools each output distribution into `q_out`
/// contiguous buckets, giving `[B, q_out]`.
pub fn photonic_layer(
    tape: &mut Tape,
    layout: &Arc<CircuitLayout>,
    theta: Var,
    phases: Var,
    q_out: usize,
) -> Result<Var> {
    let t = tape.value(theta);
    let d = layout.encoded_modes();
    if t.shape().len() != 2 || t.dim(1) != d {
        return Err(Error::Dimension(format!(
            "photonic layer encodes {d} phases per row, got shape {:?}",
            t.shape()
        )));
    }
    let batch = t.dim(0);
    let circuit = PhotonicCircuit::new(layout.clone(), tape.value(phases).data().to_vec())?;
    let buckets = bucket_bounds(layout.basis().len(), q_out)?;
    let mut caches = Vec::with_capacity(batch);
    let mut out = Vec::with_capacity(batch * q_out);
    for r in 0..batch {
        let cache = circuit.forward(tape.value(theta).row(r))?;
        let p = cache.distribution.probabilities();
        out.extend(buckets.iter().map(|&(a, b)| p[a..b].iter().sum::<f64>()));
        caches.push(cache);
    }
    let value = Tensor::new(vec![batch, q_out], out)?;
    let rule = PhotonicRule {
        circuit,
        caches,
        buckets,
    };
    Ok(tape.record(value, &[theta, phases], Box::new(rule)))
}
