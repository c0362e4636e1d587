use super::spec::{ModelSpec, QuantumSpec};
use crate::error::{Error, Result};

/// Relative tolerance on the parameter budget.
pub const BUDGET_TOLERANCE: f64 = 0.02;
const MAX_HIDDEN: usize = 4096;

/// Replaces the encoder and photonic layer of `hybrid` with a dense SiLU
/// block of the same output width, choosing the optional hidden width whose
/// total parameter count lands closest to `target`.
pub fn build_classical_baseline(hybrid: &ModelSpec, target: usize) -> Result<ModelSpec> {
    let q_out = hybrid.q_out();
    let candidates = std::iter::once(None).chain((1..=MAX_HIDDEN).map(Some));
    let mut best: Option<(usize, ModelSpec)> = None;
    for hidden in candidates {
        let mut spec = hybrid.clone();
        spec.quantum = QuantumSpec::Dense { hidden, q_out };
        let count = spec.parameter_count();
        let gap = count.abs_diff(target);
        if best.as_ref().is_none_or(|(g, _)| gap < *g) {
            best = Some((gap, spec));
        }
    }
    let (_, spec) = best.expect("at least one candidate");
    let count = spec.parameter_count();
    if count.abs_diff(target) as f64 > BUDGET_TOLERANCE * target as f64 {
        return Err(Error::Sizing {
            target,
            nearest: count,
        });
    }
    Ok(spec)
}
