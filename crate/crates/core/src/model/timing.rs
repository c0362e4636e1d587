use std::time::Instant;

use super::network::{PhotonicModel, Prepared};
use crate::error::{Error, Result};
use crate::rng::stream;
use crate::tensor::{Mode, Tape};
use crate::timing::ClassicalTiming;

/// Wall time (ms) of an eval-mode forward pass over sample `index` with the
/// photonic simulation skipped: the host-side share of inference.
pub fn classical_forward_ms(
    model: &mut PhotonicModel,
    data: &Prepared,
    index: usize,
    runs: usize,
) -> Result<ClassicalTiming> {
    if index >= data.len() || runs == 0 {
        return Err(Error::Argument(format!(
            "sample {index} of {} over {runs} runs",
            data.len()
        )));
    }
    let mut rng = stream(0, "timing");
    let mut times = Vec::with_capacity(runs);
    for _ in 0..runs {
        let (img, pca, _) = data.batch(&[index]);
        let start = Instant::now();
        let mut tape = Tape::new();
        model.forward_inner(&mut tape, img, pca, Mode::Eval, &mut rng, true)?;
        times.push(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(ClassicalTiming::from_samples(&times))
}
