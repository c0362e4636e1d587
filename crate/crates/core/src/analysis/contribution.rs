use serde::{Deserialize, Serialize};

use super::stats::{cosine, mean, std_dev};
use crate::error::{Error, Result};
use crate::model::{PhotonicModel, Prepared};
use crate::rng::stream;
use crate::tensor::{Mode, Tape};

const BATCH: usize = 64;

/// Per-sample eval-mode activations at the quantum block's boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerFeatures {
    /// Pooled quantum output, one row per sample.
    pub quantum: Vec<Vec<f64>>,
    /// Pre-quantum features fed to the phase encoder.
    pub pre_quantum: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

pub fn layer_features(model: &mut PhotonicModel, data: &Prepared) -> Result<LayerFeatures> {
    let mut out = LayerFeatures {
        quantum: Vec::with_capacity(data.len()),
        pre_quantum: Vec::with_capacity(data.len()),
        labels: data.labels.clone(),
    };
    let mut rng = stream(0, "eval");
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(BATCH) {
        let (img, pca, _) = data.batch(chunk);
        let mut tape = Tape::new();
        let v = model.forward(&mut tape, img, pca, Mode::Eval, &mut rng)?;
        for (var, rows) in [
            (v.quantum, &mut out.quantum),
            (v.pre_quantum, &mut out.pre_quantum),
        ] {
            let t = tape.value(var);
            let width = t.shape()[1];
            rows.extend(t.data().chunks(width).map(<[f64]>::to_vec));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterclassCosine {
    pub mean: f64,
    pub std: f64,
    /// Symmetric `K x K` matrix with a unit diagonal.
    pub matrix: Vec<Vec<f64>>,
}

/// Cosine between class-mean output vectors over all `K(K-1)/2` pairs.
/// The std is over pairs (population).
pub fn interclass_cosine(
    outputs: &[Vec<f64>],
    labels: &[usize],
    classes: usize,
) -> Result<InterclassCosine> {
    if outputs.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} outputs for {} labels",
            outputs.len(),
            labels.len()
        )));
    }
    if classes < 2 {
        return Err(Error::Argument(format!(
            "{classes} classes, need at least 2"
        )));
    }
    let width = outputs.first().map_or(0, Vec::len);
    let mut sums = vec![vec![0.0; width]; classes];
    let mut counts = vec![0usize; classes];
    for (o, &l) in outputs.iter().zip(labels) {
        if l >= classes {
            return Err(Error::Label { label: l, classes });
        }
        if o.len() != width {
            return Err(Error::Dimension("ragged output vectors".into()));
        }
        counts[l] += 1;
        sums[l].iter_mut().zip(o).for_each(|(s, v)| *s += v);
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Coverage(empty));
    }
    let means: Vec<Vec<f64>> = sums
        .into_iter()
        .zip(&counts)
        .map(|(s, &c)| s.into_iter().map(|v| v / c as f64).collect())
        .collect();
    let mut matrix = vec![vec![1.0; classes]; classes];
    let mut pairs = Vec::with_capacity(classes * (classes - 1) / 2);
    for i in 0..classes {
        for j in i + 1..classes {
            let c = cosine(&means[i], &means[j]).ok_or_else(|| {
                Error::UndefinedCorrelation(format!("class {i} or {j} has a zero mean output"))
            })?;
            matrix[i][j] = c;
            matrix[j][i] = c;
            pairs.push(c);
        }
    }
    Ok(InterclassCosine {
        mean: mean(&pairs),
        std: std_dev(&pairs),
        matrix,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Orthogonality {
    pub mean: f64,
    pub std: f64,
    pub samples: usize,
    /// Samples left out because one of the vectors had zero norm.
    pub excluded: usize,
}

/// Per-sample cosine between quantum outputs and pre-quantum features, the
/// shorter vector zero-padded.
pub fn feature_orthogonality(quantum: &[Vec<f64>], pre: &[Vec<f64>]) -> Result<Orthogonality> {
    if quantum.len() != pre.len() {
        return Err(Error::Dimension(format!(
            "{} quantum rows against {} feature rows",
            quantum.len(),
            pre.len()
        )));
    }
    let cos: Vec<f64> = quantum
        .iter()
        .zip(pre)
        .filter_map(|(q, p)| cosine(q, p))
        .collect();
    if cos.is_empty() {
        return Err(Error::InsufficientData(
            "no sample with non-zero vectors".into(),
        ));
    }
    Ok(Orthogonality {
        mean: mean(&cos),
        std: std_dev(&cos),
        samples: cos.len(),
        excluded: quantum.len() - cos.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContributionReport {
    pub interclass: InterclassCosine,
    pub orthogonality: Orthogonality,
    pub classes: usize,
    pub samples: usize,
}

impl ContributionReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn contribution_report(
    model: &mut PhotonicModel,
    data: &Prepared,
) -> Result<ContributionReport> {
    let classes = model.spec().classes;
    let f = layer_features(model, data)?;
    Ok(ContributionReport {
        interclass: interclass_cosine(&f.quantum, &f.labels, classes)?,
        orthogonality: feature_orthogonality(&f.quantum, &f.pre_quantum)?,
        classes,
        samples: data.len(),
    })
}

/// Writes the pairwise matrix as `class,c0,c1,...`.
pub fn write_cosine_matrix_csv<W: std::io::Write>(
    m: &InterclassCosine,
    mut out: W,
) -> std::io::Result<()> {
    let k = m.matrix.len();
    let header: Vec<String> = (0..k).map(|j| format!("c{j}")).collect();
    writeln!(out, "class,{}", header.join(","))?;
    for (i, row) in m.matrix.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{i},{}", cells.join(","))?;
    }
    Ok(())
}
