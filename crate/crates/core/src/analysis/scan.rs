use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{pearson, spearman};
use crate::error::{Error, Result};
use crate::ga::{random_genome, GeneTable, Genome, ProxyData};
use crate::model::{train_model, ModelSpec, PhotonicModel, TrainBudget};
use crate::rng::stream;

pub const CORRELATION_THRESHOLD: f64 = 0.8;

/// Draws per architecture slot before giving up on finding a buildable one.
const MAX_DRAWS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanArchitecture {
    pub genome: Genome,
    /// Validation accuracy after each epoch; empty if training failed.
    pub accuracies: Vec<f64>,
    pub error: Option<String>,
}

/// Correlations of epoch-`e` accuracy with final accuracy. `None` where
/// the coefficient is undefined (a constant column).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub epoch: usize,
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
}

impl ScanRow {
    fn above(&self, t: f64) -> bool {
        self.pearson.is_some_and(|r| r > t) && self.spearman.is_some_and(|r| r > t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationScan {
    pub rows: Vec<ScanRow>,
    pub architectures: Vec<ScanArchitecture>,
    /// First epoch where both coefficients exceed the threshold.
    pub threshold_epoch: Option<usize>,
    /// First epoch from which both stay above the threshold to the end.
    pub stable_epoch: Option<usize>,
}

/// Draws `n_arch` distinct buildable genomes from `table`.
pub fn sample_architectures(
    table: &GeneTable,
    data: &ProxyData,
    n_arch: usize,
    seed: u64,
) -> Result<Vec<Genome>> {
    let mut rng = stream(seed, "epoch-scan");
    let mut out: Vec<Genome> = Vec::with_capacity(n_arch);
    let mut draws = 0;
    while out.len() < n_arch {
        if draws == MAX_DRAWS * n_arch.max(1) {
            return Err(Error::InsufficientData(format!(
                "found {} of {n_arch} buildable architectures",
                out.len()
            )));
        }
        draws += 1;
        let g = random_genome(table, &mut rng);
        if out.contains(&g) {
            continue;
        }
        let Ok(h) = table.resolve(&g) else { continue };
        if ModelSpec::hybrid(data.train.height, data.train.width, data.input_size, h).is_ok() {
            out.push(g);
        }
    }
    Ok(out)
}

fn train_curve(
    table: &GeneTable,
    data: &ProxyData,
    g: &Genome,
    epochs: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let h = table.resolve(g)?;
    let spec = ModelSpec::hybrid(
        data.train.height,
        data.train.width,
        data.input_size,
        h.clone(),
    )?;
    let mut model = PhotonicModel::build(spec, seed)?;
    model.fit_preprocessing(&data.train)?;
    let (tr, va) = (model.prepare(&data.train)?, model.prepare(&data.val)?);
    let out = train_model(
        &mut model,
        &tr,
        &va,
        &TrainBudget::from_hyperparams(&h, epochs),
        seed,
    )?;
    Ok(out.history.iter().map(|r| r.val_acc).collect())
}

/// Per-epoch correlations between accuracy at that epoch and at the final
/// epoch, over `n_arch` random architectures trained for `epochs` epochs.
pub fn epoch_correlation_scan(
    table: &GeneTable,
    data: &ProxyData,
    n_arch: usize,
    epochs: usize,
    seed: u64,
    workers: usize,
) -> Result<CorrelationScan> {
    if epochs == 0 {
        return Err(Error::Argument("scan needs at least one epoch".into()));
    }
    let genomes = sample_architectures(table, data, n_arch, seed)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Argument(format!("worker pool: {e}")))?;
    let architectures: Vec<ScanArchitecture> = pool.install(|| {
        genomes
            .par_iter()
            .map(
                |g| match train_curve(table, data, g, epochs, g.training_seed(seed)) {
                    Ok(accuracies) => ScanArchitecture {
                        genome: g.clone(),
                        accuracies,
                        error: None,
                    },
                    Err(e) => ScanArchitecture {
                        genome: g.clone(),
                        accuracies: Vec::new(),
                        error: Some(e.to_string()),
                    },
                },
            )
            .collect()
    });
    let curves: Vec<&Vec<f64>> = architectures
        .iter()
        .filter(|a| a.accuracies.len() == epochs)
        .map(|a| &a.accuracies)
        .collect();
    let rows = correlation_rows(&curves)?;
    Ok(CorrelationScan {
        threshold_epoch: rows
            .iter()
            .find(|r| r.above(CORRELATION_THRESHOLD))
            .map(|r| r.epoch),
        stable_epoch: stable_epoch(&rows, CORRELATION_THRESHOLD),
        rows,
        architectures,
    })
}

/// One row per epoch of the equal-length `curves`.
pub fn correlation_rows(curves: &[&Vec<f64>]) -> Result<Vec<ScanRow>> {
    if curves.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} trained architectures, need at least 3",
            curves.len()
        )));
    }
    let epochs = curves[0].len();
    let last: Vec<f64> = curves.iter().map(|c| c[epochs - 1]).collect();
    (0..epochs)
        .map(|e| {
            let col: Vec<f64> = curves.iter().map(|c| c[e]).collect();
            let defined = |r: Result<f64>| match r {
                Ok(v) => Ok(Some(v)),
                Err(Error::UndefinedCorrelation(_)) => Ok(None),
                Err(other) => Err(other),
            };
            Ok(ScanRow {
                epoch: e + 1,
                pearson: defined(pearson(&col, &last))?,
                spearman: defined(spearman(&col, &last))?,
            })
        })
        .collect()
}

fn stable_epoch(rows: &[ScanRow], t: f64) -> Option<usize> {
    let tail = rows.iter().rev().take_while(|r| r.above(t)).count();
    (tail > 0).then(|| rows[rows.len() - tail].epoch)
}

/// `epoch,pearson,spearman`; undefined coefficients are written as `NaN`.
pub fn write_scan_csv<W: std::io::Write>(
    scan: &CorrelationScan,
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "epoch,pearson,spearman")?;
    for r in &scan.rows {
        let f = |v: Option<f64>| v.map_or("NaN".to_string(), |x| x.to_string());
        writeln!(out, "{},{},{}", r.epoch, f(r.pearson), f(r.spearman))?;
    }
    Ok(())
}
