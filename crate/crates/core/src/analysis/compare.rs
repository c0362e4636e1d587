use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{mean, sample_std};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{
    build_classical_baseline, train_model, EpochRecord, Hyperparams, ModelSpec, PhotonicModel,
    TrainBudget,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Hybrid,
    Baseline,
}

impl Arm {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Hybrid => "hybrid",
            Self::Baseline => "baseline",
        }
    }
}

/// One training run of one arm under one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub arm: Arm,
    pub seed: u64,
    pub history: Vec<EpochRecord>,
    pub best_val_acc: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epoch: usize,
    pub hybrid_mean: f64,
    pub hybrid_std: f64,
    pub baseline_mean: f64,
    pub baseline_std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        Self {
            mean: mean(xs),
            std: sample_std(xs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub hybrid_params: usize,
    pub baseline_params: usize,
    pub seeds: Vec<u64>,
    /// Hybrid runs first, then baseline runs, each in seed order.
    pub runs: Vec<SeedRun>,
    pub curves: Vec<CurvePoint>,
    /// Best validation accuracy across seeds.
    pub hybrid: MeanStd,
    pub baseline: MeanStd,
    /// Hybrid minus baseline best accuracy in percentage points, over seeds
    /// where both arms trained.
    pub delta_pp: MeanStd,
}

impl Comparison {
    pub fn runs_of(&self, arm: Arm) -> impl Iterator<Item = &SeedRun> {
        self.runs.iter().filter(move |r| r.arm == arm)
    }
}

fn run_one(
    spec: &ModelSpec,
    train: &Dataset,
    val: &Dataset,
    epochs: usize,
    seed: u64,
) -> Result<(Vec<EpochRecord>, Option<f64>)> {
    let mut model = PhotonicModel::build(spec.clone(), seed)?;
    model.fit_preprocessing(train)?;
    let (tr, va) = (model.prepare(train)?, model.prepare(val)?);
    let budget = TrainBudget::from_hyperparams(&spec.arch, epochs);
    let out = train_model(&mut model, &tr, &va, &budget, seed)?;
    Ok((out.history, out.best_val_acc))
}

/// Trains `hybrid` and `baseline` once per seed and summarizes the runs.
/// A failing run is recorded with its error; the others continue.
pub fn compare_specs(
    hybrid: &ModelSpec,
    baseline: &ModelSpec,
    train: &Dataset,
    val: &Dataset,
    seeds: &[u64],
    epochs: usize,
    workers: usize,
) -> Result<Comparison> {
    if seeds.is_empty() {
        return Err(Error::Argument("no seeds".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Argument(format!("worker pool: {e}")))?;
    let jobs: Vec<(Arm, &ModelSpec, u64)> = [(Arm::Hybrid, hybrid), (Arm::Baseline, baseline)]
        .into_iter()
        .flat_map(|(arm, spec)| seeds.iter().map(move |&s| (arm, spec, s)))
        .collect();
    let runs: Vec<SeedRun> = pool.install(|| {
        jobs.par_iter()
            .map(
                |&(arm, spec, seed)| match run_one(spec, train, val, epochs, seed) {
                    Ok((history, best_val_acc)) => SeedRun {
                        arm,
                        seed,
                        history,
                        best_val_acc,
                        error: None,
                    },
                    Err(e) => SeedRun {
                        arm,
                        seed,
                        history: Vec::new(),
                        best_val_acc: None,
                        error: Some(e.to_string()),
                    },
                },
            )
            .collect()
    });

    let n = seeds.len();
    let (h_runs, b_runs) = runs.split_at(n);
    let best = |rs: &[SeedRun]| rs.iter().filter_map(|r| r.best_val_acc).collect::<Vec<_>>();
    let deltas: Vec<f64> = h_runs
        .iter()
        .zip(b_runs)
        .filter_map(|(h, b)| Some((h.best_val_acc? - b.best_val_acc?) * 100.0))
        .collect();
    let at = |rs: &[SeedRun], e: usize| {
        MeanStd::of(
            &rs.iter()
                .filter_map(|r| r.history.get(e).map(|h| h.val_acc))
                .collect::<Vec<_>>(),
        )
    };
    let curves = (0..epochs)
        .map(|e| {
            let (h, b) = (at(h_runs, e), at(b_runs, e));
            CurvePoint {
                epoch: e + 1,
                hybrid_mean: h.mean,
                hybrid_std: h.std,
                baseline_mean: b.mean,
                baseline_std: b.std,
            }
        })
        .collect();
    Ok(Comparison {
        hybrid_params: hybrid.parameter_count(),
        baseline_params: baseline.parameter_count(),
        seeds: seeds.to_vec(),
        hybrid: MeanStd::of(&best(h_runs)),
        baseline: MeanStd::of(&best(b_runs)),
        delta_pp: MeanStd::of(&deltas),
        curves,
        runs,
    })
}

/// Hybrid built from `arch` against its parameter-matched classical
/// baseline.
pub fn compare_baseline(
    arch: &Hyperparams,
    input_size: usize,
    train: &Dataset,
    val: &Dataset,
    seeds: &[u64],
    epochs: usize,
    workers: usize,
) -> Result<Comparison> {
    let hybrid = ModelSpec::hybrid(train.height, train.width, input_size, arch.clone())?;
    let baseline = build_classical_baseline(&hybrid, hybrid.parameter_count())?;
    compare_specs(&hybrid, &baseline, train, val, seeds, epochs, workers)
}

/// `arm,seed,epoch,train_loss,val_loss,val_acc` for every run.
pub fn write_histories_csv<W: std::io::Write>(c: &Comparison, mut out: W) -> std::io::Result<()> {
    writeln!(out, "arm,seed,epoch,train_loss,val_loss,val_acc")?;
    for r in &c.runs {
        for h in &r.history {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.arm.as_str(),
                r.seed,
                h.epoch,
                h.train_loss,
                h.val_loss,
                h.val_acc
            )?;
        }
    }
    Ok(())
}

/// `epoch,train_loss,val_loss,val_acc` for a single run.
pub fn write_history_csv<W: std::io::Write>(
    history: &[EpochRecord],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "epoch,train_loss,val_loss,val_acc")?;
    for h in history {
        writeln!(
            out,
            "{},{},{},{}",
            h.epoch, h.train_loss, h.val_loss, h.val_acc
        )?;
    }
    Ok(())
}

pub fn write_curves_csv<W: std::io::Write>(c: &Comparison, mut out: W) -> std::io::Result<()> {
    writeln!(
        out,
        "epoch,hybrid_mean,hybrid_std,baseline_mean,baseline_std"
    )?;
    for p in &c.curves {
        writeln!(
            out,
            "{},{},{},{},{}",
            p.epoch, p.hybrid_mean, p.hybrid_std, p.baseline_mean, p.baseline_std
        )?;
    }
    Ok(())
}
