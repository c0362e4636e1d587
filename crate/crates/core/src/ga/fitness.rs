//! Fitness evaluators, looked up by name.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::genes::GeneTable;
use super::genome::Genome;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{evaluate, train_model, ModelSpec, PhotonicModel, TrainBudget};
use crate::registry::Registry;
use crate::rng::stream;
use rand::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessRecord {
    /// Validation accuracy in `[0, 1]`; 0 for architectures that failed.
    pub fitness: f64,
    pub diagnostic: Option<String>,
}

impl FitnessRecord {
    pub fn ok(fitness: f64) -> Self {
        Self {
            fitness,
            diagnostic: None,
        }
    }

    pub fn failed(err: &Error) -> Self {
        Self {
            fitness: 0.0,
            diagnostic: Some(err.to_string()),
        }
    }
}

pub trait FitnessEvaluator: Send + Sync {
    fn name(&self) -> &'static str;

    /// Identifies the evaluation budget; memoized results are only reused
    /// under an equal key.
    fn budget_key(&self) -> String;

    /// Scores `genome`, training with `seed`. Must be deterministic in its
    /// arguments.
    fn evaluate(&self, table: &GeneTable, genome: &Genome, seed: u64) -> FitnessRecord;
}

/// Fixed proxy training set and search-time validation set.
#[derive(Debug, Clone)]
pub struct ProxyData {
    pub train: Dataset,
    pub val: Dataset,
    pub input_size: usize,
    pub epochs: usize,
}

/// What a fitness factory may draw on.
#[derive(Debug, Clone, Default)]
pub struct FitnessContext {
    pub proxy: Option<Arc<ProxyData>>,
    pub seed: u64,
}

pub type FitnessFactory = fn(&FitnessContext, &GeneTable) -> Result<Arc<dyn FitnessEvaluator>>;

pub fn fitness_evaluators() -> Registry<FitnessFactory> {
    Registry::<FitnessFactory>::new("fitness evaluator")
        .with("proxy-train", |ctx, _| {
            let data = ctx
                .proxy
                .clone()
                .ok_or_else(|| Error::Argument("proxy-train fitness needs proxy data".into()))?;
            Ok(Arc::new(ProxyTrain { data }))
        })
        .with("mock", |ctx, table| {
            Ok(Arc::new(MockFitness::new(table, ctx.seed)))
        })
}

pub fn fitness_evaluator(
    name: &str,
    ctx: &FitnessContext,
    table: &GeneTable,
) -> Result<Arc<dyn FitnessEvaluator>> {
    (fitness_evaluators().get(name)?)(ctx, table)
}

/// Best validation accuracy after a short training run on the proxy set.
pub struct ProxyTrain {
    data: Arc<ProxyData>,
}

impl ProxyTrain {
    pub fn new(data: Arc<ProxyData>) -> Self {
        Self { data }
    }

    fn run(&self, table: &GeneTable, genome: &Genome, seed: u64) -> Result<f64> {
        let d = &self.data;
        let h = table.resolve(genome)?;
        let spec = ModelSpec::hybrid(d.train.height, d.train.width, d.input_size, h.clone())?;
        let mut model = PhotonicModel::build(spec, seed)?;
        model.fit_preprocessing(&d.train)?;
        let (train, val) = (model.prepare(&d.train)?, model.prepare(&d.val)?);
        let budget = TrainBudget::from_hyperparams(&h, d.epochs);
        match train_model(&mut model, &train, &val, &budget, seed)?.best_val_acc {
            Some(acc) => Ok(acc),
            None => Ok(evaluate(&mut model, &val)?.accuracy),
        }
    }
}

impl FitnessEvaluator for ProxyTrain {
    fn name(&self) -> &'static str {
        "proxy-train"
    }

    fn budget_key(&self) -> String {
        let d = &self.data;
        format!(
            "proxy-train/{}x{}/d{}/e{}",
            d.train.len(),
            d.val.len(),
            d.input_size,
            d.epochs
        )
    }

    fn evaluate(&self, table: &GeneTable, genome: &Genome, seed: u64) -> FitnessRecord {
        match self.run(table, genome, seed) {
            Ok(acc) => FitnessRecord::ok(acc),
            Err(e) => FitnessRecord::failed(&e),
        }
    }
}

/// Cheap deterministic landscape for exercising the search: fitness is one
/// minus the mean normalized distance of each gene from a hidden target.
pub struct MockFitness {
    target: Vec<usize>,
}

impl MockFitness {
    pub fn new(table: &GeneTable, seed: u64) -> Self {
        let mut rng = stream(seed, "mock-target");
        Self {
            target: table
                .genes()
                .iter()
                .map(|g| rng.random_range(0..g.options.len()))
                .collect(),
        }
    }

    pub fn target(&self) -> Genome {
        Genome::new(self.target.clone())
    }
}

impl FitnessEvaluator for MockFitness {
    fn name(&self) -> &'static str {
        "mock"
    }

    fn budget_key(&self) -> String {
        format!("mock/{:016x}", Genome::new(self.target.clone()).digest())
    }

    fn evaluate(&self, table: &GeneTable, genome: &Genome, _: u64) -> FitnessRecord {
        if let Err(e) = table.check(genome) {
            return FitnessRecord::failed(&e);
        }
        let dist: f64 = table
            .genes()
            .iter()
            .zip(genome.indices().iter().zip(&self.target))
            .map(|(g, (&i, &t))| {
                let span = g.options.len().saturating_sub(1).max(1) as f64;
                i.abs_diff(t) as f64 / span
            })
            .sum();
        FitnessRecord::ok(1.0 - dist / table.len() as f64)
    }
}
