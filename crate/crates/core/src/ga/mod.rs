//! Genetic search over model hyperparameters.
//!
//! A [`GeneTable`] lists the searched genes, their ordered option lists and
//! the crossover group of each. A [`Genome`] picks one option per gene and
//! resolves to [`crate::model::Hyperparams`]. [`Search`] runs the
//! generational loop: elitism, tournament selection, group crossover and
//! per-gene mutation, scoring individuals with a named
//! [`FitnessEvaluator`].

mod fitness;
mod genes;
mod genome;
mod operators;
mod search;

pub use fitness::{
    fitness_evaluator, fitness_evaluators, FitnessContext, FitnessEvaluator, FitnessRecord,
    MockFitness, ProxyData, ProxyTrain,
};
pub use genes::{GeneSpec, GeneTable, GeneValue};
pub use genome::{random_genome, Genome};
pub use operators::{fitter, group_crossover, mutate, tournament_select, Individual, Mutation};
pub use search::{
    summarize, write_log_csv, write_timing_csv, EvaluationTiming, GenerationStats,
    IndividualRecord, NewBest, Search, SearchConfig, SearchLog, SearchState, SearchSummary,
};
