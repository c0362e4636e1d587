//! The generational loop with elitism, per-generation checkpoints and logs.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fitness::{FitnessEvaluator, FitnessRecord};
use super::genes::GeneTable;
use super::genome::{random_genome, Genome};
use super::operators::{fitter, group_crossover, mutate, tournament_select, Individual};
use crate::error::{Error, Result};
use crate::rng::{stream, stream_indexed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub elite: usize,
    pub tournament: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            population: 20,
            generations: 30,
            crossover_rate: 0.75,
            mutation_rate: 0.20,
            elite: 2,
            tournament: 3,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Argument(m.to_string()));
        if self.population == 0 || self.generations == 0 {
            return bad("population and generations must be positive");
        }
        if self.elite > self.population || self.tournament == 0 {
            return bad("elite must not exceed the population and tournament size must be >= 1");
        }
        for (name, p) in [
            ("crossover_rate", self.crossover_rate),
            ("mutation_rate", self.mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Argument(format!("{name} {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
    pub worst: f64,
    pub best_id: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewBest {
    pub generation: usize,
    pub id: usize,
    pub fitness: f64,
}

/// One population member in one generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualRecord {
    pub generation: usize,
    pub id: usize,
    pub born: usize,
    pub parents: Vec<usize>,
    pub genome: Genome,
    pub fitness: f64,
    pub diagnostic: Option<String>,
}

/// Wall time of one fitness evaluation. Kept apart from the deterministic log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationTiming {
    pub generation: usize,
    pub id: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchLog {
    pub generations: Vec<GenerationStats>,
    pub new_best: Vec<NewBest>,
    pub records: Vec<IndividualRecord>,
}

/// Everything needed to continue a search after the last completed
/// generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchState {
    pub config: SearchConfig,
    pub seed: u64,
    pub budget_key: String,
    /// Generations evaluated and logged so far.
    pub completed: usize,
    /// Population of generation `completed`; children are unevaluated.
    pub population: Vec<Individual>,
    pub next_id: usize,
    pub cache: Vec<(Genome, FitnessRecord)>,
    pub log: SearchLog,
    #[serde(default)]
    pub timings: Vec<EvaluationTiming>,
}

impl SearchState {
    pub fn is_finished(&self) -> bool {
        self.completed >= self.config.generations
    }

    /// Fittest individual seen so far (lowest id on ties).
    pub fn best(&self) -> Option<&IndividualRecord> {
        self.log.records.iter().fold(None, |best, r| match best {
            Some(b) if !(r.fitness > b.fitness || (r.fitness == b.fitness && r.id < b.id)) => {
                Some(b)
            }
            _ => Some(r),
        })
    }
}

/// Evolution driver bound to a gene table and an evaluator.
pub struct Search<'a> {
    pub table: &'a GeneTable,
    pub evaluator: &'a dyn FitnessEvaluator,
    pub config: SearchConfig,
    pub seed: u64,
    /// Concurrent fitness evaluations; 0 uses all cores.
    pub workers: usize,
}

impl Search<'_> {
    pub fn initial_state(&self) -> Result<SearchState> {
        self.config.validate()?;
        let mut rng = stream(self.seed, "ga-init");
        let population = (0..self.config.population)
            .map(|id| Individual::new(id, random_genome(self.table, &mut rng), 0, Vec::new()))
            .collect();
        Ok(SearchState {
            config: self.config,
            seed: self.seed,
            budget_key: self.evaluator.budget_key(),
            completed: 0,
            population,
            next_id: self.config.population,
            cache: Vec::new(),
            log: SearchLog::default(),
            timings: Vec::new(),
        })
    }

    /// Runs from scratch.
    pub fn run(
        &self,
        on_generation: impl FnMut(&SearchState) -> Result<()>,
    ) -> Result<SearchState> {
        self.resume(self.initial_state()?, on_generation)
    }

    /// Continues `state` until the configured number of generations,
    /// calling `on_generation` after each one.
    pub fn resume(
        &self,
        mut state: SearchState,
        mut on_generation: impl FnMut(&SearchState) -> Result<()>,
    ) -> Result<SearchState> {
        self.config.validate()?;
        if state.seed != self.seed
            || state.budget_key != self.evaluator.budget_key()
            || state.config != self.config
        {
            return Err(Error::State(
                "search checkpoint was written with a different seed, budget or config".into(),
            ));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::Argument(format!("worker pool: {e}")))?;
        let mut cache: BTreeMap<Genome, FitnessRecord> = state.cache.drain(..).collect();
        while !state.is_finished() {
            let gen = state.completed;
            self.evaluate_population(&pool, &mut state, &mut cache, gen);
            self.log_generation(&mut state, gen)?;
            state.completed += 1;
            if !state.is_finished() {
                let (population, next_id) = self.breed(&state, gen)?;
                state.population = population;
                state.next_id = next_id;
            }
            state.cache = cache.iter().map(|(g, r)| (g.clone(), r.clone())).collect();
            on_generation(&state)?;
            state.cache.clear();
        }
        state.cache = cache.into_iter().collect();
        Ok(state)
    }

    fn evaluate_population(
        &self,
        pool: &rayon::ThreadPool,
        state: &mut SearchState,
        cache: &mut BTreeMap<Genome, FitnessRecord>,
        gen: usize,
    ) {
        let mut pending: Vec<(usize, Genome)> = Vec::new();
        for ind in state.population.iter().filter(|i| i.fitness.is_none()) {
            if !cache.contains_key(&ind.genome) && !pending.iter().any(|(_, g)| *g == ind.genome) {
                pending.push((ind.id, ind.genome.clone()));
            }
        }
        let results: Vec<(FitnessRecord, f64)> = pool.install(|| {
            pending
                .par_iter()
                .map(|(_, g)| {
                    let start = Instant::now();
                    let r = self
                        .evaluator
                        .evaluate(self.table, g, g.training_seed(self.seed));
                    (r, start.elapsed().as_secs_f64() * 1e3)
                })
                .collect()
        });
        for ((id, g), (r, ms)) in pending.into_iter().zip(results) {
            state.timings.push(EvaluationTiming {
                generation: gen,
                id,
                wall_ms: ms,
            });
            cache.insert(g, r);
        }
        for ind in &mut state.population {
            if ind.fitness.is_none() {
                ind.fitness = Some(cache[&ind.genome].fitness);
            }
        }
        for ind in &state.population {
            state.log.records.push(IndividualRecord {
                generation: gen,
                id: ind.id,
                born: ind.born,
                parents: ind.parents.clone(),
                genome: ind.genome.clone(),
                fitness: ind.fitness.unwrap_or(0.0),
                diagnostic: cache.get(&ind.genome).and_then(|r| r.diagnostic.clone()),
            });
        }
    }

    fn log_generation(&self, state: &mut SearchState, gen: usize) -> Result<()> {
        let pop = &state.population;
        let mut best = &pop[0];
        for ind in &pop[1..] {
            if fitter(ind, best)? {
                best = ind;
            }
        }
        let fits: Vec<f64> = pop.iter().map(|i| i.fitness.unwrap_or(0.0)).collect();
        let stats = GenerationStats {
            generation: gen,
            best: best.fitness.unwrap_or(0.0),
            mean: fits.iter().sum::<f64>() / fits.len() as f64,
            worst: fits.iter().copied().fold(f64::INFINITY, f64::min),
            best_id: best.id,
        };
        let previous = state.log.new_best.last().map(|b| b.fitness);
        if previous.is_none_or(|p| stats.best > p) {
            state.log.new_best.push(NewBest {
                generation: gen,
                id: stats.best_id,
                fitness: stats.best,
            });
        }
        state.log.generations.push(stats);
        Ok(())
    }

    /// Elites carried over unchanged, the rest bred by tournament selection,
    /// group crossover and mutation.
    fn breed(&self, state: &SearchState, gen: usize) -> Result<(Vec<Individual>, usize)> {
        let c = &self.config;
        let pop = &state.population;
        let mut ranked: Vec<&Individual> = pop.iter().collect();
        ranked.sort_by(|a, b| {
            let (fa, fb) = (a.fitness.unwrap_or(0.0), b.fitness.unwrap_or(0.0));
            fb.total_cmp(&fa).then(a.id.cmp(&b.id))
        });
        let mut next: Vec<Individual> = ranked[..c.elite].iter().map(|&i| i.clone()).collect();
        let mut rng = stream_indexed(self.seed, "ga-breed", gen as u64);
        let mut id = state.next_id;
        while next.len() < c.population {
            let a = tournament_select(pop, c.tournament, &mut rng)?;
            let b = tournament_select(pop, c.tournament, &mut rng)?;
            let child =
                group_crossover(self.table, &a.genome, &b.genome, c.crossover_rate, &mut rng);
            let child = mutate(self.table, &child, c.mutation_rate, &mut rng).genome;
            next.push(Individual::new(id, child, gen + 1, vec![a.id, b.id]));
            id += 1;
        }
        Ok((next, id))
    }
}

/// One row per population member per generation; deterministic for a fixed
/// seed, config and data.
pub fn write_log_csv(table: &GeneTable, log: &SearchLog, out: &mut impl Write) -> Result<()> {
    let io = |e| Error::io("search log", e);
    let names: Vec<&str> = table.genes().iter().map(|g| g.name.as_str()).collect();
    writeln!(
        out,
        "generation,id,born,parents,{},fitness",
        names.join(",")
    )
    .map_err(io)?;
    for r in &log.records {
        let values = table.values(&r.genome)?;
        let genes: Vec<String> = names.iter().map(|n| values[*n].to_string()).collect();
        let parents: Vec<String> = r.parents.iter().map(usize::to_string).collect();
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.generation,
            r.id,
            r.born,
            parents.join(";"),
            genes.join(","),
            r.fitness
        )
        .map_err(io)?;
    }
    Ok(())
}

pub fn write_timing_csv(timings: &[EvaluationTiming], out: &mut impl Write) -> Result<()> {
    let io = |e| Error::io("search timing", e);
    writeln!(out, "generation,id,wall_ms").map_err(io)?;
    for t in timings {
        writeln!(out, "{},{},{:.3}", t.generation, t.id, t.wall_ms).map_err(io)?;
    }
    Ok(())
}

/// Summary with the best genome spelled out by gene name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSummary {
    pub search_space_size: u128,
    pub best_id: usize,
    pub best_fitness: f64,
    pub best_genome: BTreeMap<String, super::GeneValue>,
    pub generations: Vec<GenerationStats>,
    pub new_best: Vec<NewBest>,
}

pub fn summarize(table: &GeneTable, state: &SearchState) -> Result<SearchSummary> {
    let best = state
        .best()
        .ok_or_else(|| Error::State("no generation has been evaluated".into()))?;
    Ok(SearchSummary {
        search_space_size: table.search_space_size(),
        best_id: best.id,
        best_fitness: best.fitness,
        best_genome: table.values(&best.genome)?,
        generations: state.log.generations.clone(),
        new_best: state.log.new_best.clone(),
    })
}
