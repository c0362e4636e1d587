//! Selection, recombination and mutation.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::genes::GeneTable;
use super::genome::Genome;
use crate::error::{Error, Result};

/// A population member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub id: usize,
    pub genome: Genome,
    pub fitness: Option<f64>,
    /// Generation in which the individual was created.
    pub born: usize,
    pub parents: Vec<usize>,
}

impl Individual {
    pub fn new(id: usize, genome: Genome, born: usize, parents: Vec<usize>) -> Self {
        Self {
            id,
            genome,
            fitness: None,
            born,
            parents,
        }
    }

    fn scored(&self) -> Result<f64> {
        self.fitness
            .ok_or_else(|| Error::Contract(format!("individual {} has no fitness", self.id)))
    }
}

/// Orders by fitness (higher first), then by id (lower first).
pub fn fitter(a: &Individual, b: &Individual) -> Result<bool> {
    let (fa, fb) = (a.scored()?, b.scored()?);
    Ok(fa > fb || (fa == fb && a.id < b.id))
}

/// Best of `k` members drawn without replacement; `k` is capped at the
/// population size.
pub fn tournament_select<'a, R: Rng + ?Sized>(
    population: &'a [Individual],
    k: usize,
    rng: &mut R,
) -> Result<&'a Individual> {
    if population.is_empty() || k == 0 {
        return Err(Error::Contract(
            "tournament needs members and k >= 1".into(),
        ));
    }
    for ind in population {
        ind.scored()?;
    }
    let drawn = sample(rng, population.len(), k.min(population.len()));
    let mut best = &population[drawn.index(0)];
    for i in drawn.iter().skip(1) {
        if fitter(&population[i], best)? {
            best = &population[i];
        }
    }
    Ok(best)
}

/// With probability `p_c`, each gene group is inherited as a whole from `a`
/// or `b` with equal odds; otherwise the child copies `a`.
pub fn group_crossover<R: Rng + ?Sized>(
    table: &GeneTable,
    a: &Genome,
    b: &Genome,
    p_c: f64,
    rng: &mut R,
) -> Genome {
    let mut child = a.indices().to_vec();
    if rng.random::<f64>() < p_c {
        for &group in table.groups() {
            if rng.random_bool(0.5) {
                for i in table.members(group) {
                    child[i] = b.indices()[i];
                }
            }
        }
    }
    Genome::new(child)
}

/// Result of [`mutate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mutation {
    pub genome: Genome,
    /// Genes selected for mutation (a step or redraw may keep the value).
    pub mutated: Vec<usize>,
}

/// Each gene mutates with probability `mu`: half the time a step of one
/// position along its option list (clamped), otherwise a uniform redraw.
pub fn mutate<R: Rng + ?Sized>(
    table: &GeneTable,
    genome: &Genome,
    mu: f64,
    rng: &mut R,
) -> Mutation {
    let mut idx = genome.indices().to_vec();
    let mut mutated = Vec::new();
    for (i, g) in table.genes().iter().enumerate() {
        if rng.random::<f64>() >= mu {
            continue;
        }
        mutated.push(i);
        let n = g.options.len();
        idx[i] = if rng.random_bool(0.5) {
            if rng.random_bool(0.5) {
                (idx[i] + 1).min(n - 1)
            } else {
                idx[i].saturating_sub(1)
            }
        } else {
            rng.random_range(0..n)
        };
    }
    Mutation {
        genome: Genome::new(idx),
        mutated,
    }
}
