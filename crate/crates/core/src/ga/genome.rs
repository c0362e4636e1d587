use rand::Rng;
use serde::{Deserialize, Serialize};

use super::genes::GeneTable;
use crate::rng::derive_seed;

/// Chosen option index per gene, in gene-table order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Genome(Vec<usize>);

impl Genome {
    pub fn new(indices: Vec<usize>) -> Self {
        Self(indices)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Stable 64-bit digest, used for memoization and per-genome seeds.
    pub fn digest(&self) -> u64 {
        let words: Vec<u64> = self.0.iter().map(|&i| i as u64).collect();
        derive_seed(&words)
    }

    /// Training seed of this genome under search seed `seed`.
    pub fn training_seed(&self, seed: u64) -> u64 {
        derive_seed(&[seed, self.digest()])
    }
}

/// Draws every gene uniformly from its option list.
pub fn random_genome<R: Rng + ?Sized>(table: &GeneTable, rng: &mut R) -> Genome {
    Genome(
        table
            .genes()
            .iter()
            .map(|g| rng.random_range(0..g.options.len()))
            .collect(),
    )
}
