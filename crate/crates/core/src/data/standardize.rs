use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const STD_FLOOR: f64 = 1e-8;

/// Per-feature z-scoring fitted on training rows.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Standardizer {
    /// Fits on `rows` (row-major, `features` columns). The population
    /// standard deviation is floored at `1e-8`.
    pub fn fit(rows: &[f64], features: usize) -> Result<Self> {
        if features == 0 || rows.is_empty() || rows.len() % features != 0 {
            return Err(Error::Dimension(format!(
                "cannot fit a standardizer on {} values of width {features}",
                rows.len()
            )));
        }
        let n = (rows.len() / features) as f64;
        let mut mean = vec![0.0; features];
        for row in rows.chunks(features) {
            mean.iter_mut().zip(row).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; features];
        for row in rows.chunks(features) {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.iter().map(|s| (s / n).sqrt().max(STD_FLOOR)).collect();
        Ok(Self { mean, std })
    }

    pub fn is_fitted(&self) -> bool {
        !self.mean.is_empty()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn apply(&self, rows: &[f64]) -> Result<Vec<f64>> {
        if !self.is_fitted() {
            return Err(Error::State("standardizer applied before fit".into()));
        }
        let f = self.mean.len();
        if rows.len() % f != 0 {
            return Err(Error::Dimension(format!(
                "{} values are not rows of width {f}",
                rows.len()
            )));
        }
        Ok(rows
            .chunks(f)
            .flat_map(|row| {
                row.iter()
                    .zip(&self.mean)
                    .zip(&self.std)
                    .map(|((v, m), s)| (v - m) / s)
            })
            .collect())
    }
}
