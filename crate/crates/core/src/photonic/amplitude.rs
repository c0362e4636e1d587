//! Output amplitudes of a linear-optical transfer matrix.
//!
//! For input occupation `T` and output occupation `S` the amplitude is
//! `perm(U[S, T]) / sqrt(prod s! * prod t!)`, where `U[S, T]` repeats row `i`
//! `s_i` times and column `j` `t_j` times. Two interchangeable backends
//! compute it:
//!
//! * `ryser` evaluates one permanent per output state;
//! * `expansion` multiplies out the creation operators
//!   `prod_k (sum_i U[i, t_k] a_i^dagger)` one photon at a time, sharing the
//!   partial products between output states.

use std::sync::Arc;

use super::fock::{occupation_factorial, FockBasis};
use super::matrix::{CMatrix, C64, ZERO};
use super::permanent::{permanent, permanent_gradient};
use crate::error::{Error, Result};
use crate::registry::Registry;

/// Precomputed bookkeeping for one (modes, input occupation) pair.
#[derive(Debug, Clone)]
pub struct BasisPlan {
    input: Vec<u8>,
    /// Input modes, one entry per photon, in order of addition.
    photon_modes: Vec<usize>,
    /// `levels[k]` is the `k`-photon basis.
    levels: Vec<FockBasis>,
    /// For each state of level `k >= 1`: `(mode, index in level k-1)` for
    /// every occupied mode.
    links: Vec<Vec<Vec<(usize, usize)>>>,
    /// `sqrt(prod s! / prod t!)` per output state.
    weights: Vec<f64>,
    /// `sqrt(prod s! prod t!)` per output state.
    norms: Vec<f64>,
}

impl BasisPlan {
    pub fn new(input: &[u8], cap: usize) -> Result<Self> {
        let modes = input.len();
        let photons: usize = input.iter().map(|&t| t as usize).sum();
        let output = FockBasis::with_cap(modes, photons, cap)?;
        let mut levels = Vec::with_capacity(photons + 1);
        for k in 0..photons {
            levels.push(FockBasis::with_cap(modes, k, cap)?);
        }
        levels.push(output);
        let mut links = vec![Vec::new()];
        let mut scratch = vec![0u8; modes];
        for k in 1..=photons {
            let lk = levels[k]
                .states()
                .iter()
                .map(|s| {
                    scratch.copy_from_slice(s);
                    (0..modes)
                        .filter(|&i| s[i] > 0)
                        .map(|i| {
                            scratch[i] -= 1;
                            let j = levels[k - 1]
                                .index_of(&scratch)
                                .expect("closed under removal");
                            scratch[i] += 1;
                            (i, j)
                        })
                        .collect()
                })
                .collect();
            links.push(lk);
        }
        let photon_modes = input
            .iter()
            .enumerate()
            .flat_map(|(j, &t)| std::iter::repeat_n(j, t as usize))
            .collect();
        let tfact = occupation_factorial(input);
        let out = &levels[photons];
        let weights = out
            .states()
            .iter()
            .map(|s| (occupation_factorial(s) / tfact).sqrt())
            .collect();
        let norms = out
            .states()
            .iter()
            .map(|s| (occupation_factorial(s) * tfact).sqrt())
            .collect();
        Ok(Self {
            input: input.to_vec(),
            photon_modes,
            levels,
            links,
            weights,
            norms,
        })
    }

    pub fn modes(&self) -> usize {
        self.input.len()
    }

    pub fn photons(&self) -> usize {
        self.photon_modes.len()
    }

    pub fn input(&self) -> &[u8] {
        &self.input
    }

    pub fn output_basis(&self) -> &FockBasis {
        &self.levels[self.photons()]
    }
}

/// Computes amplitudes and pulls amplitude adjoints back to the matrix.
pub trait AmplitudeBackend: Send + Sync {
    fn name(&self) -> &'static str;

    fn amplitudes(&self, u: &CMatrix, plan: &BasisPlan) -> Result<Vec<C64>>;

    /// Given `adj[s] = dL/dRe A_s + i dL/dIm A_s`, returns the same kind of
    /// adjoint for every entry of `u`.
    fn backprop(&self, u: &CMatrix, plan: &BasisPlan, adj: &[C64]) -> Result<CMatrix>;
}

pub type BackendFactory = fn() -> Arc<dyn AmplitudeBackend>;

pub fn amplitude_backends() -> Registry<BackendFactory> {
    Registry::<BackendFactory>::new("amplitude backend")
        .with("ryser", || Arc::new(RyserBackend))
        .with("expansion", || Arc::new(ExpansionBackend))
}

pub const DEFAULT_BACKEND: &str = "expansion";

pub fn backend(name: &str) -> Result<Arc<dyn AmplitudeBackend>> {
    Ok((amplitude_backends().get(name)?)())
}

fn check_matrix(u: &CMatrix, plan: &BasisPlan) -> Result<()> {
    if !u.is_square() || u.rows() != plan.modes() {
        return Err(Error::Dimension(format!(
            "{}x{} transfer matrix for {} modes",
            u.rows(),
            u.cols(),
            plan.modes()
        )));
    }
    Ok(())
}

/// One Ryser permanent per output state.
pub struct RyserBackend;

impl RyserBackend {
    fn submatrix(u: &CMatrix, rows: &[usize], cols: &[usize]) -> CMatrix {
        let k = rows.len();
        let data = rows
            .iter()
            .flat_map(|&r| cols.iter().map(move |&c| u[(r, c)]))
            .collect();
        CMatrix::from_vec(k, k, data).expect("square")
    }

    fn rows_of(state: &[u8]) -> Vec<usize> {
        state
            .iter()
            .enumerate()
            .flat_map(|(i, &s)| std::iter::repeat_n(i, s as usize))
            .collect()
    }
}

impl AmplitudeBackend for RyserBackend {
    fn name(&self) -> &'static str {
        "ryser"
    }

    fn amplitudes(&self, u: &CMatrix, plan: &BasisPlan) -> Result<Vec<C64>> {
        check_matrix(u, plan)?;
        plan.output_basis()
            .states()
            .iter()
            .zip(&plan.norms)
            .map(|(s, &norm)| {
                let sub = Self::submatrix(u, &Self::rows_of(s), &plan.photon_modes);
                Ok(permanent(&sub)? / norm)
            })
            .collect()
    }

    fn backprop(&self, u: &CMatrix, plan: &BasisPlan, adj: &[C64]) -> Result<CMatrix> {
        check_matrix(u, plan)?;
        let mut out = CMatrix::zeros(u.rows(), u.cols());
        for ((s, &norm), &a) in plan
            .output_basis()
            .states()
            .iter()
            .zip(&plan.norms)
            .zip(adj)
        {
            if a == ZERO {
                continue;
            }
            let rows = Self::rows_of(s);
            let sub = Self::submatrix(u, &rows, &plan.photon_modes);
            let g = permanent_gradient(&sub)?;
            for (r, &i) in rows.iter().enumerate() {
                for (c, &j) in plan.photon_modes.iter().enumerate() {
                    out[(i, j)] += (g[(r, c)] / norm).conj() * a;
                }
            }
        }
        Ok(out)
    }
}

/// Creation-operator product, one photon at a time.
pub struct ExpansionBackend;

impl ExpansionBackend {
    fn coefficients(u: &CMatrix, plan: &BasisPlan) -> Vec<Vec<C64>> {
        let mut levels: Vec<Vec<C64>> = Vec::with_capacity(plan.photons() + 1);
        levels.push(vec![C64::new(1.0, 0.0)]);
        for (k, &t) in plan.photon_modes.iter().enumerate() {
            let prev = &levels[k];
            let next = plan.links[k + 1]
                .iter()
                .map(|links| links.iter().map(|&(i, j)| u[(i, t)] * prev[j]).sum())
                .collect();
            levels.push(next);
        }
        levels
    }
}

impl AmplitudeBackend for ExpansionBackend {
    fn name(&self) -> &'static str {
        "expansion"
    }

    fn amplitudes(&self, u: &CMatrix, plan: &BasisPlan) -> Result<Vec<C64>> {
        check_matrix(u, plan)?;
        let mut levels = Self::coefficients(u, plan);
        let top = levels.pop().expect("at least the vacuum level");
        Ok(top.iter().zip(&plan.weights).map(|(c, w)| c * w).collect())
    }

    fn backprop(&self, u: &CMatrix, plan: &BasisPlan, adj: &[C64]) -> Result<CMatrix> {
        check_matrix(u, plan)?;
        let levels = Self::coefficients(u, plan);
        let n = plan.photons();
        let mut out = CMatrix::zeros(u.rows(), u.cols());
        let mut cbar: Vec<C64> = adj.iter().zip(&plan.weights).map(|(a, w)| a * w).collect();
        for k in (1..=n).rev() {
            let t = plan.photon_modes[k - 1];
            let prev = &levels[k - 1];
            let mut prev_bar = vec![ZERO; prev.len()];
            for (links, &g) in plan.links[k].iter().zip(&cbar) {
                if g == ZERO {
                    continue;
                }
                for &(i, j) in links {
                    prev_bar[j] += u[(i, t)].conj() * g;
                    out[(i, t)] += prev[j].conj() * g;
                }
            }
            cbar = prev_bar;
        }
        Ok(out)
    }
}
