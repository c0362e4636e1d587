//! Interferometer meshes built from two-mode units.
//!
//! Each unit on modes `(p, p + 1)` applies a phase shift `phi` on mode `p`
//! followed by the beamsplitter `[[cos a, i sin a], [i sin a, cos a]]`:
//!
//! ```text
//! u(phi, a) = [[cos a * e^{i phi}, i sin a],
//!              [i sin a * e^{i phi}, cos a]]
//! ```
//!
//! Units are grouped into columns applied left to right; a column's units
//! act on disjoint mode pairs.

use serde::{Deserialize, Serialize};

use super::matrix::{CMatrix, C64, I};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshLayout {
    modes: usize,
    /// Upper mode of every unit, per column.
    columns: Vec<Vec<usize>>,
}

impl MeshLayout {
    pub fn new(modes: usize, columns: Vec<Vec<usize>>) -> Result<Self> {
        for col in &columns {
            let mut used = vec![false; modes];
            for &p in col {
                if p + 1 >= modes || used[p] || used[p + 1] {
                    return Err(Error::Argument(format!(
                        "unit on modes ({p}, {}) invalid in a {modes}-mode column {col:?}",
                        p + 1
                    )));
                }
                used[p] = true;
                used[p + 1] = true;
            }
        }
        Ok(Self { modes, columns })
    }

    /// Rectangular mesh of `columns` columns alternating between the pairs
    /// (0,1),(2,3),... and (1,2),(3,4),...
    pub fn rectangular(modes: usize, columns: usize) -> Self {
        let columns = (0..columns)
            .map(|c| (c % 2..modes.saturating_sub(1)).step_by(2).collect())
            .collect();
        Self { modes, columns }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn columns(&self) -> &[Vec<usize>] {
        &self.columns
    }

    pub fn unit_count(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }

    /// Two trainable phases (phi, alpha) per unit.
    pub fn param_count(&self) -> usize {
        2 * self.unit_count()
    }

    pub fn unitary(&self, params: &[f64]) -> Result<CMatrix> {
        Ok(self
            .propagate(params)?
            .pop()
            .expect("at least the identity"))
    }

    /// Partial products after each column, starting with the identity.
    pub fn propagate(&self, params: &[f64]) -> Result<Vec<CMatrix>> {
        if params.len() != self.param_count() {
            return Err(Error::Dimension(format!(
                "mesh of {} units needs {} phases, got {}",
                self.unit_count(),
                self.param_count(),
                params.len()
            )));
        }
        if let Some(bad) = params.iter().find(|p| !p.is_finite()) {
            return Err(Error::Parameter(format!("non-finite mesh phase {bad}")));
        }
        let mut stages = Vec::with_capacity(self.columns.len() + 1);
        let mut x = CMatrix::identity(self.modes);
        stages.push(x.clone());
        let mut k = 0;
        for col in &self.columns {
            for &p in col {
                let u = unit(params[k], params[k + 1]);
                k += 2;
                let (ra, rb) = x.row_pair_mut(p, p + 1);
                for (a, b) in ra.iter_mut().zip(rb.iter_mut()) {
                    let (va, vb) = (*a, *b);
                    *a = u[0][0] * va + u[0][1] * vb;
                    *b = u[1][0] * va + u[1][1] * vb;
                }
            }
            stages.push(x.clone());
        }
        Ok(stages)
    }

    /// Gradient of a real loss with respect to the mesh phases, given the
    /// adjoint `d L / d U` (as `dL/dRe + i dL/dIm`) of the mesh unitary and
    /// the stages recorded by [`MeshLayout::propagate`].
    pub fn backprop(&self, params: &[f64], stages: &[CMatrix], adj: &CMatrix) -> Vec<f64> {
        let mut grads = vec![0.0; params.len()];
        let mut ybar = adj.clone();
        let mut k_end = self.param_count();
        for (ci, col) in self.columns.iter().enumerate().rev() {
            let prev = &stages[ci];
            k_end -= 2 * col.len();
            for (ui, &p) in col.iter().enumerate() {
                let k = k_end + 2 * ui;
                let (phi, alpha) = (params[k], params[k + 1]);
                let u = unit(phi, alpha);
                // adjoint of the 2x2 block: ubar = Ybar[p..p+2] * X[p..p+2]^H
                let mut ubar = [[C64::new(0.0, 0.0); 2]; 2];
                for a in 0..2 {
                    for b in 0..2 {
                        ubar[a][b] = ybar
                            .row(p + a)
                            .iter()
                            .zip(prev.row(p + b))
                            .map(|(y, x)| y * x.conj())
                            .sum();
                    }
                }
                let (dphi, dalpha) = unit_derivatives(phi, alpha);
                let pair = |d: [[C64; 2]; 2]| -> f64 {
                    (0..2)
                        .flat_map(|a| (0..2).map(move |b| (a, b)))
                        .map(|(a, b)| (ubar[a][b].conj() * d[a][b]).re)
                        .sum()
                };
                grads[k] = pair(dphi);
                grads[k + 1] = pair(dalpha);
                // Xbar = u^H Ybar on the two rows
                let (ra, rb) = ybar.row_pair_mut(p, p + 1);
                for (a, b) in ra.iter_mut().zip(rb.iter_mut()) {
                    let (va, vb) = (*a, *b);
                    *a = u[0][0].conj() * va + u[1][0].conj() * vb;
                    *b = u[0][1].conj() * va + u[1][1].conj() * vb;
                }
            }
        }
        grads
    }
}

pub fn unit(phi: f64, alpha: f64) -> [[C64; 2]; 2] {
    let e = C64::from_polar(1.0, phi);
    let (s, c) = alpha.sin_cos();
    [[e * c, I * s], [I * e * s, C64::new(c, 0.0)]]
}

fn unit_derivatives(phi: f64, alpha: f64) -> ([[C64; 2]; 2], [[C64; 2]; 2]) {
    let e = C64::from_polar(1.0, phi);
    let (s, c) = alpha.sin_cos();
    let zero = C64::new(0.0, 0.0);
    let dphi = [[I * e * c, zero], [-e * s, zero]];
    let dalpha = [[-e * s, I * c], [I * e * c, C64::new(-s, 0.0)]];
    (dphi, dalpha)
}
