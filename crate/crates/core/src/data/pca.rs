use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const JACOBI_TOLERANCE: f64 = 1e-10;
const MAX_SWEEPS: usize = 100;

/// Eigendecomposition of a symmetric `n x n` matrix by cyclic Jacobi
/// rotations. Returns eigenvalues and the matching eigenvectors as the
/// columns of a row-major matrix, in no particular order.
pub fn jacobi_eigen(matrix: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if matrix.len() != n * n {
        return Err(Error::Dimension(format!(
            "{} values do not form a {n}x{n} matrix",
            matrix.len()
        )));
    }
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; n * n];
    (0..n).for_each(|i| v[i * n + i] = 1.0);
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= JACOBI_TOLERANCE * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < f64::MIN_POSITIVE {
                    continue;
                }
                let (app, aqq) = (a[p * n + p], a[q * n + q]);
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let t = if tau == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    Ok(((0..n).map(|i| a[i * n + i]).collect(), v))
}

/// Top-`d` principal axes of standardized training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    features: usize,
    dim: usize,
    /// `features x dim`, row-major, orthonormal columns.
    components: Vec<f64>,
    explained_variance: Vec<f64>,
}

impl Pca {
    /// Eigenvectors of the sample covariance, sorted by decreasing
    /// eigenvalue; each column's largest-magnitude entry is made positive.
    pub fn fit(rows: &[f64], features: usize, dim: usize) -> Result<Self> {
        if dim == 0 || dim > features {
            return Err(Error::Dimension(format!(
                "cannot keep {dim} components of {features} features"
            )));
        }
        if rows.len() % features != 0 || rows.len() < 2 * features {
            return Err(Error::Dimension(format!(
                "PCA needs at least two rows of width {features}, got {} values",
                rows.len()
            )));
        }
        let n = rows.len() / features;
        let mut mean = vec![0.0; features];
        for row in rows.chunks(features) {
            mean.iter_mut().zip(row).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut cov = vec![0.0; features * features];
        let mut centred = vec![0.0; features];
        for row in rows.chunks(features) {
            centred
                .iter_mut()
                .zip(row)
                .zip(&mean)
                .for_each(|((c, v), m)| *c = v - m);
            for i in 0..features {
                let ci = centred[i];
                if ci == 0.0 {
                    continue;
                }
                let dst = &mut cov[i * features..(i + 1) * features];
                dst[i..]
                    .iter_mut()
                    .zip(&centred[i..])
                    .for_each(|(d, c)| *d += ci * c);
            }
        }
        for i in 0..features {
            for j in i..features {
                let v = cov[i * features + j] / (n - 1) as f64;
                cov[i * features + j] = v;
                cov[j * features + i] = v;
            }
        }
        let (values, vectors) = jacobi_eigen(&cov, features)?;
        let mut order: Vec<usize> = (0..features).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        let mut components = vec![0.0; features * dim];
        for (c, &src) in order[..dim].iter().enumerate() {
            let col: Vec<f64> = (0..features).map(|r| vectors[r * features + src]).collect();
            let pivot = col
                .iter()
                .copied()
                .reduce(|a, b| if b.abs() > a.abs() { b } else { a })
                .unwrap_or(1.0);
            let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
            for (r, v) in col.iter().enumerate() {
                components[r * dim + c] = sign * v;
            }
        }
        Ok(Self {
            features,
            dim,
            components,
            explained_variance: order[..dim].iter().map(|&i| values[i]).collect(),
        })
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    /// `y = x C` for each row; rows are not re-centred.
    pub fn apply(&self, rows: &[f64]) -> Result<Vec<f64>> {
        let (f, d) = (self.features, self.dim);
        if rows.len() % f != 0 {
            return Err(Error::Dimension(format!(
                "{} values are not rows of width {f}",
                rows.len()
            )));
        }
        let mut out = vec![0.0; rows.len() / f * d];
        for (row, y) in rows.chunks(f).zip(out.chunks_mut(d)) {
            for (x, c) in row.iter().zip(self.components.chunks(d)) {
                if *x != 0.0 {
                    y.iter_mut().zip(c).for_each(|(acc, w)| *acc += x * w);
                }
            }
        }
        Ok(out)
    }
}
