//! The photonic layer: entangling mesh, data-encoding phases, second mesh.
//!
//! `U = U_ent2 · diag(e^{i θ_1}, …, e^{i θ_d}, 1, …) · U_ent1`; the output
//! distribution over the Fock basis follows from the amplitudes of `U`.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::amplitude::{backend, AmplitudeBackend, BasisPlan, DEFAULT_BACKEND};
use super::fock::{FockBasis, DEFAULT_BASIS_CAP};
use super::matrix::{CMatrix, C64, I};
use super::mesh::MeshLayout;
use crate::error::{Error, Result};

/// Serializable description of a circuit's structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub input: Vec<u8>,
    pub encoded_modes: usize,
    pub layer1: MeshLayout,
    pub layer2: MeshLayout,
    #[serde(default = "default_backend_name")]
    pub backend: String,
    #[serde(default = "default_cap")]
    pub basis_cap: usize,
}

fn default_backend_name() -> String {
    DEFAULT_BACKEND.to_string()
}

fn default_cap() -> usize {
    DEFAULT_BASIS_CAP
}

/// `M = d + 1` modes and `n = ceil(M / 2)` photons, one in each even mode.
pub fn modes_and_photons(input_size: usize) -> (usize, usize) {
    let modes = input_size + 1;
    (modes, modes.div_ceil(2))
}

impl CircuitSpec {
    /// The layer used by the hybrid model for `input_size` encoded features:
    /// two rectangular meshes of `M` columns around the encoding phases.
    pub fn for_input_size(input_size: usize) -> Self {
        let (modes, _) = modes_and_photons(input_size);
        let input = (0..modes).map(|m| u8::from(m % 2 == 0)).collect();
        Self {
            input,
            encoded_modes: input_size,
            layer1: MeshLayout::rectangular(modes, modes),
            layer2: MeshLayout::rectangular(modes, modes),
            backend: default_backend_name(),
            basis_cap: DEFAULT_BASIS_CAP,
        }
    }

    pub fn modes(&self) -> usize {
        self.input.len()
    }

    pub fn photons(&self) -> usize {
        self.input.iter().map(|&t| t as usize).sum()
    }

    pub fn mesh_param_count(&self) -> usize {
        self.layer1.param_count() + self.layer2.param_count()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.modes();
        if m == 0 || self.layer1.modes() != m || self.layer2.modes() != m {
            return Err(Error::Dimension(format!(
                "circuit of {m} modes with meshes of {} and {} modes",
                self.layer1.modes(),
                self.layer2.modes()
            )));
        }
        if self.encoded_modes > m {
            return Err(Error::Dimension(format!(
                "{} encoding phases on {m} modes",
                self.encoded_modes
            )));
        }
        Ok(())
    }
}

/// Circuit structure with its precomputed basis bookkeeping.
pub struct CircuitLayout {
    spec: CircuitSpec,
    plan: BasisPlan,
    backend: Arc<dyn AmplitudeBackend>,
}

impl std::fmt::Debug for CircuitLayout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CircuitLayout")
            .field("spec", &self.spec)
            .field("basis", &self.plan.output_basis().len())
            .finish()
    }
}

impl CircuitLayout {
    pub fn new(spec: CircuitSpec) -> Result<Self> {
        spec.validate()?;
        let plan = BasisPlan::new(&spec.input, spec.basis_cap)?;
        let backend = backend(&spec.backend)?;
        Ok(Self {
            spec,
            plan,
            backend,
        })
    }

    pub fn with_backend(mut self, name: &str) -> Result<Self> {
        self.backend = backend(name)?;
        self.spec.backend = name.to_string();
        Ok(self)
    }

    pub fn spec(&self) -> &CircuitSpec {
        &self.spec
    }

    pub fn basis(&self) -> &FockBasis {
        self.plan.output_basis()
    }

    pub fn modes(&self) -> usize {
        self.spec.modes()
    }

    pub fn photons(&self) -> usize {
        self.spec.photons()
    }

    pub fn encoded_modes(&self) -> usize {
        self.spec.encoded_modes
    }

    pub fn mesh_param_count(&self) -> usize {
        self.spec.mesh_param_count()
    }

    pub fn backend_name(&self) -> &'static str {
        self.backend.name()
    }

    /// Mesh phases drawn uniformly from `[0, 2π)`.
    pub fn random_phases<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.mesh_param_count())
            .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
            .collect()
    }
}

/// Probability of each Fock basis state, in basis order.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputDistribution(pub Vec<f64>);

impl OutputDistribution {
    pub fn probabilities(&self) -> &[f64] {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Everything the backward pass needs from one forward evaluation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    theta: Vec<f64>,
    stages1: Vec<CMatrix>,
    stages2: Vec<CMatrix>,
    unitary: CMatrix,
    amplitudes: Vec<C64>,
    pub distribution: OutputDistribution,
}

impl ForwardCache {
    pub fn unitary(&self) -> &CMatrix {
        &self.unitary
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitGradients {
    pub theta: Vec<f64>,
    pub phases: Vec<f64>,
}

/// A circuit layout together with concrete trainable mesh phases
/// (first mesh, then second mesh).
#[derive(Debug, Clone)]
pub struct PhotonicCircuit {
    layout: Arc<CircuitLayout>,
    phases: Vec<f64>,
}

impl PhotonicCircuit {
    pub fn new(layout: Arc<CircuitLayout>, phases: Vec<f64>) -> Result<Self> {
        if phases.len() != layout.mesh_param_count() {
            return Err(Error::Dimension(format!(
                "circuit needs {} mesh phases, got {}",
                layout.mesh_param_count(),
                phases.len()
            )));
        }
        Ok(Self { layout, phases })
    }

    pub fn layout(&self) -> &CircuitLayout {
        &self.layout
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    fn split(&self) -> (&[f64], &[f64]) {
        self.phases.split_at(self.layout.spec.layer1.param_count())
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.layout.encoded_modes() {
            return Err(Error::Dimension(format!(
                "{} encoding phases for a circuit encoding {}",
                theta.len(),
                self.layout.encoded_modes()
            )));
        }
        if let Some(bad) = theta.iter().find(|t| !t.is_finite()) {
            return Err(Error::Parameter(format!("non-finite encoding phase {bad}")));
        }
        Ok(())
    }

    fn encode(u1: &CMatrix, theta: &[f64]) -> CMatrix {
        let mut v = u1.clone();
        for (k, &t) in theta.iter().enumerate() {
            let e = C64::from_polar(1.0, t);
            v.row_mut(k).iter_mut().for_each(|z| *z *= e);
        }
        v
    }

    /// `U_ent2 · D(θ) · U_ent1`.
    pub fn build_unitary(&self, theta: &[f64]) -> Result<CMatrix> {
        self.check_theta(theta)?;
        let (p1, p2) = self.split();
        let u1 = self.layout.spec.layer1.unitary(p1)?;
        let u2 = self.layout.spec.layer2.unitary(p2)?;
        Ok(u2.matmul(&Self::encode(&u1, theta)))
    }

    pub fn forward(&self, theta: &[f64]) -> Result<ForwardCache> {
        self.check_theta(theta)?;
        let (p1, p2) = self.split();
        let stages1 = self.layout.spec.layer1.propagate(p1)?;
        let stages2 = self.layout.spec.layer2.propagate(p2)?;
        let u1 = stages1.last().expect("identity stage");
        let u2 = stages2.last().expect("identity stage");
        let unitary = u2.matmul(&Self::encode(u1, theta));
        let amplitudes = self
            .layout
            .backend
            .amplitudes(&unitary, &self.layout.plan)?;
        let distribution = OutputDistribution(amplitudes.iter().map(|a| a.norm_sqr()).collect());
        Ok(ForwardCache {
            theta: theta.to_vec(),
            stages1,
            stages2,
            unitary,
            amplitudes,
            distribution,
        })
    }

    pub fn output_distribution(&self, theta: &[f64]) -> Result<OutputDistribution> {
        Ok(self.forward(theta)?.distribution)
    }

    /// Pulls `d L / d P` back to the encoding phases and the mesh phases.
    pub fn backward(&self, cache: &ForwardCache, upstream: &[f64]) -> Result<CircuitGradients> {
        if upstream.len() != cache.amplitudes.len() {
            return Err(Error::Dimension(format!(
                "{} upstream gradients for {} basis states",
                upstream.len(),
                cache.amplitudes.len()
            )));
        }
        // P = |A|^2  =>  Abar = 2 g A
        let adj: Vec<C64> = cache
            .amplitudes
            .iter()
            .zip(upstream)
            .map(|(a, g)| a * (2.0 * g))
            .collect();
        let ubar = self
            .layout
            .backend
            .backprop(&cache.unitary, &self.layout.plan, &adj)?;
        let u1 = cache.stages1.last().expect("identity stage");
        let u2 = cache.stages2.last().expect("identity stage");
        let v = Self::encode(u1, &cache.theta);
        // U = U2 V:  U2bar = Ubar V^H,  Vbar = U2^H Ubar
        let u2bar = ubar.matmul(&v.adjoint());
        let vbar = u2.adjoint().matmul(&ubar);
        // V = D U1:  U1bar = D^H Vbar,  Dbar_kk = sum_j Vbar_kj conj(U1_kj)
        let mut u1bar = vbar.clone();
        let mut theta_grad = vec![0.0; cache.theta.len()];
        for (k, &t) in cache.theta.iter().enumerate() {
            let e = C64::from_polar(1.0, t);
            let dbar: C64 = vbar
                .row(k)
                .iter()
                .zip(u1.row(k))
                .map(|(a, b)| a * b.conj())
                .sum();
            theta_grad[k] = (dbar.conj() * I * e).re;
            u1bar.row_mut(k).iter_mut().for_each(|z| *z *= e.conj());
        }
        let (p1, p2) = self.split();
        let mut phases = self.layout.spec.layer1.backprop(p1, &cache.stages1, &u1bar);
        phases.extend(self.layout.spec.layer2.backprop(p2, &cache.stages2, &u2bar));
        Ok(CircuitGradients {
            theta: theta_grad,
            phases,
        })
    }
}

/// Bucket boundaries for pooling `size` ordered states into `buckets`
/// contiguous groups; the first `size % buckets` groups get one extra state.
pub fn bucket_bounds(size: usize, buckets: usize) -> Result<Vec<(usize, usize)>> {
    if buckets == 0 || buckets > size {
        return Err(Error::Dimension(format!(
            "cannot pool {size} basis states into {buckets} outputs"
        )));
    }
    let (base, extra) = (size / buckets, size % buckets);
    let mut start = 0;
    Ok((0..buckets)
        .map(|b| {
            let len = base + usize::from(b < extra);
            let r = (start, start + len);
            start += len;
            r
        })
        .collect())
}

/// Sums probabilities over contiguous buckets of the ordered basis.
pub fn pool_output(dist: &OutputDistribution, q_out: usize) -> Result<Vec<f64>> {
    let p = dist.probabilities();
    Ok(bucket_bounds(p.len(), q_out)?
        .into_iter()
        .map(|(a, b)| p[a..b].iter().sum())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn two_mode(input: Vec<u8>) -> Arc<CircuitLayout> {
        let spec = CircuitSpec {
            input,
            encoded_modes: 0,
            layer1: MeshLayout::new(2, vec![vec![0]]).unwrap(),
            layer2: MeshLayout::new(2, vec![]).unwrap(),
            backend: "ryser".into(),
            basis_cap: DEFAULT_BASIS_CAP,
        };
        Arc::new(CircuitLayout::new(spec).unwrap())
    }

    #[test]
    fn identity_circuit_keeps_the_photon() {
        let c = PhotonicCircuit::new(two_mode(vec![1, 0]), vec![0.0, 0.0]).unwrap();
        let p = c.output_distribution(&[]).unwrap();
        assert_eq!(p.0, vec![1.0, 0.0]);
    }

    #[test]
    fn hong_ou_mandel_dip() {
        let c = PhotonicCircuit::new(two_mode(vec![1, 1]), vec![0.0, FRAC_PI_4]).unwrap();
        let p = c.output_distribution(&[]).unwrap().0;
        // basis order: (2,0), (1,1), (0,2)
        assert!((p[0] - 0.5).abs() < 1e-12);
        assert!(p[1].abs() < 1e-12);
        assert!((p[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn model_circuit_dimensions() {
        assert_eq!(modes_and_photons(8), (9, 5));
        assert_eq!(modes_and_photons(4), (5, 3));
        let spec = CircuitSpec::for_input_size(8);
        assert_eq!(spec.input, vec![1, 0, 1, 0, 1, 0, 1, 0, 1]);
        assert_eq!(spec.mesh_param_count(), 144);
        let layout = CircuitLayout::new(spec).unwrap();
        assert_eq!(layout.basis().len(), 1287);
    }

    #[test]
    fn mnist_layer_is_capped() {
        assert!(matches!(
            CircuitLayout::new(CircuitSpec::for_input_size(16)),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn pooling_partitions() {
        let d = OutputDistribution(vec![0.1, 0.2, 0.3, 0.25, 0.15]);
        assert_eq!(bucket_bounds(5, 2).unwrap(), vec![(0, 3), (3, 5)]);
        let q = pool_output(&d, 2).unwrap();
        assert!((q[0] - 0.6).abs() < 1e-15 && (q[1] - 0.4).abs() < 1e-15);
        assert_eq!(pool_output(&d, 5).unwrap(), d.0);
        assert!((pool_output(&d, 1).unwrap()[0] - 1.0).abs() < 1e-15);
        assert!(pool_output(&d, 6).is_err());
    }

    #[test]
    fn wrong_theta_length() {
        let layout = Arc::new(CircuitLayout::new(CircuitSpec::for_input_size(2)).unwrap());
        let c = PhotonicCircuit::new(layout, vec![0.0; 12]).unwrap();
        assert!(matches!(c.build_unitary(&[0.0]), Err(Error::Dimension(_))));
        assert!(matches!(
            c.build_unitary(&[0.0, f64::INFINITY]),
            Err(Error::Parameter(_))
        ));
    }
}
