//! Per-image execution time of a thermal photonic QPU.
//!
//! The latency of one inference is
//! `T_prep + T_prop + T_det + T_lat`: phase-shifter reconfiguration
//! (circuit depth times a per-column constant), waveguide propagation,
//! detection scaled by the expected number of shots `1 / eta^n`, and a fixed
//! control-loop overhead. Monte Carlo draws Gaussian multipliers on the
//! three noisy components to give a mean, spread and 95% interval.

mod depth;

pub use depth::{depth_model, depth_models, DepthModel, DepthModelFactory, DEFAULT_DEPTH_MODEL};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HardwareConstants {
    /// Reconfiguration time per circuit column (ms).
    pub reconfig_ms_per_layer: f64,
    /// Refractive index of the silicon-on-insulator waveguides.
    pub n_soi: f64,
    /// Per-photon transmission efficiency.
    pub eta: f64,
    /// Lower bound on the all-photons-survive probability.
    pub p_success_floor: f64,
    /// Detection time at unit success probability (ms).
    pub k_det_ms: f64,
    /// Fixed PCIe/FPGA control latency (ms).
    pub t_lat_ms: f64,
    /// Optical path length through the chip (m).
    pub path_length_m: f64,
    pub sigma_prep: f64,
    pub sigma_det: f64,
    pub sigma_lat: f64,
    pub iterations: usize,
    pub depth_model: String,
}

impl Default for HardwareConstants {
    fn default() -> Self {
        Self {
            reconfig_ms_per_layer: 1.0,
            n_soi: 3.44,
            eta: 0.45,
            p_success_floor: 1e-10,
            k_det_ms: 0.0125,
            t_lat_ms: 0.8,
            path_length_m: 0.03,
            sigma_prep: 0.02,
            sigma_det: 0.10,
            sigma_lat: 0.05,
            iterations: 1000,
            depth_model: DEFAULT_DEPTH_MODEL.to_string(),
        }
    }
}

impl HardwareConstants {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::Argument(what));
        for (name, v) in [
            ("reconfig_ms_per_layer", self.reconfig_ms_per_layer),
            ("k_det_ms", self.k_det_ms),
            ("t_lat_ms", self.t_lat_ms),
            ("path_length_m", self.path_length_m),
            ("sigma_prep", self.sigma_prep),
            ("sigma_det", self.sigma_det),
            ("sigma_lat", self.sigma_lat),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad(format!("eta {} outside (0, 1]", self.eta));
        }
        if !(self.p_success_floor > 0.0 && self.p_success_floor <= 1.0) {
            return bad(format!(
                "p_success_floor {} outside (0, 1]",
                self.p_success_floor
            ));
        }
        if !(self.n_soi > 0.0 && self.n_soi.is_finite()) {
            return bad(format!("n_soi must be positive, got {}", self.n_soi));
        }
        if self.iterations < 2 {
            return bad(format!(
                "need at least 2 Monte Carlo iterations, got {}",
                self.iterations
            ));
        }
        depth_model(&self.depth_model).map(|_| ())
    }

    pub fn p_success(&self, photons: usize) -> f64 {
        let exp = i32::try_from(photons).unwrap_or(i32::MAX);
        self.eta.powi(exp).max(self.p_success_floor)
    }
}

/// Deterministic component times (ms).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub t_prep: f64,
    pub t_prop: f64,
    pub t_det: f64,
    pub t_lat: f64,
}

impl Components {
    pub fn sum(&self) -> f64 {
        self.t_prep + self.t_prop + self.t_det + self.t_lat
    }
}

/// Mean, sample standard deviation and `mean +- 1.96 std` interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Summary {
    pub fn new(mean: f64, std: f64) -> Self {
        Self {
            mean,
            std,
            ci_low: mean - Z_95 * std,
            ci_high: mean + Z_95 * std,
        }
    }

    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self::new(mean, var.sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingEstimate {
    pub modes: usize,
    pub photons: usize,
    pub depth: usize,
    pub p_success: f64,
    pub constants: HardwareConstants,
    pub components: Components,
    /// Monte Carlo means of each component.
    pub sampled: Components,
    pub quantum: Summary,
}

/// Host-side forward time measured over repeated runs (ms).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalTiming {
    pub median_ms: f64,
    pub std_ms: f64,
    pub runs: usize,
}

impl ClassicalTiming {
    pub fn from_samples(times: &[f64]) -> Self {
        let mut sorted = times.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            median_ms: sorted.get(sorted.len() / 2).copied().unwrap_or(0.0),
            std_ms: Summary::from_samples(times).std,
            runs: times.len(),
        }
    }

    pub fn fixed(ms: f64, std_ms: f64) -> Self {
        Self {
            median_ms: ms,
            std_ms,
            runs: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub estimate: TimingEstimate,
    pub classical: ClassicalTiming,
    pub total: Summary,
}

impl LatencyReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Deterministic components for `modes` modes and `photons` photons.
pub fn components(
    modes: usize,
    photons: usize,
    c: &HardwareConstants,
) -> Result<(usize, Components)> {
    c.validate()?;
    let depth = depth_model(&c.depth_model)?.depth(modes)?;
    let group_velocity = SPEED_OF_LIGHT / c.n_soi;
    Ok((
        depth,
        Components {
            t_prep: depth as f64 * c.reconfig_ms_per_layer,
            t_prop: c.path_length_m / group_velocity * 1e3,
            t_det: c.k_det_ms / c.p_success(photons),
            t_lat: c.t_lat_ms,
        },
    ))
}

fn multiplier(sigma: f64) -> Normal<f64> {
    Normal::new(1.0, sigma).expect("sigma validated finite and >= 0")
}

pub fn estimate<R: Rng + ?Sized>(
    modes: usize,
    photons: usize,
    constants: &HardwareConstants,
    rng: &mut R,
) -> Result<TimingEstimate> {
    let (depth, det) = components(modes, photons, constants)?;
    let (prep, dnoise, lat) = (
        multiplier(constants.sigma_prep),
        multiplier(constants.sigma_det),
        multiplier(constants.sigma_lat),
    );
    let n = constants.iterations;
    let mut totals = Vec::with_capacity(n);
    let mut acc = [0.0; 3];
    for _ in 0..n {
        let p = (det.t_prep * prep.sample(rng)).max(0.0);
        let d = (det.t_det * dnoise.sample(rng)).max(0.0);
        let l = (det.t_lat * lat.sample(rng)).max(0.0);
        acc[0] += p;
        acc[1] += d;
        acc[2] += l;
        totals.push(p + det.t_prop + d + l);
    }
    let nf = n as f64;
    Ok(TimingEstimate {
        modes,
        photons,
        depth,
        p_success: constants.p_success(photons),
        constants: constants.clone(),
        components: det,
        sampled: Components {
            t_prep: acc[0] / nf,
            t_prop: det.t_prop,
            t_det: acc[1] / nf,
            t_lat: acc[2] / nf,
        },
        quantum: Summary::from_samples(&totals),
    })
}

/// Quantum subtotal plus the measured classical time; spreads combine as
/// independent.
pub fn estimate_total(estimate: &TimingEstimate, classical: ClassicalTiming) -> LatencyReport {
    let q = estimate.quantum;
    LatencyReport {
        estimate: estimate.clone(),
        classical,
        total: Summary::new(q.mean + classical.median_ms, q.std.hypot(classical.std_ms)),
    }
}
