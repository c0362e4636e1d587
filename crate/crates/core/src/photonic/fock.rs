//! Fock bases: all ways of placing `n` photons in `M` modes.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Largest basis built unless the caller raises the cap.
pub const DEFAULT_BASIS_CAP: usize = 100_000;

/// `C(M + n - 1, n)`, the number of `n`-photon states over `M` modes.
pub fn basis_size(modes: usize, photons: usize) -> u128 {
    if modes == 0 {
        return u128::from(photons == 0);
    }
    let (top, k) = ((modes + photons - 1) as u128, photons as u128);
    let k = k.min(top - k);
    (0..k).fold(1u128, |acc, i| acc * (top - i) / (i + 1))
}

/// Occupation vectors in descending lexicographic order, e.g. for two modes
/// and one photon `[(1,0), (0,1)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockBasis {
    modes: usize,
    photons: usize,
    states: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
}

impl FockBasis {
    pub fn enumerate(modes: usize, photons: usize) -> Result<Self> {
        Self::with_cap(modes, photons, DEFAULT_BASIS_CAP)
    }

    pub fn with_cap(modes: usize, photons: usize, cap: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::Argument(
                "a Fock basis needs at least one mode".into(),
            ));
        }
        if photons > u8::MAX as usize {
            return Err(Error::Argument(format!("{photons} photons exceeds 255")));
        }
        let size = basis_size(modes, photons);
        if size > cap as u128 {
            return Err(Error::Capacity {
                modes,
                photons,
                size,
                cap,
            });
        }
        let mut states = Vec::with_capacity(size as usize);
        let mut current = vec![0u8; modes];
        fill(&mut states, &mut current, 0, photons);
        let index = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Ok(Self {
            modes,
            photons,
            states,
            index,
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn photons(&self) -> usize {
        self.photons
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Vec<u8>] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &[u8] {
        &self.states[i]
    }

    pub fn index_of(&self, occupation: &[u8]) -> Option<usize> {
        self.index.get(occupation).copied()
    }
}

fn fill(out: &mut Vec<Vec<u8>>, current: &mut [u8], mode: usize, left: usize) {
    if mode == current.len() - 1 {
        current[mode] = left as u8;
        out.push(current.to_vec());
        return;
    }
    for k in (0..=left).rev() {
        current[mode] = k as u8;
        fill(out, current, mode + 1, left - k);
    }
    current[mode] = 0;
}

/// `prod_j s_j!` for an occupation vector.
pub fn occupation_factorial(occupation: &[u8]) -> f64 {
    occupation
        .iter()
        .map(|&s| (1..=s as u32).map(f64::from).product::<f64>())
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_modes_one_photon() {
        let b = FockBasis::enumerate(2, 1).unwrap();
        assert_eq!(b.states(), &[vec![1, 0], vec![0, 1]]);
    }

    #[test]
    fn digits_basis_size() {
        assert_eq!(basis_size(9, 5), 1287);
        let b = FockBasis::enumerate(9, 5).unwrap();
        assert_eq!(b.len(), 1287);
        for (i, s) in b.states().iter().enumerate() {
            assert_eq!(s.iter().map(|&v| v as usize).sum::<usize>(), 5);
            assert_eq!(b.index_of(s), Some(i));
        }
        // strictly descending lexicographic
        assert!(b.states().windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn mnist_basis_hits_the_cap() {
        assert_eq!(basis_size(17, 9), 2_042_975);
        match FockBasis::enumerate(17, 9) {
            Err(Error::Capacity { size, .. }) => assert_eq!(size, 2_042_975),
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    #[test]
    fn vacuum_and_zero_modes() {
        assert_eq!(
            FockBasis::enumerate(3, 0).unwrap().states(),
            &[vec![0, 0, 0]]
        );
        assert!(FockBasis::enumerate(0, 1).is_err());
    }

    #[test]
    fn factorial_weights() {
        assert_eq!(occupation_factorial(&[2, 0, 3]), 12.0);
    }
}
