//! Dataset readers and preprocessing: Digits CSV, MNIST IDX, standardization,
//! PCA and deterministic splits.

mod digits;
mod idx;
mod pca;
mod standardize;

pub use digits::load_digits;
pub use idx::{load_mnist_idx, read_idx_images, read_idx_labels};
pub use pca::{jacobi_eigen, Pca};
pub use standardize::Standardizer;

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream;

pub const NUM_CLASSES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Labelled grayscale images, stored flattened row-major (`B x H*W`).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub split: Split,
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<f64>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        split: Split,
        (height, width): (usize, usize),
        pixels: Vec<f64>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        if pixels.len() != labels.len() * height * width {
            return Err(Error::Dimension(format!(
                "{} labels of {height}x{width} images need {} pixels, got {}",
                labels.len(),
                labels.len() * height * width,
                pixels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= NUM_CLASSES) {
            return Err(Error::Label {
                label: bad,
                classes: NUM_CLASSES,
            });
        }
        Ok(Self {
            name: name.into(),
            split,
            height,
            width,
            pixels,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self) -> usize {
        self.height * self.width
    }

    pub fn image(&self, i: usize) -> &[f64] {
        let f = self.features();
        &self.pixels[i * f..(i + 1) * f]
    }

    /// The samples at `indices`, in that order.
    pub fn select(&self, indices: &[usize], split: Split) -> Self {
        let mut pixels = Vec::with_capacity(indices.len() * self.features());
        for &i in indices {
            pixels.extend_from_slice(self.image(i));
        }
        Self {
            name: self.name.clone(),
            split,
            height: self.height,
            width: self.width,
            pixels,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut c = [0; NUM_CLASSES];
        self.labels.iter().for_each(|&l| c[l] += 1);
        c
    }
}

/// Index sets of a train/validation split plus the proxy subset of train.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub proxy: Vec<usize>,
}

/// Shuffles `n` indices with `seed`, keeps `floor(n * (1 - val_fraction))`
/// for training and the rest for validation, and draws `proxy_size` training
/// indices as the proxy subset.
pub fn split_and_subset(
    n: usize,
    val_fraction: f64,
    proxy_size: usize,
    seed: u64,
) -> Result<SplitIndices> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::Argument(format!(
            "validation fraction {val_fraction} outside (0, 1)"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, "split"));
    let n_train = (n as f64 * (1.0 - val_fraction)).floor() as usize;
    let val = order.split_off(n_train);
    let proxy = proxy_subset(&order, proxy_size, seed)?;
    Ok(SplitIndices {
        train: order,
        val,
        proxy,
    })
}

/// A seeded subset of `train` of size `proxy_size`.
pub fn proxy_subset(train: &[usize], proxy_size: usize, seed: u64) -> Result<Vec<usize>> {
    if proxy_size > train.len() {
        return Err(Error::Argument(format!(
            "proxy of {proxy_size} samples from a train split of {}",
            train.len()
        )));
    }
    let mut pool = train.to_vec();
    pool.shuffle(&mut stream(seed, "proxy"));
    pool.truncate(proxy_size);
    Ok(pool)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetName {
    Digits,
    Mnist,
}

impl DatasetName {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "digits" => Ok(Self::Digits),
            "mnist" => Ok(Self::Mnist),
            other => Err(Error::Argument(format!(
                "unknown dataset `{other}` (expected digits or mnist)"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Digits => "digits",
            Self::Mnist => "mnist",
        }
    }

    /// PCA width and photonic input size.
    pub fn default_input_size(self) -> usize {
        match self {
            Self::Digits => 8,
            Self::Mnist => 16,
        }
    }

    pub fn default_proxy_size(self) -> usize {
        match self {
            Self::Digits => 1000,
            Self::Mnist => 5000,
        }
    }

    pub fn default_proxy_epochs(self) -> usize {
        match self {
            Self::Digits => 5,
            Self::Mnist => 3,
        }
    }

    /// Files read from the data directory.
    pub fn files(self, dir: &Path) -> Vec<PathBuf> {
        match self {
            Self::Digits => vec![dir.join("optdigits.csv")],
            Self::Mnist => [
                "train-images-idx3-ubyte",
                "train-labels-idx1-ubyte",
                "t10k-images-idx3-ubyte",
                "t10k-labels-idx1-ubyte",
            ]
            .iter()
            .map(|f| dir.join(f))
            .collect(),
        }
    }
}

/// Training pool and held-out validation set of a named dataset.
///
/// Digits is split `val_fraction` at random with `seed`; MNIST uses its
/// fixed 60k/10k train/test files, the test set serving as validation.
pub fn load_dataset(
    name: DatasetName,
    dir: &Path,
    val_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    let files = name.files(dir);
    match name {
        DatasetName::Digits => {
            let all = load_digits(&files[0])?;
            let idx = split_and_subset(all.len(), val_fraction, 0, seed)?;
            Ok((
                all.select(&idx.train, Split::Train),
                all.select(&idx.val, Split::Val),
            ))
        }
        DatasetName::Mnist => {
            let train = load_mnist_idx(&files[0], &files[1])?;
            let mut val = load_mnist_idx(&files[2], &files[3])?;
            val.split = Split::Val;
            Ok((train, val))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floor_rule_split() {
        let s = split_and_subset(1797, 0.2, 1000, 3).unwrap();
        assert_eq!(
            (s.train.len(), s.val.len(), s.proxy.len()),
            (1437, 360, 1000)
        );
        assert_eq!(s, split_and_subset(1797, 0.2, 1000, 3).unwrap());
        assert!(split_and_subset(10, 1.0, 0, 3).is_err());
        assert!(split_and_subset(10, 0.5, 6, 3).is_err());
    }
}
