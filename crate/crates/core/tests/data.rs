use std::io::Write;
use std::path::{Path, PathBuf};

use photonas_core::data::{
    jacobi_eigen, load_digits, load_mnist_idx, split_and_subset, Pca, Standardizer,
};
use photonas_core::rng::stream;
use photonas_core::Error;
use rand::Rng;

fn digits_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/optdigits.csv")
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> PathBuf {
    let p = dir.join(name);
    std::fs::File::create(&p).unwrap().write_all(bytes).unwrap();
    p
}

fn idx_images(n: u32, rows: u32, cols: u32, magic: u32, payload: usize) -> Vec<u8> {
    let mut b = Vec::new();
    for w in [magic, n, rows, cols] {
        b.extend_from_slice(&w.to_be_bytes());
    }
    b.extend((0..payload).map(|i| (i % 256) as u8));
    b
}

fn idx_labels(labels: &[u8], magic: u32) -> Vec<u8> {
    let mut b = magic.to_be_bytes().to_vec();
    b.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    b.extend_from_slice(labels);
    b
}

#[test]
fn full_digits_file() {
    let ds = load_digits(&digits_path()).unwrap();
    assert_eq!(ds.len(), 1797);
    assert_eq!((ds.height, ds.width), (8, 8));
    assert!(ds.class_counts().iter().all(|&c| c > 0));
    assert!(ds.pixels.iter().all(|&p| (0.0..=16.0).contains(&p)));
}

#[test]
fn digits_rows_are_validated() {
    let dir = tempfile::tempdir().unwrap();
    let zeros = format!("{}0\n", "0,".repeat(64));
    let ds = load_digits(&write(dir.path(), "ok.csv", zeros.as_bytes())).unwrap();
    assert_eq!(ds.labels, vec![0]);
    assert!(ds.pixels.iter().all(|&p| p == 0.0));

    let short = format!("{zeros}{}0\n", "0,".repeat(63));
    let err = load_digits(&write(dir.path(), "short.csv", short.as_bytes())).unwrap_err();
    assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");

    let bright = format!("17,{}0\n", "0,".repeat(63));
    let err = load_digits(&write(dir.path(), "bright.csv", bright.as_bytes())).unwrap_err();
    assert!(matches!(err, Error::Parse { line: 1, .. }));

    let label = format!("{}10\n", "0,".repeat(64));
    let err = load_digits(&write(dir.path(), "label.csv", label.as_bytes())).unwrap_err();
    assert!(matches!(err, Error::Parse { line: 1, .. }));
}

#[test]
fn idx_round_trip_and_rejections() {
    let dir = tempfile::tempdir().unwrap();
    let img = write(dir.path(), "img", &idx_images(3, 28, 28, 0x803, 3 * 784));
    let lab = write(dir.path(), "lab", &idx_labels(&[7, 0, 9], 0x801));
    let ds = load_mnist_idx(&img, &lab).unwrap();
    assert_eq!((ds.len(), ds.height, ds.width), (3, 28, 28));
    assert_eq!(ds.labels, vec![7, 0, 9]);
    assert_eq!(ds.image(1)[0], (784 % 256) as f64);

    let bad_magic = write(dir.path(), "m", &idx_images(3, 28, 28, 0x802, 3 * 784));
    let err = load_mnist_idx(&bad_magic, &lab).unwrap_err();
    assert!(matches!(err, Error::Format { offset: 0, .. }), "{err}");

    let truncated = write(dir.path(), "t", &idx_images(3, 28, 28, 0x803, 3 * 784 - 5));
    let err = load_mnist_idx(&truncated, &lab).unwrap_err();
    assert!(
        matches!(err, Error::Format { offset, .. } if offset == 16 + 3 * 784 - 5),
        "{err}"
    );

    let two = write(dir.path(), "two", &idx_labels(&[1, 2], 0x801));
    let err = load_mnist_idx(&img, &two).unwrap_err();
    assert!(matches!(err, Error::Format { offset: 4, .. }), "{err}");

    let label_magic = write(dir.path(), "lm", &idx_labels(&[1, 2, 3], 0x803));
    assert!(matches!(
        load_mnist_idx(&img, &label_magic),
        Err(Error::Format { offset: 0, .. })
    ));
}

#[test]
fn standardizer_cases() {
    assert!(matches!(
        Standardizer::default().apply(&[1.0]),
        Err(Error::State(_))
    ));
    let s = Standardizer::fit(&[0.0, 5.0, 2.0, 5.0], 2).unwrap();
    assert_eq!(
        s.apply(&[0.0, 5.0, 2.0, 5.0]).unwrap(),
        vec![-1.0, 0.0, 1.0, 0.0]
    );

    let mut rng = stream(31, "std");
    let rows: Vec<f64> = (0..200 * 5)
        .map(|i| rng.random_range(-3.0..7.0) * (1 + i % 5) as f64)
        .collect();
    let s = Standardizer::fit(&rows, 5).unwrap();
    let z = s.apply(&rows).unwrap();
    let again = Standardizer::fit(&z, 5).unwrap();
    assert!(again.mean().iter().all(|m| m.abs() < 1e-9));
    assert!(again.std().iter().all(|v| (v - 1.0).abs() < 1e-6));
    let before = s.clone();
    s.apply(&[1.0; 5]).unwrap();
    assert_eq!(s, before);
}

#[test]
fn pca_axis_aligned() {
    let rows = [-2.0, 0.0, -1.0, 0.0, 1.0, 0.0, 2.0, 0.0];
    let p = Pca::fit(&rows, 2, 1).unwrap();
    assert!((p.components()[0] - 1.0).abs() < 1e-12 && p.components()[1].abs() < 1e-12);
    let y = p.apply(&rows).unwrap();
    for (a, b) in y.iter().zip([-2.0, -1.0, 1.0, 2.0]) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(matches!(Pca::fit(&rows, 2, 3), Err(Error::Dimension(_))));
}

fn random_rows(seed: u64, n: usize, f: usize) -> Vec<f64> {
    let mut rng = stream(seed, "pca");
    let mix: Vec<f64> = (0..f * f).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut rows = Vec::with_capacity(n * f);
    for _ in 0..n {
        let z: Vec<f64> = (0..f).map(|_| rng.random_range(-1.0..1.0)).collect();
        rows.extend((0..f).map(|j| (0..f).map(|k| z[k] * mix[k * f + j]).sum::<f64>()));
    }
    Standardizer::fit(&rows, f).unwrap().apply(&rows).unwrap()
}

#[test]
fn pca_full_rank_reconstructs() {
    let (n, f) = (50, 6);
    let rows = random_rows(32, n, f);
    let p = Pca::fit(&rows, f, f).unwrap();
    let y = p.apply(&rows).unwrap();
    for r in 0..n {
        for j in 0..f {
            let back: f64 = (0..f)
                .map(|c| y[r * f + c] * p.components()[j * f + c])
                .sum();
            assert!((back - rows[r * f + j]).abs() < 1e-8);
        }
    }
}

#[test]
fn pca_structure() {
    let (n, f, d) = (80, 10, 5);
    let rows = random_rows(33, n, f);
    let p = Pca::fit(&rows, f, d).unwrap();
    let c = p.components();
    for a in 0..d {
        for b in 0..d {
            let dot: f64 = (0..f).map(|r| c[r * d + a] * c[r * d + b]).sum();
            assert!((dot - if a == b { 1.0 } else { 0.0 }).abs() < 1e-8);
        }
        let col: Vec<f64> = (0..f).map(|r| c[r * d + a]).collect();
        let big = col
            .iter()
            .copied()
            .fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        assert!(big > 0.0);
    }
    assert!(p.explained_variance().windows(2).all(|w| w[0] >= w[1]));
    let y = p.apply(&rows).unwrap();
    for a in 0..d {
        for b in 0..a {
            let cov: f64 =
                (0..n).map(|r| y[r * d + a] * y[r * d + b]).sum::<f64>() / (n - 1) as f64;
            let norm = (p.explained_variance()[a] * p.explained_variance()[b]).sqrt();
            assert!((cov / norm).abs() < 1e-6);
        }
    }
}

/// Leading eigenvalues by power iteration with deflation.
fn power_eigenvalues(m: &[f64], n: usize, k: usize) -> Vec<f64> {
    let mut a = m.to_vec();
    let mut out = Vec::new();
    for _ in 0..k {
        let mut v = vec![1.0; n];
        v[0] = 1.5;
        let mut lambda = 0.0;
        for _ in 0..20_000 {
            let w: Vec<f64> = (0..n)
                .map(|i| (0..n).map(|j| a[i * n + j] * v[j]).sum())
                .collect();
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            let next: Vec<f64> = w.iter().map(|x| x / norm).collect();
            let delta: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
            v = next;
            lambda = norm;
            if delta < 1e-14 {
                break;
            }
        }
        out.push(lambda);
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] -= lambda * v[i] * v[j];
            }
        }
    }
    out
}

#[test]
fn pca_eigenvalues_match_power_iteration() {
    let (n, f, d) = (50, 10, 4);
    let mut rng = stream(34, "power");
    let rows: Vec<f64> = (0..n * f).map(|_| rng.random_range(-1.0..1.0)).collect();
    let p = Pca::fit(&rows, f, d).unwrap();
    let mean: Vec<f64> = (0..f)
        .map(|j| (0..n).map(|r| rows[r * f + j]).sum::<f64>() / n as f64)
        .collect();
    let mut cov = vec![0.0; f * f];
    for i in 0..f {
        for j in 0..f {
            cov[i * f + j] = (0..n)
                .map(|r| (rows[r * f + i] - mean[i]) * (rows[r * f + j] - mean[j]))
                .sum::<f64>()
                / (n - 1) as f64;
        }
    }
    for (a, b) in p
        .explained_variance()
        .iter()
        .zip(power_eigenvalues(&cov, f, d))
    {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}

#[test]
fn jacobi_diagonalizes() {
    let m = [4.0, 1.0, 2.0, 1.0, 3.0, 0.5, 2.0, 0.5, 1.0];
    let (vals, vecs) = jacobi_eigen(&m, 3).unwrap();
    for c in 0..3 {
        for i in 0..3 {
            let mv: f64 = (0..3).map(|j| m[i * 3 + j] * vecs[j * 3 + c]).sum();
            assert!((mv - vals[c] * vecs[i * 3 + c]).abs() < 1e-10);
        }
    }
    assert!((vals.iter().sum::<f64>() - 8.0).abs() < 1e-12);
}

#[test]
fn splits_are_deterministic_and_disjoint() {
    let a = split_and_subset(1797, 0.2, 1000, 11).unwrap();
    assert_eq!(a, split_and_subset(1797, 0.2, 1000, 11).unwrap());
    assert_eq!((a.train.len(), a.val.len()), (1437, 360));
    assert!(a.proxy.iter().all(|i| a.train.contains(i)));
    assert!(a.val.iter().all(|i| !a.train.contains(i)));
    let b = split_and_subset(60_000, 0.1, 5000, 12).unwrap();
    let train: std::collections::HashSet<_> = b.train.iter().collect();
    assert!(b.proxy.iter().all(|i| train.contains(i)));
    assert!(matches!(
        split_and_subset(10, 0.0, 1, 1),
        Err(Error::Argument(_))
    ));
}
