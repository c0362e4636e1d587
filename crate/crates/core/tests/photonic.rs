use std::f64::consts::{FRAC_PI_4, PI, TAU};
use std::sync::Arc;

use photonas_core::photonic::{
    amplitude_backends, backend, basis_size, permanent, photonic_layer, pool_output, BasisPlan,
    CMatrix, CircuitLayout, CircuitSpec, FockBasis, MeshLayout, OutputDistribution,
    PhotonicCircuit, C64, DEFAULT_BASIS_CAP,
};
use photonas_core::rng::stream;
use photonas_core::tensor::ops::weighted_sum;
use photonas_core::tensor::{Tape, Tensor};
use photonas_core::Error;
use rand::Rng;

fn naive_permanent(a: &CMatrix) -> C64 {
    fn rec(a: &CMatrix, row: usize, used: &mut Vec<bool>) -> C64 {
        let n = a.rows();
        if row == n {
            return C64::new(1.0, 0.0);
        }
        let mut acc = C64::new(0.0, 0.0);
        for c in 0..n {
            if !used[c] {
                used[c] = true;
                acc += a[(row, c)] * rec(a, row + 1, used);
                used[c] = false;
            }
        }
        acc
    }
    rec(a, 0, &mut vec![false; a.rows()])
}

fn random_matrix(rng: &mut impl Rng, n: usize) -> CMatrix {
    let data = (0..n * n)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    CMatrix::from_vec(n, n, data).unwrap()
}

fn random_circuit(rng: &mut impl Rng, d: usize, backend: &str) -> (PhotonicCircuit, Vec<f64>) {
    let layout = Arc::new(
        CircuitLayout::new(CircuitSpec::for_input_size(d))
            .unwrap()
            .with_backend(backend)
            .unwrap(),
    );
    let phases = layout.random_phases(rng);
    let theta = (0..d).map(|_| rng.random_range(0.0..PI)).collect();
    (PhotonicCircuit::new(layout, phases).unwrap(), theta)
}

#[test]
fn permanent_small_cases() {
    assert_eq!(
        permanent(&CMatrix::identity(3)).unwrap(),
        C64::new(1.0, 0.0)
    );
    let ones = CMatrix::from_vec(3, 3, vec![C64::new(1.0, 0.0); 9]).unwrap();
    assert!((permanent(&ones).unwrap() - C64::new(6.0, 0.0)).norm() < 1e-14);
}

#[test]
fn ryser_matches_factorial_expansion() {
    let mut rng = stream(21, "perm");
    for k in 1..=6 {
        for _ in 0..20 {
            let a = random_matrix(&mut rng, k);
            let (fast, slow) = (permanent(&a).unwrap(), naive_permanent(&a));
            assert!(
                (fast - slow).norm() <= 1e-12 * slow.norm().max(1e-300),
                "k={k}"
            );
        }
    }
}

#[test]
fn fock_enumeration() {
    let b = FockBasis::enumerate(2, 1).unwrap();
    assert_eq!(b.states(), &[vec![1, 0], vec![0, 1]]);
    assert_eq!(FockBasis::enumerate(9, 5).unwrap().len(), 1287);
    assert_eq!(basis_size(17, 9), 2_042_975);
    assert!(matches!(
        FockBasis::enumerate(17, 9),
        Err(Error::Capacity { .. })
    ));
    for (m, n) in [(1, 4), (3, 3), (5, 3), (6, 2)] {
        let b = FockBasis::enumerate(m, n).unwrap();
        assert_eq!(b.len() as u128, basis_size(m, n));
        for (i, s) in b.states().iter().enumerate() {
            assert_eq!(s.iter().map(|&v| v as usize).sum::<usize>(), n);
            assert_eq!(b.index_of(s), Some(i));
        }
        assert!(b.states().windows(2).all(|w| w[0] > w[1]));
    }
}

#[test]
fn identity_mesh_gives_identity() {
    let (c, _) = random_circuit(&mut stream(0, "x"), 4, "ryser");
    let zero = PhotonicCircuit::new(
        Arc::new(CircuitLayout::new(c.layout().spec().clone()).unwrap()),
        vec![0.0; c.phases().len()],
    )
    .unwrap();
    let u = zero.build_unitary(&[0.0; 4]).unwrap();
    assert!(u
        .data()
        .iter()
        .zip(CMatrix::identity(5).data())
        .all(|(a, b)| (a - b).norm() < 1e-15));
}

#[test]
fn balanced_unit_splits_evenly() {
    let mesh = MeshLayout::new(2, vec![vec![0]]).unwrap();
    let u = mesh.unitary(&[0.0, FRAC_PI_4]).unwrap();
    assert!((u[(0, 0)].norm_sqr() - 0.5).abs() < 1e-15);
    assert!((u[(0, 1)].norm_sqr() - 0.5).abs() < 1e-15);
}

#[test]
fn random_unitaries_are_unitary() {
    let mut rng = stream(22, "unitary");
    for i in 0..100 {
        let (c, theta) = random_circuit(&mut rng, 1 + i % 8, "expansion");
        assert!(c.build_unitary(&theta).unwrap().unitarity_deviation() < 1e-10);
    }
}

#[test]
fn distributions_are_normalized() {
    let mut rng = stream(23, "norm");
    for i in 0..100 {
        let (c, theta) = random_circuit(&mut rng, 1 + i % 8, "expansion");
        let p = c.output_distribution(&theta).unwrap();
        assert!(p.probabilities().iter().all(|&v| v >= 0.0));
        assert!((p.total() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn backends_agree() {
    let mut rng = stream(24, "backends");
    assert_eq!(amplitude_backends().names(), vec!["expansion", "ryser"]);
    for d in [1, 2, 4, 5, 8] {
        let (c, theta) = random_circuit(&mut rng, d, "ryser");
        let u = c.build_unitary(&theta).unwrap();
        let plan = BasisPlan::new(&c.layout().spec().input, DEFAULT_BASIS_CAP).unwrap();
        let a = backend("ryser").unwrap().amplitudes(&u, &plan).unwrap();
        let b = backend("expansion").unwrap().amplitudes(&u, &plan).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-12);
        }
    }
    assert!(matches!(backend("fft"), Err(Error::UnknownStrategy { .. })));
}

#[test]
fn hong_ou_mandel() {
    for name in ["ryser", "expansion"] {
        let spec = CircuitSpec {
            input: vec![1, 1],
            encoded_modes: 0,
            layer1: MeshLayout::new(2, vec![vec![0]]).unwrap(),
            layer2: MeshLayout::new(2, vec![]).unwrap(),
            backend: name.into(),
            basis_cap: DEFAULT_BASIS_CAP,
        };
        let c = PhotonicCircuit::new(
            Arc::new(CircuitLayout::new(spec).unwrap()),
            vec![0.0, FRAC_PI_4],
        )
        .unwrap();
        let p = c.output_distribution(&[]).unwrap().0;
        assert!(p[1] < 1e-9);
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[2] - 0.5).abs() < 1e-12);
    }
}

#[test]
fn pooling_preserves_probability() {
    let mut rng = stream(25, "pool");
    let (c, theta) = random_circuit(&mut rng, 4, "expansion");
    let p = c.output_distribution(&theta).unwrap();
    for q in [1, 2, 3, 7, 35] {
        let pooled = pool_output(&p, q).unwrap();
        assert_eq!(pooled.len(), q);
        assert!((pooled.iter().sum::<f64>() - p.total()).abs() < 1e-14);
    }
    assert_eq!(pool_output(&p, 35).unwrap(), p.0);
    assert!(matches!(pool_output(&p, 36), Err(Error::Dimension(_))));
    let five = OutputDistribution(vec![0.1, 0.2, 0.3, 0.25, 0.15]);
    assert_eq!(
        pool_output(&five, 2).unwrap(),
        vec![0.1 + 0.2 + 0.3, 0.25 + 0.15]
    );
}

#[test]
fn two_mode_gradient_matches_closed_form() {
    // input (1,1) through one unit: P(2,0) = sin^2(2a) / 2
    let spec = CircuitSpec {
        input: vec![1, 1],
        encoded_modes: 0,
        layer1: MeshLayout::new(2, vec![vec![0]]).unwrap(),
        layer2: MeshLayout::new(2, vec![]).unwrap(),
        backend: "expansion".into(),
        basis_cap: DEFAULT_BASIS_CAP,
    };
    let layout = Arc::new(CircuitLayout::new(spec).unwrap());
    for alpha in [0.1, 0.4, 1.0, 2.3] {
        let c = PhotonicCircuit::new(layout.clone(), vec![0.7, alpha]).unwrap();
        let cache = c.forward(&[]).unwrap();
        let p = cache.distribution.probabilities()[0];
        assert!((p - 0.5 * (2.0 * alpha).sin().powi(2)).abs() < 1e-12);
        let g = c.backward(&cache, &[1.0, 0.0, 0.0]).unwrap();
        let closed = 2.0 * (2.0 * alpha).sin() * (2.0 * alpha).cos();
        assert!((g.phases[1] - closed).abs() < 1e-12);
        assert!(g.phases[0].abs() < 1e-12);
    }
}

#[test]
fn zero_upstream_gives_zero_gradient() {
    let (c, theta) = random_circuit(&mut stream(26, "zero"), 3, "ryser");
    let cache = c.forward(&theta).unwrap();
    let g = c
        .backward(&cache, &vec![0.0; cache.amplitudes().len()])
        .unwrap();
    assert!(g.theta.iter().chain(&g.phases).all(|&v| v == 0.0));
}

fn check_circuit_gradients(backend_name: &str, d: usize, seed: u64) {
    let mut rng = stream(seed, "circuit-grad");
    let (c, theta) = random_circuit(&mut rng, d, backend_name);
    let size = c.layout().basis().len();
    let w: Vec<f64> = (0..size).map(|_| rng.random_range(-1.0..1.0)).collect();
    let loss = |c: &PhotonicCircuit, t: &[f64]| -> f64 {
        let p = c.output_distribution(t).unwrap();
        p.0.iter().zip(&w).map(|(a, b)| a * b).sum()
    };
    let cache = c.forward(&theta).unwrap();
    let g = c.backward(&cache, &w).unwrap();
    let h = 1e-5;
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-4);
    for k in 0..d {
        let (mut tp, mut tm) = (theta.clone(), theta.clone());
        tp[k] += h;
        tm[k] -= h;
        let fd = (loss(&c, &tp) - loss(&c, &tm)) / (2.0 * h);
        assert!(
            rel(g.theta[k], fd) < 1e-4,
            "theta {k}: {} vs {fd}",
            g.theta[k]
        );
    }
    let layout = Arc::new(CircuitLayout::new(c.layout().spec().clone()).unwrap());
    for k in 0..c.phases().len() {
        let (mut pp, mut pm) = (c.phases().to_vec(), c.phases().to_vec());
        pp[k] += h;
        pm[k] -= h;
        let cp = PhotonicCircuit::new(layout.clone(), pp).unwrap();
        let cm = PhotonicCircuit::new(layout.clone(), pm).unwrap();
        let fd = (loss(&cp, &theta) - loss(&cm, &theta)) / (2.0 * h);
        assert!(
            rel(g.phases[k], fd) < 1e-4,
            "phase {k}: {} vs {fd}",
            g.phases[k]
        );
    }
}

#[test]
fn circuit_gradients_match_finite_differences() {
    for seed in 0..3 {
        check_circuit_gradients("expansion", 4, seed);
        check_circuit_gradients("ryser", 4, seed);
    }
    check_circuit_gradients("expansion", 2, 9);
    check_circuit_gradients("expansion", 6, 10);
}

#[test]
fn layer_op_gradients_match_finite_differences() {
    let mut rng = stream(27, "layer");
    let layout = Arc::new(CircuitLayout::new(CircuitSpec::for_input_size(4)).unwrap());
    let phases = Tensor::new(
        vec![layout.mesh_param_count()],
        layout.random_phases(&mut rng),
    )
    .unwrap();
    let theta = Tensor::new(
        vec![3, 4],
        (0..12).map(|_| rng.random_range(0.0..TAU)).collect(),
    )
    .unwrap();
    let q = 6;
    let w: Vec<f64> = (0..3 * q).map(|_| rng.random_range(-1.0..1.0)).collect();
    let eval = |t: &Tensor, p: &Tensor| -> f64 {
        let mut tape = Tape::new();
        let (tv, pv) = (tape.constant(t.clone()), tape.constant(p.clone()));
        let y = photonic_layer(&mut tape, &layout, tv, pv, q).unwrap();
        tape.value(y)
            .data()
            .iter()
            .zip(&w)
            .map(|(a, b)| a * b)
            .sum()
    };
    let mut tape = Tape::new();
    let (tv, pv) = (tape.variable(theta.clone()), tape.variable(phases.clone()));
    let y = photonic_layer(&mut tape, &layout, tv, pv, q).unwrap();
    assert_eq!(tape.value(y).shape(), &[3, q]);
    for r in 0..3 {
        assert!((tape.value(y).row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let l = weighted_sum(&mut tape, y, w.clone()).unwrap();
    let g = tape.backward(l).unwrap();
    let h = 1e-5;
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-4);
    for i in 0..theta.len() {
        let (mut a, mut b) = (theta.clone(), theta.clone());
        a.data_mut()[i] += h;
        b.data_mut()[i] -= h;
        let fd = (eval(&a, &phases) - eval(&b, &phases)) / (2.0 * h);
        assert!(rel(g.get(tv).unwrap()[i], fd) < 1e-4);
    }
    for i in 0..phases.len() {
        let (mut a, mut b) = (phases.clone(), phases.clone());
        a.data_mut()[i] += h;
        b.data_mut()[i] -= h;
        let fd = (eval(&theta, &a) - eval(&theta, &b)) / (2.0 * h);
        assert!(rel(g.get(pv).unwrap()[i], fd) < 1e-4);
    }
}
