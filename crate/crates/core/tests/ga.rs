use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use photonas_core::data::{load_dataset, proxy_subset, DatasetName, Split};
use photonas_core::ga::{
    fitness_evaluator, fitness_evaluators, group_crossover, mutate, random_genome,
    tournament_select, write_log_csv, FitnessContext, FitnessEvaluator, FitnessRecord, GeneSpec,
    GeneTable, GeneValue, Genome, Individual, MockFitness, ProxyData, Search, SearchConfig,
    SearchState,
};
use photonas_core::model::Hyperparams;
use photonas_core::rng::stream;
use photonas_core::Error;
use proptest::prelude::*;

fn table() -> GeneTable {
    GeneTable::default_table()
}

fn evaluated(fitness: &[f64]) -> Vec<Individual> {
    fitness
        .iter()
        .enumerate()
        .map(|(id, &f)| Individual {
            fitness: Some(f),
            ..Individual::new(id, Genome::new(vec![0]), 0, Vec::new())
        })
        .collect()
}

fn uniform_table(sizes: &[usize]) -> GeneTable {
    GeneTable::new(
        sizes
            .iter()
            .enumerate()
            .map(|(i, &n)| GeneSpec {
                name: format!("g{i}"),
                group: 1 + (i % 6) as u8,
                options: (0..n as i64).map(GeneValue::Int).collect(),
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn default_table_shape() {
    let t = table();
    assert_eq!(t.len(), 19);
    assert_eq!(t.groups(), &[1, 2, 3, 4, 5, 6]);
    let sizes: Vec<usize> = t.groups().iter().map(|&g| t.members(g).len()).collect();
    assert_eq!(sizes, vec![5, 3, 1, 5, 3, 2]);
    let n = t.search_space_size();
    assert!((1e10..=2e11).contains(&(n as f64)), "{n}");
    assert_eq!(
        n,
        4 * 4 * 4 * 4 * 2 * 4 * 3 * 5 * 2 * 5 * 3 * 3 * 4 * 2 * 4 * 5 * 4 * 4 * 4
    );
    assert_eq!(GeneTable::from_toml(&t.to_toml()).unwrap(), t);
}

#[test]
fn search_space_examples() {
    assert_eq!(uniform_table(&[1; 19]).search_space_size(), 1);
    assert_eq!(uniform_table(&[2, 3]).search_space_size(), 6);
}

#[test]
fn table_validation() {
    let spec = |name: &str, opts: Vec<GeneValue>| GeneSpec {
        name: name.into(),
        group: 1,
        options: opts,
    };
    assert!(matches!(
        GeneTable::new(vec![spec("a", vec![])]),
        Err(Error::GeneTable(_))
    ));
    let dup = vec![
        spec("a", vec![GeneValue::Int(1)]),
        spec("a", vec![GeneValue::Int(2)]),
    ];
    assert!(matches!(GeneTable::new(dup), Err(Error::GeneTable(_))));
    let bad = "[[gene]]\nname = \"x\"\ngroup = 1\noptions = [[1]]\n";
    assert!(GeneTable::from_toml(bad).is_err());
}

#[test]
fn reference_configurations_are_in_the_table() {
    let t = table();
    for h in [
        Hyperparams::digits_reference(),
        Hyperparams::mnist_reference(),
    ] {
        let g = t.encode(&h).unwrap();
        assert_eq!(t.resolve(&g).unwrap(), h);
    }
    let values = t
        .values(&t.encode(&Hyperparams::digits_reference()).unwrap())
        .unwrap();
    assert_eq!(values["q_output_size"], GeneValue::Int(16));
    assert_eq!(values["lr_schedule"], GeneValue::Text("cosine".into()));
    let mnist = t
        .values(&t.encode(&Hyperparams::mnist_reference()).unwrap())
        .unwrap();
    assert_eq!(mnist["phase_activation"], GeneValue::Text("clamp".into()));
}

#[test]
fn resolution_reports_the_offending_gene() {
    let text = table().to_toml().replace("\"gelu\"", "\"swish\"");
    let t = GeneTable::from_toml(&text).unwrap();
    let i = t.index_of("pre_activation").unwrap();
    let mut idx = vec![0; t.len()];
    idx[i] = 3;
    let err = t.resolve(&Genome::new(idx)).unwrap_err().to_string();
    assert!(err.contains("swish"), "{err}");
    let err = t.check(&Genome::new(vec![0; 3])).unwrap_err();
    assert!(matches!(err, Error::GeneTable(_)));
}

#[test]
fn none_options_resolve_to_absent_values() {
    let t = table();
    let mut h = Hyperparams::digits_reference();
    h.q_output_size = None;
    h.grad_clip = None;
    let g = t.encode(&h).unwrap();
    assert_eq!(t.resolve(&g).unwrap(), h);
}

#[test]
fn random_genomes_are_uniform_and_reproducible() {
    let t = table();
    let mut rng = stream(3, "genomes");
    let pa = t.index_of("phase_activation").unwrap();
    let mut counts = [0usize; 3];
    let n = 10_000;
    for _ in 0..n {
        let g = random_genome(&t, &mut rng);
        t.check(&g).unwrap();
        counts[g.indices()[pa]] += 1;
    }
    for c in counts {
        assert!((c as f64 / n as f64 - 1.0 / 3.0).abs() < 0.02, "{counts:?}");
    }
    let a = random_genome(&t, &mut stream(9, "x"));
    let b = random_genome(&t, &mut stream(9, "x"));
    assert_eq!(a, b);
}

#[test]
fn tournament_examples() {
    let pop = evaluated(&[0.5, 0.7, 0.9]);
    let mut rng = stream(0, "tournament");
    for _ in 0..100 {
        assert_eq!(tournament_select(&pop, 3, &mut rng).unwrap().id, 2);
    }
    let tied = evaluated(&[0.8, 0.8, 0.8]);
    assert_eq!(tournament_select(&tied, 3, &mut rng).unwrap().id, 0);

    let mut counts = [0usize; 3];
    let n = 30_000;
    for _ in 0..n {
        counts[tournament_select(&pop, 1, &mut rng).unwrap().id] += 1;
    }
    for c in counts {
        assert!(
            (c as f64 / n as f64 - 1.0 / 3.0).abs() < 0.015,
            "{counts:?}"
        );
    }

    let mut pop = evaluated(&[0.1, 0.2, 0.3]);
    pop[1].fitness = None;
    assert!(matches!(
        tournament_select(&pop, 2, &mut rng),
        Err(Error::Contract(_))
    ));
}

#[test]
fn tournament_favours_fitter_members() {
    let pop = evaluated(&[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]);
    let mut rng = stream(1, "tournament");
    let mut counts = [0usize; 9];
    for _ in 0..100_000 {
        counts[tournament_select(&pop, 3, &mut rng).unwrap().id] += 1;
    }
    assert!(counts[8] > counts[4], "{counts:?}");
    // Without replacement the worst two can never win a 3-way draw.
    assert_eq!(counts[0] + counts[1], 0);
}

#[test]
fn crossover_examples() {
    let t = table();
    let mut rng = stream(2, "crossover");
    let a = random_genome(&t, &mut rng);
    let b = random_genome(&t, &mut rng);
    for _ in 0..100 {
        assert_eq!(group_crossover(&t, &a, &a, 0.75, &mut rng), a);
        assert_eq!(group_crossover(&t, &a, &b, 0.0, &mut rng), a);
    }
}

#[test]
fn crossover_is_group_atomic_and_closed() {
    let t = table();
    let mut rng = stream(4, "crossover");
    let mut from_b = 0usize;
    for _ in 0..1000 {
        let a = random_genome(&t, &mut rng);
        let b = random_genome(&t, &mut rng);
        let c = group_crossover(&t, &a, &b, 0.75, &mut rng);
        for &g in t.groups() {
            let members = t.members(g);
            let all_a = members.iter().all(|&i| c.indices()[i] == a.indices()[i]);
            let all_b = members.iter().all(|&i| c.indices()[i] == b.indices()[i]);
            assert!(all_a || all_b, "group {g} mixes parents");
            from_b += usize::from(all_b && !all_a);
        }
        for i in 0..t.len() {
            let v = c.indices()[i];
            assert!(v == a.indices()[i] || v == b.indices()[i]);
        }
    }
    assert!(from_b > 0);
}

#[test]
fn mutation_examples() {
    let t = table();
    let mut rng = stream(5, "mutation");
    let g = random_genome(&t, &mut rng);
    let m = mutate(&t, &g, 0.0, &mut rng);
    assert_eq!(m.genome, g);
    assert!(m.mutated.is_empty());

    // From index 0 of three options with every gene mutating: a downward
    // step clamps to 0, so P(0) = 1/4 + 1/6.
    let t1 = uniform_table(&[3]);
    let zero = Genome::new(vec![0]);
    let n = 60_000;
    let stay = (0..n)
        .filter(|_| mutate(&t1, &zero, 1.0, &mut rng).genome.indices()[0] == 0)
        .count();
    assert!(
        (stay as f64 / n as f64 - (0.25 + 1.0 / 6.0)).abs() < 0.01,
        "{stay}"
    );
}

#[test]
fn mutation_count_mean() {
    let t = table();
    let mut rng = stream(6, "mutation");
    let trials = 10_000;
    let total: usize = (0..trials)
        .map(|_| {
            let g = random_genome(&t, &mut rng);
            mutate(&t, &g, 0.2, &mut rng).mutated.len()
        })
        .sum();
    let mean = total as f64 / trials as f64;
    assert!((mean - 3.8).abs() < 0.1, "{mean}");
}

proptest! {
    #[test]
    fn operators_stay_within_option_lists(seed in any::<u64>(), mu in 0.0..1.0f64, pc in 0.0..1.0f64) {
        let t = table();
        let mut rng = stream(seed, "prop");
        let a = random_genome(&t, &mut rng);
        let b = random_genome(&t, &mut rng);
        let c = group_crossover(&t, &a, &b, pc, &mut rng);
        let m = mutate(&t, &c, mu, &mut rng);
        prop_assert!(t.check(&m.genome).is_ok());
        for i in 0..t.len() {
            if !m.mutated.contains(&i) {
                prop_assert_eq!(m.genome.indices()[i], c.indices()[i]);
            }
        }
    }
}

struct Counting {
    inner: MockFitness,
    calls: AtomicUsize,
}

impl FitnessEvaluator for Counting {
    fn name(&self) -> &'static str {
        "counting"
    }

    fn budget_key(&self) -> String {
        self.inner.budget_key()
    }

    fn evaluate(&self, table: &GeneTable, genome: &Genome, seed: u64) -> FitnessRecord {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.evaluate(table, genome, seed)
    }
}

fn mock_search(t: &GeneTable, config: SearchConfig, seed: u64) -> SearchState {
    let eval = MockFitness::new(t, seed);
    Search {
        table: t,
        evaluator: &eval,
        config,
        seed,
        workers: 2,
    }
    .run(|_| Ok(()))
    .unwrap()
}

fn csv(t: &GeneTable, s: &SearchState) -> String {
    let mut out = Vec::new();
    write_log_csv(t, &s.log, &mut out).unwrap();
    String::from_utf8(out).unwrap()
}

#[test]
fn elitism_keeps_best_fitness_monotone() {
    let t = table();
    for seed in 0..3 {
        let config = SearchConfig {
            generations: 50,
            ..SearchConfig::default()
        };
        let s = mock_search(&t, config, seed);
        let best: Vec<f64> = s.log.generations.iter().map(|g| g.best).collect();
        assert_eq!(best.len(), 50);
        assert!(best.windows(2).all(|w| w[1] >= w[0]), "{best:?}");
        assert!(best[49] > best[0]);
        assert_eq!(s.best().unwrap().fitness, best[49]);
    }
}

#[test]
fn elites_survive_unchanged() {
    let t = table();
    let s = mock_search(
        &t,
        SearchConfig {
            generations: 6,
            ..SearchConfig::default()
        },
        8,
    );
    for g in 0..5 {
        let gen: Vec<_> = s.log.records.iter().filter(|r| r.generation == g).collect();
        let next: Vec<_> = s
            .log
            .records
            .iter()
            .filter(|r| r.generation == g + 1)
            .collect();
        let mut ranked = gen.clone();
        ranked.sort_by(|a, b| b.fitness.total_cmp(&a.fitness).then(a.id.cmp(&b.id)));
        for elite in &ranked[..2] {
            let carried = next
                .iter()
                .find(|r| r.id == elite.id)
                .expect("elite carried over");
            assert_eq!(
                (&carried.genome, carried.fitness, carried.born),
                (&elite.genome, elite.fitness, elite.born)
            );
        }
        assert_eq!(next.len(), 20);
    }
}

#[test]
fn single_generation_picks_better_of_two() {
    let t = table();
    let config = SearchConfig {
        population: 2,
        generations: 1,
        elite: 1,
        ..SearchConfig::default()
    };
    let s = mock_search(&t, config, 11);
    assert_eq!(s.log.generations.len(), 1);
    let fits: Vec<f64> = s.log.records.iter().map(|r| r.fitness).collect();
    assert_eq!(s.best().unwrap().fitness, fits[0].max(fits[1]));
}

#[test]
fn full_search_is_deterministic() {
    let t = table();
    let config = SearchConfig {
        generations: 10,
        ..SearchConfig::default()
    };
    let a = mock_search(&t, config, 21);
    let b = mock_search(&t, config, 21);
    assert_eq!(a.log, b.log);
    assert_eq!(csv(&t, &a), csv(&t, &b));
    let c = mock_search(&t, config, 22);
    assert_ne!(csv(&t, &a), csv(&t, &c));
}

#[test]
fn resumed_search_matches_uninterrupted_run() {
    let t = table();
    let config = SearchConfig {
        generations: 8,
        ..SearchConfig::default()
    };
    let full = mock_search(&t, config, 31);
    let eval = MockFitness::new(&t, 31);
    let search = Search {
        table: &t,
        evaluator: &eval,
        config,
        seed: 31,
        workers: 1,
    };
    let mut saved = None;
    let stop = search.run(|s| {
        if s.completed == 3 {
            saved = Some(serde_json::to_string(s).unwrap());
            return Err(Error::State("interrupted".into()));
        }
        Ok(())
    });
    assert!(stop.is_err());
    let state: SearchState = serde_json::from_str(&saved.unwrap()).unwrap();
    let resumed = search.resume(state, |_| Ok(())).unwrap();
    assert_eq!(resumed.log, full.log);

    let other = Search { seed: 32, ..search };
    let state: SearchState = serde_json::from_str(&serde_json::to_string(&full).unwrap()).unwrap();
    assert!(matches!(
        other.resume(state, |_| Ok(())),
        Err(Error::State(_))
    ));
}

#[test]
fn fitness_is_memoized_per_genome() {
    let t = uniform_table(&[2, 2]);
    let eval = Counting {
        inner: MockFitness::new(&t, 0),
        calls: AtomicUsize::new(0),
    };
    let config = SearchConfig {
        population: 10,
        generations: 5,
        ..SearchConfig::default()
    };
    let s = Search {
        table: &t,
        evaluator: &eval,
        config,
        seed: 0,
        workers: 1,
    }
    .run(|_| Ok(()))
    .unwrap();
    // Only four genomes exist.
    assert!(eval.calls.load(Ordering::Relaxed) <= 4);
    assert_eq!(s.cache.len(), eval.calls.load(Ordering::Relaxed));
}

#[test]
fn evaluator_registry() {
    assert_eq!(fitness_evaluators().names(), vec!["mock", "proxy-train"]);
    let t = table();
    let ctx = FitnessContext::default();
    assert!(fitness_evaluator("mock", &ctx, &t).is_ok());
    assert!(matches!(
        fitness_evaluator("proxy-train", &ctx, &t),
        Err(Error::Argument(_))
    ));
    assert!(matches!(
        fitness_evaluator("oracle", &ctx, &t),
        Err(Error::UnknownStrategy { .. })
    ));
}

fn digits_proxy(epochs: usize) -> Arc<ProxyData> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    let (train, val) = load_dataset(DatasetName::Digits, &dir, 0.2, 0).unwrap();
    let all: Vec<usize> = (0..train.len()).collect();
    let proxy = train.select(&proxy_subset(&all, 1000, 0).unwrap(), Split::Train);
    Arc::new(ProxyData {
        train: proxy,
        val,
        input_size: 8,
        epochs,
    })
}

#[test]
fn divergent_architecture_scores_zero() {
    let text = table()
        .to_toml()
        .replace("[1e-4, 5e-4, 1e-3, 3e-3, 8e-3]", "[1e300]");
    let text = text.replace("0.0001, 0.0005, 0.001, 0.003, 0.008", "1e300");
    let t = GeneTable::from_toml(&text).unwrap();
    assert_eq!(
        t.gene(t.index_of("lr").unwrap()).options,
        vec![GeneValue::Float(1e300)]
    );
    let ctx = FitnessContext {
        proxy: Some(digits_proxy(1)),
        seed: 0,
    };
    let eval = fitness_evaluator("proxy-train", &ctx, &t).unwrap();
    let g = t
        .encode(&Hyperparams {
            lr: 1e300,
            ..Hyperparams::digits_reference()
        })
        .unwrap();
    let r = eval.evaluate(&t, &g, 0);
    assert_eq!(r.fitness, 0.0);
    assert!(r.diagnostic.unwrap().contains("diverged"));
}

#[test]
fn reference_genome_proxy_fitness() {
    let t = table();
    let ctx = FitnessContext {
        proxy: Some(digits_proxy(5)),
        seed: 0,
    };
    let eval = fitness_evaluator("proxy-train", &ctx, &t).unwrap();
    let g = t.encode(&Hyperparams::digits_reference()).unwrap();
    let a = eval.evaluate(&t, &g, g.training_seed(0));
    let b = eval.evaluate(&t, &g, g.training_seed(0));
    assert_eq!(a, b);
    assert!(a.diagnostic.is_none());
    // Five proxy epochs land a few points under the fully trained figure.
    assert!(a.fitness >= 0.85 && a.fitness <= 1.0, "{}", a.fitness);
}
