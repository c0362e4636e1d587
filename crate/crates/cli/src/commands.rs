use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use photonas_core::analysis::{
    compare_baseline, contribution_report, epoch_correlation_scan, write_cosine_matrix_csv,
    write_curves_csv, write_histories_csv, write_history_csv, write_scan_csv,
};
use photonas_core::data::{load_dataset, proxy_subset, Dataset, Split};
use photonas_core::ga::{
    fitness_evaluator, summarize, write_log_csv, write_timing_csv, FitnessContext, GeneTable,
    GeneValue, ProxyData, Search, SearchState,
};
use photonas_core::model::{
    classical_forward_ms, train_model, Hyperparams, ModelCheckpoint, ModelSpec, PhotonicModel,
    QuantumSpec, TrainBudget, TrainingMetadata,
};
use photonas_core::rng::stream;
use photonas_core::timing::{estimate, estimate_total, ClassicalTiming, HardwareConstants};
use serde::Serialize;

use crate::args::{
    AnalyzeArgs, BaselineArgs, Cli, Command, EstimateArgs, GenomeSource, ScanArgs, SearchArgs,
    TrainArgs,
};
use crate::config::{Resolver, RunConfig, DEFAULT_SCAN_EPOCHS};
use crate::error::CliError;
use crate::manifest::{write_atomic, RunRecorder};

type Result<T> = std::result::Result<T, CliError>;

pub const SEARCH_STATE: &str = "search_state.json";
const STOPPED: &str = "generation budget of this invocation used up";

pub fn run(cli: &Cli) -> Result<()> {
    let r = Resolver::new(cli)?;
    match &cli.command {
        Command::Search(a) => search(&r, a),
        Command::Train(a) => train(&r, a),
        Command::EstimateHw(a) => estimate_hw(&r, a),
        Command::Analyze(a) => analyze(&r, a),
        Command::CorrelateEpochs(a) => correlate_epochs(&r, a),
        Command::Baseline(a) => baseline(&r, a),
    }
}

fn csv<F>(write: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut Vec<u8>) -> std::result::Result<(), Box<dyn std::error::Error>>,
{
    let mut buf = Vec::new();
    write(&mut buf).map_err(|e| CliError::runtime(e.to_string()))?;
    Ok(buf)
}

fn load_table(cfg: &RunConfig, rec: &mut RunRecorder) -> Result<GeneTable> {
    match &cfg.gene_table {
        Some(p) => {
            rec.input(p)?;
            Ok(GeneTable::load(p)?)
        }
        None => Ok(GeneTable::default_table()),
    }
}

/// Training pool and validation split, with input checksums recorded.
fn load_data(cfg: &RunConfig, mut rec: Option<&mut RunRecorder>) -> Result<(Dataset, Dataset)> {
    for f in cfg.dataset.files(&cfg.data_dir) {
        if !f.is_file() {
            return Err(CliError::usage(format!(
                "{} data file not found: {} (set --data-dir or PHOTONAS_DATA_DIR)",
                cfg.dataset.as_str(),
                f.display()
            )));
        }
        if let Some(rec) = rec.as_deref_mut() {
            rec.input(&f)?;
        }
    }
    Ok(load_dataset(
        cfg.dataset,
        &cfg.data_dir,
        cfg.val_fraction,
        cfg.split_seed,
    )?)
}

fn proxy_data(cfg: &RunConfig, rec: &mut RunRecorder, epochs: usize) -> Result<Arc<ProxyData>> {
    let (train, val) = load_data(cfg, Some(rec))?;
    let all: Vec<usize> = (0..train.len()).collect();
    let idx = proxy_subset(&all, cfg.proxy_size, cfg.seed)?;
    Ok(Arc::new(ProxyData {
        train: train.select(&idx, Split::Train),
        val,
        input_size: cfg.input_size,
        epochs,
    }))
}

fn reference(name: &str) -> Result<Hyperparams> {
    match name {
        "digits" => Ok(Hyperparams::digits_reference()),
        "mnist" => Ok(Hyperparams::mnist_reference()),
        other => Err(CliError::usage(format!(
            "unknown reference `{other}` (expected digits or mnist)"
        ))),
    }
}

/// Reads a genome file: a JSON object of gene values, either at the top
/// level or under `genes`.
pub fn read_genome(path: &Path, table: &GeneTable) -> Result<Hyperparams> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("genome {}: {e}", path.display())))?;
    let v: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("genome {}: {e}", path.display())))?;
    let obj = v.get("genes").unwrap_or(&v);
    let obj = obj.as_object().ok_or_else(|| {
        CliError::usage(format!("genome {}: expected a JSON object", path.display()))
    })?;
    let values = obj
        .iter()
        .map(|(k, v)| Ok((k.clone(), GeneValue::from_json(v)?)))
        .collect::<std::result::Result<BTreeMap<_, _>, photonas_core::Error>>()?;
    let genome = table.genome_from_values(&values)?;
    Ok(table.resolve(&genome)?)
}

fn hyperparams(
    src: &GenomeSource,
    table: &GeneTable,
    rec: &mut RunRecorder,
) -> Result<Hyperparams> {
    match (&src.genome, &src.reference) {
        (Some(p), _) => {
            rec.input(p)?;
            read_genome(p, table)
        }
        (None, Some(name)) => reference(name),
        (None, None) => Err(CliError::usage(
            "pass --genome <file> or --reference <digits|mnist>",
        )),
    }
}

#[derive(Serialize)]
struct BestGenome<'a> {
    id: usize,
    fitness: f64,
    genes: &'a BTreeMap<String, GeneValue>,
}

fn search(r: &Resolver, a: &SearchArgs) -> Result<()> {
    let mut cfg = r.base("search", &a.data, true)?;
    r.apply_proxy(&mut cfg, &a.proxy);
    let s = &mut cfg.search;
    s.population = a.pop.unwrap_or(s.population);
    s.generations = a.gens.unwrap_or(s.generations);
    s.crossover_rate = a.crossover_rate.unwrap_or(s.crossover_rate);
    s.mutation_rate = a.mutation_rate.unwrap_or(s.mutation_rate);
    s.elite = a.elite.unwrap_or(s.elite);
    s.tournament = a.tournament.unwrap_or(s.tournament);
    if let Some(f) = &a.fitness {
        cfg.fitness = f.clone();
    }
    cfg.search.validate()?;
    let mut rec = RunRecorder::start(cfg.clone())?;
    let table = load_table(&cfg, &mut rec)?;
    let proxy = match cfg.fitness.as_str() {
        "mock" => None,
        _ => Some(proxy_data(&cfg, &mut rec, cfg.proxy_epochs)?),
    };
    let ctx = FitnessContext {
        proxy,
        seed: cfg.seed,
    };
    let evaluator = fitness_evaluator(&cfg.fitness, &ctx, &table)?;
    let search = Search {
        table: &table,
        evaluator: &*evaluator,
        config: cfg.search,
        seed: cfg.seed,
        workers: cfg.workers,
    };

    let state_path = rec.path(SEARCH_STATE);
    let resumed = if state_path.is_file() && !a.fresh {
        let text =
            std::fs::read_to_string(&state_path).map_err(|e| CliError::usage(e.to_string()))?;
        let state: SearchState = serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("{}: {e}", state_path.display())))?;
        eprintln!("resuming after generation {}", state.completed);
        Some(state)
    } else {
        None
    };
    let total = cfg.search.generations;
    let mut budget = a.stop_after;
    let checkpoint = |st: &SearchState| -> photonas_core::Result<()> {
        let g = st.log.generations.last().expect("a generation was logged");
        eprintln!(
            "generation {}/{total}: best {:.4} mean {:.4} worst {:.4}",
            g.generation + 1,
            g.best,
            g.mean,
            g.worst
        );
        let text = serde_json::to_string(st)?;
        write_atomic(&state_path, text.as_bytes())
            .map_err(|e| photonas_core::Error::State(e.message))?;
        if let Some(left) = budget.as_mut() {
            *left = left.saturating_sub(1);
            if *left == 0 && !st.is_finished() {
                return Err(photonas_core::Error::State(STOPPED.into()));
            }
        }
        Ok(())
    };
    let outcome = match resumed {
        Some(st) => search.resume(st, checkpoint),
        None => search.run(checkpoint),
    };
    let state = match outcome {
        Err(photonas_core::Error::State(m)) if m == STOPPED => {
            println!("stopped early; rerun the same command to resume");
            return Ok(());
        }
        other => other?,
    };

    let log = csv(|b| Ok(write_log_csv(&table, &state.log, b)?))?;
    rec.artifact("search_log.csv", &log)?;
    let timing = csv(|b| Ok(write_timing_csv(&state.timings, b)?))?;
    write_atomic(&rec.path("search_timing.csv"), &timing)?;
    let summary = summarize(&table, &state)?;
    rec.json_artifact(
        "best_genome.json",
        &BestGenome {
            id: summary.best_id,
            fitness: summary.best_fitness,
            genes: &summary.best_genome,
        },
    )?;
    rec.json_artifact("search_summary.json", &summary)?;
    rec.summary("best_fitness", summary.best_fitness);
    rec.summary("best_id", summary.best_id);
    rec.finish()?;
    println!(
        "best fitness {:.4} (individual {})",
        summary.best_fitness, summary.best_id
    );
    Ok(())
}

fn train(r: &Resolver, a: &TrainArgs) -> Result<()> {
    let mut cfg = r.base("train", &a.data, true)?;
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if a.gene_table.is_some() {
        cfg.gene_table = a.gene_table.clone();
    }
    let mut rec = RunRecorder::start(cfg.clone())?;
    let table = load_table(&cfg, &mut rec)?;
    let h = hyperparams(&a.source, &table, &mut rec)?;
    let (train, val) = load_data(&cfg, Some(&mut rec))?;
    let spec = ModelSpec::hybrid(train.height, train.width, cfg.input_size, h.clone())?;
    let mut model = PhotonicModel::build(spec, cfg.seed)?;
    model.fit_preprocessing(&train)?;
    let (tr, va) = (model.prepare(&train)?, model.prepare(&val)?);
    let budget = TrainBudget::from_hyperparams(&h, cfg.epochs);
    let out = train_model(&mut model, &tr, &va, &budget, cfg.seed)?;
    for e in &out.history {
        eprintln!(
            "epoch {}: train loss {:.4} val loss {:.4} val acc {:.4}",
            e.epoch, e.train_loss, e.val_loss, e.val_acc
        );
    }
    let meta = TrainingMetadata {
        epochs: cfg.epochs,
        seed: cfg.seed,
        best_epoch: out.best_epoch,
        best_val_acc: out.best_val_acc,
        final_record: out.history.last().cloned(),
    };
    let ckpt = ModelCheckpoint::capture(&model, meta);
    rec.artifact("checkpoint.json", ckpt.to_json()?.as_bytes())?;
    let hist = csv(|b| Ok(write_history_csv(&out.history, b)?))?;
    rec.artifact("history.csv", &hist)?;
    rec.summary("parameters", model.spec().parameter_count());
    rec.summary("best_epoch", out.best_epoch);
    rec.summary("best_val_acc", out.best_val_acc);
    rec.finish()?;
    match out.best_val_acc {
        Some(acc) => println!("best val acc {acc:.4} at epoch {}", out.best_epoch),
        None => println!("untrained checkpoint written"),
    }
    Ok(())
}

fn hardware_constants(base: &HardwareConstants, a: &EstimateArgs) -> HardwareConstants {
    let mut c = base.clone();
    c.eta = a.eta.unwrap_or(c.eta);
    c.k_det_ms = a.k_det_ms.unwrap_or(c.k_det_ms);
    c.reconfig_ms_per_layer = a.reconfig_ms.unwrap_or(c.reconfig_ms_per_layer);
    c.t_lat_ms = a.t_lat_ms.unwrap_or(c.t_lat_ms);
    c.path_length_m = a.path_length_m.unwrap_or(c.path_length_m);
    c.iterations = a.iterations.unwrap_or(c.iterations);
    if let Some(d) = &a.depth_model {
        c.depth_model = d.clone();
    }
    c
}

fn estimate_hw(r: &Resolver, a: &EstimateArgs) -> Result<()> {
    let mut cfg = r.base("estimate-hw", &a.data, false)?;
    cfg.hardware = hardware_constants(&cfg.hardware, a);
    cfg.hardware.validate()?;
    let write = r.cli.out.is_some() || r.file.out.is_some();
    let mut rec = if write {
        Some(RunRecorder::start(cfg.clone())?)
    } else {
        None
    };

    let ckpt = match &a.checkpoint {
        Some(p) => {
            if let Some(rec) = rec.as_mut() {
                rec.input(p)?;
            }
            Some(ModelCheckpoint::load(p)?)
        }
        None => None,
    };
    let (modes, photons) = match (&ckpt, a.modes, a.photons) {
        (Some(c), _, _) => match &c.spec.quantum {
            QuantumSpec::Photonic { circuit, .. } => (circuit.modes(), circuit.photons()),
            QuantumSpec::Dense { .. } => {
                return Err(CliError::usage(
                    "checkpoint holds a classical model with no photonic layer",
                ))
            }
        },
        (None, Some(m), Some(n)) => (m, n),
        _ => {
            return Err(CliError::usage(
                "pass --checkpoint or both --modes and --photons",
            ))
        }
    };
    let est = estimate(
        modes,
        photons,
        &cfg.hardware,
        &mut stream(cfg.seed, "hw-timing"),
    )?;

    let classical = if a.measure_classical {
        let ckpt = ckpt.as_ref().expect("clap requires --checkpoint");
        let (_, val) = load_data(&cfg, rec.as_mut())?;
        let mut model = ckpt.restore()?;
        let data = model.prepare(&val)?;
        Some(classical_forward_ms(&mut model, &data, 0, a.runs)?)
    } else {
        a.classical_ms
            .map(|ms| ClassicalTiming::fixed(ms, a.classical_std_ms.unwrap_or(0.0)))
    };

    let json = match classical {
        Some(c) => serde_json::to_string_pretty(&estimate_total(&est, c)),
        None => serde_json::to_string_pretty(&est),
    }
    .map_err(|e| CliError::runtime(e.to_string()))?;
    // A closed pipe is not worth a panic.
    let _ = writeln!(std::io::stdout(), "{json}");
    if let Some(mut rec) = rec {
        rec.artifact("timing.json", format!("{json}\n").as_bytes())?;
        rec.finish()?;
    }
    Ok(())
}

fn analyze(r: &Resolver, a: &AnalyzeArgs) -> Result<()> {
    let cfg = r.base("analyze", &a.data, false)?;
    let mut rec = RunRecorder::start(cfg.clone())?;
    rec.input(&a.checkpoint)?;
    let ckpt = ModelCheckpoint::load(&a.checkpoint)?;
    if !ckpt.spec.is_hybrid() {
        return Err(CliError::usage(
            "contribution metrics need a hybrid checkpoint",
        ));
    }
    let (_, val) = load_data(&cfg, Some(&mut rec))?;
    let mut model = ckpt.restore()?;
    let data = model.prepare(&val)?;
    let report = contribution_report(&mut model, &data)?;
    rec.json_artifact("contribution.json", &report)?;
    let m = csv(|b| Ok(write_cosine_matrix_csv(&report.interclass, b)?))?;
    rec.artifact("cosine_matrix.csv", &m)?;
    rec.summary("interclass_mean", report.interclass.mean);
    rec.summary("orthogonality_mean", report.orthogonality.mean);
    rec.finish()?;
    println!(
        "inter-class cosine {:.4} +- {:.4}; quantum-classical cosine {:+.4} +- {:.4}",
        report.interclass.mean,
        report.interclass.std,
        report.orthogonality.mean,
        report.orthogonality.std
    );
    Ok(())
}

fn correlate_epochs(r: &Resolver, a: &ScanArgs) -> Result<()> {
    let mut cfg = r.base("correlate-epochs", &a.data, true)?;
    r.apply_proxy(&mut cfg, &a.proxy);
    cfg.n_arch = a.n_arch.unwrap_or(cfg.n_arch);
    cfg.epochs = a
        .epochs
        .or(r.file.scan.epochs)
        .unwrap_or(DEFAULT_SCAN_EPOCHS);
    let mut rec = RunRecorder::start(cfg.clone())?;
    let table = load_table(&cfg, &mut rec)?;
    let data = proxy_data(&cfg, &mut rec, cfg.epochs)?;
    let scan =
        epoch_correlation_scan(&table, &data, cfg.n_arch, cfg.epochs, cfg.seed, cfg.workers)?;
    let table_csv = csv(|b| Ok(write_scan_csv(&scan, b)?))?;
    rec.artifact("epoch_correlation.csv", &table_csv)?;
    rec.json_artifact("scan.json", &scan)?;
    rec.summary("threshold_epoch", scan.threshold_epoch);
    rec.summary("stable_epoch", scan.stable_epoch);
    rec.finish()?;
    let show = |e: Option<usize>| e.map_or("none".to_string(), |e| e.to_string());
    println!(
        "both coefficients above 0.8 first at epoch {}, from epoch {} onward",
        show(scan.threshold_epoch),
        show(scan.stable_epoch)
    );
    Ok(())
}

fn baseline(r: &Resolver, a: &BaselineArgs) -> Result<()> {
    let mut cfg = r.base("baseline", &a.data, true)?;
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(s) = &a.seeds {
        cfg.seeds = s.clone();
    }
    if a.gene_table.is_some() {
        cfg.gene_table = a.gene_table.clone();
    }
    let mut rec = RunRecorder::start(cfg.clone())?;
    let table = load_table(&cfg, &mut rec)?;
    let h = hyperparams(&a.source, &table, &mut rec)?;
    let (train, val) = load_data(&cfg, Some(&mut rec))?;
    let c = compare_baseline(
        &h,
        cfg.input_size,
        &train,
        &val,
        &cfg.seeds,
        cfg.epochs,
        cfg.workers,
    )?;
    for run in &c.runs {
        if let Some(e) = &run.error {
            eprintln!("{} seed {} failed: {e}", run.arm.as_str(), run.seed);
        }
        let hist = csv(|b| Ok(write_history_csv(&run.history, b)?))?;
        rec.artifact(
            &format!("history_{}_seed{}.csv", run.arm.as_str(), run.seed),
            &hist,
        )?;
    }
    let all = csv(|b| Ok(write_histories_csv(&c, b)?))?;
    rec.artifact("histories.csv", &all)?;
    let curves = csv(|b| Ok(write_curves_csv(&c, b)?))?;
    rec.artifact("curves.csv", &curves)?;
    rec.json_artifact("comparison.json", &c)?;
    rec.summary("delta_pp", c.delta_pp);
    rec.finish()?;
    println!(
        "hybrid {:.4} +- {:.4}, baseline {:.4} +- {:.4}, delta {:+.2} +- {:.2} pp",
        c.hybrid.mean,
        c.hybrid.std,
        c.baseline.mean,
        c.baseline.std,
        c.delta_pp.mean,
        c.delta_pp.std
    );
    Ok(())
}
