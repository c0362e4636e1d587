//! Config file loading and flag/file/default resolution.

use std::path::{Path, PathBuf};

use photonas_core::data::DatasetName;
use photonas_core::ga::SearchConfig;
use photonas_core::timing::HardwareConstants;
use serde::{Deserialize, Serialize};

use crate::args::{Cli, DataArgs, ProxyArgs};
use crate::error::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub dataset: Option<String>,
    pub data_dir: Option<PathBuf>,
    pub input_size: Option<usize>,
    pub val_fraction: Option<f64>,
    pub split_seed: Option<u64>,
    pub gene_table: Option<PathBuf>,
    pub epochs: Option<usize>,
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub search: FileSearch,
    #[serde(default)]
    pub proxy: FileProxy,
    #[serde(default)]
    pub scan: FileScan,
    pub hardware: Option<HardwareConstants>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSearch {
    pub population: Option<usize>,
    pub generations: Option<usize>,
    pub crossover_rate: Option<f64>,
    pub mutation_rate: Option<f64>,
    pub elite: Option<usize>,
    pub tournament: Option<usize>,
    pub fitness: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileProxy {
    pub epochs: Option<usize>,
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileScan {
    pub n_arch: Option<usize>,
    pub epochs: Option<usize>,
}

impl FileConfig {
    /// Reads `path`, making relative paths relative to its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
        let mut cfg: Self = toml::from_str(&text)
            .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.out, &mut cfg.data_dir, &mut cfg.gene_table] {
            if let Some(p) = p.as_mut() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }
}

/// Fully resolved settings of one run; recorded in the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub seed: u64,
    pub out: PathBuf,
    pub workers: usize,
    pub dataset: DatasetName,
    pub data_dir: PathBuf,
    pub input_size: usize,
    pub val_fraction: f64,
    pub split_seed: u64,
    pub gene_table: Option<PathBuf>,
    pub search: SearchConfig,
    pub fitness: String,
    pub proxy_epochs: usize,
    pub proxy_size: usize,
    pub epochs: usize,
    pub seeds: Vec<u64>,
    pub n_arch: usize,
    pub hardware: HardwareConstants,
}

pub const DEFAULT_TRAIN_EPOCHS: usize = 100;
pub const DEFAULT_SCAN_ARCHS: usize = 24;
pub const DEFAULT_SCAN_EPOCHS: usize = 20;

pub struct Resolver<'a> {
    pub cli: &'a Cli,
    pub file: FileConfig,
}

impl<'a> Resolver<'a> {
    pub fn new(cli: &'a Cli) -> Result<Self, CliError> {
        let file = match &cli.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        Ok(Self { cli, file })
    }

    /// Base config for `command`; `seed_required` rejects runs without an
    /// explicit seed.
    pub fn base(
        &self,
        command: &str,
        data: &DataArgs,
        seed_required: bool,
    ) -> Result<RunConfig, CliError> {
        let f = &self.file;
        let seed = match self.cli.seed.or(f.seed) {
            Some(s) => s,
            None if seed_required => {
                return Err(CliError::usage(format!(
                    "`{command}` needs --seed (or `seed` in the config)"
                )))
            }
            None => 0,
        };
        let dataset = data
            .dataset
            .clone()
            .or(f.dataset.clone())
            .unwrap_or_else(|| "digits".into());
        let dataset = DatasetName::parse(&dataset)?;
        let workers = self
            .cli
            .workers
            .or(f.workers)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        if workers == 0 {
            return Err(CliError::usage("--workers must be positive"));
        }
        let search = SearchConfig {
            population: f
                .search
                .population
                .unwrap_or(SearchConfig::default().population),
            generations: f
                .search
                .generations
                .unwrap_or(SearchConfig::default().generations),
            crossover_rate: f
                .search
                .crossover_rate
                .unwrap_or(SearchConfig::default().crossover_rate),
            mutation_rate: f
                .search
                .mutation_rate
                .unwrap_or(SearchConfig::default().mutation_rate),
            elite: f.search.elite.unwrap_or(SearchConfig::default().elite),
            tournament: f
                .search
                .tournament
                .unwrap_or(SearchConfig::default().tournament),
        };
        Ok(RunConfig {
            command: command.to_string(),
            seed,
            out: self
                .cli
                .out
                .clone()
                .or(f.out.clone())
                .unwrap_or_else(|| PathBuf::from("photonas-runs").join(command)),
            workers,
            dataset,
            data_dir: data
                .data_dir
                .clone()
                .or(f.data_dir.clone())
                .unwrap_or_else(|| "data".into()),
            input_size: data
                .input_size
                .or(f.input_size)
                .unwrap_or(dataset.default_input_size()),
            val_fraction: data.val_fraction.or(f.val_fraction).unwrap_or(0.2),
            split_seed: data.split_seed.or(f.split_seed).unwrap_or(0),
            gene_table: f.gene_table.clone(),
            search,
            fitness: f
                .search
                .fitness
                .clone()
                .unwrap_or_else(|| "proxy-train".into()),
            proxy_epochs: f.proxy.epochs.unwrap_or(dataset.default_proxy_epochs()),
            proxy_size: f.proxy.samples.unwrap_or(dataset.default_proxy_size()),
            epochs: f.epochs.unwrap_or(DEFAULT_TRAIN_EPOCHS),
            seeds: f
                .seeds
                .clone()
                .unwrap_or_else(|| vec![seed, seed + 1, seed + 2]),
            n_arch: f.scan.n_arch.unwrap_or(DEFAULT_SCAN_ARCHS),
            hardware: f.hardware.clone().unwrap_or_default(),
        })
    }

    pub fn apply_proxy(&self, cfg: &mut RunConfig, p: &ProxyArgs) {
        if let Some(e) = p.proxy_epochs {
            cfg.proxy_epochs = e;
        }
        if let Some(s) = p.proxy_size {
            cfg.proxy_size = s;
        }
        if p.gene_table.is_some() {
            cfg.gene_table = p.gene_table.clone();
        }
    }
}
