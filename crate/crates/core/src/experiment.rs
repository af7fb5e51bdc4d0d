//! Experiment configuration and the drivers behind the CLI: single
//! experiments, training-set-size sweeps and the full comparison table.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::datagen::{self, Dataset, GeneratorParams, Task, DEFAULT_TEST_SEED};
use crate::error::{Error, Result};
use crate::neural::{count_params, Activation, InputShape, LayerKind, LayerSpec, NetworkSpec, OptimizerKind};
use crate::ranking::rank_dataset;
use crate::trainer::{multi_run, MultiRunResult, Selector, TrainConfig};

/// Object counts with tabulated defaults.
pub const TABLE_OBJECTS: [usize; 3] = [10, 20, 30];

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    /// Fully connected network on raw states.
    WoPrior,
    /// Fully connected network on jointly ranked samples.
    Rank,
    /// Permutation-equivariant network on raw states.
    Penn,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::WoPrior, Variant::Rank, Variant::Penn];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::WoPrior => "wo_prior",
            Variant::Rank => "rank",
            Variant::Penn => "penn",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wo_prior" => Ok(Variant::WoPrior),
            "rank" => Ok(Variant::Rank),
            "penn" => Ok(Variant::Penn),
            other => Err(Error::Config(format!("unknown variant `{other}`"))),
        }
    }
}

/// Tuned hyper-parameters of one (task, n, variant) cell.
struct Tuned {
    /// Total hidden neurons per layer. Equivariant networks divide by the
    /// object count to get the per-object width.
    hidden: &'static [usize],
    optimizer: OptimizerKind,
    learning_rate: f64,
    batch_size: usize,
    epochs: usize,
    train_size: usize,
}

fn tuned(task: Task, n: usize, variant: Variant) -> Option<Tuned> {
    use OptimizerKind::{Adam, RmsProp};
    let col = TABLE_OBJECTS.iter().position(|&m| m == n)?;
    let pick = |v: [usize; 3]| v[col];
    let t = match (task, variant) {
        (Task::Power, Variant::WoPrior) => Tuned {
            hidden: &[100],
            optimizer: Adam,
            learning_rate: 0.1,
            batch_size: 32,
            epochs: 3000,
            train_size: pick([300, 900, 1350]),
        },
        (Task::Power, Variant::Rank) => Tuned {
            hidden: [&[10][..], &[5], &[5]][col],
            optimizer: Adam,
            learning_rate: 0.1,
            batch_size: pick([20, 6, 3]),
            epochs: 3000,
            train_size: pick([20, 6, 3]),
        },
        (Task::Power, Variant::Penn) => Tuned {
            hidden: [&[100][..], &[200], &[300]][col],
            optimizer: Adam,
            learning_rate: 0.001,
            batch_size: pick([20, 50, 150]),
            epochs: pick([10000, 10000, 15000]),
            train_size: pick([20, 50, 150]),
        },
        (Task::Caching, Variant::WoPrior) => Tuned {
            hidden: [&[50][..], &[90], &[120]][col],
            optimizer: Adam,
            learning_rate: 0.01,
            batch_size: 128,
            epochs: 3000,
            train_size: pick([5000, 9000, 12000]),
        },
        (Task::Caching, Variant::Rank) => Tuned {
            hidden: [&[20][..], &[5], &[4]][col],
            optimizer: Adam,
            learning_rate: 0.01,
            batch_size: pick([15, 8, 5]),
            epochs: 10000,
            train_size: pick([15, 8, 5]),
        },
        (Task::Caching, Variant::Penn) => Tuned {
            hidden: [&[100][..], &[400], &[300]][col],
            optimizer: Adam,
            learning_rate: 0.01,
            batch_size: pick([15, 50, 100]),
            epochs: pick([10000, 10000, 15000]),
            train_size: pick([15, 50, 100]),
        },
        // Reduced from the 500k-1M samples the tuned setup used.
        (Task::Interference, Variant::WoPrior) => Tuned {
            hidden: &[200, 80, 80],
            optimizer: RmsProp,
            learning_rate: 0.001,
            batch_size: 1000,
            epochs: 300,
            train_size: 20_000,
        },
        (Task::Interference, Variant::Rank) => Tuned {
            hidden: &[150, 50, 50],
            optimizer: RmsProp,
            learning_rate: 0.001,
            batch_size: 1000,
            epochs: 500,
            train_size: pick([10_000, 3000, 2000]),
        },
        (Task::Interference, Variant::Penn) => Tuned {
            hidden: [&[100, 100][..], &[200, 200], &[300, 300]][col],
            optimizer: Adam,
            learning_rate: 0.01,
            batch_size: pick([120, 800, 1000]),
            epochs: pick([500, 3000, 8000]),
            train_size: pick([120, 800, 4000]),
        },
    };
    Some(t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub task: Task,
    pub num_objects: usize,
    pub variant: Variant,
    /// Hidden widths. Per object (per pair for the interference task) when
    /// `variant` is `penn`, total neurons otherwise.
    pub hidden: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub lr_decay: Option<f64>,
    pub batch_size: usize,
    pub epochs: usize,
    pub train_size: usize,
    pub n_runs: usize,
    pub selector: Selector,
    pub seed: u64,
    pub test_seed: u64,
    pub out: Option<PathBuf>,
}

pub fn output_activation(task: Task) -> Activation {
    match task {
        Task::Power => Activation::Softplus,
        Task::Caching => Activation::Sigmoid,
        Task::Interference => Activation::Relu6Over6,
    }
}

fn default_protocol(task: Task) -> (usize, Selector) {
    match task {
        Task::Interference => (3, Selector::Best),
        _ => (10, Selector::SecondWorst),
    }
}

impl ExperimentConfig {
    /// Tuned defaults for a tabulated cell.
    pub fn defaults(task: Task, num_objects: usize, variant: Variant) -> Result<Self> {
        let t = tuned(task, num_objects, variant).ok_or_else(|| {
            Error::Config(format!(
                "no tuned defaults for {task} with {num_objects} objects ({variant}); give every hyper-parameter explicitly"
            ))
        })?;
        let hidden = match variant {
            Variant::Penn => t.hidden.iter().map(|h| h / num_objects).collect(),
            _ => t.hidden.to_vec(),
        };
        let (n_runs, selector) = default_protocol(task);
        Ok(Self {
            task,
            num_objects,
            variant,
            hidden,
            hidden_activation: Activation::Relu,
            output_activation: output_activation(task),
            optimizer: t.optimizer,
            learning_rate: t.learning_rate,
            lr_decay: None,
            batch_size: t.batch_size,
            epochs: t.epochs,
            train_size: t.train_size,
            n_runs,
            selector,
            seed: DEFAULT_SEED,
            test_seed: DEFAULT_TEST_SEED,
            out: None,
        })
    }

    /// Preset giving every variant `total` hidden neurons in one layer.
    pub fn equal_width(task: Task, num_objects: usize, variant: Variant, total: usize) -> Result<Self> {
        let mut cfg = Self::defaults(task, num_objects, variant)?;
        cfg.hidden = match variant {
            Variant::Penn => vec![(total / num_objects).max(1)],
            _ => vec![total],
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.num_objects == 0 {
            return bad("num_objects must be positive");
        }
        if self.batch_size == 0 || self.train_size == 0 || self.n_runs == 0 {
            return bad("batch_size, train_size and n_runs must be positive");
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if let Some(d) = self.lr_decay {
            if !(d > 0.0 && d <= 1.0) {
                return bad("lr_decay must lie in (0, 1]");
            }
        }
        Ok(())
    }

    pub fn generator_params(&self) -> GeneratorParams {
        GeneratorParams::defaults(self.num_objects)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            epochs: self.epochs,
            optimizer: self.optimizer,
            learning_rate: self.learning_rate,
            seed: self.seed,
            lr_decay: self.lr_decay,
        }
    }

    /// Network of the configured variant.
    pub fn network(&self) -> Result<NetworkSpec> {
        let n = self.num_objects;
        let input = if self.task.is_matrix() {
            InputShape::Matrix(n)
        } else {
            InputShape::Vector(n)
        };
        let hidden_act = self.hidden_activation;
        let mut layers = Vec::new();
        match self.variant {
            Variant::WoPrior | Variant::Rank => {
                let mut width = input.len();
                for &h in &self.hidden {
                    layers.push(LayerSpec::new(LayerKind::Dense, width, h, hidden_act));
                    width = h;
                }
                layers.push(LayerSpec::new(LayerKind::Dense, width, n, self.output_activation));
            }
            Variant::Penn if self.task.is_matrix() => {
                let mut width = 1;
                for &h in &self.hidden {
                    layers.push(LayerSpec::new(LayerKind::Equivariant2d, width, h, hidden_act));
                    width = h;
                }
                layers.push(LayerSpec::new(LayerKind::DiagReadout, width, 1, self.output_activation));
            }
            Variant::Penn => {
                let mut width = 1;
                for &h in &self.hidden {
                    layers.push(LayerSpec::new(LayerKind::EquivariantSet, width, h, hidden_act));
                    width = h;
                }
                layers.push(LayerSpec::new(LayerKind::EquivariantSet, width, 1, self.output_activation));
            }
        }
        NetworkSpec::new(input, layers)
    }

    /// Flat `key = value` text, one key per field.
    pub fn to_text(&self) -> String {
        let hidden: Vec<String> = self.hidden.iter().map(usize::to_string).collect();
        let opt = |v: Option<String>| v.unwrap_or_else(|| "none".into());
        [
            ("task", self.task.to_string()),
            ("num_objects", self.num_objects.to_string()),
            ("variant", self.variant.to_string()),
            ("hidden", hidden.join(",")),
            ("hidden_activation", self.hidden_activation.as_str().to_string()),
            ("output_activation", self.output_activation.as_str().to_string()),
            ("optimizer", self.optimizer.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("lr_decay", opt(self.lr_decay.map(|d| d.to_string()))),
            ("batch_size", self.batch_size.to_string()),
            ("epochs", self.epochs.to_string()),
            ("train_size", self.train_size.to_string()),
            ("n_runs", self.n_runs.to_string()),
            ("selector", self.selector.to_string()),
            ("seed", self.seed.to_string()),
            ("test_seed", self.test_seed.to_string()),
            ("out", opt(self.out.as_ref().map(|p| p.display().to_string()))),
        ]
        .iter()
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
    }

    /// Parses the `key = value` form. `task`, `num_objects` and `variant`
    /// are required; other keys override the tuned defaults, and must all be
    /// present for cells without defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(i + 1, format!("expected `key = value`, got `{line}`")))?;
            let k = k.trim();
            if !CONFIG_KEYS.contains(&k) {
                return Err(Error::Config(format!("unknown key `{k}` on line {}", i + 1)));
            }
            if map.insert(k.to_string(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("duplicate key `{k}` on line {}", i + 1)));
            }
        }
        let required = |k: &str| {
            map.get(k)
                .cloned()
                .ok_or_else(|| Error::Config(format!("missing key `{k}`")))
        };
        let task: Task = required("task")?.parse()?;
        let num_objects = parse_num::<usize>("num_objects", &required("num_objects")?)?;
        let variant: Variant = required("variant")?.parse()?;
        let mut cfg = match Self::defaults(task, num_objects, variant) {
            Ok(c) => c,
            Err(e) => {
                if let Some(k) = UNTABULATED_REQUIRED.iter().find(|k| !map.contains_key(**k)) {
                    return Err(Error::Config(format!("{e}; missing `{k}`")));
                }
                let (n_runs, selector) = default_protocol(task);
                Self {
                    task,
                    num_objects,
                    variant,
                    hidden: Vec::new(),
                    hidden_activation: Activation::Relu,
                    output_activation: output_activation(task),
                    optimizer: OptimizerKind::Adam,
                    learning_rate: 0.0,
                    lr_decay: None,
                    batch_size: 0,
                    epochs: 0,
                    train_size: 0,
                    n_runs,
                    selector,
                    seed: DEFAULT_SEED,
                    test_seed: DEFAULT_TEST_SEED,
                    out: None,
                }
            }
        };
        for (k, v) in &map {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "task" => self.task = value.parse()?,
            "num_objects" => self.num_objects = parse_num(key, value)?,
            "variant" => self.variant = value.parse()?,
            "hidden" => {
                self.hidden = if value.is_empty() {
                    Vec::new()
                } else {
                    value
                        .split(',')
                        .map(|w| parse_num(key, w.trim()))
                        .collect::<Result<_>>()?
                }
            }
            "hidden_activation" => self.hidden_activation = value.parse()?,
            "output_activation" => self.output_activation = value.parse()?,
            "optimizer" => self.optimizer = value.parse()?,
            "learning_rate" => self.learning_rate = parse_num(key, value)?,
            "lr_decay" => {
                self.lr_decay = if value == "none" {
                    None
                } else {
                    Some(parse_num(key, value)?)
                }
            }
            "batch_size" => self.batch_size = parse_num(key, value)?,
            "epochs" => self.epochs = parse_num(key, value)?,
            "train_size" => self.train_size = parse_num(key, value)?,
            "n_runs" => self.n_runs = parse_num(key, value)?,
            "selector" => self.selector = value.parse()?,
            "seed" => self.seed = parse_num(key, value)?,
            "test_seed" => self.test_seed = parse_num(key, value)?,
            "out" => self.out = (value != "none").then(|| PathBuf::from(value)),
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}

/// Keys of the config file, in the order they are written.
pub const CONFIG_KEYS: [&str; 17] = [
    "task",
    "num_objects",
    "variant",
    "hidden",
    "hidden_activation",
    "output_activation",
    "optimizer",
    "learning_rate",
    "lr_decay",
    "batch_size",
    "epochs",
    "train_size",
    "n_runs",
    "selector",
    "seed",
    "test_seed",
    "out",
];

const UNTABULATED_REQUIRED: [&str; 6] = ["hidden", "optimizer", "learning_rate", "batch_size", "epochs", "train_size"];

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub task: Task,
    pub num_objects: usize,
    pub variant: Variant,
    pub system_performance: f64,
    pub train_samples: usize,
    pub free_parameters: usize,
    pub train_seconds: f64,
}

/// Training and validation sets of one run, ranked for the rank variant.
pub fn run_datasets(cfg: &ExperimentConfig, seed: u64) -> Result<(Dataset, Dataset)> {
    let (tr, va) = datagen::training_pair(cfg.task, cfg.num_objects, cfg.train_size, seed, &cfg.generator_params())?;
    if cfg.variant == Variant::Rank {
        Ok((rank_dataset(&tr)?, rank_dataset(&va)?))
    } else {
        Ok((tr, va))
    }
}

pub fn build_test_set(cfg: &ExperimentConfig) -> Result<Dataset> {
    datagen::test_set(cfg.task, cfg.num_objects, cfg.test_seed, &cfg.generator_params())
}

/// Runs the repeated-training protocol against a prepared test set.
pub fn run_with_test(cfg: &ExperimentConfig, test: &Dataset) -> Result<(ResultRow, MultiRunResult)> {
    cfg.validate()?;
    let spec = cfg.network()?;
    let result = multi_run(
        &spec,
        |_, seed| run_datasets(cfg, seed),
        test,
        &cfg.train_config(),
        cfg.n_runs,
        cfg.selector,
    )?;
    let row = ResultRow {
        task: cfg.task,
        num_objects: cfg.num_objects,
        variant: cfg.variant,
        system_performance: result.selected.test_metric,
        train_samples: cfg.train_size,
        free_parameters: count_params(&spec),
        train_seconds: result.median_seconds,
    };
    Ok((row, result))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultRow> {
    let test = build_test_set(cfg)?;
    Ok(run_with_test(cfg, &test)?.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    /// Smallest candidate meeting the target, if any.
    pub minimal: Option<usize>,
    /// Selected metric of every candidate tried, in order.
    pub tried: Vec<(usize, f64)>,
}

/// Smallest training-set size whose selected metric reaches `target`.
/// Batch sizes larger than the candidate size are clamped to it.
pub fn sweep_sample_size(cfg: &ExperimentConfig, target: f64, candidates: &[usize]) -> Result<SweepOutcome> {
    if candidates.is_empty() {
        return Err(Error::Config("no candidate sizes".into()));
    }
    if candidates.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("candidate sizes must be strictly ascending".into()));
    }
    let test = build_test_set(cfg)?;
    let mut tried = Vec::new();
    for &size in candidates {
        let mut c = cfg.clone();
        c.train_size = size;
        c.batch_size = c.batch_size.min(size);
        let (row, _) = run_with_test(&c, &test)?;
        log::info!("{} {} n={} size={size}: {:.4}", c.task, c.variant, c.num_objects, row.system_performance);
        tried.push((size, row.system_performance));
        if row.system_performance >= target {
            return Ok(SweepOutcome {
                minimal: Some(size),
                tried,
            });
        }
    }
    Ok(SweepOutcome { minimal: None, tried })
}

/// Published values of one comparison cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceCell {
    pub performance: f64,
    pub samples: usize,
    pub parameters: usize,
    pub seconds: f64,
}

/// Published reference values, indexed by task, variant and object count.
/// The timings were measured on a GPU and are not comparable to ours.
#[allow(clippy::approx_constant)]
pub fn reference(task: Task, variant: Variant, num_objects: usize) -> Option<ReferenceCell> {
    let col = TABLE_OBJECTS.iter().position(|&m| m == num_objects)?;
    #[rustfmt::skip]
    let (perf, samples, params, secs): ([f64; 3], [usize; 3], [usize; 3], [f64; 3]) = match (task, variant) {
        (Task::Power, Variant::WoPrior) => ([0.9948, 0.9992, 0.9999], [300, 900, 1350], [2110, 4120, 6130], [21.64, 61.2, 89.01]),
        (Task::Power, Variant::Rank) => ([0.9943, 0.9951, 0.9999], [20, 6, 3], [220, 225, 335], [5.45, 5.51, 5.52]),
        (Task::Power, Variant::Penn) => ([0.9926, 0.9860, 0.9770], [20, 50, 150], [51, 51, 51], [31.74, 32.05, 50.32]),
        (Task::Caching, Variant::WoPrior) => ([0.9904, 0.9909, 0.9912], [5000, 9000, 12000], [1060, 3710, 7350], [90.96, 165.61, 225.78]),
        (Task::Caching, Variant::Rank) => ([0.9900, 0.9903, 0.9915], [15, 8, 5], [430, 225, 274], [18.14, 18.19, 18.48]),
        (Task::Caching, Variant::Penn) => ([0.9925, 0.9903, 0.9739], [15, 50, 100], [51, 101, 51], [31.70, 32.02, 50.29]),
        (Task::Interference, Variant::WoPrior) => ([0.9795, 0.9063, 0.8562], [500_000, 1_000_000, 1_000_000], [25570, 28380, 31190], [574.10, 4198.18, 9844.96]),
        (Task::Interference, Variant::Rank) => ([0.9784, 0.9042, 0.8560], [10_000, 3000, 2000], [12260, 14070, 16080], [16.88, 16.52, 24.02]),
        (Task::Interference, Variant::Penn) => ([0.9003, 0.8571, 0.8418], [120, 800, 4000], [480, 480, 480], [6.28, 219.16, 6737.43]),
    };
    Some(ReferenceCell {
        performance: perf[col],
        samples: samples[col],
        parameters: params[col],
        seconds: secs[col],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub task: Task,
    pub num_objects: usize,
    pub variant: Variant,
    pub result: std::result::Result<ResultRow, String>,
    pub reference: Option<ReferenceCell>,
}

/// Column order of the comparison CSV.
pub const COMPARISON_CSV_HEADER: &str = "task,objects,variant,system_performance,train_samples,free_parameters,\
train_seconds,ref_performance,ref_samples,ref_parameters,ref_seconds,status";

/// Index of the timing column, the only non-deterministic one.
pub const COMPARISON_TIMING_COLUMN: usize = 6;

impl ComparisonRow {
    pub fn csv_line(&self) -> String {
        let (perf, samples, params, secs, status) = match &self.result {
            Ok(r) => (
                format!("{:.6}", r.system_performance),
                r.train_samples.to_string(),
                r.free_parameters.to_string(),
                format!("{:.3}", r.train_seconds),
                "ok".to_string(),
            ),
            Err(e) => (
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                format!("\"failed: {}\"", e.replace('"', "'")),
            ),
        };
        let (rp, rs, rq, rt) = match self.reference {
            Some(c) => (
                c.performance.to_string(),
                c.samples.to_string(),
                c.parameters.to_string(),
                c.seconds.to_string(),
            ),
            None => Default::default(),
        };
        format!(
            "{},{},{},{perf},{samples},{params},{secs},{rp},{rs},{rq},{rt},{status}",
            self.task, self.num_objects, self.variant
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonOptions {
    pub seed: u64,
    /// Overrides the default number of runs per cell.
    pub runs: Option<usize>,
    /// Caps the epochs of interference cells.
    pub interference_epoch_cap: Option<usize>,
}

impl Default for ComparisonOptions {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            runs: None,
            interference_epoch_cap: Some(500),
        }
    }
}

/// Configuration used for one cell of the comparison.
pub fn comparison_config(task: Task, n: usize, variant: Variant, opts: &ComparisonOptions) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::defaults(task, n, variant)?;
    cfg.seed = opts.seed;
    if let Some(r) = opts.runs {
        cfg.n_runs = r;
    }
    if task == Task::Interference {
        if let Some(cap) = opts.interference_epoch_cap {
            cfg.epochs = cfg.epochs.min(cap);
        }
    }
    Ok(cfg)
}

/// Runs every (task, n, variant) cell and writes the comparison CSV.
/// Failed cells are recorded in the status column.
pub fn reproduce_table2(
    tasks: &[Task],
    n_list: &[usize],
    opts: &ComparisonOptions,
    out_path: &Path,
) -> Result<Vec<ComparisonRow>> {
    let mut rows = Vec::new();
    for &task in tasks {
        for &n in n_list {
            let mut test: Option<std::result::Result<Dataset, String>> = None;
            for variant in Variant::ALL {
                let result = comparison_config(task, n, variant, opts)
                    .map_err(|e| e.to_string())
                    .and_then(|cfg| {
                        let t = test.get_or_insert_with(|| build_test_set(&cfg).map_err(|e| e.to_string()));
                        let t = t.as_ref().map_err(Clone::clone)?;
                        run_with_test(&cfg, t).map(|(row, _)| row).map_err(|e| e.to_string())
                    });
                match &result {
                    Ok(r) => log::info!("{task} n={n} {variant}: {:.4}", r.system_performance),
                    Err(e) => log::warn!("{task} n={n} {variant} failed: {e}"),
                }
                rows.push(ComparisonRow {
                    task,
                    num_objects: n,
                    variant,
                    result,
                    reference: reference(task, variant, n),
                });
            }
        }
    }
    let mut text = String::from(COMPARISON_CSV_HEADER);
    text.push('\n');
    for r in &rows {
        text.push_str(&r.csv_line());
        text.push('\n');
    }
    if let Some(dir) = out_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(out_path, text)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_cover_all_tabulated_cells() {
        for task in Task::ALL {
            for n in TABLE_OBJECTS {
                for v in Variant::ALL {
                    let cfg = ExperimentConfig::defaults(task, n, v).unwrap();
                    cfg.validate().unwrap();
                    cfg.network().unwrap();
                    assert!(reference(task, v, n).is_some());
                }
            }
        }
        assert!(ExperimentConfig::defaults(Task::Power, 15, Variant::Rank).is_err());
    }

    #[test]
    fn parameter_counts_match_reference() {
        for task in [Task::Power, Task::Caching] {
            for n in TABLE_OBJECTS {
                for v in Variant::ALL {
                    let spec = ExperimentConfig::defaults(task, n, v).unwrap().network().unwrap();
                    assert_eq!(count_params(&spec), reference(task, v, n).unwrap().parameters, "{task} {n} {v}");
                }
            }
        }
    }

    #[test]
    fn interference_penn_count_is_constant_in_k() {
        let counts: Vec<usize> = TABLE_OBJECTS
            .iter()
            .map(|&k| {
                count_params(&ExperimentConfig::defaults(Task::Interference, k, Variant::Penn).unwrap().network().unwrap())
            })
            .collect();
        assert!(counts.windows(2).all(|w| w[0] == w[1]), "{counts:?}");
    }

    #[test]
    fn config_round_trip() {
        let mut cfg = ExperimentConfig::defaults(Task::Caching, 20, Variant::Penn).unwrap();
        cfg.lr_decay = Some(0.999);
        cfg.out = Some(PathBuf::from("out/cell.csv"));
        cfg.learning_rate = 0.1 + 0.2;
        let back = ExperimentConfig::from_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        let plain = ExperimentConfig::defaults(Task::Interference, 10, Variant::Rank).unwrap();
        assert_eq!(ExperimentConfig::from_text(&plain.to_text()).unwrap(), plain);
    }

    #[test]
    fn config_errors() {
        let unknown = "task = power\nnum_objects = 10\nvariant = rank\ncolour = blue\n";
        assert!(matches!(ExperimentConfig::from_text(unknown), Err(Error::Config(_))));
        let untabulated = "task = power\nnum_objects = 12\nvariant = rank\n";
        assert!(matches!(ExperimentConfig::from_text(untabulated), Err(Error::Config(_))));
        let explicit = "task = power\nnum_objects = 12\nvariant = rank\nhidden = 8\noptimizer = adam\n\
            learning_rate = 0.1\nbatch_size = 4\nepochs = 10\ntrain_size = 4\n";
        let cfg = ExperimentConfig::from_text(explicit).unwrap();
        assert_eq!(cfg.hidden, vec![8]);
        assert_eq!(cfg.n_runs, 10);
        let partial = "task = power\nnum_objects = 10\nvariant = rank\nepochs = 7\n";
        let cfg = ExperimentConfig::from_text(partial).unwrap();
        assert_eq!((cfg.epochs, cfg.batch_size), (7, 20));
        assert!(ExperimentConfig::from_text("task = power\nnum_objects = 10\n").is_err());
        assert!(ExperimentConfig::from_text("task power\n").is_err());
    }

    #[test]
    fn equal_width_preset() {
        let wo = ExperimentConfig::equal_width(Task::Power, 30, Variant::WoPrior, 300).unwrap();
        let penn = ExperimentConfig::equal_width(Task::Power, 30, Variant::Penn, 300).unwrap();
        assert_eq!(wo.hidden, vec![300]);
        assert_eq!(penn.hidden, vec![10]);
    }

    #[test]
    fn sweep_edge_targets() {
        let mut cfg = ExperimentConfig::defaults(Task::Power, 10, Variant::Rank).unwrap();
        cfg.n_runs = 1;
        cfg.epochs = 5;
        let first = sweep_sample_size(&cfg, 0.0, &[2, 4]).unwrap();
        assert_eq!(first.minimal, Some(2));
        assert_eq!(first.tried.len(), 1);
        let none = sweep_sample_size(&cfg, 1.01, &[2, 4]).unwrap();
        assert_eq!(none.minimal, None);
        assert_eq!(none.tried.len(), 2);
        assert!(sweep_sample_size(&cfg, 0.5, &[]).is_err());
        assert!(sweep_sample_size(&cfg, 0.5, &[4, 2]).is_err());
    }

    #[test]
    fn comparison_csv_columns() {
        let row = ComparisonRow {
            task: Task::Power,
            num_objects: 10,
            variant: Variant::Rank,
            result: Err("boom".into()),
            reference: reference(Task::Power, Variant::Rank, 10),
        };
        let line = row.csv_line();
        assert_eq!(line.split(',').count(), COMPARISON_CSV_HEADER.split(',').count());
        assert!(line.ends_with("\"failed: boom\""));
        assert_eq!(COMPARISON_CSV_HEADER.split(',').nth(COMPARISON_TIMING_COLUMN), Some("train_seconds"));
    }
}
