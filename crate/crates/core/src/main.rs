use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pelearn::datagen::{self, GeneratorParams, Task};
use pelearn::experiment::{
    self, ComparisonOptions, ExperimentConfig, ResultRow, Variant, DEFAULT_SEED, TABLE_OBJECTS,
};
use pelearn::neural;
use pelearn::orderstats;
use pelearn::ranking;
use pelearn::rng::{self, domain};
use pelearn::trainer::{self, Policy, Selector};
use pelearn::{Error, Result};

#[derive(Parser)]
#[command(name = "pelearn", version, about = "Learn wireless resource-allocation policies with permutation priors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled dataset.
    GenData {
        #[arg(long)]
        task: Task,
        #[arg(long)]
        objects: usize,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank every sample of a dataset file.
    Rank {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train with the repeated-run protocol and report the selected run.
    Train {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Checkpoint of the selected run.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Score a checkpoint on a dataset (default: the fixed test set).
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        task: Task,
        #[arg(long)]
        objects: usize,
        /// Use `rank` for checkpoints trained on ranked samples.
        #[arg(long, default_value = "wo_prior")]
        variant: Variant,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = datagen::DEFAULT_TEST_SEED)]
        test_seed: u64,
    },
    /// Find the smallest training set that reaches a target ratio.
    SweepSamples {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        candidates: Vec<usize>,
        #[arg(long, default_value_t = 0.98)]
        target: f64,
    },
    /// Order-statistic variance report for sorted Exp(1) gains.
    Orderstats {
        #[arg(long, value_delimiter = ',', default_values_t = TABLE_OBJECTS)]
        objects: Vec<usize>,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every comparison cell and write the CSV.
    #[command(name = "reproduce-table2")]
    ReproduceTable2 {
        /// Restrict to one task; interference also needs --slow.
        #[arg(long)]
        task: Option<Task>,
        #[arg(long, value_delimiter = ',', default_values_t = TABLE_OBJECTS)]
        objects: Vec<usize>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        slow: bool,
        #[arg(long, default_value = "comparison.csv")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    task: Option<Task>,
    #[arg(long)]
    objects: Option<usize>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    train_size: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    selector: Option<Selector>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Per-run CSV (train) or sweep CSV (sweep-samples).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Allow the interference task.
    #[arg(long)]
    slow: bool,
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => {
                let missing = |f: &str| Error::Config(format!("--{f} is required without --config"));
                ExperimentConfig::defaults(
                    self.task.ok_or_else(|| missing("task"))?,
                    self.objects.ok_or_else(|| missing("objects"))?,
                    self.variant.ok_or_else(|| missing("variant"))?,
                )?
            }
        };
        if self.config.is_some() && (self.task.is_some() || self.objects.is_some() || self.variant.is_some()) {
            let mut base = ExperimentConfig::defaults(
                self.task.unwrap_or(cfg.task),
                self.objects.unwrap_or(cfg.num_objects),
                self.variant.unwrap_or(cfg.variant),
            )?;
            base.seed = cfg.seed;
            base.test_seed = cfg.test_seed;
            base.out = cfg.out.clone();
            cfg = base;
        }
        if let Some(v) = self.train_size {
            cfg.train_size = v;
        }
        if let Some(v) = self.runs {
            cfg.n_runs = v;
        }
        if let Some(v) = self.selector {
            cfg.selector = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.out {
            cfg.out = Some(v.clone());
        }
        if cfg.task == Task::Interference && !self.slow {
            return Err(Error::Config("the interference task needs --slow".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_row(row: &ResultRow) {
    println!(
        "task={} objects={} variant={} system_performance={:.6} train_samples={} free_parameters={} train_seconds={:.3}",
        row.task,
        row.num_objects,
        row.variant,
        row.system_performance,
        row.train_samples,
        row.free_parameters,
        row.train_seconds
    );
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData {
            task,
            objects,
            count,
            seed,
            out,
        } => {
            let ds = datagen::build_dataset(task, objects, count, seed, &GeneratorParams::defaults(objects))?;
            create_parent(&out)?;
            datagen::save_dataset(&ds, &out)?;
            println!("wrote {} {task} samples to {}", ds.len(), out.display());
        }
        Command::Rank { input, out } => {
            let ranked = ranking::rank_dataset(&datagen::load_dataset(&input)?)?;
            create_parent(&out)?;
            datagen::save_dataset(&ranked, &out)?;
            println!("wrote {} ranked samples to {}", ranked.len(), out.display());
        }
        Command::Train { exp, checkpoint } => {
            let cfg = exp.resolve()?;
            let test = experiment::build_test_set(&cfg)?;
            let (row, result) = experiment::run_with_test(&cfg, &test)?;
            print_row(&row);
            if let Some(path) = &cfg.out {
                create_parent(path)?;
                let mut f = fs::File::create(path)?;
                trainer::write_run_csv(&mut f, &result.records)?;
            }
            if let Some(path) = checkpoint {
                create_parent(&path)?;
                neural::save_checkpoint(&cfg.network()?, &result.selected.outcome.params, &path)?;
            }
        }
        Command::Evaluate {
            checkpoint,
            task,
            objects,
            variant,
            input,
            test_seed,
        } => {
            let (spec, params) = neural::load_checkpoint(&checkpoint)?;
            let test = match input {
                Some(p) => datagen::load_dataset(&p)?,
                None => datagen::test_set(task, objects, test_seed, &GeneratorParams::defaults(objects))?,
            };
            if test.task != task || test.num_objects != objects {
                return Err(Error::Config("dataset does not match --task/--objects".into()));
            }
            let policy = Policy {
                spec: &spec,
                params: &params,
                task,
                num_objects: objects,
                ranked_inputs: variant == Variant::Rank,
            };
            println!("system_performance={:.6}", trainer::evaluate_policy(&policy, &test)?);
        }
        Command::SweepSamples { exp, candidates, target } => {
            let cfg = exp.resolve()?;
            let outcome = experiment::sweep_sample_size(&cfg, target, &candidates)?;
            let mut text = String::from("train_samples,system_performance\n");
            for (size, metric) in &outcome.tried {
                text.push_str(&format!("{size},{metric:.6}\n"));
            }
            print!("{text}");
            match outcome.minimal {
                Some(m) => println!("minimal_train_samples={m}"),
                None => println!("minimal_train_samples=none"),
            }
            if let Some(path) = &cfg.out {
                create_parent(path)?;
                fs::write(path, text)?;
            }
        }
        Command::Orderstats {
            objects,
            trials,
            seed,
            out,
        } => {
            let mut r = rng::stream(seed, domain::ORDER_STATS, 0);
            let csv = orderstats::hardening_report(&objects, trials, &mut r)?.to_csv();
            match out {
                Some(path) => {
                    create_parent(&path)?;
                    fs::write(&path, csv)?;
                }
                None => print!("{csv}"),
            }
        }
        Command::ReproduceTable2 {
            task,
            objects,
            seed,
            runs,
            slow,
            out,
        } => {
            let tasks: Vec<Task> = match task {
                Some(t) => vec![t],
                None if slow => Task::ALL.to_vec(),
                None => vec![Task::Power, Task::Caching],
            };
            if tasks.contains(&Task::Interference) && !slow {
                return Err(Error::Config("the interference task needs --slow".into()));
            }
            let opts = ComparisonOptions {
                seed,
                runs,
                ..ComparisonOptions::default()
            };
            let rows = experiment::reproduce_table2(&tasks, &objects, &opts, &out)?;
            let failed = rows.iter().filter(|r| r.result.is_err()).count();
            println!("wrote {} cells ({failed} failed) to {}", rows.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
