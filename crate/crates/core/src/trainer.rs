//! Supervised training, policy evaluation and the repeated-training
//! selection protocol.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;

use crate::datagen::{Dataset, Instance, Task};
use crate::error::{Error, Result};
use crate::neural::{self, NetworkSpec, OptimizerKind, OptimizerState, ParamStore};
use crate::ranking::{rank_state, unrank_prediction};
use crate::rng::{self, domain};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub seed: u64,
    /// Multiplicative learning-rate factor applied once per epoch.
    pub lr_decay: Option<f64>,
}

/// Parameters and learning curves of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Snapshot with the lowest validation MSE over all epoch boundaries.
    pub params: ParamStore,
    /// 0 means the initial parameters were kept.
    pub best_epoch: usize,
    pub best_val_mse: f64,
    /// Mean batch loss per epoch.
    pub train_loss: Vec<f64>,
    /// Validation MSE at every epoch boundary, starting with the initial net.
    pub val_mse: Vec<f64>,
    pub train_seconds: f64,
    pub epochs_run: usize,
}

fn stack(ds: &Dataset) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(ds.len() * ds.task.state_len(ds.num_objects));
    let mut y = Vec::with_capacity(ds.len() * ds.num_objects);
    for s in &ds.samples {
        x.extend_from_slice(&s.state);
        y.extend_from_slice(&s.label);
    }
    (x, y)
}

fn dataset_mse(spec: &NetworkSpec, params: &ParamStore, x: &[f64], y: &[f64], count: usize) -> Result<f64> {
    let pred = neural::forward_batch(spec, params, x, count)?;
    neural::loss_mse(&pred, y)
}

/// Minibatch training with best-validation snapshotting.
pub fn train(spec: &NetworkSpec, train_set: &Dataset, val_set: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Config("training and validation sets must be non-empty".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    if train_set.ranked != val_set.ranked || train_set.task != val_set.task {
        return Err(Error::Config("training and validation sets disagree on task or ranking".into()));
    }
    let state_len = train_set.task.state_len(train_set.num_objects);
    if spec.input.len() != state_len || spec.output_len() != train_set.num_objects {
        return Err(Error::Config(format!(
            "network {spec} does not fit {} samples with {} objects",
            train_set.task, train_set.num_objects
        )));
    }

    let (x, y) = stack(train_set);
    let (vx, vy) = stack(val_set);
    let out_len = train_set.num_objects;
    let mut params = neural::init_params(spec, &mut rng::stream(config.seed, domain::INIT, 0));
    let mut optimizer = OptimizerState::new(config.optimizer, config.learning_rate, params.len());
    let mut shuffle_rng = rng::stream(config.seed, domain::SHUFFLE, 0);

    let initial_val = dataset_mse(spec, &params, &vx, &vy, val_set.len())?;
    let mut best = (initial_val, 0usize, params.clone());
    let mut val_mse = vec![initial_val];
    let mut train_loss = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut bx = Vec::new();
    let mut by = Vec::new();

    let start = Instant::now();
    for epoch in 1..=config.epochs {
        if let Some(decay) = config.lr_decay {
            optimizer.learning_rate = config.learning_rate * decay.powi(epoch as i32 - 1);
        }
        order.shuffle(&mut shuffle_rng);
        let mut weighted = 0.0;
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            bx.clear();
            by.clear();
            for &i in chunk {
                bx.extend_from_slice(&x[i * state_len..(i + 1) * state_len]);
                by.extend_from_slice(&y[i * out_len..(i + 1) * out_len]);
            }
            let abort = |msg: String| Error::Training {
                epoch,
                batch: batch_idx,
                msg,
            };
            let (loss, grads) =
                neural::backward(spec, &params, &bx, &by, chunk.len()).map_err(|e| abort(e.to_string()))?;
            if !loss.is_finite() {
                return Err(abort(format!("loss became {loss}")));
            }
            optimizer.step(&mut params, &grads).map_err(|e| abort(e.to_string()))?;
            weighted += loss * chunk.len() as f64;
        }
        train_loss.push(weighted / train_set.len() as f64);
        let v = dataset_mse(spec, &params, &vx, &vy, val_set.len()).map_err(|e| Error::Training {
            epoch,
            batch: 0,
            msg: format!("validation: {e}"),
        })?;
        val_mse.push(v);
        if v < best.0 {
            best = (v, epoch, params.clone());
        }
    }
    let train_seconds = start.elapsed().as_secs_f64();

    Ok(TrainOutcome {
        params: best.2,
        best_epoch: best.1,
        best_val_mse: best.0,
        train_loss,
        val_mse,
        train_seconds,
        epochs_run: config.epochs,
    })
}

/// A trained network deployed as a resource-allocation policy.
///
/// With `ranked_inputs`, each state is ranked before the network sees it and
/// the prediction is mapped back to the original object order.
#[derive(Debug, Clone, Copy)]
pub struct Policy<'a> {
    pub spec: &'a NetworkSpec,
    pub params: &'a ParamStore,
    pub task: Task,
    pub num_objects: usize,
    pub ranked_inputs: bool,
}

impl Policy<'_> {
    pub fn act(&self, state: &[f64]) -> Result<Vec<f64>> {
        Ok(self.act_batch(state, 1)?.remove(0))
    }

    /// Raw network actions for `count` stacked states, in original order.
    pub fn act_batch(&self, states: &[f64], count: usize) -> Result<Vec<Vec<f64>>> {
        let state_len = self.task.state_len(self.num_objects);
        if states.len() != count * state_len {
            return Err(Error::Shape(format!("{} values for {count} states", states.len())));
        }
        if !self.ranked_inputs {
            let out = neural::forward_batch(self.spec, self.params, states, count)?;
            return Ok(out.chunks(self.num_objects).map(<[f64]>::to_vec).collect());
        }
        let mut ranked = Vec::with_capacity(states.len());
        let mut perms = Vec::with_capacity(count);
        for s in states.chunks(state_len) {
            let (r, p) = rank_state(self.task, s, self.num_objects)?;
            ranked.extend(r);
            perms.push(p);
        }
        let out = neural::forward_batch(self.spec, self.params, &ranked, count)?;
        out.chunks(self.num_objects)
            .zip(&perms)
            .map(|(pred, perm)| unrank_prediction(pred, perm))
            .collect()
    }
}

/// Projects `q` onto `{0 <= q <= 1, sum q = budget}` by repeatedly scaling
/// the unsaturated entries to the remaining budget and clipping at one.
/// An all-zero input stays zero.
pub fn project_capped_simplex(raw: &[f64], budget: f64) -> Vec<f64> {
    let n = raw.len();
    if budget >= n as f64 {
        return vec![1.0; n];
    }
    let mut q: Vec<f64> = raw.iter().map(|v| v.max(0.0)).collect();
    let mut saturated = vec![false; n];
    for _ in 0..=n {
        let free: f64 = q.iter().zip(&saturated).filter(|(_, s)| !**s).map(|(v, _)| v).sum();
        if free <= 0.0 {
            break;
        }
        let target = budget - saturated.iter().filter(|s| **s).count() as f64;
        let scale = target / free;
        let mut clipped = false;
        for (v, s) in q.iter_mut().zip(&mut saturated) {
            if !*s {
                *v *= scale;
                if *v >= 1.0 {
                    *v = 1.0;
                    *s = true;
                    clipped = true;
                }
            }
        }
        if !clipped {
            break;
        }
    }
    q
}

/// Maps a raw network output onto the feasible set of the instance.
pub fn project_action(inst: &Instance, raw: &[f64]) -> Vec<f64> {
    match inst {
        Instance::Power(i) => {
            let p: Vec<f64> = raw.iter().map(|v| v.max(0.0)).collect();
            let total: f64 = p.iter().sum();
            if total > 0.0 {
                p.iter().map(|v| v * i.budget / total).collect()
            } else {
                p
            }
        }
        Instance::Caching(i) => project_capped_simplex(raw, i.cache_budget),
        Instance::Interference(i) => raw.iter().map(|v| v.clamp(0.0, 1.0) * i.pmax).collect(),
    }
}

/// Mean over the test set of (objective of projected action) / (objective of
/// the oracle label). Samples whose oracle objective is zero are skipped.
pub fn evaluate_actions(test: &Dataset, actions: &[Vec<f64>]) -> Result<f64> {
    if actions.len() != test.len() {
        return Err(Error::Shape(format!(
            "{} actions for {} test samples",
            actions.len(),
            test.len()
        )));
    }
    let mut total = 0.0;
    let mut used = 0usize;
    for (i, (sample, raw)) in test.samples.iter().zip(actions).enumerate() {
        let inst = test.instance(&sample.state)?;
        let optimum = inst.objective(&sample.label)?;
        if !(optimum > 0.0) {
            log::warn!("test sample {i} has zero oracle objective; skipped");
            continue;
        }
        let achieved = inst.objective(&project_action(&inst, raw))?;
        total += achieved / optimum;
        used += 1;
    }
    if used == 0 {
        return Err(Error::Numeric("no test sample has a positive oracle objective".into()));
    }
    Ok(total / used as f64)
}

/// System-performance ratio of a policy on an unranked test set.
pub fn evaluate_policy(policy: &Policy<'_>, test: &Dataset) -> Result<f64> {
    if test.ranked {
        return Err(Error::Config("final evaluation expects an unranked test set".into()));
    }
    let mut states = Vec::with_capacity(test.len() * test.task.state_len(test.num_objects));
    for s in &test.samples {
        states.extend_from_slice(&s.state);
    }
    let actions = policy.act_batch(&states, test.len())?;
    evaluate_actions(test, &actions)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Selector {
    /// Second-lowest test metric (one run in ten may fall below it).
    SecondWorst,
    Best,
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Selector::SecondWorst => "second_worst",
            Selector::Best => "best",
        })
    }
}

impl FromStr for Selector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "second_worst" => Ok(Selector::SecondWorst),
            "best" => Ok(Selector::Best),
            other => Err(Error::Config(format!("unknown selector `{other}`"))),
        }
    }
}

impl Selector {
    /// Index into the ascending-sorted metrics of `completed` runs.
    pub fn index(self, completed: usize) -> usize {
        match self {
            Selector::SecondWorst => completed.min(2) - 1,
            Selector::Best => completed - 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    pub test_metric: f64,
    pub outcome: TrainOutcome,
    pub note: String,
}

/// Per-run record; `error` is set for aborted runs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub test_metric: Option<f64>,
    pub train_seconds: f64,
    pub epochs: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiRunResult {
    pub selected: RunResult,
    pub records: Vec<RunRecord>,
    pub median_seconds: f64,
}

/// Trains and scores one run.
pub fn run_once(
    spec: &NetworkSpec,
    train_set: &Dataset,
    val_set: &Dataset,
    test_set: &Dataset,
    config: &TrainConfig,
) -> Result<(TrainOutcome, f64)> {
    let outcome = train(spec, train_set, val_set, config)?;
    let policy = Policy {
        spec,
        params: &outcome.params,
        task: test_set.task,
        num_objects: test_set.num_objects,
        ranked_inputs: train_set.ranked,
    };
    let metric = evaluate_policy(&policy, test_set)?;
    Ok((outcome, metric))
}

/// Selects among metrics sorted ascending (ties keep run order).
pub fn select(metrics: &[(usize, f64)], selector: Selector) -> Option<usize> {
    if metrics.is_empty() {
        return None;
    }
    let mut sorted = metrics.to_vec();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Some(sorted[selector.index(sorted.len())].0)
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

/// Repeats training `n_runs` times with fresh training/validation data from
/// `factory(run, seed)` against one fixed test set and picks a run with
/// `selector`. Run `r` uses seed `derive_seed(config.seed, r)`.
pub fn multi_run<F>(
    spec: &NetworkSpec,
    mut factory: F,
    test_set: &Dataset,
    config: &TrainConfig,
    n_runs: usize,
    selector: Selector,
) -> Result<MultiRunResult>
where
    F: FnMut(usize, u64) -> Result<(Dataset, Dataset)>,
{
    if n_runs == 0 {
        return Err(Error::Config("at least one run is required".into()));
    }
    let mut records = Vec::with_capacity(n_runs);
    let mut completed: Vec<RunResult> = Vec::new();
    for run in 0..n_runs {
        let seed = rng::derive_seed(config.seed, run as u64);
        let run_config = TrainConfig {
            seed,
            ..config.clone()
        };
        let attempt = factory(run, seed).and_then(|(tr, va)| run_once(spec, &tr, &va, test_set, &run_config));
        match attempt {
            Ok((outcome, metric)) => {
                records.push(RunRecord {
                    run,
                    seed,
                    test_metric: Some(metric),
                    train_seconds: outcome.train_seconds,
                    epochs: outcome.epochs_run,
                    error: None,
                });
                let note = format!("best validation at epoch {}", outcome.best_epoch);
                completed.push(RunResult {
                    run,
                    seed,
                    test_metric: metric,
                    outcome,
                    note,
                });
            }
            Err(e) => {
                log::warn!("run {run} aborted: {e}");
                records.push(RunRecord {
                    run,
                    seed,
                    test_metric: None,
                    train_seconds: 0.0,
                    epochs: 0,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    let enough = if n_runs == 1 { 1 } else { 2 };
    if completed.len() < enough {
        let reasons: Vec<String> = records.iter().filter_map(|r| r.error.clone()).collect();
        return Err(Error::Training {
            epoch: 0,
            batch: 0,
            msg: format!(
                "only {} of {n_runs} runs completed: {}",
                completed.len(),
                reasons.join("; ")
            ),
        });
    }
    let metrics: Vec<(usize, f64)> = completed.iter().enumerate().map(|(i, r)| (i, r.test_metric)).collect();
    let pick = select(&metrics, selector).expect("completed runs exist");
    let mut seconds: Vec<f64> = completed.iter().map(|r| r.outcome.train_seconds).collect();
    let median_seconds = median(&mut seconds);
    Ok(MultiRunResult {
        selected: completed.swap_remove(pick),
        records,
        median_seconds,
    })
}

/// Header of the per-run CSV.
pub const RUN_CSV_HEADER: &str = "run,seed,test_metric,train_seconds,epochs,status";

pub fn write_run_csv<W: std::io::Write>(out: &mut W, records: &[RunRecord]) -> Result<()> {
    writeln!(out, "{RUN_CSV_HEADER}")?;
    for r in records {
        let metric = r.test_metric.map(|m| format!("{m:.6}")).unwrap_or_default();
        let status = match &r.error {
            None => "ok".to_string(),
            Some(e) => format!("\"failed: {}\"", e.replace('"', "'")),
        };
        writeln!(out, "{},{},{},{:.3},{},{}", r.run, r.seed, metric, r.train_seconds, r.epochs, status)?;
    }
    Ok(())
}
