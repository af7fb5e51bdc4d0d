//! Seeded instance generation, oracle labelling, splitting and the text
//! dataset format.
//!
//! Sample `i` of a dataset built with seed `s` is drawn from the ChaCha8
//! stream `(s, DATA, i)`, so datasets are reproducible bit for bit and a
//! larger `count` only appends samples.
//!
//! File layout (one header line, then one line per sample):
//!
//! ```text
//! task=power n=3 count=1 seed=7 ranked=0 params=snr_db:10;zipf_skew:0.6;...
//! <state values, row-major>|<label values>[|<permutation indices>]
//! ```
//!
//! Values are written with 17 significant digits, which round-trips `f64`.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::oracles::{
    self, CachingInstance, InterferenceInstance, PowerAllocInstance, DEFAULT_KAPPA, WMMSE_MAX_ITER,
    WMMSE_TOL,
};
use crate::ranking::Permutation;
use crate::rng::{self, domain};

/// Number of samples in every test set.
pub const TEST_SET_SIZE: usize = 1000;

/// Seed of the reserved test-set stream, independent of any training seed.
pub const DEFAULT_TEST_SEED: u64 = 0x07E5_75E7_0000_0001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Task {
    Power,
    Caching,
    Interference,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Power, Task::Caching, Task::Interference];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Power => "power",
            Task::Caching => "caching",
            Task::Interference => "interference",
        }
    }

    /// Interference states are K x K gain matrices; the others are vectors.
    pub fn is_matrix(self) -> bool {
        matches!(self, Task::Interference)
    }

    pub fn state_len(self, num_objects: usize) -> usize {
        if self.is_matrix() {
            num_objects * num_objects
        } else {
            num_objects
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "power" => Ok(Task::Power),
            "caching" => Ok(Task::Caching),
            "interference" => Ok(Task::Interference),
            other => Err(Error::Config(format!("unknown task `{other}`"))),
        }
    }
}

/// Generator settings persisted with every dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    /// Mean per-subcarrier SNR under an equal power split.
    pub snr_db: f64,
    pub zipf_skew: f64,
    pub num_requests: usize,
    pub pmax: f64,
    pub noise: f64,
    pub kappa: f64,
    /// Expected number of cached files per base station.
    pub cache_budget: f64,
}

impl GeneratorParams {
    pub fn defaults(num_objects: usize) -> Self {
        Self {
            snr_db: 10.0,
            zipf_skew: 0.6,
            num_requests: 1000,
            pmax: 1.0,
            noise: 1.0,
            kappa: DEFAULT_KAPPA,
            cache_budget: 0.1 * num_objects as f64,
        }
    }

    /// Total power budget of an `n`-subcarrier instance.
    pub fn power_budget(&self, n: usize) -> f64 {
        n as f64 * self.noise * 10f64.powf(self.snr_db / 10.0)
    }

    fn encode(&self) -> String {
        format!(
            "snr_db:{};zipf_skew:{};num_requests:{};pmax:{};noise:{};kappa:{};cache_budget:{}",
            self.snr_db,
            self.zipf_skew,
            self.num_requests,
            self.pmax,
            self.noise,
            self.kappa,
            self.cache_budget
        )
    }

    fn decode(text: &str, line: usize) -> Result<Self> {
        let mut p = GeneratorParams::defaults(0);
        let mut seen = Vec::new();
        for item in text.split(';').filter(|s| !s.is_empty()) {
            let (key, value) = item
                .split_once(':')
                .ok_or_else(|| Error::parse(line, format!("bad param `{item}`")))?;
            let num = |v: &str| -> Result<f64> {
                v.parse::<f64>()
                    .map_err(|_| Error::parse(line, format!("bad value for {key}: `{v}`")))
            };
            match key {
                "snr_db" => p.snr_db = num(value)?,
                "zipf_skew" => p.zipf_skew = num(value)?,
                "num_requests" => {
                    p.num_requests = value
                        .parse()
                        .map_err(|_| Error::parse(line, format!("bad num_requests `{value}`")))?
                }
                "pmax" => p.pmax = num(value)?,
                "noise" => p.noise = num(value)?,
                "kappa" => p.kappa = num(value)?,
                "cache_budget" => p.cache_budget = num(value)?,
                other => return Err(Error::parse(line, format!("unknown param `{other}`"))),
            }
            seen.push(key.to_string());
        }
        if seen.len() != 7 {
            return Err(Error::parse(line, "params must list all seven generator keys"));
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Length-N vector, or K x K row-major matrix for interference.
    pub state: Vec<f64>,
    pub label: Vec<f64>,
    /// Present iff the sample has been ranked.
    pub permutation: Option<Permutation>,
}

impl Sample {
    pub fn is_ranked(&self) -> bool {
        self.permutation.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub task: Task,
    pub num_objects: usize,
    pub seed: u64,
    pub params: GeneratorParams,
    pub ranked: bool,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Checks shapes and the shared ranked flag.
    pub fn validate(&self) -> Result<()> {
        let state_len = self.task.state_len(self.num_objects);
        for (i, s) in self.samples.iter().enumerate() {
            if s.state.len() != state_len || s.label.len() != self.num_objects {
                return Err(Error::Schema(format!(
                    "sample {i}: state {} / label {} entries, expected {state_len} / {}",
                    s.state.len(),
                    s.label.len(),
                    self.num_objects
                )));
            }
            if s.is_ranked() != self.ranked {
                return Err(Error::Schema(format!("sample {i}: ranked flag disagrees with dataset")));
            }
            if let Some(p) = &s.permutation {
                if p.len() != self.num_objects {
                    return Err(Error::Schema(format!("sample {i}: permutation length {}", p.len())));
                }
            }
        }
        Ok(())
    }

    /// Rebuilds the optimization instance of a state under these params.
    pub fn instance(&self, state: &[f64]) -> Result<Instance> {
        Instance::from_state(self.task, self.num_objects, state, &self.params)
    }

    fn subset(&self, range: std::ops::Range<usize>) -> Dataset {
        Dataset {
            samples: self.samples[range].to_vec(),
            ..self.header_only()
        }
    }

    fn header_only(&self) -> Dataset {
        Dataset {
            task: self.task,
            num_objects: self.num_objects,
            seed: self.seed,
            params: self.params.clone(),
            ranked: self.ranked,
            samples: Vec::new(),
        }
    }
}

/// One optimization problem of any task.
#[derive(Debug, Clone, PartialEq)]
pub enum Instance {
    Power(PowerAllocInstance),
    Caching(CachingInstance),
    Interference(InterferenceInstance),
}

impl Instance {
    pub fn from_state(
        task: Task,
        num_objects: usize,
        state: &[f64],
        params: &GeneratorParams,
    ) -> Result<Self> {
        if state.len() != task.state_len(num_objects) {
            return Err(Error::Shape(format!(
                "{task} state of {} entries for {num_objects} objects",
                state.len()
            )));
        }
        Ok(match task {
            Task::Power => Instance::Power(PowerAllocInstance::new(
                state.to_vec(),
                params.power_budget(num_objects),
                params.noise,
            )?),
            Task::Caching => Instance::Caching(CachingInstance::new(
                state.to_vec(),
                params.cache_budget,
                params.kappa,
            )?),
            Task::Interference => Instance::Interference(InterferenceInstance::new(
                num_objects,
                state.to_vec(),
                params.pmax,
                params.noise,
            )?),
        })
    }

    pub fn state(&self) -> &[f64] {
        match self {
            Instance::Power(i) => &i.gains,
            Instance::Caching(i) => &i.popularity,
            Instance::Interference(i) => &i.gains,
        }
    }

    /// Optimal (or WMMSE) action.
    pub fn solve(&self) -> Result<Vec<f64>> {
        Ok(match self {
            Instance::Power(i) => oracles::waterfill_power(i),
            Instance::Caching(i) => oracles::cache_waterfill(i),
            Instance::Interference(i) => {
                let sol = oracles::wmmse(i, WMMSE_TOL, WMMSE_MAX_ITER)?;
                if !sol.converged {
                    log::debug!("wmmse stopped after {} iterations without converging", sol.iterations);
                }
                sol.powers
            }
        })
    }

    /// Task objective: sum rate or success probability.
    pub fn objective(&self, action: &[f64]) -> Result<f64> {
        match self {
            Instance::Power(i) => {
                if action.iter().any(|p| *p < 0.0) {
                    return Err(Error::Domain("negative power".into()));
                }
                oracles::sum_rate(&i.gains, action, i.noise)
            }
            Instance::Caching(i) => oracles::sop(i, action),
            Instance::Interference(i) => oracles::interference_sum_rate(i, action),
        }
    }
}

/// Exp(1) power gain: squared magnitude of a unit-variance circular complex
/// Gaussian coefficient.
fn rayleigh_power_gain<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let g = 0.5 * (re * re + im * im);
        if g > 0.0 {
            return g;
        }
    }
}

pub fn gen_power_instance<R: Rng + ?Sized>(
    n: usize,
    params: &GeneratorParams,
    rng: &mut R,
) -> Result<PowerAllocInstance> {
    if n < 1 {
        return Err(Error::Domain("power instance needs at least one subcarrier".into()));
    }
    let gains = (0..n).map(|_| rayleigh_power_gain(rng)).collect();
    PowerAllocInstance::new(gains, params.power_budget(n), params.noise)
}

pub fn gen_interference_instance<R: Rng + ?Sized>(
    k: usize,
    params: &GeneratorParams,
    rng: &mut R,
) -> Result<InterferenceInstance> {
    if k < 1 {
        return Err(Error::Domain("interference instance needs at least one link".into()));
    }
    let gains = (0..k * k).map(|_| rayleigh_power_gain(rng)).collect();
    InterferenceInstance::new(k, gains, params.pmax, params.noise)
}

/// Normalized Zipf masses `z_r ∝ r^-skew` in rank order.
pub fn zipf_masses(f: usize, skew: f64) -> Vec<f64> {
    let raw: Vec<f64> = (1..=f).map(|r| (r as f64).powf(-skew)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|z| z / total).collect()
}

/// Empirical file popularity: ranks are assigned to files by a uniformly
/// random permutation and `num_requests` requests are drawn from the
/// resulting Zipf law.
pub fn gen_popularity<R: Rng + ?Sized>(
    f: usize,
    skew: f64,
    num_requests: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    popularity_with_ranks(f, skew, num_requests, rng).map(|(pop, _)| pop)
}

/// As [`gen_popularity`], also returning the file index holding each rank.
fn popularity_with_ranks<R: Rng + ?Sized>(
    f: usize,
    skew: f64,
    num_requests: usize,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<usize>)> {
    if f < 1 || !(skew >= 0.0) || num_requests < 1 {
        return Err(Error::Domain(format!(
            "popularity needs f >= 1, skew >= 0, requests >= 1 (got {f}, {skew}, {num_requests})"
        )));
    }
    let by_rank = zipf_masses(f, skew);
    let mut file_of_rank: Vec<usize> = (0..f).collect();
    file_of_rank.shuffle(rng);
    let mut masses = vec![0.0; f];
    for (rank, &file) in file_of_rank.iter().enumerate() {
        masses[file] = by_rank[rank];
    }
    let law = WeightedIndex::new(&masses).map_err(|e| Error::Domain(e.to_string()))?;
    let mut counts = vec![0usize; f];
    for _ in 0..num_requests {
        counts[law.sample(rng)] += 1;
    }
    let total = num_requests as f64;
    let mut pop: Vec<f64> = counts.iter().map(|c| *c as f64 / total).collect();
    // absorb rounding so the vector sums to one
    let drift = 1.0 - pop.iter().sum::<f64>();
    if let Some(top) = pop.iter_mut().max_by(|a, b| a.total_cmp(b)) {
        *top += drift;
    }
    Ok((pop, file_of_rank))
}

fn gen_instance<R: Rng + ?Sized>(
    task: Task,
    n: usize,
    params: &GeneratorParams,
    rng: &mut R,
) -> Result<Instance> {
    Ok(match task {
        Task::Power => Instance::Power(gen_power_instance(n, params, rng)?),
        Task::Caching => {
            let pop = gen_popularity(n, params.zipf_skew, params.num_requests, rng)?;
            Instance::Caching(CachingInstance::new(pop, params.cache_budget, params.kappa)?)
        }
        Task::Interference => Instance::Interference(gen_interference_instance(n, params, rng)?),
    })
}

/// Generates and labels `count` unranked samples.
pub fn build_dataset(
    task: Task,
    num_objects: usize,
    count: usize,
    seed: u64,
    params: &GeneratorParams,
) -> Result<Dataset> {
    if num_objects < 1 {
        return Err(Error::Domain("at least one object required".into()));
    }
    let samples = (0..count)
        .map(|i| {
            let mut rng = rng::stream(seed, domain::DATA, i as u64);
            let inst = gen_instance(task, num_objects, params, &mut rng)?;
            let label = inst.solve().map_err(|e| Error::Oracle {
                index: i,
                source: Box::new(e),
            })?;
            Ok(Sample {
                state: inst.state().to_vec(),
                label,
                permutation: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        task,
        num_objects,
        seed,
        params: params.clone(),
        ranked: false,
        samples,
    })
}

/// Validation set size: smallest integer no smaller than 10% of the
/// training set.
pub fn validation_size(train_size: usize) -> usize {
    train_size.div_ceil(10)
}

/// Sizes of (train, validation, test).
pub fn split_sizes(train_size: usize) -> (usize, usize, usize) {
    (train_size, validation_size(train_size), TEST_SET_SIZE)
}

/// Partitions a dataset, in order, into train / validation / test.
pub fn split_dataset(ds: &Dataset, train_size: usize) -> Result<(Dataset, Dataset, Dataset)> {
    let (t, v, n) = split_sizes(train_size);
    if ds.len() < t + v + n {
        return Err(Error::Size(format!(
            "{} samples cannot fill train {t} + validation {v} + test {n}",
            ds.len()
        )));
    }
    Ok((
        ds.subset(0..t),
        ds.subset(t..t + v),
        ds.subset(t + v..t + v + n),
    ))
}

/// Fresh training and validation sets for one training run.
pub fn training_pair(
    task: Task,
    num_objects: usize,
    train_size: usize,
    seed: u64,
    params: &GeneratorParams,
) -> Result<(Dataset, Dataset)> {
    let (t, v, _) = split_sizes(train_size);
    let all = build_dataset(task, num_objects, t + v, seed, params)?;
    Ok((all.subset(0..t), all.subset(t..t + v)))
}

/// The fixed test set, drawn from the reserved test seed.
pub fn test_set(task: Task, num_objects: usize, test_seed: u64, params: &GeneratorParams) -> Result<Dataset> {
    build_dataset(task, num_objects, TEST_SET_SIZE, test_seed, params)
}

fn write_values(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&format!("{v:.16e}"));
    }
}

/// Serializes a dataset to its text form.
pub fn encode_dataset(ds: &Dataset) -> String {
    let mut out = format!(
        "task={} n={} count={} seed={} ranked={} params={}\n",
        ds.task,
        ds.num_objects,
        ds.samples.len(),
        ds.seed,
        u8::from(ds.ranked),
        ds.params.encode()
    );
    for s in &ds.samples {
        write_values(&mut out, &s.state);
        out.push('|');
        write_values(&mut out, &s.label);
        if let Some(p) = &s.permutation {
            out.push('|');
            let idx: Vec<String> = p.indices().iter().map(|i| i.to_string()).collect();
            out.push_str(&idx.join(","));
        }
        out.push('\n');
    }
    out
}

fn parse_values(field: &str, expected: usize, line: usize, what: &str) -> Result<Vec<f64>> {
    let values = field
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(line, format!("bad {what} value `{v}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.len() != expected {
        return Err(Error::parse(
            line,
            format!("{what} has {} columns, expected {expected}", values.len()),
        ));
    }
    Ok(values)
}

/// Parses the text form produced by [`encode_dataset`].
pub fn decode_dataset(text: &str) -> Result<Dataset> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::parse(1, "empty file"))?;

    let mut task = None;
    let mut n = None;
    let mut count = None;
    let mut seed = None;
    let mut ranked = None;
    let mut params = None;
    for field in header.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::parse(1, format!("bad header field `{field}`")))?;
        let int = |v: &str| -> Result<u64> {
            v.parse()
                .map_err(|_| Error::parse(1, format!("bad integer for {key}: `{v}`")))
        };
        match key {
            "task" => task = Some(value.parse::<Task>().map_err(|e| Error::parse(1, e.to_string()))?),
            "n" => n = Some(int(value)? as usize),
            "count" => count = Some(int(value)? as usize),
            "seed" => seed = Some(int(value)?),
            "ranked" => {
                ranked = Some(match value {
                    "0" => false,
                    "1" => true,
                    _ => return Err(Error::parse(1, format!("bad ranked flag `{value}`"))),
                })
            }
            "params" => params = Some(GeneratorParams::decode(value, 1)?),
            other => return Err(Error::parse(1, format!("unknown header key `{other}`"))),
        }
    }
    let missing = |k: &str| Error::parse(1, format!("header lacks `{k}`"));
    let task = task.ok_or_else(|| missing("task"))?;
    let n = n.ok_or_else(|| missing("n"))?;
    let count = count.ok_or_else(|| missing("count"))?;
    let seed = seed.ok_or_else(|| missing("seed"))?;
    let ranked = ranked.ok_or_else(|| missing("ranked"))?;
    let params = params.ok_or_else(|| missing("params"))?;

    let state_len = task.state_len(n);
    let mut samples = Vec::with_capacity(count);
    for (offset, raw) in lines.enumerate() {
        let line = offset + 2;
        if raw.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = raw.split('|').collect();
        let expected_parts = if ranked { 3 } else { 2 };
        if parts.len() != expected_parts {
            return Err(Error::Schema(format!(
                "line {line}: {} fields but ranked={}",
                parts.len(),
                u8::from(ranked)
            )));
        }
        let state = parse_values(parts[0], state_len, line, "state")?;
        let label = parse_values(parts[1], n, line, "label")?;
        let permutation = if ranked {
            let idx = parts[2]
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::parse(line, format!("bad permutation index `{v}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            if idx.len() != n {
                return Err(Error::parse(line, format!("permutation has {} entries", idx.len())));
            }
            Some(Permutation::new(idx).map_err(|e| Error::parse(line, e.to_string()))?)
        } else {
            None
        };
        samples.push(Sample {
            state,
            label,
            permutation,
        });
    }
    if samples.len() != count {
        return Err(Error::Schema(format!(
            "header announces {count} samples, file holds {}",
            samples.len()
        )));
    }
    let ds = Dataset {
        task,
        num_objects: n,
        seed,
        params,
        ranked,
        samples,
    };
    ds.validate()?;
    Ok(ds)
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(encode_dataset(ds).as_bytes())?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    decode_dataset(&fs::read_to_string(path)?)
}
